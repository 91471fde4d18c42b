#include <iostream>

#include "ticl_cli/commands.hpp"

int main(int argc, char** argv) { return ticl::cli::run_cli(argc, argv, std::cout, std::cerr); }
