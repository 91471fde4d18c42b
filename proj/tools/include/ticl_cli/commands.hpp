#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "ticl/embedding_file.hpp"
#include "ticl/eval.hpp"
#include "ticl/retrieval.hpp"
#include "ticl_cli/experiment_config.hpp"

namespace ticl::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kProvider = 3 };

struct GlobalOptions {
    std::optional<std::filesystem::path> config;
    std::filesystem::path output_dir = ".";
    std::optional<std::size_t> jobs;
    std::optional<std::uint64_t> seed;
    bool verbose = false;
};

struct Streams {
    std::ostream& out;
    std::ostream& err;
};

/// Runs `body`, mapping ticl::Error to its exit class and writing a one-line
/// {"error": code, "message": ...} record to the error stream.
int guarded(const Streams& io, const std::function<int()>& body);

int cmd_ingest(const GlobalOptions& g, const Streams& io, const std::filesystem::path& manifest,
               std::optional<std::filesystem::path> out_store);

struct AttachOptions {
    std::filesystem::path store;
    std::filesystem::path embeddings;
    EmbeddingKind kind = EmbeddingKind::Text;
    std::optional<std::size_t> dim;
    std::string model_id;
    std::string pooling;
};
int cmd_attach(const GlobalOptions& g, const Streams& io, const AttachOptions& opts);

int cmd_validate(const GlobalOptions& g, const Streams& io, const std::filesystem::path& store);

struct RetrieveOptions {
    std::optional<Method> method;
    std::optional<std::size_t> k;
    std::optional<std::size_t> m;
    std::optional<std::filesystem::path> store;
    std::optional<std::filesystem::path> test_manifest;
    std::optional<std::filesystem::path> out;
};
int cmd_retrieve(const GlobalOptions& g, const Streams& io, const RetrieveOptions& opts);

/// Writes audit.jsonl, report.json, report.csv, report.txt and bundles/ under the output directory.
int cmd_evaluate(const GlobalOptions& g, const Streams& io);

int cmd_report(const GlobalOptions& g, const Streams& io, const std::filesystem::path& report, ReportFormat format,
               std::optional<std::filesystem::path> out);

/// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace ticl::cli
