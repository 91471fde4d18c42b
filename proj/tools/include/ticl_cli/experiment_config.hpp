#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ticl/eval.hpp"
#include "ticl/providers.hpp"
#include "ticl/retrieval.hpp"

namespace ticl::cli {

using ProviderSpecs = std::map<ProviderKind, ProviderSpec>;

struct DatasetConfig {
    std::string name;
    std::filesystem::path store;
    std::filesystem::path test_manifest;
    ProviderSpecs provider_overrides;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::size_t max_in_flight = kDefaultMaxInFlight;
    int retries = 2;
    ProviderSpecs providers;
    RetrievalConfig retrieval;
    Method retrieve_method = Method::TiclPlus;
    EvalConfig eval;
    std::vector<DatasetConfig> datasets;

    /// Base specs with the dataset's overrides applied.
    ProviderSpecs providers_for(const DatasetConfig& dataset) const;
};

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::optional<std::string> bearer_token;
};

/// Parses the experiment document. Relative paths resolve against
/// `base_dir`. Flag overrides win over document values; the seed override
/// also replaces every mock provider seed.
ExperimentConfig parse_experiment_config(std::string_view text, const std::filesystem::path& base_dir,
                                         const Overrides& overrides = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path, const Overrides& overrides = {});

ProviderSet make_providers(const ProviderSpecs& specs, std::size_t max_in_flight, int retries);

} // namespace ticl::cli
