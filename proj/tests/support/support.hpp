#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "ticl/candidate_store.hpp"
#include "ticl/eval.hpp"
#include "ticl/geometry.hpp"
#include "ticl/retrieval.hpp"
#include "ticl/wer.hpp"

namespace ticl::testing {

/// Unique scratch directory removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string& tag = "ticl");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& contents);
std::string read_text(const std::filesystem::path& path);

// Random geometry ----------------------------------------------------------------

std::vector<float> random_gaussian(std::mt19937_64& rng, std::size_t dim);
EmbeddingVector random_unit(std::mt19937_64& rng, std::size_t dim);

/// Unit vector at exactly Euclidean distance `distance` (in [0, 2]) from unit `anchor`.
EmbeddingVector unit_at_distance(std::mt19937_64& rng, const EmbeddingVector& anchor, double distance);

struct RandomStoreOptions {
    std::size_t max_n = 200;
    std::size_t max_dim = 32;
    double empty_transcription_rate = 0.05;
    double duplicate_rate = 0.1; // chance a record copies an earlier record's embeddings (planted ties)
};

struct RandomCase {
    CandidateStore store;
    TestQuery query;
};

/// Random store plus a query; sometimes reuses a store id as the query id to
/// exercise self-exclusion.
RandomCase random_case(std::mt19937_64& rng, const RandomStoreOptions& options = {});

// Independent oracles --------------------------------------------------------------

/// Full stable sort of every eligible record by distance (index order on ties), truncated to `limit`.
/// `use_text` picks the text embedding, otherwise the acoustic one. `pool` restricts the candidates.
std::vector<std::size_t> brute_force_rank(const CandidateStore& store, const TestQuery& query, bool use_text,
                                          std::size_t limit, const std::set<std::string>& exclude_ids,
                                          const std::vector<std::size_t>* pool = nullptr);

double brute_distance(std::span<const float> a, std::span<const float> b);

std::vector<std::size_t> oracle_ticl(const CandidateStore& store, const TestQuery& query, std::size_t k);
std::vector<std::size_t> oracle_ticl_plus(const CandidateStore& store, const TestQuery& query, std::size_t m,
                                          std::size_t k);

std::vector<std::size_t> indices_of(const CandidateStore& store, const ContextBundle& bundle);
std::set<std::size_t> as_set(const std::vector<std::size_t>& v);

/// Edit counts by memoized recursion over suffixes, tracking the (S, D, I)
/// triple directly; chooses the fewest edits, then the fewest indels.
EditCounts wer_oracle_dp(const Tokens& ref, const Tokens& hyp);

/// Every alignment enumerated explicitly; only feasible for short inputs.
EditCounts wer_oracle_exhaustive(const Tokens& ref, const Tokens& hyp);

Tokens random_tokens(std::mt19937_64& rng, std::size_t max_len, std::size_t vocab);

// Reference WER table ------------------------------------------------------------------

/// Four-corpus WER table (zero-shot, then k = 1..4 for each method) used as an
/// arithmetic fixture; columns are MyST, OGI, ENNI, RSR.
EvalReport reference_wer_table();

struct ExpectedDelta {
    std::string dataset;
    Method method;
    double percent; // as printed, one decimal
};
std::vector<ExpectedDelta> reference_deltas();

// Planted two-cluster experiment ------------------------------------------------------

struct PlantedFixture {
    std::filesystem::path dir;
    std::filesystem::path config;      // experiment config (JSON)
    std::filesystem::path store;       // ingested + attached store directory
    std::filesystem::path test_manifest;
    std::size_t test_count = 0;
    std::size_t words_per_reference = 0;
};

struct PlantedOptions {
    std::size_t tests = 8;
    std::size_t words = 20;
    std::size_t background = 40;
    std::size_t dim = 16;
    std::size_t M = 8;
    std::uint64_t seed = 1234;
    std::string sicl_policy = "similarity_noise";
};

/// Writes a candidate store where, for each test utterance, the semantically
/// nearest candidates are acoustically far (distance ~1.1) while slightly
/// less similar candidates (still inside the top M) are acoustically near
/// (0.1..0.3). Acoustic decoys outside the top M sit even closer
/// acoustically. The acoustically nearest in-pool candidate carries the test
/// reference as its transcription.
PlantedFixture write_planted_fixture(const std::filesystem::path& dir, const PlantedOptions& options = {});

// HTTP stub ---------------------------------------------------------------------------

struct StubBehavior {
    std::size_t dim = 8;
    std::size_t reported_dim = 8; // what the stub claims in "dim"
    bool fail_all = false;        // respond 500 {"error": ...}
    int fail_first_n = 0;         // fail the first n requests, then succeed
    std::map<std::string, std::string> transcripts;
    std::string generate_text = "stub hypothesis";
    std::string required_token; // if set, demand "Authorization: Bearer <token>"
};

class StubServer {
  public:
    explicit StubServer(StubBehavior behavior);
    ~StubServer();
    StubServer(const StubServer&) = delete;
    StubServer& operator=(const StubServer&) = delete;

    std::string base_url() const;
    int requests() const;
    std::string last_body(const std::string& route) const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace ticl::testing
