#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ticl/candidate_store.hpp"
#include "ticl/geometry.hpp"

namespace ticl {

enum class Method { ZeroShot, Ticl, TiclPlus };

std::string_view to_string(Method m) noexcept;
std::string_view display_name(Method m) noexcept;
Method parse_method(std::string_view name);

/// Demonstration order inside the context.
///   SimilarLast  - closest example immediately precedes the test query
///   SimilarFirst - closest example first
///   Stage1Order  - semantic (stage-one) rank, closest first
enum class Ordering { SimilarLast, SimilarFirst, Stage1Order };

std::string_view to_string(Ordering o) noexcept;
Ordering parse_ordering(std::string_view name);

inline constexpr std::size_t kDefaultPoolSize = 300;

struct RetrievalConfig {
    std::size_t M = kDefaultPoolSize;
    std::size_t K = 1;
    Ordering ordering = Ordering::SimilarLast;
    std::set<std::string> exclude_ids;

    /// Throws ConfigError unless 1 <= K <= M.
    void validate() const;
};

struct TestQuery {
    std::string utterance_id;
    std::string audio_ref;
    std::string pseudo_label;
    std::optional<EmbeddingVector> text_embedding; // present iff pseudo_label is non-empty
    EmbeddingVector acoustic_embedding;
};

/// A selected candidate with whatever distances were computed for it.
struct ScoredCandidate {
    std::size_t candidate_index = 0;
    std::optional<double> semantic_distance;
    std::optional<double> acoustic_distance;

    friend bool operator==(const ScoredCandidate&, const ScoredCandidate&) = default;
};

struct ContextExample {
    std::string utterance_id;
    std::string audio_ref;
    std::string text;
    std::optional<double> semantic_distance;
    std::optional<double> acoustic_distance;

    friend bool operator==(const ContextExample&, const ContextExample&) = default;
};

struct ContextBundle {
    Method method = Method::ZeroShot;
    std::string test_utterance_id;
    std::string test_audio_ref;
    std::vector<ContextExample> examples;
    Ordering ordering = Ordering::SimilarLast;
    std::size_t M = 0;
    std::size_t K = 0;
    std::vector<std::string> warnings;

    bool zero_shot() const noexcept { return examples.empty(); }

    friend bool operator==(const ContextBundle&, const ContextBundle&) = default;
};

/// Stage one: top-min(m, usable) candidates by text-embedding distance.
/// The query's own id and `exclude_ids` are filtered before ranking.
std::vector<RankedCandidate> semantic_candidates(const CandidateStore& store, const TestQuery& query, std::size_t m,
                                                 const std::set<std::string>& exclude_ids = {});

/// Stage two: rerank `stage1` by acoustic distance and keep the top k.
std::vector<ScoredCandidate> acoustic_rerank(std::span<const RankedCandidate> stage1, const CandidateStore& store,
                                             const TestQuery& query, std::size_t k);

ContextBundle retrieve_ticl(const CandidateStore& store, const TestQuery& query, const RetrievalConfig& config);

/// Two-stage retrieval. With an empty pseudo-label the semantic stage is
/// skipped, every usable candidate is reranked acoustically and a warning is
/// recorded on the bundle.
ContextBundle retrieve_ticl_plus(const CandidateStore& store, const TestQuery& query, const RetrievalConfig& config);

/// `ranked` must be closest-first under the final distance.
ContextBundle assemble_context(const CandidateStore& store, std::span<const ScoredCandidate> ranked, Ordering ordering,
                               std::string test_audio_ref);

ContextBundle zero_shot_bundle(const TestQuery& query);
ContextBundle zero_shot_bundle(std::string test_utterance_id, std::string test_audio_ref);

std::string format_bundle_line(const ContextBundle& bundle);
ContextBundle parse_bundle_line(std::string_view line);

inline constexpr const char* kNoPseudoLabelWarning = "empty pseudo-label: semantic stage skipped, acoustic-only retrieval";

} // namespace ticl
