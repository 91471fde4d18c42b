#include "ticl/retrieval.hpp"

#include <algorithm>

#include "json_io.hpp"
#include "ticl/error.hpp"

namespace ticl {

using detail::json;

std::string_view to_string(Method m) noexcept {
    switch (m) {
    case Method::ZeroShot: return "zero_shot";
    case Method::Ticl: return "ticl";
    case Method::TiclPlus: return "ticl_plus";
    }
    return "zero_shot";
}

std::string_view display_name(Method m) noexcept {
    switch (m) {
    case Method::ZeroShot: return "Zero-Shot";
    case Method::Ticl: return "TICL";
    case Method::TiclPlus: return "TICL+";
    }
    return "Zero-Shot";
}

Method parse_method(std::string_view name) {
    if (name == "zero_shot") return Method::ZeroShot;
    if (name == "ticl") return Method::Ticl;
    if (name == "ticl_plus") return Method::TiclPlus;
    fail(ErrorCode::ConfigError, "unknown method '" + std::string(name) + "'");
}

std::string_view to_string(Ordering o) noexcept {
    switch (o) {
    case Ordering::SimilarLast: return "similar_last";
    case Ordering::SimilarFirst: return "similar_first";
    case Ordering::Stage1Order: return "stage1_order";
    }
    return "similar_last";
}

Ordering parse_ordering(std::string_view name) {
    if (name == "similar_last") return Ordering::SimilarLast;
    if (name == "similar_first") return Ordering::SimilarFirst;
    if (name == "stage1_order") return Ordering::Stage1Order;
    fail(ErrorCode::ConfigError, "unknown ordering '" + std::string(name) + "'");
}

void RetrievalConfig::validate() const {
    if (K < 1) fail(ErrorCode::ConfigError, "K must be at least 1");
    if (K > M) fail(ErrorCode::ConfigError, "K (" + std::to_string(K) + ") exceeds M (" + std::to_string(M) + ")");
}

namespace {

bool retrievable(const CandidateRecord& r, const TestQuery& query, const std::set<std::string>& exclude_ids) {
    return r.usable() && r.utterance_id != query.utterance_id && !exclude_ids.contains(r.utterance_id);
}

void require_dim(std::size_t store_dim, std::size_t query_dim, const char* what) {
    if (store_dim != query_dim) {
        fail(ErrorCode::DimMismatch, std::string(what) + " dim: store " + std::to_string(store_dim) + ", query " +
                                         std::to_string(query_dim));
    }
}

const EmbeddingVector& text_of(const CandidateRecord& r) {
    if (!r.text_embedding) fail(ErrorCode::DimMismatch, "record " + r.utterance_id + " has no text embedding");
    return *r.text_embedding;
}

const EmbeddingVector& acoustic_of(const CandidateRecord& r) {
    if (!r.acoustic_embedding) fail(ErrorCode::DimMismatch, "record " + r.utterance_id + " has no acoustic embedding");
    return *r.acoustic_embedding;
}

// Reranks a stage-one pool (semantic distance may be absent) by acoustic distance.
std::vector<ScoredCandidate> rerank(std::span<const ScoredCandidate> pool, const CandidateStore& store,
                                    const TestQuery& query, std::size_t k) {
    require_dim(store.acoustic_dim, query.acoustic_embedding.dim(), "acoustic");
    std::vector<RankedCandidate> by_acoustic;
    by_acoustic.reserve(pool.size());
    for (const auto& c : pool) {
        by_acoustic.push_back({c.candidate_index,
                               euclidean_distance(query.acoustic_embedding, acoustic_of(store.records.at(c.candidate_index)))});
    }
    by_acoustic = top_k(std::move(by_acoustic), k);

    std::vector<ScoredCandidate> out;
    out.reserve(by_acoustic.size());
    for (const auto& r : by_acoustic) {
        auto it = std::find_if(pool.begin(), pool.end(), [&](const auto& c) { return c.candidate_index == r.candidate_index; });
        out.push_back({r.candidate_index, it->semantic_distance, r.distance});
    }
    return out;
}

ContextBundle finish(ContextBundle bundle, Method method, const TestQuery& query, const RetrievalConfig& config) {
    bundle.method = method;
    bundle.test_utterance_id = query.utterance_id;
    bundle.M = config.M;
    bundle.K = config.K;
    return bundle;
}

} // namespace

std::vector<RankedCandidate> semantic_candidates(const CandidateStore& store, const TestQuery& query, std::size_t m,
                                                 const std::set<std::string>& exclude_ids) {
    if (!query.text_embedding) fail(ErrorCode::MissingPseudoLabelEmbedding, query.utterance_id);
    require_dim(store.text_dim, query.text_embedding->dim(), "text");

    std::vector<RankedCandidate> ranked;
    ranked.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& r = store.records[i];
        if (!retrievable(r, query, exclude_ids)) continue;
        ranked.push_back({i, euclidean_distance(*query.text_embedding, text_of(r))});
    }
    if (ranked.empty()) fail(ErrorCode::EmptyStore, "no usable candidates for " + query.utterance_id);
    return top_k(std::move(ranked), m);
}

std::vector<ScoredCandidate> acoustic_rerank(std::span<const RankedCandidate> stage1, const CandidateStore& store,
                                             const TestQuery& query, std::size_t k) {
    if (stage1.empty()) fail(ErrorCode::EmptyStageOne, query.utterance_id);
    std::vector<ScoredCandidate> pool;
    pool.reserve(stage1.size());
    for (const auto& c : stage1) pool.push_back({c.candidate_index, c.distance, std::nullopt});
    return rerank(pool, store, query, k);
}

ContextBundle retrieve_ticl(const CandidateStore& store, const TestQuery& query, const RetrievalConfig& config) {
    config.validate();
    const auto nearest = semantic_candidates(store, query, config.K, config.exclude_ids);

    const bool have_acoustic = store.acoustic_dim != 0 && store.acoustic_dim == query.acoustic_embedding.dim();
    std::vector<ScoredCandidate> scored;
    scored.reserve(nearest.size());
    for (const auto& c : nearest) {
        std::optional<double> acoustic;
        const auto& r = store.records[c.candidate_index];
        if (have_acoustic && r.acoustic_embedding) {
            acoustic = euclidean_distance(query.acoustic_embedding, *r.acoustic_embedding);
        }
        scored.push_back({c.candidate_index, c.distance, acoustic});
    }
    return finish(assemble_context(store, scored, config.ordering, query.audio_ref), Method::Ticl, query, config);
}

ContextBundle retrieve_ticl_plus(const CandidateStore& store, const TestQuery& query, const RetrievalConfig& config) {
    config.validate();
    if (query.text_embedding) {
        const auto pool = semantic_candidates(store, query, config.M, config.exclude_ids);
        const auto selected = acoustic_rerank(pool, store, query, config.K);
        return finish(assemble_context(store, selected, config.ordering, query.audio_ref), Method::TiclPlus, query,
                      config);
    }

    std::vector<ScoredCandidate> pool;
    for (std::size_t i = 0; i < store.size(); ++i) {
        if (retrievable(store.records[i], query, config.exclude_ids)) pool.push_back({i, std::nullopt, std::nullopt});
    }
    if (pool.empty()) fail(ErrorCode::EmptyStore, "no usable candidates for " + query.utterance_id);
    const auto selected = rerank(pool, store, query, config.K);
    auto bundle = finish(assemble_context(store, selected, config.ordering, query.audio_ref), Method::TiclPlus, query,
                         config);
    bundle.warnings.emplace_back(kNoPseudoLabelWarning);
    return bundle;
}

ContextBundle assemble_context(const CandidateStore& store, std::span<const ScoredCandidate> ranked, Ordering ordering,
                               std::string test_audio_ref) {
    std::vector<ScoredCandidate> order(ranked.begin(), ranked.end());
    switch (ordering) {
    case Ordering::SimilarFirst: break;
    case Ordering::SimilarLast: std::reverse(order.begin(), order.end()); break;
    case Ordering::Stage1Order:
        // Without stage-one distances the final rank is the only rank available.
        if (std::all_of(order.begin(), order.end(), [](const auto& c) { return c.semantic_distance.has_value(); })) {
            std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
                return ranks_before({a.candidate_index, *a.semantic_distance}, {b.candidate_index, *b.semantic_distance});
            });
        }
        break;
    }

    ContextBundle bundle;
    bundle.test_audio_ref = std::move(test_audio_ref);
    bundle.ordering = ordering;
    bundle.K = ranked.size();
    bundle.examples.reserve(order.size());
    for (const auto& c : order) {
        const auto& r = store.records.at(c.candidate_index);
        bundle.examples.push_back({r.utterance_id, r.audio_ref, r.transcription, c.semantic_distance, c.acoustic_distance});
    }
    return bundle;
}

ContextBundle zero_shot_bundle(std::string test_utterance_id, std::string test_audio_ref) {
    ContextBundle bundle;
    bundle.method = Method::ZeroShot;
    bundle.test_utterance_id = std::move(test_utterance_id);
    bundle.test_audio_ref = std::move(test_audio_ref);
    return bundle;
}

ContextBundle zero_shot_bundle(const TestQuery& query) { return zero_shot_bundle(query.utterance_id, query.audio_ref); }

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional_number(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) fail(ErrorCode::ParseError, std::string("bundle: \"") + key + "\" must be a number or null");
    return it->get<double>();
}

std::size_t read_count(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_number_unsigned()) {
        fail(ErrorCode::ParseError, std::string("bundle: \"") + key + "\" must be a non-negative integer");
    }
    return it->get<std::size_t>();
}

} // namespace

std::string format_bundle_line(const ContextBundle& bundle) {
    json examples = json::array();
    for (const auto& e : bundle.examples) {
        examples.push_back({{"audio_ref", e.audio_ref},
                            {"text", e.text},
                            {"utterance_id", e.utterance_id},
                            {"semantic_distance", optional_number(e.semantic_distance)},
                            {"acoustic_distance", optional_number(e.acoustic_distance)}});
    }
    json obj = {{"test_utterance_id", bundle.test_utterance_id},
                {"test_audio_ref", bundle.test_audio_ref},
                {"examples", std::move(examples)},
                {"ordering", to_string(bundle.ordering)},
                {"method", to_string(bundle.method)},
                {"config", {{"M", bundle.M}, {"K", bundle.K}}}};
    if (!bundle.warnings.empty()) obj["warnings"] = bundle.warnings;
    return obj.dump();
}

ContextBundle parse_bundle_line(std::string_view line) {
    auto lines = detail::parse_jsonl(line, "bundle");
    if (lines.size() != 1) fail(ErrorCode::ParseError, "bundle: expected exactly one record");
    const json& obj = lines.front().value;

    ContextBundle b;
    b.test_utterance_id = detail::required_string(obj, "test_utterance_id", "bundle");
    b.test_audio_ref = detail::required_string(obj, "test_audio_ref", "bundle");
    b.ordering = parse_ordering(detail::required_string(obj, "ordering", "bundle"));
    if (obj.contains("method")) b.method = parse_method(detail::required_string(obj, "method", "bundle"));

    auto cfg = obj.find("config");
    if (cfg == obj.end() || !cfg->is_object()) fail(ErrorCode::ParseError, "bundle: missing \"config\" object");
    b.M = read_count(*cfg, "M");
    b.K = read_count(*cfg, "K");

    auto ex = obj.find("examples");
    if (ex == obj.end() || !ex->is_array()) fail(ErrorCode::ParseError, "bundle: missing \"examples\" array");
    for (const auto& e : *ex) {
        if (!e.is_object()) fail(ErrorCode::ParseError, "bundle: example is not an object");
        b.examples.push_back({detail::required_string(e, "utterance_id", "bundle example"),
                              detail::required_string(e, "audio_ref", "bundle example"),
                              detail::required_string(e, "text", "bundle example"),
                              read_optional_number(e, "semantic_distance"),
                              read_optional_number(e, "acoustic_distance")});
    }
    if (auto w = obj.find("warnings"); w != obj.end()) {
        if (!w->is_array()) fail(ErrorCode::ParseError, "bundle: \"warnings\" must be an array");
        for (const auto& s : *w) b.warnings.push_back(s.get<std::string>());
    }
    return b;
}

} // namespace ticl
