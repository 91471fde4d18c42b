#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json_io.hpp"
#include "ticl/providers.hpp"

namespace ticl {

namespace {

// Distinct salts keep text and acoustic mocks uncorrelated for the same string.
constexpr std::uint64_t kTextSalt = 0x5445585400000001ULL;
constexpr std::uint64_t kAcousticSalt = 0x41434f5500000002ULL;

std::vector<std::string> split_words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> words;
    for (std::string w; in >> w;) words.push_back(std::move(w));
    return words;
}

} // namespace

std::uint64_t fnv1a_64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

EmbeddingVector hash_embedding(std::string_view input, std::uint64_t seed, std::uint64_t salt, std::size_t dim) {
    const std::uint64_t base = fnv1a_64(input) ^ splitmix64(seed ^ salt);
    std::vector<float> values(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        const std::uint64_t h = splitmix64(base + j);
        const double unit = static_cast<double>(h >> 11) * 0x1.0p-53; // [0, 1)
        values[j] = static_cast<float>(2.0 * unit - 1.0);
    }
    return l2_normalize(EmbeddingVector(std::move(values)));
}

MockTextEmbedder::MockTextEmbedder(std::uint64_t seed, std::size_t dim) : seed_(seed), dim_(dim) {
    if (dim_ == 0) fail(ErrorCode::ConfigError, "mock text embedder needs dim >= 1");
}

std::vector<EmbeddingVector> MockTextEmbedder::embed_text(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(hash_embedding(t, seed_, kTextSalt, dim_));
    return out;
}

MockAcousticEmbedder::MockAcousticEmbedder(std::uint64_t seed, std::size_t dim) : seed_(seed), dim_(dim) {
    if (dim_ == 0) fail(ErrorCode::ConfigError, "mock acoustic embedder needs dim >= 1");
}

std::vector<EmbeddingVector> MockAcousticEmbedder::embed_audio(std::span<const std::string> audio_refs) {
    std::vector<EmbeddingVector> out;
    out.reserve(audio_refs.size());
    for (const auto& r : audio_refs) out.push_back(hash_embedding(r, seed_, kAcousticSalt, dim_));
    return out;
}

std::string MockAsr::pseudo_label(const std::string& audio_ref) {
    auto it = fixtures_.find(audio_ref);
    return it == fixtures_.end() ? std::string{} : it->second;
}

std::string NearestEchoModel::generate(const ContextBundle& bundle) {
    if (!bundle.examples.empty()) return bundle.examples.back().text;
    auto it = fixtures_.find(bundle.test_audio_ref);
    return it == fixtures_.end() ? std::string{} : it->second;
}

SimilarityNoiseModel::SimilarityNoiseModel(std::map<std::string, std::string> references, std::uint64_t seed,
                                           double noise_scale, double zero_shot_distance)
    : references_(std::move(references)), seed_(seed), noise_scale_(noise_scale),
      zero_shot_distance_(zero_shot_distance) {
    if (noise_scale_ < 0 || zero_shot_distance_ < 0) fail(ErrorCode::ConfigError, "noise parameters must be >= 0");
}

double SimilarityNoiseModel::substitution_rate(const ContextBundle& bundle) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& e : bundle.examples) {
        if (e.acoustic_distance) {
            sum += *e.acoustic_distance;
            ++n;
        }
    }
    const double mean = n == 0 ? zero_shot_distance_ : sum / static_cast<double>(n);
    return std::clamp(noise_scale_ * mean, 0.0, 1.0);
}

std::string SimilarityNoiseModel::generate(const ContextBundle& bundle) {
    auto it = references_.find(bundle.test_audio_ref);
    if (it == references_.end()) fail(ErrorCode::ProviderError, "no reference fixture for " + bundle.test_audio_ref);

    auto words = split_words(it->second);
    const auto n_sub = static_cast<std::size_t>(
        std::lround(substitution_rate(bundle) * static_cast<double>(words.size())));

    // Fisher-Yates over positions with a splitmix64 stream; portable, unlike std::shuffle.
    std::vector<std::size_t> positions(words.size());
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    std::uint64_t state = splitmix64(seed_ ^ fnv1a_64(bundle.test_audio_ref));
    for (std::size_t i = positions.size(); i > 1; --i) {
        state = splitmix64(state);
        std::swap(positions[i - 1], positions[state % i]);
    }
    for (std::size_t i = 0; i < n_sub && i < positions.size(); ++i) words[positions[i]] += "q";

    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

// Precomputed files ------------------------------------------------------------

PrecomputedEmbeddings::PrecomputedEmbeddings(const std::filesystem::path& emb_path,
                                             const std::filesystem::path& index_manifest) {
    matrix_ = read_embedding_file(emb_path);
    const auto entries = read_manifest(index_manifest);
    if (entries.size() != matrix_.count()) {
        fail(ErrorCode::CountMismatch, emb_path.string() + " has " + std::to_string(matrix_.count()) + " rows, index has " +
                                           std::to_string(entries.size()));
    }
    for (std::size_t i = 0; i < entries.size(); ++i) rows_.emplace(entries[i].utterance_id, i);
}

PrecomputedEmbeddings::PrecomputedEmbeddings(EmbeddingMatrix matrix, std::vector<std::string> ids)
    : matrix_(std::move(matrix)) {
    if (ids.size() != matrix_.count()) fail(ErrorCode::CountMismatch, "ids vs rows");
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!rows_.emplace(ids[i], i).second) fail(ErrorCode::DuplicateId, ids[i]);
    }
}

EmbeddingVector PrecomputedEmbeddings::lookup(const std::string& utterance_id) const {
    auto it = rows_.find(utterance_id);
    if (it == rows_.end()) fail(ErrorCode::ProviderError, "no precomputed embedding for '" + utterance_id + "'");
    const auto row = matrix_.row(it->second);
    std::vector<float> values(row.begin(), row.end());
    if (std::abs(l2_norm(values) - 1.0) <= kNormTolerance) return EmbeddingVector::normalized_from(std::move(values));
    return l2_normalize(EmbeddingVector(std::move(values)));
}

std::vector<EmbeddingVector> FileTextEmbedder::embed_text(std::span<const std::string> ids) {
    std::vector<EmbeddingVector> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(table_.lookup(id));
    return out;
}

std::vector<EmbeddingVector> FileAcousticEmbedder::embed_audio(std::span<const std::string> ids) {
    std::vector<EmbeddingVector> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(table_.lookup(id));
    return out;
}

FileAsr::FileAsr(const std::filesystem::path& labels_path) {
    const std::string source = labels_path.filename().string();
    for (const auto& line : detail::read_jsonl(labels_path)) {
        const std::string where = source + ":" + std::to_string(line.line_number);
        auto id = detail::required_string(line.value, "utterance_id", where);
        auto label = detail::required_string(line.value, "pseudo_label", where);
        if (!labels_.emplace(std::move(id), std::move(label)).second) {
            fail(ErrorCode::DuplicateId, detail::required_string(line.value, "utterance_id", where));
        }
    }
}

std::string FileAsr::pseudo_label(const std::string& utterance_id) {
    auto it = labels_.find(utterance_id);
    if (it == labels_.end()) fail(ErrorCode::ProviderError, "no pseudo-label for '" + utterance_id + "'");
    return it->second;
}

} // namespace ticl
