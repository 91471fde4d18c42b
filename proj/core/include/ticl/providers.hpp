#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ticl/candidate_store.hpp"
#include "ticl/error.hpp"
#include "ticl/geometry.hpp"
#include "ticl/retrieval.hpp"

namespace ticl {

enum class ProviderKind { TextEmbedder, AcousticEmbedder, Asr, SiclModel };
enum class Backend { PrecomputedFile, Http, Mock };

std::string_view to_string(ProviderKind k) noexcept;
std::string_view to_string(Backend b) noexcept;
ProviderKind parse_provider_kind(std::string_view name);
Backend parse_backend(std::string_view name);

/// What a provider expects as its per-item input. Precomputed files are
/// looked up by utterance id; every other backend consumes the content
/// (transcription text or audio reference).
enum class InputKey { Content, UtteranceId };

struct ProviderSpec {
    ProviderKind kind = ProviderKind::TextEmbedder;
    Backend backend = Backend::Mock;
    std::string endpoint_or_path; // http base URL or embedding / label file
    std::string index_path;       // precomputed embeddings: manifest whose line i names row i
    std::string model_id;
    std::size_t dim = 0; // embedder kinds only
    std::optional<std::uint64_t> seed; // required for mock backends

    // mock sicl_model
    std::string policy = "nearest_echo"; // nearest_echo | similarity_noise
    double noise_scale = 0.5;
    double zero_shot_distance = 1.4142135623730951;
    // mock asr / mock sicl_model fixtures: audio_ref -> text
    std::map<std::string, std::string> fixtures;
    std::string fixtures_path; // manifest; adds audio_ref -> transcription fixtures

    // http
    double timeout_seconds = 60.0;
    std::string bearer_token;

    bool serial_only = false;

    void validate() const;
};

class TextEmbedder {
  public:
    virtual ~TextEmbedder() = default;
    /// One unit-norm vector of dim() per input.
    virtual std::vector<EmbeddingVector> embed_text(std::span<const std::string> texts) = 0;
    virtual std::size_t dim() const = 0;
    virtual InputKey input_key() const { return InputKey::Content; }
    virtual bool concurrency_safe() const { return true; }
};

class AcousticEmbedder {
  public:
    virtual ~AcousticEmbedder() = default;
    virtual std::vector<EmbeddingVector> embed_audio(std::span<const std::string> audio_refs) = 0;
    virtual std::size_t dim() const = 0;
    virtual InputKey input_key() const { return InputKey::Content; }
    virtual bool concurrency_safe() const { return true; }
};

class AsrProvider {
  public:
    virtual ~AsrProvider() = default;
    /// May return an empty string; callers must handle the missing label.
    virtual std::string pseudo_label(const std::string& audio_ref) = 0;
    virtual InputKey input_key() const { return InputKey::Content; }
    virtual bool concurrency_safe() const { return true; }
};

class SiclModel {
  public:
    virtual ~SiclModel() = default;
    virtual std::string generate(const ContextBundle& bundle) = 0;
    virtual bool concurrency_safe() const { return true; }
};

/// Zero-shot when the bundle has no examples.
std::string transcribe_with_context(SiclModel& model, const ContextBundle& bundle);

// Mock backends ------------------------------------------------------------

std::uint64_t fnv1a_64(std::string_view bytes) noexcept;
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Deterministic embedding of `input`: one 64-bit hash per coordinate mapped
/// to [-1, 1), then l2-normalized. Pure function of (seed, salt, input, dim).
EmbeddingVector hash_embedding(std::string_view input, std::uint64_t seed, std::uint64_t salt, std::size_t dim);

class MockTextEmbedder final : public TextEmbedder {
  public:
    MockTextEmbedder(std::uint64_t seed, std::size_t dim);
    std::vector<EmbeddingVector> embed_text(std::span<const std::string> texts) override;
    std::size_t dim() const override { return dim_; }

  private:
    std::uint64_t seed_;
    std::size_t dim_;
};

class MockAcousticEmbedder final : public AcousticEmbedder {
  public:
    MockAcousticEmbedder(std::uint64_t seed, std::size_t dim);
    std::vector<EmbeddingVector> embed_audio(std::span<const std::string> audio_refs) override;
    std::size_t dim() const override { return dim_; }

  private:
    std::uint64_t seed_;
    std::size_t dim_;
};

/// Returns the fixture text for a known audio_ref and "" otherwise.
class MockAsr final : public AsrProvider {
  public:
    explicit MockAsr(std::map<std::string, std::string> fixtures) : fixtures_(std::move(fixtures)) {}
    std::string pseudo_label(const std::string& audio_ref) override;

  private:
    std::map<std::string, std::string> fixtures_;
};

/// Echoes the answer of the last example; zero-shot returns the fixture text
/// for the test audio ("" if unknown).
class NearestEchoModel final : public SiclModel {
  public:
    explicit NearestEchoModel(std::map<std::string, std::string> fixtures) : fixtures_(std::move(fixtures)) {}
    std::string generate(const ContextBundle& bundle) override;

  private:
    std::map<std::string, std::string> fixtures_;
};

/// Corrupts the reference transcript of the test audio. The number of
/// substituted words is round(min(1, noise_scale * d) * n_words), where d is
/// the mean acoustic distance of the bundle's examples (zero_shot_distance
/// when there are none). Substituted positions are a seeded permutation
/// prefix, so more noise always corrupts a superset of positions.
class SimilarityNoiseModel final : public SiclModel {
  public:
    SimilarityNoiseModel(std::map<std::string, std::string> references, std::uint64_t seed, double noise_scale,
                         double zero_shot_distance);
    std::string generate(const ContextBundle& bundle) override;

    double substitution_rate(const ContextBundle& bundle) const;

  private:
    std::map<std::string, std::string> references_;
    std::uint64_t seed_;
    double noise_scale_;
    double zero_shot_distance_;
};

// Precomputed-file backends ------------------------------------------------

/// Embedding file plus a manifest naming each row; lookups are by utterance id.
class PrecomputedEmbeddings {
  public:
    PrecomputedEmbeddings(const std::filesystem::path& emb_path, const std::filesystem::path& index_manifest);
    PrecomputedEmbeddings(EmbeddingMatrix matrix, std::vector<std::string> ids);

    /// Throws ProviderError for an unknown id.
    EmbeddingVector lookup(const std::string& utterance_id) const;
    std::size_t dim() const noexcept { return matrix_.dim; }
    EmbeddingKind kind() const noexcept { return matrix_.kind; }

  private:
    EmbeddingMatrix matrix_;
    std::map<std::string, std::size_t> rows_;
};

class FileTextEmbedder final : public TextEmbedder {
  public:
    explicit FileTextEmbedder(PrecomputedEmbeddings table) : table_(std::move(table)) {}
    std::vector<EmbeddingVector> embed_text(std::span<const std::string> ids) override;
    std::size_t dim() const override { return table_.dim(); }
    InputKey input_key() const override { return InputKey::UtteranceId; }

  private:
    PrecomputedEmbeddings table_;
};

class FileAcousticEmbedder final : public AcousticEmbedder {
  public:
    explicit FileAcousticEmbedder(PrecomputedEmbeddings table) : table_(std::move(table)) {}
    std::vector<EmbeddingVector> embed_audio(std::span<const std::string> ids) override;
    std::size_t dim() const override { return table_.dim(); }
    InputKey input_key() const override { return InputKey::UtteranceId; }

  private:
    PrecomputedEmbeddings table_;
};

/// Line-delimited {"utterance_id": str, "pseudo_label": str}; unknown ids raise ProviderError.
class FileAsr final : public AsrProvider {
  public:
    explicit FileAsr(const std::filesystem::path& labels_path);
    explicit FileAsr(std::map<std::string, std::string> labels) : labels_(std::move(labels)) {}
    std::string pseudo_label(const std::string& utterance_id) override;
    InputKey input_key() const override { return InputKey::UtteranceId; }

  private:
    std::map<std::string, std::string> labels_;
};

// HTTP backends --------------------------------------------------------------

struct HttpEndpoint {
    std::string base_url; // e.g. http://127.0.0.1:8080 or http://host/prefix
    double timeout_seconds = 60.0;
    std::string bearer_token;
};

class HttpTextEmbedder final : public TextEmbedder {
  public:
    HttpTextEmbedder(HttpEndpoint endpoint, std::size_t dim) : endpoint_(std::move(endpoint)), dim_(dim) {}
    std::vector<EmbeddingVector> embed_text(std::span<const std::string> texts) override;
    std::size_t dim() const override { return dim_; }

  private:
    HttpEndpoint endpoint_;
    std::size_t dim_;
};

class HttpAcousticEmbedder final : public AcousticEmbedder {
  public:
    HttpAcousticEmbedder(HttpEndpoint endpoint, std::size_t dim) : endpoint_(std::move(endpoint)), dim_(dim) {}
    std::vector<EmbeddingVector> embed_audio(std::span<const std::string> audio_refs) override;
    std::size_t dim() const override { return dim_; }

  private:
    HttpEndpoint endpoint_;
    std::size_t dim_;
};

class HttpAsr final : public AsrProvider {
  public:
    explicit HttpAsr(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
    std::string pseudo_label(const std::string& audio_ref) override;
    std::vector<std::string> transcribe(std::span<const std::string> audio_refs);

  private:
    HttpEndpoint endpoint_;
};

class HttpSiclModel final : public SiclModel {
  public:
    explicit HttpSiclModel(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
    std::string generate(const ContextBundle& bundle) override;

  private:
    HttpEndpoint endpoint_;
};

// Request bodies of the wire protocol, exposed for conformance tests.
std::string embed_text_request_body(std::span<const std::string> texts);
std::string embed_audio_request_body(std::span<const std::string> audio_refs);
std::string transcribe_request_body(std::span<const std::string> audio_refs);
std::string generate_request_body(const ContextBundle& bundle);

/// Validates a {"dim", "embeddings"} response against the declared dim and
/// expected row count, and normalizes each row.
std::vector<EmbeddingVector> parse_embedding_response(std::string_view body, std::size_t declared_dim,
                                                      std::size_t expected_rows);

// Concurrency ----------------------------------------------------------------

inline constexpr std::size_t kDefaultMaxInFlight = 4;

/// Counting gate bounding the number of concurrent calls into one provider.
class InFlightGate {
  public:
    explicit InFlightGate(std::size_t limit);

    void acquire();
    void release();
    std::size_t limit() const noexcept { return limit_; }
    std::size_t peak() const;

  private:
    std::size_t limit_;
    std::size_t in_flight_ = 0;
    std::size_t peak_ = 0;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
};

/// The four providers a pipeline run needs, each behind its own in-flight
/// gate. Providers that are not concurrency safe get a gate of one.
class ProviderSet {
  public:
    ProviderSet(std::unique_ptr<TextEmbedder> text, std::unique_ptr<AcousticEmbedder> acoustic,
                std::unique_ptr<AsrProvider> asr, std::unique_ptr<SiclModel> sicl,
                std::size_t max_in_flight = kDefaultMaxInFlight, int retries = 2);

    std::vector<EmbeddingVector> embed_text(std::span<const std::string> inputs);
    std::vector<EmbeddingVector> embed_audio(std::span<const std::string> inputs);
    std::string pseudo_label(const std::string& input);
    std::string generate(const ContextBundle& bundle);

    bool has_text() const noexcept { return text_ != nullptr; }
    bool has_acoustic() const noexcept { return acoustic_ != nullptr; }
    bool has_asr() const noexcept { return asr_ != nullptr; }
    bool has_sicl() const noexcept { return sicl_ != nullptr; }

    /// Bounds calls into provider `kind` to one at a time.
    void make_serial(ProviderKind kind);

    InputKey text_input_key() const;
    InputKey acoustic_input_key() const;
    InputKey asr_input_key() const;

    const InFlightGate& sicl_gate() const noexcept { return *sicl_gate_; }
    int retries() const noexcept { return retries_; }

  private:
    std::unique_ptr<TextEmbedder> text_;
    std::unique_ptr<AcousticEmbedder> acoustic_;
    std::unique_ptr<AsrProvider> asr_;
    std::unique_ptr<SiclModel> sicl_;
    std::unique_ptr<InFlightGate> text_gate_, acoustic_gate_, asr_gate_, sicl_gate_;
    int retries_;
};

/// Runs `call` and retries up to `retries` extra times on ProviderError.
template <typename F> auto with_retries(int retries, F&& call) -> decltype(call()) {
    for (int attempt = 0;; ++attempt) {
        try {
            return call();
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ProviderError || attempt >= retries) throw;
        }
    }
}

std::unique_ptr<TextEmbedder> make_text_embedder(const ProviderSpec& spec);
std::unique_ptr<AcousticEmbedder> make_acoustic_embedder(const ProviderSpec& spec);
std::unique_ptr<AsrProvider> make_asr(const ProviderSpec& spec);
std::unique_ptr<SiclModel> make_sicl_model(const ProviderSpec& spec);

/// Pseudo-labels and embeds one test utterance. The text embedding is only
/// computed when the pseudo-label is non-empty.
TestQuery make_test_query(const ManifestEntry& entry, ProviderSet& providers);

} // namespace ticl
