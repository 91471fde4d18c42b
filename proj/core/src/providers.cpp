#include "ticl/providers.hpp"

#include <algorithm>

namespace ticl {

std::string_view to_string(ProviderKind k) noexcept {
    switch (k) {
    case ProviderKind::TextEmbedder: return "text_embedder";
    case ProviderKind::AcousticEmbedder: return "acoustic_embedder";
    case ProviderKind::Asr: return "asr";
    case ProviderKind::SiclModel: return "sicl_model";
    }
    return "text_embedder";
}

std::string_view to_string(Backend b) noexcept {
    switch (b) {
    case Backend::PrecomputedFile: return "precomputed_file";
    case Backend::Http: return "http";
    case Backend::Mock: return "mock";
    }
    return "mock";
}

ProviderKind parse_provider_kind(std::string_view name) {
    if (name == "text_embedder") return ProviderKind::TextEmbedder;
    if (name == "acoustic_embedder") return ProviderKind::AcousticEmbedder;
    if (name == "asr") return ProviderKind::Asr;
    if (name == "sicl_model") return ProviderKind::SiclModel;
    fail(ErrorCode::ConfigError, "unknown provider kind '" + std::string(name) + "'");
}

Backend parse_backend(std::string_view name) {
    if (name == "precomputed_file") return Backend::PrecomputedFile;
    if (name == "http") return Backend::Http;
    if (name == "mock") return Backend::Mock;
    fail(ErrorCode::ConfigError, "unknown provider backend '" + std::string(name) + "'");
}

void ProviderSpec::validate() const {
    const std::string who = std::string(to_string(kind)) + "/" + std::string(to_string(backend));
    const bool embedder = kind == ProviderKind::TextEmbedder || kind == ProviderKind::AcousticEmbedder;
    switch (backend) {
    case Backend::PrecomputedFile:
        if (kind == ProviderKind::SiclModel) fail(ErrorCode::ConfigError, who + ": precomputed files cannot generate");
        if (endpoint_or_path.empty()) fail(ErrorCode::ConfigError, who + ": missing path");
        if (embedder && index_path.empty()) fail(ErrorCode::ConfigError, who + ": missing index manifest");
        break;
    case Backend::Http:
        if (endpoint_or_path.empty()) fail(ErrorCode::ConfigError, who + ": missing base endpoint");
        if (timeout_seconds <= 0) fail(ErrorCode::ConfigError, who + ": timeout must be positive");
        break;
    case Backend::Mock:
        if (!seed) fail(ErrorCode::ConfigError, who + ": mock backends must declare a seed");
        if (kind == ProviderKind::SiclModel && policy != "nearest_echo" && policy != "similarity_noise") {
            fail(ErrorCode::ConfigError, who + ": unknown mock policy '" + policy + "'");
        }
        break;
    }
    if (embedder && backend != Backend::PrecomputedFile && dim == 0) {
        fail(ErrorCode::ConfigError, who + ": embedders must declare dim");
    }
}

std::string transcribe_with_context(SiclModel& model, const ContextBundle& bundle) { return model.generate(bundle); }

// InFlightGate -----------------------------------------------------------------

InFlightGate::InFlightGate(std::size_t limit) : limit_(std::max<std::size_t>(limit, 1)) {}

void InFlightGate::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_ < limit_; });
    ++in_flight_;
    peak_ = std::max(peak_, in_flight_);
}

void InFlightGate::release() {
    {
        std::lock_guard lock(mutex_);
        --in_flight_;
    }
    cv_.notify_one();
}

std::size_t InFlightGate::peak() const {
    std::lock_guard lock(mutex_);
    return peak_;
}

namespace {

class GateGuard {
  public:
    explicit GateGuard(InFlightGate& gate) : gate_(gate) { gate_.acquire(); }
    ~GateGuard() { gate_.release(); }
    GateGuard(const GateGuard&) = delete;
    GateGuard& operator=(const GateGuard&) = delete;

  private:
    InFlightGate& gate_;
};

std::unique_ptr<InFlightGate> gate_for(bool present, bool safe, std::size_t max_in_flight) {
    if (!present) return nullptr;
    return std::make_unique<InFlightGate>(safe ? max_in_flight : 1);
}

template <typename P> P& require(const std::unique_ptr<P>& p, const char* what) {
    if (!p) fail(ErrorCode::ConfigError, std::string("no ") + what + " provider configured");
    return *p;
}

} // namespace

ProviderSet::ProviderSet(std::unique_ptr<TextEmbedder> text, std::unique_ptr<AcousticEmbedder> acoustic,
                         std::unique_ptr<AsrProvider> asr, std::unique_ptr<SiclModel> sicl, std::size_t max_in_flight,
                         int retries)
    : text_(std::move(text)), acoustic_(std::move(acoustic)), asr_(std::move(asr)), sicl_(std::move(sicl)),
      retries_(std::max(retries, 0)) {
    text_gate_ = gate_for(text_ != nullptr, text_ && text_->concurrency_safe(), max_in_flight);
    acoustic_gate_ = gate_for(acoustic_ != nullptr, acoustic_ && acoustic_->concurrency_safe(), max_in_flight);
    asr_gate_ = gate_for(asr_ != nullptr, asr_ && asr_->concurrency_safe(), max_in_flight);
    sicl_gate_ = gate_for(true, !sicl_ || sicl_->concurrency_safe(), max_in_flight);
}

std::vector<EmbeddingVector> ProviderSet::embed_text(std::span<const std::string> inputs) {
    auto& p = require(text_, "text_embedder");
    auto out = with_retries(retries_, [&] {
        GateGuard guard(*text_gate_);
        return p.embed_text(inputs);
    });
    for (const auto& v : out) {
        if (v.dim() != p.dim()) fail(ErrorCode::DimMismatch, "text embedder returned dim " + std::to_string(v.dim()));
    }
    return out;
}

std::vector<EmbeddingVector> ProviderSet::embed_audio(std::span<const std::string> inputs) {
    auto& p = require(acoustic_, "acoustic_embedder");
    auto out = with_retries(retries_, [&] {
        GateGuard guard(*acoustic_gate_);
        return p.embed_audio(inputs);
    });
    for (const auto& v : out) {
        if (v.dim() != p.dim()) fail(ErrorCode::DimMismatch, "acoustic embedder returned dim " + std::to_string(v.dim()));
    }
    return out;
}

std::string ProviderSet::pseudo_label(const std::string& input) {
    auto& p = require(asr_, "asr");
    return with_retries(retries_, [&] {
        GateGuard guard(*asr_gate_);
        return p.pseudo_label(input);
    });
}

std::string ProviderSet::generate(const ContextBundle& bundle) {
    auto& p = require(sicl_, "sicl_model");
    return with_retries(retries_, [&] {
        GateGuard guard(*sicl_gate_);
        return transcribe_with_context(p, bundle);
    });
}

void ProviderSet::make_serial(ProviderKind kind) {
    auto& gate = kind == ProviderKind::TextEmbedder       ? text_gate_
                 : kind == ProviderKind::AcousticEmbedder ? acoustic_gate_
                 : kind == ProviderKind::Asr              ? asr_gate_
                                                          : sicl_gate_;
    if (gate) gate = std::make_unique<InFlightGate>(1);
}

InputKey ProviderSet::text_input_key() const { return require(text_, "text_embedder").input_key(); }
InputKey ProviderSet::acoustic_input_key() const { return require(acoustic_, "acoustic_embedder").input_key(); }
InputKey ProviderSet::asr_input_key() const { return require(asr_, "asr").input_key(); }

TestQuery make_test_query(const ManifestEntry& entry, ProviderSet& providers) {
    auto pick = [&](InputKey key, const std::string& content) {
        return key == InputKey::UtteranceId ? entry.utterance_id : content;
    };

    TestQuery q;
    q.utterance_id = entry.utterance_id;
    q.audio_ref = entry.audio_ref;
    q.pseudo_label = providers.pseudo_label(pick(providers.asr_input_key(), entry.audio_ref));

    const std::vector<std::string> audio{pick(providers.acoustic_input_key(), entry.audio_ref)};
    auto acoustic = providers.embed_audio(audio);
    if (acoustic.size() != 1) fail(ErrorCode::ProviderError, "acoustic embedder returned wrong row count");
    q.acoustic_embedding = std::move(acoustic.front());

    if (!q.pseudo_label.empty()) {
        const std::vector<std::string> text{pick(providers.text_input_key(), q.pseudo_label)};
        auto emb = providers.embed_text(text);
        if (emb.size() != 1) fail(ErrorCode::ProviderError, "text embedder returned wrong row count");
        q.text_embedding = std::move(emb.front());
    }
    return q;
}

// Factories --------------------------------------------------------------------

namespace {

HttpEndpoint endpoint_of(const ProviderSpec& spec) {
    return HttpEndpoint{spec.endpoint_or_path, spec.timeout_seconds, spec.bearer_token};
}

std::map<std::string, std::string> fixtures_of(const ProviderSpec& spec) {
    auto fixtures = spec.fixtures;
    if (!spec.fixtures_path.empty()) {
        for (const auto& e : read_manifest(spec.fixtures_path)) fixtures.emplace(e.audio_ref, e.transcription);
    }
    return fixtures;
}

void require_kind(const ProviderSpec& spec, ProviderKind kind) {
    if (spec.kind != kind) {
        fail(ErrorCode::ConfigError, "expected a " + std::string(to_string(kind)) + " spec, got " +
                                         std::string(to_string(spec.kind)));
    }
    spec.validate();
}

void check_table_dim(const PrecomputedEmbeddings& table, const ProviderSpec& spec) {
    if (spec.dim != 0 && table.dim() != spec.dim) {
        fail(ErrorCode::DimMismatch, spec.endpoint_or_path + " has dim " + std::to_string(table.dim()) +
                                         ", declared " + std::to_string(spec.dim));
    }
}

} // namespace

std::unique_ptr<TextEmbedder> make_text_embedder(const ProviderSpec& spec) {
    require_kind(spec, ProviderKind::TextEmbedder);
    switch (spec.backend) {
    case Backend::Mock: return std::make_unique<MockTextEmbedder>(*spec.seed, spec.dim);
    case Backend::Http: return std::make_unique<HttpTextEmbedder>(endpoint_of(spec), spec.dim);
    case Backend::PrecomputedFile: {
        PrecomputedEmbeddings table(spec.endpoint_or_path, spec.index_path);
        check_table_dim(table, spec);
        return std::make_unique<FileTextEmbedder>(std::move(table));
    }
    }
    return nullptr;
}

std::unique_ptr<AcousticEmbedder> make_acoustic_embedder(const ProviderSpec& spec) {
    require_kind(spec, ProviderKind::AcousticEmbedder);
    switch (spec.backend) {
    case Backend::Mock: return std::make_unique<MockAcousticEmbedder>(*spec.seed, spec.dim);
    case Backend::Http: return std::make_unique<HttpAcousticEmbedder>(endpoint_of(spec), spec.dim);
    case Backend::PrecomputedFile: {
        PrecomputedEmbeddings table(spec.endpoint_or_path, spec.index_path);
        check_table_dim(table, spec);
        return std::make_unique<FileAcousticEmbedder>(std::move(table));
    }
    }
    return nullptr;
}

std::unique_ptr<AsrProvider> make_asr(const ProviderSpec& spec) {
    require_kind(spec, ProviderKind::Asr);
    switch (spec.backend) {
    case Backend::Mock: return std::make_unique<MockAsr>(fixtures_of(spec));
    case Backend::Http: return std::make_unique<HttpAsr>(endpoint_of(spec));
    case Backend::PrecomputedFile: return std::make_unique<FileAsr>(spec.endpoint_or_path);
    }
    return nullptr;
}

std::unique_ptr<SiclModel> make_sicl_model(const ProviderSpec& spec) {
    require_kind(spec, ProviderKind::SiclModel);
    switch (spec.backend) {
    case Backend::Mock:
        if (spec.policy == "similarity_noise") {
            return std::make_unique<SimilarityNoiseModel>(fixtures_of(spec), *spec.seed, spec.noise_scale,
                                                          spec.zero_shot_distance);
        }
        return std::make_unique<NearestEchoModel>(fixtures_of(spec));
    case Backend::Http: return std::make_unique<HttpSiclModel>(endpoint_of(spec));
    case Backend::PrecomputedFile: break;
    }
    fail(ErrorCode::ConfigError, "sicl_model cannot use a precomputed file");
}

} // namespace ticl
