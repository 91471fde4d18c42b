#include <httplib.h>

#include <chrono>

#include "json_io.hpp"
#include "ticl/providers.hpp"

namespace ticl {

using detail::json;

namespace {

struct SplitUrl {
    std::string scheme_host_port;
    std::string path_prefix;
};

SplitUrl split_base_url(const std::string& base) {
    const auto scheme_end = base.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = base.find('/', host_start);
    SplitUrl out;
    out.scheme_host_port = base.substr(0, path_start);
    if (path_start != std::string::npos) out.path_prefix = base.substr(path_start);
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
    return out;
}

json post_json(const HttpEndpoint& endpoint, const std::string& route, const std::string& body) {
    const auto url = split_base_url(endpoint.base_url);
    httplib::Client client(url.scheme_host_port);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(endpoint.timeout_seconds));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!endpoint.bearer_token.empty()) headers.emplace("Authorization", "Bearer " + endpoint.bearer_token);

    const std::string path = url.path_prefix + route;
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
        fail(ErrorCode::ProviderError, "POST " + endpoint.base_url + route + ": " + httplib::to_string(res.error()));
    }

    json payload = json::parse(res->body, nullptr, false);
    if (res->status != 200) {
        std::string message = "HTTP " + std::to_string(res->status);
        if (!payload.is_discarded() && payload.is_object() && payload.contains("error") && payload["error"].is_string()) {
            message += ": " + payload["error"].get<std::string>();
        }
        fail(ErrorCode::ProviderError, "POST " + route + ": " + message);
    }
    if (payload.is_discarded() || !payload.is_object()) {
        fail(ErrorCode::ProviderError, "POST " + route + ": response is not a JSON object");
    }
    return payload;
}

} // namespace

std::string embed_text_request_body(std::span<const std::string> texts) {
    return json{{"texts", std::vector<std::string>(texts.begin(), texts.end())}}.dump();
}

std::string embed_audio_request_body(std::span<const std::string> audio_refs) {
    return json{{"audio_refs", std::vector<std::string>(audio_refs.begin(), audio_refs.end())}}.dump();
}

std::string transcribe_request_body(std::span<const std::string> audio_refs) {
    return embed_audio_request_body(audio_refs);
}

std::string generate_request_body(const ContextBundle& bundle) {
    json examples = json::array();
    for (const auto& e : bundle.examples) examples.push_back({{"audio_ref", e.audio_ref}, {"text", e.text}});
    return json{{"examples", std::move(examples)}, {"test_audio_ref", bundle.test_audio_ref}}.dump();
}

std::vector<EmbeddingVector> parse_embedding_response(std::string_view body, std::size_t declared_dim,
                                                      std::size_t expected_rows) {
    const json payload = json::parse(body, nullptr, false);
    if (payload.is_discarded() || !payload.is_object()) fail(ErrorCode::ProviderError, "embedding response is not an object");
    if (!payload.contains("dim") || !payload["dim"].is_number_unsigned()) {
        fail(ErrorCode::ProviderError, "embedding response lacks integer \"dim\"");
    }
    const auto dim = payload["dim"].get<std::size_t>();
    if (dim != declared_dim) {
        fail(ErrorCode::DimMismatch, "provider returned dim " + std::to_string(dim) + ", declared " +
                                         std::to_string(declared_dim));
    }
    const auto it = payload.find("embeddings");
    if (it == payload.end() || !it->is_array()) fail(ErrorCode::ProviderError, "embedding response lacks \"embeddings\"");
    if (it->size() != expected_rows) {
        fail(ErrorCode::ProviderError, "expected " + std::to_string(expected_rows) + " embeddings, got " +
                                           std::to_string(it->size()));
    }

    std::vector<EmbeddingVector> out;
    out.reserve(expected_rows);
    for (const auto& row : *it) {
        if (!row.is_array()) fail(ErrorCode::ProviderError, "embedding row is not an array");
        if (row.size() != declared_dim) {
            fail(ErrorCode::DimMismatch, "embedding row of length " + std::to_string(row.size()) + ", declared " +
                                             std::to_string(declared_dim));
        }
        std::vector<float> values;
        values.reserve(row.size());
        for (const auto& x : row) {
            if (!x.is_number()) fail(ErrorCode::ProviderError, "embedding value is not a number");
            values.push_back(x.get<float>());
        }
        out.push_back(l2_normalize(EmbeddingVector(std::move(values))));
    }
    return out;
}

std::vector<EmbeddingVector> HttpTextEmbedder::embed_text(std::span<const std::string> texts) {
    const auto payload = post_json(endpoint_, "/v1/embed-text", embed_text_request_body(texts));
    return parse_embedding_response(payload.dump(), dim_, texts.size());
}

std::vector<EmbeddingVector> HttpAcousticEmbedder::embed_audio(std::span<const std::string> audio_refs) {
    const auto payload = post_json(endpoint_, "/v1/embed-audio", embed_audio_request_body(audio_refs));
    return parse_embedding_response(payload.dump(), dim_, audio_refs.size());
}

std::vector<std::string> HttpAsr::transcribe(std::span<const std::string> audio_refs) {
    const auto payload = post_json(endpoint_, "/v1/transcribe", transcribe_request_body(audio_refs));
    const auto it = payload.find("texts");
    if (it == payload.end() || !it->is_array() || it->size() != audio_refs.size()) {
        fail(ErrorCode::ProviderError, "transcribe response must carry one text per audio_ref");
    }
    std::vector<std::string> out;
    for (const auto& t : *it) {
        if (!t.is_string()) fail(ErrorCode::ProviderError, "transcribe response text is not a string");
        out.push_back(t.get<std::string>());
    }
    return out;
}

std::string HttpAsr::pseudo_label(const std::string& audio_ref) {
    const std::vector<std::string> refs{audio_ref};
    return transcribe(refs).front();
}

std::string HttpSiclModel::generate(const ContextBundle& bundle) {
    const auto payload = post_json(endpoint_, "/v1/generate", generate_request_body(bundle));
    const auto it = payload.find("text");
    if (it == payload.end() || !it->is_string()) fail(ErrorCode::ProviderError, "generate response lacks \"text\"");
    return it->get<std::string>();
}

} // namespace ticl
