#include "ticl/candidate_store.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "json_io.hpp"
#include "ticl/error.hpp"

namespace ticl {

using detail::json;

namespace {

constexpr const char* kStoreFormat = "ticl-store";
constexpr int kStoreVersion = 1;

ManifestEntry entry_from_json(const json& obj, const std::string& where) {
    ManifestEntry e;
    e.utterance_id = detail::required_string(obj, "utterance_id", where);
    e.audio_ref = detail::required_string(obj, "audio_ref", where);
    e.transcription = detail::required_string(obj, "transcription", where);
    e.split = detail::optional_string(obj, "split", where);
    if (e.utterance_id.empty()) fail(ErrorCode::ParseError, where + ": empty utterance_id");
    return e;
}

std::vector<ManifestEntry> entries_from_lines(const std::vector<detail::JsonLine>& lines, const std::string& source) {
    std::vector<ManifestEntry> entries;
    entries.reserve(lines.size());
    std::unordered_set<std::string> seen;
    for (const auto& line : lines) {
        auto e = entry_from_json(line.value, source + ":" + std::to_string(line.line_number));
        if (!seen.insert(e.utterance_id).second) fail(ErrorCode::DuplicateId, e.utterance_id);
        entries.push_back(std::move(e));
    }
    return entries;
}

EmbeddingVector bind_row(std::span<const float> row, std::size_t index) {
    const std::string where = "row " + std::to_string(index);
    for (float x : row) {
        if (!std::isfinite(x)) fail(ErrorCode::NonFinite, where);
    }
    const double n = l2_norm(row);
    if (n < kZeroNormThreshold) fail(ErrorCode::ZeroNorm, where);
    const double deviation = std::abs(n - 1.0);
    std::vector<float> values(row.begin(), row.end());
    if (deviation <= kNormTolerance) return EmbeddingVector::normalized_from(std::move(values));
    if (deviation < kRenormalizeLimit) return l2_normalize(EmbeddingVector(std::move(values)));
    fail(ErrorCode::NotNormalized, where + " has norm " + std::to_string(n));
}

std::vector<EmbeddingVector> collect(const CandidateStore& store, EmbeddingKind kind) {
    std::vector<EmbeddingVector> rows;
    rows.reserve(store.size());
    for (const auto& r : store.records) {
        const auto& e = kind == EmbeddingKind::Text ? r.text_embedding : r.acoustic_embedding;
        if (!e) return {};
        rows.push_back(*e);
    }
    return rows;
}

} // namespace

std::size_t CandidateStore::usable_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return r.usable(); }));
}

ManifestEntry parse_manifest_line(std::string_view line, std::size_t line_number) {
    auto lines = detail::parse_jsonl(line, "manifest");
    const std::string where = "manifest:" + std::to_string(line_number);
    if (lines.size() != 1) fail(ErrorCode::ParseError, where + ": expected exactly one record");
    return entry_from_json(lines.front().value, where);
}

std::string format_manifest_line(const ManifestEntry& entry) {
    json obj = {{"utterance_id", entry.utterance_id},
                {"audio_ref", entry.audio_ref},
                {"transcription", entry.transcription}};
    if (!entry.split.empty()) obj["split"] = entry.split;
    return obj.dump();
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    return entries_from_lines(detail::read_jsonl(path), path.filename().string());
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
    std::string out;
    for (const auto& e : entries) {
        out += format_manifest_line(e);
        out += '\n';
    }
    detail::write_text_file(path, out);
}

CandidateStore store_from_entries(const std::vector<ManifestEntry>& entries) {
    CandidateStore store;
    store.records.reserve(entries.size());
    std::unordered_set<std::string> seen;
    for (const auto& e : entries) {
        if (!seen.insert(e.utterance_id).second) fail(ErrorCode::DuplicateId, e.utterance_id);
        store.records.push_back(CandidateRecord{e.utterance_id, e.audio_ref, e.transcription, e.split, {}, {}});
    }
    return store;
}

CandidateStore ingest_manifest(const std::filesystem::path& manifest_path) {
    return store_from_entries(read_manifest(manifest_path));
}

CandidateStore attach_embeddings(CandidateStore store, const EmbeddingMatrix& embeddings, EmbeddingKind kind,
                                 std::optional<std::size_t> expected_dim) {
    if (embeddings.kind != kind) {
        fail(ErrorCode::KindMismatch, "file holds " + std::string(to_string(embeddings.kind)) + " embeddings, expected " +
                                          std::string(to_string(kind)));
    }
    if (embeddings.count() != store.size()) {
        fail(ErrorCode::CountMismatch, "embedding file has " + std::to_string(embeddings.count()) +
                                           " rows but the store has " + std::to_string(store.size()) + " records");
    }
    if (expected_dim && *expected_dim != embeddings.dim) {
        fail(ErrorCode::DimMismatch, "embedding file dim " + std::to_string(embeddings.dim) + ", expected " +
                                         std::to_string(*expected_dim));
    }

    for (std::size_t i = 0; i < store.size(); ++i) {
        auto v = bind_row(embeddings.row(i), i);
        auto& slot = kind == EmbeddingKind::Text ? store.records[i].text_embedding : store.records[i].acoustic_embedding;
        slot = std::move(v);
    }
    if (store.size() > 0) {
        (kind == EmbeddingKind::Text ? store.text_dim : store.acoustic_dim) = embeddings.dim;
    }
    return store;
}

CandidateStore attach_embeddings(CandidateStore store, const std::filesystem::path& emb_path, EmbeddingKind kind,
                                 std::optional<std::size_t> expected_dim) {
    return attach_embeddings(std::move(store), read_embedding_file(emb_path), kind, expected_dim);
}

ValidationReport validate(const CandidateStore& store) {
    ValidationReport report;
    report.record_count = store.size();
    report.text_dim = store.text_dim;
    report.acoustic_dim = store.acoustic_dim;

    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& r = store.records[i];
        if (r.utterance_id.empty()) report.violations.push_back({i, "EmptyId", "record has an empty utterance_id"});
        if (!seen.insert(r.utterance_id).second) report.violations.push_back({i, "DuplicateId", r.utterance_id});
        if (r.usable()) {
            ++report.usable_count;
        } else {
            report.unusable_records.push_back(i);
        }

        auto check = [&](const std::optional<EmbeddingVector>& e, EmbeddingKind kind, std::size_t dim) {
            const std::string label(to_string(kind));
            if (!e) {
                report.violations.push_back({i, "MissingEmbedding", label + " embedding pending"});
                return;
            }
            if (e->dim() != dim) {
                report.violations.push_back({i, "DimMismatch", label + " embedding dim " + std::to_string(e->dim()) +
                                                                   ", store declares " + std::to_string(dim)});
            }
            const double residual = std::abs(e->norm() - 1.0);
            if (residual > kNormTolerance || !e->normalized()) {
                report.residuals.push_back({i, kind, residual});
                report.violations.push_back(
                    {i, "NormResidual", label + " embedding norm residual " + std::to_string(residual)});
            }
        };
        check(r.text_embedding, EmbeddingKind::Text, store.text_dim);
        check(r.acoustic_embedding, EmbeddingKind::Acoustic, store.acoustic_dim);
    }
    return report;
}

void save_store(const CandidateStore& store, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json meta = {{"format", kStoreFormat},
                 {"version", kStoreVersion},
                 {"text_dim", store.text_dim},
                 {"acoustic_dim", store.acoustic_dim},
                 {"metadata", store.metadata}};
    detail::write_text_file(dir / "store.json", meta.dump(2) + "\n");

    std::vector<ManifestEntry> entries;
    entries.reserve(store.size());
    for (const auto& r : store.records) entries.push_back({r.utterance_id, r.audio_ref, r.transcription, r.split});
    write_manifest(dir / "records.jsonl", entries);

    for (auto kind : {EmbeddingKind::Text, EmbeddingKind::Acoustic}) {
        const auto path = dir / (kind == EmbeddingKind::Text ? "text.temb" : "acoustic.temb");
        const std::size_t dim = kind == EmbeddingKind::Text ? store.text_dim : store.acoustic_dim;
        auto rows = collect(store, kind);
        if (dim == 0 || rows.size() != store.size()) {
            std::filesystem::remove(path);
            continue;
        }
        write_embedding_file(path, make_matrix(kind, rows));
    }
}

CandidateStore load_store(const std::filesystem::path& dir) {
    const json meta = json::parse(detail::read_text_file(dir / "store.json"), nullptr, false);
    if (meta.is_discarded() || !meta.is_object()) fail(ErrorCode::ParseError, "store.json is not a JSON object");
    if (meta.value("format", "") != kStoreFormat) fail(ErrorCode::BadMagic, "store.json format is not ticl-store");
    if (meta.value("version", 0) != kStoreVersion) fail(ErrorCode::UnsupportedVersion, "store version");

    CandidateStore store = store_from_entries(read_manifest(dir / "records.jsonl"));
    if (auto it = meta.find("metadata"); it != meta.end() && it->is_object()) {
        for (const auto& [k, v] : it->items()) {
            if (v.is_string()) store.metadata[k] = v.get<std::string>();
        }
    }
    const std::size_t text_dim = meta.value("text_dim", std::size_t{0});
    const std::size_t acoustic_dim = meta.value("acoustic_dim", std::size_t{0});
    if (std::filesystem::exists(dir / "text.temb")) {
        store = attach_embeddings(std::move(store), dir / "text.temb", EmbeddingKind::Text, text_dim);
    }
    if (std::filesystem::exists(dir / "acoustic.temb")) {
        store = attach_embeddings(std::move(store), dir / "acoustic.temb", EmbeddingKind::Acoustic, acoustic_dim);
    }
    store.text_dim = text_dim;
    store.acoustic_dim = acoustic_dim;
    return store;
}

} // namespace ticl
