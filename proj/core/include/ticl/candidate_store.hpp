#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ticl/embedding_file.hpp"
#include "ticl/geometry.hpp"

namespace ticl {

/// One manifest line: an utterance, its audio reference and its transcription.
struct ManifestEntry {
    std::string utterance_id;
    std::string audio_ref;
    std::string transcription;
    std::string split;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct CandidateRecord {
    std::string utterance_id;
    std::string audio_ref;
    std::string transcription;
    std::string split;
    std::optional<EmbeddingVector> text_embedding;
    std::optional<EmbeddingVector> acoustic_embedding;

    /// Records without a transcription are kept for positional binding but never retrieved.
    bool usable() const noexcept { return !transcription.empty(); }

    friend bool operator==(const CandidateRecord&, const CandidateRecord&) = default;
};

/// Candidate set with precomputed normalized embeddings. Record order is the
/// tie-break identity used by every ranking, so it never changes after ingest.
struct CandidateStore {
    std::vector<CandidateRecord> records;
    std::size_t text_dim = 0;     // 0 while text embeddings are pending
    std::size_t acoustic_dim = 0; // 0 while acoustic embeddings are pending
    std::map<std::string, std::string> metadata;

    std::size_t size() const noexcept { return records.size(); }
    std::size_t usable_count() const noexcept;

    friend bool operator==(const CandidateStore&, const CandidateStore&) = default;
};

ManifestEntry parse_manifest_line(std::string_view line, std::size_t line_number);
std::string format_manifest_line(const ManifestEntry& entry);

/// Reads a manifest; ids must be unique (DuplicateId), malformed lines raise ParseError.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

CandidateStore ingest_manifest(const std::filesystem::path& manifest_path);
CandidateStore store_from_entries(const std::vector<ManifestEntry>& entries);

inline constexpr double kRenormalizeLimit = 1e-3;

/// Binds row i of `embeddings` to record i. Rows whose norm deviates from 1
/// by more than kNormTolerance but less than kRenormalizeLimit are
/// re-normalized; larger deviations raise NotNormalized.
CandidateStore attach_embeddings(CandidateStore store, const EmbeddingMatrix& embeddings, EmbeddingKind kind,
                                 std::optional<std::size_t> expected_dim = std::nullopt);
CandidateStore attach_embeddings(CandidateStore store, const std::filesystem::path& emb_path, EmbeddingKind kind,
                                 std::optional<std::size_t> expected_dim = std::nullopt);

struct Violation {
    std::optional<std::size_t> record_index;
    std::string kind;
    std::string message;
};

struct NormResidual {
    std::size_t record_index = 0;
    EmbeddingKind kind = EmbeddingKind::Text;
    double residual = 0.0; // | ||v|| - 1 |
};

struct ValidationReport {
    std::size_t record_count = 0;
    std::size_t usable_count = 0;
    std::size_t text_dim = 0;
    std::size_t acoustic_dim = 0;
    std::vector<std::size_t> unusable_records;
    std::vector<NormResidual> residuals;
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }
};

ValidationReport validate(const CandidateStore& store);

// A store on disk is a directory:
//   store.json      {"format":"ticl-store","version":1,"text_dim":..,"acoustic_dim":..,"metadata":{..}}
//   records.jsonl   one manifest line per record, in index order
//   text.temb       embedding file (kind=text), absent while pending
//   acoustic.temb   embedding file (kind=acoustic), absent while pending
void save_store(const CandidateStore& store, const std::filesystem::path& dir);
CandidateStore load_store(const std::filesystem::path& dir);

} // namespace ticl
