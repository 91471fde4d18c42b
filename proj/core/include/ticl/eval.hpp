#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ticl/candidate_store.hpp"
#include "ticl/providers.hpp"
#include "ticl/retrieval.hpp"
#include "ticl/wer.hpp"

namespace ticl {

struct EvalConfig {
    std::vector<Method> methods{Method::ZeroShot, Method::Ticl, Method::TiclPlus};
    std::vector<std::size_t> k_values{1, 2, 3, 4};
    std::size_t M = kDefaultPoolSize;
    Ordering ordering = Ordering::SimilarLast;
    TextNormPolicy text_norm = TextNormPolicy::Default;
    Aggregation aggregation = Aggregation::Pooled;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;

    /// Throws ConfigError: k_values must be non-empty, strictly ascending, >= 1 and <= M.
    void validate() const;
};

struct EvalCell {
    std::string dataset;
    Method method = Method::ZeroShot;
    std::size_t k = 0; // 0 for zero-shot
    double wer_percent = 0.0;
    std::size_t utterances = 0;
    std::size_t errors = 0;
    std::size_t reference_words = 0;

    friend bool operator==(const EvalCell&, const EvalCell&) = default;
};

struct DeltaRel {
    std::string dataset;
    Method method = Method::Ticl;
    double percent = 0.0;
    std::size_t best_k = 0;

    friend bool operator==(const DeltaRel&, const DeltaRel&) = default;
};

struct EvalFailure {
    std::string dataset;
    std::string utterance_id;
    Method method = Method::ZeroShot;
    std::size_t k = 0;
    std::string error;

    friend bool operator==(const EvalFailure&, const EvalFailure&) = default;
};

struct EvalReport {
    std::vector<std::string> datasets; // column order
    std::vector<EvalCell> cells;
    std::vector<DeltaRel> delta_rel;
    std::vector<EvalFailure> failures;
    std::map<std::string, std::string> provenance;

    const EvalCell* find_cell(std::string_view dataset, Method method, std::size_t k) const;
    const DeltaRel* find_delta(std::string_view dataset, Method method) const;
    bool empty() const noexcept { return cells.empty(); }
};

/// Recomputes delta_rel from cells: for every dataset with a positive
/// zero-shot WER and every other method, 100 * (zs - min_k wer) / zs.
/// Ties on the best WER go to the smaller k.
void compute_delta_rel(EvalReport& report);

/// Appends `other` (a different dataset) to `into`.
void merge_reports(EvalReport& into, const EvalReport& other);

struct AuditRecord {
    std::string dataset;
    std::string utterance_id;
    Method method = Method::ZeroShot;
    std::size_t k = 0;
    std::string reference;
    std::optional<std::string> hypothesis;
    std::optional<double> wer;
    std::string bundle_ref;
    std::string error;
};

std::string format_audit_line(const AuditRecord& record);

struct BundleFile {
    std::string name; // relative path under the output directory
    std::vector<ContextBundle> bundles;
};

struct EvalDataset {
    std::string name;
    CandidateStore store;
    std::vector<ManifestEntry> test_set;
};

struct SweepResult {
    EvalReport report;
    std::vector<AuditRecord> audit;
    std::vector<BundleFile> bundle_files;
};

std::string bundle_file_name(std::string_view dataset, Method method, std::size_t k);

/// For every method and k: build bundles (empty for zero-shot), generate,
/// score. Provider and retrieval failures are recorded per utterance; only
/// configuration errors abort. Output order is independent of `jobs`.
SweepResult run_sweep(const EvalDataset& dataset, ProviderSet& providers, const EvalConfig& config);

enum class ReportFormat { AlignedText, Csv };
ReportFormat parse_report_format(std::string_view name);

/// WER cells to two decimals. Delta rows: one decimal in the aligned table
/// (matching the usual printed precision), two in csv.
std::string render_report(const EvalReport& report, ReportFormat format);

/// Reads cells and delta rows back from csv produced by render_report. When the
/// csv has no delta rows they are computed from the cells.
EvalReport parse_report_csv(std::string_view csv);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(std::string_view text);

} // namespace ticl
