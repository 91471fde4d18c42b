#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ticl {

using Tokens = std::vector<std::string>;

/// default: Unicode lowercase, punctuation replaced by spaces except
///          apostrophes between two alphanumerics, whitespace collapsed.
/// whitespace: split on whitespace only.
enum class TextNormPolicy { Default, Whitespace };

std::string_view to_string(TextNormPolicy p) noexcept;
TextNormPolicy parse_text_norm(std::string_view name);

Tokens normalize_text(std::string_view text, TextNormPolicy policy = TextNormPolicy::Default);

struct EditCounts {
    std::size_t substitutions = 0;
    std::size_t deletions = 0;
    std::size_t insertions = 0;
    std::size_t reference_length = 0;

    std::size_t errors() const noexcept { return substitutions + deletions + insertions; }
    /// May exceed 1 for insertion-heavy hypotheses.
    double wer() const noexcept;

    friend bool operator==(const EditCounts&, const EditCounts&) = default;
};

/// Minimum-edit alignment with unit costs. Among alignments with the fewest
/// edits, the one with the fewest insertions+deletions is chosen, which makes
/// the S/D/I split unique. Accepts an empty reference.
EditCounts align(std::span<const std::string> reference, std::span<const std::string> hypothesis);

/// As align(), but throws EmptyReference for an empty reference.
EditCounts word_error_rate(std::span<const std::string> reference, std::span<const std::string> hypothesis);

/// pooled: total errors over total reference words.
/// mean_utterance: unweighted mean of per-utterance WER.
enum class Aggregation { Pooled, MeanUtterance };

std::string_view to_string(Aggregation a) noexcept;
Aggregation parse_aggregation(std::string_view name);

using TokenPair = std::pair<Tokens, Tokens>;

/// Percent. Pairs with an empty reference are skipped; throws NoValidPairs if none remain.
double corpus_wer(std::span<const TokenPair> pairs, Aggregation aggregation = Aggregation::Pooled);
double corpus_wer(std::span<const EditCounts> counts, Aggregation aggregation = Aggregation::Pooled);

/// 100 * (baseline - method) / baseline. Throws ZeroBaseline when baseline <= 0.
double relative_reduction(double baseline_wer, double method_wer);

} // namespace ticl
