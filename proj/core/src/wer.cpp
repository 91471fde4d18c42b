#include "ticl/wer.hpp"

#include <algorithm>
#include <cwctype>
#include <locale>

#include "ticl/error.hpp"

namespace ticl {

std::string_view to_string(TextNormPolicy p) noexcept { return p == TextNormPolicy::Default ? "default" : "whitespace"; }

TextNormPolicy parse_text_norm(std::string_view name) {
    if (name == "default") return TextNormPolicy::Default;
    if (name == "whitespace") return TextNormPolicy::Whitespace;
    fail(ErrorCode::ConfigError, "unknown text normalization policy '" + std::string(name) + "'");
}

std::string_view to_string(Aggregation a) noexcept { return a == Aggregation::Pooled ? "pooled" : "mean_utterance"; }

Aggregation parse_aggregation(std::string_view name) {
    if (name == "pooled") return Aggregation::Pooled;
    if (name == "mean_utterance") return Aggregation::MeanUtterance;
    fail(ErrorCode::ConfigError, "unknown aggregation '" + std::string(name) + "'");
}

namespace {

// Malformed UTF-8 bytes decode to U+FFFD.
std::u32string decode_utf8(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t len = 0;
        char32_t cp = 0;
        if (c < 0x80) {
            len = 1;
            cp = c;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        }
        bool ok = len != 0 && i + len <= s.size();
        for (std::size_t k = 1; ok && k < len; ++k) {
            const auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xC0) != 0x80) ok = false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        if (!ok) {
            out.push_back(U'�');
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

// Character classes come from the C.UTF-8 locale when available; otherwise ASCII only.
const std::ctype<wchar_t>& unicode_ctype() {
    static const std::locale loc = [] {
        for (const char* name : {"C.UTF-8", "C.utf8", "en_US.UTF-8"}) {
            try {
                return std::locale(name);
            } catch (const std::runtime_error&) {
            }
        }
        return std::locale::classic();
    }();
    return std::use_facet<std::ctype<wchar_t>>(loc);
}

bool is_apostrophe(char32_t c) { return c == U'\'' || c == U'’'; }

Tokens split_whitespace(const std::u32string& text, const std::ctype<wchar_t>& ct) {
    Tokens tokens;
    std::string current;
    for (char32_t c : text) {
        if (ct.is(std::ctype_base::space, static_cast<wchar_t>(c))) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else {
            append_utf8(current, c);
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

} // namespace

Tokens normalize_text(std::string_view text, TextNormPolicy policy) {
    const auto& ct = unicode_ctype();
    std::u32string chars = decode_utf8(text);
    if (policy == TextNormPolicy::Whitespace) return split_whitespace(chars, ct);

    auto alnum = [&](char32_t c) { return ct.is(std::ctype_base::alnum, static_cast<wchar_t>(c)); };
    std::u32string cleaned(chars.size(), U' ');
    for (std::size_t i = 0; i < chars.size(); ++i) {
        const char32_t c = chars[i];
        if (is_apostrophe(c)) {
            const bool inside = i > 0 && i + 1 < chars.size() && alnum(chars[i - 1]) && alnum(chars[i + 1]);
            cleaned[i] = inside ? U'\'' : U' ';
        } else if (ct.is(std::ctype_base::punct, static_cast<wchar_t>(c))) {
            cleaned[i] = U' ';
        } else {
            cleaned[i] = static_cast<char32_t>(ct.tolower(static_cast<wchar_t>(c)));
        }
    }
    return split_whitespace(cleaned, ct);
}

double EditCounts::wer() const noexcept {
    return reference_length == 0 ? 0.0 : static_cast<double>(errors()) / static_cast<double>(reference_length);
}

EditCounts align(std::span<const std::string> reference, std::span<const std::string> hypothesis) {
    // cost[i][j] = (edits, indels) for reference[0..i) vs hypothesis[0..j), compared lexicographically.
    struct Cost {
        std::size_t edits;
        std::size_t indels;
        auto operator<=>(const Cost&) const = default;
    };
    const std::size_t n = reference.size();
    const std::size_t m = hypothesis.size();
    std::vector<Cost> cost((n + 1) * (m + 1));
    auto at = [&](std::size_t i, std::size_t j) -> Cost& { return cost[i * (m + 1) + j]; };

    for (std::size_t i = 0; i <= n; ++i) at(i, 0) = {i, i};
    for (std::size_t j = 0; j <= m; ++j) at(0, j) = {j, j};
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const Cost diag = at(i - 1, j - 1);
            const Cost up = at(i - 1, j);
            const Cost left = at(i, j - 1);
            const bool match = reference[i - 1] == hypothesis[j - 1];
            at(i, j) = std::min({Cost{diag.edits + (match ? 0u : 1u), diag.indels},
                                 Cost{up.edits + 1, up.indels + 1},
                                 Cost{left.edits + 1, left.indels + 1}});
        }
    }

    // edits = S + D + I, indels = D + I and D - I = n - m pin down every count.
    const Cost best = at(n, m);
    EditCounts counts;
    counts.reference_length = n;
    const auto diff = static_cast<std::ptrdiff_t>(n) - static_cast<std::ptrdiff_t>(m);
    counts.deletions = static_cast<std::size_t>((static_cast<std::ptrdiff_t>(best.indels) + diff) / 2);
    counts.insertions = best.indels - counts.deletions;
    counts.substitutions = best.edits - best.indels;
    return counts;
}

EditCounts word_error_rate(std::span<const std::string> reference, std::span<const std::string> hypothesis) {
    if (reference.empty()) fail(ErrorCode::EmptyReference, "reference has no words");
    return align(reference, hypothesis);
}

double corpus_wer(std::span<const EditCounts> counts, Aggregation aggregation) {
    std::size_t errors = 0;
    std::size_t words = 0;
    double wer_sum = 0.0;
    std::size_t included = 0;
    for (const auto& c : counts) {
        if (c.reference_length == 0) continue;
        errors += c.errors();
        words += c.reference_length;
        wer_sum += c.wer();
        ++included;
    }
    if (included == 0) fail(ErrorCode::NoValidPairs, "no pair has a non-empty reference");
    if (aggregation == Aggregation::MeanUtterance) return 100.0 * wer_sum / static_cast<double>(included);
    return 100.0 * static_cast<double>(errors) / static_cast<double>(words);
}

double corpus_wer(std::span<const TokenPair> pairs, Aggregation aggregation) {
    std::vector<EditCounts> counts;
    counts.reserve(pairs.size());
    for (const auto& [ref, hyp] : pairs) counts.push_back(align(ref, hyp));
    return corpus_wer(counts, aggregation);
}

double relative_reduction(double baseline_wer, double method_wer) {
    if (!(baseline_wer > 0.0)) fail(ErrorCode::ZeroBaseline, "baseline WER must be positive");
    return 100.0 * (baseline_wer - method_wer) / baseline_wer;
}

} // namespace ticl
