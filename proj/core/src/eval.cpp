#include "ticl/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <set>

#include "json_io.hpp"
#include "ticl/error.hpp"
#include "ticl/parallel.hpp"

namespace ticl {

using detail::json;

void EvalConfig::validate() const {
    if (methods.empty()) fail(ErrorCode::ConfigError, "no methods selected");
    if (M < 1) fail(ErrorCode::ConfigError, "M must be at least 1");
    if (k_values.empty()) fail(ErrorCode::ConfigError, "k_values must not be empty");
    for (std::size_t i = 0; i < k_values.size(); ++i) {
        if (k_values[i] < 1) fail(ErrorCode::ConfigError, "k values must be >= 1");
        if (k_values[i] > M) fail(ErrorCode::ConfigError, "k value " + std::to_string(k_values[i]) + " exceeds M");
        if (i > 0 && k_values[i] <= k_values[i - 1]) fail(ErrorCode::ConfigError, "k_values must be strictly ascending");
    }
}

const EvalCell* EvalReport::find_cell(std::string_view dataset, Method method, std::size_t k) const {
    auto it = std::find_if(cells.begin(), cells.end(), [&](const EvalCell& c) {
        return c.dataset == dataset && c.method == method && c.k == k;
    });
    return it == cells.end() ? nullptr : &*it;
}

const DeltaRel* EvalReport::find_delta(std::string_view dataset, Method method) const {
    auto it = std::find_if(delta_rel.begin(), delta_rel.end(),
                           [&](const DeltaRel& d) { return d.dataset == dataset && d.method == method; });
    return it == delta_rel.end() ? nullptr : &*it;
}

void compute_delta_rel(EvalReport& report) {
    report.delta_rel.clear();
    for (const auto& dataset : report.datasets) {
        const EvalCell* zs = report.find_cell(dataset, Method::ZeroShot, 0);
        if (!zs || !(zs->wer_percent > 0.0)) continue;
        for (Method method : {Method::Ticl, Method::TiclPlus}) {
            const EvalCell* best = nullptr;
            for (const auto& c : report.cells) {
                if (c.dataset != dataset || c.method != method) continue;
                if (!best || c.wer_percent < best->wer_percent ||
                    (c.wer_percent == best->wer_percent && c.k < best->k)) {
                    best = &c;
                }
            }
            if (!best) continue;
            report.delta_rel.push_back(
                {dataset, method, relative_reduction(zs->wer_percent, best->wer_percent), best->k});
        }
    }
}

void merge_reports(EvalReport& into, const EvalReport& other) {
    for (const auto& d : other.datasets) {
        if (std::find(into.datasets.begin(), into.datasets.end(), d) != into.datasets.end()) {
            fail(ErrorCode::ConfigError, "dataset '" + d + "' appears twice");
        }
        into.datasets.push_back(d);
    }
    into.cells.insert(into.cells.end(), other.cells.begin(), other.cells.end());
    into.failures.insert(into.failures.end(), other.failures.begin(), other.failures.end());
    for (const auto& [k, v] : other.provenance) into.provenance.insert_or_assign(k, v);
    compute_delta_rel(into);
}

std::string format_audit_line(const AuditRecord& r) {
    json obj = {{"dataset", r.dataset},
                {"utterance_id", r.utterance_id},
                {"method", to_string(r.method)},
                {"k", r.k},
                {"reference", r.reference},
                {"hypothesis", r.hypothesis ? json(*r.hypothesis) : json(nullptr)},
                {"wer", r.wer ? json(*r.wer) : json(nullptr)},
                {"bundle_ref", r.bundle_ref}};
    if (!r.error.empty()) obj["error"] = r.error;
    return obj.dump();
}

std::string bundle_file_name(std::string_view dataset, Method method, std::size_t k) {
    return "bundles/" + std::string(dataset) + "." + std::string(to_string(method)) + ".k" + std::to_string(k) +
           ".jsonl";
}

namespace {

struct Outcome {
    std::optional<ContextBundle> bundle;
    std::optional<std::string> hypothesis;
    std::optional<EditCounts> counts;
    std::string error;
};

std::string describe(const Error& e) { return std::string(error_code_name(e.code())) + ": " + e.detail(); }

} // namespace

SweepResult run_sweep(const EvalDataset& dataset, ProviderSet& providers, const EvalConfig& config) {
    config.validate();
    const auto& tests = dataset.test_set;
    const std::size_t n = tests.size();

    const bool needs_queries = std::any_of(config.methods.begin(), config.methods.end(),
                                           [](Method m) { return m != Method::ZeroShot; });
    std::vector<std::optional<TestQuery>> queries(n);
    std::vector<std::string> query_errors(n);
    if (needs_queries) {
        parallel_for(n, config.jobs, [&](std::size_t i) {
            try {
                queries[i] = make_test_query(tests[i], providers);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::ConfigError) throw;
                query_errors[i] = describe(e);
            }
        });
    }

    std::vector<Tokens> references(n);
    for (std::size_t i = 0; i < n; ++i) references[i] = normalize_text(tests[i].transcription, config.text_norm);

    SweepResult result;
    auto& report = result.report;
    report.datasets = {dataset.name};

    std::vector<std::pair<Method, std::size_t>> runs;
    for (Method m : config.methods) {
        if (m == Method::ZeroShot) {
            runs.emplace_back(m, 0);
        } else {
            for (std::size_t k : config.k_values) runs.emplace_back(m, k);
        }
    }

    for (const auto& [method, k] : runs) {
        RetrievalConfig rc;
        rc.M = config.M;
        rc.K = std::max<std::size_t>(k, 1);
        rc.ordering = config.ordering;

        std::vector<Outcome> outcomes(n);
        parallel_for(n, config.jobs, [&](std::size_t i) {
            auto& out = outcomes[i];
            try {
                if (references[i].empty()) fail(ErrorCode::EmptyReference, "reference has no words");
                if (method == Method::ZeroShot) {
                    out.bundle = zero_shot_bundle(tests[i].utterance_id, tests[i].audio_ref);
                } else {
                    if (!queries[i]) {
                        out.error = query_errors[i];
                        return;
                    }
                    out.bundle = method == Method::Ticl ? retrieve_ticl(dataset.store, *queries[i], rc)
                                                        : retrieve_ticl_plus(dataset.store, *queries[i], rc);
                }
                out.hypothesis = providers.generate(*out.bundle);
                out.counts = word_error_rate(references[i], normalize_text(*out.hypothesis, config.text_norm));
            } catch (const Error& e) {
                if (e.code() == ErrorCode::ConfigError) throw;
                out.error = describe(e);
            }
        });

        BundleFile file{bundle_file_name(dataset.name, method, k), {}};
        std::vector<EditCounts> scored;
        for (std::size_t i = 0; i < n; ++i) {
            auto& out = outcomes[i];
            AuditRecord audit;
            audit.dataset = dataset.name;
            audit.utterance_id = tests[i].utterance_id;
            audit.method = method;
            audit.k = k;
            audit.reference = tests[i].transcription;
            audit.hypothesis = out.hypothesis;
            if (out.bundle) {
                file.bundles.push_back(*out.bundle);
                audit.bundle_ref = file.name + ":" + std::to_string(file.bundles.size());
            }
            if (out.counts) {
                audit.wer = out.counts->wer();
                scored.push_back(*out.counts);
            } else {
                audit.error = out.error;
                report.failures.push_back({dataset.name, tests[i].utterance_id, method, k, out.error});
            }
            result.audit.push_back(std::move(audit));
        }
        result.bundle_files.push_back(std::move(file));

        if (scored.empty()) continue;
        EvalCell cell{dataset.name, method, k, corpus_wer(scored, config.aggregation), scored.size(), 0, 0};
        for (const auto& c : scored) {
            cell.errors += c.errors();
            cell.reference_words += c.reference_length;
        }
        report.cells.push_back(std::move(cell));
    }

    report.provenance["aggregation"] = std::string(to_string(config.aggregation));
    report.provenance["text_norm"] = std::string(to_string(config.text_norm));
    report.provenance["ordering"] = std::string(to_string(config.ordering));
    report.provenance["M"] = std::to_string(config.M);
    report.provenance["seed"] = std::to_string(config.seed);
    for (const auto& [key, value] : dataset.store.metadata) report.provenance[dataset.name + ".store." + key] = value;
    compute_delta_rel(report);
    return result;
}

// Rendering ------------------------------------------------------------------------

ReportFormat parse_report_format(std::string_view name) {
    if (name == "aligned_text" || name == "text") return ReportFormat::AlignedText;
    if (name == "csv") return ReportFormat::Csv;
    fail(ErrorCode::ConfigError, "unknown report format '" + std::string(name) + "'");
}

namespace {

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::size_t display_width(std::string_view s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
        return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
    }));
}

std::string pad_left(const std::string& s, std::size_t width) {
    const std::size_t w = display_width(s);
    return w >= width ? s : std::string(width - w, ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
    const std::size_t w = display_width(s);
    return w >= width ? s : s + std::string(width - w, ' ');
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> csv_split(std::string_view line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    return fields;
}

std::vector<Method> methods_in(const EvalReport& report) {
    std::vector<Method> out;
    for (Method m : {Method::ZeroShot, Method::Ticl, Method::TiclPlus}) {
        if (std::any_of(report.cells.begin(), report.cells.end(), [&](const auto& c) { return c.method == m; })) {
            out.push_back(m);
        }
    }
    return out;
}

std::vector<std::size_t> ks_for(const EvalReport& report, Method m) {
    std::set<std::size_t> ks;
    for (const auto& c : report.cells) {
        if (c.method == m) ks.insert(c.k);
    }
    return {ks.begin(), ks.end()};
}

std::string render_text(const EvalReport& report) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Method", "k"});
    for (const auto& d : report.datasets) rows.back().push_back(d);

    for (Method m : methods_in(report)) {
        for (std::size_t k : ks_for(report, m)) {
            std::vector<std::string> row{std::string(display_name(m)), std::to_string(k)};
            for (const auto& d : report.datasets) {
                const auto* c = report.find_cell(d, m, k);
                row.push_back(c ? fixed(c->wer_percent, 2) : "-");
            }
            rows.push_back(std::move(row));
        }
        if (m == Method::ZeroShot) continue;
        const bool any = std::any_of(report.delta_rel.begin(), report.delta_rel.end(),
                                     [&](const auto& d) { return d.method == m; });
        if (!any) continue;
        std::vector<std::string> row{std::string(display_name(m)), "Δrel"};
        for (const auto& d : report.datasets) {
            const auto* delta = report.find_delta(d, m);
            row.push_back(delta ? fixed(delta->percent, 1) : "-");
        }
        rows.push_back(std::move(row));
    }

    std::vector<std::size_t> widths(rows.front().size(), 0);
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], display_width(row[c]));
    }
    std::string out;
    for (const auto& row : rows) {
        std::string line = pad_right(row[0], widths[0]) + "  " + pad_right(row[1], widths[1]);
        for (std::size_t c = 2; c < row.size(); ++c) line += "  " + pad_left(row[c], widths[c]);
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line + "\n";
    }
    return out;
}

std::string render_csv(const EvalReport& report) {
    std::string out = "dataset,method,k,wer_percent\n";
    for (const auto& d : report.datasets) {
        for (Method m : methods_in(report)) {
            for (std::size_t k : ks_for(report, m)) {
                if (const auto* c = report.find_cell(d, m, k)) {
                    out += csv_field(d) + "," + std::string(to_string(m)) + "," + std::to_string(k) + "," +
                           fixed(c->wer_percent, 2) + "\n";
                }
            }
            if (const auto* delta = report.find_delta(d, m)) {
                out += csv_field(d) + "," + std::string(to_string(m)) + ",best," + fixed(delta->percent, 2) + "\n";
            }
        }
    }
    return out;
}

} // namespace

std::string render_report(const EvalReport& report, ReportFormat format) {
    return format == ReportFormat::Csv ? render_csv(report) : render_text(report);
}

EvalReport parse_report_csv(std::string_view csv) {
    EvalReport report;
    std::size_t pos = 0;
    std::size_t line_number = 0;
    while (pos < csv.size()) {
        std::size_t end = csv.find('\n', pos);
        if (end == std::string_view::npos) end = csv.size();
        std::string_view line = csv.substr(pos, end - pos);
        pos = end + 1;
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (line_number == 1) {
            if (line != "dataset,method,k,wer_percent") fail(ErrorCode::ParseError, "report csv: unexpected header");
            continue;
        }
        const auto f = csv_split(line);
        const std::string where = "report csv:" + std::to_string(line_number);
        if (f.size() != 4) fail(ErrorCode::ParseError, where + ": expected 4 fields");
        double value = 0.0;
        try {
            value = std::stod(f[3]);
        } catch (const std::exception&) {
            fail(ErrorCode::ParseError, where + ": bad number '" + f[3] + "'");
        }
        if (std::find(report.datasets.begin(), report.datasets.end(), f[0]) == report.datasets.end()) {
            report.datasets.push_back(f[0]);
        }
        const Method m = parse_method(f[1]);
        if (f[2] == "best") {
            report.delta_rel.push_back({f[0], m, value, 0});
        } else {
            std::size_t k = 0;
            try {
                k = static_cast<std::size_t>(std::stoul(f[2]));
            } catch (const std::exception&) {
                fail(ErrorCode::ParseError, where + ": bad k '" + f[2] + "'");
            }
            report.cells.push_back({f[0], m, k, value, 0, 0, 0});
        }
    }
    // A cells-only csv still gets its relative rows.
    if (report.delta_rel.empty()) compute_delta_rel(report);
    return report;
}

std::string report_to_json(const EvalReport& report) {
    json cells = json::array();
    for (const auto& c : report.cells) {
        cells.push_back({{"dataset", c.dataset},
                         {"method", to_string(c.method)},
                         {"k", c.k},
                         {"wer_percent", c.wer_percent},
                         {"utterances", c.utterances},
                         {"errors", c.errors},
                         {"reference_words", c.reference_words}});
    }
    json deltas = json::array();
    for (const auto& d : report.delta_rel) {
        deltas.push_back({{"dataset", d.dataset}, {"method", to_string(d.method)}, {"percent", d.percent}, {"best_k", d.best_k}});
    }
    json failures = json::array();
    for (const auto& f : report.failures) {
        failures.push_back({{"dataset", f.dataset},
                            {"utterance_id", f.utterance_id},
                            {"method", to_string(f.method)},
                            {"k", f.k},
                            {"error", f.error}});
    }
    json obj = {{"datasets", report.datasets},
                {"cells", std::move(cells)},
                {"delta_rel", std::move(deltas)},
                {"failures", std::move(failures)},
                {"provenance", report.provenance}};
    return obj.dump(2) + "\n";
}

EvalReport report_from_json(std::string_view text) {
    const json obj = json::parse(text, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) fail(ErrorCode::ParseError, "report is not a JSON object");
    EvalReport r;
    try {
        r.datasets = obj.at("datasets").get<std::vector<std::string>>();
        for (const auto& c : obj.at("cells")) {
            r.cells.push_back({c.at("dataset").get<std::string>(), parse_method(c.at("method").get<std::string>()),
                               c.at("k").get<std::size_t>(), c.at("wer_percent").get<double>(),
                               c.value("utterances", std::size_t{0}), c.value("errors", std::size_t{0}),
                               c.value("reference_words", std::size_t{0})});
        }
        for (const auto& d : obj.at("delta_rel")) {
            r.delta_rel.push_back({d.at("dataset").get<std::string>(), parse_method(d.at("method").get<std::string>()),
                                   d.at("percent").get<double>(), d.value("best_k", std::size_t{0})});
        }
        for (const auto& f : obj.value("failures", json::array())) {
            r.failures.push_back({f.at("dataset").get<std::string>(), f.at("utterance_id").get<std::string>(),
                                  parse_method(f.at("method").get<std::string>()), f.at("k").get<std::size_t>(),
                                  f.at("error").get<std::string>()});
        }
        r.provenance = obj.value("provenance", std::map<std::string, std::string>{});
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, std::string("report: ") + e.what());
    }
    return r;
}

} // namespace ticl
