#include "ticl_cli/commands.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "ticl/candidate_store.hpp"
#include "ticl/error.hpp"
#include "ticl/parallel.hpp"
#include "ticl/providers.hpp"

namespace ticl::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void write_file(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out << contents;
    if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void log(const GlobalOptions& g, const Streams& io, const std::string& message) {
    if (g.verbose) io.err << "[ticl] " << message << "\n";
}

Overrides overrides_from(const GlobalOptions& g) {
    Overrides o;
    o.seed = g.seed;
    o.jobs = g.jobs;
    if (const char* token = std::getenv("TICL_PROVIDER_TOKEN"); token && *token) o.bearer_token = token;
    return o;
}

ExperimentConfig require_config(const GlobalOptions& g) {
    if (!g.config) fail(ErrorCode::ConfigError, "--config is required for this command");
    return load_experiment_config(*g.config, overrides_from(g));
}

CandidateStore load_validated_store(const fs::path& dir) {
    CandidateStore store = load_store(dir);
    const auto report = validate(store);
    if (!report.ok()) {
        const auto& v = report.violations.front();
        fail(ErrorCode::ParseError, dir.string() + " fails validation (" + std::to_string(report.violations.size()) +
                                        " violations; first: " + v.kind + " " + v.message + ")");
    }
    return store;
}

std::size_t jobs_of(const GlobalOptions& g) { return g.jobs.value_or(default_jobs()); }

} // namespace

int guarded(const Streams& io, const std::function<int()>& body) {
    auto report = [&](std::string_view code, const std::string& message) {
        io.err << json{{"error", code}, {"message", message}}.dump() << "\n";
    };
    try {
        return body();
    } catch (const Error& e) {
        report(error_code_name(e.code()), e.detail());
        switch (error_class(e.code())) {
        case ErrorClass::Usage: return kUsage;
        case ErrorClass::Provider: return kProvider;
        case ErrorClass::Data: return kData;
        }
    } catch (const fs::filesystem_error& e) {
        report("IoError", e.what());
    } catch (const std::exception& e) {
        report("InternalError", e.what());
    }
    return kData;
}

int cmd_ingest(const GlobalOptions& g, const Streams& io, const fs::path& manifest, std::optional<fs::path> out_store) {
    const fs::path dir = out_store.value_or(g.output_dir / "store");
    const CandidateStore store = ingest_manifest(manifest);
    save_store(store, dir);
    io.out << "ingested " << store.size() << " records (" << store.usable_count() << " usable) into " << dir.string()
           << "\n";
    return kOk;
}

int cmd_attach(const GlobalOptions& g, const Streams& io, const AttachOptions& opts) {
    CandidateStore store = load_store(opts.store);
    store = attach_embeddings(std::move(store), opts.embeddings, opts.kind, opts.dim);
    const std::string prefix(to_string(opts.kind));
    if (!opts.model_id.empty()) store.metadata[prefix + "_model_id"] = opts.model_id;
    if (!opts.pooling.empty()) store.metadata[prefix + "_pooling"] = opts.pooling;
    save_store(store, opts.store);
    log(g, io, "bound " + std::to_string(store.size()) + " rows from " + opts.embeddings.string());
    io.out << "attached " << prefix << " embeddings (dim "
           << (opts.kind == EmbeddingKind::Text ? store.text_dim : store.acoustic_dim) << ") to " << store.size()
           << " records\n";
    return kOk;
}

int cmd_validate(const GlobalOptions&, const Streams& io, const fs::path& store_dir) {
    const CandidateStore store = load_store(store_dir);
    const auto report = validate(store);
    io.out << "records: " << report.record_count << "\n";
    io.out << "usable: " << report.usable_count << "\n";
    io.out << "text_dim: " << report.text_dim << "\n";
    io.out << "acoustic_dim: " << report.acoustic_dim << "\n";
    if (!report.unusable_records.empty()) {
        io.out << "unusable:";
        for (auto i : report.unusable_records) io.out << " " << i;
        io.out << "\n";
    }
    for (const auto& v : report.violations) {
        io.out << "record " << (v.record_index ? std::to_string(*v.record_index) : std::string("-")) << ": " << v.kind
               << ": " << v.message << "\n";
    }
    io.out << report.violations.size() << " violations\n";
    return report.ok() ? kOk : kData;
}

int cmd_retrieve(const GlobalOptions& g, const Streams& io, const RetrieveOptions& opts) {
    ExperimentConfig cfg = require_config(g);
    if (cfg.datasets.empty() && !(opts.store && opts.test_manifest)) {
        fail(ErrorCode::ConfigError, "no dataset configured; pass --store and --test-manifest");
    }
    DatasetConfig dataset = cfg.datasets.empty() ? DatasetConfig{"default", {}, {}, {}} : cfg.datasets.front();
    if (opts.store) dataset.store = *opts.store;
    if (opts.test_manifest) dataset.test_manifest = *opts.test_manifest;

    RetrievalConfig rc = cfg.retrieval;
    if (opts.k) rc.K = *opts.k;
    if (opts.m) rc.M = *opts.m;
    rc.validate();
    const Method method = opts.method.value_or(cfg.retrieve_method);
    if (method == Method::ZeroShot) fail(ErrorCode::ConfigError, "retrieve needs --method ticl or ticl_plus");

    const CandidateStore store = load_validated_store(dataset.store);
    const auto tests = read_manifest(dataset.test_manifest);
    ProviderSet providers = make_providers(cfg.providers_for(dataset), cfg.max_in_flight, cfg.retries);
    log(g, io, "retrieving for " + std::to_string(tests.size()) + " utterances");

    std::vector<std::optional<TestQuery>> queries(tests.size());
    parallel_for(tests.size(), jobs_of(g), [&](std::size_t i) { queries[i] = make_test_query(tests[i], providers); });

    if (method == Method::Ticl) {
        std::string missing;
        for (const auto& q : queries) {
            if (!q->text_embedding) missing += (missing.empty() ? "" : ",") + q->utterance_id;
        }
        if (!missing.empty()) fail(ErrorCode::MissingPseudoLabelEmbedding, "empty pseudo-labels for " + missing);
    }

    std::string out;
    for (const auto& q : queries) {
        const auto bundle = method == Method::Ticl ? retrieve_ticl(store, *q, rc) : retrieve_ticl_plus(store, *q, rc);
        out += format_bundle_line(bundle);
        out += '\n';
    }
    const fs::path path = opts.out.value_or(g.output_dir / "bundles.jsonl");
    write_file(path, out);
    io.out << "wrote " << tests.size() << " bundles to " << path.string() << "\n";
    return kOk;
}

int cmd_evaluate(const GlobalOptions& g, const Streams& io) {
    ExperimentConfig cfg = require_config(g);
    if (cfg.datasets.empty()) fail(ErrorCode::ConfigError, "config declares no datasets");

    EvalReport report;
    std::string audit;
    for (const auto& dataset : cfg.datasets) {
        EvalDataset data{dataset.name, load_validated_store(dataset.store), read_manifest(dataset.test_manifest)};
        ProviderSet providers = make_providers(cfg.providers_for(dataset), cfg.max_in_flight, cfg.retries);
        log(g, io, "evaluating " + dataset.name + " (" + std::to_string(data.test_set.size()) + " utterances)");

        const SweepResult result = run_sweep(data, providers, cfg.eval);
        merge_reports(report, result.report);
        for (const auto& record : result.audit) audit += format_audit_line(record) + "\n";
        for (const auto& file : result.bundle_files) {
            std::string lines;
            for (const auto& b : file.bundles) lines += format_bundle_line(b) + "\n";
            write_file(g.output_dir / file.name, lines);
        }
    }

    write_file(g.output_dir / "audit.jsonl", audit);
    write_file(g.output_dir / "report.json", report_to_json(report));
    write_file(g.output_dir / "report.csv", render_report(report, ReportFormat::Csv));
    const std::string table = render_report(report, ReportFormat::AlignedText);
    write_file(g.output_dir / "report.txt", table);
    io.out << table;
    if (!report.failures.empty()) io.out << report.failures.size() << " utterance failures (see audit.jsonl)\n";
    return kOk;
}

int cmd_report(const GlobalOptions&, const Streams& io, const fs::path& report_path, ReportFormat format,
               std::optional<fs::path> out) {
    const std::string text = read_file(report_path);
    const EvalReport report = report_path.extension() == ".csv" ? parse_report_csv(text) : report_from_json(text);
    if (report.empty()) fail(ErrorCode::ParseError, report_path.string() + " holds no cells");
    const std::string doc = render_report(report, format);
    if (out) {
        write_file(*out, doc);
    } else {
        io.out << doc;
    }
    return kOk;
}

} // namespace ticl::cli
