#include <CLI11.hpp>

#include <iostream>

#include "ticl_cli/commands.hpp"

namespace ticl::cli {

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"ticl - in-context example retrieval and evaluation for speech recognition"};
    app.require_subcommand(1);

    GlobalOptions g;
    std::string config, output_dir = ".";
    std::size_t jobs = 0;
    std::uint64_t seed = 0;
    app.add_option("--config", config, "Experiment config (JSON)");
    app.add_option("--output-dir", output_dir, "Directory for generated artifacts");
    auto* jobs_opt = app.add_option("--jobs", jobs, "Worker threads (default: number of processors)")->check(CLI::PositiveNumber);
    auto* seed_opt = app.add_option("--seed", seed, "Seed for every mock provider; overrides the config");
    app.add_flag("--verbose,-v", g.verbose, "Log progress to stderr");

    auto* ingest = app.add_subcommand("ingest", "Build a candidate store from a manifest");
    std::string manifest, ingest_out;
    ingest->add_option("manifest", manifest)->required();
    ingest->add_option("--out", ingest_out, "Store directory (default: <output-dir>/store)");

    auto* attach = app.add_subcommand("attach-embeddings", "Bind an embedding file to a store");
    AttachOptions attach_opts;
    std::string attach_store, attach_file, kind = "text";
    std::size_t attach_dim = 0;
    attach->add_option("store", attach_store)->required();
    attach->add_option("embeddings", attach_file)->required();
    attach->add_option("--kind", kind)->check(CLI::IsMember({"text", "acoustic"}));
    auto* dim_opt = attach->add_option("--dim", attach_dim, "Expected embedding dimension");
    attach->add_option("--model-id", attach_opts.model_id, "Recorded in store metadata");
    attach->add_option("--pooling", attach_opts.pooling, "Frame pooling used upstream, recorded in store metadata");

    auto* validate_cmd = app.add_subcommand("validate", "Check store invariants");
    std::string validate_store;
    validate_cmd->add_option("store", validate_store)->required();

    auto* retrieve = app.add_subcommand("retrieve", "Write one context bundle per test utterance");
    std::string method, retrieve_store, retrieve_tests, retrieve_out;
    std::size_t k = 0, m = 0;
    auto* method_opt = retrieve->add_option("--method", method)->check(CLI::IsMember({"ticl", "ticl_plus"}));
    auto* k_opt = retrieve->add_option("--k", k)->check(CLI::PositiveNumber);
    auto* m_opt = retrieve->add_option("--m", m)->check(CLI::PositiveNumber);
    auto* rs_opt = retrieve->add_option("--store", retrieve_store);
    auto* rt_opt = retrieve->add_option("--test-manifest", retrieve_tests);
    auto* ro_opt = retrieve->add_option("--out", retrieve_out, "Bundle file (default: <output-dir>/bundles.jsonl)");

    app.add_subcommand("evaluate", "Run the method x k sweep and write reports");

    auto* report = app.add_subcommand("report", "Render a saved report");
    std::string report_path, format = "aligned_text", report_out;
    report->add_option("report", report_path)->required();
    report->add_option("--format", format)->check(CLI::IsMember({"aligned_text", "csv"}));
    auto* report_out_opt = report->add_option("--out", report_out);

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 1;
    }

    if (!config.empty()) g.config = config;
    g.output_dir = output_dir;
    if (*jobs_opt) g.jobs = jobs;
    if (*seed_opt) g.seed = seed;
    const Streams io{out, err};

    return guarded(io, [&]() -> int {
        std::filesystem::create_directories(g.output_dir);
        if (*ingest) {
            std::optional<std::filesystem::path> dest;
            if (!ingest_out.empty()) dest = ingest_out;
            return cmd_ingest(g, io, manifest, dest);
        }
        if (*attach) {
            attach_opts.store = attach_store;
            attach_opts.embeddings = attach_file;
            attach_opts.kind = parse_embedding_kind(kind);
            if (*dim_opt) attach_opts.dim = attach_dim;
            return cmd_attach(g, io, attach_opts);
        }
        if (*validate_cmd) return cmd_validate(g, io, validate_store);
        if (*retrieve) {
            RetrieveOptions r;
            if (*method_opt) r.method = parse_method(method);
            if (*k_opt) r.k = k;
            if (*m_opt) r.m = m;
            if (*rs_opt) r.store = retrieve_store;
            if (*rt_opt) r.test_manifest = retrieve_tests;
            if (*ro_opt) r.out = retrieve_out;
            return cmd_retrieve(g, io, r);
        }
        if (*report) {
            std::optional<std::filesystem::path> dest;
            if (*report_out_opt) dest = report_out;
            return cmd_report(g, io, report_path, parse_report_format(format), dest);
        }
        return cmd_evaluate(g, io);
    });
}

} // namespace ticl::cli
