#include <doctest.h>

#include <json.hpp>

#include <sstream>

#include "support.hpp"
#include "ticl/embedding_file.hpp"
#include "ticl_cli/commands.hpp"
#include "ticl_cli/experiment_config.hpp"

using namespace ticl;
using namespace ticl::testing;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "ticl");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

json error_json(const Outcome& o) {
    const auto j = json::parse(o.err.substr(0, o.err.find('\n')));
    CHECK(j.contains("error"));
    CHECK(j.contains("message"));
    return j;
}

void write_unit_rows(const fs::path& path, EmbeddingKind kind, std::size_t count, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<EmbeddingVector> rows;
    for (std::size_t i = 0; i < count; ++i) rows.push_back(random_unit(rng, dim));
    write_embedding_file(path, make_matrix(kind, rows));
}

const char* kManifest = R"({"utterance_id":"u1","audio_ref":"a/1.wav","transcription":"one"}
{"utterance_id":"u2","audio_ref":"a/2.wav","transcription":"two"}
{"utterance_id":"u3","audio_ref":"a/3.wav","transcription":"three"}
)";

} // namespace

TEST_CASE("usage errors exit 1") {
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"retrieve", "--k", "0"}).code == 1);
    CHECK(run({"--help"}).code == 0);

    TempDir dir;
    const auto missing_config = run({"--output-dir", dir.path().string(), "evaluate"});
    CHECK(missing_config.code == 1);
    CHECK(error_json(missing_config)["error"] == "ConfigError");
}

TEST_CASE("ingest, attach and validate") {
    TempDir dir;
    write_text(dir / "m.jsonl", kManifest);
    const auto store = (dir / "store").string();

    const auto ingest = run({"--output-dir", dir.path().string(), "ingest", (dir / "m.jsonl").string()});
    CHECK(ingest.code == 0);
    CHECK(fs::exists(dir / "store" / "store.json"));
    CHECK(fs::exists(dir / "store" / "records.jsonl"));

    const auto pending = run({"validate", store});
    CHECK(pending.code == 2);
    CHECK(pending.out.find("6 violations") != std::string::npos);

    write_unit_rows(dir / "short.temb", EmbeddingKind::Text, 2, 8, 1);
    const auto mismatch = run({"attach-embeddings", store, (dir / "short.temb").string()});
    CHECK(mismatch.code == 2);
    CHECK(error_json(mismatch)["error"] == "CountMismatch");

    write_unit_rows(dir / "text.temb", EmbeddingKind::Text, 3, 8, 1);
    write_unit_rows(dir / "ac.temb", EmbeddingKind::Acoustic, 3, 6, 2);
    CHECK(run({"attach-embeddings", store, (dir / "text.temb").string(), "--dim", "16"}).code == 2);
    CHECK(run({"attach-embeddings", store, (dir / "ac.temb").string(), "--kind", "text"}).code == 2);
    CHECK(run({"attach-embeddings", store, (dir / "text.temb").string(), "--dim", "8", "--model-id", "mock-text"}).code ==
          0);
    CHECK(run({"attach-embeddings", store, (dir / "ac.temb").string(), "--kind", "acoustic", "--pooling", "mean"}).code ==
          0);

    const auto clean = run({"validate", store});
    CHECK(clean.code == 0);
    CHECK(clean.out.find("0 violations") != std::string::npos);
    const auto loaded = load_store(dir / "store");
    CHECK(loaded.metadata.at("text_model_id") == "mock-text");
    CHECK(loaded.metadata.at("acoustic_pooling") == "mean");

    write_text(dir / "dup.jsonl", std::string(kManifest) + R"({"utterance_id":"u1","audio_ref":"x","transcription":"y"})" "\n");
    const auto dup = run({"ingest", (dir / "dup.jsonl").string(), "--out", (dir / "s2").string()});
    CHECK(dup.code == 2);
    CHECK(error_json(dup)["error"] == "DuplicateId");
}

TEST_CASE("retrieve writes one bundle per test utterance, deterministically") {
    TempDir dir;
    const auto f = write_planted_fixture(dir / "fx");
    const auto base = std::vector<std::string>{"--config", f.config.string(), "--output-dir", (dir / "out").string()};
    auto args = base;
    args.insert(args.end(), {"retrieve", "--method", "ticl_plus", "--k", "3", "--m", "300"});
    const auto first = run(args);
    REQUIRE(first.code == 0);
    const auto text = read_text(dir / "out" / "bundles.jsonl");
    std::istringstream lines(text);
    std::size_t count = 0;
    for (std::string line; std::getline(lines, line); ++count) {
        CHECK(parse_bundle_line(line).examples.size() == 3);
    }
    CHECK(count == f.test_count);

    CHECK(run(args).code == 0);
    CHECK(read_text(dir / "out" / "bundles.jsonl") == text);

    auto jobs = base;
    jobs.insert(jobs.end(), {"--jobs", "3", "retrieve", "--method", "ticl_plus", "--k", "3", "--m", "300", "--out",
                             (dir / "b3.jsonl").string()});
    CHECK(run(jobs).code == 0);
    CHECK(read_text(dir / "b3.jsonl") == text);

    auto bad = base;
    bad.insert(bad.end(), {"retrieve", "--k", "5", "--m", "3"});
    CHECK(run(bad).code == 1);
}

TEST_CASE("TICL retrieval with empty pseudo-labels exits 2 naming the utterances") {
    TempDir dir;
    const auto f = write_planted_fixture(dir / "fx");
    std::string labels;
    for (std::size_t t = 0; t < f.test_count; ++t) {
        const bool empty = t == 2 || t == 5;
        labels += json{{"utterance_id", "test_" + std::to_string(t)}, {"pseudo_label", empty ? "" : "label"}}.dump() + "\n";
    }
    write_text(f.dir / "pseudo.jsonl", labels);
    const auto base = std::vector<std::string>{"--config", f.config.string(), "--output-dir", (dir / "out").string()};

    auto ticl = base;
    ticl.insert(ticl.end(), {"retrieve", "--method", "ticl", "--k", "2"});
    const auto r = run(ticl);
    CHECK(r.code == 2);
    const auto err = error_json(r);
    CHECK(err["error"] == "MissingPseudoLabelEmbedding");
    CHECK(err["message"].get<std::string>().find("test_2,test_5") != std::string::npos);

    auto plus = base;
    plus.insert(plus.end(), {"retrieve", "--method", "ticl_plus", "--k", "2"});
    CHECK(run(plus).code == 0);
    const auto bundles = read_text(dir / "out" / "bundles.jsonl");
    CHECK(bundles.find("acoustic-only") != std::string::npos);
}

TEST_CASE("evaluate writes the full artifact set") {
    TempDir dir;
    const auto f = write_planted_fixture(dir / "fx");
    const auto out = dir / "out";
    const auto r = run({"--config", f.config.string(), "--output-dir", out.string(), "evaluate"});
    REQUIRE(r.code == 0);
    for (const char* name : {"audit.jsonl", "report.json", "report.csv", "report.txt"}) CHECK(fs::exists(out / name));
    CHECK(fs::exists(out / "bundles" / "planted.ticl_plus.k4.jsonl"));
    CHECK(r.out == read_text(out / "report.txt"));

    const auto report = report_from_json(read_text(out / "report.json"));
    CHECK(report.cells.size() == 9); // 1 zero-shot + 4 TICL + 4 TICL+

    const auto csv = run({"report", (out / "report.json").string(), "--format", "csv"});
    CHECK(csv.code == 0);
    CHECK(csv.out == read_text(out / "report.csv"));
    const auto reparsed = parse_report_csv(csv.out);
    REQUIRE(reparsed.cells.size() == report.cells.size());
    for (const auto& c : report.cells) {
        CHECK(reparsed.find_cell(c.dataset, c.method, c.k)->wer_percent == doctest::Approx(c.wer_percent).epsilon(1e-4));
    }
    const auto from_csv = run({"report", (out / "report.csv").string()});
    CHECK(from_csv.code == 0);
    CHECK(from_csv.out.find("TICL+") != std::string::npos);
}

TEST_CASE("provider failures during retrieve exit 3") {
    TempDir dir;
    const auto f = write_planted_fixture(dir / "fx");
    auto config = json::parse(read_text(f.config));
    config["providers"]["asr"] = {{"backend", "http"}, {"endpoint", "http://127.0.0.1:1"}, {"timeout_s", 1}};
    config["retries"] = 0;
    write_text(f.config, config.dump());
    const auto r = run({"--config", f.config.string(), "--output-dir", (dir / "out").string(), "retrieve"});
    CHECK(r.code == 3);
    CHECK(error_json(r)["error"] == "ProviderError");
}

TEST_CASE("experiment config parsing") {
    TempDir dir;
    const auto doc = R"({
      "seed": 9,
      "providers": {
        "text_embedder": {"backend": "mock", "dim": 16},
        "acoustic_embedder": {"backend": "mock", "dim": 8, "seed": 3},
        "asr": {"backend": "http", "endpoint": "http://localhost:9"},
        "sicl_model": {"backend": "mock", "policy": "nearest_echo", "serial_only": true}
      },
      "retrieval": {"M": 50, "K": 2, "ordering": "similar_first", "exclude_ids": ["x"]},
      "eval": {"methods": ["ticl_plus"], "k_values": [1, 3], "aggregation": "mean_utterance", "text_norm": "whitespace"},
      "datasets": [{"name": "d1", "store": "s", "test_manifest": "t.jsonl",
                    "providers": {"asr": {"backend": "mock"}}}]
    })";
    const auto cfg = cli::parse_experiment_config(doc, dir.path());
    CHECK(cfg.seed == 9);
    CHECK(cfg.providers.at(ProviderKind::TextEmbedder).seed == 9u);
    CHECK(cfg.providers.at(ProviderKind::AcousticEmbedder).seed == 3u);
    CHECK(cfg.retrieval.M == 50);
    CHECK(cfg.retrieval.ordering == Ordering::SimilarFirst);
    CHECK(cfg.retrieval.exclude_ids.contains("x"));
    CHECK(cfg.eval.methods == std::vector<Method>{Method::TiclPlus});
    CHECK(cfg.eval.k_values == std::vector<std::size_t>{1, 3});
    CHECK(cfg.eval.aggregation == Aggregation::MeanUtterance);
    CHECK(cfg.eval.text_norm == TextNormPolicy::Whitespace);
    CHECK(cfg.datasets.at(0).store == dir.path() / "s");
    const auto specs = cfg.providers_for(cfg.datasets[0]);
    CHECK(specs.at(ProviderKind::Asr).backend == Backend::Mock);

    const auto overridden = cli::parse_experiment_config(doc, dir.path(), {.seed = 4, .jobs = 2, .bearer_token = "tok"});
    CHECK(overridden.providers.at(ProviderKind::AcousticEmbedder).seed == 4u);
    CHECK(overridden.providers.at(ProviderKind::Asr).bearer_token == "tok");
    CHECK(overridden.eval.jobs == 2);

    CHECK_THROWS_AS(cli::parse_experiment_config("{", dir.path()), Error);
    CHECK_THROWS_AS(cli::parse_experiment_config(R"({"eval": {"k_values": [3, 1]}})", dir.path()), Error);
    CHECK_THROWS_AS(cli::parse_experiment_config(R"({"retrieval": {"ordering": "random"}})", dir.path()), Error);
}
