#include "support.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <mutex>

#include "ticl/embedding_file.hpp"
#include "ticl/providers.hpp"

namespace ticl::testing {

namespace fs = std::filesystem;
using json = nlohmann::json;

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void write_text(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << contents;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::vector<float> random_gaussian(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(normal(rng));
    return v;
}

EmbeddingVector random_unit(std::mt19937_64& rng, std::size_t dim) {
    for (;;) {
        auto v = random_gaussian(rng, dim);
        if (l2_norm(v) > 1e-3) return l2_normalize(EmbeddingVector(std::move(v)));
    }
}

EmbeddingVector unit_at_distance(std::mt19937_64& rng, const EmbeddingVector& anchor, double distance) {
    const std::size_t dim = anchor.dim();
    std::vector<double> u(dim);
    for (;;) {
        auto g = random_gaussian(rng, dim);
        double dot = 0.0;
        for (std::size_t i = 0; i < dim; ++i) dot += static_cast<double>(g[i]) * anchor[i];
        double norm = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            u[i] = g[i] - dot * anchor[i];
            norm += u[i] * u[i];
        }
        norm = std::sqrt(norm);
        if (norm > 1e-3) {
            for (auto& x : u) x /= norm;
            break;
        }
    }
    const double c = 1.0 - distance * distance / 2.0;
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    std::vector<float> out(dim);
    for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(c * anchor[i] + s * u[i]);
    return l2_normalize(EmbeddingVector(std::move(out)));
}

RandomCase random_case(std::mt19937_64& rng, const RandomStoreOptions& options) {
    std::uniform_int_distribution<std::size_t> n_dist(1, options.max_n);
    std::uniform_int_distribution<std::size_t> dim_dist(1, options.max_dim);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    for (;;) {
        RandomCase c;
        const std::size_t n = n_dist(rng);
        const std::size_t d = dim_dist(rng);
        const std::size_t p = dim_dist(rng);
        c.store.text_dim = d;
        c.store.acoustic_dim = p;
        for (std::size_t i = 0; i < n; ++i) {
            CandidateRecord r;
            r.utterance_id = "c" + std::to_string(i);
            r.audio_ref = "audio/c" + std::to_string(i) + ".wav";
            r.transcription = coin(rng) < options.empty_transcription_rate ? "" : "text " + std::to_string(i);
            if (i > 0 && coin(rng) < options.duplicate_rate) {
                const auto& src = c.store.records[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)];
                r.text_embedding = src.text_embedding;
                r.acoustic_embedding = coin(rng) < 0.5 ? src.acoustic_embedding : random_unit(rng, p);
            } else {
                r.text_embedding = random_unit(rng, d);
                r.acoustic_embedding = random_unit(rng, p);
            }
            c.store.records.push_back(std::move(r));
        }

        c.query.utterance_id = "q";
        c.query.audio_ref = "audio/q.wav";
        c.query.pseudo_label = "pseudo";
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        c.query.text_embedding = coin(rng) < 0.2 ? *c.store.records[pick(rng)].text_embedding : random_unit(rng, d);
        c.query.acoustic_embedding =
            coin(rng) < 0.2 ? *c.store.records[pick(rng)].acoustic_embedding : random_unit(rng, p);
        if (coin(rng) < 0.2) c.query.utterance_id = c.store.records[pick(rng)].utterance_id;

        const bool any = std::any_of(c.store.records.begin(), c.store.records.end(), [&](const auto& r) {
            return r.usable() && r.utterance_id != c.query.utterance_id;
        });
        if (any) return c;
    }
}

double brute_distance(std::span<const float> a, std::span<const float> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sum += d * d;
    }
    return std::sqrt(sum);
}

std::vector<std::size_t> brute_force_rank(const CandidateStore& store, const TestQuery& query, bool use_text,
                                          std::size_t limit, const std::set<std::string>& exclude_ids,
                                          const std::vector<std::size_t>* pool) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < store.records.size(); ++i) {
        const auto& r = store.records[i];
        if (r.transcription.empty() || r.utterance_id == query.utterance_id || exclude_ids.count(r.utterance_id)) {
            continue;
        }
        if (pool && std::find(pool->begin(), pool->end(), i) == pool->end()) continue;
        const auto& mine = use_text ? *r.text_embedding : *r.acoustic_embedding;
        const auto& theirs = use_text ? *query.text_embedding : query.acoustic_embedding;
        all.emplace_back(brute_distance(mine.values(), theirs.values()), i);
    }
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < all.size() && i < limit; ++i) out.push_back(all[i].second);
    return out;
}

std::vector<std::size_t> oracle_ticl(const CandidateStore& store, const TestQuery& query, std::size_t k) {
    return brute_force_rank(store, query, true, k, {});
}

std::vector<std::size_t> oracle_ticl_plus(const CandidateStore& store, const TestQuery& query, std::size_t m,
                                          std::size_t k) {
    if (!query.text_embedding) return brute_force_rank(store, query, false, k, {});
    const auto pool = brute_force_rank(store, query, true, m, {});
    return brute_force_rank(store, query, false, k, {}, &pool);
}

std::vector<std::size_t> indices_of(const CandidateStore& store, const ContextBundle& bundle) {
    std::vector<std::size_t> out;
    for (const auto& e : bundle.examples) {
        for (std::size_t i = 0; i < store.records.size(); ++i) {
            if (store.records[i].utterance_id == e.utterance_id) {
                out.push_back(i);
                break;
            }
        }
    }
    return out;
}

std::set<std::size_t> as_set(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

namespace {

bool better(const EditCounts& a, const EditCounts& b) {
    const auto ea = a.substitutions + a.deletions + a.insertions;
    const auto eb = b.substitutions + b.deletions + b.insertions;
    if (ea != eb) return ea < eb;
    return a.deletions + a.insertions < b.deletions + b.insertions;
}

} // namespace

EditCounts wer_oracle_dp(const Tokens& ref, const Tokens& hyp) {
    const std::size_t n = ref.size(), m = hyp.size();
    std::vector<std::optional<EditCounts>> memo((n + 1) * (m + 1));
    std::function<EditCounts(std::size_t, std::size_t)> solve = [&](std::size_t i, std::size_t j) -> EditCounts {
        auto& slot = memo[i * (m + 1) + j];
        if (slot) return *slot;
        EditCounts best;
        if (i == n) {
            best.insertions = m - j;
        } else if (j == m) {
            best.deletions = n - i;
        } else {
            EditCounts diag = solve(i + 1, j + 1);
            if (ref[i] != hyp[j]) ++diag.substitutions;
            EditCounts del = solve(i + 1, j);
            ++del.deletions;
            EditCounts ins = solve(i, j + 1);
            ++ins.insertions;
            best = diag;
            if (better(del, best)) best = del;
            if (better(ins, best)) best = ins;
        }
        slot = best;
        return best;
    };
    EditCounts out = solve(0, 0);
    out.reference_length = n;
    return out;
}

EditCounts wer_oracle_exhaustive(const Tokens& ref, const Tokens& hyp) {
    std::optional<EditCounts> best;
    std::function<void(std::size_t, std::size_t, EditCounts)> walk = [&](std::size_t i, std::size_t j, EditCounts acc) {
        if (i == ref.size() && j == hyp.size()) {
            if (!best || better(acc, *best)) best = acc;
            return;
        }
        if (i < ref.size() && j < hyp.size()) {
            EditCounts next = acc;
            if (ref[i] != hyp[j]) ++next.substitutions;
            walk(i + 1, j + 1, next);
        }
        if (i < ref.size()) {
            EditCounts next = acc;
            ++next.deletions;
            walk(i + 1, j, next);
        }
        if (j < hyp.size()) {
            EditCounts next = acc;
            ++next.insertions;
            walk(i, j + 1, next);
        }
    };
    walk(0, 0, EditCounts{});
    best->reference_length = ref.size();
    return *best;
}

Tokens random_tokens(std::mt19937_64& rng, std::size_t max_len, std::size_t vocab) {
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<std::size_t> word(0, vocab - 1);
    Tokens t(len(rng));
    for (auto& w : t) w = "w" + std::to_string(word(rng));
    return t;
}

// Planted fixture ----------------------------------------------------------------------

namespace {

std::string random_sentence(std::mt19937_64& rng, std::size_t words) {
    std::uniform_int_distribution<int> pick(0, 499);
    std::string s;
    for (std::size_t i = 0; i < words; ++i) {
        if (i) s += ' ';
        s += "w" + std::to_string(pick(rng));
    }
    return s;
}

} // namespace

PlantedFixture write_planted_fixture(const fs::path& dir, const PlantedOptions& o) {
    fs::create_directories(dir);
    std::mt19937_64 rng(o.seed);

    std::vector<ManifestEntry> candidates, tests;
    std::vector<EmbeddingVector> cand_text, cand_acoustic, test_text, test_acoustic;
    std::string pseudo;

    auto add_candidate = [&](const std::string& id, const std::string& text, EmbeddingVector t, EmbeddingVector a) {
        candidates.push_back({id, "audio/" + id + ".wav", text, "train"});
        cand_text.push_back(std::move(t));
        cand_acoustic.push_back(std::move(a));
    };

    for (std::size_t t = 0; t < o.tests; ++t) {
        const std::string id = "test_" + std::to_string(t);
        const std::string reference = random_sentence(rng, o.words);
        tests.push_back({id, "audio/" + id + ".wav", reference, "test"});
        const auto z = random_unit(rng, o.dim);
        const auto a = random_unit(rng, o.dim);
        test_text.push_back(z);
        test_acoustic.push_back(a);
        pseudo += json{{"utterance_id", id}, {"pseudo_label", "pseudo label " + std::to_string(t)}}.dump() + "\n";

        for (int j = 0; j < 4; ++j) {
            // semantically nearest, acoustically far
            add_candidate(id + "_sem" + std::to_string(j), random_sentence(rng, o.words),
                          unit_at_distance(rng, z, 0.05 + 0.01 * j), unit_at_distance(rng, a, 1.10 + 0.02 * j));
        }
        for (int j = 0; j < 4; ++j) {
            // inside the semantic pool, acoustically near; the nearest carries the reference text
            add_candidate(id + "_ac" + std::to_string(j), j == 0 ? reference : random_sentence(rng, o.words),
                          unit_at_distance(rng, z, 0.30 + 0.02 * j), unit_at_distance(rng, a, 0.10 + 0.05 * j));
        }
        for (int j = 0; j < 2; ++j) {
            // acoustic decoys outside the semantic pool
            add_candidate(id + "_decoy" + std::to_string(j), random_sentence(rng, o.words),
                          unit_at_distance(rng, z, 1.20), unit_at_distance(rng, a, 0.02 + 0.01 * j));
        }
    }
    for (std::size_t b = 0; b < o.background; ++b) {
        add_candidate("bg_" + std::to_string(b), random_sentence(rng, o.words), random_unit(rng, o.dim),
                      random_unit(rng, o.dim));
    }

    write_manifest(dir / "candidates.jsonl", candidates);
    write_manifest(dir / "test.jsonl", tests);
    write_embedding_file(dir / "cand_text.temb", make_matrix(EmbeddingKind::Text, cand_text));
    write_embedding_file(dir / "cand_acoustic.temb", make_matrix(EmbeddingKind::Acoustic, cand_acoustic));
    write_embedding_file(dir / "test_text.temb", make_matrix(EmbeddingKind::Text, test_text));
    write_embedding_file(dir / "test_acoustic.temb", make_matrix(EmbeddingKind::Acoustic, test_acoustic));
    write_text(dir / "pseudo.jsonl", pseudo);

    CandidateStore store = ingest_manifest(dir / "candidates.jsonl");
    store = attach_embeddings(std::move(store), dir / "cand_text.temb", EmbeddingKind::Text);
    store = attach_embeddings(std::move(store), dir / "cand_acoustic.temb", EmbeddingKind::Acoustic);
    store.metadata["corpus"] = "planted-two-cluster";
    store.metadata["acoustic_pooling"] = "mean";
    save_store(store, dir / "store");

    json config = {
        {"seed", o.seed},
        {"max_in_flight", 4},
        {"retries", 2},
        {"providers",
         {{"text_embedder", {{"backend", "precomputed_file"}, {"path", "test_text.temb"}, {"index", "test.jsonl"}}},
          {"acoustic_embedder",
           {{"backend", "precomputed_file"}, {"path", "test_acoustic.temb"}, {"index", "test.jsonl"}}},
          {"asr", {{"backend", "precomputed_file"}, {"path", "pseudo.jsonl"}}},
          {"sicl_model", {{"backend", "mock"}, {"policy", o.sicl_policy}, {"fixtures_manifest", "test.jsonl"}}}}},
        {"retrieval", {{"M", o.M}, {"K", 3}, {"ordering", "similar_last"}, {"method", "ticl_plus"}}},
        {"eval",
         {{"methods", {"zero_shot", "ticl", "ticl_plus"}},
          {"k_values", {1, 2, 3, 4}},
          {"M", o.M},
          {"text_norm", "default"},
          {"aggregation", "pooled"}}},
        {"datasets", {{{"name", "planted"}, {"store", "store"}, {"test_manifest", "test.jsonl"}}}}};
    write_text(dir / "config.json", config.dump(2) + "\n");

    return {dir, dir / "config.json", dir / "store", dir / "test.jsonl", o.tests, o.words};
}

// HTTP stub ----------------------------------------------------------------------------

struct StubServer::Impl {
    StubBehavior behavior;
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> requests{0};
    mutable std::mutex mutex;
    std::map<std::string, std::string> last_bodies;

    bool reject(const httplib::Request& req, httplib::Response& res) {
        const int n = ++requests;
        {
            std::lock_guard lock(mutex);
            last_bodies[req.path] = req.body;
        }
        if (!behavior.required_token.empty() &&
            req.get_header_value("Authorization") != "Bearer " + behavior.required_token) {
            res.status = 401;
            res.set_content(json{{"error", "unauthorized"}}.dump(), "application/json");
            return true;
        }
        if (behavior.fail_all || n <= behavior.fail_first_n) {
            res.status = 500;
            res.set_content(json{{"error", "stub failure"}}.dump(), "application/json");
            return true;
        }
        return false;
    }

    void embed(const httplib::Request& req, httplib::Response& res, const char* key) {
        if (reject(req, res)) return;
        const json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.contains(key)) {
            res.status = 400;
            res.set_content(json{{"error", "bad request"}}.dump(), "application/json");
            return;
        }
        json rows = json::array();
        for (const auto& item : body[key]) {
            const auto v = hash_embedding(item.get<std::string>(), 99, 7, behavior.dim);
            json row = json::array();
            for (float x : v.values()) row.push_back(3.0 * x); // unnormalized on purpose
            rows.push_back(std::move(row));
        }
        res.set_content(json{{"dim", behavior.reported_dim}, {"embeddings", rows}}.dump(), "application/json");
    }
};

StubServer::StubServer(StubBehavior behavior) : impl_(std::make_unique<Impl>()) {
    impl_->behavior = std::move(behavior);
    auto& s = impl_->server;
    s.Post("/v1/embed-text", [this](const httplib::Request& q, httplib::Response& r) { impl_->embed(q, r, "texts"); });
    s.Post("/v1/embed-audio",
           [this](const httplib::Request& q, httplib::Response& r) { impl_->embed(q, r, "audio_refs"); });
    s.Post("/v1/transcribe", [this](const httplib::Request& q, httplib::Response& r) {
        if (impl_->reject(q, r)) return;
        const json body = json::parse(q.body);
        json texts = json::array();
        for (const auto& ref : body.at("audio_refs")) {
            auto it = impl_->behavior.transcripts.find(ref.get<std::string>());
            texts.push_back(it == impl_->behavior.transcripts.end() ? "" : it->second);
        }
        r.set_content(json{{"texts", texts}}.dump(), "application/json");
    });
    s.Post("/v1/generate", [this](const httplib::Request& q, httplib::Response& r) {
        if (impl_->reject(q, r)) return;
        const json body = json::parse(q.body);
        std::string text = impl_->behavior.generate_text;
        if (!body.at("examples").empty()) text = body.at("examples").back().at("text").get<std::string>();
        r.set_content(json{{"text", text}}.dump(), "application/json");
    });
    impl_->port = s.bind_to_any_port("127.0.0.1");
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

StubServer::~StubServer() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

std::string StubServer::base_url() const { return "http://127.0.0.1:" + std::to_string(impl_->port); }

int StubServer::requests() const { return impl_->requests.load(); }

std::string StubServer::last_body(const std::string& route) const {
    std::lock_guard lock(impl_->mutex);
    auto it = impl_->last_bodies.find(route);
    return it == impl_->last_bodies.end() ? std::string{} : it->second;
}

} // namespace ticl::testing

namespace ticl::testing {

EvalReport reference_wer_table() {
    const std::vector<std::string> datasets{"MyST", "OGI", "ENNI", "RSR"};
    const double zero_shot[4] = {12.81, 16.17, 14.37, 20.06};
    const double ticl[4][4] = {
        {17.27, 9.55, 17.57, 18.92}, {11.77, 8.94, 14.07, 18.92}, {11.69, 8.75, 13.54, 18.90}, {11.81, 8.52, 13.75, 19.54}};
    const double ticl_plus[4][4] = {
        {11.48, 8.84, 14.83, 12.89}, {10.17, 7.97, 12.01, 12.26}, {10.52, 7.78, 11.52, 12.19}, {10.57, 7.55, 11.52, 12.75}};

    EvalReport r;
    r.datasets = datasets;
    for (std::size_t d = 0; d < 4; ++d) {
        r.cells.push_back({datasets[d], Method::ZeroShot, 0, zero_shot[d], 0, 0, 0});
        for (std::size_t k = 1; k <= 4; ++k) r.cells.push_back({datasets[d], Method::Ticl, k, ticl[k - 1][d], 0, 0, 0});
        for (std::size_t k = 1; k <= 4; ++k) {
            r.cells.push_back({datasets[d], Method::TiclPlus, k, ticl_plus[k - 1][d], 0, 0, 0});
        }
    }
    compute_delta_rel(r);
    return r;
}

std::vector<ExpectedDelta> reference_deltas() {
    return {{"MyST", Method::Ticl, 8.7},       {"OGI", Method::Ticl, 47.3},      {"ENNI", Method::Ticl, 5.8},
            {"RSR", Method::Ticl, 5.8},        {"MyST", Method::TiclPlus, 20.6}, {"OGI", Method::TiclPlus, 53.3},
            {"ENNI", Method::TiclPlus, 19.8}, {"RSR", Method::TiclPlus, 39.2}};
}

} // namespace ticl::testing
