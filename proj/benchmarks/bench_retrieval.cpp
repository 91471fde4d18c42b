#include <benchmark/benchmark.h>

#include <random>

#include "ticl/geometry.hpp"
#include "ticl/retrieval.hpp"
#include "ticl/wer.hpp"

namespace {

ticl::EmbeddingVector unit(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<float> normal;
    std::vector<float> v(dim);
    for (auto& x : v) x = normal(rng);
    return ticl::l2_normalize(ticl::EmbeddingVector(std::move(v)));
}

struct Corpus {
    ticl::CandidateStore store;
    ticl::TestQuery query;
};

Corpus make_corpus(std::size_t n, std::size_t text_dim, std::size_t acoustic_dim) {
    std::mt19937_64 rng(1);
    Corpus c;
    c.store.text_dim = text_dim;
    c.store.acoustic_dim = acoustic_dim;
    c.store.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        c.store.records.push_back({"c" + std::to_string(i), "a.wav", "text", "", unit(rng, text_dim),
                                   unit(rng, acoustic_dim)});
    }
    c.query = {"q", "q.wav", "label", unit(rng, text_dim), unit(rng, acoustic_dim)};
    return c;
}

void BM_SemanticStage(benchmark::State& state) {
    const auto c = make_corpus(static_cast<std::size_t>(state.range(0)), 384, 1024);
    for (auto _ : state) benchmark::DoNotOptimize(ticl::semantic_candidates(c.store, c.query, 300));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SemanticStage)->Arg(1000)->Arg(10000)->Arg(50000);

void BM_TiclPlus(benchmark::State& state) {
    const auto c = make_corpus(static_cast<std::size_t>(state.range(0)), 384, 1024);
    ticl::RetrievalConfig cfg;
    cfg.M = 300;
    cfg.K = 4;
    for (auto _ : state) benchmark::DoNotOptimize(ticl::retrieve_ticl_plus(c.store, c.query, cfg));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TiclPlus)->Arg(1000)->Arg(10000)->Arg(50000);

void BM_TopK(benchmark::State& state) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    std::vector<ticl::RankedCandidate> ranked(static_cast<std::size_t>(state.range(0)));
    for (std::size_t i = 0; i < ranked.size(); ++i) ranked[i] = {i, u(rng)};
    for (auto _ : state) benchmark::DoNotOptimize(ticl::top_k(ranked, 300));
}
BENCHMARK(BM_TopK)->Arg(10000)->Arg(100000);

void BM_WordAlignment(benchmark::State& state) {
    std::mt19937_64 rng(3);
    const auto n = static_cast<std::size_t>(state.range(0));
    ticl::Tokens ref(n), hyp(n);
    for (std::size_t i = 0; i < n; ++i) {
        ref[i] = "w" + std::to_string(rng() % 50);
        hyp[i] = rng() % 5 ? ref[i] : "x";
    }
    for (auto _ : state) benchmark::DoNotOptimize(ticl::align(ref, hyp));
}
BENCHMARK(BM_WordAlignment)->Arg(20)->Arg(200);

} // namespace

BENCHMARK_MAIN();
