#include <vector>

#include <benchmark/benchmark.h>

#include "protosum/abstractor.hpp"
#include "protosum/batch.hpp"
#include "protosum/kernels.hpp"
#include "protosum/labeler.hpp"
#include "protosum/nn.hpp"
#include "protosum/trainer.hpp"

using namespace protosum;
using kernels::Trans;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

template <bool Reference>
void BM_Gemm(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const auto n = static_cast<std::size_t>(state.range(1));
    const auto k = static_cast<std::size_t>(state.range(2));
    const auto tb = state.range(3) ? Trans::kYes : Trans::kNo;
    const auto a = random_values(m * k, 1);
    const auto b = random_values(k * n, 2);
    std::vector<double> c(m * n);
    for (auto _ : state) {
        if constexpr (Reference) {
            kernels::gemm_reference(Trans::kNo, tb, m, n, k, a.data(), b.data(), c.data(), false);
        } else {
            kernels::gemm(Trans::kNo, tb, m, n, k, a.data(), b.data(), c.data(), false);
        }
        benchmark::DoNotOptimize(c.data());
    }
    state.counters["GFLOP/s"] = benchmark::Counter(2.0 * static_cast<double>(m * n * k),
                                                   benchmark::Counter::kIsIterationInvariantRate,
                                                   benchmark::Counter::kIs1000);
}

void gemm_shapes(benchmark::internal::Benchmark* b) {
    // Sequence x d_model x d_model products and the vocabulary projection.
    for (int tb : {0, 1}) {
        b->Args({30, 64, 64, tb});
        b->Args({40, 128, 64, tb});
        b->Args({256, 256, 256, tb});
    }
}

BENCHMARK_TEMPLATE(BM_Gemm, false)->Apply(gemm_shapes);
BENCHMARK_TEMPLATE(BM_Gemm, true)->Apply(gemm_shapes);

struct TrainingBatch {
    AbstractorModel model;
    std::vector<LabeledExample> examples;
    std::vector<AttentionTargets> targets;

    static TrainingBatch make() {
        auto docs = documents_of(synth_corpus(3, 16, SynthParams{}));
        auto examples = label_corpus(docs);
        for (auto& ex : examples) {
            ImportanceScores s;
            s.weighted.assign(ex.doc.length(), 0.5);
            ex.gold_prototype = make_gold_prototype(ex.doc, ex.oracle_sentences, s, ex.k);
        }
        AbstractorModel model(AbstractorConfig{}, build_vocab(docs, 50000, 50000), 1);
        std::vector<AttentionTargets> targets;
        for (const auto& ex : examples) targets.push_back(attention_targets(ex, *ex.gold_prototype));
        return {std::move(model), std::move(examples), std::move(targets)};
    }
};

template <bool Serial>
void BM_BatchGradients(benchmark::State& state) {
    static auto batch = TrainingBatch::make();
    const GenLossConfig config;
    auto loss = [&](Graph& g, std::size_t i) {
        return gen_loss(g, batch.model, batch.examples[i], batch.targets[i], config).total;
    };
    for (auto _ : state) {
        auto r = Serial ? batch_gradients_serial(batch.model.params(), batch.examples.size(), loss)
                        : batch_gradients(batch.model.params(), batch.examples.size(), loss);
        benchmark::DoNotOptimize(r.loss);
    }
    state.counters["threads"] = Serial ? 1 : available_threads();
}

BENCHMARK_TEMPLATE(BM_BatchGradients, true)->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_BatchGradients, false)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
