// Serial vs OpenMP timings for candidate scoring and experiment trials.

#include "algorec/harness.hpp"
#include "algorec/recommenders/strategies.hpp"

#include <benchmark/benchmark.h>

#include <numeric>

using namespace algorec;

namespace {

const kb::KnowledgeBase& bench_kb() {
    static const kb::KnowledgeBase kb = [] {
        kb::SynthesisOptions o;
        o.n_datasets = 20;
        o.rank = 2;
        o.noise_sd = 0.01;
        o.seed = 1;
        return kb::synthesize_kb(kb::ConfigSpace::load(ALGOREC_DATA_DIR "/space_small.json"), o).kb;
    }();
    return kb;
}

const char* const kScoring[] = {"knn-ml", "knn-data", "slopeone", "svd", "cocluster"};

void predict_many(benchmark::State& state, bool parallel) {
    const auto& kb = bench_kb();
    auto catalog = std::make_shared<const rec::Catalog>(kb.space());
    auto model = rec::make_recommender(kScoring[state.range(0)], catalog, {}, 1);
    model->set_parallel(parallel);
    // Leave one dataset half-rated so scoring has work to do.
    std::vector<kb::ExperimentResult> rows;
    for (const auto& r : kb.results()) {
        if (r.dataset_id != "d000" || catalog->index_of(r.config) % 2 == 0) {
            rows.push_back(r);
        }
    }
    model->update(std::span<const kb::ExperimentResult>(rows));
    std::vector<rec::ConfigIndex> candidates(catalog->size());
    std::iota(candidates.begin(), candidates.end(), 0);
    auto* scorer = dynamic_cast<rec::ScoringRecommender*>(model.get());
    for (auto _ : state) {
        benchmark::DoNotOptimize(scorer->predict_many("d000", candidates));
    }
    state.SetLabel(kScoring[state.range(0)]);
}

void experiment(benchmark::State& state, bool parallel) {
    const harness::ReplayIndex index(bench_kb());
    harness::ExperimentPlan plan;
    plan.strategy = "svd";
    plan.n_trials = 8;
    plan.n_iterations = 30;
    plan.n_init = 100;
    plan.n_recs = 10;
    for (auto _ : state) {
        benchmark::DoNotOptimize(parallel ? harness::run_experiment(index, plan)
                                          : harness::run_experiment_serial(index, plan));
    }
}

}  // namespace

BENCHMARK_CAPTURE(predict_many, serial, false)->DenseRange(0, 4)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(predict_many, parallel, true)->DenseRange(0, 4)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(experiment, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(experiment, parallel, true)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
