#include <lobexec/calibrate.hpp>
#include <lobexec/exec_mdp.hpp>
#include <lobexec/lspi_select.hpp>
#include <lobexec/policy_tree.hpp>
#include <lobexec/replay_sim.hpp>
#include <lobexec/rs_qlearn.hpp>

#include <benchmark/benchmark.h>

#include <random>

using namespace lobexec;

namespace {

const EventStream& tape() {
    static const EventStream events = [] {
        SyntheticConfig syn;
        syn.n_ticks = 20000;
        return generate_synthetic(syn);
    }();
    return events;
}

}  // namespace

/// Full replay of the tape with one resting order and no further actions.
static void BM_SimStep(benchmark::State& state) {
    const auto& ev = tape();
    for (auto _ : state) {
        SimSession s(ev, SimParams{});
        s.place_passive(Side::Buy, 100);
        while (!s.exhausted()) benchmark::DoNotOptimize(s.step());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ev.size()));
}
BENCHMARK(BM_SimStep)->Unit(benchmark::kMillisecond);

static void BM_QUpdate(benchmark::State& state) {
    const std::vector<std::size_t> counts{2, 2, 3, 4, 2};
    QTable q(counts);
    LearnConfig cfg;
    cfg.beta = 0.5;
    cfg.trace_decay = static_cast<double>(state.range(0)) / 10.0;
    std::mt19937_64 rng(1);
    std::vector<Transition> batch;
    for (int i = 0; i < 1024; ++i) {
        Transition t;
        for (auto n : counts) t.state.bins.push_back(static_cast<int>(rng() % n));
        for (auto n : counts) t.next.bins.push_back(static_cast<int>(rng() % n));
        t.action = rng() % 2 ? Action::Aggressive : Action::Passive;
        t.reward = static_cast<double>(rng() % 200) - 100.0;
        batch.push_back(std::move(t));
    }
    std::size_t i = 0;
    for (auto _ : state) {
        update(q, batch[i++ & 1023], cfg);
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_QUpdate)->Arg(0)->Arg(7);

static void BM_TreeBuild(benchmark::State& state) {
    PolicyTable p;
    p.binning = Binning{{"remaining_fraction", "spread", "imbalance", "price_offset", "volatility"},
                        {{0.5}, {1.5}, {-0.2, 0.2}, {-1.0, 0.0, 1.0}, {0.5}}};
    std::mt19937_64 rng(3);
    for (std::size_t c = 0; c < p.binning.cell_count(); ++c) {
        p.actions.push_back(rng() % 3 == 0 ? Action::Aggressive : Action::Passive);
        p.visited.push_back(true);
    }
    for (auto _ : state) benchmark::DoNotOptimize(build_tree(p));
}
BENCHMARK(BM_TreeBuild)->Unit(benchmark::kMicrosecond);

static void BM_Dantzig(benchmark::State& state) {
    const auto k = static_cast<int>(state.range(0));
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g;
    LstdSystem sys;
    sys.a = Eigen::MatrixXd::Identity(k, k) * 3.0;
    sys.b.resize(k);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) sys.a(i, j) += g(rng);
        sys.b[i] = 5.0 * g(rng);
    }
    const double lambda = 0.1 * sys.b.cwiseAbs().maxCoeff();
    for (auto _ : state) benchmark::DoNotOptimize(dantzig_solve(sys, lambda));
}
BENCHMARK(BM_Dantzig)->Arg(8)->Arg(24)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
