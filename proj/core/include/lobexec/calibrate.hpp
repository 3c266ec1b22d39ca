#pragma once

#include "lobexec/exec_mdp.hpp"
#include "lobexec/replay_sim.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace lobexec {

inline constexpr double kHistogramSmoothing = 1e-6;

/// Smoothed histogram of execution yields over fixed bin edges.
struct CostDistribution {
    std::vector<double> edges;
    std::vector<double> mass;
    std::size_t samples = 0;

    std::size_t bins() const noexcept { return mass.size(); }
};

/// Histogram with additive smoothing: mass_i = (count_i / N + eps) / (1 + B eps).
/// Values outside the edges are counted in the nearest outer bin.
CostDistribution cost_distribution(std::span<const double> yields, std::span<const double> edges,
                                   double smoothing = kHistogramSmoothing);

/// Equal-width edges with the Freedman-Diaconis width 2 IQR n^(-1/3).
std::vector<double> freedman_diaconis_edges(std::span<const double> samples, std::size_t max_bins = 200);

/// sum P ln(P / Q) over shared edges.
double kl_divergence(const CostDistribution& p, const CostDistribution& q);

struct PsiGrid {
    std::vector<SimParams> candidates;

    /// Cartesian product in the order C_MI, then cancellation model, then latency.
    static PsiGrid product(std::span<const double> c_mi, std::span<const CancelModel> models,
                           std::span<const LatencySpec> latencies, std::uint64_t seed);
};

struct CalibrationRow {
    SimParams psi;
    double kl = 0.0;
    std::size_t episodes = 0;
    bool failed = false;
    std::string error;
};

struct CalibrationResult {
    SimParams best;
    std::size_t best_index = 0;
    std::vector<CalibrationRow> table;
    std::vector<double> edges;
};

struct CalibrationSetup {
    const EventStream* events = nullptr;
    MdpConfig mdp;
    Binning binning;
    Policy strategy;
    EpisodeOptions options;
    std::size_t episodes = 200;
    std::uint64_t seed = 1;
};

/// Yields of `episodes` runs of the setup's strategy at random start times.
std::vector<double> simulate_yields(const CalibrationSetup& setup, const SimParams& psi);

/// Grid search for the candidate whose simulated yield histogram is closest
/// in KL divergence to the reference. Ties go to the earlier candidate; a
/// candidate whose simulation throws is recorded and skipped.
CalibrationResult calibrate(const PsiGrid& grid, std::span<const double> reference_yields,
                            const CalibrationSetup& setup);

void write_divergence_table(std::ostream& out, const CalibrationResult& r);

}  // namespace lobexec
