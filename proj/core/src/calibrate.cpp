#include "lobexec/calibrate.hpp"

#include "lobexec/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace lobexec {

namespace {

double quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

CostDistribution cost_distribution(std::span<const double> yields, std::span<const double> edges, double smoothing) {
    if (yields.empty()) throw Error("calibrate", "cost distribution needs at least one sample");
    if (edges.size() < 2) throw Error("calibrate", "cost distribution needs at least two edges");
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) throw Error("calibrate", "bin edges must be strictly increasing");
    }
    const std::size_t bins = edges.size() - 1;
    std::vector<std::size_t> counts(bins, 0);
    for (double y : yields) {
        const auto it = std::upper_bound(edges.begin() + 1, edges.end() - 1, y);
        ++counts[static_cast<std::size_t>(it - (edges.begin() + 1))];
    }
    CostDistribution d;
    d.edges.assign(edges.begin(), edges.end());
    d.samples = yields.size();
    d.mass.resize(bins);
    const double n = static_cast<double>(yields.size());
    const double norm = 1.0 + static_cast<double>(bins) * smoothing;
    for (std::size_t i = 0; i < bins; ++i) d.mass[i] = (static_cast<double>(counts[i]) / n + smoothing) / norm;
    return d;
}

std::vector<double> freedman_diaconis_edges(std::span<const double> samples, std::size_t max_bins) {
    if (samples.empty()) throw Error("calibrate", "cannot bin an empty sample");
    if (max_bins == 0) throw Error("calibrate", "max_bins must be positive");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front();
    const double hi = sorted.back();
    if (hi == lo) return {lo - 0.5, hi + 0.5};

    const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    const double width = 2.0 * iqr / std::cbrt(static_cast<double>(sorted.size()));
    std::size_t bins = 1;
    if (width > 0.0) bins = static_cast<std::size_t>(std::ceil((hi - lo) / width));
    else bins = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(sorted.size()))));
    bins = std::clamp<std::size_t>(bins, 1, max_bins);

    std::vector<double> edges(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) {
        edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    }
    edges.back() = hi;
    return edges;
}

double kl_divergence(const CostDistribution& p, const CostDistribution& q) {
    if (p.edges != q.edges || p.mass.size() != q.mass.size()) {
        throw Error("calibrate", "KL divergence needs distributions over identical bin edges");
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < p.mass.size(); ++i) {
        if (p.mass[i] == 0.0) continue;
        if (!(q.mass[i] > 0.0)) throw NumericError("KL divergence undefined: reference bin has zero mass");
        kl += p.mass[i] * std::log(p.mass[i] / q.mass[i]);
    }
    return std::max(0.0, kl);
}

PsiGrid PsiGrid::product(std::span<const double> c_mi, std::span<const CancelModel> models,
                         std::span<const LatencySpec> latencies, std::uint64_t seed) {
    PsiGrid g;
    for (double c : c_mi) {
        for (auto m : models) {
            for (const auto& l : latencies) {
                SimParams p{c, m, l, seed};
                p.validate();
                g.candidates.push_back(std::move(p));
            }
        }
    }
    if (g.candidates.empty()) throw ConfigError("calibration: parameter grid is empty");
    return g;
}

std::vector<double> simulate_yields(const CalibrationSetup& setup, const SimParams& psi) {
    if (setup.events == nullptr) throw Error("calibrate", "no event stream");
    if (setup.episodes == 0) throw Error("calibrate", "episode count must be positive");
    MarketEnvironment env(*setup.events, psi, setup.mdp, setup.binning);
    std::vector<double> out;
    out.reserve(setup.episodes);
    for (std::size_t i = 0; i < setup.episodes; ++i) {
        out.push_back(env.run(setup.seed, i, setup.strategy, {}, setup.options).total_yield);
    }
    return out;
}

CalibrationResult calibrate(const PsiGrid& grid, std::span<const double> reference_yields,
                            const CalibrationSetup& setup) {
    if (grid.candidates.empty()) throw Error("calibrate", "parameter grid is empty");
    if (reference_yields.empty()) throw Error("calibrate", "reference yields are empty");

    CalibrationResult result;
    result.edges = freedman_diaconis_edges(reference_yields);
    const auto reference = cost_distribution(reference_yields, result.edges);

    double best = std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t i = 0; i < grid.candidates.size(); ++i) {
        CalibrationRow row{grid.candidates[i], 0.0, setup.episodes, false, {}};
        try {
            const auto yields = simulate_yields(setup, row.psi);
            row.kl = kl_divergence(reference, cost_distribution(yields, result.edges));
            if (row.kl < best) {
                best = row.kl;
                result.best = row.psi;
                result.best_index = i;
            }
            any = true;
        } catch (const Error& e) {
            row.failed = true;
            row.kl = std::numeric_limits<double>::quiet_NaN();
            row.error = e.what();
        }
        result.table.push_back(std::move(row));
    }
    if (!any) throw SimError("calibration failed for every candidate");
    return result;
}

void write_divergence_table(std::ostream& out, const CalibrationResult& r) {
    const auto old = out.precision(17);
    out << "C_MI,cancel_model,latency_spec,kl,episodes\n";
    for (const auto& row : r.table) {
        out << row.psi.c_mi << ',' << cancel_model_name(row.psi.cancel_model) << ",\"" << row.psi.latency.to_string()
            << "\",";
        if (row.failed) out << "nan";
        else out << row.kl;
        out << ',' << row.episodes << '\n';
    }
    out.precision(old);
}

}  // namespace lobexec
