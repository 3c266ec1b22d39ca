#pragma once

#include "lobexec/exec_mdp.hpp"
#include "lobexec/market_data.hpp"
#include "lobexec/replay_sim.hpp"
#include "lobexec/rs_qlearn.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace lobexec {

struct DataSection {
    /// Tick CSV to read; empty means the synthetic generator output.
    std::string input;
    SyntheticConfig synthetic;
};

struct SimulatorSection {
    SimParams params;
    /// Apply parameters written by a previous calibration run when present.
    bool use_calibrated = true;
};

struct MdpSection {
    MdpConfig config;
    std::size_t bin_sample_episodes = 200;
    /// Replace `features` with the output of a previous selection run when present.
    bool use_selected = true;
};

struct LearningSection {
    LearnConfig learn;
    std::vector<double> betas = {0.0, 0.25, 0.5, 0.75, 0.95};
    std::size_t eval_episodes = 200;
};

struct SelectionSection {
    std::vector<Feature> candidates = all_features();
    std::size_t bins = 4;
    std::size_t episodes = 100;
    double gamma = 0.99;
    /// Dantzig tolerance as a fraction of max |b|.
    double lambda_fraction = 0.05;
    std::size_t max_iter = 20;
    double tol = 1e-6;
    double threshold = 0.25;
    /// Market variables kept in addition to remaining_fraction.
    std::size_t max_features = 3;
    /// Bin counts for the trained state, by position; the last entry repeats.
    std::vector<std::size_t> bin_counts = {2, 2, 3, 4};
    std::uint64_t seed = 11;
};

struct CalibrationSection {
    std::vector<double> c_mi = {1.0, 4.0, 16.0};
    std::vector<CancelModel> cancel_models = {CancelModel::FrontOfQueue, CancelModel::BackOfQueue};
    std::vector<LatencySpec> latencies = {LatencySpec{}};
    /// Benchmark strategy simulated for each candidate: uniform, passive or aggressive.
    std::string strategy = "uniform";
    std::size_t episodes = 200;
    /// CSV with one yield per line; empty means a benchmark run under [simulator].
    std::string reference;
    std::uint64_t reference_seed = 12;
    std::uint64_t seed = 13;
};

struct EvaluationSection {
    std::size_t episodes = 200;
    std::size_t bootstrap = 1000;
    double confidence = 0.95;
    std::uint64_t seed = 14;
};

/// Every tunable of a pipeline run. Stored as an INI file with sections
/// [data] [simulator] [mdp] [learning] [selection] [calibration] [evaluation].
struct RunConfig {
    DataSection data;
    SimulatorSection simulator;
    MdpSection mdp;
    LearningSection learning;
    SelectionSection selection;
    CalibrationSection calibration;
    EvaluationSection evaluation;

    /// Unknown sections and keys are rejected.
    static RunConfig parse(std::istream& in);
    static RunConfig load(const std::filesystem::path& path);

    void write(std::ostream& out) const;
    void save(const std::filesystem::path& path) const;
    void validate() const;
    /// Replaces every seed with one derived from `seed`.
    void override_seed(std::uint64_t seed);

    /// Reads one section in the same format and overwrites the matching fields.
    void merge_section(std::istream& in, const std::string& section);
};

std::string format_double(double v);

}  // namespace lobexec
