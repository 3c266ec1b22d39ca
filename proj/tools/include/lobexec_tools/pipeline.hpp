#pragma once

#include <lobexec/calibrate.hpp>
#include <lobexec/config.hpp>
#include <lobexec/exec_mdp.hpp>
#include <lobexec/lspi_select.hpp>
#include <lobexec/policy_tree.hpp>
#include <lobexec/rs_qlearn.hpp>
#include <lobexec/serialization.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lobexec::pipeline {

/// Raw-state samples from random episodes, cut into the configured bins.
Binning fit_binning(const EventStream& events, const SimParams& params, const MdpConfig& mdp,
                    std::size_t sample_episodes, std::uint64_t seed);

struct TrainedModel {
    TableDocument doc;
    std::vector<TrainLogRow> log;
};

TrainedModel train_model(const EventStream& events, const SimParams& params, const MdpConfig& mdp,
                         const Binning& binning, const LearnConfig& learn);

struct PolicyStats {
    std::vector<double> yields;
    std::size_t decisions = 0;
    std::size_t aggressive = 0;

    double mean() const;
    double stddev() const;
    double aggressive_share() const;
};

/// Runs `episodes` episodes at the environment's random starts for `seed`.
PolicyStats evaluate_policy(const MarketEnvironment& env, const Policy& policy, std::size_t episodes,
                            std::uint64_t seed, EpisodeOptions options = {});

Policy greedy_policy(const QTable& q);

struct SweepRow {
    double beta = 0.0;
    PolicyStats stats;
    bool failed = false;
    std::string error;
};

/// Trains one table per beta on identical data and seeds and evaluates the
/// greedy policy of each.
std::vector<SweepRow> sweep_beta(const EventStream& events, const SimParams& params, const MdpConfig& mdp,
                                 const Binning& binning, const LearnConfig& learn, std::span<const double> betas,
                                 std::size_t eval_episodes, std::uint64_t eval_seed);

struct Interval {
    double low = 0.0;
    double high = 0.0;
};

struct BootstrapSummary {
    Interval mean;
    Interval stddev;
};

/// Percentile bootstrap of the sample mean and standard deviation.
BootstrapSummary bootstrap(std::span<const double> xs, std::size_t resamples, double confidence, std::uint64_t seed);

double sample_mean(std::span<const double> xs);
double sample_stddev(std::span<const double> xs);

/// Benchmark strategy by name: passive, aggressive or uniform.
struct Strategy {
    std::string name;
    Policy policy;
    EpisodeOptions options;
};
Strategy benchmark_strategy(const std::string& name);

struct SelectionOutcome {
    SelectionReport report;
    /// remaining_fraction followed by the selected market variables.
    std::vector<Feature> features;
    std::vector<std::size_t> bin_counts;
};

SelectionOutcome select_state_variables(const EventStream& events, const SimParams& params, const MdpConfig& mdp,
                                        const SelectionSection& sel, std::size_t bin_sample_episodes);

struct EvaluationRow {
    std::string strategy;
    PolicyStats stats;
    BootstrapSummary ci;
};

std::vector<EvaluationRow> evaluate_against_benchmarks(const EventStream& events, const SimParams& params,
                                                       const MdpConfig& mdp, const DecisionTree& tree,
                                                       const EvaluationSection& eval);

/// Command entry points. Each reads `cfg` (already resolved), writes its
/// artifacts under `out` and returns a one-line summary.
struct Context {
    RunConfig config;
    std::filesystem::path out;
};

/// Loads the config, applies a seed override and artifacts of earlier
/// stages found in `out` (calibrated simulator, selected variables).
Context make_context(const std::filesystem::path& config_path, std::optional<std::uint64_t> seed,
                     const std::filesystem::path& out);

EventStream load_events(const Context& ctx);

std::string cmd_synth(const Context& ctx);
std::string cmd_ingest(const Context& ctx);
std::string cmd_calibrate(const Context& ctx);
std::string cmd_select(const Context& ctx);
std::string cmd_train(const Context& ctx);
std::string cmd_sweep_beta(const Context& ctx);
std::string cmd_extract_tree(const Context& ctx);
std::string cmd_evaluate(const Context& ctx);

}  // namespace lobexec::pipeline
