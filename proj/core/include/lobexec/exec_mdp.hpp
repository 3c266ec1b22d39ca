#pragma once

#include "lobexec/market_data.hpp"
#include "lobexec/replay_sim.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lobexec {

enum class Action { Passive = 0, Aggressive = 1 };

inline constexpr std::array<Action, 2> kActions{Action::Passive, Action::Aggressive};

std::string_view action_name(Action a) noexcept;
Action parse_action(std::string_view text);

struct ParentOrder {
    Side side = Side::Buy;
    Qty total_size = 0;
    Timestamp arrival_time = 0;
    /// Arrival mid at half-tick resolution (best_bid + best_ask).
    Price arrival_mid_x2 = 0;

    static ParentOrder arrive(Side side, Qty total_size, const BookSnapshot& book);
};

/// Execution yield of one fill against the arrival mid, in tick * quantity.
double reward(const Fill& fill, const ParentOrder& parent);

/// Candidate state variables. The first one is the agent variable.
enum class Feature {
    RemainingFraction,
    Spread,
    Imbalance,
    PriceOffset,
    Volatility,
    DepthImbalance,
    BidDepth,
    AskDepth,
    ElapsedFraction,
    TradeFlow,
};

std::string_view feature_name(Feature f) noexcept;
Feature parse_feature(std::string_view text);
std::vector<Feature> parse_feature_list(std::string_view csv);
std::string join_features(std::span<const Feature> features);
const std::vector<Feature>& all_features();
const std::vector<Feature>& default_features();

using StateVector = std::vector<double>;

/// Computes state vectors from the book the agent sees. Keeps the short
/// history needed by the volatility and trade-flow features.
class FeatureTracker {
public:
    explicit FeatureTracker(std::vector<Feature> features, std::size_t volatility_window = 50,
                            std::size_t flow_window = 20);

    void observe(const BookSnapshot& book);
    void observe(const TradeEvent& trade);

    StateVector make_state(const BookSnapshot& book, const ParentOrder& parent, Qty remaining,
                           double elapsed_fraction = 0.0) const;

    const std::vector<Feature>& features() const noexcept { return features_; }

private:
    std::vector<Feature> features_;
    std::size_t vol_window_;
    std::size_t flow_window_;
    std::deque<double> mid_changes_sq_;
    double mid_sq_sum_ = 0.0;
    Price last_mid_x2_ = 0;
    bool have_mid_ = false;
    std::deque<Qty> signed_flow_;
    Qty flow_sum_ = 0;
};

StateVector make_state(const FeatureTracker& tracker, const SimSession& session, const ParentOrder& parent,
                       Qty remaining);

/// Per-feature cut points. A value x lands in bin i when
/// cut[i-1] < x <= cut[i]; the outer bins are open.
struct Binning {
    std::vector<std::string> names;
    std::vector<std::vector<double>> cuts;

    std::size_t feature_count() const noexcept { return cuts.size(); }
    std::size_t bins(std::size_t feature) const { return cuts.at(feature).size() + 1; }
    std::vector<std::size_t> bin_counts() const;
    std::size_t cell_count() const;

    friend bool operator==(const Binning&, const Binning&) = default;
};

/// Quantile cut points giving roughly equal-count bins; duplicate cuts merge.
Binning fit_bins(std::span<const StateVector> samples, std::span<const std::size_t> counts,
                 std::vector<std::string> names = {});

struct DiscretizedState {
    std::vector<int> bins;
    bool terminal = false;

    static DiscretizedState terminal_state() { return {{}, true}; }
    friend bool operator==(const DiscretizedState&, const DiscretizedState&) = default;
};

std::size_t bin_index(double value, std::span<const double> cuts);
DiscretizedState discretize(const StateVector& v, const Binning& b);
std::string format_bins(const DiscretizedState& s);

/// Mixed-radix cell numbering over a grid of bin counts.
std::size_t flatten_cell(std::span<const int> bins, std::span<const std::size_t> counts);
std::vector<int> unflatten_cell(std::size_t cell, std::span<const std::size_t> counts);

struct Transition {
    DiscretizedState state;
    StateVector raw;
    Action action = Action::Passive;
    double reward = 0.0;
    DiscretizedState next;
    StateVector next_raw;
    bool terminal = false;
};

struct MdpConfig {
    Side side = Side::Buy;
    Qty parent_size = 1000;
    /// Child size as a fraction of the parent.
    double child_fraction = 0.05;
    /// Events per episode window.
    std::size_t horizon = 600;
    std::vector<Feature> features = default_features();
    std::vector<std::size_t> bin_counts = {2, 2, 3, 4, 2};
    std::size_t volatility_window = 50;

    Qty child_size() const;
    void validate() const;
};

struct DecisionContext {
    const DiscretizedState& state;
    const StateVector& raw;
    std::size_t elapsed = 0;
    std::size_t horizon = 0;
    Qty remaining = 0;
    Qty total = 0;
    Qty child = 0;
};

using Policy = std::function<Action(const DecisionContext&)>;
using TransitionSink = std::function<void(const Transition&)>;

struct EpisodeOptions {
    /// Query the policy on every event rather than only on state changes.
    /// Used by schedule-driven benchmarks.
    bool query_every_event = false;
};

struct EpisodeResult {
    std::vector<Transition> transitions;
    std::vector<Fill> fills;
    double total_yield = 0.0;
    std::size_t decisions = 0;
    std::size_t aggressive_decisions = 0;
    bool truncated = false;
};

/// Drives one parent-order execution through `session`. The policy is
/// queried when the discretized state changes or when no child is working.
/// If the window ends with inventory left, the remainder is liquidated at
/// the final opposite best price and the episode is flagged truncated.
EpisodeResult run_episode(SimSession& session, const ParentOrder& parent, const Policy& policy,
                          const Binning& binning, const MdpConfig& config, const TransitionSink& sink = {},
                          EpisodeOptions options = {});

Policy constant_policy(Action a);
/// Uniform-slicing schedule: passive while on schedule, aggressive when the
/// filled quantity lags the evenly sliced target. Needs query_every_event.
Policy uniform_schedule_policy();

/// Random-start episode windows over one event stream.
class MarketEnvironment {
public:
    MarketEnvironment(const EventStream& events, SimParams params, MdpConfig config, Binning binning);

    /// Episode `index` uses a start position and simulator seed derived from
    /// `seed` and `index` only.
    EpisodeResult run(std::uint64_t seed, std::size_t index, const Policy& policy, const TransitionSink& sink = {},
                      EpisodeOptions options = {}) const;

    std::span<const MarketEvent> window(std::size_t start) const;
    std::size_t start_for(std::uint64_t seed, std::size_t index) const;

    const MdpConfig& config() const noexcept { return config_; }
    const Binning& binning() const noexcept { return binning_; }
    const SimParams& params() const noexcept { return params_; }
    const EventStream& events() const noexcept { return events_; }

private:
    const EventStream& events_;
    SimParams params_;
    MdpConfig config_;
    Binning binning_;
    std::vector<std::size_t> starts_;
};

/// Raw state vectors observed along random-action episodes; used to fit bins.
std::vector<StateVector> collect_state_samples(const EventStream& events, const SimParams& params,
                                               const MdpConfig& config, std::size_t episodes, std::uint64_t seed);

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept;

void write_trajectory_header(std::ostream& out);
void write_trajectory(std::ostream& out, std::size_t episode, std::span<const Transition> transitions);

}  // namespace lobexec
