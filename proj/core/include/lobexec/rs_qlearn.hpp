#pragma once

#include "lobexec/exec_mdp.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

namespace lobexec {

/// Risk transform applied to temporal-difference errors:
/// (1 - beta) x for x > 0, (1 + beta) x otherwise. beta must lie in (-1, 1).
double u_beta(double x, double beta);

struct LearnConfig;

/// Tabular action values over a grid of discretized states. Terminal states
/// are not stored; their value is identically zero.
class QTable {
public:
    QTable() = default;
    explicit QTable(std::vector<std::size_t> bin_counts);

    std::size_t cell_count() const noexcept { return cells_; }
    const std::vector<std::size_t>& bin_counts() const noexcept { return counts_; }
    std::size_t cell(const DiscretizedState& s) const;

    double q(const DiscretizedState& s, Action a) const;
    double q_cell(std::size_t cell, Action a) const { return values_[slot(cell, a)]; }
    void set_q_cell(std::size_t cell, Action a, double v) { values_[slot(cell, a)] = v; }
    std::uint64_t visits(const DiscretizedState& s, Action a) const;
    std::uint64_t visits_cell(std::size_t cell, Action a) const { return visits_[slot(cell, a)]; }
    void set_visits_cell(std::size_t cell, Action a, std::uint64_t n) { visits_[slot(cell, a)] = n; }
    double trace(const DiscretizedState& s, Action a) const;

    /// max_a Q(s, a); zero for terminal states.
    double max_q(const DiscretizedState& s) const;
    /// argmax_a Q(s, a) with ties going to Passive.
    Action greedy(const DiscretizedState& s) const;
    Action greedy_cell(std::size_t cell) const;

    friend bool operator==(const QTable& a, const QTable& b) {
        return a.counts_ == b.counts_ && a.values_ == b.values_ && a.visits_ == b.visits_;
    }

private:
    friend void update(QTable&, const Transition&, const LearnConfig&);
    static std::size_t slot(std::size_t cell, Action a) noexcept {
        return 2 * cell + static_cast<std::size_t>(a);
    }

    std::vector<std::size_t> counts_;
    std::size_t cells_ = 0;
    std::vector<double> values_;
    std::vector<std::uint64_t> visits_;
    std::vector<double> traces_;
    std::vector<std::size_t> active_;  // slots with a positive trace
};

struct LearnConfig {
    double beta = 0.0;
    double gamma = 0.999;
    /// Step size for a pair visited n times: min(cap, c / (c + offset + n)).
    double alpha_c = 10.0;
    double alpha_offset = 0.0;
    /// Eligibility trace decay (lambda); 0 gives one-step Q-learning.
    double trace_decay = 0.0;
    /// Linear decay from epsilon_start to epsilon_end over the first
    /// `epsilon_decay_fraction` of the episode budget.
    double epsilon_start = 0.3;
    double epsilon_end = 0.01;
    double epsilon_decay_fraction = 0.5;
    std::size_t episodes = 2000;
    std::uint64_t seed = 1;

    void validate() const;
};

inline constexpr double kAlphaCap = 0.999;

double alpha_schedule(std::uint64_t visit_count, double c, double offset = 0.0);
double td_error(const QTable& q, const Transition& t, double gamma);
/// One risk-sensitive Q(lambda) step with replacing traces, cut when the
/// taken action was not greedy.
void update(QTable& q, const Transition& t, const LearnConfig& cfg);
Action epsilon_greedy(const QTable& q, const DiscretizedState& s, double epsilon, std::mt19937_64& rng);
double epsilon_at(const LearnConfig& cfg, std::size_t episode);

struct EpisodeOutcome {
    double total_yield = 0.0;
    std::size_t decisions = 0;
    std::size_t aggressive = 0;
};

using ActionChooser = std::function<Action(const DiscretizedState&)>;
/// Runs episode `index`, calling `choose` at each decision and `sink` for
/// every completed transition before the next choice.
using EpisodeRunner =
    std::function<EpisodeOutcome(std::size_t index, const ActionChooser& choose, const TransitionSink& sink)>;

struct TrainLogRow {
    std::size_t episode = 0;
    double total_yield = 0.0;
    double aggressive_share = 0.0;
    double epsilon = 0.0;
    double beta = 0.0;
};

struct TrainResult {
    QTable table;
    std::vector<TrainLogRow> log;
};

TrainResult train(const EpisodeRunner& runner, std::vector<std::size_t> bin_counts, const LearnConfig& cfg);

/// Adapts a MarketEnvironment to the trainer. Episode i of training uses the
/// environment's random start derived from (seed, i).
EpisodeRunner market_runner(const MarketEnvironment& env, std::uint64_t seed);

void write_train_log(std::ostream& out, std::span<const TrainLogRow> log);

}  // namespace lobexec
