#include "lobexec/rs_qlearn.hpp"

#include "lobexec/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace lobexec {

double u_beta(double x, double beta) {
    if (!(beta > -1.0 && beta < 1.0)) throw Error("learn", "beta must lie in (-1, 1)");
    return x > 0.0 ? (1.0 - beta) * x : (1.0 + beta) * x;
}

QTable::QTable(std::vector<std::size_t> bin_counts) : counts_(std::move(bin_counts)) {
    cells_ = 1;
    for (auto n : counts_) {
        if (n == 0) throw Error("learn", "bin counts must be >= 1");
        cells_ *= n;
    }
    values_.assign(2 * cells_, 0.0);
    visits_.assign(2 * cells_, 0);
    traces_.assign(2 * cells_, 0.0);
}

std::size_t QTable::cell(const DiscretizedState& s) const {
    if (s.terminal) throw Error("learn", "terminal states have no table cell");
    return flatten_cell(s.bins, counts_);
}

double QTable::q(const DiscretizedState& s, Action a) const {
    return s.terminal ? 0.0 : values_[slot(cell(s), a)];
}

std::uint64_t QTable::visits(const DiscretizedState& s, Action a) const {
    return s.terminal ? 0 : visits_[slot(cell(s), a)];
}

double QTable::trace(const DiscretizedState& s, Action a) const {
    return s.terminal ? 0.0 : traces_[slot(cell(s), a)];
}

double QTable::max_q(const DiscretizedState& s) const {
    if (s.terminal) return 0.0;
    const auto c = cell(s);
    return std::max(values_[slot(c, Action::Passive)], values_[slot(c, Action::Aggressive)]);
}

Action QTable::greedy_cell(std::size_t cell) const {
    return values_[slot(cell, Action::Aggressive)] > values_[slot(cell, Action::Passive)] ? Action::Aggressive
                                                                                           : Action::Passive;
}

Action QTable::greedy(const DiscretizedState& s) const {
    return s.terminal ? Action::Passive : greedy_cell(cell(s));
}

void LearnConfig::validate() const {
    if (!(beta > -1.0 && beta < 1.0)) throw ConfigError("learning: beta must lie in (-1, 1)");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("learning: gamma must lie in (0, 1]");
    if (!(alpha_c > 0.0)) throw ConfigError("learning: alpha_c must be positive");
    if (!(alpha_offset >= 0.0)) throw ConfigError("learning: alpha_offset must be >= 0");
    if (!(trace_decay >= 0.0 && trace_decay <= 1.0)) throw ConfigError("learning: trace_decay must lie in [0, 1]");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0)) {
        throw ConfigError("learning: epsilon values must lie in [0, 1]");
    }
    if (!(epsilon_decay_fraction > 0.0 && epsilon_decay_fraction <= 1.0)) {
        throw ConfigError("learning: epsilon_decay_fraction must lie in (0, 1]");
    }
    if (episodes == 0) throw ConfigError("learning: episode budget must be positive");
}

double alpha_schedule(std::uint64_t visit_count, double c, double offset) {
    if (!(c > 0.0)) throw Error("learn", "alpha schedule constant must be positive");
    const double alpha = c / (c + offset + static_cast<double>(visit_count));
    return std::min(alpha, kAlphaCap);
}

double td_error(const QTable& q, const Transition& t, double gamma) {
    const double future = t.terminal || t.next.terminal ? 0.0 : q.max_q(t.next);
    return t.reward + gamma * future - q.q(t.state, t.action);
}

void update(QTable& q, const Transition& t, const LearnConfig& cfg) {
    const auto cell = q.cell(t.state);
    const auto s = QTable::slot(cell, t.action);
    const double best = std::max(q.values_[QTable::slot(cell, Action::Passive)],
                                 q.values_[QTable::slot(cell, Action::Aggressive)]);
    if (q.values_[s] != best) {
        for (auto i : q.active_) q.traces_[i] = 0.0;
        q.active_.clear();
    }

    const double alpha = alpha_schedule(q.visits_[s], cfg.alpha_c, cfg.alpha_offset);
    ++q.visits_[s];
    const double d = u_beta(td_error(q, t, cfg.gamma), cfg.beta);

    if (q.traces_[s] == 0.0) q.active_.push_back(s);
    q.traces_[s] = 1.0;
    for (auto i : q.active_) q.values_[i] += alpha * d * q.traces_[i];

    const double decay = cfg.gamma * cfg.trace_decay;
    std::size_t kept = 0;
    for (auto i : q.active_) {
        q.traces_[i] *= decay;
        if (q.traces_[i] < 1e-12 || t.terminal) {
            q.traces_[i] = 0.0;
        } else {
            q.active_[kept++] = i;
        }
    }
    q.active_.resize(kept);
}

Action epsilon_greedy(const QTable& q, const DiscretizedState& s, double epsilon, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < epsilon) {
        std::uniform_int_distribution<int> pick(0, 1);
        return pick(rng) == 0 ? Action::Passive : Action::Aggressive;
    }
    return q.greedy(s);
}

double epsilon_at(const LearnConfig& cfg, std::size_t episode) {
    const double horizon = cfg.epsilon_decay_fraction * static_cast<double>(cfg.episodes);
    const double frac = horizon <= 0.0 ? 1.0 : std::min(1.0, static_cast<double>(episode) / horizon);
    return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
}

TrainResult train(const EpisodeRunner& runner, std::vector<std::size_t> bin_counts, const LearnConfig& cfg) {
    cfg.validate();
    TrainResult result{QTable(std::move(bin_counts)), {}};
    auto& q = result.table;
    std::mt19937_64 rng(cfg.seed);
    result.log.reserve(cfg.episodes);
    for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
        const double eps = epsilon_at(cfg, ep);
        const ActionChooser choose = [&](const DiscretizedState& s) { return epsilon_greedy(q, s, eps, rng); };
        const TransitionSink sink = [&](const Transition& t) { update(q, t, cfg); };
        const auto outcome = runner(ep, choose, sink);
        const double share = outcome.decisions == 0 ? 0.0
                                                    : static_cast<double>(outcome.aggressive) /
                                                          static_cast<double>(outcome.decisions);
        result.log.push_back({ep, outcome.total_yield, share, eps, cfg.beta});
    }
    return result;
}

EpisodeRunner market_runner(const MarketEnvironment& env, std::uint64_t seed) {
    return [&env, seed](std::size_t index, const ActionChooser& choose, const TransitionSink& sink) {
        const Policy policy = [&choose](const DecisionContext& ctx) { return choose(ctx.state); };
        const auto r = env.run(seed, index, policy, sink);
        return EpisodeOutcome{r.total_yield, r.decisions, r.aggressive_decisions};
    };
}

void write_train_log(std::ostream& out, std::span<const TrainLogRow> log) {
    const auto old = out.precision(17);
    out << "episode,total_yield,aggressive_share,epsilon,beta\n";
    for (const auto& r : log) {
        out << r.episode << ',' << r.total_yield << ',' << r.aggressive_share << ',' << r.epsilon << ',' << r.beta
            << '\n';
    }
    out.precision(old);
}

}  // namespace lobexec
