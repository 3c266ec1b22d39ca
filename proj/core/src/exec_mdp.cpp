#include "lobexec/exec_mdp.hpp"

#include "lobexec/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace lobexec {

std::string_view action_name(Action a) noexcept { return a == Action::Passive ? "Passive" : "Aggressive"; }

Action parse_action(std::string_view text) {
    if (text == "Passive" || text == "passive" || text == "P") return Action::Passive;
    if (text == "Aggressive" || text == "aggressive" || text == "A") return Action::Aggressive;
    throw Error("parse", "unknown action '" + std::string(text) + "'");
}

ParentOrder ParentOrder::arrive(Side side, Qty total_size, const BookSnapshot& book) {
    if (total_size <= 0) throw Error("mdp", "parent order size must be positive");
    return ParentOrder{side, total_size, book.ts, book.mid_x2()};
}

double reward(const Fill& fill, const ParentOrder& parent) {
    // Exact in half ticks: 2 * (p_t - p_sigma) = 2 * p_t - mid_x2.
    const Qty twice = (2 * fill.price - parent.arrival_mid_x2) * fill.size;
    const Qty signed_twice = parent.side == Side::Sell ? twice : -twice;
    return static_cast<double>(signed_twice) / 2.0;
}

namespace {

struct FeatureInfo {
    Feature feature;
    std::string_view name;
};

constexpr std::array<FeatureInfo, 10> kFeatureInfo{{
    {Feature::RemainingFraction, "remaining_fraction"},
    {Feature::Spread, "spread"},
    {Feature::Imbalance, "imbalance"},
    {Feature::PriceOffset, "price_offset"},
    {Feature::Volatility, "volatility"},
    {Feature::DepthImbalance, "depth_imbalance"},
    {Feature::BidDepth, "bid_depth"},
    {Feature::AskDepth, "ask_depth"},
    {Feature::ElapsedFraction, "elapsed_fraction"},
    {Feature::TradeFlow, "trade_flow"},
}};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double ratio_or_zero(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

std::string_view feature_name(Feature f) noexcept {
    for (const auto& info : kFeatureInfo) {
        if (info.feature == f) return info.name;
    }
    return "?";
}

Feature parse_feature(std::string_view text) {
    text = trim(text);
    for (const auto& info : kFeatureInfo) {
        if (info.name == text) return info.feature;
    }
    throw ConfigError("unknown feature '" + std::string(text) + "'");
}

std::vector<Feature> parse_feature_list(std::string_view csv) {
    std::vector<Feature> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        auto comma = csv.find(',', start);
        if (comma == std::string_view::npos) comma = csv.size();
        const auto piece = trim(csv.substr(start, comma - start));
        if (!piece.empty()) {
            const auto f = parse_feature(piece);
            if (std::find(out.begin(), out.end(), f) != out.end()) {
                throw ConfigError("feature '" + std::string(piece) + "' listed twice");
            }
            out.push_back(f);
        }
        start = comma + 1;
    }
    return out;
}

std::string join_features(std::span<const Feature> features) {
    std::string out;
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (i) out += ',';
        out += feature_name(features[i]);
    }
    return out;
}

const std::vector<Feature>& all_features() {
    static const std::vector<Feature> all = [] {
        std::vector<Feature> v;
        for (const auto& info : kFeatureInfo) v.push_back(info.feature);
        return v;
    }();
    return all;
}

const std::vector<Feature>& default_features() {
    static const std::vector<Feature> defaults{Feature::RemainingFraction, Feature::Spread, Feature::Imbalance,
                                               Feature::PriceOffset, Feature::Volatility};
    return defaults;
}

FeatureTracker::FeatureTracker(std::vector<Feature> features, std::size_t volatility_window,
                               std::size_t flow_window)
    : features_(std::move(features)),
      vol_window_(std::max<std::size_t>(1, volatility_window)),
      flow_window_(std::max<std::size_t>(1, flow_window)) {}

void FeatureTracker::observe(const BookSnapshot& book) {
    const Price mid = book.mid_x2();
    if (have_mid_) {
        const double change = static_cast<double>(mid - last_mid_x2_) / 2.0;
        mid_changes_sq_.push_back(change * change);
        mid_sq_sum_ += change * change;
        if (mid_changes_sq_.size() > vol_window_) {
            mid_sq_sum_ -= mid_changes_sq_.front();
            mid_changes_sq_.pop_front();
        }
    }
    last_mid_x2_ = mid;
    have_mid_ = true;
}

void FeatureTracker::observe(const TradeEvent& trade) {
    const Qty signed_size = trade.aggressor == Side::Buy ? trade.size : -trade.size;
    signed_flow_.push_back(signed_size);
    flow_sum_ += signed_size;
    if (signed_flow_.size() > flow_window_) {
        flow_sum_ -= signed_flow_.front();
        signed_flow_.pop_front();
    }
}

StateVector FeatureTracker::make_state(const BookSnapshot& book, const ParentOrder& parent, Qty remaining,
                                       double elapsed_fraction) const {
    StateVector v;
    v.reserve(features_.size());
    const double bid_top = static_cast<double>(book.best_bid_volume());
    const double ask_top = static_cast<double>(book.best_ask_volume());
    for (const auto f : features_) {
        switch (f) {
            case Feature::RemainingFraction:
                v.push_back(static_cast<double>(remaining) / static_cast<double>(parent.total_size));
                break;
            case Feature::Spread:
                v.push_back(static_cast<double>(book.spread()));
                break;
            case Feature::Imbalance:
                v.push_back(ratio_or_zero(bid_top - ask_top, bid_top + ask_top));
                break;
            case Feature::PriceOffset: {
                // Positive when the market has moved in the agent's favour.
                const double diff = static_cast<double>(book.mid_x2() - parent.arrival_mid_x2) / 2.0;
                v.push_back(parent.side == Side::Buy ? -diff : diff);
                break;
            }
            case Feature::Volatility:
                v.push_back(mid_changes_sq_.empty() ? 0.0
                                                    : mid_sq_sum_ / static_cast<double>(mid_changes_sq_.size()));
                break;
            case Feature::DepthImbalance:
            case Feature::BidDepth:
            case Feature::AskDepth: {
                double bids = 0.0, asks = 0.0;
                for (const auto& l : book.bids) bids += static_cast<double>(l.volume);
                for (const auto& l : book.asks) asks += static_cast<double>(l.volume);
                if (f == Feature::DepthImbalance) v.push_back(ratio_or_zero(bids - asks, bids + asks));
                else v.push_back(f == Feature::BidDepth ? bids : asks);
                break;
            }
            case Feature::ElapsedFraction:
                v.push_back(elapsed_fraction);
                break;
            case Feature::TradeFlow:
                v.push_back(static_cast<double>(flow_sum_));
                break;
        }
    }
    return v;
}

StateVector make_state(const FeatureTracker& tracker, const SimSession& session, const ParentOrder& parent,
                       Qty remaining) {
    return tracker.make_state(session.book(), parent, remaining);
}

std::vector<std::size_t> Binning::bin_counts() const {
    std::vector<std::size_t> out;
    out.reserve(cuts.size());
    for (const auto& c : cuts) out.push_back(c.size() + 1);
    return out;
}

std::size_t Binning::cell_count() const {
    std::size_t n = 1;
    for (const auto& c : cuts) n *= c.size() + 1;
    return n;
}

Binning fit_bins(std::span<const StateVector> samples, std::span<const std::size_t> counts,
                 std::vector<std::string> names) {
    if (samples.empty()) throw Error("mdp", "cannot fit bins on an empty sample set");
    const std::size_t k = counts.size();
    for (const auto& s : samples) {
        if (s.size() != k) throw Error("mdp", "sample dimension does not match bin counts");
    }
    if (!names.empty() && names.size() != k) throw Error("mdp", "feature names do not match bin counts");
    Binning b;
    b.names = names.empty() ? std::vector<std::string>(k) : std::move(names);
    for (std::size_t f = 0; f < k; ++f) {
        if (counts[f] == 0) throw Error("mdp", "bin count must be >= 1");
        if (b.names[f].empty()) b.names[f] = "x" + std::to_string(f + 1);
        std::vector<double> col;
        col.reserve(samples.size());
        for (const auto& s : samples) col.push_back(s[f]);
        std::sort(col.begin(), col.end());
        const std::size_t n = col.size();
        std::vector<double> cuts;
        for (std::size_t j = 1; j < counts[f]; ++j) {
            const std::size_t pos = j * n / counts[f];
            if (pos == 0 || pos >= n) continue;
            const double cut = 0.5 * (col[pos - 1] + col[pos]);
            // A cut at or above the maximum would leave an empty right bin.
            if (cut >= col.back()) continue;
            if (!cuts.empty() && cut <= cuts.back()) continue;
            cuts.push_back(cut);
        }
        b.cuts.push_back(std::move(cuts));
    }
    return b;
}

std::size_t bin_index(double value, std::span<const double> cuts) {
    // First cut with value <= cut; values equal to a cut fall left.
    return static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), value) - cuts.begin());
}

DiscretizedState discretize(const StateVector& v, const Binning& b) {
    if (v.size() != b.feature_count()) throw Error("mdp", "state dimension does not match binning");
    DiscretizedState s;
    s.bins.reserve(v.size());
    for (std::size_t f = 0; f < v.size(); ++f) s.bins.push_back(static_cast<int>(bin_index(v[f], b.cuts[f])));
    return s;
}

std::string format_bins(const DiscretizedState& s) {
    if (s.terminal) return "T";
    std::string out;
    for (std::size_t i = 0; i < s.bins.size(); ++i) {
        if (i) out += '-';
        out += std::to_string(s.bins[i]);
    }
    return out;
}

std::size_t flatten_cell(std::span<const int> bins, std::span<const std::size_t> counts) {
    if (bins.size() != counts.size()) throw Error("mdp", "cell dimension mismatch");
    std::size_t idx = 0;
    for (std::size_t f = 0; f < bins.size(); ++f) {
        if (bins[f] < 0 || static_cast<std::size_t>(bins[f]) >= counts[f]) throw Error("mdp", "bin out of range");
        idx = idx * counts[f] + static_cast<std::size_t>(bins[f]);
    }
    return idx;
}

std::vector<int> unflatten_cell(std::size_t cell, std::span<const std::size_t> counts) {
    std::vector<int> bins(counts.size());
    for (std::size_t f = counts.size(); f-- > 0;) {
        bins[f] = static_cast<int>(cell % counts[f]);
        cell /= counts[f];
    }
    return bins;
}

Qty MdpConfig::child_size() const {
    return std::max<Qty>(1, static_cast<Qty>(std::llround(static_cast<double>(parent_size) * child_fraction)));
}

void MdpConfig::validate() const {
    if (parent_size <= 0) throw ConfigError("mdp: parent_size must be positive");
    if (!(child_fraction > 0.0 && child_fraction <= 1.0)) throw ConfigError("mdp: child_fraction must be in (0,1]");
    if (horizon < 2) throw ConfigError("mdp: horizon must be >= 2 events");
    if (features.empty()) throw ConfigError("mdp: at least one feature is required");
    if (bin_counts.size() != features.size()) {
        throw ConfigError("mdp: bins lists " + std::to_string(bin_counts.size()) + " counts for " +
                          std::to_string(features.size()) + " features");
    }
    for (auto n : bin_counts) {
        if (n == 0) throw ConfigError("mdp: bin counts must be >= 1");
    }
}

namespace {

class EpisodeDriver {
public:
    EpisodeDriver(SimSession& session, const ParentOrder& parent, const Policy& policy, const Binning& binning,
                  const MdpConfig& config, const TransitionSink& sink, EpisodeOptions options)
        : session_(session),
          parent_(parent),
          policy_(policy),
          binning_(binning),
          config_(config),
          sink_(sink),
          options_(options),
          tracker_(config.features, config.volatility_window),
          remaining_(parent.total_size),
          child_(config.child_size()) {}

    EpisodeResult run() {
        tracker_.observe(session_.book());
        raw_ = state_vector();
        state_ = discretize(raw_, binning_);
        decide();
        while (remaining_ > 0 && !session_.exhausted()) {
            auto step = session_.step();
            ++elapsed_;
            if (const auto* t = std::get_if<TradeEvent>(&session_.event())) tracker_.observe(*t);
            else tracker_.observe(step.book);
            absorb(step.fills);
            if (remaining_ == 0) break;

            auto next_raw = state_vector();
            auto next = discretize(next_raw, binning_);
            const bool idle = !session_.working_order().has_value();
            if (next != state_ || idle || options_.query_every_event) {
                emit(std::move(next), std::move(next_raw), false);
                decide();
            }
        }
        if (remaining_ > 0) {
            const auto& book = session_.book();
            const Side opp = opposite(parent_.side);
            Fill f{book.ts, book.best(opp), remaining_, OrderKind::Aggressive, parent_.side};
            result_.truncated = true;
            absorb(std::span<const Fill>(&f, 1));
        }
        emit(DiscretizedState::terminal_state(), {}, true);
        return std::move(result_);
    }

private:
    StateVector state_vector() const {
        const double elapsed = static_cast<double>(elapsed_) / static_cast<double>(config_.horizon);
        return tracker_.make_state(session_.book(), parent_, remaining_, std::min(1.0, elapsed));
    }

    void absorb(std::span<const Fill> fills) {
        for (const auto& f : fills) {
            const double r = reward(f, parent_);
            pending_reward_ += r;
            result_.total_yield += r;
            remaining_ -= f.size;
            result_.fills.push_back(f);
        }
        if (remaining_ < 0) throw SimError("agent filled beyond the parent order size");
    }

    void emit(DiscretizedState next, StateVector next_raw, bool terminal) {
        Transition t{state_, raw_, action_, pending_reward_, std::move(next), std::move(next_raw), terminal};
        pending_reward_ = 0.0;
        if (sink_) sink_(t);
        state_ = t.next;
        raw_ = t.next_raw;
        result_.transitions.push_back(std::move(t));
    }

    void decide() {
        const DecisionContext ctx{state_, raw_, elapsed_, config_.horizon, remaining_, parent_.total_size, child_};
        action_ = policy_(ctx);
        ++result_.decisions;
        if (action_ == Action::Aggressive) ++result_.aggressive_decisions;
        if (session_.exhausted()) return;
        const Price best = session_.book().best(parent_.side);
        if (action_ == Action::Passive && session_.working_order() && working_price_ && *working_price_ == best) {
            // Unmoved price: keep the queue position, no action at all.
            return;
        }
        if (session_.working_order()) session_.cancel(*session_.working_order());
        working_price_.reset();
        // A cancelled child may still fill until the cancel takes effect.
        const Qty available = remaining_ - session_.pending_aggressive() - session_.outstanding_passive();
        if (available <= 0) return;
        const Qty size = std::min(child_, available);
        if (action_ == Action::Aggressive) {
            absorb(session_.place_aggressive(parent_.side, size));
            return;
        }
        session_.place_passive(parent_.side, size);
        working_price_ = best;
    }

    SimSession& session_;
    const ParentOrder& parent_;
    const Policy& policy_;
    const Binning& binning_;
    const MdpConfig& config_;
    const TransitionSink& sink_;
    EpisodeOptions options_;
    FeatureTracker tracker_;
    Qty remaining_;
    Qty child_;
    std::size_t elapsed_ = 0;
    StateVector raw_;
    DiscretizedState state_;
    Action action_ = Action::Passive;
    double pending_reward_ = 0.0;
    std::optional<Price> working_price_;
    EpisodeResult result_;
};

}  // namespace

EpisodeResult run_episode(SimSession& session, const ParentOrder& parent, const Policy& policy,
                          const Binning& binning, const MdpConfig& config, const TransitionSink& sink,
                          EpisodeOptions options) {
    if (binning.feature_count() != config.features.size()) {
        throw Error("mdp", "binning does not cover the configured features");
    }
    EpisodeDriver driver(session, parent, policy, binning, config, sink, options);
    return driver.run();
}

Policy constant_policy(Action a) {
    return [a](const DecisionContext&) { return a; };
}

Policy uniform_schedule_policy() {
    return [](const DecisionContext& ctx) {
        const Qty slices = (ctx.total + ctx.child - 1) / ctx.child;
        const auto horizon = static_cast<Qty>(std::max<std::size_t>(1, ctx.horizon));
        const Qty due_slices = static_cast<Qty>(ctx.elapsed) * slices / horizon;
        const Qty target = std::min(ctx.total, due_slices * ctx.child);
        const Qty filled = ctx.total - ctx.remaining;
        return filled < target ? Action::Aggressive : Action::Passive;
    };
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    // splitmix64 over the pair
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

MarketEnvironment::MarketEnvironment(const EventStream& events, SimParams params, MdpConfig config,
                                     Binning binning)
    : events_(events), params_(std::move(params)), config_(std::move(config)), binning_(std::move(binning)) {
    config_.validate();
    params_.validate();
    if (binning_.feature_count() != config_.features.size()) {
        throw Error("mdp", "binning does not cover the configured features");
    }
    for (std::size_t i = 0; i + config_.horizon <= events_.size(); ++i) {
        if (is_snapshot(events_[i])) starts_.push_back(i);
    }
    if (starts_.empty()) {
        throw Error("mdp", "event stream shorter than one episode horizon (" + std::to_string(config_.horizon) +
                               " events)");
    }
}

std::span<const MarketEvent> MarketEnvironment::window(std::size_t start) const {
    return std::span<const MarketEvent>(events_).subspan(start, config_.horizon);
}

std::size_t MarketEnvironment::start_for(std::uint64_t seed, std::size_t index) const {
    std::mt19937_64 rng(mix_seed(seed, index));
    std::uniform_int_distribution<std::size_t> pick(0, starts_.size() - 1);
    return starts_[pick(rng)];
}

EpisodeResult MarketEnvironment::run(std::uint64_t seed, std::size_t index, const Policy& policy,
                                     const TransitionSink& sink, EpisodeOptions options) const {
    SimParams p = params_;
    p.seed = mix_seed(params_.seed ^ seed, index);
    SimSession session(window(start_for(seed, index)), p);
    const auto parent = ParentOrder::arrive(config_.side, config_.parent_size, session.book());
    return run_episode(session, parent, policy, binning_, config_, sink, options);
}

std::vector<StateVector> collect_state_samples(const EventStream& events, const SimParams& params,
                                               const MdpConfig& config, std::size_t episodes, std::uint64_t seed) {
    // One bin per feature; the policy is queried on every event.
    Binning flat;
    for (auto f : config.features) {
        flat.names.emplace_back(feature_name(f));
        flat.cuts.emplace_back();
    }
    MarketEnvironment env(events, params, config, flat);
    const double children = static_cast<double>(config.parent_size) / static_cast<double>(config.child_size());
    const double p_aggr = std::clamp(children / static_cast<double>(config.horizon), 0.0, 1.0);
    std::vector<StateVector> samples;
    for (std::size_t e = 0; e < episodes; ++e) {
        std::mt19937_64 rng(mix_seed(seed ^ 0xC0FFEEull, e));
        std::bernoulli_distribution aggr(p_aggr);
        Policy random_policy = [&](const DecisionContext& ctx) {
            samples.push_back(ctx.raw);
            return aggr(rng) ? Action::Aggressive : Action::Passive;
        };
        env.run(seed, e, random_policy, {}, EpisodeOptions{true});
    }
    return samples;
}

void write_trajectory_header(std::ostream& out) {
    out << "episode,step,state_bins,action,reward,next_state_bins,terminal\n";
}

void write_trajectory(std::ostream& out, std::size_t episode, std::span<const Transition> transitions) {
    const auto old_precision = out.precision(17);
    for (std::size_t i = 0; i < transitions.size(); ++i) {
        const auto& t = transitions[i];
        out << episode << ',' << i << ',' << format_bins(t.state) << ',' << action_name(t.action) << ','
            << t.reward << ',' << format_bins(t.next) << ',' << (t.terminal ? 1 : 0) << '\n';
    }
    out.precision(old_precision);
}

}  // namespace lobexec
