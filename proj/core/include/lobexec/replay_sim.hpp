#pragma once

#include "lobexec/market_data.hpp"

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lobexec {

/// Where in the queue unexplained volume decreases at the agent's level are
/// assumed to happen.
enum class CancelModel { FrontOfQueue, BackOfQueue, UniformRandom };

std::string_view cancel_model_name(CancelModel m) noexcept;
CancelModel parse_cancel_model(std::string_view text);

/// Order-entry latency, piecewise by time of day.
///
/// Text form: a single distribution (`const(150000)`, `lognormal(11.5,0.4)`)
/// or `|`-separated buckets keyed by start time, e.g.
/// `00:00=lognormal(12,0.5)|09:30=const(80000)|15:55=lognormal(12.5,0.5)`.
/// Constant values are nanoseconds; lognormal parameters apply to ln(ns).
class LatencySpec {
public:
    enum class Kind { Constant, LogNormal };

    struct Bucket {
        Timestamp start_of_day = 0;  // nanoseconds after midnight
        Kind kind = Kind::Constant;
        double a = 0.0;  // constant ns, or mu
        double b = 0.0;  // sigma
        friend bool operator==(const Bucket&, const Bucket&) = default;
    };

    LatencySpec() : buckets_{Bucket{}} {}

    static LatencySpec constant(Timestamp ns);
    static LatencySpec parse(std::string_view text);

    Timestamp sample(Timestamp ts, std::mt19937_64& rng) const;
    std::string to_string() const;
    const std::vector<Bucket>& buckets() const noexcept { return buckets_; }

    friend bool operator==(const LatencySpec&, const LatencySpec&) = default;

private:
    std::vector<Bucket> buckets_;
};

struct SimParams {
    /// Impact threshold: an aggressive child of size o against opposite top
    /// volume v moves the market when v / o <= c_mi.
    double c_mi = 2.0;
    CancelModel cancel_model = CancelModel::UniformRandom;
    LatencySpec latency;
    std::uint64_t seed = 1;

    void validate() const;
    friend bool operator==(const SimParams&, const SimParams&) = default;
};

using OrderId = std::uint64_t;

enum class OrderKind { Passive, Aggressive };
std::string_view order_kind_name(OrderKind k) noexcept;

struct Fill {
    Timestamp ts = 0;
    Price price = 0;
    Qty size = 0;
    OrderKind kind = OrderKind::Passive;
    Side side = Side::Buy;

    friend bool operator==(const Fill&, const Fill&) = default;
};

void write_fill_log(std::ostream& out, std::span<const Fill> fills);

struct PassiveOrder {
    OrderId id = 0;
    Side side = Side::Buy;
    Price price = 0;
    Qty remaining = 0;
    /// Estimated resting volume ahead of the agent at its level.
    Qty queue_ahead = 0;
    Timestamp placed_at = 0;
};

struct ImpactState {
    bool active = false;
    /// Index of the historical snapshot the simulated book is pinned to; the
    /// replay resumes once the cursor reaches it. Equals the stream length
    /// when no reversion event exists.
    std::size_t resume_index = 0;
    Timestamp triggered_at = 0;
};

struct StepResult {
    BookSnapshot book;
    std::vector<Fill> fills;
    bool terminal = false;
};

/// A replay of a historical event stream in which one agent may rest a
/// single passive child order and send aggressive children.
///
/// The session does not own the events; the stream must outlive it.
/// Actions are stamped at the timestamp of the current event plus a sampled
/// latency and take effect before any later event whose timestamp is at or
/// after that effective time. Actions never overtake one another.
class SimSession {
public:
    SimSession(std::span<const MarketEvent> events, SimParams params);

    OrderId place_passive(Side side, Qty size);
    /// Cancels the working passive order (if any) and places a new one at the
    /// current best price on `side`, both carried by one latency sample.
    OrderId replace_passive(Side side, Qty size);
    /// Fills immediately applied are returned; with positive latency the fill
    /// may instead surface from a later step().
    std::vector<Fill> place_aggressive(Side side, Qty size);
    void cancel(OrderId id);

    StepResult step();

    /// Simulated book: equals the historical book unless impact is active.
    const BookSnapshot& book() const noexcept { return sim_book_; }
    const BookSnapshot& historical_book() const noexcept { return hist_book_; }
    const ImpactState& impact() const noexcept { return impact_; }
    const std::optional<PassiveOrder>& resting_order() const noexcept { return resting_; }
    /// Id of the order that is resting or about to rest and has no cancel in
    /// flight.
    std::optional<OrderId> working_order() const noexcept { return working_; }
    const std::vector<Fill>& fill_log() const noexcept { return fills_; }
    const SimParams& params() const noexcept { return params_; }

    /// Quantity of aggressive children sent but not yet effective.
    Qty pending_aggressive() const noexcept;
    /// Passive quantity that can still fill: the resting order (even with a
    /// cancel in flight) plus a placement not yet effective.
    Qty outstanding_passive() const noexcept;
    const MarketEvent& event() const noexcept { return events_[cursor_]; }
    std::size_t cursor() const noexcept { return cursor_; }
    std::size_t size() const noexcept { return events_.size(); }
    bool exhausted() const noexcept { return cursor_ + 1 >= events_.size(); }
    Timestamp now() const noexcept;

private:
    enum class ActionKind { Place, Cancel, Aggressive };
    struct PendingAction {
        Timestamp effective = 0;
        ActionKind kind = ActionKind::Place;
        OrderId id = 0;
        Side side = Side::Buy;
        Qty size = 0;
        Price price = 0;
    };

    Timestamp stamp();
    void enqueue(PendingAction a);
    std::vector<Fill> flush_pending();
    void apply(const PendingAction& a, std::vector<Fill>& out);
    void apply_trade(const TradeEvent& t, std::vector<Fill>& out);
    void apply_snapshot(const BookSnapshot& book);
    void attribute_cancellations(Qty decrease, Qty level_volume);
    void arm_impact(Side agent_side, Timestamp ts);

    std::span<const MarketEvent> events_;
    SimParams params_;
    std::mt19937_64 rng_;
    std::size_t cursor_ = 0;
    BookSnapshot hist_book_;
    BookSnapshot sim_book_;
    ImpactState impact_;
    BookSnapshot frozen_book_;
    std::optional<PassiveOrder> resting_;
    std::optional<OrderId> working_;
    Qty traded_at_level_ = 0;
    std::deque<PendingAction> pending_;
    Timestamp last_effective_ = 0;
    OrderId next_id_ = 1;
    std::vector<Fill> fills_;
};

/// Number of "ahead" units removed when `draws` units are cancelled uniformly
/// at random from a level of `population` units of which `ahead` sit in front
/// of the agent.
Qty sample_hypergeometric(Qty population, Qty ahead, Qty draws, std::mt19937_64& rng);

}  // namespace lobexec
