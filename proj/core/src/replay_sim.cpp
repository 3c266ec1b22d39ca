#include "lobexec/replay_sim.hpp"

#include "lobexec/error.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace lobexec {

namespace {

constexpr Timestamp kDayNs = 86'400'000'000'000;
constexpr Timestamp kNever = std::numeric_limits<Timestamp>::max();

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

double parse_double(std::string_view s, std::string_view context) {
    s = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw ConfigError("latency: bad number '" + std::string(s) + "' in '" + std::string(context) + "'");
    }
    return v;
}

LatencySpec::Bucket parse_distribution(std::string_view text) {
    text = trim(text);
    const auto open = text.find('(');
    if (open == std::string_view::npos || text.back() != ')') {
        throw ConfigError("latency: expected const(ns) or lognormal(mu,sigma), got '" + std::string(text) + "'");
    }
    const auto name = trim(text.substr(0, open));
    const auto args = text.substr(open + 1, text.size() - open - 2);
    LatencySpec::Bucket b;
    if (name == "const" || name == "constant") {
        b.kind = LatencySpec::Kind::Constant;
        b.a = parse_double(args, text);
        if (b.a < 0.0) throw ConfigError("latency: constant must be >= 0");
    } else if (name == "lognormal") {
        const auto comma = args.find(',');
        if (comma == std::string_view::npos) throw ConfigError("latency: lognormal needs mu,sigma");
        b.kind = LatencySpec::Kind::LogNormal;
        b.a = parse_double(args.substr(0, comma), text);
        b.b = parse_double(args.substr(comma + 1), text);
        if (b.b < 0.0) throw ConfigError("latency: lognormal sigma must be >= 0");
    } else {
        throw ConfigError("latency: unknown distribution '" + std::string(name) + "'");
    }
    return b;
}

Timestamp parse_time_of_day(std::string_view text) {
    text = trim(text);
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) throw ConfigError("latency: bucket start must be HH:MM");
    const auto hh = static_cast<Timestamp>(parse_double(text.substr(0, colon), text));
    const auto mm = static_cast<Timestamp>(parse_double(text.substr(colon + 1), text));
    if (hh < 0 || hh > 23 || mm < 0 || mm > 59) throw ConfigError("latency: bad time of day");
    return (hh * 60 + mm) * 60'000'000'000;
}

std::string format_number(double v) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, end) : std::to_string(v);
}

}  // namespace

std::string_view cancel_model_name(CancelModel m) noexcept {
    switch (m) {
        case CancelModel::FrontOfQueue: return "front";
        case CancelModel::BackOfQueue: return "back";
        case CancelModel::UniformRandom: return "uniform";
    }
    return "?";
}

CancelModel parse_cancel_model(std::string_view text) {
    text = trim(text);
    if (text == "front" || text == "FrontOfQueue") return CancelModel::FrontOfQueue;
    if (text == "back" || text == "BackOfQueue") return CancelModel::BackOfQueue;
    if (text == "uniform" || text == "UniformRandom") return CancelModel::UniformRandom;
    throw ConfigError("unknown cancellation model '" + std::string(text) + "' (front|back|uniform)");
}

std::string_view order_kind_name(OrderKind k) noexcept {
    return k == OrderKind::Passive ? "passive" : "aggressive";
}

LatencySpec LatencySpec::constant(Timestamp ns) {
    if (ns < 0) throw ConfigError("latency: constant must be >= 0");
    LatencySpec spec;
    spec.buckets_ = {Bucket{0, Kind::Constant, static_cast<double>(ns), 0.0}};
    return spec;
}

LatencySpec LatencySpec::parse(std::string_view text) {
    LatencySpec spec;
    spec.buckets_.clear();
    text = trim(text);
    if (text.empty()) throw ConfigError("latency: empty specification");
    std::size_t start = 0;
    while (start <= text.size()) {
        auto bar = text.find('|', start);
        if (bar == std::string_view::npos) bar = text.size();
        const auto piece = trim(text.substr(start, bar - start));
        const auto eq = piece.find('=');
        Bucket b;
        if (eq == std::string_view::npos) {
            b = parse_distribution(piece);
            b.start_of_day = 0;
        } else {
            b = parse_distribution(piece.substr(eq + 1));
            b.start_of_day = parse_time_of_day(piece.substr(0, eq));
        }
        if (!spec.buckets_.empty() && b.start_of_day <= spec.buckets_.back().start_of_day) {
            throw ConfigError("latency: bucket start times must be strictly increasing");
        }
        spec.buckets_.push_back(b);
        start = bar + 1;
    }
    if (spec.buckets_.front().start_of_day != 0) {
        throw ConfigError("latency: first bucket must start at 00:00");
    }
    return spec;
}

Timestamp LatencySpec::sample(Timestamp ts, std::mt19937_64& rng) const {
    Timestamp tod = ts % kDayNs;
    if (tod < 0) tod += kDayNs;
    const Bucket* chosen = &buckets_.front();
    for (const auto& b : buckets_) {
        if (b.start_of_day <= tod) chosen = &b;
    }
    if (chosen->kind == Kind::Constant) return static_cast<Timestamp>(std::llround(chosen->a));
    std::lognormal_distribution<double> dist(chosen->a, chosen->b);
    return static_cast<Timestamp>(std::llround(dist(rng)));
}

std::string LatencySpec::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < buckets_.size(); ++i) {
        const auto& b = buckets_[i];
        if (i) out += '|';
        if (buckets_.size() > 1) {
            const auto minutes = b.start_of_day / 60'000'000'000;
            char buf[16];
            std::snprintf(buf, sizeof buf, "%02lld:%02lld", static_cast<long long>(minutes / 60),
                          static_cast<long long>(minutes % 60));
            out += buf;
            out += '=';
        }
        if (b.kind == Kind::Constant) out += "const(" + format_number(b.a) + ")";
        else out += "lognormal(" + format_number(b.a) + "," + format_number(b.b) + ")";
    }
    return out;
}

void SimParams::validate() const {
    if (!(c_mi > 0.0) || !std::isfinite(c_mi)) throw ConfigError("simulator: c_mi must be positive");
    if (latency.buckets().empty()) throw ConfigError("simulator: latency needs at least one bucket");
}

void write_fill_log(std::ostream& out, std::span<const Fill> fills) {
    out << "ts,kind,side,price,size\n";
    for (const auto& f : fills) {
        out << f.ts << ',' << order_kind_name(f.kind) << ',' << side_code(f.side) << ',' << f.price << ','
            << f.size << '\n';
    }
}

Qty sample_hypergeometric(Qty population, Qty ahead, Qty draws, std::mt19937_64& rng) {
    Qty removed = 0;
    Qty pop = population;
    Qty good = ahead;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Qty i = 0; i < draws && pop > 0; ++i, --pop) {
        if (good > 0 && u(rng) * static_cast<double>(pop) < static_cast<double>(good)) {
            ++removed;
            --good;
        }
    }
    return removed;
}

SimSession::SimSession(std::span<const MarketEvent> events, SimParams params)
    : events_(events), params_(std::move(params)), rng_(params_.seed) {
    params_.validate();
    if (events_.empty()) throw SimError("cannot start a session on an empty event stream");
    const auto* first = std::get_if<BookSnapshot>(&events_.front());
    if (first == nullptr) throw SimError("event stream must begin with a book snapshot");
    hist_book_ = *first;
    sim_book_ = *first;
    last_effective_ = first->ts;
}

Timestamp SimSession::now() const noexcept { return event_ts(events_[cursor_]); }

Qty SimSession::pending_aggressive() const noexcept {
    Qty total = 0;
    for (const auto& a : pending_) {
        if (a.kind == ActionKind::Aggressive) total += a.size;
    }
    return total;
}

Qty SimSession::outstanding_passive() const noexcept {
    Qty total = resting_ ? resting_->remaining : 0;
    for (const auto& a : pending_) {
        if (a.kind == ActionKind::Place && working_ == a.id) total += a.size;
    }
    return total;
}

Timestamp SimSession::stamp() {
    const Timestamp t = now();
    const Timestamp eff = t + params_.latency.sample(t, rng_);
    last_effective_ = std::max(last_effective_, eff);
    return last_effective_;
}

void SimSession::enqueue(PendingAction a) { pending_.push_back(a); }

std::vector<Fill> SimSession::flush_pending() {
    const Timestamp limit = exhausted() ? kNever : event_ts(events_[cursor_ + 1]);
    std::vector<Fill> out;
    while (!pending_.empty() && pending_.front().effective <= limit) {
        const auto a = pending_.front();
        pending_.pop_front();
        apply(a, out);
    }
    return out;
}

OrderId SimSession::place_passive(Side side, Qty size) {
    if (size <= 0) throw SimError("passive order size must be positive");
    if (working_) throw SimError("a passive order is already live (id " + std::to_string(*working_) + ")");
    const OrderId id = next_id_++;
    enqueue({stamp(), ActionKind::Place, id, side, size, sim_book_.best(side)});
    working_ = id;
    auto fills = flush_pending();
    fills_.insert(fills_.end(), fills.begin(), fills.end());
    return id;
}

OrderId SimSession::replace_passive(Side side, Qty size) {
    if (size <= 0) throw SimError("passive order size must be positive");
    const Timestamp eff = stamp();
    if (working_) {
        enqueue({eff, ActionKind::Cancel, *working_, side, 0, 0});
        working_.reset();
    }
    const OrderId id = next_id_++;
    enqueue({eff, ActionKind::Place, id, side, size, sim_book_.best(side)});
    working_ = id;
    auto fills = flush_pending();
    fills_.insert(fills_.end(), fills.begin(), fills.end());
    return id;
}

std::vector<Fill> SimSession::place_aggressive(Side side, Qty size) {
    if (size <= 0) throw SimError("aggressive order size must be positive");
    if (exhausted()) throw SimError("session exhausted");
    const Timestamp eff = stamp();
    if (working_) {
        enqueue({eff, ActionKind::Cancel, *working_, side, 0, 0});
        working_.reset();
    }
    enqueue({eff, ActionKind::Aggressive, 0, side, size, 0});
    auto fills = flush_pending();
    fills_.insert(fills_.end(), fills.begin(), fills.end());
    return fills;
}

void SimSession::cancel(OrderId id) {
    if (!working_ || *working_ != id) throw SimError("unknown order id " + std::to_string(id));
    enqueue({stamp(), ActionKind::Cancel, id, Side::Buy, 0, 0});
    working_.reset();
    auto fills = flush_pending();
    fills_.insert(fills_.end(), fills.begin(), fills.end());
}

void SimSession::apply(const PendingAction& a, std::vector<Fill>& out) {
    switch (a.kind) {
        case ActionKind::Place: {
            if (working_ != a.id) return;  // superseded by a later cancel
            PassiveOrder o;
            o.id = a.id;
            o.side = a.side;
            o.price = a.price;
            o.remaining = a.size;
            o.placed_at = a.effective;
            o.queue_ahead = std::max<Qty>(0, sim_book_.volume_at(a.side, a.price));
            resting_ = o;
            traded_at_level_ = 0;
            return;
        }
        case ActionKind::Cancel:
            if (resting_ && resting_->id == a.id) resting_.reset();
            return;
        case ActionKind::Aggressive: {
            const Side opp = opposite(a.side);
            const Qty top = sim_book_.levels(opp).front().volume;
            const Qty filled = std::min(a.size, top);
            if (filled <= 0) return;
            Fill f{a.effective, sim_book_.best(opp), filled, OrderKind::Aggressive, a.side};
            out.push_back(f);
            const double ratio = static_cast<double>(top) / static_cast<double>(a.size);
            if (ratio <= params_.c_mi) arm_impact(a.side, a.effective);
            return;
        }
    }
}

void SimSession::arm_impact(Side agent_side, Timestamp ts) {
    // Reversion event: the next historical aggressive trade in the agent's
    // direction, or the next adverse move of the opposite best price.
    const Side opp = opposite(agent_side);
    const Price ref = hist_book_.best(opp);
    std::size_t reversion = events_.size();
    for (std::size_t j = cursor_ + 1; j < events_.size(); ++j) {
        if (const auto* t = std::get_if<TradeEvent>(&events_[j])) {
            if (t->aggressor == agent_side) {
                reversion = j;
                break;
            }
        } else {
            const auto& b = std::get<BookSnapshot>(events_[j]);
            const Price p = b.best(opp);
            const bool adverse = agent_side == Side::Buy ? p > ref : p < ref;
            if (adverse) {
                reversion = j;
                break;
            }
        }
    }
    std::size_t target = events_.size();
    for (std::size_t j = reversion; j < events_.size(); ++j) {
        if (is_snapshot(events_[j])) {
            target = j;
            break;
        }
    }
    if (target < events_.size()) {
        frozen_book_ = std::get<BookSnapshot>(events_[target]);
    } else {
        // No reversion before the end: hold the last historical book.
        for (std::size_t j = events_.size(); j-- > 0;) {
            if (is_snapshot(events_[j])) {
                frozen_book_ = std::get<BookSnapshot>(events_[j]);
                break;
            }
        }
    }
    impact_.active = true;
    impact_.resume_index = target;
    impact_.triggered_at = ts;
}

void SimSession::attribute_cancellations(Qty decrease, Qty level_volume) {
    auto& o = *resting_;
    switch (params_.cancel_model) {
        case CancelModel::FrontOfQueue:
            o.queue_ahead = std::max<Qty>(0, o.queue_ahead - decrease);
            break;
        case CancelModel::BackOfQueue: {
            const Qty behind = std::max<Qty>(0, level_volume - o.queue_ahead);
            o.queue_ahead = std::max<Qty>(0, o.queue_ahead - std::max<Qty>(0, decrease - behind));
            break;
        }
        case CancelModel::UniformRandom: {
            const Qty ahead = std::min(o.queue_ahead, level_volume);
            o.queue_ahead -= sample_hypergeometric(level_volume, ahead, decrease, rng_);
            o.queue_ahead = std::max<Qty>(0, o.queue_ahead);
            break;
        }
    }
}

void SimSession::apply_trade(const TradeEvent& t, std::vector<Fill>& out) {
    if (!resting_) return;
    auto& o = *resting_;
    if (t.aggressor != opposite(o.side)) return;
    if (t.price == o.price) {
        traded_at_level_ += t.size;
        const Qty from_ahead = std::min(t.size, o.queue_ahead);
        o.queue_ahead -= from_ahead;
        const Qty leftover = t.size - from_ahead;
        const Qty filled = std::min(leftover, o.remaining);
        if (filled > 0) {
            out.push_back({t.ts, o.price, filled, OrderKind::Passive, o.side});
            o.remaining -= filled;
            if (o.remaining == 0) {
                if (working_ == o.id) working_.reset();
                resting_.reset();
            }
        }
        return;
    }
    // A trade through the agent's price means everything ahead is gone.
    const bool through = o.side == Side::Buy ? t.price < o.price : t.price > o.price;
    if (through) o.queue_ahead = 0;
}

void SimSession::apply_snapshot(const BookSnapshot& book) {
    if (resting_) {
        auto& o = *resting_;
        const Qty before = hist_book_.volume_at(o.side, o.price);
        const Qty after = book.volume_at(o.side, o.price);
        const bool level_gone = o.side == Side::Buy ? o.price > book.best_bid() : o.price < book.best_ask();
        if (level_gone) {
            o.queue_ahead = 0;
        } else if (before >= 0 && after >= 0) {
            const Qty remaining_level = std::max<Qty>(0, before - traded_at_level_);
            const Qty decrease = remaining_level - after;
            if (decrease > 0) attribute_cancellations(decrease, remaining_level);
        }
    }
    traded_at_level_ = 0;
    hist_book_ = book;
}

StepResult SimSession::step() {
    if (exhausted()) throw SimError("cannot step an exhausted session");
    ++cursor_;
    std::vector<Fill> out;
    const auto& ev = events_[cursor_];
    if (const auto* trade = std::get_if<TradeEvent>(&ev)) {
        apply_trade(*trade, out);
    } else {
        const auto& book = std::get<BookSnapshot>(ev);
        apply_snapshot(book);
        if (impact_.active && cursor_ >= impact_.resume_index) impact_.active = false;
        sim_book_ = impact_.active ? frozen_book_ : hist_book_;
    }
    fills_.insert(fills_.end(), out.begin(), out.end());
    auto late = flush_pending();
    fills_.insert(fills_.end(), late.begin(), late.end());
    out.insert(out.end(), late.begin(), late.end());
    return {sim_book_, std::move(out), exhausted()};
}

}  // namespace lobexec
