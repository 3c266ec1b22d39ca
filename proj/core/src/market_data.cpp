#include "lobexec/market_data.hpp"

#include "lobexec/error.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

namespace lobexec {

char side_code(Side s) noexcept { return s == Side::Buy ? 'B' : 'S'; }

std::string_view side_name(Side s) noexcept { return s == Side::Buy ? "buy" : "sell"; }

Side parse_side(std::string_view text) {
    if (text == "B" || text == "buy" || text == "Buy") return Side::Buy;
    if (text == "S" || text == "sell" || text == "Sell") return Side::Sell;
    throw Error("parse", "unknown side '" + std::string(text) + "'");
}

Qty BookSnapshot::volume_at(Side s, Price price) const {
    for (const auto& level : levels(s)) {
        if (level.price == price) return level.volume;
    }
    return -1;
}

Timestamp event_ts(const MarketEvent& e) noexcept {
    return std::visit([](const auto& ev) { return ev.ts; }, e);
}

void validate_snapshot(const BookSnapshot& book) {
    if (book.bids.empty() || book.asks.empty()) {
        throw Error("book", "snapshot must carry at least one level per side");
    }
    for (std::size_t i = 0; i < book.bids.size(); ++i) {
        if (book.bids[i].volume < 0) throw Error("book", "negative bid volume");
        if (i > 0 && book.bids[i].price >= book.bids[i - 1].price) {
            throw Error("book", "bid prices not strictly decreasing");
        }
    }
    for (std::size_t i = 0; i < book.asks.size(); ++i) {
        if (book.asks[i].volume < 0) throw Error("book", "negative ask volume");
        if (i > 0 && book.asks[i].price <= book.asks[i - 1].price) {
            throw Error("book", "ask prices not strictly increasing");
        }
    }
    if (book.best_bid() >= book.best_ask()) {
        throw Error("book", "crossed book: bid " + std::to_string(book.best_bid()) + " >= ask " +
                                std::to_string(book.best_ask()));
    }
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::int64_t parse_int(std::string_view field, std::size_t row, std::string_view column) {
    field = trim(field);
    std::int64_t value = 0;
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end || field.empty()) {
        throw ParseError(row, "column '" + std::string(column) + "' is not an integer: '" +
                                  std::string(field) + "'");
    }
    return value;
}

}  // namespace

TickSchema TickSchema::from_header(std::string_view header) {
    const auto cols = split_csv(trim(header));
    TickSchema schema;
    bool have_ts = false;
    bool have_type = false;
    std::vector<std::pair<std::size_t, std::size_t>> bp, bv, ap, av;  // (level, column)
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const auto name = trim(cols[c]);
        if (name == "ts") {
            schema.ts_col = c;
            have_ts = true;
        } else if (name == "type") {
            schema.type_col = c;
            have_type = true;
        } else {
            const auto underscore = name.rfind('_');
            if (underscore == std::string_view::npos) {
                throw ParseError(1, "unknown column '" + std::string(name) + "'");
            }
            const auto prefix = name.substr(0, underscore);
            const auto level =
                static_cast<std::size_t>(parse_int(name.substr(underscore + 1), 1, name));
            if (level == 0) throw ParseError(1, "levels are numbered from 1");
            if (prefix == "bid_px") bp.emplace_back(level, c);
            else if (prefix == "bid_vol") bv.emplace_back(level, c);
            else if (prefix == "ask_px") ap.emplace_back(level, c);
            else if (prefix == "ask_vol") av.emplace_back(level, c);
            else throw ParseError(1, "unknown column '" + std::string(name) + "'");
        }
    }
    if (!have_ts || !have_type) throw ParseError(1, "header must name 'ts' and 'type' columns");
    const auto depth = bp.size();
    if (depth == 0 || bv.size() != depth || ap.size() != depth || av.size() != depth) {
        throw ParseError(1, "header must list bid_px/bid_vol/ask_px/ask_vol for the same number of levels");
    }
    auto place = [depth](std::vector<std::pair<std::size_t, std::size_t>>& src,
                         std::vector<std::size_t>& dst, std::string_view what) {
        dst.assign(depth, static_cast<std::size_t>(-1));
        for (const auto& [level, col] : src) {
            if (level > depth || dst[level - 1] != static_cast<std::size_t>(-1)) {
                throw ParseError(1, "bad or duplicate level in " + std::string(what) + " columns");
            }
            dst[level - 1] = col;
        }
    };
    schema.depth = depth;
    place(bp, schema.bid_px, "bid_px");
    place(bv, schema.bid_vol, "bid_vol");
    place(ap, schema.ask_px, "ask_px");
    place(av, schema.ask_vol, "ask_vol");
    return schema;
}

TickSchema TickSchema::canonical(std::size_t depth) {
    TickSchema s;
    s.depth = depth;
    for (std::size_t i = 0; i < depth; ++i) {
        s.bid_px.push_back(2 + i);
        s.bid_vol.push_back(2 + depth + i);
        s.ask_px.push_back(2 + 2 * depth + i);
        s.ask_vol.push_back(2 + 3 * depth + i);
    }
    return s;
}

std::string TickSchema::header() const {
    std::vector<std::string> names(2 + 4 * depth);
    names[ts_col] = "ts";
    names[type_col] = "type";
    for (std::size_t i = 0; i < depth; ++i) {
        const auto lvl = std::to_string(i + 1);
        names[bid_px[i]] = "bid_px_" + lvl;
        names[bid_vol[i]] = "bid_vol_" + lvl;
        names[ask_px[i]] = "ask_px_" + lvl;
        names[ask_vol[i]] = "ask_vol_" + lvl;
    }
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ',';
        out += names[i];
    }
    return out;
}

EventStream parse_ticks(std::istream& in) {
    EventStream events;
    std::string line;
    std::size_t row = 0;
    TickSchema schema;
    bool have_header = false;
    Timestamp last_ts = std::numeric_limits<Timestamp>::min();

    while (std::getline(in, line)) {
        ++row;
        const auto text = trim(line);
        if (text.empty()) continue;
        if (!have_header) {
            schema = TickSchema::from_header(text);
            have_header = true;
            continue;
        }
        const auto fields = split_csv(text);
        if (fields.size() < 2) throw ParseError(row, "expected at least ts and type");
        const auto type = trim(fields[schema.type_col < fields.size() ? schema.type_col : 1]);
        const Timestamp ts = parse_int(fields[schema.ts_col], row, "ts");
        if (ts < last_ts) {
            throw ParseError(row, "non-monotonic timestamp " + std::to_string(ts) + " after " +
                                      std::to_string(last_ts));
        }
        last_ts = ts;

        if (type == "S") {
            if (fields.size() != 2 + 4 * schema.depth) {
                throw ParseError(row, "snapshot row has " + std::to_string(fields.size()) +
                                          " fields, expected " + std::to_string(2 + 4 * schema.depth));
            }
            BookSnapshot book;
            book.ts = ts;
            for (std::size_t i = 0; i < schema.depth; ++i) {
                book.bids.push_back({parse_int(fields[schema.bid_px[i]], row, "bid_px"),
                                     parse_int(fields[schema.bid_vol[i]], row, "bid_vol")});
                book.asks.push_back({parse_int(fields[schema.ask_px[i]], row, "ask_px"),
                                     parse_int(fields[schema.ask_vol[i]], row, "ask_vol")});
            }
            try {
                validate_snapshot(book);
            } catch (const Error& e) {
                throw ParseError(row, e.what());
            }
            events.emplace_back(std::move(book));
        } else if (type == "T") {
            if (fields.size() != 5) {
                throw ParseError(row, "trade row needs ts,T,price,size,aggressor");
            }
            TradeEvent trade;
            trade.ts = ts;
            trade.price = parse_int(fields[2], row, "price");
            trade.size = parse_int(fields[3], row, "size");
            if (trade.size <= 0) throw ParseError(row, "trade size must be positive");
            const auto aggr = trim(fields[4]);
            if (aggr == "B") trade.aggressor = Side::Buy;
            else if (aggr == "S") trade.aggressor = Side::Sell;
            else throw ParseError(row, "aggressor must be B or S");
            events.emplace_back(trade);
        } else {
            throw ParseError(row, "unknown row type '" + std::string(type) + "'");
        }
    }
    // Ties: trades before snapshots. Timestamps are already non-decreasing,
    // so this only reorders equal-timestamp runs.
    std::stable_sort(events.begin(), events.end(), [](const MarketEvent& a, const MarketEvent& b) {
        const auto ta = event_ts(a), tb = event_ts(b);
        if (ta != tb) return ta < tb;
        return !is_snapshot(a) && is_snapshot(b);
    });
    return events;
}

EventStream parse_ticks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open tick file " + path.string());
    return parse_ticks(in);
}

void write_ticks(std::ostream& out, const EventStream& events, std::size_t depth) {
    const auto schema = TickSchema::canonical(depth);
    out << schema.header() << '\n';
    for (const auto& ev : events) {
        if (const auto* book = std::get_if<BookSnapshot>(&ev)) {
            if (book->bids.size() != depth || book->asks.size() != depth) {
                throw Error("io", "snapshot at ts " + std::to_string(book->ts) + " does not have depth " +
                                      std::to_string(depth));
            }
            out << book->ts << ",S";
            for (const auto& l : book->bids) out << ',' << l.price;
            for (const auto& l : book->bids) out << ',' << l.volume;
            for (const auto& l : book->asks) out << ',' << l.price;
            for (const auto& l : book->asks) out << ',' << l.volume;
            out << '\n';
        } else {
            const auto& t = std::get<TradeEvent>(ev);
            out << t.ts << ",T," << t.price << ',' << t.size << ',' << side_code(t.aggressor) << '\n';
        }
    }
}

void write_ticks(const std::filesystem::path& path, const EventStream& events, std::size_t depth) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("io", "cannot write tick file " + path.string());
    write_ticks(out, events, depth);
    if (!out) throw Error("io", "write failed for " + path.string());
}

void SyntheticConfig::validate() const {
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("synthetic: ") + name + " must be in [0,1]");
    };
    if (depth == 0) throw ConfigError("synthetic: depth must be >= 1");
    if (tick_interval_ns <= 1) throw ConfigError("synthetic: tick_interval_ns must be > 1");
    if (max_spread < 1) throw ConfigError("synthetic: max_spread must be >= 1");
    if (!(spread_p > 0.0 && spread_p <= 1.0)) throw ConfigError("synthetic: spread_p must be in (0,1]");
    if (!(volume_mean >= 1.0)) throw ConfigError("synthetic: volume_mean must be >= 1");
    if (!(trade_size_mean >= 1.0)) throw ConfigError("synthetic: trade_size_mean must be >= 1");
    if (initial_mid <= static_cast<Price>(max_spread + depth)) {
        throw ConfigError("synthetic: initial_mid too small for depth and spread");
    }
    prob(spread_change_prob, "spread_change_prob");
    prob(volume_refresh_prob, "volume_refresh_prob");
    prob(trade_intensity, "trade_intensity");
    prob(buy_aggressor_prob, "buy_aggressor_prob");
    prob(step_prob, "step_prob");
    prob(up_prob, "up_prob");
    if (!(imbalance_bias >= -1.0 && imbalance_bias <= 1.0)) {
        throw ConfigError("synthetic: imbalance_bias must be in [-1,1]");
    }
}

namespace {

// Book on a contiguous tick grid: bids at best_bid - i, asks at best_ask + i.
class SyntheticBook {
public:
    SyntheticBook(const SyntheticConfig& cfg, std::mt19937_64& rng)
        : cfg_(cfg), rng_(rng), vol_(1.0 / cfg.volume_mean), spread_(cfg.spread_p) {
        const Price spread = draw_spread();
        best_bid_ = cfg.initial_mid - spread / 2;
        best_ask_ = best_bid_ + spread;
        for (std::size_t i = 0; i < cfg.depth; ++i) {
            bid_vol_.push_back(draw_volume());
            ask_vol_.push_back(draw_volume());
        }
    }

    std::optional<TradeEvent> maybe_trade(Timestamp ts) {
        std::bernoulli_distribution trade(cfg_.trade_intensity);
        if (!trade(rng_)) return std::nullopt;
        std::bernoulli_distribution buy(cfg_.buy_aggressor_prob);
        std::geometric_distribution<Qty> size_dist(1.0 / cfg_.trade_size_mean);
        TradeEvent t;
        t.ts = ts;
        t.aggressor = buy(rng_) ? Side::Buy : Side::Sell;
        const Qty wanted = 1 + size_dist(rng_);
        auto& vols = t.aggressor == Side::Buy ? ask_vol_ : bid_vol_;
        t.price = t.aggressor == Side::Buy ? best_ask_ : best_bid_;
        t.size = std::min(wanted, vols.front());
        vols.front() -= t.size;
        if (vols.front() == 0) {
            // Level exhausted: the side retreats one tick.
            vols.erase(vols.begin());
            vols.push_back(draw_volume());
            if (t.aggressor == Side::Buy) ++best_ask_;
            else --best_bid_;
        }
        return t;
    }

    void evolve() {
        std::bernoulli_distribution step(cfg_.step_prob);
        if (step(rng_)) {
            const double imb = imbalance();
            const double p_up = std::clamp(cfg_.up_prob + cfg_.imbalance_bias * imb, 0.0, 1.0);
            std::bernoulli_distribution up(p_up);
            if (up(rng_)) shift_up();
            else shift_down();
        }
        std::bernoulli_distribution respread(cfg_.spread_change_prob);
        if (respread(rng_)) set_spread(draw_spread());
        if (best_ask_ - best_bid_ > cfg_.max_spread) set_spread(cfg_.max_spread);

        std::bernoulli_distribution refresh(cfg_.volume_refresh_prob);
        for (auto& v : bid_vol_) if (refresh(rng_)) v = draw_volume();
        for (auto& v : ask_vol_) if (refresh(rng_)) v = draw_volume();
    }

    BookSnapshot snapshot(Timestamp ts) const {
        BookSnapshot b;
        b.ts = ts;
        for (std::size_t i = 0; i < cfg_.depth; ++i) {
            b.bids.push_back({best_bid_ - static_cast<Price>(i), bid_vol_[i]});
            b.asks.push_back({best_ask_ + static_cast<Price>(i), ask_vol_[i]});
        }
        return b;
    }

private:
    Qty draw_volume() { return 1 + vol_(rng_); }
    Price draw_spread() { return std::min<Price>(1 + spread_(rng_), cfg_.max_spread); }

    double imbalance() const {
        const double b = static_cast<double>(bid_vol_.front());
        const double a = static_cast<double>(ask_vol_.front());
        return (b - a) / (b + a);
    }

    void shift_up() {
        ++best_bid_;
        ++best_ask_;
        bid_vol_.insert(bid_vol_.begin(), draw_volume());
        bid_vol_.pop_back();
        ask_vol_.erase(ask_vol_.begin());
        ask_vol_.push_back(draw_volume());
    }

    void shift_down() {
        --best_bid_;
        --best_ask_;
        ask_vol_.insert(ask_vol_.begin(), draw_volume());
        ask_vol_.pop_back();
        bid_vol_.erase(bid_vol_.begin());
        bid_vol_.push_back(draw_volume());
    }

    // Moves one side at a time, chosen by a fair coin, until best_ask - best_bid == spread.
    void set_spread(Price spread) {
        std::bernoulli_distribution ask_side(0.5);
        while (best_ask_ - best_bid_ != spread) {
            const bool narrow = best_ask_ - best_bid_ > spread;
            if (ask_side(rng_)) {
                if (narrow) {
                    --best_ask_;
                    ask_vol_.insert(ask_vol_.begin(), draw_volume());
                    ask_vol_.pop_back();
                } else {
                    ++best_ask_;
                    ask_vol_.erase(ask_vol_.begin());
                    ask_vol_.push_back(draw_volume());
                }
            } else if (narrow) {
                ++best_bid_;
                bid_vol_.insert(bid_vol_.begin(), draw_volume());
                bid_vol_.pop_back();
            } else {
                --best_bid_;
                bid_vol_.erase(bid_vol_.begin());
                bid_vol_.push_back(draw_volume());
            }
        }
    }

    const SyntheticConfig& cfg_;
    std::mt19937_64& rng_;
    std::geometric_distribution<Qty> vol_;
    std::geometric_distribution<Price> spread_;
    Price best_bid_ = 0;
    Price best_ask_ = 0;
    std::vector<Qty> bid_vol_;
    std::vector<Qty> ask_vol_;
};

}  // namespace

EventStream generate_synthetic(const SyntheticConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    EventStream events;
    if (config.n_ticks == 0) return events;
    events.reserve(config.n_ticks + config.n_ticks / 2);

    SyntheticBook book(config, rng);
    events.emplace_back(book.snapshot(config.start_ts));
    for (std::size_t k = 1; k < config.n_ticks; ++k) {
        const Timestamp ts = config.start_ts + static_cast<Timestamp>(k) * config.tick_interval_ns;
        if (auto trade = book.maybe_trade(ts - config.tick_interval_ns / 2)) events.emplace_back(*trade);
        book.evolve();
        events.emplace_back(book.snapshot(ts));
    }
    return events;
}

}  // namespace lobexec
