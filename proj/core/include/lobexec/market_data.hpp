#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace lobexec {

/// Prices are integer multiples of the instrument tick size.
using Price = std::int64_t;
using Qty = std::int64_t;
/// Nanoseconds since the epoch of the feed.
using Timestamp = std::int64_t;

enum class Side { Buy, Sell };

constexpr Side opposite(Side s) noexcept { return s == Side::Buy ? Side::Sell : Side::Buy; }
char side_code(Side s) noexcept;
std::string_view side_name(Side s) noexcept;
Side parse_side(std::string_view text);

struct PriceLevel {
    Price price = 0;
    Qty volume = 0;

    friend bool operator==(const PriceLevel&, const PriceLevel&) = default;
};

/// One top-of-book-to-depth-L picture of the limit order book. Bids are best
/// first with strictly decreasing prices; asks are best first with strictly
/// increasing prices.
struct BookSnapshot {
    Timestamp ts = 0;
    std::vector<PriceLevel> bids;
    std::vector<PriceLevel> asks;

    std::size_t depth() const noexcept { return std::min(bids.size(), asks.size()); }
    Price best_bid() const { return bids.front().price; }
    Price best_ask() const { return asks.front().price; }
    Qty best_bid_volume() const { return bids.front().volume; }
    Qty best_ask_volume() const { return asks.front().volume; }
    /// Mid price at half-tick resolution: best_bid + best_ask.
    Price mid_x2() const { return best_bid() + best_ask(); }
    Price spread() const { return best_ask() - best_bid(); }

    /// Best price on the given side (bid for Buy, ask for Sell).
    Price best(Side s) const { return s == Side::Buy ? best_bid() : best_ask(); }
    const std::vector<PriceLevel>& levels(Side s) const { return s == Side::Buy ? bids : asks; }
    /// Displayed volume at `price` on side `s`, or -1 when the price is not
    /// among the displayed levels.
    Qty volume_at(Side s, Price price) const;

    friend bool operator==(const BookSnapshot&, const BookSnapshot&) = default;
};

struct TradeEvent {
    Timestamp ts = 0;
    Price price = 0;
    Qty size = 0;
    Side aggressor = Side::Buy;

    friend bool operator==(const TradeEvent&, const TradeEvent&) = default;
};

using MarketEvent = std::variant<BookSnapshot, TradeEvent>;
using EventStream = std::vector<MarketEvent>;

Timestamp event_ts(const MarketEvent& e) noexcept;
inline bool is_snapshot(const MarketEvent& e) noexcept { return std::holds_alternative<BookSnapshot>(e); }

/// Throws lobexec::Error describing the first violated invariant.
void validate_snapshot(const BookSnapshot& book);

/// Column layout of a tick CSV, recovered from its header row.
struct TickSchema {
    std::size_t depth = 0;
    std::size_t ts_col = 0;
    std::size_t type_col = 1;
    std::vector<std::size_t> bid_px, bid_vol, ask_px, ask_vol;

    static TickSchema from_header(std::string_view header);
    static TickSchema canonical(std::size_t depth);
    std::string header() const;
};

/// Parses a tick CSV. Events come back in non-decreasing timestamp order;
/// when a trade and a snapshot share a timestamp the trade is ordered first.
EventStream parse_ticks(std::istream& in);
EventStream parse_ticks(const std::filesystem::path& path);

/// Writes the canonical CSV layout. Every snapshot must carry exactly `depth`
/// levels per side.
void write_ticks(std::ostream& out, const EventStream& events, std::size_t depth);
void write_ticks(const std::filesystem::path& path, const EventStream& events, std::size_t depth);

struct SyntheticConfig {
    std::uint64_t seed = 7;
    std::size_t n_ticks = 10000;
    std::size_t depth = 5;
    Price initial_mid = 10000;
    Timestamp start_ts = 34'200'000'000'000;  // 09:30
    Timestamp tick_interval_ns = 1'000'000;
    /// Spread in ticks is 1 + Geometric(spread_p), capped at max_spread.
    double spread_p = 0.6;
    int max_spread = 4;
    double spread_change_prob = 0.2;
    /// Mean of the per-level volume distribution (1 + geometric).
    double volume_mean = 200.0;
    /// Per tick, per level probability that displayed volume is redrawn.
    double volume_refresh_prob = 0.1;
    /// Bernoulli probability of a trade between consecutive snapshots.
    double trade_intensity = 0.3;
    double trade_size_mean = 60.0;
    double buy_aggressor_prob = 0.5;
    /// Probability the mid takes a one-tick step on a given tick.
    double step_prob = 0.05;
    /// Probability that a step is upward.
    double up_prob = 0.5;
    /// Added to up_prob in proportion to the top-level imbalance.
    double imbalance_bias = 0.0;

    void validate() const;
};

/// Lazy random-walk book with geometric level volumes and Bernoulli-thinned
/// trades that consume top-of-book liquidity. Pure function of `config`.
EventStream generate_synthetic(const SyntheticConfig& config);

}  // namespace lobexec
