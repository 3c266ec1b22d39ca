#include "builders.hpp"

#include <lobexec/error.hpp>
#include <lobexec/replay_sim.hpp>

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <sstream>

using namespace lobexec;

namespace {

SimParams params(double c_mi = 5.0, CancelModel model = CancelModel::FrontOfQueue, Timestamp latency = 0,
                 std::uint64_t seed = 1) {
    SimParams p;
    p.c_mi = c_mi;
    p.cancel_model = model;
    p.latency = LatencySpec::constant(latency);
    p.seed = seed;
    return p;
}

/// Drives the session to the end, recording the simulated book after each step.
std::vector<BookSnapshot> drain(SimSession& s) {
    std::vector<BookSnapshot> books{s.book()};
    while (!s.exhausted()) books.push_back(s.step().book);
    return books;
}

}  // namespace

TEST(NewSession, SingleSnapshotStream) {
    const EventStream ev{build::top(0, 99, 500, 101, 400)};
    SimSession s(ev, params());
    EXPECT_EQ(s.book(), std::get<BookSnapshot>(ev[0]));
    EXPECT_TRUE(s.fill_log().empty());
    EXPECT_FALSE(s.impact().active);
    EXPECT_TRUE(s.exhausted());
    EXPECT_THROW(s.step(), SimError);
}

TEST(NewSession, RejectsEmptyOrTradeFirst) {
    const EventStream empty;
    EXPECT_THROW(SimSession(empty, params()), SimError);
    const EventStream trade_first{build::trade(0, 100, 5, Side::Buy), build::top(1, 99, 5, 101, 5)};
    EXPECT_THROW(SimSession(trade_first, params()), SimError);
}

TEST(NewSession, RejectsBadParams) {
    const EventStream ev{build::top(0, 99, 500, 101, 400)};
    EXPECT_THROW(SimSession(ev, params(0.0)), ConfigError);
}

TEST(PlacePassive, QueueAheadIsDisplayedVolume) {
    const EventStream ev{build::top(1000, 99, 500, 101, 400), build::top(2000, 99, 500, 101, 400)};
    SimSession s(ev, params());
    const auto id = s.place_passive(Side::Buy, 100);
    ASSERT_TRUE(s.resting_order());
    EXPECT_EQ(s.resting_order()->id, id);
    EXPECT_EQ(s.resting_order()->queue_ahead, 500);
    EXPECT_EQ(s.resting_order()->price, 99);
    EXPECT_EQ(s.resting_order()->placed_at, 1000);
}

TEST(PlacePassive, Preconditions) {
    const EventStream ev{build::top(0, 99, 500, 101, 400), build::top(1, 99, 500, 101, 400)};
    SimSession s(ev, params());
    EXPECT_THROW(s.place_passive(Side::Buy, 0), SimError);
    s.place_passive(Side::Buy, 100);
    EXPECT_THROW(s.place_passive(Side::Buy, 100), SimError);
}

TEST(PlacePassive, LatencyDelaysResting) {
    const EventStream ev{build::top(0, 99, 500, 101, 400), build::top(10, 99, 500, 101, 400),
                         build::top(100, 99, 700, 101, 400)};
    SimSession s(ev, params(5.0, CancelModel::FrontOfQueue, 50));
    s.place_passive(Side::Buy, 100);
    EXPECT_FALSE(s.resting_order());
    s.step();
    ASSERT_TRUE(s.resting_order());
    EXPECT_EQ(s.resting_order()->placed_at, 50);
    EXPECT_EQ(s.resting_order()->queue_ahead, 500);
}

TEST(PlaceAggressive, FillsTopLevelOnly) {
    const EventStream ev{build::book(0, {{99, 500}}, {{101, 180}, {102, 1000}}),
                         build::book(1, {{99, 500}}, {{101, 180}, {102, 1000}})};
    SimSession s(ev, params(0.01));
    const auto fills = s.place_aggressive(Side::Buy, 250);
    ASSERT_EQ(fills.size(), 1u);
    EXPECT_EQ(fills[0].size, 180);
    EXPECT_EQ(fills[0].price, 101);
    EXPECT_EQ(fills[0].kind, OrderKind::Aggressive);
    EXPECT_EQ(s.fill_log(), fills);
}

TEST(PlaceAggressive, Preconditions) {
    const EventStream ev{build::top(0, 99, 500, 101, 400)};
    SimSession s(ev, params());
    EXPECT_THROW(s.place_aggressive(Side::Buy, 0), SimError);
    EXPECT_THROW(s.place_aggressive(Side::Buy, 10), SimError);
}

TEST(PlaceAggressive, CancelsWorkingPassive) {
    const EventStream ev{build::top(0, 99, 500, 101, 400), build::trade(1, 99, 1000, Side::Sell),
                         build::top(2, 99, 500, 101, 400)};
    SimSession s(ev, params(0.01));
    s.place_passive(Side::Buy, 100);
    s.place_aggressive(Side::Buy, 10);
    EXPECT_FALSE(s.resting_order());
    EXPECT_FALSE(s.working_order());
    const auto r = s.step();
    EXPECT_TRUE(r.fills.empty());
}

namespace {

/// Agent buys at cursor 0; the reversion is the buy trade at index 3, so the
/// book is pinned to snapshot 4 until the cursor reaches it.
EventStream impact_stream(Qty ask_volume) {
    return {build::top(0, 99, 500, 101, ask_volume),  build::top(10, 99, 510, 101, 50),
            build::top(20, 99, 520, 101, 80),          build::trade(30, 101, 80, Side::Buy),
            build::top(40, 100, 300, 102, 250),        build::top(50, 100, 310, 102, 260)};
}

}  // namespace

TEST(ImpactRule, RatioAboveThresholdKeepsHistory) {
    const auto ev = impact_stream(1000);
    SimSession s(ev, params(5.0));
    s.place_aggressive(Side::Buy, 100);
    EXPECT_FALSE(s.impact().active);
    const auto books = drain(s);
    for (std::size_t i = 1; i < ev.size(); ++i) {
        if (is_snapshot(ev[i])) {
            EXPECT_EQ(books[i], std::get<BookSnapshot>(ev[i])) << i;
        }
    }
}

TEST(ImpactRule, RatioBelowThresholdHoldsReversionBook) {
    const auto ev = impact_stream(100);
    SimSession s(ev, params(5.0));
    s.place_aggressive(Side::Buy, 100);
    EXPECT_TRUE(s.impact().active);
    EXPECT_EQ(s.impact().resume_index, 4u);
    const auto& pinned = std::get<BookSnapshot>(ev[4]);
    const auto books = drain(s);
    EXPECT_EQ(books[1], pinned);
    EXPECT_EQ(books[2], pinned);
    EXPECT_EQ(books[4], pinned);
    EXPECT_EQ(books[5], std::get<BookSnapshot>(ev[5]));
    EXPECT_FALSE(s.impact().active);
}

TEST(ImpactRule, BoundaryRatioTakesImpactBranch) {
    const auto ev = impact_stream(500);
    SimSession s(ev, params(5.0));
    s.place_aggressive(Side::Buy, 100);
    EXPECT_TRUE(s.impact().active);
    EXPECT_EQ(s.step().book, std::get<BookSnapshot>(ev[4]));
}

TEST(ImpactRule, AdverseMoveIsReversion) {
    const EventStream ev{build::top(0, 99, 500, 101, 100), build::top(10, 99, 500, 101, 90),
                         build::top(20, 99, 500, 102, 90), build::top(30, 99, 500, 102, 95)};
    SimSession s(ev, params(5.0));
    s.place_aggressive(Side::Buy, 100);
    EXPECT_EQ(s.impact().resume_index, 2u);
    EXPECT_EQ(s.step().book, std::get<BookSnapshot>(ev[2]));
}

TEST(ImpactRule, SellSideAdverseMoveIsBidDecrease) {
    const EventStream ev{build::top(0, 99, 100, 101, 500), build::top(10, 99, 90, 101, 500),
                         build::top(20, 98, 90, 101, 500), build::top(30, 98, 95, 101, 500)};
    SimSession s(ev, params(5.0));
    s.place_aggressive(Side::Sell, 100);
    EXPECT_EQ(s.impact().resume_index, 2u);
    EXPECT_EQ(s.step().book, std::get<BookSnapshot>(ev[2]));
}

TEST(ImpactRule, NoReversionHoldsLastBook) {
    const EventStream ev{build::top(0, 99, 500, 101, 100), build::top(10, 99, 500, 101, 90),
                         build::top(20, 99, 400, 101, 80)};
    SimSession s(ev, params(5.0));
    s.place_aggressive(Side::Buy, 100);
    EXPECT_EQ(s.impact().resume_index, ev.size());
    EXPECT_EQ(s.step().book, std::get<BookSnapshot>(ev[2]));
}

TEST(Cancel, NoFillAfterCancel) {
    const EventStream ev{build::top(0, 99, 500, 101, 400), build::trade(1, 99, 2000, Side::Sell),
                         build::top(2, 99, 500, 101, 400)};
    SimSession s(ev, params());
    const auto id = s.place_passive(Side::Buy, 100);
    s.cancel(id);
    EXPECT_FALSE(s.resting_order());
    drain(s);
    EXPECT_TRUE(s.fill_log().empty());
}

TEST(Cancel, TwiceIsUnknownId) {
    const EventStream ev{build::top(0, 99, 500, 101, 400), build::top(1, 99, 500, 101, 400)};
    SimSession s(ev, params());
    const auto id = s.place_passive(Side::Buy, 100);
    s.cancel(id);
    EXPECT_THROW(s.cancel(id), SimError);
    EXPECT_THROW(s.cancel(id + 7), SimError);
}

TEST(Cancel, TradeBeforeEffectiveCancelStillFills) {
    // Timeline by hand: place at 0 rests at 50us; cancel sent at 60us takes
    // effect at 110us; the trade at 70us consumes the 500 ahead and fills 100.
    const EventStream ev{build::top(0, 99, 500, 101, 400), build::top(60'000, 99, 500, 101, 400),
                         build::trade(70'000, 99, 600, Side::Sell), build::top(200'000, 99, 0, 101, 400)};
    SimSession s(ev, params(5.0, CancelModel::FrontOfQueue, 50'000));
    const auto id = s.place_passive(Side::Buy, 100);
    s.step();
    ASSERT_TRUE(s.resting_order());
    s.cancel(id);
    const auto r = s.step();
    ASSERT_EQ(r.fills.size(), 1u);
    EXPECT_EQ(r.fills[0].size, 100);
    EXPECT_EQ(r.fills[0].ts, 70'000);
    EXPECT_EQ(r.fills[0].kind, OrderKind::Passive);
    s.step();
    EXPECT_FALSE(s.resting_order());
}

TEST(Step, TradeConsumesQueueThenAgent) {
    const EventStream ev{build::top(0, 99, 500, 101, 400), build::trade(1, 99, 600, Side::Sell),
                         build::top(2, 99, 100, 101, 400)};
    SimSession s(ev, params());
    s.place_passive(Side::Buy, 300);
    const auto r = s.step();
    ASSERT_EQ(r.fills.size(), 1u);
    EXPECT_EQ(r.fills[0].size, 100);
    EXPECT_EQ(r.fills[0].price, 99);
    EXPECT_EQ(s.resting_order()->remaining, 200);
    EXPECT_EQ(s.resting_order()->queue_ahead, 0);
}

TEST(Step, SameSideTradeIgnored) {
    const EventStream ev{build::top(0, 99, 500, 101, 400), build::trade(1, 99, 600, Side::Buy),
                         build::top(2, 99, 500, 101, 400)};
    SimSession s(ev, params());
    s.place_passive(Side::Buy, 100);
    EXPECT_TRUE(s.step().fills.empty());
    EXPECT_EQ(s.resting_order()->queue_ahead, 500);
}

TEST(Step, FrontOfQueueCancellation) {
    const EventStream ev{build::top(0, 99, 500, 101, 400), build::top(1, 99, 300, 101, 400)};
    SimSession s(ev, params(5.0, CancelModel::FrontOfQueue));
    s.place_passive(Side::Buy, 100);
    s.step();
    EXPECT_EQ(s.resting_order()->queue_ahead, 300);
}

TEST(Step, BackOfQueueCancellation) {
    const EventStream ev{build::top(0, 99, 500, 101, 400), build::top(1, 99, 1000, 101, 400),
                         build::top(2, 99, 800, 101, 400), build::top(3, 99, 200, 101, 400)};
    SimSession s(ev, params(5.0, CancelModel::BackOfQueue));
    s.place_passive(Side::Buy, 100);
    s.step();
    s.step();
    EXPECT_EQ(s.resting_order()->queue_ahead, 500);
    s.step();
    // 600 removed, 300 of them from behind.
    EXPECT_EQ(s.resting_order()->queue_ahead, 200);
}

TEST(Step, TradeVolumeConsumedBeforeCancellation) {
    const EventStream ev{build::top(0, 99, 500, 101, 400), build::trade(1, 99, 100, Side::Sell),
                         build::top(2, 99, 250, 101, 400)};
    SimSession s(ev, params(5.0, CancelModel::FrontOfQueue));
    s.place_passive(Side::Buy, 100);
    s.step();
    EXPECT_EQ(s.resting_order()->queue_ahead, 400);
    s.step();
    EXPECT_EQ(s.resting_order()->queue_ahead, 250);
}

TEST(Step, LevelGoneClearsQueue) {
    const EventStream ev{build::top(0, 99, 500, 101, 400), build::top(1, 98, 300, 101, 400)};
    SimSession s(ev, params());
    s.place_passive(Side::Buy, 100);
    s.step();
    EXPECT_EQ(s.resting_order()->queue_ahead, 0);
}

TEST(Step, UniformCancellationMeanMatchesHypergeometric) {
    const EventStream ev{build::top(0, 99, 500, 101, 400), build::top(1, 99, 1000, 101, 400),
                         build::top(2, 99, 800, 101, 400)};
    // 200 of 1000 removed, 500 ahead: mean 100 removed from ahead.
    const double n = 200, big_n = 1000, k = 500;
    const double var = n * (k / big_n) * (1 - k / big_n) * (big_n - n) / (big_n - 1);
    const int runs = 2000;
    double sum = 0;
    for (int i = 0; i < runs; ++i) {
        SimSession s(ev, params(5.0, CancelModel::UniformRandom, 0, 1000 + i));
        s.place_passive(Side::Buy, 100);
        s.step();
        s.step();
        sum += static_cast<double>(s.resting_order()->queue_ahead);
    }
    const double mean = sum / runs;
    EXPECT_NEAR(mean, 400.0, 3.0 * std::sqrt(var / runs));
}

TEST(Hypergeometric, Bounds) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        const Qty r = sample_hypergeometric(50, 40, 30, rng);
        EXPECT_GE(r, 20);
        EXPECT_LE(r, 30);
    }
    EXPECT_EQ(sample_hypergeometric(10, 10, 4, rng), 4);
    EXPECT_EQ(sample_hypergeometric(10, 0, 4, rng), 0);
}

TEST(Replay, NoTouchReproducesHistory) {
    SyntheticConfig cfg;
    cfg.n_ticks = 20000;
    cfg.seed = 21;
    const auto ev = generate_synthetic(cfg);
    SimSession s(ev, params(2.0, CancelModel::UniformRandom, 1000));
    const auto books = drain(s);
    for (std::size_t i = 0; i < ev.size(); ++i) {
        if (is_snapshot(ev[i])) {
            ASSERT_EQ(books[i], std::get<BookSnapshot>(ev[i])) << i;
        }
    }
    EXPECT_TRUE(s.fill_log().empty());
}

TEST(Replay, TinyThresholdNeverDiverges) {
    SyntheticConfig cfg;
    cfg.n_ticks = 5000;
    cfg.seed = 5;
    const auto ev = generate_synthetic(cfg);
    SimSession s(ev, params(1e-12));
    std::mt19937_64 rng(9);
    while (!s.exhausted()) {
        if (rng() % 10 == 0) s.place_aggressive(rng() % 2 ? Side::Buy : Side::Sell, 1 + rng() % 500);
        const auto r = s.step();
        EXPECT_FALSE(s.impact().active);
        if (is_snapshot(s.event())) {
            ASSERT_EQ(r.book, std::get<BookSnapshot>(s.event()));
        }
    }
}

namespace {

struct RandomRun {
    std::vector<Fill> fills;
    bool queue_monotone = true;
    std::map<Price, Qty> opposite_traded;
};

RandomRun random_passive_run(const EventStream& ev, std::uint64_t seed, CancelModel model) {
    SimSession s(ev, params(2.0, model, 20'000, seed));
    std::mt19937_64 rng(seed);
    RandomRun out;
    std::optional<OrderId> tracked;
    Qty last_queue = 0;
    while (!s.exhausted()) {
        if (!s.working_order() && rng() % 20 == 0) s.place_passive(Side::Buy, 1 + rng() % 200);
        else if (s.working_order() && rng() % 200 == 0) s.cancel(*s.working_order());
        const auto r = s.step();
        if (const auto* t = std::get_if<TradeEvent>(&s.event()); t && t->aggressor == Side::Sell) {
            out.opposite_traded[t->price] += t->size;
        }
        const auto& o = s.resting_order();
        if (o && r.fills.empty()) {
            if (tracked == o->id && o->queue_ahead > last_queue) out.queue_monotone = false;
            tracked = o->id;
            last_queue = o->queue_ahead;
        } else {
            tracked.reset();
        }
    }
    out.fills = s.fill_log();
    return out;
}

}  // namespace

TEST(Replay, PassiveFillsConservedAndQueueMonotone) {
    SyntheticConfig cfg;
    cfg.n_ticks = 5000;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        cfg.seed = seed;
        const auto ev = generate_synthetic(cfg);
        for (auto model : {CancelModel::FrontOfQueue, CancelModel::BackOfQueue, CancelModel::UniformRandom}) {
            const auto run = random_passive_run(ev, seed, model);
            std::map<Price, Qty> filled;
            for (const auto& f : run.fills) filled[f.price] += f.size;
            for (const auto& [price, q] : filled) EXPECT_LE(q, run.opposite_traded.at(price));
            EXPECT_TRUE(run.queue_monotone);
        }
    }
}

TEST(Replay, FillLogReproducible) {
    SyntheticConfig cfg;
    cfg.n_ticks = 5000;
    const auto ev = generate_synthetic(cfg);
    const auto a = random_passive_run(ev, 77, CancelModel::UniformRandom);
    const auto b = random_passive_run(ev, 77, CancelModel::UniformRandom);
    EXPECT_FALSE(a.fills.empty());
    EXPECT_EQ(a.fills, b.fills);
}

TEST(FillLog, Csv) {
    std::ostringstream out;
    const std::vector<Fill> fills{{5, 99, 10, OrderKind::Passive, Side::Buy}, {6, 101, 3, OrderKind::Aggressive, Side::Sell}};
    write_fill_log(out, fills);
    EXPECT_EQ(out.str(), "ts,kind,side,price,size\n5,passive,B,99,10\n6,aggressive,S,101,3\n");
}

TEST(Latency, ParseAndFormat) {
    const auto spec = LatencySpec::parse("00:00=lognormal(12,0.5)|09:30=const(80000)|15:55=lognormal(12.5,0.5)");
    ASSERT_EQ(spec.buckets().size(), 3u);
    EXPECT_EQ(LatencySpec::parse(spec.to_string()), spec);
    std::mt19937_64 rng(1);
    const Timestamp ten_am = 10LL * 3600 * 1'000'000'000;
    EXPECT_EQ(spec.sample(ten_am, rng), 80000);
    EXPECT_EQ(LatencySpec::parse("const(150000)").to_string(), "const(150000)");
}

TEST(Latency, RejectsMalformed) {
    for (const char* text : {"", "const()", "const(-1)", "gamma(1,2)", "lognormal(1)", "01:00=const(5)",
                             "00:00=const(1)|00:00=const(2)", "lognormal(1,-1)", "25:00=const(1)"}) {
        EXPECT_THROW(LatencySpec::parse(text), ConfigError) << text;
    }
}

TEST(CancelModelNames, RoundTrip) {
    for (auto m : {CancelModel::FrontOfQueue, CancelModel::BackOfQueue, CancelModel::UniformRandom}) {
        EXPECT_EQ(parse_cancel_model(cancel_model_name(m)), m);
    }
    EXPECT_THROW(parse_cancel_model("middle"), ConfigError);
}
