#include "lobexec_tools/pipeline.hpp"

#include <lobexec/error.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace lobexec::pipeline {

namespace fs = std::filesystem;

namespace {

Binning flat_binning(const MdpConfig& mdp) {
    Binning b;
    for (auto f : mdp.features) {
        b.names.emplace_back(feature_name(f));
        b.cuts.emplace_back();
    }
    return b;
}

double percentile(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

void write_resolved(const Context& ctx, const std::string& command) {
    ctx.config.save(ctx.out / ("resolved_" + command + ".ini"));
}

std::vector<double> read_yields(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open reference yields " + path.string());
    std::vector<double> out;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || (row == 1 && line == "yield")) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(line, &used));
            if (used != line.size()) throw std::invalid_argument(line);
        } catch (const std::exception&) {
            throw ParseError(row, "expected one yield per line in " + path.string());
        }
    }
    if (out.empty()) throw Error("io", "no yields in " + path.string());
    return out;
}

void write_yields(const fs::path& path, std::span<const double> ys) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write " + path.string());
    out.precision(17);
    out << "yield\n";
    for (double y : ys) out << y << '\n';
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write " + path.string());
    out.precision(17);
    return out;
}

std::string fixed(double v, int digits = 4) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

}  // namespace

Binning fit_binning(const EventStream& events, const SimParams& params, const MdpConfig& mdp,
                    std::size_t sample_episodes, std::uint64_t seed) {
    const auto samples = collect_state_samples(events, params, mdp, sample_episodes, seed);
    std::vector<std::string> names;
    for (auto f : mdp.features) names.emplace_back(feature_name(f));
    return fit_bins(samples, mdp.bin_counts, names);
}

TrainedModel train_model(const EventStream& events, const SimParams& params, const MdpConfig& mdp,
                         const Binning& binning, const LearnConfig& learn) {
    MarketEnvironment env(events, params, mdp, binning);
    auto result = train(market_runner(env, learn.seed), binning.bin_counts(), learn);
    return TrainedModel{TableDocument{std::move(result.table), binning, learn}, std::move(result.log)};
}

double sample_mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_stddev(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = sample_mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double PolicyStats::mean() const { return sample_mean(yields); }
double PolicyStats::stddev() const { return sample_stddev(yields); }
double PolicyStats::aggressive_share() const {
    return decisions == 0 ? 0.0 : static_cast<double>(aggressive) / static_cast<double>(decisions);
}

PolicyStats evaluate_policy(const MarketEnvironment& env, const Policy& policy, std::size_t episodes,
                            std::uint64_t seed, EpisodeOptions options) {
    if (episodes == 0) throw ConfigError("evaluation needs at least one episode");
    PolicyStats s;
    s.yields.reserve(episodes);
    for (std::size_t i = 0; i < episodes; ++i) {
        const auto r = env.run(seed, i, policy, {}, options);
        s.yields.push_back(r.total_yield);
        s.decisions += r.decisions;
        s.aggressive += r.aggressive_decisions;
    }
    return s;
}

Policy greedy_policy(const QTable& q) {
    return [q](const DecisionContext& ctx) { return q.greedy(ctx.state); };
}

std::vector<SweepRow> sweep_beta(const EventStream& events, const SimParams& params, const MdpConfig& mdp,
                                 const Binning& binning, const LearnConfig& learn, std::span<const double> betas,
                                 std::size_t eval_episodes, std::uint64_t eval_seed) {
    if (betas.empty()) throw ConfigError("beta sweep needs at least one beta");
    MarketEnvironment env(events, params, mdp, binning);
    std::vector<SweepRow> rows;
    for (double beta : betas) {
        SweepRow row;
        row.beta = beta;
        try {
            LearnConfig cfg = learn;
            cfg.beta = beta;
            const auto model = train_model(events, params, mdp, binning, cfg);
            row.stats = evaluate_policy(env, greedy_policy(model.doc.table), eval_episodes, eval_seed);
        } catch (const Error& e) {
            row.failed = true;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

BootstrapSummary bootstrap(std::span<const double> xs, std::size_t resamples, double confidence, std::uint64_t seed) {
    if (xs.empty()) throw Error("stats", "bootstrap of an empty sample");
    if (resamples == 0) {
        const double m = sample_mean(xs);
        const double s = sample_stddev(xs);
        return {{m, m}, {s, s}};
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, xs.size() - 1);
    std::vector<double> means, stds, draw(xs.size());
    means.reserve(resamples);
    stds.reserve(resamples);
    for (std::size_t r = 0; r < resamples; ++r) {
        for (auto& d : draw) d = xs[pick(rng)];
        means.push_back(sample_mean(draw));
        stds.push_back(sample_stddev(draw));
    }
    const double tail = (1.0 - confidence) / 2.0;
    return {{percentile(means, tail), percentile(means, 1.0 - tail)},
            {percentile(stds, tail), percentile(stds, 1.0 - tail)}};
}

Strategy benchmark_strategy(const std::string& name) {
    if (name == "passive") return {"all_passive", constant_policy(Action::Passive), {}};
    if (name == "aggressive") return {"all_aggressive", constant_policy(Action::Aggressive), {}};
    if (name == "uniform") return {"uniform_schedule", uniform_schedule_policy(), EpisodeOptions{true}};
    throw ConfigError("unknown benchmark strategy '" + name + "'");
}

SelectionOutcome select_state_variables(const EventStream& events, const SimParams& params, const MdpConfig& mdp,
                                        const SelectionSection& sel, std::size_t bin_sample_episodes) {
    MdpConfig m = mdp;
    m.features = sel.candidates;
    m.bin_counts.assign(m.features.size(), sel.bins);
    const auto binning = fit_binning(events, params, m, bin_sample_episodes, sel.seed);
    MarketEnvironment env(events, params, m, binning);

    std::vector<Transition> batch;
    const TransitionSink sink = [&](const Transition& t) { batch.push_back(t); };
    for (std::size_t e = 0; e < sel.episodes; ++e) {
        std::mt19937_64 rng(mix_seed(sel.seed, e));
        std::bernoulli_distribution coin(0.5);
        const Policy random_policy = [&](const DecisionContext&) {
            return coin(rng) ? Action::Aggressive : Action::Passive;
        };
        env.run(sel.seed, e, random_policy, sink);
    }

    const auto basis = BasisSet::per_variable(binning.names, binning.bin_counts());
    const auto passive = [](const DiscretizedState&) { return Action::Passive; };
    const auto sys = build_matrices(batch, basis, passive, sel.gamma);
    const double lambda = sel.lambda_fraction * sys.b.cwiseAbs().maxCoeff();

    SelectionOutcome out;
    out.report.variables = binning.names;
    out.report.lambda = lambda;
    out.report.threshold = sel.threshold;
    out.report.lspi = lspi(batch, basis, sel.gamma, lambda, sel.max_iter, sel.tol);
    out.report.attribution = attribution(basis, out.report.lspi.w);
    out.report.selected = select_features(basis, out.report.lspi.w, sel.threshold);

    out.features.push_back(Feature::RemainingFraction);
    for (const auto& name : out.report.selected) {
        const auto f = parse_feature(name);
        if (f == Feature::RemainingFraction) continue;
        if (out.features.size() > sel.max_features) break;
        out.features.push_back(f);
    }
    for (std::size_t i = 0; i < out.features.size(); ++i) {
        out.bin_counts.push_back(sel.bin_counts[std::min(i, sel.bin_counts.size() - 1)]);
    }
    return out;
}

std::vector<EvaluationRow> evaluate_against_benchmarks(const EventStream& events, const SimParams& params,
                                                       const MdpConfig& mdp, const DecisionTree& tree,
                                                       const EvaluationSection& eval) {
    MdpConfig m = mdp;
    m.features.clear();
    for (const auto& name : tree.binning().names) m.features.push_back(parse_feature(name));
    m.bin_counts = tree.binning().bin_counts();
    MarketEnvironment env(events, params, m, tree.binning());

    std::vector<Strategy> strategies{{"rl_tree", tree_policy(tree), {}}};
    for (const char* name : {"passive", "aggressive", "uniform"}) strategies.push_back(benchmark_strategy(name));

    std::vector<EvaluationRow> rows;
    for (std::size_t i = 0; i < strategies.size(); ++i) {
        const auto& s = strategies[i];
        EvaluationRow row{s.name, evaluate_policy(env, s.policy, eval.episodes, eval.seed, s.options), {}};
        row.ci = bootstrap(row.stats.yields, eval.bootstrap, eval.confidence, mix_seed(eval.seed, i));
        rows.push_back(std::move(row));
    }
    return rows;
}

Context make_context(const fs::path& config_path, std::optional<std::uint64_t> seed, const fs::path& out) {
    Context ctx{config_path.empty() ? RunConfig{} : RunConfig::load(config_path), out};
    if (seed) ctx.config.override_seed(*seed);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw Error("io", "cannot create output directory " + out.string() + ": " + ec.message());

    if (ctx.config.simulator.use_calibrated && fs::exists(out / "psi.ini")) {
        std::ifstream in(out / "psi.ini");
        ctx.config.merge_section(in, "simulator");
    }
    if (ctx.config.mdp.use_selected && fs::exists(out / "selected.ini")) {
        std::ifstream in(out / "selected.ini");
        ctx.config.merge_section(in, "mdp");
    }
    return ctx;
}

EventStream load_events(const Context& ctx) {
    if (!ctx.config.data.input.empty()) return parse_ticks(fs::path(ctx.config.data.input));
    const auto local = ctx.out / "ticks.csv";
    if (fs::exists(local)) return parse_ticks(local);
    throw Error("io", "no tick data: set [data] input or run synth first (missing " + local.string() + ")");
}

std::string cmd_synth(const Context& ctx) {
    const auto events = generate_synthetic(ctx.config.data.synthetic);
    const auto path = ctx.out / "ticks.csv";
    write_ticks(path, events, ctx.config.data.synthetic.depth);
    write_resolved(ctx, "synth");
    return "synth: " + std::to_string(events.size()) + " events -> " + path.string();
}

std::string cmd_ingest(const Context& ctx) {
    if (ctx.config.data.input.empty()) throw ConfigError("ingest needs [data] input");
    const auto events = parse_ticks(fs::path(ctx.config.data.input));
    std::size_t snapshots = 0;
    std::size_t depth = ctx.config.data.synthetic.depth;
    for (const auto& e : events) {
        if (const auto* s = std::get_if<BookSnapshot>(&e)) {
            if (snapshots++ == 0) depth = s->depth();
        }
    }
    const auto path = ctx.out / "ticks.csv";
    write_ticks(path, events, depth);
    write_resolved(ctx, "ingest");
    return "ingest: " + std::to_string(snapshots) + " snapshots, " + std::to_string(events.size() - snapshots) +
           " trades -> " + path.string();
}

std::string cmd_calibrate(const Context& ctx) {
    const auto& cfg = ctx.config;
    const auto events = load_events(ctx);
    const auto strategy = benchmark_strategy(cfg.calibration.strategy);
    CalibrationSetup setup{&events, cfg.mdp.config, flat_binning(cfg.mdp.config), strategy.policy,
                           strategy.options, cfg.calibration.episodes, cfg.calibration.seed};

    std::vector<double> reference;
    if (!cfg.calibration.reference.empty()) {
        reference = read_yields(cfg.calibration.reference);
    } else {
        CalibrationSetup ref = setup;
        ref.seed = cfg.calibration.reference_seed;
        reference = simulate_yields(ref, cfg.simulator.params);
    }
    write_yields(ctx.out / "reference_yields.csv", reference);

    const auto grid = PsiGrid::product(cfg.calibration.c_mi, cfg.calibration.cancel_models,
                                       cfg.calibration.latencies, cfg.simulator.params.seed);
    const auto result = calibrate(grid, reference, setup);
    {
        auto out = open_out(ctx.out / "divergence.csv");
        write_divergence_table(out, result);
    }
    {
        auto out = open_out(ctx.out / "psi.ini");
        out << "[simulator]\nc_mi = " << format_double(result.best.c_mi)
            << "\ncancel_model = " << cancel_model_name(result.best.cancel_model)
            << "\nlatency = " << result.best.latency.to_string() << '\n';
    }
    write_resolved(ctx, "calibrate");
    return "calibrate: best C_MI=" + format_double(result.best.c_mi) + " cancel_model=" +
           std::string(cancel_model_name(result.best.cancel_model)) + " latency=" + result.best.latency.to_string() +
           " kl=" + format_double(result.table[result.best_index].kl);
}

std::string cmd_select(const Context& ctx) {
    const auto& cfg = ctx.config;
    const auto events = load_events(ctx);
    const auto outcome = select_state_variables(events, cfg.simulator.params, cfg.mdp.config, cfg.selection,
                                                cfg.mdp.bin_sample_episodes);
    write_text_file(ctx.out / "selection.json", selection_report_json(outcome.report));
    {
        auto out = open_out(ctx.out / "selected.ini");
        std::string counts;
        for (std::size_t i = 0; i < outcome.bin_counts.size(); ++i) {
            counts += (i ? "," : "") + std::to_string(outcome.bin_counts[i]);
        }
        out << "[mdp]\nfeatures = " << join_features(outcome.features) << "\nbin_counts = " << counts << '\n';
    }
    write_resolved(ctx, "select");
    return "select: " + join_features(outcome.features) + (outcome.report.lspi.oscillated ? " (lspi oscillated)" : "");
}

std::string cmd_train(const Context& ctx) {
    const auto& cfg = ctx.config;
    const auto events = load_events(ctx);
    const auto binning = fit_binning(events, cfg.simulator.params, cfg.mdp.config, cfg.mdp.bin_sample_episodes,
                                     cfg.learning.learn.seed);
    const auto model = train_model(events, cfg.simulator.params, cfg.mdp.config, binning, cfg.learning.learn);
    write_text_file(ctx.out / "qtable.json", table_to_json(model.doc));
    {
        auto out = open_out(ctx.out / "train_log.csv");
        write_train_log(out, model.log);
    }

    MdpConfig m = cfg.mdp.config;
    MarketEnvironment env(events, cfg.simulator.params, m, binning);
    const auto policy = greedy_policy(model.doc.table);
    auto traj = open_out(ctx.out / "trajectories.csv");
    write_trajectory_header(traj);
    std::vector<double> yields;
    for (std::size_t i = 0; i < cfg.learning.eval_episodes; ++i) {
        const auto r = env.run(cfg.evaluation.seed, i, policy);
        write_trajectory(traj, i, r.transitions);
        yields.push_back(r.total_yield);
    }
    write_resolved(ctx, "train");
    return "train: " + std::to_string(cfg.learning.learn.episodes) + " episodes, greedy mean yield " +
           fixed(sample_mean(yields)) + " over " + std::to_string(yields.size()) + " episodes";
}

std::string cmd_sweep_beta(const Context& ctx) {
    const auto& cfg = ctx.config;
    const auto events = load_events(ctx);
    const auto binning = fit_binning(events, cfg.simulator.params, cfg.mdp.config, cfg.mdp.bin_sample_episodes,
                                     cfg.learning.learn.seed);
    const auto rows = sweep_beta(events, cfg.simulator.params, cfg.mdp.config, binning, cfg.learning.learn,
                                 cfg.learning.betas, cfg.learning.eval_episodes, cfg.evaluation.seed);
    auto summary = open_out(ctx.out / "sweep_summary.csv");
    auto yields = open_out(ctx.out / "sweep_yields.csv");
    summary << "beta,mean_yield,std_yield,aggressive_share,episodes,error\n";
    yields << "beta,episode,yield\n";
    std::ostringstream text;
    text << "sweep-beta:";
    for (const auto& r : rows) {
        summary << r.beta << ',';
        if (r.failed) {
            summary << "nan,nan,nan,0,\"" << r.error << "\"\n";
            text << " beta=" << r.beta << " failed;";
            continue;
        }
        summary << r.stats.mean() << ',' << r.stats.stddev() << ',' << r.stats.aggressive_share() << ','
                << r.stats.yields.size() << ",\n";
        for (std::size_t i = 0; i < r.stats.yields.size(); ++i) {
            yields << r.beta << ',' << i << ',' << r.stats.yields[i] << '\n';
        }
        text << " beta=" << r.beta << " share=" << fixed(r.stats.aggressive_share(), 3)
             << " std=" << fixed(r.stats.stddev(), 2) << ';';
    }
    write_resolved(ctx, "sweep-beta");
    return text.str();
}

std::string cmd_extract_tree(const Context& ctx) {
    const auto path = ctx.out / "qtable.json";
    if (!fs::exists(path)) throw Error("io", "missing " + path.string() + ": run train first");
    const auto doc = table_from_json(read_text_file(path));
    const auto table = extract_policy(doc.table, doc.binning);
    const auto tree = build_tree(table);
    const auto bad = count_mismatches(tree, table);
    if (bad != 0) throw Error("policy", "tree disagrees with the table on " + std::to_string(bad) + " cells");

    write_text_file(ctx.out / "tree.json", export_tree(tree, TreeFormat::Json));
    write_text_file(ctx.out / "tree.dot", export_tree(tree, TreeFormat::Dot));
    write_text_file(ctx.out / "tree.txt", export_tree(tree, TreeFormat::Text));
    {
        auto out = open_out(ctx.out / "policy_table.csv");
        out << "state_bins,action,visited\n";
        const auto counts = table.binning.bin_counts();
        for (std::size_t c = 0; c < table.cell_count(); ++c) {
            out << format_bins(DiscretizedState{unflatten_cell(c, counts), false}) << ','
                << action_name(table.actions[c]) << ',' << (table.visited[c] ? 1 : 0) << '\n';
        }
    }
    write_resolved(ctx, "extract-tree");
    return "extract-tree: " + std::to_string(table.cell_count()) + " cells -> " + std::to_string(tree.leaf_count()) +
           " leaves, 0 mismatches";
}

std::string cmd_evaluate(const Context& ctx) {
    const auto& cfg = ctx.config;
    const auto path = ctx.out / "tree.json";
    if (!fs::exists(path)) throw Error("io", "missing " + path.string() + ": run extract-tree first");
    const auto tree = import_tree_json(read_text_file(path));
    const auto events = load_events(ctx);
    const auto rows = evaluate_against_benchmarks(events, cfg.simulator.params, cfg.mdp.config, tree, cfg.evaluation);

    auto table = open_out(ctx.out / "evaluation.csv");
    table << "strategy,episodes,mean_yield,std_yield,mean_ci_low,mean_ci_high,std_ci_low,std_ci_high,"
             "aggressive_share\n";
    auto per = open_out(ctx.out / "evaluation_yields.csv");
    per << "strategy,episode,yield\n";
    std::ostringstream text;
    text << "evaluate:";
    for (const auto& r : rows) {
        table << r.strategy << ',' << r.stats.yields.size() << ',' << r.stats.mean() << ',' << r.stats.stddev() << ','
              << r.ci.mean.low << ',' << r.ci.mean.high << ',' << r.ci.stddev.low << ',' << r.ci.stddev.high << ','
              << r.stats.aggressive_share() << '\n';
        for (std::size_t i = 0; i < r.stats.yields.size(); ++i) {
            per << r.strategy << ',' << i << ',' << r.stats.yields[i] << '\n';
        }
        text << ' ' << r.strategy << " mean=" << fixed(r.stats.mean(), 2) << " std=" << fixed(r.stats.stddev(), 2)
             << ';';
    }
    write_resolved(ctx, "evaluate");
    return text.str();
}

}  // namespace lobexec::pipeline
