#include "lobexec/config.hpp"

#include "lobexec/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

namespace lobexec {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

[[noreturn]] void bad_value(const std::string& where, const std::string& value, const std::string& expected) {
    throw ConfigError(where + ": expected " + expected + ", got '" + value + "'");
}

double to_double(const std::string& where, const std::string& v) {
    double out = 0.0;
    const auto t = trim(v);
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (ec != std::errc{} || p != t.data() + t.size() || t.empty()) bad_value(where, v, "a number");
    return out;
}

template <typename Int>
Int to_int(const std::string& where, const std::string& v) {
    Int out = 0;
    const auto t = trim(v);
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (ec != std::errc{} || p != t.data() + t.size() || t.empty()) bad_value(where, v, "an integer");
    return out;
}

bool to_bool(const std::string& where, const std::string& v) {
    const auto t = trim(v);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    bad_value(where, v, "true or false");
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F fmt, const std::string& sep = ",") {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += sep;
        out += fmt(xs[i]);
    }
    return out;
}

std::string fmt_size(std::size_t v) { return std::to_string(v); }

struct Field {
    const char* section;
    const char* key;
    std::function<void(RunConfig&, const std::string& where, const std::string& value)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define LOBEXEC_NUM(sec, name, member)                                                           \
    Field {                                                                                      \
        sec, name,                                                                               \
            [](RunConfig& c, const std::string& w, const std::string& v) {                       \
                c.member = to_double(w, v);                                                      \
            },                                                                                   \
            [](const RunConfig& c) { return format_double(static_cast<double>(c.member)); }      \
    }

#define LOBEXEC_INT(sec, name, member)                                                           \
    Field {                                                                                      \
        sec, name,                                                                               \
            [](RunConfig& c, const std::string& w, const std::string& v) {                       \
                c.member = to_int<std::remove_cvref_t<decltype(c.member)>>(w, v);                \
            },                                                                                   \
            [](const RunConfig& c) { return std::to_string(c.member); }                          \
    }

#define LOBEXEC_BOOL(sec, name, member)                                                          \
    Field {                                                                                      \
        sec, name,                                                                               \
            [](RunConfig& c, const std::string& w, const std::string& v) {                       \
                c.member = to_bool(w, v);                                                        \
            },                                                                                   \
            [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }          \
    }

#define LOBEXEC_STR(sec, name, member)                                                           \
    Field {                                                                                      \
        sec, name, [](RunConfig& c, const std::string&, const std::string& v) { c.member = trim(v); }, \
            [](const RunConfig& c) { return c.member; }                                          \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        LOBEXEC_STR("data", "input", data.input),
        LOBEXEC_INT("data", "seed", data.synthetic.seed),
        LOBEXEC_INT("data", "n_ticks", data.synthetic.n_ticks),
        LOBEXEC_INT("data", "depth", data.synthetic.depth),
        LOBEXEC_INT("data", "initial_mid", data.synthetic.initial_mid),
        LOBEXEC_INT("data", "start_ts", data.synthetic.start_ts),
        LOBEXEC_INT("data", "tick_interval_ns", data.synthetic.tick_interval_ns),
        LOBEXEC_NUM("data", "spread_p", data.synthetic.spread_p),
        LOBEXEC_INT("data", "max_spread", data.synthetic.max_spread),
        LOBEXEC_NUM("data", "spread_change_prob", data.synthetic.spread_change_prob),
        LOBEXEC_NUM("data", "volume_mean", data.synthetic.volume_mean),
        LOBEXEC_NUM("data", "volume_refresh_prob", data.synthetic.volume_refresh_prob),
        LOBEXEC_NUM("data", "trade_intensity", data.synthetic.trade_intensity),
        LOBEXEC_NUM("data", "trade_size_mean", data.synthetic.trade_size_mean),
        LOBEXEC_NUM("data", "buy_aggressor_prob", data.synthetic.buy_aggressor_prob),
        LOBEXEC_NUM("data", "step_prob", data.synthetic.step_prob),
        LOBEXEC_NUM("data", "up_prob", data.synthetic.up_prob),
        LOBEXEC_NUM("data", "imbalance_bias", data.synthetic.imbalance_bias),

        LOBEXEC_NUM("simulator", "c_mi", simulator.params.c_mi),
        Field{"simulator", "cancel_model",
              [](RunConfig& c, const std::string& w, const std::string& v) {
                  try {
                      c.simulator.params.cancel_model = parse_cancel_model(trim(v));
                  } catch (const Error&) {
                      bad_value(w, v, "front, back or uniform");
                  }
              },
              [](const RunConfig& c) { return std::string(cancel_model_name(c.simulator.params.cancel_model)); }},
        Field{"simulator", "latency",
              [](RunConfig& c, const std::string&, const std::string& v) {
                  c.simulator.params.latency = LatencySpec::parse(trim(v));
              },
              [](const RunConfig& c) { return c.simulator.params.latency.to_string(); }},
        LOBEXEC_INT("simulator", "seed", simulator.params.seed),
        LOBEXEC_BOOL("simulator", "use_calibrated", simulator.use_calibrated),

        Field{"mdp", "side",
              [](RunConfig& c, const std::string& w, const std::string& v) {
                  const auto t = trim(v);
                  if (t == "buy") c.mdp.config.side = Side::Buy;
                  else if (t == "sell") c.mdp.config.side = Side::Sell;
                  else bad_value(w, v, "buy or sell");
              },
              [](const RunConfig& c) { return std::string(c.mdp.config.side == Side::Buy ? "buy" : "sell"); }},
        LOBEXEC_INT("mdp", "parent_size", mdp.config.parent_size),
        LOBEXEC_NUM("mdp", "child_fraction", mdp.config.child_fraction),
        LOBEXEC_INT("mdp", "horizon", mdp.config.horizon),
        Field{"mdp", "features",
              [](RunConfig& c, const std::string&, const std::string& v) {
                  c.mdp.config.features = parse_feature_list(v);
              },
              [](const RunConfig& c) { return join_features(c.mdp.config.features); }},
        Field{"mdp", "bin_counts",
              [](RunConfig& c, const std::string& w, const std::string& v) {
                  c.mdp.config.bin_counts.clear();
                  for (const auto& x : split(v, ',')) c.mdp.config.bin_counts.push_back(to_int<std::size_t>(w, x));
              },
              [](const RunConfig& c) { return join(c.mdp.config.bin_counts, fmt_size); }},
        LOBEXEC_INT("mdp", "volatility_window", mdp.config.volatility_window),
        LOBEXEC_INT("mdp", "bin_sample_episodes", mdp.bin_sample_episodes),
        LOBEXEC_BOOL("mdp", "use_selected", mdp.use_selected),

        LOBEXEC_NUM("learning", "beta", learning.learn.beta),
        LOBEXEC_NUM("learning", "gamma", learning.learn.gamma),
        LOBEXEC_NUM("learning", "alpha_c", learning.learn.alpha_c),
        LOBEXEC_NUM("learning", "alpha_offset", learning.learn.alpha_offset),
        LOBEXEC_NUM("learning", "trace_decay", learning.learn.trace_decay),
        LOBEXEC_NUM("learning", "epsilon_start", learning.learn.epsilon_start),
        LOBEXEC_NUM("learning", "epsilon_end", learning.learn.epsilon_end),
        LOBEXEC_NUM("learning", "epsilon_decay_fraction", learning.learn.epsilon_decay_fraction),
        LOBEXEC_INT("learning", "episodes", learning.learn.episodes),
        LOBEXEC_INT("learning", "seed", learning.learn.seed),
        Field{"learning", "betas",
              [](RunConfig& c, const std::string& w, const std::string& v) {
                  c.learning.betas.clear();
                  for (const auto& x : split(v, ',')) c.learning.betas.push_back(to_double(w, x));
              },
              [](const RunConfig& c) { return join(c.learning.betas, format_double); }},
        LOBEXEC_INT("learning", "eval_episodes", learning.eval_episodes),

        Field{"selection", "candidates",
              [](RunConfig& c, const std::string&, const std::string& v) {
                  c.selection.candidates = parse_feature_list(v);
              },
              [](const RunConfig& c) { return join_features(c.selection.candidates); }},
        LOBEXEC_INT("selection", "bins", selection.bins),
        LOBEXEC_INT("selection", "episodes", selection.episodes),
        LOBEXEC_NUM("selection", "gamma", selection.gamma),
        LOBEXEC_NUM("selection", "lambda_fraction", selection.lambda_fraction),
        LOBEXEC_INT("selection", "max_iter", selection.max_iter),
        LOBEXEC_NUM("selection", "tol", selection.tol),
        LOBEXEC_NUM("selection", "threshold", selection.threshold),
        LOBEXEC_INT("selection", "max_features", selection.max_features),
        Field{"selection", "bin_counts",
              [](RunConfig& c, const std::string& w, const std::string& v) {
                  c.selection.bin_counts.clear();
                  for (const auto& x : split(v, ',')) c.selection.bin_counts.push_back(to_int<std::size_t>(w, x));
              },
              [](const RunConfig& c) { return join(c.selection.bin_counts, fmt_size); }},
        LOBEXEC_INT("selection", "seed", selection.seed),

        Field{"calibration", "c_mi",
              [](RunConfig& c, const std::string& w, const std::string& v) {
                  c.calibration.c_mi.clear();
                  for (const auto& x : split(v, ',')) c.calibration.c_mi.push_back(to_double(w, x));
              },
              [](const RunConfig& c) { return join(c.calibration.c_mi, format_double); }},
        Field{"calibration", "cancel_models",
              [](RunConfig& c, const std::string& w, const std::string& v) {
                  c.calibration.cancel_models.clear();
                  for (const auto& x : split(v, ',')) {
                      try {
                          c.calibration.cancel_models.push_back(parse_cancel_model(x));
                      } catch (const Error&) {
                          bad_value(w, x, "front, back or uniform");
                      }
                  }
              },
              [](const RunConfig& c) {
                  return join(c.calibration.cancel_models,
                              [](CancelModel m) { return std::string(cancel_model_name(m)); });
              }},
        Field{"calibration", "latencies",
              [](RunConfig& c, const std::string&, const std::string& v) {
                  c.calibration.latencies.clear();
                  for (const auto& x : split(v, ';')) c.calibration.latencies.push_back(LatencySpec::parse(x));
              },
              [](const RunConfig& c) {
                  return join(c.calibration.latencies, [](const LatencySpec& l) { return l.to_string(); }, ";");
              }},
        LOBEXEC_STR("calibration", "strategy", calibration.strategy),
        LOBEXEC_INT("calibration", "episodes", calibration.episodes),
        LOBEXEC_STR("calibration", "reference", calibration.reference),
        LOBEXEC_INT("calibration", "reference_seed", calibration.reference_seed),
        LOBEXEC_INT("calibration", "seed", calibration.seed),

        LOBEXEC_INT("evaluation", "episodes", evaluation.episodes),
        LOBEXEC_INT("evaluation", "bootstrap", evaluation.bootstrap),
        LOBEXEC_NUM("evaluation", "confidence", evaluation.confidence),
        LOBEXEC_INT("evaluation", "seed", evaluation.seed),
    };
    return table;
}

#undef LOBEXEC_NUM
#undef LOBEXEC_INT
#undef LOBEXEC_BOOL
#undef LOBEXEC_STR

const char* const kSections[] = {"data", "simulator", "mdp", "learning", "selection", "calibration", "evaluation"};

const Field* find_field(const std::string& section, const std::string& key) {
    for (const auto& f : fields()) {
        if (section == f.section && key == f.key) return &f;
    }
    return nullptr;
}

pt::ptree read_ini(std::istream& in) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
    }
    return tree;
}

void apply_section(RunConfig& cfg, const std::string& section, const pt::ptree& body) {
    for (const auto& [key, value] : body) {
        const auto* f = find_field(section, key);
        if (f == nullptr) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
        f->set(cfg, section + "." + key, value.data());
    }
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) return std::to_string(v);
    return std::string(buf, p);
}

RunConfig RunConfig::parse(std::istream& in) {
    const auto tree = read_ini(in);
    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' outside any section");
        bool known = false;
        for (const auto* s : kSections) known = known || section == s;
        if (!known) throw ConfigError("unknown section [" + section + "]");
        apply_section(cfg, section, body);
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    try {
        return parse(in);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void RunConfig::merge_section(std::istream& in, const std::string& section) {
    const auto tree = read_ini(in);
    const auto it = tree.find(section);
    if (it == tree.not_found()) throw ConfigError("section [" + section + "] missing");
    apply_section(*this, section, it->second);
    validate();
}

void RunConfig::write(std::ostream& out) const {
    std::string current;
    for (const auto& f : fields()) {
        if (current != f.section) {
            if (!current.empty()) out << '\n';
            current = f.section;
            out << '[' << current << "]\n";
        }
        out << f.key << " = " << f.get(*this) << '\n';
    }
}

void RunConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write " + path.string());
    write(out);
}

void RunConfig::validate() const {
    data.synthetic.validate();
    simulator.params.validate();
    mdp.config.validate();
    learning.learn.validate();
    for (double b : learning.betas) {
        if (!(b > -1.0 && b < 1.0)) throw ConfigError("learning.betas: every beta must lie in (-1, 1)");
    }
    if (learning.eval_episodes == 0) throw ConfigError("learning.eval_episodes must be positive");
    if (mdp.bin_sample_episodes == 0) throw ConfigError("mdp.bin_sample_episodes must be positive");
    if (selection.candidates.empty()) throw ConfigError("selection.candidates must not be empty");
    if (selection.bins < 2) throw ConfigError("selection.bins must be >= 2");
    if (selection.episodes == 0) throw ConfigError("selection.episodes must be positive");
    if (!(selection.gamma > 0.0 && selection.gamma < 1.0)) throw ConfigError("selection.gamma must lie in (0, 1)");
    if (!(selection.lambda_fraction >= 0.0)) throw ConfigError("selection.lambda_fraction must be >= 0");
    if (!(selection.threshold >= 0.0 && selection.threshold <= 1.0)) {
        throw ConfigError("selection.threshold must lie in [0, 1]");
    }
    if (selection.bin_counts.empty()) throw ConfigError("selection.bin_counts must not be empty");
    for (auto n : selection.bin_counts) {
        if (n == 0) throw ConfigError("selection.bin_counts entries must be >= 1");
    }
    if (calibration.c_mi.empty() || calibration.cancel_models.empty() || calibration.latencies.empty()) {
        throw ConfigError("calibration grid must not be empty");
    }
    for (double c : calibration.c_mi) {
        if (!(c > 0.0)) throw ConfigError("calibration.c_mi values must be positive");
    }
    if (calibration.strategy != "uniform" && calibration.strategy != "passive" &&
        calibration.strategy != "aggressive") {
        throw ConfigError("calibration.strategy must be uniform, passive or aggressive");
    }
    if (calibration.episodes == 0) throw ConfigError("calibration.episodes must be positive");
    if (evaluation.episodes == 0) throw ConfigError("evaluation.episodes must be positive");
    if (!(evaluation.confidence > 0.0 && evaluation.confidence < 1.0)) {
        throw ConfigError("evaluation.confidence must lie in (0, 1)");
    }
}

void RunConfig::override_seed(std::uint64_t seed) {
    data.synthetic.seed = seed;
    simulator.params.seed = mix_seed(seed, 1);
    learning.learn.seed = mix_seed(seed, 2);
    selection.seed = mix_seed(seed, 3);
    calibration.reference_seed = mix_seed(seed, 4);
    calibration.seed = mix_seed(seed, 5);
    evaluation.seed = mix_seed(seed, 6);
}

}  // namespace lobexec
