#include "lobexec/policy_tree.hpp"

#include "lobexec/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace lobexec {

using nlohmann::json;

Action PolicyTable::at(std::span<const int> bins) const {
    return actions.at(flatten_cell(bins, binning.bin_counts()));
}

PolicyTable extract_policy(const QTable& q, const Binning& binning) {
    const auto counts = binning.bin_counts();
    if (q.cell_count() == 0) throw Error("policy", "empty action-value table");
    if (counts != q.bin_counts()) throw Error("policy", "table and binning grids differ");

    const auto cells = q.cell_count();
    PolicyTable p{binning, std::vector<Action>(cells, Action::Passive), std::vector<bool>(cells, false)};
    std::vector<std::size_t> seen;
    for (std::size_t c = 0; c < cells; ++c) {
        p.actions[c] = q.greedy_cell(c);
        if (q.visits_cell(c, Action::Passive) + q.visits_cell(c, Action::Aggressive) > 0) {
            p.visited[c] = true;
            seen.push_back(c);
        }
    }
    if (seen.empty()) return p;

    std::vector<std::vector<int>> seen_bins;
    seen_bins.reserve(seen.size());
    for (auto c : seen) seen_bins.push_back(unflatten_cell(c, counts));

    for (std::size_t c = 0; c < cells; ++c) {
        if (p.visited[c]) continue;
        const auto bins = unflatten_cell(c, counts);
        long best = std::numeric_limits<long>::max();
        Action chosen = Action::Aggressive;
        for (std::size_t k = 0; k < seen.size(); ++k) {
            long d = 0;
            for (std::size_t f = 0; f < bins.size(); ++f) d += std::abs(bins[f] - seen_bins[k][f]);
            const Action a = p.actions[seen[k]];
            if (d < best) {
                best = d;
                chosen = a;
            } else if (d == best && a == Action::Passive) {
                chosen = Action::Passive;
            }
        }
        p.actions[c] = chosen;
    }
    return p;
}

DecisionTree::DecisionTree(Binning binning, std::vector<TreeNode> nodes)
    : binning_(std::move(binning)), nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw Error("policy", "tree has no nodes");
    for (const auto& n : nodes_) {
        if (n.leaf) continue;
        if (n.feature >= binning_.feature_count()) throw Error("policy", "tree feature index out of range");
        if (n.bin_cut < 0 || static_cast<std::size_t>(n.bin_cut) + 1 >= binning_.bins(n.feature)) {
            throw Error("policy", "tree cut outside the feature's bins");
        }
        if (n.left >= nodes_.size() || n.right >= nodes_.size()) throw Error("policy", "tree child index out of range");
    }
}

Action DecisionTree::predict_bins(std::span<const int> bins) const {
    if (bins.size() != binning_.feature_count()) throw Error("policy", "state has the wrong number of features");
    std::size_t i = 0;
    while (!nodes_[i].leaf) {
        const auto& n = nodes_[i];
        i = bins[n.feature] <= n.bin_cut ? n.left : n.right;
    }
    return nodes_[i].action;
}

Action DecisionTree::predict(const StateVector& v) const { return predict_bins(discretize(v, binning_).bins); }

std::size_t DecisionTree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.leaf; }));
}

std::size_t DecisionTree::depth() const {
    std::function<std::size_t(std::size_t)> rec = [&](std::size_t i) -> std::size_t {
        const auto& n = nodes_[i];
        return n.leaf ? 0 : 1 + std::max(rec(n.left), rec(n.right));
    };
    return nodes_.empty() ? 0 : rec(0);
}

namespace {

double entropy(std::size_t passive, std::size_t aggressive) {
    const double n = static_cast<double>(passive + aggressive);
    double h = 0.0;
    for (auto k : {passive, aggressive}) {
        if (k == 0) continue;
        const double p = static_cast<double>(k) / n;
        h -= p * std::log2(p);
    }
    return h;
}

class HuntBuilder {
public:
    explicit HuntBuilder(const PolicyTable& p) : p_(p), counts_(p.binning.bin_counts()) {
        rows_.reserve(p.cell_count());
        for (std::size_t c = 0; c < p.cell_count(); ++c) rows_.push_back(unflatten_cell(c, counts_));
    }

    std::vector<TreeNode> build() {
        std::vector<std::size_t> all(rows_.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        grow(all);
        return std::move(nodes_);
    }

private:
    std::size_t grow(const std::vector<std::size_t>& rows) {
        const std::size_t id = nodes_.size();
        nodes_.emplace_back();

        std::size_t aggressive = 0;
        for (auto r : rows) aggressive += p_.actions[r] == Action::Aggressive ? 1 : 0;
        const std::size_t passive = rows.size() - aggressive;
        if (aggressive == 0 || passive == 0) {
            nodes_[id].action = aggressive == 0 ? Action::Passive : Action::Aggressive;
            return id;
        }

        const double parent = entropy(passive, aggressive);
        const double n = static_cast<double>(rows.size());
        double best_gain = -1.0;
        std::size_t best_f = 0;
        int best_cut = 0;
        for (std::size_t f = 0; f < counts_.size(); ++f) {
            for (int cut = 0; cut + 1 < static_cast<int>(counts_[f]); ++cut) {
                std::size_t lp = 0, la = 0, rp = 0, ra = 0;
                for (auto r : rows) {
                    const bool agg = p_.actions[r] == Action::Aggressive;
                    if (rows_[r][f] <= cut) {
                        (agg ? la : lp) += 1;
                    } else {
                        (agg ? ra : rp) += 1;
                    }
                }
                if (lp + la == 0 || rp + ra == 0) continue;
                const double gain = parent - (static_cast<double>(lp + la) / n) * entropy(lp, la) -
                                    (static_cast<double>(rp + ra) / n) * entropy(rp, ra);
                if (gain > best_gain + 1e-12) {
                    best_gain = gain;
                    best_f = f;
                    best_cut = cut;
                }
            }
        }
        if (best_gain < 0.0) throw Error("policy", "mixed node admits no split");

        std::vector<std::size_t> left, right;
        for (auto r : rows) (rows_[r][best_f] <= best_cut ? left : right).push_back(r);
        const auto l = grow(left);
        const auto rr = grow(right);
        auto& node = nodes_[id];
        node.leaf = false;
        node.feature = best_f;
        node.bin_cut = best_cut;
        node.cut = p_.binning.cuts[best_f][static_cast<std::size_t>(best_cut)];
        node.left = l;
        node.right = rr;
        return id;
    }

    const PolicyTable& p_;
    std::vector<std::size_t> counts_;
    std::vector<std::vector<int>> rows_;
    std::vector<TreeNode> nodes_;
};

std::string feature_label(const Binning& b, std::size_t f) {
    return f < b.names.size() && !b.names[f].empty() ? b.names[f] : "x" + std::to_string(f);
}

std::string format_cut(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

json node_json(const DecisionTree& t, std::size_t i) {
    const auto& n = t.nodes()[i];
    if (n.leaf) return json{{"leaf", std::string(action_name(n.action))}};
    return json{{"node",
                 {{"feature", feature_label(t.binning(), n.feature)},
                  {"feature_index", n.feature},
                  {"bin", n.bin_cut},
                  {"cut", n.cut},
                  {"left", node_json(t, n.left)},
                  {"right", node_json(t, n.right)}}}};
}

std::size_t node_from_json(const json& j, std::vector<TreeNode>& nodes) {
    const std::size_t id = nodes.size();
    nodes.emplace_back();
    if (j.contains("leaf")) {
        nodes[id].action = parse_action(j.at("leaf").get<std::string>());
        return id;
    }
    const auto& n = j.at("node");
    const auto l = node_from_json(n.at("left"), nodes);
    const auto r = node_from_json(n.at("right"), nodes);
    auto& node = nodes[id];
    node.leaf = false;
    node.feature = n.at("feature_index").get<std::size_t>();
    node.bin_cut = n.at("bin").get<int>();
    node.cut = n.at("cut").get<double>();
    node.left = l;
    node.right = r;
    return id;
}

void text_lines(const DecisionTree& t, std::size_t i, int indent, std::ostringstream& os) {
    const auto& n = t.nodes()[i];
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    if (n.leaf) {
        os << pad << "-> " << action_name(n.action) << '\n';
        return;
    }
    const auto name = feature_label(t.binning(), n.feature);
    os << pad << "if " << name << " <= " << format_cut(n.cut) << ":\n";
    text_lines(t, n.left, indent + 1, os);
    os << pad << "if " << name << " > " << format_cut(n.cut) << ":\n";
    text_lines(t, n.right, indent + 1, os);
}

}  // namespace

DecisionTree build_tree(const PolicyTable& p) {
    if (p.cell_count() == 0) throw Error("policy", "empty policy table");
    if (p.cell_count() != p.binning.cell_count()) throw Error("policy", "policy table does not cover its grid");
    return DecisionTree(p.binning, HuntBuilder(p).build());
}

std::size_t count_mismatches(const DecisionTree& t, const PolicyTable& p) {
    const auto counts = p.binning.bin_counts();
    std::size_t bad = 0;
    for (std::size_t c = 0; c < p.cell_count(); ++c) {
        if (t.predict_bins(unflatten_cell(c, counts)) != p.actions[c]) ++bad;
    }
    return bad;
}

TreeFormat parse_tree_format(std::string_view text) {
    if (text == "dot") return TreeFormat::Dot;
    if (text == "json") return TreeFormat::Json;
    if (text == "text") return TreeFormat::Text;
    throw Error("policy", "unknown tree format '" + std::string(text) + "'");
}

std::string export_tree(const DecisionTree& t, TreeFormat format) {
    std::ostringstream os;
    switch (format) {
        case TreeFormat::Json: {
            json cuts = json::array();
            for (const auto& c : t.binning().cuts) cuts.push_back(c);
            const json doc{{"features", t.binning().names},
                           {"bin_counts", t.binning().bin_counts()},
                           {"cuts", cuts},
                           {"tree", node_json(t, 0)}};
            os << doc.dump(2) << '\n';
            break;
        }
        case TreeFormat::Dot: {
            os << "digraph policy {\n  node [fontname=\"Helvetica\"];\n";
            for (std::size_t i = 0; i < t.nodes().size(); ++i) {
                const auto& n = t.nodes()[i];
                if (n.leaf) {
                    os << "  n" << i << " [shape=box, label=\"" << action_name(n.action) << "\"];\n";
                } else {
                    os << "  n" << i << " [shape=ellipse, label=\"" << feature_label(t.binning(), n.feature) << "\"];\n";
                    os << "  n" << i << " -> n" << n.left << " [label=\"<= " << format_cut(n.cut) << "\"];\n";
                    os << "  n" << i << " -> n" << n.right << " [label=\"> " << format_cut(n.cut) << "\"];\n";
                }
            }
            os << "}\n";
            break;
        }
        case TreeFormat::Text:
            text_lines(t, 0, 0, os);
            break;
    }
    return os.str();
}

DecisionTree import_tree_json(std::string_view text) {
    try {
        const auto doc = json::parse(text);
        Binning b;
        b.names = doc.at("features").get<std::vector<std::string>>();
        b.cuts = doc.at("cuts").get<std::vector<std::vector<double>>>();
        std::vector<TreeNode> nodes;
        node_from_json(doc.at("tree"), nodes);
        return DecisionTree(std::move(b), std::move(nodes));
    } catch (const json::exception& e) {
        throw Error("parse", std::string("tree json: ") + e.what());
    }
}

std::vector<std::string> tree_rules(const DecisionTree& t) {
    std::vector<std::string> out;
    std::vector<std::string> conds;
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        const auto& n = t.nodes()[i];
        if (n.leaf) {
            std::string line;
            for (std::size_t k = 0; k < conds.size(); ++k) line += (k ? " and " : "") + conds[k];
            if (line.empty()) line = "always";
            out.push_back(line + " => " + std::string(action_name(n.action)));
            return;
        }
        const auto name = feature_label(t.binning(), n.feature);
        conds.push_back(name + " <= " + format_cut(n.cut));
        rec(n.left);
        conds.back() = name + " > " + format_cut(n.cut);
        rec(n.right);
        conds.pop_back();
    };
    rec(0);
    return out;
}

Policy tree_policy(const DecisionTree& t) {
    return [t](const DecisionContext& ctx) {
        return ctx.state.terminal ? Action::Passive : t.predict_bins(ctx.state.bins);
    };
}

}  // namespace lobexec
