#pragma once

#include "lobexec/exec_mdp.hpp"
#include "lobexec/rs_qlearn.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace lobexec {

/// One action per cell of a discretized grid, indexed by flatten_cell.
struct PolicyTable {
    Binning binning;
    std::vector<Action> actions;
    /// Cells whose action came from the learned values rather than the fill rule.
    std::vector<bool> visited;

    std::size_t cell_count() const noexcept { return actions.size(); }
    Action at(std::span<const int> bins) const;

    friend bool operator==(const PolicyTable&, const PolicyTable&) = default;
};

/// Greedy action per cell (ties to Passive). Cells never visited take the
/// action of the nearest visited cell in L1 bin distance; when several are
/// nearest, Passive wins if any of them is Passive.
PolicyTable extract_policy(const QTable& q, const Binning& binning);

struct TreeNode {
    bool leaf = true;
    Action action = Action::Passive;
    std::size_t feature = 0;
    /// Rows with bin <= bin_cut go left, the rest right.
    int bin_cut = 0;
    /// Raw-value threshold matching bin_cut: x <= cut goes left.
    double cut = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Binary decision tree over a fixed binning. Node 0 is the root.
class DecisionTree {
public:
    DecisionTree() = default;
    DecisionTree(Binning binning, std::vector<TreeNode> nodes);

    Action predict_bins(std::span<const int> bins) const;
    Action predict(const StateVector& v) const;

    const Binning& binning() const noexcept { return binning_; }
    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    std::size_t leaf_count() const;
    std::size_t depth() const;

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

private:
    Binning binning_;
    std::vector<TreeNode> nodes_;
};

/// Hunt's algorithm with information-gain splits restricted to the binning's
/// cut points. Ties go to the lowest feature, then the lowest cut.
DecisionTree build_tree(const PolicyTable& p);

/// Number of grid cells where the tree and the table disagree.
std::size_t count_mismatches(const DecisionTree& t, const PolicyTable& p);

enum class TreeFormat { Dot, Json, Text };
TreeFormat parse_tree_format(std::string_view text);

std::string export_tree(const DecisionTree& t, TreeFormat format);
DecisionTree import_tree_json(std::string_view json);
/// One "condition and condition => action" line per leaf.
std::vector<std::string> tree_rules(const DecisionTree& t);

Policy tree_policy(const DecisionTree& t);

}  // namespace lobexec
