#pragma once

#include "lobexec/exec_mdp.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace lobexec {

/// State-action basis functions over discretized states. Each basis carries
/// the index of the state variable it was built from, or -1 for the
/// per-action bias terms.
class BasisSet {
public:
    /// For every variable with m bins, indicators of bins 1..m-1 crossed with
    /// both actions, plus one bias indicator per action.
    static BasisSet per_variable(std::vector<std::string> names, std::vector<std::size_t> bin_counts);
    /// One indicator per (grid cell, action).
    static BasisSet tabular(std::vector<std::size_t> bin_counts);

    std::size_t size() const noexcept { return source_.size(); }
    std::size_t variable_count() const noexcept { return names_.size(); }
    const std::vector<std::string>& variable_names() const noexcept { return names_; }
    int source(std::size_t j) const { return source_.at(j); }

    /// Zero for terminal states.
    Eigen::VectorXd evaluate(const DiscretizedState& s, Action a) const;

private:
    bool tabular_ = false;
    std::vector<std::string> names_;
    std::vector<std::size_t> counts_;
    std::vector<int> source_;
    std::vector<std::size_t> offset_;  // first basis index of each variable
};

struct LstdSystem {
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    std::size_t samples = 0;

    LstdSystem& operator+=(const LstdSystem& other);
};

using StatePolicy = std::function<Action(const DiscretizedState&)>;

/// Accumulates A = sum phi (phi - gamma phi')^T and b = sum phi r, with
/// phi' evaluated at the successor under `policy`.
LstdSystem build_matrices(std::span<const Transition> batch, const BasisSet& basis, const StatePolicy& policy,
                          double gamma);

/// Direct solve; throws NumericError on a singular or ill-conditioned system.
Eigen::VectorXd lstd_solve(const LstdSystem& sys);
/// Reciprocal condition estimate (smallest over largest singular value).
double reciprocal_condition(const Eigen::MatrixXd& a);

/// min ||w||_1 subject to ||A w - b||_inf <= lambda.
Eigen::VectorXd dantzig_solve(const LstdSystem& sys, double lambda);

struct LpResult {
    enum class Status { Optimal, Infeasible, Unbounded };
    Status status = Status::Optimal;
    Eigen::VectorXd x;
    double objective = 0.0;
    std::size_t pivots = 0;
};

/// Dense two-phase simplex with Bland's rule: min c.x s.t. G x <= h, x >= 0.
LpResult simplex_minimize(const Eigen::VectorXd& c, const Eigen::MatrixXd& g, const Eigen::VectorXd& h);

/// Greedy action under linear weights; ties go to Passive.
Action greedy_action(const BasisSet& basis, const Eigen::VectorXd& w, const DiscretizedState& s);

struct LspiIteration {
    std::size_t iteration = 0;
    double delta = 0.0;  // ||w_new - w_old||_inf
    double l1 = 0.0;
    std::size_t policy_changes = 0;  // successor states whose greedy action flipped
};

struct LspiResult {
    Eigen::VectorXd w;
    std::vector<LspiIteration> log;
    bool converged = false;
    bool oscillated = false;
};

/// Least-squares policy iteration with Dantzig-regularized evaluation.
/// Stops when the weights move by at most `tol`, when the greedy policy on
/// the batch's successor states stops changing, when a previously seen
/// policy recurs (oscillation), or after `max_iter` iterations.
LspiResult lspi(std::span<const Transition> batch, const BasisSet& basis, double gamma, double lambda,
                std::size_t max_iter, double tol);

/// Sum of |w_j| over each variable's bases; bias terms excluded.
std::vector<double> attribution(const BasisSet& basis, const Eigen::VectorXd& w);

/// Variables whose attribution is at least threshold * max attribution,
/// in descending attribution order. Empty when every weight is zero.
std::vector<std::string> select_features(const BasisSet& basis, const Eigen::VectorXd& w, double threshold);

struct SelectionReport {
    std::vector<std::string> variables;
    std::vector<double> attribution;
    std::vector<std::string> selected;
    double lambda = 0.0;
    double threshold = 0.0;
    LspiResult lspi;
};

std::string selection_report_json(const SelectionReport& r);

}  // namespace lobexec
