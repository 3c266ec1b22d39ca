#include "lobexec/lspi_select.hpp"

#include "lobexec/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace lobexec {

BasisSet BasisSet::per_variable(std::vector<std::string> names, std::vector<std::size_t> bin_counts) {
    if (names.size() != bin_counts.size()) throw Error("select", "basis names and bin counts differ in length");
    BasisSet b;
    b.names_ = std::move(names);
    b.counts_ = std::move(bin_counts);
    b.source_ = {-1, -1};
    for (std::size_t v = 0; v < b.counts_.size(); ++v) {
        if (b.counts_[v] == 0) throw Error("select", "bin counts must be >= 1");
        b.offset_.push_back(b.source_.size());
        for (std::size_t k = 0; k + 1 < b.counts_[v]; ++k) {
            b.source_.push_back(static_cast<int>(v));
            b.source_.push_back(static_cast<int>(v));
        }
    }
    return b;
}

BasisSet BasisSet::tabular(std::vector<std::size_t> bin_counts) {
    BasisSet b;
    b.tabular_ = true;
    std::size_t cells = 1;
    for (auto n : bin_counts) {
        if (n == 0) throw Error("select", "bin counts must be >= 1");
        cells *= n;
    }
    b.counts_ = std::move(bin_counts);
    b.source_.assign(2 * cells, -1);
    return b;
}

Eigen::VectorXd BasisSet::evaluate(const DiscretizedState& s, Action a) const {
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()));
    if (s.terminal) return phi;
    const auto act = static_cast<std::size_t>(a);
    if (tabular_) {
        phi[static_cast<Eigen::Index>(2 * flatten_cell(s.bins, counts_) + act)] = 1.0;
        return phi;
    }
    if (s.bins.size() != counts_.size()) throw Error("select", "state has the wrong number of variables");
    phi[static_cast<Eigen::Index>(act)] = 1.0;
    for (std::size_t v = 0; v < counts_.size(); ++v) {
        const int bin = s.bins[v];
        if (bin <= 0) continue;
        phi[static_cast<Eigen::Index>(offset_[v] + 2 * static_cast<std::size_t>(bin - 1) + act)] = 1.0;
    }
    return phi;
}

LstdSystem& LstdSystem::operator+=(const LstdSystem& other) {
    if (a.size() == 0) {
        *this = other;
        return *this;
    }
    a += other.a;
    b += other.b;
    samples += other.samples;
    return *this;
}

LstdSystem build_matrices(std::span<const Transition> batch, const BasisSet& basis, const StatePolicy& policy,
                          double gamma) {
    if (batch.empty()) throw Error("select", "empty transition batch");
    const auto k = static_cast<Eigen::Index>(basis.size());
    LstdSystem sys{Eigen::MatrixXd::Zero(k, k), Eigen::VectorXd::Zero(k), 0};
    for (const auto& t : batch) {
        if (t.state.terminal) continue;
        const Eigen::VectorXd phi = basis.evaluate(t.state, t.action);
        Eigen::VectorXd next = Eigen::VectorXd::Zero(k);
        if (!t.terminal && !t.next.terminal) next = basis.evaluate(t.next, policy(t.next));
        sys.a.noalias() += phi * (phi - gamma * next).transpose();
        sys.b.noalias() += phi * t.reward;
        ++sys.samples;
    }
    return sys;
}

double reciprocal_condition(const Eigen::MatrixXd& a) {
    if (a.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& s = svd.singularValues();
    const double hi = s.maxCoeff();
    return hi == 0.0 ? 0.0 : s.minCoeff() / hi;
}

Eigen::VectorXd lstd_solve(const LstdSystem& sys) {
    if (sys.a.rows() == 0 || sys.a.rows() != sys.a.cols() || sys.a.rows() != sys.b.size()) {
        throw NumericError("LSTD system has inconsistent dimensions");
    }
    const double rcond = reciprocal_condition(sys.a);
    if (!(rcond > 1e-12)) {
        throw NumericError("LSTD matrix is singular or ill-conditioned (reciprocal condition " +
                           std::to_string(rcond) + ")");
    }
    const Eigen::VectorXd w = sys.a.fullPivLu().solve(sys.b);
    const double residual = (sys.a * w - sys.b).cwiseAbs().maxCoeff();
    if (!(residual <= 1e-8 * (1.0 + sys.b.cwiseAbs().maxCoeff()))) {
        throw NumericError("LSTD solve residual " + std::to_string(residual) + " exceeds tolerance");
    }
    return w;
}

namespace {

constexpr double kPivotEps = 1e-9;

class Tableau {
public:
    Tableau(Eigen::Index rows, Eigen::Index cols) : t_(Eigen::MatrixXd::Zero(rows + 1, cols + 1)), basis_(rows) {}

    Eigen::MatrixXd& t() { return t_; }
    std::vector<Eigen::Index>& basis() { return basis_; }
    Eigen::Index rows() const { return t_.rows() - 1; }
    Eigen::Index cols() const { return t_.cols() - 1; }
    double rhs(Eigen::Index r) const { return t_(r, cols()); }

    void pivot(Eigen::Index r, Eigen::Index c) {
        t_.row(r) /= t_(r, c);
        for (Eigen::Index i = 0; i <= rows(); ++i) {
            if (i == r) continue;
            const double f = t_(i, c);
            if (f != 0.0) t_.row(i) -= f * t_.row(r);
        }
        basis_[static_cast<std::size_t>(r)] = c;
        ++pivots_;
    }

    /// Minimizes the objective row (last row holds reduced costs; the
    /// bottom-right entry holds minus the objective). Columns at or beyond
    /// `col_limit` never enter.
    bool optimize(Eigen::Index col_limit) {
        for (;;) {
            if (pivots_ > kMaxPivots) throw NumericError("simplex iteration limit reached");
            Eigen::Index enter = -1;
            for (Eigen::Index j = 0; j < col_limit; ++j) {
                if (t_(rows(), j) < -kPivotEps) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return true;
            Eigen::Index leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < rows(); ++i) {
                const double a = t_(i, enter);
                if (a <= kPivotEps) continue;
                const double ratio = rhs(i) / a;
                if (leave < 0 || ratio < best - 1e-12) {
                    best = ratio;
                    leave = i;
                } else if (ratio <= best + 1e-12 &&
                           basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]) {
                    best = std::min(best, ratio);
                    leave = i;
                }
            }
            if (leave < 0) return false;
            pivot(leave, enter);
        }
    }

    std::size_t pivots() const { return pivots_; }

private:
    static constexpr std::size_t kMaxPivots = 200000;
    Eigen::MatrixXd t_;
    std::vector<Eigen::Index> basis_;
    std::size_t pivots_ = 0;
};

}  // namespace

LpResult simplex_minimize(const Eigen::VectorXd& c, const Eigen::MatrixXd& g, const Eigen::VectorXd& h) {
    const Eigen::Index m = g.rows();
    const Eigen::Index n = g.cols();
    if (c.size() != n || h.size() != m) throw NumericError("linear program has inconsistent dimensions");

    std::vector<Eigen::Index> needs_art;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (h[i] < 0.0) needs_art.push_back(i);
    }
    const auto n_art = static_cast<Eigen::Index>(needs_art.size());
    const Eigen::Index art0 = n + m;
    Tableau tab(m, n + m + n_art);
    auto& t = tab.t();
    const Eigen::Index rhs_col = n + m + n_art;

    Eigen::Index a = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double sign = h[i] < 0.0 ? -1.0 : 1.0;
        t.block(i, 0, 1, n) = sign * g.row(i);
        t(i, n + i) = sign;
        t(i, rhs_col) = sign * h[i];
        if (h[i] < 0.0) {
            t(i, art0 + a) = 1.0;
            tab.basis()[static_cast<std::size_t>(i)] = art0 + a;
            ++a;
        } else {
            tab.basis()[static_cast<std::size_t>(i)] = n + i;
        }
    }

    LpResult result;
    if (n_art > 0) {
        // Phase one: minimize the sum of artificials.
        t.row(m).setZero();
        for (Eigen::Index k = 0; k < n_art; ++k) t(m, art0 + k) = 1.0;
        for (auto i : needs_art) t.row(m) -= t.row(i);
        tab.optimize(art0);
        if (-t(m, rhs_col) > 1e-7 * (1.0 + h.cwiseAbs().maxCoeff())) {
            result.status = LpResult::Status::Infeasible;
            result.pivots = tab.pivots();
            return result;
        }
        for (Eigen::Index i = 0; i < m; ++i) {
            if (tab.basis()[static_cast<std::size_t>(i)] < art0) continue;
            for (Eigen::Index j = 0; j < art0; ++j) {
                if (std::abs(t(i, j)) > kPivotEps) {
                    tab.pivot(i, j);
                    break;
                }
            }
        }
    }

    t.row(m).setZero();
    t.block(m, 0, 1, n) = c.transpose();
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto b = tab.basis()[static_cast<std::size_t>(i)];
        if (b < n && c[b] != 0.0) t.row(m) -= c[b] * t.row(i);
    }
    if (!tab.optimize(art0)) {
        result.status = LpResult::Status::Unbounded;
        result.pivots = tab.pivots();
        return result;
    }

    result.x = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto b = tab.basis()[static_cast<std::size_t>(i)];
        if (b < n) result.x[b] = std::max(0.0, t(i, rhs_col));
    }
    result.objective = c.dot(result.x);
    result.pivots = tab.pivots();
    return result;
}

Eigen::VectorXd dantzig_solve(const LstdSystem& sys, double lambda) {
    if (!(lambda >= 0.0)) throw Error("select", "lambda must be >= 0");
    const Eigen::Index k = sys.a.rows();
    if (k == 0 || sys.a.cols() != k || sys.b.size() != k) throw NumericError("LSTD system has inconsistent dimensions");

    // Variables (w+, w-); rows  A w <= b + lambda  and  -A w <= lambda - b.
    Eigen::MatrixXd g(2 * k, 2 * k);
    g << sys.a, -sys.a, -sys.a, sys.a;
    Eigen::VectorXd h(2 * k);
    h << sys.b.array() + lambda, lambda - sys.b.array();
    const Eigen::VectorXd c = Eigen::VectorXd::Ones(2 * k);

    const auto lp = simplex_minimize(c, g, h);
    if (lp.status == LpResult::Status::Infeasible) {
        throw NumericError("Dantzig program infeasible at lambda " + std::to_string(lambda) +
                           " (singular LSTD matrix?)");
    }
    if (lp.status != LpResult::Status::Optimal) throw NumericError("Dantzig program failed to solve");
    return lp.x.head(k) - lp.x.tail(k);
}

Action greedy_action(const BasisSet& basis, const Eigen::VectorXd& w, const DiscretizedState& s) {
    if (s.terminal) return Action::Passive;
    const double p = basis.evaluate(s, Action::Passive).dot(w);
    const double a = basis.evaluate(s, Action::Aggressive).dot(w);
    return a > p ? Action::Aggressive : Action::Passive;
}

LspiResult lspi(std::span<const Transition> batch, const BasisSet& basis, double gamma, double lambda,
                std::size_t max_iter, double tol) {
    if (batch.empty()) throw Error("select", "empty transition batch");
    LspiResult result;
    result.w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));

    std::vector<DiscretizedState> successors;
    for (const auto& t : batch) {
        if (!t.terminal && !t.next.terminal) successors.push_back(t.next);
    }
    auto signature = [&](const Eigen::VectorXd& w) {
        std::string sig;
        sig.reserve(successors.size());
        for (const auto& s : successors) sig.push_back(greedy_action(basis, w, s) == Action::Aggressive ? 'A' : 'P');
        return sig;
    };

    std::string current = signature(result.w);
    std::set<std::string> seen{current};
    for (std::size_t it = 1; it <= max_iter; ++it) {
        const Eigen::VectorXd w_old = result.w;
        const StatePolicy policy = [&](const DiscretizedState& s) { return greedy_action(basis, w_old, s); };
        const auto sys = build_matrices(batch, basis, policy, gamma);
        result.w = dantzig_solve(sys, lambda);

        const std::string next = signature(result.w);
        std::size_t changes = 0;
        for (std::size_t i = 0; i < next.size(); ++i) changes += next[i] != current[i] ? 1 : 0;
        const double delta = (result.w - w_old).cwiseAbs().maxCoeff();
        result.log.push_back({it, delta, result.w.lpNorm<1>(), changes});

        if (delta <= tol || changes == 0) {
            result.converged = true;
            break;
        }
        if (!seen.insert(next).second) {
            result.oscillated = true;
            break;
        }
        current = next;
    }
    return result;
}

std::vector<double> attribution(const BasisSet& basis, const Eigen::VectorXd& w) {
    if (static_cast<std::size_t>(w.size()) != basis.size()) throw Error("select", "weight vector size mismatch");
    std::vector<double> out(basis.variable_count(), 0.0);
    for (std::size_t j = 0; j < basis.size(); ++j) {
        const int v = basis.source(j);
        if (v >= 0) out[static_cast<std::size_t>(v)] += std::abs(w[static_cast<Eigen::Index>(j)]);
    }
    return out;
}

std::vector<std::string> select_features(const BasisSet& basis, const Eigen::VectorXd& w, double threshold) {
    const auto attr = attribution(basis, w);
    const double top = attr.empty() ? 0.0 : *std::max_element(attr.begin(), attr.end());
    std::vector<std::size_t> order;
    if (top > 0.0) {
        for (std::size_t v = 0; v < attr.size(); ++v) {
            if (attr[v] > 0.0 && attr[v] >= threshold * top) order.push_back(v);
        }
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return attr[x] > attr[y]; });
    std::vector<std::string> out;
    for (auto v : order) out.push_back(basis.variable_names()[v]);
    return out;
}

std::string selection_report_json(const SelectionReport& r) {
    using nlohmann::json;
    json vars = json::array();
    for (std::size_t i = 0; i < r.variables.size(); ++i) {
        const bool selected = std::find(r.selected.begin(), r.selected.end(), r.variables[i]) != r.selected.end();
        vars.push_back({{"name", r.variables[i]},
                        {"attribution", i < r.attribution.size() ? r.attribution[i] : 0.0},
                        {"selected", selected}});
    }
    json log = json::array();
    for (const auto& it : r.lspi.log) {
        log.push_back({{"iteration", it.iteration},
                       {"delta", it.delta},
                       {"l1", it.l1},
                       {"policy_changes", it.policy_changes}});
    }
    const json doc{{"variables", vars},
                   {"selected", r.selected},
                   {"lambda", r.lambda},
                   {"threshold", r.threshold},
                   {"converged", r.lspi.converged},
                   {"oscillated", r.lspi.oscillated},
                   {"iterations", log}};
    return doc.dump(2) + "\n";
}

}  // namespace lobexec
