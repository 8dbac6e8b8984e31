/**
 * @file miqp.hpp
 * @brief Branch and bound for chance-constrained QPs.
 *
 * A cc_miqp is a convex QP whose inequality constraints are partitioned into
 * per-class groups of blocks. Each block (the constraints of one sample) may be
 * dropped; budget mode allows at most B_s drops in class s, penalty mode
 * charges rho_s / N_s per drop instead.
 *
 * Branching is on blocks directly (enforce or drop) rather than on big-M
 * indicator rows. The relaxation at a node is the QP over the always-on and
 * enforced constraints only; every completion enforces a superset, so its
 * value is a valid lower bound for the subtree.
 */
#ifndef CCSVM_MIQP_HPP_
#define CCSVM_MIQP_HPP_
#pragma once

#include "ccsvm/parallel.hpp"
#include "ccsvm/qp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccsvm {

/// Rows a_k^T x >= b_k that are enforced or dropped together.
struct constraint_block {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
};

struct cc_miqp {
    qp_problem base;                                    ///< objective and always-on constraints
    std::vector<std::vector<constraint_block>> groups;  ///< groups[s][i]: block of sample i in class s+1
    std::vector<int> budgets;                           ///< budget mode: B_s per class
    std::optional<std::vector<double>> penalty;         ///< penalty mode: rho_s per class

    [[nodiscard]] bool penalty_mode() const noexcept { return penalty.has_value(); }
    [[nodiscard]] std::size_t n_classes() const noexcept { return groups.size(); }

    [[nodiscard]] std::size_t n_blocks() const {
        std::size_t n = 0;
        for (const auto& g : groups) n += g.size();
        return n;
    }

    /// Cost of one dropped block of class s (penalty mode).
    [[nodiscard]] double drop_cost(std::size_t s) const {
        return (*penalty)[s] / static_cast<double>(groups[s].size());
    }

    void validate() const {
        base.validate();
        const auto n = base.n_vars();
        for (const auto& g : groups) {
            for (const auto& blk : g) {
                if (blk.A.cols() != n || blk.A.rows() != blk.b.size()) {
                    throw std::invalid_argument("cc_miqp: block references variables outside the base problem");
                }
            }
        }
        if (penalty) {
            if (penalty->size() != groups.size()) {
                throw std::invalid_argument("cc_miqp: one penalty weight per class required");
            }
            for (double r : *penalty) {
                if (!(r > 0.0)) {
                    throw std::invalid_argument("cc_miqp: penalty weights must be positive");
                }
            }
        } else {
            if (budgets.size() != groups.size()) {
                throw std::invalid_argument("cc_miqp: one budget per class required");
            }
            for (std::size_t s = 0; s < groups.size(); ++s) {
                if (budgets[s] < 0 || static_cast<std::size_t>(budgets[s]) > groups[s].size()) {
                    throw std::invalid_argument("cc_miqp: budget of class " + std::to_string(s + 1) +
                                                " outside 0..N_s");
                }
            }
        }
    }
};

/// floor(alpha * N), guarded against representation error such as 0.29 * 100 = 28.999...
inline int budget_from_alpha(double alpha, std::size_t n) {
    if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie in [0, 1)");
    }
    return static_cast<int>(std::floor(alpha * static_cast<double>(n) + 1e-9));
}

enum class cc_status { optimal, gap_limit, time_limit, node_limit, infeasible };

inline const char* to_string(cc_status s) {
    switch (s) {
        case cc_status::optimal:
            return "optimal";
        case cc_status::gap_limit:
            return "gap_limit";
        case cc_status::time_limit:
            return "time_limit";
        case cc_status::node_limit:
            return "node_limit";
        case cc_status::infeasible:
            return "infeasible";
    }
    return "?";
}

struct cc_solution {
    Eigen::VectorXd x;
    std::vector<std::vector<int>> dropped;  ///< per class, sample indices whose block is violated at x
    double objective = std::numeric_limits<double>::infinity();
    double bound = -std::numeric_limits<double>::infinity();
    cc_status status = cc_status::infeasible;
    long nodes_explored = 0;
    long qp_solves = 0;

    [[nodiscard]] bool has_solution() const noexcept { return x.size() > 0; }
};

struct cc_settings {
    double gap_tol = 1e-6;       ///< absolute gap for status optimal
    double rel_gap = 0.0;        ///< stop early once gap <= rel_gap * max(1, |incumbent|)
    double time_limit = 7200.0;  ///< seconds
    long node_limit = 0;         ///< 0 = unlimited
    int threads = 1;
    /// Nodes taken from the frontier per round. Fixed independently of
    /// `threads` so that the search path does not depend on the worker count.
    int batch = 4;
    bool verbose = false;
    /// Rank blocks by an elastic (soft) relaxation at the root to seed the incumbent.
    bool elastic_root_heuristic = true;
    /// Run the greedy drop-most-violated incumbent heuristic at every node.
    bool node_heuristic = true;
    double feas_tol = 1e-6;
    qp_settings qp{};
};

namespace detail {

enum : std::int8_t { undecided = 0, enforced = 1, dropped_block = 2 };

struct block_ref {
    std::size_t cls;
    std::size_t idx;
};

class cc_workspace {
  public:
    explicit cc_workspace(const cc_miqp& p) : p_(p) {
        for (std::size_t s = 0; s < p.groups.size(); ++s) {
            for (std::size_t i = 0; i < p.groups[s].size(); ++i) {
                refs_.push_back({s, i});
            }
        }
    }

    [[nodiscard]] std::size_t n_blocks() const noexcept { return refs_.size(); }
    [[nodiscard]] const block_ref& ref(std::size_t b) const { return refs_[b]; }
    [[nodiscard]] const constraint_block& block(std::size_t b) const {
        return p_.groups[refs_[b].cls][refs_[b].idx];
    }

    /// Largest scaled violation max_k (b_k - a_k^T x) / (1 + |b_k|) of a block, or <= 0 if satisfied.
    [[nodiscard]] double violation(std::size_t b, const Eigen::VectorXd& x) const {
        const auto& blk = block(b);
        const Eigen::VectorXd r = blk.b - blk.A * x;
        double v = -std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < r.size(); ++k) {
            v = std::max(v, r(k) / (1.0 + std::abs(blk.b(k))));
        }
        return r.size() == 0 ? 0.0 : v;
    }

    /// Base problem plus every block with state == enforced.
    [[nodiscard]] qp_problem relaxation(const std::vector<std::int8_t>& state) const {
        Eigen::Index rows = p_.base.n_ineq();
        for (std::size_t b = 0; b < refs_.size(); ++b) {
            if (state[b] == enforced) rows += block(b).A.rows();
        }
        qp_problem q;
        q.H = p_.base.H;
        q.g = p_.base.g;
        q.A_eq = p_.base.A_eq;
        q.b_eq = p_.base.b_eq;
        q.A_ineq.resize(rows, p_.base.n_vars());
        q.b_ineq.resize(rows);
        Eigen::Index r = p_.base.n_ineq();
        q.A_ineq.topRows(r) = p_.base.A_ineq;
        q.b_ineq.head(r) = p_.base.b_ineq;
        for (std::size_t b = 0; b < refs_.size(); ++b) {
            if (state[b] != enforced) continue;
            const auto& blk = block(b);
            q.A_ineq.middleRows(r, blk.A.rows()) = blk.A;
            q.b_ineq.segment(r, blk.A.rows()) = blk.b;
            r += blk.A.rows();
        }
        return q;
    }

  private:
    const cc_miqp& p_;
    std::vector<block_ref> refs_;
};

struct cc_node {
    long id = 0;
    double bound = 0.0;  ///< relaxation objective plus penalty of dropped blocks
    double qp_objective = 0.0;
    std::vector<std::int8_t> state;
    std::vector<int> remaining;  ///< budget mode: drops left per class
    std::shared_ptr<const Eigen::VectorXd> x;
};

struct node_order {
    bool operator()(const std::shared_ptr<cc_node>& a, const std::shared_ptr<cc_node>& b) const {
        if (a->bound != b->bound) return a->bound > b->bound;
        return a->id > b->id;
    }
};

struct candidate {
    Eigen::VectorXd x;
    double objective;
};

}  // namespace detail

/**
 * @brief Canonical dropped sets at x: the blocks violated by more than feas_tol.
 */
inline std::vector<std::vector<int>> violated_blocks(const cc_miqp& p, const Eigen::VectorXd& x, double feas_tol) {
    detail::cc_workspace ws(p);
    std::vector<std::vector<int>> out(p.groups.size());
    for (std::size_t b = 0; b < ws.n_blocks(); ++b) {
        if (ws.violation(b, x) > feas_tol) {
            out[ws.ref(b).cls].push_back(static_cast<int>(ws.ref(b).idx));
        }
    }
    return out;
}

/// Objective of x for the chance-constrained problem: QP value plus drop penalties.
inline double cc_objective(const cc_miqp& p, const Eigen::VectorXd& x, const std::vector<std::vector<int>>& dropped) {
    double obj = p.base.objective(x);
    if (p.penalty_mode()) {
        for (std::size_t s = 0; s < dropped.size(); ++s) {
            obj += p.drop_cost(s) * static_cast<double>(dropped[s].size());
        }
    }
    return obj;
}

class cc_solver {
  public:
    cc_solver(const cc_miqp& p, cc_settings settings) : p_(p), settings_(std::move(settings)), ws_(p) {}

    cc_solution solve() {
        p_.validate();
        start_ = std::chrono::steady_clock::now();
        const std::size_t nb = ws_.n_blocks();

        auto root = std::make_shared<detail::cc_node>();
        root->id = next_id_++;
        root->state.assign(nb, detail::undecided);
        if (!p_.penalty_mode()) {
            root->remaining = p_.budgets;
            for (std::size_t b = 0; b < nb; ++b) {
                if (root->remaining[ws_.ref(b).cls] == 0) root->state[b] = detail::enforced;
            }
        }
        auto root_sol = solve_relaxation(root->state, nullptr);
        ++qp_solves_;
        if (!root_sol) {
            return finish_infeasible();
        }
        root->qp_objective = root_sol->objective;
        root->bound = root_sol->objective;
        root->x = std::make_shared<const Eigen::VectorXd>(root_sol->x);

        if (settings_.elastic_root_heuristic) {
            elastic_heuristic(*root);
        }

        std::priority_queue<std::shared_ptr<detail::cc_node>, std::vector<std::shared_ptr<detail::cc_node>>,
                            detail::node_order>
            open;
        open.push(root);

        cc_status stop = cc_status::optimal;
        while (!open.empty()) {
            const double best_bound = open.top()->bound;
            if (incumbent_ && incumbent_->objective - best_bound <= settings_.gap_tol) {
                break;
            }
            if (incumbent_ && settings_.rel_gap > 0.0 &&
                incumbent_->objective - best_bound <= settings_.rel_gap * std::max(1.0, std::abs(incumbent_->objective))) {
                stop = cc_status::gap_limit;
                break;
            }
            if (settings_.node_limit > 0 && nodes_ >= settings_.node_limit) {
                stop = cc_status::node_limit;
                break;
            }
            if (elapsed() > settings_.time_limit) {
                stop = cc_status::time_limit;
                break;
            }

            std::vector<std::shared_ptr<detail::cc_node>> batch;
            while (!open.empty() && static_cast<int>(batch.size()) < std::max(1, settings_.batch)) {
                auto node = open.top();
                open.pop();
                if (incumbent_ && node->bound >= incumbent_->objective - settings_.gap_tol) {
                    continue;
                }
                batch.push_back(std::move(node));
            }
            if (batch.empty()) {
                continue;
            }
            const double cutoff = incumbent_ ? incumbent_->objective : std::numeric_limits<double>::infinity();
            std::vector<node_result> results(batch.size());
            parallel_for(batch.size(), settings_.threads,
                         [&](std::size_t k) { results[k] = process(*batch[k], cutoff); });
            for (auto& r : results) {
                ++nodes_;
                qp_solves_ += r.qp_solves;
                for (auto& c : r.candidates) {
                    offer(std::move(c));
                }
                for (auto& child : r.children) {
                    child->id = next_id_++;
                    open.push(std::move(child));
                }
                if (settings_.verbose && nodes_ % 100 == 0) {
                    log_progress(open.empty() ? cutoff : open.top()->bound);
                }
            }
        }

        cc_solution out;
        out.nodes_explored = nodes_;
        out.qp_solves = qp_solves_;
        if (!incumbent_) {
            if (open.empty()) {
                return finish_infeasible();
            }
            out.status = stop;
            out.bound = open.top()->bound;
            return out;
        }
        out.x = incumbent_->x;
        out.dropped = violated_blocks(p_, out.x, settings_.feas_tol);
        out.objective = cc_objective(p_, out.x, out.dropped);
        out.bound = open.empty() ? out.objective : std::min(out.objective, open.top()->bound);
        out.status = stop;
        if (!p_.penalty_mode()) {
            for (std::size_t s = 0; s < out.dropped.size(); ++s) {
                if (out.dropped[s].size() > static_cast<std::size_t>(p_.budgets[s])) {
                    throw std::logic_error("solve_cc: budget exceeded in returned solution");
                }
            }
        }
        if (settings_.verbose) {
            log_progress(out.bound);
        }
        return out;
    }

  private:
    struct node_result {
        std::vector<std::shared_ptr<detail::cc_node>> children;
        std::vector<detail::candidate> candidates;
        long qp_solves = 0;
    };

    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

    std::optional<qp_solution> solve_relaxation(const std::vector<std::int8_t>& state, const Eigen::VectorXd* warm) const {
        const auto q = ws_.relaxation(state);
        qp_warm_start ws;
        if (warm != nullptr) {
            ws.x = *warm;
        }
        auto sol = solve_qp(q, settings_.qp, warm != nullptr ? &ws : nullptr);
        if (sol.status == qp_status::infeasible) {
            return std::nullopt;
        }
        if (sol.status != qp_status::optimal) {
            // Unconverged: treat the iterate as approximate; its objective stays a heuristic bound.
            if (!sol.x.allFinite()) return std::nullopt;
        }
        return sol;
    }

    /// Objective of x with its violated blocks dropped, if no enforced block is violated and budgets hold.
    [[nodiscard]] std::optional<double> completion_value(const std::vector<std::int8_t>& state,
                                                         const Eigen::VectorXd& x) const {
        std::vector<int> count(p_.groups.size(), 0);
        for (std::size_t b = 0; b < ws_.n_blocks(); ++b) {
            if (ws_.violation(b, x) > settings_.feas_tol) {
                if (state[b] == detail::enforced) return std::nullopt;
                ++count[ws_.ref(b).cls];
            }
        }
        double obj = p_.base.objective(x);
        for (std::size_t s = 0; s < count.size(); ++s) {
            if (p_.penalty_mode()) {
                obj += p_.drop_cost(s) * count[s];
            } else if (count[s] > p_.budgets[s]) {
                return std::nullopt;
            }
        }
        return obj;
    }

    node_result process(const detail::cc_node& node, double cutoff) const {
        node_result res;
        const auto& x = *node.x;
        const std::size_t nb = ws_.n_blocks();
        const std::size_t nc = p_.groups.size();

        std::vector<double> viol(nb, 0.0);
        std::vector<int> n_violated(nc, 0);
        for (std::size_t b = 0; b < nb; ++b) {
            if (node.state[b] != detail::undecided) continue;
            viol[b] = ws_.violation(b, x);
            if (viol[b] > settings_.feas_tol) ++n_violated[ws_.ref(b).cls];
        }

        // Is the relaxation solution itself a feasible completion?
        bool feasible = true;
        for (std::size_t s = 0; s < nc; ++s) {
            if (n_violated[s] == 0) continue;
            if (p_.penalty_mode() || n_violated[s] > node.remaining[s]) feasible = false;
        }
        if (p_.penalty_mode()) {
            // Dropping every violated block is always a feasible completion.
            if (auto v = completion_value(node.state, x)) {
                res.candidates.push_back({x, *v});
            }
        }
        if (feasible) {
            if (!p_.penalty_mode()) {
                if (auto v = completion_value(node.state, x)) {
                    res.candidates.push_back({x, *v});
                }
            }
            return res;
        }

        if (!p_.penalty_mode() && settings_.node_heuristic) {
            greedy_heuristic(node, viol, res);
        }

        // Branch on the most violated undecided block of a class that cannot absorb its violations.
        std::optional<std::size_t> branch;
        for (std::size_t b = 0; b < nb; ++b) {
            if (node.state[b] != detail::undecided || viol[b] <= settings_.feas_tol) continue;
            const auto s = ws_.ref(b).cls;
            if (!p_.penalty_mode() && n_violated[s] <= node.remaining[s]) continue;
            if (!branch || viol[b] > viol[*branch]) branch = b;
        }
        if (!branch) {
            return res;
        }
        const std::size_t b = *branch;
        const std::size_t cls = ws_.ref(b).cls;

        // enforce child
        {
            auto child = std::make_shared<detail::cc_node>();
            child->state = node.state;
            child->state[b] = detail::enforced;
            child->remaining = node.remaining;
            ++res.qp_solves;
            if (auto sol = solve_relaxation(child->state, &x)) {
                child->qp_objective = std::max(sol->objective, node.qp_objective);
                child->bound = node.bound + (child->qp_objective - node.qp_objective);
                child->x = std::make_shared<const Eigen::VectorXd>(sol->x);
                if (child->bound < cutoff - settings_.gap_tol) {
                    res.children.push_back(std::move(child));
                }
            }
        }
        // drop child
        {
            auto child = std::make_shared<detail::cc_node>();
            child->state = node.state;
            child->state[b] = detail::dropped_block;
            child->remaining = node.remaining;
            child->qp_objective = node.qp_objective;
            child->bound = node.bound;
            child->x = node.x;
            bool ok = true;
            if (p_.penalty_mode()) {
                child->bound += p_.drop_cost(cls);
            } else {
                --child->remaining[cls];
                if (child->remaining[cls] == 0) {
                    bool changed = false;
                    for (std::size_t k = 0; k < nb; ++k) {
                        if (ws_.ref(k).cls == cls && child->state[k] == detail::undecided) {
                            child->state[k] = detail::enforced;
                            changed = true;
                        }
                    }
                    if (changed) {
                        ++res.qp_solves;
                        if (auto sol = solve_relaxation(child->state, &x)) {
                            child->qp_objective = std::max(sol->objective, node.qp_objective);
                            child->bound = node.bound + (child->qp_objective - node.qp_objective);
                            child->x = std::make_shared<const Eigen::VectorXd>(sol->x);
                        } else {
                            ok = false;
                        }
                    }
                }
            }
            if (ok && child->bound < cutoff - settings_.gap_tol) {
                res.children.push_back(std::move(child));
            }
        }
        return res;
    }

    /// Drop the remaining_s most violated undecided blocks of each class, enforce the rest.
    void greedy_heuristic(const detail::cc_node& node, const std::vector<double>& viol, node_result& res) const {
        const std::size_t nb = ws_.n_blocks();
        std::vector<std::int8_t> state = node.state;
        for (std::size_t s = 0; s < p_.groups.size(); ++s) {
            std::vector<std::size_t> cand;
            for (std::size_t b = 0; b < nb; ++b) {
                if (ws_.ref(b).cls == s && state[b] == detail::undecided) cand.push_back(b);
            }
            std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t c) { return viol[a] > viol[c]; });
            const auto keep = std::min<std::size_t>(cand.size(), static_cast<std::size_t>(node.remaining[s]));
            for (std::size_t k = 0; k < cand.size(); ++k) {
                state[cand[k]] = k < keep ? detail::dropped_block : detail::enforced;
            }
        }
        ++res.qp_solves;
        if (auto sol = solve_relaxation(state, node.x.get())) {
            if (sol->status == qp_status::optimal) {
                if (auto v = completion_value(state, sol->x)) {
                    res.candidates.push_back({sol->x, *v});
                }
            }
        }
    }

    /// Solves the root problem with one elastic slack per free block, each
    /// charged `weight[b]` per unit. Returns the slacks, or empty on failure.
    std::vector<double> elastic_slacks(const detail::cc_node& root, const std::vector<std::size_t>& free_blocks,
                                       const std::vector<double>& weight) {
        const auto n = p_.base.n_vars();
        const auto nf = static_cast<Eigen::Index>(free_blocks.size());
        const qp_problem q = ws_.relaxation(root.state);
        const auto base_rows = q.n_ineq();
        Eigen::Index rows = base_rows + nf;
        for (auto b : free_blocks) rows += ws_.block(b).A.rows();
        qp_problem e(n + nf);
        e.H.topLeftCorner(n, n) = q.H;
        e.g.head(n) = q.g;
        for (Eigen::Index k = 0; k < nf; ++k) e.g(n + k) = weight[static_cast<std::size_t>(k)];
        e.A_ineq = Eigen::MatrixXd::Zero(rows, n + nf);
        e.b_ineq = Eigen::VectorXd::Zero(rows);
        e.A_ineq.topLeftCorner(base_rows, n) = q.A_ineq;
        e.b_ineq.head(base_rows) = q.b_ineq;
        Eigen::Index r = base_rows;
        for (Eigen::Index k = 0; k < nf; ++k) {
            const auto& blk = ws_.block(free_blocks[static_cast<std::size_t>(k)]);
            e.A_ineq.block(r, 0, blk.A.rows(), n) = blk.A;
            e.A_ineq.block(r, n + k, blk.A.rows(), 1).setOnes();
            e.b_ineq.segment(r, blk.A.rows()) = blk.b;
            r += blk.A.rows();
        }
        for (Eigen::Index k = 0; k < nf; ++k) {
            e.A_ineq(r + k, n + k) = 1.0;
        }
        if (q.n_eq() > 0) {
            e.A_eq = Eigen::MatrixXd::Zero(q.n_eq(), n + nf);
            e.A_eq.leftCols(n) = q.A_eq;
            e.b_eq = q.b_eq;
        }
        ++qp_solves_;
        const auto sol = solve_qp(e, settings_.qp);
        if (sol.status != qp_status::optimal) return {};
        std::vector<double> t(free_blocks.size());
        for (Eigen::Index k = 0; k < nf; ++k) t[static_cast<std::size_t>(k)] = sol.x(n + k);
        return t;
    }

    /**
     * Root incumbents from elastic relaxations at a few slack prices. Budget
     * mode drops the largest slacks of each class up to its budget; penalty
     * mode tries every prefix of the blocks ranked by slack.
     */
    void elastic_heuristic(const detail::cc_node& root) {
        const std::size_t nb = ws_.n_blocks();
        std::vector<std::size_t> free_blocks;
        for (std::size_t b = 0; b < nb; ++b) {
            if (root.state[b] == detail::undecided) free_blocks.push_back(b);
        }
        if (free_blocks.empty()) return;

        for (double scale : {0.1, 1.0, 10.0}) {
            std::vector<double> weight(free_blocks.size());
            for (std::size_t k = 0; k < free_blocks.size(); ++k) {
                const auto& blk = ws_.block(free_blocks[k]);
                const double unit = blk.b.size() > 0 ? std::max(1e-12, blk.b.cwiseAbs().maxCoeff()) : 1.0;
                const double cost = p_.penalty_mode() ? p_.drop_cost(ws_.ref(free_blocks[k]).cls)
                                                      : 1.0 / static_cast<double>(nb);
                weight[k] = scale * cost / unit;
            }
            const auto t = elastic_slacks(root, free_blocks, weight);
            if (t.empty()) continue;
            std::vector<double> score(nb, -std::numeric_limits<double>::infinity());
            for (std::size_t k = 0; k < free_blocks.size(); ++k) score[free_blocks[k]] = t[k];

            if (!p_.penalty_mode()) {
                node_result res;
                greedy_heuristic(root, score, res);
                qp_solves_ += res.qp_solves;
                for (auto& c : res.candidates) offer(std::move(c));
                continue;
            }
            std::vector<std::size_t> order = free_blocks;
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t c) { return score[a] > score[c]; });
            std::size_t positive = 0;
            while (positive < order.size() && score[order[positive]] > settings_.feas_tol) ++positive;
            // Fewer drops enforce a superset; stop once a prefix is infeasible or unsolved.
            for (std::size_t k = positive + 1; k-- > 0;) {
                std::vector<std::int8_t> state = root.state;
                for (std::size_t j = 0; j < order.size(); ++j) {
                    state[order[j]] = j < k ? detail::dropped_block : detail::enforced;
                }
                ++qp_solves_;
                const auto sol = solve_relaxation(state, nullptr);
                if (!sol || sol->status != qp_status::optimal) break;
                if (auto v = completion_value(state, sol->x)) {
                    offer({sol->x, *v});
                }
            }
        }
    }

    void offer(detail::candidate c) {
        if (!incumbent_ || c.objective < incumbent_->objective - 1e-12 * std::max(1.0, std::abs(c.objective))) {
            incumbent_ = std::move(c);
        }
    }

    void log_progress(double bound) const {
        const double inc = incumbent_ ? incumbent_->objective : std::numeric_limits<double>::infinity();
        std::fprintf(stderr, "[solve_cc] nodes %ld incumbent %.9g bound %.9g gap %.3g\n", nodes_, inc, bound,
                     inc - bound);
    }

    cc_solution finish_infeasible() const {
        cc_solution out;
        out.status = cc_status::infeasible;
        out.nodes_explored = nodes_;
        out.qp_solves = qp_solves_;
        out.dropped.assign(p_.groups.size(), {});
        return out;
    }

    const cc_miqp& p_;
    cc_settings settings_;
    detail::cc_workspace ws_;
    std::chrono::steady_clock::time_point start_;
    std::optional<detail::candidate> incumbent_;
    long next_id_ = 0;
    long nodes_ = 0;
    long qp_solves_ = 0;
};

/**
 * @brief Solves a chance-constrained QP by best-bound branch and bound.
 *
 * Returned dropped sets are canonical: exactly the blocks violated at x.
 */
inline cc_solution solve_cc(const cc_miqp& p, const cc_settings& settings = {}) {
    return cc_solver(p, settings).solve();
}

/**
 * @brief Exact optimum by enumerating every admissible drop pattern and solving
 *        one QP per pattern. Refuses instances with more than `max_patterns` patterns.
 *
 * Ties keep the first pattern in enumeration order (fewer drops first, then
 * lexicographic within a class).
 */
inline cc_solution enumerate_oracle(const cc_miqp& p, const qp_settings& qp = {}, double feas_tol = 1e-6,
                                    double max_patterns = 1e5) {
    p.validate();
    const std::size_t nc = p.groups.size();

    // all subsets of each class with size <= budget (or any size in penalty mode)
    std::vector<std::vector<std::vector<int>>> per_class(nc);
    double total = 1.0;
    for (std::size_t s = 0; s < nc; ++s) {
        const int n = static_cast<int>(p.groups[s].size());
        const int cap = p.penalty_mode() ? n : p.budgets[s];
        double count = 0.0;
        double c = 1.0;
        for (int k = 0; k <= cap; ++k) {
            count += c;
            c = c * (n - k) / (k + 1);
        }
        total *= count;
        if (total > max_patterns) {
            throw std::invalid_argument("enumerate_oracle: more than " + std::to_string(static_cast<long>(max_patterns)) +
                                        " drop patterns");
        }
        auto& subsets = per_class[s];
        for (int k = 0; k <= cap; ++k) {
            std::vector<int> comb(static_cast<std::size_t>(k));
            std::iota(comb.begin(), comb.end(), 0);
            for (;;) {
                subsets.push_back(comb);
                int i = k - 1;
                while (i >= 0 && comb[static_cast<std::size_t>(i)] == n - k + i) --i;
                if (i < 0) break;
                ++comb[static_cast<std::size_t>(i)];
                for (int j = i + 1; j < k; ++j) comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
            }
        }
    }

    detail::cc_workspace ws(p);
    std::vector<std::size_t> offset(nc, 0);
    for (std::size_t s = 1; s < nc; ++s) offset[s] = offset[s - 1] + p.groups[s - 1].size();

    cc_solution best;
    best.status = cc_status::infeasible;
    best.dropped.assign(nc, {});
    std::vector<std::size_t> pick(nc, 0);
    for (;;) {
        std::vector<std::int8_t> state(ws.n_blocks(), detail::enforced);
        double penalty = 0.0;
        for (std::size_t s = 0; s < nc; ++s) {
            for (int i : per_class[s][pick[s]]) {
                state[offset[s] + static_cast<std::size_t>(i)] = detail::dropped_block;
            }
            if (p.penalty_mode()) penalty += p.drop_cost(s) * static_cast<double>(per_class[s][pick[s]].size());
        }
        const auto sol = solve_qp(ws.relaxation(state), qp);
        ++best.qp_solves;
        if (sol.status == qp_status::optimal) {
            const double obj = sol.objective + penalty;
            if (!best.has_solution() || obj < best.objective - 1e-12 * std::max(1.0, std::abs(obj))) {
                best.x = sol.x;
                best.objective = obj;
            }
        }
        std::size_t s = 0;
        while (s < nc && ++pick[s] == per_class[s].size()) {
            pick[s] = 0;
            ++s;
        }
        if (s == nc) break;
    }
    if (best.has_solution()) {
        best.dropped = violated_blocks(p, best.x, feas_tol);
        best.objective = cc_objective(p, best.x, best.dropped);
        best.bound = best.objective;
        best.status = cc_status::optimal;
    }
    return best;
}

}  // namespace ccsvm

#endif  // CCSVM_MIQP_HPP_
