/**
 * @file qp.hpp
 * @brief Dense convex QP solver (Mehrotra predictor-corrector interior point).
 *
 *   minimize    1/2 x^T H x + g^T x
 *   subject to  A_ineq x >= b_ineq
 *               A_eq   x  = b_eq
 *
 * H only needs to be positive semidefinite. Regularization is applied to the
 * Newton system; the reported objective always uses the unmodified H.
 */
#ifndef CCSVM_QP_HPP_
#define CCSVM_QP_HPP_
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccsvm {

struct qp_problem {
    Eigen::MatrixXd H;
    Eigen::VectorXd g;
    Eigen::MatrixXd A_ineq;  ///< rows a_k^T, meaning a_k^T x >= b_k
    Eigen::VectorXd b_ineq;
    Eigen::MatrixXd A_eq;
    Eigen::VectorXd b_eq;

    qp_problem() = default;
    explicit qp_problem(Eigen::Index n)
        : H(Eigen::MatrixXd::Zero(n, n)), g(Eigen::VectorXd::Zero(n)), A_ineq(0, n), b_ineq(0), A_eq(0, n), b_eq(0) {}

    [[nodiscard]] Eigen::Index n_vars() const noexcept { return H.rows(); }
    [[nodiscard]] Eigen::Index n_ineq() const noexcept { return A_ineq.rows(); }
    [[nodiscard]] Eigen::Index n_eq() const noexcept { return A_eq.rows(); }

    void add_ineq(const Eigen::Ref<const Eigen::RowVectorXd>& a, double b) {
        const auto k = A_ineq.rows();
        A_ineq.conservativeResize(k + 1, n_vars());
        b_ineq.conservativeResize(k + 1);
        A_ineq.row(k) = a;
        b_ineq(k) = b;
    }

    void add_eq(const Eigen::Ref<const Eigen::RowVectorXd>& a, double b) {
        const auto k = A_eq.rows();
        A_eq.conservativeResize(k + 1, n_vars());
        b_eq.conservativeResize(k + 1);
        A_eq.row(k) = a;
        b_eq(k) = b;
    }

    [[nodiscard]] double objective(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        return 0.5 * x.dot(H * x) + g.dot(x);
    }

    /// Throws std::invalid_argument on inconsistent dimensions or asymmetric H.
    void validate() const {
        const auto n = n_vars();
        if (H.cols() != n || g.size() != n) {
            throw std::invalid_argument("qp_problem: H must be n x n and g of length n");
        }
        if (A_ineq.cols() != n || A_ineq.rows() != b_ineq.size()) {
            throw std::invalid_argument("qp_problem: inequality block has wrong shape");
        }
        if (A_eq.cols() != n || A_eq.rows() != b_eq.size()) {
            throw std::invalid_argument("qp_problem: equality block has wrong shape");
        }
        const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
        if (n > 0 && (H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
            throw std::invalid_argument("qp_problem: H is not symmetric");
        }
    }
};

enum class qp_status { optimal, infeasible, max_iter };

inline const char* to_string(qp_status s) {
    switch (s) {
        case qp_status::optimal:
            return "optimal";
        case qp_status::infeasible:
            return "infeasible";
        case qp_status::max_iter:
            return "max_iter";
    }
    return "?";
}

/**
 * Scaled KKT residuals:
 *  stationarity     ||Hx + g - A^T lambda - E^T y||_inf / (1 + max(||Hx||, ||g||, ||A^T lambda||))
 *  primal           max(max_k (b_k - a_k^T x)_+, ||Ex - f||_inf) / (1 + max(||b||, ||f||))
 *  complementarity  max_k |(a_k^T x - b_k) lambda_k| / (1 + |objective|)
 */
struct kkt_residuals {
    double stationarity = std::numeric_limits<double>::infinity();
    double primal = std::numeric_limits<double>::infinity();
    double complementarity = std::numeric_limits<double>::infinity();

    [[nodiscard]] double max() const { return std::max({stationarity, primal, complementarity}); }
};

struct qp_solution {
    Eigen::VectorXd x;
    Eigen::VectorXd lambda;  ///< inequality multipliers (>= 0)
    Eigen::VectorXd y;       ///< equality multipliers
    double objective = std::numeric_limits<double>::infinity();
    qp_status status = qp_status::max_iter;
    kkt_residuals kkt;
    int iterations = 0;
    /// Minimal total constraint violation from Phase 1, when it was run.
    std::optional<double> phase1_violation;
};

struct qp_settings {
    double tol = 1e-7;
    int max_iter = 2000;
};

struct qp_warm_start {
    Eigen::VectorXd x;
    Eigen::VectorXd lambda;  ///< may be empty
};

inline kkt_residuals compute_kkt(const qp_problem& p, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                                 const Eigen::VectorXd& y) {
    kkt_residuals r;
    const Eigen::VectorXd hx = p.H * x;
    Eigen::VectorXd grad = hx + p.g;
    double dual_scale = std::max(hx.lpNorm<Eigen::Infinity>(), p.g.lpNorm<Eigen::Infinity>());
    if (p.n_ineq() > 0) {
        const Eigen::VectorXd atl = p.A_ineq.transpose() * lambda;
        grad -= atl;
        dual_scale = std::max(dual_scale, atl.lpNorm<Eigen::Infinity>());
    }
    if (p.n_eq() > 0) {
        const Eigen::VectorXd aty = p.A_eq.transpose() * y;
        grad -= aty;
        dual_scale = std::max(dual_scale, aty.lpNorm<Eigen::Infinity>());
    }
    r.stationarity = (grad.size() > 0 ? grad.lpNorm<Eigen::Infinity>() : 0.0) / (1.0 + dual_scale);

    double viol = 0.0;
    double comp = 0.0;
    double rhs_scale = 0.0;
    if (p.n_ineq() > 0) {
        const Eigen::VectorXd slack = p.A_ineq * x - p.b_ineq;
        viol = std::max(0.0, (-slack).maxCoeff());
        comp = slack.cwiseProduct(lambda).cwiseAbs().maxCoeff();
        rhs_scale = p.b_ineq.lpNorm<Eigen::Infinity>();
    }
    if (p.n_eq() > 0) {
        viol = std::max(viol, (p.A_eq * x - p.b_eq).lpNorm<Eigen::Infinity>());
        rhs_scale = std::max(rhs_scale, p.b_eq.lpNorm<Eigen::Infinity>());
    }
    r.primal = viol / (1.0 + rhs_scale);
    r.complementarity = comp / (1.0 + std::abs(p.objective(x)));
    return r;
}

namespace detail {

/// Solves [M  -E^T; E  0] [dx; dy] = [r1; r2] with M symmetric positive (semi)definite.
class reduced_kkt_solver {
  public:
    reduced_kkt_solver(const Eigen::MatrixXd& M, const Eigen::MatrixXd& E) : M_(M), E_(E) {
        const auto n = M.rows();
        const double diag_max = n > 0 ? std::max(1.0, M.diagonal().cwiseAbs().maxCoeff()) : 1.0;
        Eigen::MatrixXd Mr = M;
        Mr.diagonal().array() += 1e-13 * diag_max + 1e-12;
        ldlt_.compute(Mr);
        if (E.rows() > 0) {
            MinvEt_ = ldlt_.solve(E.transpose());
            Eigen::MatrixXd S = E * MinvEt_;
            const double s_max = std::max(1.0, S.diagonal().cwiseAbs().maxCoeff());
            S.diagonal().array() += 1e-13 * s_max + 1e-12;
            schur_.compute(S);
        }
    }

    void solve(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, Eigen::VectorXd& dx, Eigen::VectorXd& dy) const {
        solve_once(r1, r2, dx, dy);
        // iterative refinement against the unregularized system
        for (int pass = 0; pass < 2; ++pass) {
            Eigen::VectorXd e1 = r1 - M_ * dx;
            Eigen::VectorXd e2 = r2;
            if (E_.rows() > 0) {
                e1 += E_.transpose() * dy;
                e2 -= E_ * dx;
            }
            Eigen::VectorXd cx;
            Eigen::VectorXd cy;
            solve_once(e1, e2, cx, cy);
            dx += cx;
            if (E_.rows() > 0) {
                dy += cy;
            }
        }
    }

  private:
    void solve_once(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, Eigen::VectorXd& dx,
                    Eigen::VectorXd& dy) const {
        const Eigen::VectorXd base = ldlt_.solve(r1);
        if (E_.rows() == 0) {
            dx = base;
            dy.resize(0);
            return;
        }
        // E (base + M^{-1} E^T dy) = r2
        dy = schur_.solve(r2 - E_ * base);
        dx = base + MinvEt_ * dy;
    }

    const Eigen::MatrixXd& M_;
    const Eigen::MatrixXd& E_;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
    Eigen::MatrixXd MinvEt_;
    Eigen::LDLT<Eigen::MatrixXd> schur_;
};

inline double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double a = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv(i) < 0.0) {
            a = std::min(a, -v(i) / dv(i));
        }
    }
    return a;
}

inline bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

/// Interior point core without infeasibility certification.
inline qp_solution interior_point(const qp_problem& p, const qp_settings& settings, const qp_warm_start* warm) {
    const auto n = p.n_vars();
    const auto m = p.n_ineq();
    const auto neq = p.n_eq();
    qp_solution sol;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    if (warm != nullptr && warm->x.size() == n && warm->x.allFinite()) {
        x = warm->x;
    }
    Eigen::VectorXd y = Eigen::VectorXd::Zero(neq);
    Eigen::VectorXd s(m);
    Eigen::VectorXd lam(m);
    if (m > 0) {
        const Eigen::VectorXd r = p.A_ineq * x - p.b_ineq;
        const bool have_lambda = warm != nullptr && warm->lambda.size() == m && warm->lambda.allFinite();
        const double floor = have_lambda ? 1e-2 : 1.0;
        for (Eigen::Index k = 0; k < m; ++k) {
            s(k) = std::max(r(k), floor);
            lam(k) = have_lambda ? std::max(warm->lambda(k), floor) : 1.0;
        }
    }

    auto finish = [&](qp_status status, int iters) {
        sol.x = x;
        sol.lambda = lam;
        sol.y = y;
        sol.objective = p.objective(x);
        sol.kkt = compute_kkt(p, x, lam, y);
        sol.status = status;
        sol.iterations = iters;
        return sol;
    };

    if (m == 0) {
        // Equality-constrained (or unconstrained) QP: Newton on the KKT system.
        for (int it = 0; it < std::max(2, std::min(settings.max_iter, 10)); ++it) {
            const Eigen::VectorXd rd = p.H * x + p.g - (neq > 0 ? Eigen::VectorXd(p.A_eq.transpose() * y)
                                                                 : Eigen::VectorXd::Zero(n));
            const Eigen::VectorXd re = neq > 0 ? Eigen::VectorXd(p.A_eq * x - p.b_eq) : Eigen::VectorXd(0);
            auto kkt = compute_kkt(p, x, lam, y);
            if (kkt.max() <= settings.tol) {
                return finish(qp_status::optimal, it);
            }
            reduced_kkt_solver solver(p.H, p.A_eq);
            Eigen::VectorXd dx;
            Eigen::VectorXd dy;
            solver.solve(-rd, -re, dx, dy);
            if (!finite(dx)) {
                break;
            }
            x += dx;
            if (neq > 0) {
                y += dy;
            }
        }
        auto kkt = compute_kkt(p, x, lam, y);
        return finish(kkt.max() <= settings.tol ? qp_status::optimal : qp_status::max_iter, 10);
    }

    const double lam_cap = 1e12 * (1.0 + p.g.lpNorm<Eigen::Infinity>() + p.H.cwiseAbs().maxCoeff());
    Eigen::MatrixXd M(n, n);
    double best_kkt = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_x = x;
    Eigen::VectorXd best_lam = lam;
    Eigen::VectorXd best_y = y;
    constexpr int stall_window = 50;
    std::vector<double> best_history;
    int it = 0;
    for (; it < settings.max_iter; ++it) {
        const Eigen::VectorXd ax = p.A_ineq * x;
        Eigen::VectorXd rd = p.H * x + p.g - p.A_ineq.transpose() * lam;
        if (neq > 0) {
            rd -= p.A_eq.transpose() * y;
        }
        const Eigen::VectorXd rp = ax - s - p.b_ineq;
        const Eigen::VectorXd re = neq > 0 ? Eigen::VectorXd(p.A_eq * x - p.b_eq) : Eigen::VectorXd(0);
        const double mu = s.dot(lam) / static_cast<double>(m);

        const auto kkt = compute_kkt(p, x, lam, y);
        if (kkt.max() <= settings.tol) {
            return finish(qp_status::optimal, it);
        }
        if (kkt.max() < best_kkt) {
            best_kkt = kkt.max();
            best_x = x;
            best_lam = lam;
            best_y = y;
        }
        // Stall: the best residual has not halved over the last stall_window iterations.
        best_history.push_back(best_kkt);
        if (it >= stall_window && best_kkt > 0.5 * best_history[static_cast<std::size_t>(it - stall_window)]) {
            break;
        }
        if (!std::isfinite(mu) || mu < 1e-40 || lam.maxCoeff() > lam_cap) {
            break;
        }

        const Eigen::VectorXd d = lam.cwiseQuotient(s);
        M.noalias() = p.A_ineq.transpose() * d.asDiagonal() * p.A_ineq;
        M += p.H;
        reduced_kkt_solver solver(M, p.A_eq);

        auto direction = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dx, Eigen::VectorXd& ds,
                             Eigen::VectorXd& dl, Eigen::VectorXd& dy) {
            const Eigen::VectorXd t = (rc - lam.cwiseProduct(rp)).cwiseQuotient(s);
            const Eigen::VectorXd r1 = -rd + p.A_ineq.transpose() * t;
            solver.solve(r1, -re, dx, dy);
            ds = p.A_ineq * dx + rp;
            dl = (rc - lam.cwiseProduct(ds)).cwiseQuotient(s);
        };

        Eigen::VectorXd dx;
        Eigen::VectorXd ds;
        Eigen::VectorXd dl;
        Eigen::VectorXd dy;
        const Eigen::VectorXd rc_aff = -s.cwiseProduct(lam);
        direction(rc_aff, dx, ds, dl, dy);
        if (!finite(dx) || !finite(dl)) {
            break;
        }
        const double a_aff = std::min(max_step(s, ds), max_step(lam, dl));
        const double mu_aff = (s + a_aff * ds).dot(lam + a_aff * dl) / static_cast<double>(m);
        const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

        const Eigen::VectorXd rc = rc_aff - ds.cwiseProduct(dl) + Eigen::VectorXd::Constant(m, sigma * mu);
        direction(rc, dx, ds, dl, dy);
        if (!finite(dx) || !finite(dl)) {
            break;
        }
        const double step = std::min(1.0, 0.995 * std::min(max_step(s, ds), max_step(lam, dl)));
        x += step * dx;
        s += step * ds;
        lam += step * dl;
        if (neq > 0) {
            y += step * dy;
        }
        // keep strictly interior
        s = s.cwiseMax(std::numeric_limits<double>::min());
        lam = lam.cwiseMax(std::numeric_limits<double>::min());
    }
    if (std::isfinite(best_kkt)) {
        x = best_x;
        lam = best_lam;
        y = best_y;
    }
    return finish(qp_status::max_iter, it);
}

}  // namespace detail

/**
 * @brief Phase 1: minimal total violation sum_k t_k subject to a_k^T x + t_k >= b_k, t >= 0, Ex = f.
 */
inline double phase1_violation(const qp_problem& p, const qp_settings& settings) {
    const auto n = p.n_vars();
    const auto m = p.n_ineq();
    if (m == 0) {
        return 0.0;
    }
    qp_problem aux(n + m);
    aux.g.tail(m).setOnes();
    aux.A_ineq = Eigen::MatrixXd::Zero(2 * m, n + m);
    aux.A_ineq.topLeftCorner(m, n) = p.A_ineq;
    aux.A_ineq.topRightCorner(m, m).setIdentity();
    aux.A_ineq.bottomRightCorner(m, m).setIdentity();
    aux.b_ineq = Eigen::VectorXd::Zero(2 * m);
    aux.b_ineq.head(m) = p.b_ineq;
    if (p.n_eq() > 0) {
        aux.A_eq = Eigen::MatrixXd::Zero(p.n_eq(), n + m);
        aux.A_eq.leftCols(n) = p.A_eq;
        aux.b_eq = p.b_eq;
    }
    // The auxiliary LP is always feasible; give it a full iteration budget even
    // when the caller capped the main solve.
    qp_settings aux_settings = settings;
    aux_settings.max_iter = std::max(settings.max_iter, 500);
    const auto sol = detail::interior_point(aux, aux_settings, nullptr);
    const Eigen::VectorXd x = sol.x.head(n);
    return (p.b_ineq - p.A_ineq * x).cwiseMax(0.0).sum();
}

/**
 * @brief Solves a dense convex QP.
 *
 * When the interior point iteration fails to converge, a Phase-1 problem is
 * solved; the QP is declared infeasible if the minimal total violation
 * exceeds 1e-6 * (1 + ||b||_inf).
 */
inline qp_solution solve_qp(const qp_problem& p, const qp_settings& settings = {},
                            const qp_warm_start* warm = nullptr) {
    p.validate();
    if (!(settings.tol > 0.0)) {
        throw std::invalid_argument("solve_qp: tol must be positive");
    }
    auto sol = detail::interior_point(p, settings, warm);
    if (sol.status == qp_status::optimal) {
        return sol;
    }
    const double viol = phase1_violation(p, settings);
    sol.phase1_violation = viol;
    double b_scale = p.n_ineq() > 0 ? p.b_ineq.lpNorm<Eigen::Infinity>() : 0.0;
    if (p.n_eq() > 0) {
        b_scale = std::max(b_scale, p.b_eq.lpNorm<Eigen::Infinity>());
    }
    if (viol > 1e-6 * (1.0 + b_scale)) {
        sol.status = qp_status::infeasible;
    }
    return sol;
}

}  // namespace ccsvm

#endif  // CCSVM_QP_HPP_
