#pragma once
// Independent reference implementations used only by tests.

#include "ccsvm/qp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

namespace ccsvm::fixtures {

/// Strictly convex QP with inequality rows only, feasible by construction.
inline qp_problem random_feasible_qp(std::mt19937_64& gen, int max_n = 20, int max_m = 40) {
    std::normal_distribution<double> nd;
    const int n = 1 + static_cast<int>(gen() % static_cast<unsigned>(max_n));
    const int m = static_cast<int>(gen() % static_cast<unsigned>(max_m + 1));
    qp_problem p(n);
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B(i, j) = nd(gen);
    p.H = B * B.transpose() / n + 0.1 * Eigen::MatrixXd::Identity(n, n);
    p.H = 0.5 * (p.H + p.H.transpose()).eval();
    for (int i = 0; i < n; ++i) p.g(i) = nd(gen);
    Eigen::VectorXd x0(n);
    for (int i = 0; i < n; ++i) x0(i) = nd(gen);
    for (int k = 0; k < m; ++k) {
        Eigen::RowVectorXd a(n);
        for (int i = 0; i < n; ++i) a(i) = nd(gen);
        p.add_ineq(a, a.dot(x0) - std::abs(nd(gen)));
    }
    return p;
}

/**
 * Optimal value of min 1/2 x'Hx + g'x s.t. Ax >= b for positive definite H,
 * by accelerated projected gradient ascent on the dual over lambda >= 0.
 * Returns the primal objective at the recovered x = H^{-1}(A'lambda - g).
 */
struct pg_result {
    double objective = 0.0;
    double dual = 0.0;
    Eigen::VectorXd x;
    int iterations = 0;
};

inline pg_result projected_gradient_oracle(const qp_problem& p, double tol = 1e-8, int max_iter = 2000000) {
    const Eigen::LLT<Eigen::MatrixXd> llt(p.H);
    const Eigen::MatrixXd& A = p.A_ineq;
    const Eigen::Index m = A.rows();
    pg_result out;
    if (m == 0) {
        out.x = llt.solve(-p.g);
        out.objective = out.dual = p.objective(out.x);
        return out;
    }
    const Eigen::MatrixXd HiAt = llt.solve(A.transpose());
    const Eigen::VectorXd Hig = llt.solve(p.g);
    const Eigen::MatrixXd Q = A * HiAt;  // dual Hessian
    const Eigen::VectorXd c = p.b_ineq + A * Hig;
    // dual: max_l -1/2 l'Ql + c'l - 1/2 g'H^{-1}g
    const double L = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Q).eigenvalues().maxCoeff();
    const double step = 1.0 / std::max(L, 1e-12);
    const double constant = -0.5 * p.g.dot(Hig);
    auto dual = [&](const Eigen::VectorXd& l) { return -0.5 * l.dot(Q * l) + c.dot(l) + constant; };
    Eigen::VectorXd l = Eigen::VectorXd::Zero(m), y = l, prev = l;
    double t = 1.0;
    int it = 0;
    for (; it < max_iter; ++it) {
        const Eigen::VectorXd grad = c - Q * y;
        Eigen::VectorXd next = (y + step * grad).cwiseMax(0.0);
        // gradient-mapping stationarity as the stopping rule
        if ((next - y).lpNorm<Eigen::Infinity>() / step < tol && it > 10) {
            l = next;
            break;
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        prev = l;
        l = next;
        y = l + ((t - 1.0) / t_next) * (l - prev);
        // adaptive restart
        if ((c - Q * l).dot(l - prev) < 0.0) {
            y = l;
            t = 1.0;
            continue;
        }
        t = t_next;
    }
    out.iterations = it;
    out.x = HiAt * l - Hig;
    out.objective = p.objective(out.x);
    out.dual = dual(l);
    return out;
}

}  // namespace ccsvm::fixtures
