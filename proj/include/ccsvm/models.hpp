/**
 * @file models.hpp
 * @brief Problem builders for hard, soft and chance-constrained CS-SVMs and the
 *        trained classifier they produce.
 *
 * All builders share one variable layout. With p coefficients per target
 * component (p = d in primal mode, p = N in kernel mode):
 *   coef(j, m) -> j * p + m      for j < d_T, m < p
 *   bias(j)    -> d_T * p + j
 *   slack(i, j)-> d_T * (p + 1) + i * d_T + j   (soft margin only)
 */
#ifndef CCSVM_MODELS_HPP_
#define CCSVM_MODELS_HPP_
#pragma once

#include "ccsvm/data.hpp"
#include "ccsvm/geometry.hpp"
#include "ccsvm/kernels.hpp"
#include "ccsvm/miqp.hpp"
#include "ccsvm/qp.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccsvm {

enum class formulation { hard, soft, cc, cc_penalty };

inline const char* to_string(formulation f) {
    switch (f) {
        case formulation::hard:
            return "hard";
        case formulation::soft:
            return "soft";
        case formulation::cc:
            return "cc";
        case formulation::cc_penalty:
            return "cc_penalty";
    }
    return "?";
}

inline formulation parse_formulation(std::string_view s) {
    if (s == "hard") return formulation::hard;
    if (s == "soft" || s == "cs") return formulation::soft;
    if (s == "cc") return formulation::cc;
    if (s == "cc_penalty") return formulation::cc_penalty;
    throw std::invalid_argument("unknown formulation '" + std::string(s) + "'");
}

struct train_spec {
    formulation form = formulation::cc_penalty;
    std::optional<kernel_spec> kernel;  ///< empty: primal linear model
    std::vector<double> alpha;          ///< cc: per class, in [0, 1)
    double C = 1.0;                     ///< soft
    std::vector<double> rho;            ///< cc_penalty: per class, > 0
    ridge_policy ridge{};

    void validate(int n_classes) const {
        const auto n = static_cast<std::size_t>(n_classes);
        switch (form) {
            case formulation::soft:
                if (!(C > 0.0)) throw std::invalid_argument("train_spec: C must be positive");
                break;
            case formulation::cc:
                if (alpha.size() != n) throw std::invalid_argument("train_spec: one alpha per class required");
                for (double a : alpha) {
                    if (!(a >= 0.0 && a < 1.0)) throw std::invalid_argument("train_spec: alpha must lie in [0, 1)");
                }
                break;
            case formulation::cc_penalty:
                if (rho.size() != n) throw std::invalid_argument("train_spec: one rho per class required");
                for (double r : rho) {
                    if (!(r > 0.0)) throw std::invalid_argument("train_spec: rho must be positive");
                }
                break;
            case formulation::hard:
                break;
        }
    }
};

namespace detail {

/// Inputs to the builders: features F (N x p) enter the constraints, `hess` (p x p)
/// is the Hessian block of every target component.
struct design {
    Eigen::MatrixXd F;
    Eigen::MatrixXd hess;
    std::vector<int> labels;
    int n_classes = 0;
};

inline void check_classes(const std::vector<int>& labels, int n_classes) {
    std::vector<int> count(static_cast<std::size_t>(n_classes), 0);
    for (int y : labels) {
        if (y < 1 || y > n_classes) throw std::invalid_argument("label outside 1..n");
        ++count[static_cast<std::size_t>(y - 1)];
    }
    for (int s = 0; s < n_classes; ++s) {
        if (count[static_cast<std::size_t>(s)] == 0) {
            throw std::invalid_argument("class " + std::to_string(s + 1) + " has no training samples");
        }
    }
}

inline design primal_design(const dataset& data) {
    if (data.n_classes() < 2) throw std::invalid_argument("need at least two classes");
    design d;
    d.F = data.features();
    d.hess = Eigen::MatrixXd::Identity(data.dim(), data.dim());
    d.labels = data.labels();
    d.n_classes = data.n_classes();
    check_classes(d.labels, d.n_classes);
    return d;
}

inline design kernel_design(const gram_matrix& g, const std::vector<int>& labels, int n_classes) {
    if (n_classes < 2) throw std::invalid_argument("need at least two classes");
    if (g.size() != static_cast<Eigen::Index>(labels.size())) {
        throw std::invalid_argument("gram size " + std::to_string(g.size()) + " does not match " +
                                    std::to_string(labels.size()) + " labels");
    }
    design d;
    d.F = g.values;
    d.hess = g.regularized();
    d.labels = labels;
    d.n_classes = n_classes;
    check_classes(d.labels, d.n_classes);
    return d;
}

/**
 * Kernel problem in the Gram's eigen coordinates. With K = U diag(l) U^T and
 * Phi = U_r diag(sqrt(l_r)) over eigenvalues above a relative cutoff,
 * K_i^T gamma = Phi_i^T w and gamma^T K gamma = |w|^2 for gamma = U_r diag(l_r^{-1/2}) w.
 * The ridge becomes the diagonal Hessian (l + ridge) / l. `to_gamma` maps w back.
 */
struct reduced_kernel_design {
    design d;
    Eigen::MatrixXd to_gamma;  ///< N x r
};

inline reduced_kernel_design eigen_kernel_design(const gram_matrix& g, const std::vector<int>& labels,
                                                 int n_classes, double rel_cutoff = 1e-11) {
    if (n_classes < 2) throw std::invalid_argument("need at least two classes");
    if (g.size() != static_cast<Eigen::Index>(labels.size())) {
        throw std::invalid_argument("gram size does not match labels");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g.values);
    const Eigen::VectorXd& l = eig.eigenvalues();
    const double lmax = std::max(l.maxCoeff(), 0.0);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = l.size(); k-- > 0;) {
        if (l(k) > rel_cutoff * lmax && l(k) > 0.0) keep.push_back(k);
    }
    if (keep.empty()) keep.push_back(l.size() - 1);
    const auto N = g.size();
    const auto r = static_cast<Eigen::Index>(keep.size());
    reduced_kernel_design out;
    out.d.F.resize(N, r);
    out.d.hess = Eigen::MatrixXd::Zero(r, r);
    out.to_gamma.resize(N, r);
    for (Eigen::Index c = 0; c < r; ++c) {
        const auto k = keep[static_cast<std::size_t>(c)];
        const double lk = std::max(l(k), std::numeric_limits<double>::min());
        out.d.F.col(c) = eig.eigenvectors().col(k) * std::sqrt(lk);
        out.to_gamma.col(c) = eig.eigenvectors().col(k) / std::sqrt(lk);
        out.d.hess(c, c) = (lk + g.ridge) / lk;
    }
    out.d.labels = labels;
    out.d.n_classes = n_classes;
    check_classes(out.d.labels, n_classes);
    return out;
}

/// Objective 1/2 sum_j c_j^T hess c_j over `n_vars` variables (bias and slacks unpenalized).
inline qp_problem objective_only(const design& d, Eigen::Index n_vars) {
    const auto p = d.F.cols();
    const int dt = d.n_classes - 1;
    qp_problem q(n_vars);
    for (int j = 0; j < dt; ++j) {
        q.H.block(j * p, j * p, p, p) = d.hess;
    }
    return q;
}

/// Rows v_{s,t}^T (g(x_i) - u_s) >= 0 for all t != s, over the coefficient and bias variables.
inline constraint_block margin_block(const design& d, const target_geometry& geom, Eigen::Index i,
                                     Eigen::Index n_vars) {
    const auto p = d.F.cols();
    const int n = d.n_classes;
    const int dt = n - 1;
    const int s = d.labels[static_cast<std::size_t>(i)];
    constraint_block blk;
    blk.A = Eigen::MatrixXd::Zero(dt, n_vars);
    blk.b.resize(dt);
    int r = 0;
    for (int t = 1; t <= n; ++t) {
        if (t == s) continue;
        const auto m = geom.margin_terms(s, t);
        for (int j = 0; j < dt; ++j) {
            blk.A.row(r).segment(j * p, p) = m.v(j) * d.F.row(i);
            blk.A(r, dt * p + j) = m.v(j);
        }
        blk.b(r) = m.offset;
        ++r;
    }
    return blk;
}

inline int budget_count(const design& d, int s) {
    int c = 0;
    for (int y : d.labels) c += y == s ? 1 : 0;
    return c;
}

inline cc_miqp cc_from_design(const design& d, const std::vector<double>& alpha) {
    if (alpha.size() != static_cast<std::size_t>(d.n_classes)) {
        throw std::invalid_argument("one alpha per class required");
    }
    const target_geometry geom(d.n_classes);
    const auto p = d.F.cols();
    const int dt = d.n_classes - 1;
    const Eigen::Index n_vars = dt * (p + 1);
    cc_miqp out;
    out.base = objective_only(d, n_vars);
    out.groups.resize(static_cast<std::size_t>(d.n_classes));
    for (Eigen::Index i = 0; i < d.F.rows(); ++i) {
        const int s = d.labels[static_cast<std::size_t>(i)];
        out.groups[static_cast<std::size_t>(s - 1)].push_back(margin_block(d, geom, i, n_vars));
    }
    for (int s = 1; s <= d.n_classes; ++s) {
        out.budgets.push_back(
            budget_from_alpha(alpha[static_cast<std::size_t>(s - 1)], out.groups[static_cast<std::size_t>(s - 1)].size()));
    }
    return out;
}

inline qp_problem hard_from_design(const design& d) {
    const target_geometry geom(d.n_classes);
    const auto p = d.F.cols();
    const int dt = d.n_classes - 1;
    const Eigen::Index n_vars = dt * (p + 1);
    qp_problem q = objective_only(d, n_vars);
    const auto rows = d.F.rows() * dt;
    q.A_ineq.resize(rows, n_vars);
    q.b_ineq.resize(rows);
    for (Eigen::Index i = 0; i < d.F.rows(); ++i) {
        const auto blk = margin_block(d, geom, i, n_vars);
        q.A_ineq.middleRows(i * dt, dt) = blk.A;
        q.b_ineq.segment(i * dt, dt) = blk.b;
    }
    return q;
}

inline qp_problem soft_from_design(const design& d, double C) {
    if (!(C > 0.0)) throw std::invalid_argument("build_soft: C must be positive");
    const target_geometry geom(d.n_classes);
    const auto p = d.F.cols();
    const auto N = d.F.rows();
    const int dt = d.n_classes - 1;
    const Eigen::Index n_model = dt * (p + 1);
    const Eigen::Index n_vars = n_model + N * dt;
    qp_problem q = objective_only(d, n_vars);
    const double weight = C / static_cast<double>(N);
    const auto rows = 2 * N * dt;
    q.A_ineq = Eigen::MatrixXd::Zero(rows, n_vars);
    q.b_ineq = Eigen::VectorXd::Zero(rows);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < N; ++i) {
        const int s = d.labels[static_cast<std::size_t>(i)];
        const Eigen::Index z0 = n_model + i * dt;
        q.g.segment(z0, dt) = weight * geom.center(s);
        const auto blk = margin_block(d, geom, i, n_model);
        int k = 0;
        for (int t = 1; t <= d.n_classes; ++t) {
            if (t == s) continue;
            const auto& v = geom.diff(s, t);
            q.A_ineq.row(r).head(n_model) = blk.A.row(k);
            q.A_ineq.row(r).segment(z0, dt) = v.transpose();
            q.b_ineq(r) = blk.b(k);
            ++r;
            q.A_ineq.row(r).segment(z0, dt) = v.transpose();
            ++r;
            ++k;
        }
    }
    return q;
}

}  // namespace detail

/// Primal linear CC problem: variables (vec(W), b), one block per sample.
inline cc_miqp build_cc_primal(const dataset& data, const std::vector<double>& alpha) {
    return detail::cc_from_design(detail::primal_design(data), alpha);
}

/// Kernel CC problem: variables (gamma^1..gamma^{d_T}, b); Hessian blocks use the ridged Gram.
inline cc_miqp build_cc_kernel(const gram_matrix& g, const std::vector<int>& labels, int n_classes,
                               const std::vector<double>& alpha) {
    return detail::cc_from_design(detail::kernel_design(g, labels, n_classes), alpha);
}

/// Switches a CC problem to penalty mode: no budgets, rho_s / N_s per dropped block.
inline cc_miqp with_penalty(cc_miqp p, std::vector<double> rho) {
    if (rho.size() != p.groups.size()) throw std::invalid_argument("one rho per class required");
    p.budgets.clear();
    p.penalty = std::move(rho);
    return p;
}

inline qp_problem build_hard(const dataset& data) { return detail::hard_from_design(detail::primal_design(data)); }

inline qp_problem build_hard(const gram_matrix& g, const std::vector<int>& labels, int n_classes) {
    return detail::hard_from_design(detail::kernel_design(g, labels, n_classes));
}

inline qp_problem build_soft(const dataset& data, double C) {
    return detail::soft_from_design(detail::primal_design(data), C);
}

inline qp_problem build_soft(const gram_matrix& g, const std::vector<int>& labels, int n_classes, double C) {
    return detail::soft_from_design(detail::kernel_design(g, labels, n_classes), C);
}

/// Solver outcome kept with a classifier.
struct training_record {
    formulation form = formulation::hard;
    std::vector<std::vector<int>> dropped;  ///< per class, dataset indices of dropped training points
    double objective = std::numeric_limits<double>::quiet_NaN();
    std::string status;
    long nodes = 0;
};

/**
 * @brief h(x) = sigma(g(x)) with g linear in x (primal) or in K(x, .) (kernel).
 */
class trained_classifier {
  public:
    /// Primal: W is d_T x d.
    trained_classifier(int n_classes, Eigen::MatrixXd W, Eigen::VectorXd b)
        : geom_(n_classes), coef_(std::move(W)), bias_(std::move(b)) {
        check_shapes();
    }

    /// Kernel: gamma is d_T x N, support is N x d.
    trained_classifier(int n_classes, kernel_spec k, Eigen::MatrixXd gamma, Eigen::VectorXd b, Eigen::MatrixXd support)
        : geom_(n_classes), kernel_(k), coef_(std::move(gamma)), bias_(std::move(b)), support_(std::move(support)) {
        check_shapes();
    }

    [[nodiscard]] const target_geometry& geometry() const noexcept { return geom_; }
    [[nodiscard]] int n_classes() const noexcept { return geom_.n_classes(); }
    [[nodiscard]] bool is_kernel() const noexcept { return kernel_.has_value(); }
    [[nodiscard]] const std::optional<kernel_spec>& kernel() const noexcept { return kernel_; }
    [[nodiscard]] const Eigen::MatrixXd& coefficients() const noexcept { return coef_; }
    [[nodiscard]] const Eigen::VectorXd& bias() const noexcept { return bias_; }
    [[nodiscard]] const Eigen::MatrixXd& support() const noexcept { return support_; }
    [[nodiscard]] Eigen::Index input_dim() const noexcept { return is_kernel() ? support_.cols() : coef_.cols(); }

    /// g(x) in target space.
    [[nodiscard]] Eigen::VectorXd decision(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        if (x.size() != input_dim()) {
            throw std::invalid_argument("predict: input dimension " + std::to_string(x.size()) + " != " +
                                        std::to_string(input_dim()));
        }
        if (is_kernel()) {
            return coef_ * kernel_row(*kernel_, x, support_) + bias_;
        }
        return coef_ * x + bias_;
    }

    [[nodiscard]] int predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        return geom_.classify(decision(x));
    }

    [[nodiscard]] std::vector<int> predict(const dataset& data) const {
        std::vector<int> out;
        out.reserve(data.size());
        for (const auto& p : data.points()) out.push_back(predict(p.x));
        return out;
    }

    training_record meta;

  private:
    void check_shapes() const {
        const int dt = geom_.target_dim();
        if (coef_.rows() != dt || bias_.size() != dt) {
            throw std::invalid_argument("trained_classifier: coefficient rows must equal n_classes - 1");
        }
        if (kernel_ && support_.rows() != coef_.cols()) {
            throw std::invalid_argument("trained_classifier: one coefficient per support point required");
        }
    }

    target_geometry geom_;
    std::optional<kernel_spec> kernel_;
    Eigen::MatrixXd coef_;
    Eigen::VectorXd bias_;
    Eigen::MatrixXd support_;
};

/// Raised when the hard-margin problem has no feasible separator.
class infeasible_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/**
 * @brief Builds and solves the problem described by `spec`.
 *
 * Kernel problems are solved in the Gram's eigen coordinates (see
 * eigen_kernel_design), which is equivalent and far better conditioned than
 * the gamma form; the classifier stores gamma. For kernel specs a precomputed Gram of `data` may be passed to skip
 * recomputation; it must match the data point order.
 */
inline trained_classifier train(const dataset& data, const train_spec& spec, const cc_settings& settings = {},
                                const gram_matrix* cached = nullptr) {
    spec.validate(data.n_classes());
    const int n = data.n_classes();
    const int dt = n - 1;

    std::optional<gram_matrix> own;
    detail::design d;
    Eigen::MatrixXd to_gamma;
    if (spec.kernel) {
        if (cached == nullptr) {
            own = gram(*spec.kernel, data.features(), spec.ridge);
            cached = &*own;
        }
        auto red = detail::eigen_kernel_design(*cached, data.labels(), n);
        d = std::move(red.d);
        to_gamma = std::move(red.to_gamma);
    } else {
        d = detail::primal_design(data);
    }
    const auto p = d.F.cols();

    training_record rec;
    rec.form = spec.form;
    rec.dropped.assign(static_cast<std::size_t>(n), {});
    Eigen::VectorXd x;
    switch (spec.form) {
        case formulation::hard:
        case formulation::soft: {
            const auto q = spec.form == formulation::hard ? detail::hard_from_design(d)
                                                          : detail::soft_from_design(d, spec.C);
            const auto sol = solve_qp(q, settings.qp);
            if (sol.status == qp_status::infeasible) {
                throw infeasible_error("training problem is infeasible (data not separable by this model)");
            }
            x = sol.x;
            rec.objective = sol.objective;
            rec.status = to_string(sol.status);
            break;
        }
        case formulation::cc:
        case formulation::cc_penalty: {
            auto prob = detail::cc_from_design(d, spec.form == formulation::cc
                                                      ? spec.alpha
                                                      : std::vector<double>(static_cast<std::size_t>(n), 0.0));
            if (spec.form == formulation::cc_penalty) prob = with_penalty(std::move(prob), spec.rho);
            const auto sol = solve_cc(prob, settings);
            if (!sol.has_solution()) {
                throw infeasible_error(std::string("chance-constrained training found no solution: ") +
                                       to_string(sol.status));
            }
            x = sol.x;
            rec.objective = sol.objective;
            rec.status = to_string(sol.status);
            rec.nodes = sol.nodes_explored;
            for (int s = 1; s <= n; ++s) {
                const auto members = data.class_indices(s);
                for (int k : sol.dropped[static_cast<std::size_t>(s - 1)]) {
                    rec.dropped[static_cast<std::size_t>(s - 1)].push_back(members[static_cast<std::size_t>(k)]);
                }
            }
            break;
        }
    }

    Eigen::MatrixXd coef(dt, p);
    for (int j = 0; j < dt; ++j) coef.row(j) = x.segment(j * p, p).transpose();
    const Eigen::VectorXd b = x.segment(dt * p, dt);
    if (spec.kernel) {
        coef = coef * to_gamma.transpose();
        trained_classifier clf(n, *spec.kernel, std::move(coef), b, data.features());
        clf.meta = std::move(rec);
        return clf;
    }
    trained_classifier clf(n, std::move(coef), b);
    clf.meta = std::move(rec);
    return clf;
}

struct accuracy_result {
    double overall = 0.0;
    std::vector<double> per_class;  ///< NaN for classes absent from the data
    std::vector<int> class_counts;
};

inline accuracy_result accuracy(const trained_classifier& clf, const dataset& data) {
    if (data.empty()) throw std::invalid_argument("accuracy: empty dataset");
    const auto n = static_cast<std::size_t>(data.n_classes());
    accuracy_result out;
    out.class_counts.assign(n, 0);
    std::vector<int> hits(n, 0);
    int total = 0;
    for (const auto& p : data.points()) {
        const auto s = static_cast<std::size_t>(p.y - 1);
        ++out.class_counts[s];
        if (clf.predict(p.x) == p.y) {
            ++hits[s];
            ++total;
        }
    }
    out.overall = static_cast<double>(total) / static_cast<double>(data.size());
    for (std::size_t s = 0; s < n; ++s) {
        out.per_class.push_back(out.class_counts[s] > 0
                                    ? static_cast<double>(hits[s]) / static_cast<double>(out.class_counts[s])
                                    : std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

}  // namespace ccsvm

#endif  // CCSVM_MODELS_HPP_
