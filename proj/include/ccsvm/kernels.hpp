/**
 * @file kernels.hpp
 * @brief Mercer kernels, Gram matrices and kernel rows.
 */
#ifndef CCSVM_KERNELS_HPP_
#define CCSVM_KERNELS_HPP_
#pragma once

#include "ccsvm/parallel.hpp"

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ccsvm {

enum class kernel_kind { linear, polynomial, rbf };

/**
 * @brief Kernel description. Textual form: `linear`, `poly:d=2`, `rbf:gamma=0.5`.
 */
struct kernel_spec {
    kernel_kind kind = kernel_kind::linear;
    int degree = 0;      ///< polynomial only
    double gamma = 0.0;  ///< rbf only

    static kernel_spec linear() { return {}; }
    static kernel_spec polynomial(int d) {
        if (d < 1) {
            throw std::invalid_argument("polynomial kernel degree must be >= 1");
        }
        return {kernel_kind::polynomial, d, 0.0};
    }
    static kernel_spec rbf(double g) {
        if (!(g > 0.0) || !std::isfinite(g)) {
            throw std::invalid_argument("rbf gamma must be positive");
        }
        return {kernel_kind::rbf, 0, g};
    }

    friend bool operator==(const kernel_spec&, const kernel_spec&) = default;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    // shortest representation that round-trips
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const char* what) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto res = std::from_chars(s.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw std::invalid_argument(std::string("cannot parse ") + what + " from '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace detail

inline std::string to_string(const kernel_spec& k) {
    switch (k.kind) {
        case kernel_kind::linear:
            return "linear";
        case kernel_kind::polynomial:
            return "poly:d=" + std::to_string(k.degree);
        case kernel_kind::rbf:
            return "rbf:gamma=" + detail::format_double(k.gamma);
    }
    return "?";
}

inline kernel_spec parse_kernel_spec(std::string_view text) {
    if (text == "linear") {
        return kernel_spec::linear();
    }
    if (text.starts_with("poly:d=")) {
        const auto v = detail::parse_double(text.substr(7), "polynomial degree");
        if (v != std::floor(v)) {
            throw std::invalid_argument("polynomial degree must be an integer");
        }
        return kernel_spec::polynomial(static_cast<int>(v));
    }
    if (text.starts_with("rbf:gamma=")) {
        return kernel_spec::rbf(detail::parse_double(text.substr(10), "rbf gamma"));
    }
    throw std::invalid_argument("unknown kernel spec '" + std::string(text) + "'");
}

inline double kernel_eval(const kernel_spec& k, const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("kernel_eval: dimension mismatch");
    }
    switch (k.kind) {
        case kernel_kind::linear:
            return x.dot(y);
        case kernel_kind::polynomial: {
            const double base = 1.0 + x.dot(y);
            double r = 1.0;
            for (int i = 0; i < k.degree; ++i) {
                r *= base;
            }
            return r;
        }
        case kernel_kind::rbf:
            return std::exp(-k.gamma * (x - y).squaredNorm());
    }
    return 0.0;
}

/// How much to add to the Gram diagonal before it is used as a Hessian block.
struct ridge_policy {
    double relative = 1e-8;  ///< ridge = relative * trace / N
    static ridge_policy none() { return {0.0}; }
};

/**
 * @brief Symmetric kernel matrix on a point set. `values` holds the raw kernel
 *        evaluations; `ridge` is kept separate and only enters QP Hessians.
 */
struct gram_matrix {
    Eigen::MatrixXd values;
    double ridge = 0.0;

    [[nodiscard]] Eigen::Index size() const noexcept { return values.rows(); }

    [[nodiscard]] Eigen::MatrixXd regularized() const {
        Eigen::MatrixXd h = values;
        h.diagonal().array() += ridge;
        return h;
    }

    /// Principal submatrix on `idx`; the ridge is carried over unchanged.
    [[nodiscard]] gram_matrix subset(const std::vector<int>& idx) const {
        gram_matrix out;
        const auto m = static_cast<Eigen::Index>(idx.size());
        out.values.resize(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j < m; ++j) {
                out.values(i, j) = values(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
            }
        }
        out.ridge = ridge;
        return out;
    }
};

inline double ridge_for(const Eigen::MatrixXd& values, const ridge_policy& policy) {
    if (values.rows() == 0) {
        return 0.0;
    }
    return policy.relative * values.trace() / static_cast<double>(values.rows());
}

/// Rows of `points` are the inputs. Rows are filled independently, so any
/// thread count gives bit-identical values.
inline gram_matrix gram(const kernel_spec& k, const Eigen::Ref<const Eigen::MatrixXd>& points,
                        const ridge_policy& policy = {}, int threads = 1) {
    const auto n = points.rows();
    if (n == 0) {
        throw std::invalid_argument("gram: empty point set");
    }
    gram_matrix g;
    g.values.resize(n, n);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t row) {
        const auto i = static_cast<Eigen::Index>(row);
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = kernel_eval(k, points.row(i).transpose(), points.row(j).transpose());
            g.values(i, j) = v;
            g.values(j, i) = v;
        }
    });
    g.ridge = ridge_for(g.values, policy);
    return g;
}

/// K_x with component j = K(x, x_j).
inline Eigen::VectorXd kernel_row(const kernel_spec& k, const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const Eigen::Ref<const Eigen::MatrixXd>& points) {
    if (points.rows() > 0 && points.cols() != x.size()) {
        throw std::invalid_argument("kernel_row: dimension mismatch");
    }
    Eigen::VectorXd row(points.rows());
    for (Eigen::Index j = 0; j < points.rows(); ++j) {
        row(j) = kernel_eval(k, x, points.row(j).transpose());
    }
    return row;
}

}  // namespace ccsvm

#endif  // CCSVM_KERNELS_HPP_
