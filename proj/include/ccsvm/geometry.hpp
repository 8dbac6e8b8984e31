/**
 * @file geometry.hpp
 * @brief Target-space simplex geometry: class centers, difference vectors and
 *        the max-projection classing function.
 *
 * Classes are numbered 1..n everywhere in the public API.
 */
#ifndef CCSVM_GEOMETRY_HPP_
#define CCSVM_GEOMETRY_HPP_
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccsvm {

/**
 * @brief Vertices of a regular (n-1)-simplex in R^{n-1} built by the recursive
 *        division scheme.
 *
 * u_{2,1} = [-1], u_{2,2} = [1];
 * u_{n,1} = [0; -1], u_{n,s+1} = 1/(n-1) [sqrt(n(n-2)) u_{n-1,s}; 1].
 */
inline std::vector<Eigen::VectorXd> class_centers(int n) {
    if (n < 2) {
        throw std::invalid_argument("class_centers: need n >= 2, got " + std::to_string(n));
    }
    std::vector<Eigen::VectorXd> centers{Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0)};
    for (int m = 3; m <= n; ++m) {
        std::vector<Eigen::VectorXd> next;
        next.reserve(static_cast<std::size_t>(m));
        Eigen::VectorXd first = Eigen::VectorXd::Zero(m - 1);
        first(m - 2) = -1.0;
        next.push_back(std::move(first));
        const double scale = std::sqrt(static_cast<double>(m) * static_cast<double>(m - 2));
        for (const auto& prev : centers) {
            Eigen::VectorXd u(m - 1);
            u.head(m - 2) = scale * prev;
            u(m - 2) = 1.0;
            u /= static_cast<double>(m - 1);
            next.push_back(std::move(u));
        }
        centers = std::move(next);
    }
    return centers;
}

/// Vector and offset of one conic margin constraint v^T (g(x) - u_s) >= 0.
struct margin_term {
    Eigen::VectorXd v;   ///< u_s - u_t
    double offset = 0.0; ///< v . u_s
};

class target_geometry {
  public:
    explicit target_geometry(int n_classes)
        : n_(n_classes), centers_(class_centers(n_classes)) {
        diffs_.resize(static_cast<std::size_t>(n_ * n_));
        for (int s = 1; s <= n_; ++s) {
            for (int t = 1; t <= n_; ++t) {
                if (s != t) {
                    diffs_[index(s, t)] = centers_[s - 1] - centers_[t - 1];
                }
            }
        }
    }

    [[nodiscard]] int n_classes() const noexcept { return n_; }
    [[nodiscard]] int target_dim() const noexcept { return n_ - 1; }
    [[nodiscard]] const std::vector<Eigen::VectorXd>& centers() const noexcept { return centers_; }

    [[nodiscard]] const Eigen::VectorXd& center(int s) const {
        check_class(s);
        return centers_[s - 1];
    }

    /// v^n_{s,t} = u_{n,s} - u_{n,t}
    [[nodiscard]] const Eigen::VectorXd& diff(int s, int t) const {
        check_class(s);
        check_class(t);
        if (s == t) {
            throw std::invalid_argument("target_geometry::diff: s == t");
        }
        return diffs_[index(s, t)];
    }

    [[nodiscard]] margin_term margin_terms(int s, int t) const {
        const auto& v = diff(s, t);
        return {v, v.dot(centers_[s - 1])};
    }

    /// Max-projection classing: argmax_s u_s . a, lowest index on ties.
    [[nodiscard]] int classify(const Eigen::Ref<const Eigen::VectorXd>& a) const {
        if (a.size() != target_dim()) {
            throw std::invalid_argument("classify_target: expected dimension " + std::to_string(target_dim()) +
                                        ", got " + std::to_string(a.size()));
        }
        int best = 1;
        double best_proj = centers_[0].dot(a);
        for (int s = 2; s <= n_; ++s) {
            const double p = centers_[s - 1].dot(a);
            if (p > best_proj) {
                best_proj = p;
                best = s;
            }
        }
        return best;
    }

  private:
    [[nodiscard]] std::size_t index(int s, int t) const noexcept {
        return static_cast<std::size_t>((s - 1) * n_ + (t - 1));
    }
    void check_class(int s) const {
        if (s < 1 || s > n_) {
            throw std::invalid_argument("class index " + std::to_string(s) + " outside 1.." + std::to_string(n_));
        }
    }

    int n_;
    std::vector<Eigen::VectorXd> centers_;
    std::vector<Eigen::VectorXd> diffs_;
};

inline int classify_target(const Eigen::Ref<const Eigen::VectorXd>& a, const target_geometry& geom) {
    return geom.classify(a);
}

inline margin_term margin_terms(const target_geometry& geom, int s, int t) { return geom.margin_terms(s, t); }

}  // namespace ccsvm

#endif  // CCSVM_GEOMETRY_HPP_
