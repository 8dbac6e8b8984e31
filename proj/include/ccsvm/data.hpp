/**
 * @file data.hpp
 * @brief Labeled datasets, CSV I/O, the portable random generator, synthetic
 *        benchmark generators, label-noise injection and per-class splits.
 */
#ifndef CCSVM_DATA_HPP_
#define CCSVM_DATA_HPP_
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ccsvm {

/**
 * @brief Seeded generator with a fixed output stream on every platform.
 *
 * Raw bits come from std::mt19937_64, whose sequence is fully specified by the
 * standard. Uniform and normal variates are derived here (53-bit mantissa
 * uniforms, Box-Muller normals) rather than through the implementation-defined
 * std:: distributions.
 */
class rng {
  public:
    explicit rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), unbiased.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) {
            throw std::invalid_argument("rng::below: n must be positive");
        }
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        for (;;) {
            const auto v = engine_();
            if (v < limit) {
                return v % n;
            }
        }
    }

    /// Standard normal.
    double normal() {
        if (cached_) {
            const double v = *cached_;
            cached_.reset();
            return v;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(theta);
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

  private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::optional<double> cached_;
};

struct labeled_point {
    Eigen::VectorXd x;
    int y = 0;  ///< class in 1..n
};

/**
 * @brief Labeled points with classes 1..n_classes and a uniform feature dimension.
 */
class dataset {
  public:
    dataset() = default;
    dataset(int n_classes, Eigen::Index dim) : n_classes_(n_classes), dim_(dim) {
        if (n_classes < 1) {
            throw std::invalid_argument("dataset: need at least one class");
        }
    }

    void add(Eigen::VectorXd x, int y) {
        if (x.size() != dim_) {
            throw std::invalid_argument("dataset: feature dimension " + std::to_string(x.size()) + " != " +
                                        std::to_string(dim_));
        }
        if (y < 1 || y > n_classes_) {
            throw std::invalid_argument("dataset: label " + std::to_string(y) + " outside 1.." +
                                        std::to_string(n_classes_));
        }
        points_.push_back({std::move(x), y});
    }

    [[nodiscard]] int n_classes() const noexcept { return n_classes_; }
    [[nodiscard]] Eigen::Index dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
    [[nodiscard]] bool empty() const noexcept { return points_.empty(); }
    [[nodiscard]] const std::vector<labeled_point>& points() const noexcept { return points_; }
    [[nodiscard]] const labeled_point& operator[](std::size_t i) const { return points_[i]; }

    void set_label(std::size_t i, int y) {
        if (y < 1 || y > n_classes_) {
            throw std::invalid_argument("dataset: label out of range");
        }
        points_.at(i).y = y;
    }

    /// Indices of points with label s (Theta_s), in dataset order.
    [[nodiscard]] std::vector<int> class_indices(int s) const {
        std::vector<int> idx;
        for (std::size_t i = 0; i < points_.size(); ++i) {
            if (points_[i].y == s) {
                idx.push_back(static_cast<int>(i));
            }
        }
        return idx;
    }

    [[nodiscard]] std::vector<int> class_sizes() const {
        std::vector<int> sizes(static_cast<std::size_t>(n_classes_), 0);
        for (const auto& p : points_) {
            ++sizes[static_cast<std::size_t>(p.y - 1)];
        }
        return sizes;
    }

    /// N x d feature matrix.
    [[nodiscard]] Eigen::MatrixXd features() const {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(points_.size()), dim_);
        for (std::size_t i = 0; i < points_.size(); ++i) {
            X.row(static_cast<Eigen::Index>(i)) = points_[i].x.transpose();
        }
        return X;
    }

    [[nodiscard]] std::vector<int> labels() const {
        std::vector<int> y;
        y.reserve(points_.size());
        for (const auto& p : points_) {
            y.push_back(p.y);
        }
        return y;
    }

    [[nodiscard]] dataset subset(const std::vector<int>& idx) const {
        dataset out(n_classes_, dim_);
        out.label_names = label_names;
        for (int i : idx) {
            out.points_.push_back(points_.at(static_cast<std::size_t>(i)));
        }
        return out;
    }

    /// Original label tokens when the source labels were remapped, indexed by class - 1.
    std::vector<std::string> label_names;

  private:
    int n_classes_ = 0;
    Eigen::Index dim_ = 0;
    std::vector<labeled_point> points_;
};

class parse_error : public std::runtime_error {
  public:
    parse_error(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    const bool has_comma = line.find(',') != std::string_view::npos;
    std::size_t i = 0;
    while (i <= line.size()) {
        if (has_comma) {
            const auto j = std::min(line.find(',', i), line.size());
            auto f = line.substr(i, j - i);
            while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
            while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
            out.push_back(f);
            i = j + 1;
        } else {
            while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
            if (i >= line.size()) break;
            auto j = i;
            while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
            out.push_back(line.substr(i, j - i));
            i = j;
        }
    }
    return out;
}

inline std::optional<double> to_double(std::string_view f) {
    if (!f.empty() && f.front() == '+') f.remove_prefix(1);
    double v = 0.0;
    const auto* end = f.data() + f.size();
    auto res = std::from_chars(f.data(), end, v);
    if (f.empty() || res.ec != std::errc{} || res.ptr != end) {
        return std::nullopt;
    }
    return v;
}

inline std::optional<long long> to_integer(std::string_view f) {
    long long v = 0;
    const auto* end = f.data() + f.size();
    auto res = std::from_chars(f.data(), end, v);
    if (f.empty() || res.ec != std::errc{} || res.ptr != end) {
        return std::nullopt;
    }
    return v;
}

}  // namespace detail

/**
 * @brief Parses rows of reals followed by a label. Fields are comma-separated,
 *        or whitespace-separated when a line has no comma.
 *
 * Labels 1..k are kept. Any other integer labels are remapped in ascending
 * order, string labels in order of first appearance; `label_names` records the
 * original tokens in both cases.
 */
inline dataset read_csv(std::istream& in, bool has_header) {
    std::vector<std::vector<double>> rows;
    std::vector<std::string> label_tokens;
    std::vector<std::size_t> row_lines;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    bool header_pending = has_header;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        while (!view.empty() && (view.back() == '\r' || view.back() == ' ' || view.back() == '\t')) {
            view.remove_suffix(1);
        }
        if (view.empty()) {
            continue;
        }
        if (header_pending) {
            header_pending = false;
            continue;
        }
        const auto fields = detail::split_fields(view);
        if (fields.size() < 2) {
            throw parse_error(line_no, "expected at least one feature and a label");
        }
        if (width == 0) {
            width = fields.size();
        } else if (fields.size() != width) {
            throw parse_error(line_no, "expected " + std::to_string(width) + " fields, got " +
                                           std::to_string(fields.size()));
        }
        std::vector<double> row;
        row.reserve(width - 1);
        for (std::size_t c = 0; c + 1 < fields.size(); ++c) {
            const auto v = detail::to_double(fields[c]);
            if (!v || !std::isfinite(*v)) {
                throw parse_error(line_no, "non-numeric feature '" + std::string(fields[c]) + "' in column " +
                                               std::to_string(c + 1));
            }
            row.push_back(*v);
        }
        if (fields.back().empty()) {
            throw parse_error(line_no, "empty label");
        }
        rows.push_back(std::move(row));
        label_tokens.emplace_back(fields.back());
        row_lines.push_back(line_no);
    }
    if (rows.empty()) {
        throw parse_error(line_no, "no data rows");
    }

    bool all_int = true;
    std::set<long long> int_labels;
    for (const auto& t : label_tokens) {
        auto v = detail::to_integer(t);
        if (!v) {
            // accept integral values written as reals, e.g. "2.0"
            auto d = detail::to_double(t);
            if (d && *d == std::floor(*d) && std::abs(*d) < 1e15) {
                v = static_cast<long long>(*d);
            }
        }
        if (!v) {
            all_int = false;
            break;
        }
        int_labels.insert(*v);
    }

    std::map<std::string, int> mapping;
    std::vector<std::string> names;
    std::vector<int> y(label_tokens.size());
    if (all_int) {
        const bool contiguous = *int_labels.begin() == 1 && *int_labels.rbegin() == static_cast<long long>(int_labels.size());
        std::map<long long, int> remap;
        int next = 1;
        for (auto v : int_labels) {
            remap[v] = next++;
            if (!contiguous) {
                names.push_back(std::to_string(v));
            }
        }
        for (std::size_t i = 0; i < label_tokens.size(); ++i) {
            auto v = detail::to_integer(label_tokens[i]);
            const long long key = v ? *v : static_cast<long long>(*detail::to_double(label_tokens[i]));
            y[i] = remap.at(key);
        }
    } else {
        for (std::size_t i = 0; i < label_tokens.size(); ++i) {
            auto [it, inserted] = mapping.try_emplace(label_tokens[i], static_cast<int>(mapping.size()) + 1);
            if (inserted) {
                names.push_back(label_tokens[i]);
            }
            y[i] = it->second;
        }
    }
    int n_classes = 0;
    for (int v : y) n_classes = std::max(n_classes, v);

    dataset data(n_classes, static_cast<Eigen::Index>(width - 1));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        data.add(Eigen::Map<const Eigen::VectorXd>(rows[i].data(), static_cast<Eigen::Index>(rows[i].size())), y[i]);
    }
    data.label_names = std::move(names);
    return data;
}

/// Rows of reals without labels, one point per row (for prediction).
inline Eigen::MatrixXd read_features_csv(std::istream& in, bool has_header) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    bool header_pending = has_header;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        while (!view.empty() && (view.back() == '\r' || view.back() == ' ' || view.back() == '\t')) {
            view.remove_suffix(1);
        }
        if (view.empty()) {
            continue;
        }
        if (header_pending) {
            header_pending = false;
            continue;
        }
        const auto fields = detail::split_fields(view);
        if (!rows.empty() && fields.size() != rows.front().size()) {
            throw parse_error(line_no, "expected " + std::to_string(rows.front().size()) + " fields, got " +
                                           std::to_string(fields.size()));
        }
        std::vector<double> row;
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const auto v = detail::to_double(fields[c]);
            if (!v || !std::isfinite(*v)) {
                throw parse_error(line_no, "non-numeric field '" + std::string(fields[c]) + "' in column " +
                                               std::to_string(c + 1));
            }
            row.push_back(*v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw parse_error(line_no, "no data rows");
    }
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < rows[i].size(); ++c) {
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
        }
    }
    return X;
}

inline dataset load_csv(const std::string& path, bool has_header = false) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "'");
    }
    return read_csv(in, has_header);
}

/// Writes the format read_csv accepts: features with 17 significant digits, then the integer label.
inline void write_csv(std::ostream& out, const dataset& data) {
    char buf[32];
    for (const auto& p : data.points()) {
        for (Eigen::Index c = 0; c < p.x.size(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", p.x(c));
            out << buf << ',';
        }
        out << p.y << '\n';
    }
}

inline void save_csv(const std::string& path, const dataset& data) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write '" + path + "'");
    }
    write_csv(out, data);
}

/// Draws from N(mean, cov) through the Cholesky factor of cov.
class gaussian_sampler {
  public:
    gaussian_sampler(Eigen::VectorXd mean, const Eigen::MatrixXd& cov) : mean_(std::move(mean)) {
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success) {
            throw std::invalid_argument("gaussian_sampler: covariance is not positive definite");
        }
        factor_ = llt.matrixL();
    }

    Eigen::VectorXd operator()(rng& r) const {
        Eigen::VectorXd z(mean_.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            z(i) = r.normal();
        }
        return mean_ + factor_ * z;
    }

  private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd factor_;
};

inline Eigen::Matrix2d binary_instance_covariance() {
    Eigen::Matrix2d c;
    c << 2.0, 0.5, 0.5, 3.0;
    return c;
}

/// Class means (P1, P2) of the two-Gaussian benchmark instances.
inline std::pair<Eigen::Vector2d, Eigen::Vector2d> binary_instance_means(int instance) {
    if (instance == 1) {
        return {Eigen::Vector2d(1.5, -1.5), Eigen::Vector2d(-1.5, 1.5)};
    }
    if (instance >= 2 && instance <= 4) {
        return {Eigen::Vector2d(0.0, -2.5), Eigen::Vector2d(0.0, 2.5)};
    }
    throw std::invalid_argument("binary instance must be 1..4, got " + std::to_string(instance));
}

/// The labeling curve y = f(x): the mean bisector y = x for instance 1,
/// sin(pi x / 4), 2 sin(pi x / 2) and 2 sin(pi x) for instances 2..4.
inline double binary_instance_curve(int instance, double x) {
    constexpr double pi = std::numbers::pi;
    switch (instance) {
        case 1:
            return x;
        case 2:
            return std::sin(pi * x / 4.0);
        case 3:
            return 2.0 * std::sin(pi * x / 2.0);
        case 4:
            return 2.0 * std::sin(pi * x);
        default:
            throw std::invalid_argument("binary instance must be 1..4, got " + std::to_string(instance));
    }
}

/// Class 2 strictly above the curve, class 1 strictly below, 0 on the curve.
inline int binary_instance_label(int instance, const Eigen::Vector2d& p) {
    const double f = binary_instance_curve(instance, p(0));
    if (p(1) > f) return 2;
    if (p(1) < f) return 1;
    return 0;
}

/**
 * @brief Two-dimensional binary benchmark: n_per_class draws from each of P1
 *        and P2, pooled and labeled by which side of the instance curve they fall.
 */
inline dataset gen_binary_instance(int instance, int n_per_class, rng& r) {
    const auto [m1, m2] = binary_instance_means(instance);
    if (n_per_class < 1) {
        throw std::invalid_argument("gen_binary_instance: n_per_class must be >= 1");
    }
    const auto cov = binary_instance_covariance();
    const gaussian_sampler p1(m1, cov);
    const gaussian_sampler p2(m2, cov);
    dataset data(2, 2);
    for (const auto* sampler : {&p1, &p2}) {
        for (int i = 0; i < n_per_class; ++i) {
            for (;;) {
                const Eigen::Vector2d x = (*sampler)(r);
                const int label = binary_instance_label(instance, x);
                if (label != 0) {
                    data.add(x, label);
                    break;
                }
            }
        }
    }
    return data;
}

/**
 * @brief Two-dimensional three-class benchmark. Class 1 ~ N(0, I); class 2 ~
 *        N((8, -5.5), [[1.5, 3], [3, 8]]); class 3 in polar form with radius
 *        ~ N(6, variance 2.25) and angle ~ U(-pi/2, pi/2).
 */
inline dataset gen_threeclass(int n_per_class, rng& r) {
    if (n_per_class < 1) {
        throw std::invalid_argument("gen_threeclass: n_per_class must be >= 1");
    }
    const gaussian_sampler p1(Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity());
    Eigen::Matrix2d cov2;
    cov2 << 1.5, 3.0, 3.0, 8.0;
    const gaussian_sampler p2(Eigen::Vector2d(8.0, -5.5), cov2);
    dataset data(3, 2);
    for (int i = 0; i < n_per_class; ++i) {
        data.add(p1(r), 1);
    }
    for (int i = 0; i < n_per_class; ++i) {
        data.add(p2(r), 2);
    }
    for (int i = 0; i < n_per_class; ++i) {
        double radius = -1.0;
        while (radius < 0.0) {
            radius = r.normal(6.0, 1.5);
        }
        const double theta = r.uniform(-std::numbers::pi / 2.0, std::numbers::pi / 2.0);
        data.add(Eigen::Vector2d(radius * std::cos(theta), radius * std::sin(theta)), 3);
    }
    return data;
}

struct label_flip {
    std::size_t index = 0;
    int from = 0;
    int to = 0;
};

struct mislabel_result {
    dataset data;
    std::vector<label_flip> flips;
};

/**
 * @brief Flips each point of `source_class` independently with probability
 *        `prob` to a uniformly chosen class from `target_classes`.
 *
 * One uniform draw is consumed per source point, plus one target draw per flip.
 */
inline mislabel_result inject_mislabels(const dataset& data, int source_class, double prob,
                                        const std::vector<int>& target_classes, rng& r) {
    if (!(prob >= 0.0 && prob <= 1.0)) {
        throw std::invalid_argument("inject_mislabels: prob must be in [0, 1]");
    }
    if (source_class < 1 || source_class > data.n_classes()) {
        throw std::invalid_argument("inject_mislabels: invalid source class");
    }
    if (target_classes.empty()) {
        throw std::invalid_argument("inject_mislabels: no target classes");
    }
    for (int t : target_classes) {
        if (t < 1 || t > data.n_classes() || t == source_class) {
            throw std::invalid_argument("inject_mislabels: invalid target class " + std::to_string(t));
        }
    }
    mislabel_result out{data, {}};
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].y != source_class) {
            continue;
        }
        if (r.uniform() < prob) {
            const int to = target_classes[r.below(target_classes.size())];
            out.data.set_label(i, to);
            out.flips.push_back({i, source_class, to});
        }
    }
    return out;
}

struct split_result {
    dataset train;
    dataset test;
    std::vector<int> empty_test_classes;  ///< classes with no test points left
};

/**
 * @brief Draws n_train_per_class points of every class uniformly without
 *        replacement; the rest form the test set. Both keep dataset order.
 */
inline split_result split_per_class(const dataset& data, int n_train_per_class, rng& r) {
    if (n_train_per_class < 0) {
        throw std::invalid_argument("split_per_class: negative training size");
    }
    std::vector<char> is_train(data.size(), 0);
    split_result out;
    for (int s = 1; s <= data.n_classes(); ++s) {
        auto idx = data.class_indices(s);
        if (static_cast<std::size_t>(n_train_per_class) > idx.size()) {
            throw std::invalid_argument("split_per_class: class " + std::to_string(s) + " has only " +
                                        std::to_string(idx.size()) + " points");
        }
        // partial Fisher-Yates
        for (std::size_t k = 0; k < static_cast<std::size_t>(n_train_per_class); ++k) {
            const auto j = k + r.below(idx.size() - k);
            std::swap(idx[k], idx[j]);
            is_train[static_cast<std::size_t>(idx[k])] = 1;
        }
        if (idx.size() == static_cast<std::size_t>(n_train_per_class)) {
            out.empty_test_classes.push_back(s);
        }
    }
    std::vector<int> train_idx;
    std::vector<int> test_idx;
    for (std::size_t i = 0; i < data.size(); ++i) {
        (is_train[i] ? train_idx : test_idx).push_back(static_cast<int>(i));
    }
    out.train = data.subset(train_idx);
    out.test = data.subset(test_idx);
    return out;
}

}  // namespace ccsvm

#endif  // CCSVM_DATA_HPP_
