/**
 * @file model_io.hpp
 * @brief Plain-text classifier format.
 *
 *     ccsvm-model v1
 *     n <classes>
 *     kernel <spec | none>
 *     mode <primal | kernel>
 *     formulation <name>
 *     status <solver status>
 *     objective <value>
 *     dropped <class> <idx> ...        (one line per class)
 *     dims <rows> <cols>               (coefficient matrix, d_T x p)
 *     <coefficient rows>
 *     bias <d_T values>
 *     support <N> <d>                  (kernel mode only)
 *     <support rows>
 *
 * Reals are printed with 17 significant digits, so a save/load round trip is exact.
 */
#ifndef CCSVM_MODEL_IO_HPP_
#define CCSVM_MODEL_IO_HPP_
#pragma once

#include "ccsvm/models.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace ccsvm {

class model_format_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_row(std::ostream& out, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    for (Eigen::Index k = 0; k < row.size(); ++k) {
        if (k > 0) out << ' ';
        out << fmt17(row(k));
    }
    out << '\n';
}

class line_reader {
  public:
    explicit line_reader(std::istream& in) : in_(in) {}

    std::istringstream next(const char* expected_key) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            std::istringstream ss(line);
            if (expected_key != nullptr) {
                std::string key;
                ss >> key;
                if (key != expected_key) fail(std::string("expected '") + expected_key + "'");
            }
            return ss;
        }
        fail(std::string("unexpected end of file") + (expected_key ? std::string(", expected '") + expected_key + "'" : ""));
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw model_format_error("model line " + std::to_string(line_no_) + ": " + what);
    }

    Eigen::RowVectorXd row(Eigen::Index cols) {
        auto ss = next(nullptr);
        Eigen::RowVectorXd r(cols);
        for (Eigen::Index k = 0; k < cols; ++k) {
            if (!(ss >> r(k))) fail("expected " + std::to_string(cols) + " numbers");
        }
        std::string extra;
        if (ss >> extra) fail("trailing field '" + extra + "'");
        return r;
    }

  private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

}  // namespace detail

inline void write_model(std::ostream& out, const trained_classifier& clf) {
    out << "ccsvm-model v1\n";
    out << "n " << clf.n_classes() << '\n';
    out << "kernel " << (clf.kernel() ? to_string(*clf.kernel()) : std::string("none")) << '\n';
    out << "mode " << (clf.is_kernel() ? "kernel" : "primal") << '\n';
    out << "formulation " << to_string(clf.meta.form) << '\n';
    out << "status " << (clf.meta.status.empty() ? "unknown" : clf.meta.status) << '\n';
    out << "objective " << detail::fmt17(clf.meta.objective) << '\n';
    for (int s = 0; s < clf.n_classes(); ++s) {
        out << "dropped " << (s + 1);
        if (static_cast<std::size_t>(s) < clf.meta.dropped.size()) {
            for (int i : clf.meta.dropped[static_cast<std::size_t>(s)]) out << ' ' << i;
        }
        out << '\n';
    }
    const auto& c = clf.coefficients();
    out << "dims " << c.rows() << ' ' << c.cols() << '\n';
    for (Eigen::Index j = 0; j < c.rows(); ++j) detail::write_row(out, c.row(j));
    out << "bias ";
    detail::write_row(out, clf.bias().transpose());
    if (clf.is_kernel()) {
        const auto& sv = clf.support();
        out << "support " << sv.rows() << ' ' << sv.cols() << '\n';
        for (Eigen::Index i = 0; i < sv.rows(); ++i) detail::write_row(out, sv.row(i));
    }
}

inline trained_classifier read_model(std::istream& in) {
    detail::line_reader rd(in);
    {
        auto ss = rd.next(nullptr);
        std::string magic, version;
        ss >> magic >> version;
        if (magic != "ccsvm-model" || version != "v1") rd.fail("not a ccsvm-model v1 file");
    }
    int n = 0;
    if (!(rd.next("n") >> n) || n < 2) rd.fail("bad class count");
    std::string kernel_text;
    rd.next("kernel") >> kernel_text;
    std::string mode;
    rd.next("mode") >> mode;
    if (mode != "primal" && mode != "kernel") rd.fail("unknown mode '" + mode + "'");
    if ((mode == "kernel") != (kernel_text != "none")) rd.fail("mode and kernel disagree");
    training_record meta;
    {
        std::string f;
        rd.next("formulation") >> f;
        try {
            meta.form = parse_formulation(f);
        } catch (const std::invalid_argument& e) {
            rd.fail(e.what());
        }
    }
    rd.next("status") >> meta.status;
    {
        auto ss = rd.next("objective");
        std::string v;
        ss >> v;
        try {
            meta.objective = std::stod(v);
        } catch (const std::exception&) {
            rd.fail("bad objective");
        }
    }
    meta.dropped.assign(static_cast<std::size_t>(n), {});
    for (int s = 1; s <= n; ++s) {
        auto ss = rd.next("dropped");
        int cls = 0;
        if (!(ss >> cls) || cls != s) rd.fail("dropped lines must list classes in order");
        int idx = 0;
        while (ss >> idx) meta.dropped[static_cast<std::size_t>(s - 1)].push_back(idx);
    }
    Eigen::Index rows = 0, cols = 0;
    if (!(rd.next("dims") >> rows >> cols) || rows != n - 1 || cols < 1) rd.fail("bad dims");
    Eigen::MatrixXd coef(rows, cols);
    for (Eigen::Index j = 0; j < rows; ++j) coef.row(j) = rd.row(cols);
    Eigen::VectorXd bias(rows);
    {
        auto ss = rd.next("bias");
        for (Eigen::Index j = 0; j < rows; ++j) {
            if (!(ss >> bias(j))) rd.fail("bad bias");
        }
    }
    if (mode == "primal") {
        trained_classifier clf(n, std::move(coef), std::move(bias));
        clf.meta = std::move(meta);
        return clf;
    }
    kernel_spec k;
    try {
        k = parse_kernel_spec(kernel_text);
    } catch (const std::invalid_argument& e) {
        rd.fail(e.what());
    }
    Eigen::Index ns = 0, d = 0;
    if (!(rd.next("support") >> ns >> d) || ns != cols || d < 1) rd.fail("bad support header");
    Eigen::MatrixXd sv(ns, d);
    for (Eigen::Index i = 0; i < ns; ++i) sv.row(i) = rd.row(d);
    trained_classifier clf(n, k, std::move(coef), std::move(bias), std::move(sv));
    clf.meta = std::move(meta);
    return clf;
}

inline void save_model(const std::string& path, const trained_classifier& clf) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_model(out, clf);
}

inline trained_classifier load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_model(in);
}

}  // namespace ccsvm

#endif  // CCSVM_MODEL_IO_HPP_
