/**
 * @file experiments.hpp
 * @brief Grid search, replicated experiments and report tables.
 */
#ifndef CCSVM_EXPERIMENTS_HPP_
#define CCSVM_EXPERIMENTS_HPP_
#pragma once

#include "ccsvm/data.hpp"
#include "ccsvm/kernels.hpp"
#include "ccsvm/models.hpp"
#include "ccsvm/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ccsvm {

// ---------------------------------------------------------------------------
// key = value configuration files

class config_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

using config_map = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

inline std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i <= s.size()) {
        const auto j = std::min(s.find(',', i), s.size());
        auto item = trim(s.substr(i, j - i));
        if (!item.empty()) out.push_back(std::move(item));
        i = j + 1;
    }
    return out;
}

}  // namespace detail

/// Reads `key = value` lines; `#` starts a comment. Later keys override earlier ones.
inline config_map parse_config(std::istream& in) {
    config_map out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw config_error("config line " + std::to_string(line_no) + ": expected key = value");
        }
        auto key = detail::trim(std::string_view(body).substr(0, eq));
        if (key.empty()) throw config_error("config line " + std::to_string(line_no) + ": empty key");
        out[key] = detail::trim(std::string_view(body).substr(eq + 1));
    }
    return out;
}

inline config_map load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config '" + path + "'");
    return parse_config(in);
}

// ---------------------------------------------------------------------------
// grid search

enum class selection_kind { kfold, loo };

struct selection_rule {
    selection_kind kind = selection_kind::kfold;
    int folds = 5;
};

/// Largest training set for which leave-one-out selection is accepted.
inline constexpr std::size_t loo_max_points = 120;

/// Fold id per point: each class is shuffled and dealt round-robin over k folds.
inline std::vector<int> stratified_folds(const dataset& data, int k, rng& r) {
    if (k < 2) throw std::invalid_argument("stratified_folds: need at least 2 folds");
    std::vector<int> fold(data.size(), 0);
    int next = 0;
    for (int s = 1; s <= data.n_classes(); ++s) {
        auto idx = data.class_indices(s);
        for (std::size_t i = idx.size(); i > 1; --i) {
            std::swap(idx[i - 1], idx[r.below(i)]);
        }
        for (int i : idx) {
            fold[static_cast<std::size_t>(i)] = next;
            next = (next + 1) % k;
        }
    }
    return fold;
}

inline std::vector<int> selection_folds(const dataset& data, const selection_rule& rule, rng& r) {
    if (rule.kind == selection_kind::loo) {
        if (data.size() > loo_max_points) {
            throw std::invalid_argument("leave-one-out selection is limited to " + std::to_string(loo_max_points) +
                                        " training points; use kfold");
        }
        std::vector<int> fold(data.size());
        std::iota(fold.begin(), fold.end(), 0);
        return fold;
    }
    return stratified_folds(data, rule.folds, r);
}

/// Ordering key for ties: regularisation weight, then kernel complexity.
inline std::pair<double, std::pair<int, double>> tie_key(const train_spec& s) {
    double reg = 0.0;
    if (s.form == formulation::soft) reg = s.C;
    if (s.form == formulation::cc_penalty && !s.rho.empty()) reg = *std::max_element(s.rho.begin(), s.rho.end());
    std::pair<int, double> kern{0, 0.0};
    if (s.kernel) {
        switch (s.kernel->kind) {
            case kernel_kind::linear:
                break;
            case kernel_kind::polynomial:
                kern = {1, static_cast<double>(s.kernel->degree)};
                break;
            case kernel_kind::rbf:
                kern = {2, s.kernel->gamma};
                break;
        }
    }
    return {reg, kern};
}

struct grid_result {
    std::size_t best = 0;
    std::vector<double> errors;  ///< validation error rate per candidate
};

/**
 * @brief Picks the candidate with the lowest validation error on `folds`
 *        (fold id per point). Ties go to the smaller C (or rho), then the
 *        simpler kernel, then the earlier candidate.
 */
inline grid_result grid_search(const dataset& train_data, const std::vector<train_spec>& candidates,
                               const std::vector<int>& folds, const cc_settings& settings, int threads = 1) {
    if (candidates.empty()) throw std::invalid_argument("grid_search: empty grid");
    if (train_data.empty()) throw std::invalid_argument("grid_search: empty training set");
    if (folds.size() != train_data.size()) throw std::invalid_argument("grid_search: fold ids do not match data");
    const int n_folds = *std::max_element(folds.begin(), folds.end()) + 1;

    // one Gram per distinct kernel
    std::vector<kernel_spec> kernels;
    std::vector<int> kernel_of(candidates.size(), -1);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (!candidates[c].kernel) continue;
        auto it = std::find(kernels.begin(), kernels.end(), *candidates[c].kernel);
        if (it == kernels.end()) {
            kernels.push_back(*candidates[c].kernel);
            it = kernels.end() - 1;
        }
        kernel_of[c] = static_cast<int>(it - kernels.begin());
    }
    const Eigen::MatrixXd X = train_data.features();
    std::vector<gram_matrix> grams(kernels.size());
    parallel_for(kernels.size(), threads, [&](std::size_t k) { grams[k] = gram(kernels[k], X); });

    std::vector<std::vector<int>> train_idx(static_cast<std::size_t>(n_folds));
    std::vector<std::vector<int>> test_idx(static_cast<std::size_t>(n_folds));
    for (std::size_t i = 0; i < folds.size(); ++i) {
        for (int f = 0; f < n_folds; ++f) {
            (folds[i] == f ? test_idx : train_idx)[static_cast<std::size_t>(f)].push_back(static_cast<int>(i));
        }
    }

    const std::size_t jobs = candidates.size() * static_cast<std::size_t>(n_folds);
    std::vector<int> wrong(jobs, 0);
    parallel_for(jobs, threads, [&](std::size_t job) {
        const std::size_t c = job / static_cast<std::size_t>(n_folds);
        const auto f = static_cast<std::size_t>(job % static_cast<std::size_t>(n_folds));
        if (test_idx[f].empty()) return;
        const dataset tr = train_data.subset(train_idx[f]);
        const dataset te = train_data.subset(test_idx[f]);
        train_spec spec = candidates[c];
        std::optional<gram_matrix> g;
        if (kernel_of[c] >= 0) {
            g = grams[static_cast<std::size_t>(kernel_of[c])].subset(train_idx[f]);
            g->ridge = ridge_for(g->values, spec.ridge);
        }
        try {
            const auto clf = train(tr, spec, settings, g ? &*g : nullptr);
            int bad = 0;
            for (const auto& p : te.points()) bad += clf.predict(p.x) != p.y ? 1 : 0;
            wrong[job] = bad;
        } catch (const infeasible_error&) {
            wrong[job] = static_cast<int>(te.size());
        }
    });

    grid_result out;
    out.errors.assign(candidates.size(), 0.0);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        int total = 0;
        for (int f = 0; f < n_folds; ++f) total += wrong[c * static_cast<std::size_t>(n_folds) + static_cast<std::size_t>(f)];
        out.errors[c] = static_cast<double>(total) / static_cast<double>(train_data.size());
    }
    for (std::size_t c = 1; c < candidates.size(); ++c) {
        const auto& b = out.best;
        if (out.errors[c] < out.errors[b] ||
            (out.errors[c] == out.errors[b] && tie_key(candidates[c]) < tie_key(candidates[b]))) {
            out.best = c;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// experiment configuration

/// Report columns in table order.
inline const std::vector<std::string>& kernel_columns() {
    static const std::vector<std::string> cols{"LIN", "d=2", "d=4", "d=6", "RBF"};
    return cols;
}

struct experiment_config {
    std::string source = "binary:1";  ///< binary:<1-4>, threeclass, or csv:<path>
    bool header = false;
    int n_per_class = 100;
    int n_train = 30;
    std::vector<std::string> models{"CS", "CC"};
    std::vector<std::string> kernels = kernel_columns();
    std::vector<double> gamma_grid{1e-2, 1e-1, 1.0, 1e1, 1e2};
    std::vector<double> c_grid{1e-2, 1e-1, 1.0, 1e1, 1e2};  ///< values of C / N
    std::string alpha_mode = "penalty";                    ///< penalty | fixed
    std::vector<double> alpha{0.1};                        ///< fixed mode; one value or one per class
    std::vector<double> rho_grid{1.0, 10.0, 100.0};  ///< penalty mode; each value applied to every class
    std::string selection = "kfold";                       ///< kfold | loo
    int folds = 5;
    int replications = 10;
    std::uint64_t seed = 1;
    int mislabel_source = 0;  ///< 0 disables injection
    double mislabel_prob = 0.0;
    std::vector<int> mislabel_targets;
    int threads = 1;
    long node_limit = 2000;
    long cv_node_limit = 200;
    double time_limit = 7200.0;
    double gap_tol = 1e-6;

    /// Canonical key = value lines, in a fixed order.
    [[nodiscard]] std::vector<std::pair<std::string, std::string>> entries() const {
        auto join_d = [](const std::vector<double>& v) {
            std::string s;
            for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + detail::format_double(v[i]);
            return s;
        };
        auto join_s = [](const std::vector<std::string>& v) {
            std::string s;
            for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
            return s;
        };
        std::string targets;
        for (std::size_t i = 0; i < mislabel_targets.size(); ++i) {
            targets += (i ? "," : "") + std::to_string(mislabel_targets[i]);
        }
        return {{"source", source},
                {"header", header ? "true" : "false"},
                {"n_per_class", std::to_string(n_per_class)},
                {"n_train", std::to_string(n_train)},
                {"models", join_s(models)},
                {"kernels", join_s(kernels)},
                {"gamma_grid", join_d(gamma_grid)},
                {"c_grid", join_d(c_grid)},
                {"alpha_mode", alpha_mode},
                {"alpha", join_d(alpha)},
                {"rho_grid", join_d(rho_grid)},
                {"selection", selection},
                {"folds", std::to_string(folds)},
                {"replications", std::to_string(replications)},
                {"seed", std::to_string(seed)},
                {"mislabel_source", std::to_string(mislabel_source)},
                {"mislabel_prob", detail::format_double(mislabel_prob)},
                {"mislabel_targets", targets},
                {"node_limit", std::to_string(node_limit)},
                {"cv_node_limit", std::to_string(cv_node_limit)},
                {"time_limit", detail::format_double(time_limit)},
                {"gap_tol", detail::format_double(gap_tol)}};
    }

    void validate() const {
        if (replications < 1) throw config_error("replications must be at least 1");
        if (models.empty() && kernels.empty()) return;
        for (const auto& m : models) {
            if (m != "CS" && m != "CC") throw config_error("unknown model '" + m + "' (expected CS or CC)");
        }
        for (const auto& k : kernels) {
            if (std::find(kernel_columns().begin(), kernel_columns().end(), k) == kernel_columns().end()) {
                throw config_error("unknown kernel column '" + k + "'");
            }
        }
        if (std::find(kernels.begin(), kernels.end(), "RBF") != kernels.end() && gamma_grid.empty()) {
            throw config_error("gamma_grid is empty");
        }
        for (double g : gamma_grid) {
            if (!(g > 0.0)) throw config_error("gamma values must be positive");
        }
        if (c_grid.empty() || rho_grid.empty()) throw config_error("c_grid and rho_grid must be nonempty");
        for (double c : c_grid) {
            if (!(c > 0.0)) throw config_error("c_grid values must be positive");
        }
        for (double r : rho_grid) {
            if (!(r > 0.0)) throw config_error("rho_grid values must be positive");
        }
        if (alpha_mode != "penalty" && alpha_mode != "fixed") throw config_error("alpha_mode must be penalty or fixed");
        for (double a : alpha) {
            if (!(a >= 0.0 && a < 1.0)) throw config_error("alpha values must lie in [0, 1)");
        }
        if (selection != "kfold" && selection != "loo") throw config_error("selection must be kfold or loo");
        if (folds < 2) throw config_error("folds must be at least 2");
        if (n_train < 1) throw config_error("n_train must be positive");
        if (!(mislabel_prob >= 0.0 && mislabel_prob <= 1.0)) throw config_error("mislabel_prob must lie in [0, 1]");
        if (mislabel_prob > 0.0 && (mislabel_source < 1 || mislabel_targets.empty())) {
            throw config_error("mislabel injection needs mislabel_source and mislabel_targets");
        }
        if (threads < 1) throw config_error("threads must be positive");
    }
};

namespace detail {

inline double cfg_double(const std::string& key, const std::string& v) {
    if (auto d = to_double(v)) return *d;
    throw config_error("'" + key + "': expected a number, got '" + v + "'");
}

inline long long cfg_integer(const std::string& key, const std::string& v) {
    if (auto d = to_integer(v)) return *d;
    throw config_error("'" + key + "': expected an integer, got '" + v + "'");
}

inline bool cfg_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw config_error("'" + key + "': expected true or false, got '" + v + "'");
}

inline std::vector<double> cfg_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(cfg_double(key, item));
    return out;
}

}  // namespace detail

/// Applies `values` on top of `base`; unknown keys are errors.
inline experiment_config apply_config(experiment_config cfg, const config_map& values) {
    using namespace detail;
    for (const auto& [key, v] : values) {
        if (key == "source") {
            cfg.source = v;
        } else if (key == "header") {
            cfg.header = cfg_bool(key, v);
        } else if (key == "n_per_class") {
            cfg.n_per_class = static_cast<int>(cfg_integer(key, v));
        } else if (key == "n_train") {
            cfg.n_train = static_cast<int>(cfg_integer(key, v));
        } else if (key == "models") {
            cfg.models = split_list(v);
        } else if (key == "kernels") {
            cfg.kernels = split_list(v);
        } else if (key == "gamma_grid") {
            cfg.gamma_grid = cfg_doubles(key, v);
        } else if (key == "c_grid") {
            cfg.c_grid = cfg_doubles(key, v);
        } else if (key == "alpha_mode") {
            cfg.alpha_mode = v;
        } else if (key == "alpha") {
            cfg.alpha = cfg_doubles(key, v);
        } else if (key == "rho_grid" || key == "rho") {
            cfg.rho_grid = cfg_doubles(key, v);
        } else if (key == "selection") {
            cfg.selection = v;
        } else if (key == "folds") {
            cfg.folds = static_cast<int>(cfg_integer(key, v));
        } else if (key == "replications") {
            cfg.replications = static_cast<int>(cfg_integer(key, v));
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(cfg_integer(key, v));
        } else if (key == "mislabel_source") {
            cfg.mislabel_source = static_cast<int>(cfg_integer(key, v));
        } else if (key == "mislabel_prob") {
            cfg.mislabel_prob = cfg_double(key, v);
        } else if (key == "mislabel_targets") {
            cfg.mislabel_targets.clear();
            for (const auto& t : split_list(v)) cfg.mislabel_targets.push_back(static_cast<int>(cfg_integer(key, t)));
        } else if (key == "threads") {
            cfg.threads = static_cast<int>(cfg_integer(key, v));
        } else if (key == "node_limit") {
            cfg.node_limit = static_cast<long>(cfg_integer(key, v));
        } else if (key == "cv_node_limit") {
            cfg.cv_node_limit = static_cast<long>(cfg_integer(key, v));
        } else if (key == "time_limit") {
            cfg.time_limit = cfg_double(key, v);
        } else if (key == "gap_tol") {
            cfg.gap_tol = cfg_double(key, v);
        } else {
            throw config_error("unknown config key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// data sources

/// Synthetic data drawn from `r`, or the CSV file named by the source.
inline dataset make_source_data(const experiment_config& cfg, rng& r) {
    const auto& src = cfg.source;
    if (src.rfind("binary:", 0) == 0) {
        const auto k = detail::to_integer(std::string_view(src).substr(7));
        if (!k) throw config_error("bad source '" + src + "'");
        return gen_binary_instance(static_cast<int>(*k), cfg.n_per_class, r);
    }
    if (src == "threeclass") return gen_threeclass(cfg.n_per_class, r);
    if (src.rfind("csv:", 0) == 0) return load_csv(src.substr(4), cfg.header);
    throw config_error("unknown source '" + src + "' (binary:<k>, threeclass or csv:<path>)");
}

/// Candidate specs of one model for one report column.
inline std::vector<train_spec> column_candidates(const experiment_config& cfg, const std::string& model,
                                                 const std::string& column, int n_classes, std::size_t n_train) {
    std::vector<std::optional<kernel_spec>> kernels;
    if (column == "LIN") {
        kernels.emplace_back(std::nullopt);
    } else if (column == "RBF") {
        for (double g : cfg.gamma_grid) kernels.emplace_back(kernel_spec::rbf(g));
    } else {
        kernels.emplace_back(kernel_spec::polynomial(std::stoi(column.substr(2))));
    }
    std::vector<train_spec> out;
    const auto n = static_cast<std::size_t>(n_classes);
    for (const auto& k : kernels) {
        if (model == "CS") {
            for (double c : cfg.c_grid) {
                train_spec s;
                s.form = formulation::soft;
                s.kernel = k;
                s.C = c * static_cast<double>(n_train);
                out.push_back(s);
            }
        } else if (cfg.alpha_mode == "penalty") {
            for (double r : cfg.rho_grid) {
                train_spec s;
                s.form = formulation::cc_penalty;
                s.kernel = k;
                s.rho.assign(n, r);
                out.push_back(s);
            }
        } else {
            train_spec s;
            s.form = formulation::cc;
            s.kernel = k;
            s.alpha = cfg.alpha.size() == 1 ? std::vector<double>(n, cfg.alpha[0]) : cfg.alpha;
            out.push_back(s);
        }
    }
    return out;
}

/// Short description of a spec for reports, e.g. "rbf:gamma=0.1 C=3".
inline std::string describe(const train_spec& s) {
    std::string out = s.kernel ? to_string(*s.kernel) : std::string("linear");
    switch (s.form) {
        case formulation::soft:
            out += " C=" + detail::format_double(s.C);
            break;
        case formulation::cc:
            out += " alpha=";
            for (std::size_t i = 0; i < s.alpha.size(); ++i) out += (i ? "/" : "") + detail::format_double(s.alpha[i]);
            break;
        case formulation::cc_penalty:
            out += " rho=";
            for (std::size_t i = 0; i < s.rho.size(); ++i) out += (i ? "/" : "") + detail::format_double(s.rho[i]);
            break;
        case formulation::hard:
            break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// runs and reports

struct run_record {
    int replication = 0;
    std::uint64_t seed = 0;
    std::string model;
    std::string column;
    std::string selected;
    double cv_error = 0.0;
    double accuracy = 0.0;
    std::vector<double> class_accuracy;
    std::string status;
    long nodes = 0;
    std::vector<int> dropped;            ///< per class
    std::vector<double> train_violation;  ///< per class, dropped / N_s
    int flips = 0;
    bool flagged = false;  ///< final solve stopped at a time or node limit
    double seconds = 0.0;
};

struct report_cell {
    std::string model;
    std::string column;
    int runs = 0;
    double mean = 0.0;
    std::optional<double> stddev;  ///< present iff runs >= 2
    std::vector<double> class_mean;
    int flagged = 0;
    double seconds = 0.0;
};

struct report {
    experiment_config config;
    int n_classes = 2;
    std::vector<run_record> runs;  ///< ordered by (replication, model, column)
    std::vector<report_cell> cells;
};

/// Sample mean and (n-1) standard deviation.
inline std::pair<double, std::optional<double>> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::nullopt};
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    if (v.size() < 2) return {m, std::nullopt};
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

inline std::vector<report_cell> aggregate(const experiment_config& cfg, const std::vector<run_record>& runs,
                                          int n_classes) {
    std::vector<report_cell> cells;
    for (const auto& model : cfg.models) {
        for (const auto& col : kernel_columns()) {
            if (std::find(cfg.kernels.begin(), cfg.kernels.end(), col) == cfg.kernels.end()) continue;
            report_cell cell;
            cell.model = model;
            cell.column = col;
            std::vector<double> acc;
            std::vector<std::vector<double>> per(static_cast<std::size_t>(n_classes));
            for (const auto& r : runs) {
                if (r.model != model || r.column != col) continue;
                cell.flagged += r.flagged ? 1 : 0;
                cell.seconds += r.seconds;
                if (std::isnan(r.accuracy)) continue;  // no classifier; counted as flagged only
                acc.push_back(r.accuracy);
                for (std::size_t s = 0; s < r.class_accuracy.size(); ++s) {
                    if (!std::isnan(r.class_accuracy[s])) per[s].push_back(r.class_accuracy[s]);
                }
            }
            cell.runs = static_cast<int>(acc.size());
            std::tie(cell.mean, cell.stddev) = mean_std(acc);
            for (const auto& p : per) cell.class_mean.push_back(mean_std(p).first);
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

/**
 * @brief Runs every replication: draw or load data, split, inject mislabels,
 *        grid-search each (model, column), train on the full training split
 *        and score the test split.
 *
 * Replication r uses seed cfg.seed + r. Replications run in parallel and are
 * merged by index, so results do not depend on cfg.threads.
 */
inline report run_experiment(const experiment_config& cfg, bool verbose = false) {
    cfg.validate();
    std::optional<dataset> fixed;
    if (cfg.source.rfind("csv:", 0) == 0) {
        rng unused(cfg.seed);
        fixed = make_source_data(cfg, unused);
    }

    std::vector<std::string> columns;
    for (const auto& col : kernel_columns()) {
        if (std::find(cfg.kernels.begin(), cfg.kernels.end(), col) != cfg.kernels.end()) columns.push_back(col);
    }

    cc_settings final_settings;
    final_settings.node_limit = cfg.node_limit;
    final_settings.time_limit = cfg.time_limit;
    final_settings.gap_tol = cfg.gap_tol;
    cc_settings cv_settings = final_settings;
    cv_settings.node_limit = cfg.cv_node_limit;
    const selection_rule rule{cfg.selection == "loo" ? selection_kind::loo : selection_kind::kfold, cfg.folds};

    std::vector<std::vector<run_record>> per_rep(static_cast<std::size_t>(cfg.replications));
    int n_classes = fixed ? fixed->n_classes() : 0;
    std::vector<int> rep_classes(static_cast<std::size_t>(cfg.replications), 0);

    parallel_for(per_rep.size(), cfg.threads, [&](std::size_t rep) {
        const std::uint64_t seed = cfg.seed + rep;
        rng r(seed);
        const dataset all = fixed ? *fixed : make_source_data(cfg, r);
        rep_classes[rep] = all.n_classes();
        auto split = split_per_class(all, cfg.n_train, r);
        dataset train_set = std::move(split.train);
        int flips = 0;
        if (cfg.mislabel_prob > 0.0) {
            auto inj = inject_mislabels(train_set, cfg.mislabel_source, cfg.mislabel_prob, cfg.mislabel_targets, r);
            train_set = std::move(inj.data);
            flips = static_cast<int>(inj.flips.size());
        }
        const auto folds = selection_folds(train_set, rule, r);
        const auto sizes = train_set.class_sizes();
        for (const auto& model : cfg.models) {
            for (const auto& col : columns) {
                const auto t0 = std::chrono::steady_clock::now();
                const auto cands = column_candidates(cfg, model, col, all.n_classes(), train_set.size());
                const auto gs = grid_search(train_set, cands, folds, cv_settings);
                const auto& spec = cands[gs.best];
                run_record rec;
                rec.replication = static_cast<int>(rep);
                rec.seed = seed;
                rec.model = model;
                rec.column = col;
                rec.selected = describe(spec);
                rec.cv_error = gs.errors[gs.best];
                rec.flips = flips;
                try {
                    const auto clf = train(train_set, spec, final_settings);
                    const auto acc = accuracy(clf, split.test);
                    rec.accuracy = acc.overall;
                    rec.class_accuracy = acc.per_class;
                    rec.status = clf.meta.status;
                    rec.nodes = clf.meta.nodes;
                    for (std::size_t s = 0; s < clf.meta.dropped.size(); ++s) {
                        rec.dropped.push_back(static_cast<int>(clf.meta.dropped[s].size()));
                        rec.train_violation.push_back(static_cast<double>(clf.meta.dropped[s].size()) /
                                                      static_cast<double>(sizes[s]));
                    }
                    rec.flagged = rec.status == "time_limit" || rec.status == "node_limit" || rec.status == "max_iter";
                } catch (const infeasible_error&) {
                    rec.status = "infeasible";
                    rec.flagged = true;
                    rec.class_accuracy.assign(static_cast<std::size_t>(all.n_classes()),
                                              std::numeric_limits<double>::quiet_NaN());
                    rec.accuracy = std::numeric_limits<double>::quiet_NaN();
                }
                rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                if (verbose) {
                    std::fprintf(stderr, "[experiment] rep %zu %s %s %s acc %.4f (%.1fs)\n", rep, model.c_str(),
                                 col.c_str(), rec.selected.c_str(), rec.accuracy, rec.seconds);
                }
                per_rep[rep].push_back(std::move(rec));
            }
        }
    });

    report out;
    out.config = cfg;
    if (n_classes == 0) n_classes = rep_classes.empty() ? 2 : rep_classes.front();
    out.n_classes = n_classes;
    for (auto& rep : per_rep) {
        for (auto& r : rep) out.runs.push_back(std::move(r));
    }
    out.cells = aggregate(cfg, out.runs, n_classes);
    return out;
}

namespace detail {

inline std::string csv_number(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string percent_cell(double mean, const std::optional<double>& sd) {
    if (std::isnan(mean)) return "n/a";
    char buf[64];
    if (sd) {
        std::snprintf(buf, sizeof buf, "%.1f%%(%.1f%%)", 100.0 * mean, 100.0 * *sd);
    } else {
        std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * mean);
    }
    return buf;
}

}  // namespace detail

/**
 * @brief Markdown tables: overall accuracy, per-class accuracy (more than two
 *        classes), wall time, and the configuration that produced them.
 *
 * Cells with runs stopped at a solver limit are marked with `*`.
 */
inline std::string emit_markdown(const report& r) {
    std::vector<std::string> columns;
    for (const auto& col : kernel_columns()) {
        if (std::find(r.config.kernels.begin(), r.config.kernels.end(), col) != r.config.kernels.end()) {
            columns.push_back(col);
        }
    }
    auto find_cell = [&](const std::string& m, const std::string& c) -> const report_cell* {
        for (const auto& cell : r.cells) {
            if (cell.model == m && cell.column == c) return &cell;
        }
        return nullptr;
    };
    std::ostringstream out;
    auto header = [&](const std::string& first) {
        out << "| " << first << " |";
        for (const auto& c : columns) out << ' ' << c << " |";
        out << "\n|---|";
        for (std::size_t i = 0; i < columns.size(); ++i) out << "---|";
        out << '\n';
    };
    out << "## Accuracy\n\n";
    header("Model");
    bool any_flag = false;
    for (const auto& m : r.config.models) {
        out << "| " << m << " |";
        for (const auto& c : columns) {
            const auto* cell = find_cell(m, c);
            std::string text = cell ? detail::percent_cell(cell->mean, cell->stddev) : "n/a";
            if (cell && cell->flagged > 0) {
                text += '*';
                any_flag = true;
            }
            out << ' ' << text << " |";
        }
        out << '\n';
    }
    if (any_flag) out << "\n`*` some runs stopped at a solver limit (see per-run CSV).\n";

    if (r.n_classes > 2) {
        out << "\n## Accuracy per class\n\n";
        out << "| Class | Model |";
        for (const auto& c : columns) out << ' ' << c << " |";
        out << "\n|---|---|";
        for (std::size_t i = 0; i < columns.size(); ++i) out << "---|";
        out << '\n';
        for (int s = 1; s <= r.n_classes; ++s) {
            for (const auto& m : r.config.models) {
                out << "| " << s << " | " << m << " |";
                for (const auto& c : columns) {
                    const auto* cell = find_cell(m, c);
                    const double v = cell && cell->class_mean.size() >= static_cast<std::size_t>(s)
                                         ? cell->class_mean[static_cast<std::size_t>(s - 1)]
                                         : std::numeric_limits<double>::quiet_NaN();
                    out << ' ' << detail::percent_cell(v, std::nullopt) << " |";
                }
                out << '\n';
            }
        }
    }

    out << "\n## Wall time (seconds, total over runs)\n\n";
    header("Model");
    for (const auto& m : r.config.models) {
        out << "| " << m << " |";
        for (const auto& c : columns) {
            const auto* cell = find_cell(m, c);
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.1f", cell ? cell->seconds : 0.0);
            out << ' ' << buf << " |";
        }
        out << '\n';
    }

    out << "\n## Configuration\n\n";
    for (const auto& [k, v] : r.config.entries()) out << "- " << k << " = " << v << '\n';
    out << "- replication seeds = " << r.config.seed << ".." << (r.config.seed + r.config.replications - 1) << '\n';
    if (r.config.alpha_mode == "penalty") {
        out << "- CC drops are priced at rho per unit fraction of a class; rho is selected from rho_grid\n";
    }
    out << "- hyperparameters selected by "
        << (r.config.selection == "loo" ? std::string("leave-one-out")
                                         : std::to_string(r.config.folds) + "-fold stratified cross-validation")
        << " on the training split\n";
    return out.str();
}

/// One row per (model, column) with unrounded numbers; no timing, so reruns are byte-identical.
inline std::string emit_csv(const report& r) {
    std::ostringstream out;
    out << "model,kernel,runs,mean,std";
    for (int s = 1; s <= r.n_classes; ++s) out << ",class_" << s;
    out << ",flagged\n";
    for (const auto& cell : r.cells) {
        out << cell.model << ',' << cell.column << ',' << cell.runs << ',' << detail::csv_number(cell.mean) << ','
            << (cell.stddev ? detail::csv_number(*cell.stddev) : "");
        for (int s = 0; s < r.n_classes; ++s) {
            out << ','
                << (static_cast<std::size_t>(s) < cell.class_mean.size()
                        ? detail::csv_number(cell.class_mean[static_cast<std::size_t>(s)])
                        : "");
        }
        out << ',' << cell.flagged << '\n';
    }
    return out.str();
}

/// Per-run records behind the summary cells.
inline std::string emit_runs_csv(const report& r) {
    std::ostringstream out;
    out << "replication,seed,model,kernel,selected,cv_error,accuracy";
    for (int s = 1; s <= r.n_classes; ++s) out << ",class_" << s;
    out << ",status,nodes,flips";
    for (int s = 1; s <= r.n_classes; ++s) out << ",dropped_" << s;
    out << '\n';
    for (const auto& run : r.runs) {
        out << run.replication << ',' << run.seed << ',' << run.model << ',' << run.column << ',' << run.selected
            << ',' << detail::csv_number(run.cv_error) << ',' << detail::csv_number(run.accuracy);
        for (int s = 0; s < r.n_classes; ++s) {
            out << ','
                << (static_cast<std::size_t>(s) < run.class_accuracy.size()
                        ? detail::csv_number(run.class_accuracy[static_cast<std::size_t>(s)])
                        : "");
        }
        out << ',' << run.status << ',' << run.nodes << ',' << run.flips;
        for (int s = 0; s < r.n_classes; ++s) {
            out << ',' << (static_cast<std::size_t>(s) < run.dropped.size() ? run.dropped[static_cast<std::size_t>(s)] : 0);
        }
        out << '\n';
    }
    return out.str();
}

/// Parses the output of emit_csv back into cells.
inline std::vector<report_cell> read_summary_csv(std::istream& in) {
    std::vector<report_cell> cells;
    std::string line;
    if (!std::getline(in, line)) return cells;
    const auto head = detail::split_list(line);
    const std::size_t n_class_cols = head.size() >= 6 ? head.size() - 6 : 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t i = 0;
        while (i <= line.size()) {
            const auto j = std::min(line.find(',', i), line.size());
            f.push_back(line.substr(i, j - i));
            i = j + 1;
        }
        if (f.size() != head.size()) throw std::runtime_error("summary csv: ragged row");
        report_cell c;
        c.model = f[0];
        c.column = f[1];
        c.runs = std::stoi(f[2]);
        c.mean = f[3].empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[3]);
        if (!f[4].empty()) c.stddev = std::stod(f[4]);
        for (std::size_t s = 0; s < n_class_cols; ++s) {
            c.class_mean.push_back(f[5 + s].empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[5 + s]));
        }
        c.flagged = std::stoi(f.back());
        cells.push_back(std::move(c));
    }
    return cells;
}

}  // namespace ccsvm

#endif  // CCSVM_EXPERIMENTS_HPP_
