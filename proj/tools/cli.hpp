// Command-line front end. run_cli() is separate from main() so tests can drive it.
#ifndef CCSVM_TOOLS_CLI_HPP_
#define CCSVM_TOOLS_CLI_HPP_
#pragma once

#include "ccsvm/ccsvm.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ccsvm::cli {

enum exit_code : int { ok = 0, usage = 1, data_error = 2, solver_failure = 3 };

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct data_failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Runs `fn`, turning any exception into a data_failure with context.
template <class F>
auto load_or_fail(const std::string& what, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw data_failure(what + ": " + e.what());
    }
}

struct global_options {
    std::optional<std::uint64_t> seed;
    std::optional<double> time_limit;
    bool verbose = false;
    std::string config;
    std::vector<std::string> set;
    std::optional<int> threads;
};

inline config_map collect_config(const global_options& g) {
    config_map m;
    if (!g.config.empty()) {
        m = load_config(g.config);
    }
    for (const auto& kv : g.set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw usage_error("--set expects key=value, got '" + kv + "'");
        m[detail::trim(std::string_view(kv).substr(0, eq))] = detail::trim(std::string_view(kv).substr(eq + 1));
    }
    if (g.seed) m["seed"] = std::to_string(*g.seed);
    if (g.time_limit) m["time_limit"] = detail::format_double(*g.time_limit);
    if (g.threads) m["threads"] = std::to_string(*g.threads);
    return m;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw data_failure("cannot write '" + path + "'");
    f << text;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Chance-constrained conic-segmentation SVM toolkit", "ccsvm"};
    app.require_subcommand(1);
    app.fallthrough();
    global_options g;
    app.add_option("--seed", g.seed, "base random seed");
    app.add_option("--time-limit", g.time_limit, "solver time limit in seconds");
    app.add_flag("--verbose,-v", g.verbose, "solver and experiment progress on stderr");
    app.add_option("--config", g.config, "key = value configuration file");
    app.add_option("--set", g.set, "configuration override key=value (repeatable)");
    app.add_option("--threads", g.threads, "worker threads");

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic data set as CSV");
    std::string gen_source = "binary:1";
    int gen_n = 100;
    std::string gen_out;
    gen->add_option("--source", gen_source, "binary:<1-4> or threeclass")->capture_default_str();
    gen->add_option("--n-per-class", gen_n, "points per class")->capture_default_str()->check(CLI::PositiveNumber);
    gen->add_option("--out,-o", gen_out, "output file (default stdout)");

    // train
    auto* tr = app.add_subcommand("train", "train a classifier and write it to a model file");
    std::string tr_data, tr_out, tr_form = "cc_penalty", tr_kernel = "none";
    bool tr_header = false;
    double tr_C = 1.0;
    std::vector<double> tr_alpha, tr_rho;
    long tr_nodes = 0;
    tr->add_option("--data,-d", tr_data, "labeled CSV")->required();
    tr->add_flag("--header", tr_header, "skip the first line");
    tr->add_option("--formulation,-f", tr_form, "hard | soft | cc | cc_penalty")->capture_default_str();
    tr->add_option("--kernel,-k", tr_kernel, "none (primal linear), linear, poly:d=<n>, rbf:gamma=<g>")
        ->capture_default_str();
    tr->add_option("--C", tr_C, "soft-margin weight")->capture_default_str();
    tr->add_option("--alpha", tr_alpha, "cc: one value or one per class")->delimiter(',');
    tr->add_option("--rho", tr_rho, "cc_penalty: one value or one per class (default 1)")->delimiter(',');
    tr->add_option("--node-limit", tr_nodes, "branch-and-bound node limit (0 = none)")->capture_default_str();
    tr->add_option("--out,-o", tr_out, "model file")->required();

    // predict
    auto* pr = app.add_subcommand("predict", "print the predicted class of each row");
    std::string pr_model, pr_data;
    bool pr_header = false, pr_labeled = false;
    pr->add_option("--model,-m", pr_model, "model file")->required();
    pr->add_option("--data,-d", pr_data, "CSV of features")->required();
    pr->add_flag("--header", pr_header, "skip the first line");
    pr->add_flag("--labeled", pr_labeled, "rows end with a label column, which is ignored");

    // eval
    auto* ev = app.add_subcommand("eval", "accuracy of a model on labeled data");
    std::string ev_model, ev_data;
    bool ev_header = false;
    ev->add_option("--model,-m", ev_model, "model file")->required();
    ev->add_option("--data,-d", ev_data, "labeled CSV")->required();
    ev->add_flag("--header", ev_header, "skip the first line");

    // grid
    auto* gr = app.add_subcommand("grid", "grid search for one model and kernel column");
    std::string gr_data, gr_model = "CC", gr_column = "RBF";
    bool gr_header = false;
    gr->add_option("--data,-d", gr_data, "labeled CSV")->required();
    gr->add_flag("--header", gr_header, "skip the first line");
    gr->add_option("--model", gr_model, "CS or CC")->capture_default_str();
    gr->add_option("--column", gr_column, "LIN, d=2, d=4, d=6 or RBF")->capture_default_str();

    // experiment
    auto* ex = app.add_subcommand("experiment", "replicated experiment with report tables");
    std::string ex_out;
    ex->add_option("--out,-o", ex_out, "write <prefix>.md, <prefix>.csv and <prefix>.runs.csv");

    std::vector<std::string> argv_store{"ccsvm"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << "run 'ccsvm --help' for usage\n";
        return usage;
    }

    cc_settings solver;
    solver.verbose = g.verbose;
    if (g.time_limit) solver.time_limit = *g.time_limit;
    if (g.threads) solver.threads = *g.threads;

    try {
        if (gen->parsed()) {
            rng r(g.seed.value_or(1));
            experiment_config cfg;
            cfg.source = gen_source;
            cfg.n_per_class = gen_n;
            if (gen_source.rfind("csv:", 0) == 0) throw usage_error("gen needs a synthetic source");
            const auto data = make_source_data(cfg, r);
            if (gen_out.empty()) {
                write_csv(out, data);
            } else {
                load_or_fail("writing " + gen_out, [&] {
                    save_csv(gen_out, data);
                    return 0;
                });
            }
            return ok;
        }

        if (tr->parsed()) {
            const auto data = load_or_fail("reading " + tr_data, [&] { return load_csv(tr_data, tr_header); });
            train_spec spec;
            spec.form = parse_formulation(tr_form);
            if (tr_kernel != "none") spec.kernel = parse_kernel_spec(tr_kernel);
            spec.C = tr_C;
            const auto n = static_cast<std::size_t>(data.n_classes());
            auto per_class = [&](const std::vector<double>& v, double dflt) {
                if (v.empty()) return std::vector<double>(n, dflt);
                if (v.size() == 1) return std::vector<double>(n, v[0]);
                return v;
            };
            spec.alpha = per_class(tr_alpha, 0.0);
            spec.rho = per_class(tr_rho, 1.0);
            solver.node_limit = tr_nodes;
            const auto clf = train(data, spec, solver);
            load_or_fail("writing " + tr_out, [&] {
                save_model(tr_out, clf);
                return 0;
            });
            out << "status " << clf.meta.status << "\nobjective " << detail::format_double(clf.meta.objective)
                << '\n';
            for (std::size_t s = 0; s < clf.meta.dropped.size(); ++s) {
                out << "dropped class " << (s + 1) << ": " << clf.meta.dropped[s].size() << '\n';
            }
            return ok;
        }

        if (pr->parsed()) {
            const auto clf = load_or_fail("reading " + pr_model, [&] { return load_model(pr_model); });
            Eigen::MatrixXd X = load_or_fail("reading " + pr_data, [&] {
                std::ifstream f(pr_data);
                if (!f) throw std::runtime_error("cannot open file");
                return read_features_csv(f, pr_header);
            });
            if (pr_labeled) X = X.leftCols(X.cols() - 1).eval();
            if (X.cols() != clf.input_dim()) {
                throw data_failure("data has " + std::to_string(X.cols()) + " features, model expects " +
                                   std::to_string(clf.input_dim()));
            }
            for (Eigen::Index i = 0; i < X.rows(); ++i) out << clf.predict(X.row(i).transpose()) << '\n';
            return ok;
        }

        if (ev->parsed()) {
            const auto clf = load_or_fail("reading " + ev_model, [&] { return load_model(ev_model); });
            const auto data = load_or_fail("reading " + ev_data, [&] { return load_csv(ev_data, ev_header); });
            if (data.dim() != clf.input_dim() || data.n_classes() > clf.n_classes()) {
                throw data_failure("data does not match the model's input dimension or classes");
            }
            dataset relabeled(clf.n_classes(), data.dim());
            for (const auto& p : data.points()) relabeled.add(p.x, p.y);
            const auto acc = accuracy(clf, relabeled);
            out << "accuracy " << detail::format_double(acc.overall) << '\n';
            for (std::size_t s = 0; s < acc.per_class.size(); ++s) {
                out << "class " << (s + 1) << ' ' << detail::format_double(acc.per_class[s]) << " (n="
                    << acc.class_counts[s] << ")\n";
            }
            return ok;
        }

        const auto cfg = apply_config(experiment_config{}, collect_config(g));

        if (gr->parsed()) {
            const auto data = load_or_fail("reading " + gr_data, [&] { return load_csv(gr_data, gr_header); });
            if (gr_model != "CS" && gr_model != "CC") throw usage_error("--model must be CS or CC");
            if (std::find(kernel_columns().begin(), kernel_columns().end(), gr_column) == kernel_columns().end()) {
                throw usage_error("unknown --column '" + gr_column + "'");
            }
            rng r(cfg.seed);
            const selection_rule rule{cfg.selection == "loo" ? selection_kind::loo : selection_kind::kfold, cfg.folds};
            const auto folds = selection_folds(data, rule, r);
            const auto cands = column_candidates(cfg, gr_model, gr_column, data.n_classes(), data.size());
            cc_settings cv = solver;
            cv.node_limit = cfg.cv_node_limit;
            const auto res = grid_search(data, cands, folds, cv, cfg.threads);
            for (std::size_t c = 0; c < cands.size(); ++c) {
                out << (c == res.best ? "* " : "  ") << describe(cands[c]) << "  error "
                    << detail::format_double(res.errors[c]) << '\n';
            }
            out << "selected " << describe(cands[res.best]) << '\n';
            return ok;
        }

        if (ex->parsed()) {
            const auto rep = run_experiment(cfg, g.verbose);
            const auto md = emit_markdown(rep);
            out << md;
            if (!ex_out.empty()) {
                write_text(ex_out + ".md", md);
                write_text(ex_out + ".csv", emit_csv(rep));
                write_text(ex_out + ".runs.csv", emit_runs_csv(rep));
            }
            return ok;
        }
    } catch (const usage_error& e) {
        err << "error: " << e.what() << '\n';
        return usage;
    } catch (const config_error& e) {
        err << "error: " << e.what() << '\n';
        return usage;
    } catch (const data_failure& e) {
        err << "error: " << e.what() << '\n';
        return data_error;
    } catch (const infeasible_error& e) {
        err << "error: " << e.what() << '\n';
        return solver_failure;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return data_error;
    }
    return usage;
}

}  // namespace ccsvm::cli

#endif  // CCSVM_TOOLS_CLI_HPP_
