#include "ccsvm/experiments.hpp"
#include "support/instances.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace ccsvm;

namespace {

config_map parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

experiment_config small_config() {
    experiment_config cfg;
    cfg.source = "binary:2";
    cfg.n_per_class = 40;
    cfg.n_train = 10;
    cfg.kernels = {"LIN", "RBF"};
    cfg.gamma_grid = {0.1, 1.0};
    cfg.c_grid = {0.1, 10.0};
    cfg.rho_grid = {1.0, 10.0};
    cfg.folds = 3;
    cfg.replications = 2;
    cfg.seed = 5;
    cfg.mislabel_source = 1;
    cfg.mislabel_prob = 0.2;
    cfg.mislabel_targets = {2};
    return cfg;
}

train_spec soft(double C, std::optional<kernel_spec> k = std::nullopt) {
    train_spec s;
    s.form = formulation::soft;
    s.C = C;
    s.kernel = k;
    return s;
}

}  // namespace

TEST(Config, ParsesCommentsAndWhitespace) {
    const auto m = parse("# comment\n  source = threeclass  # trailing\n\nseed=7\nseed = 8\n");
    EXPECT_EQ(m.at("source"), "threeclass");
    EXPECT_EQ(m.at("seed"), "8");
    EXPECT_EQ(m.size(), 2u);
    EXPECT_THROW(parse("just words\n"), config_error);
    EXPECT_THROW(parse(" = 3\n"), config_error);
    EXPECT_THROW(load_config("/nonexistent/ccsvm.conf"), config_error);
}

TEST(Config, ApplyAndValidate) {
    const auto cfg = apply_config({}, parse("models = CC\nkernels = d=2, RBF\nrho = 5, 50\nmislabel_targets = 1,2\n"
                                            "mislabel_source = 3\nmislabel_prob = 0.2\nheader = yes\n"));
    EXPECT_EQ(cfg.models, std::vector<std::string>{"CC"});
    EXPECT_EQ(cfg.kernels, (std::vector<std::string>{"d=2", "RBF"}));
    EXPECT_EQ(cfg.rho_grid, (std::vector<double>{5.0, 50.0}));
    EXPECT_EQ(cfg.mislabel_targets, (std::vector<int>{1, 2}));
    EXPECT_TRUE(cfg.header);
    EXPECT_THROW(apply_config({}, parse("colour = blue\n")), config_error);
    EXPECT_THROW(apply_config({}, parse("replications = 0\n")), config_error);
    EXPECT_THROW(apply_config({}, parse("models = SVM\n")), config_error);
    EXPECT_THROW(apply_config({}, parse("kernels = d=3\n")), config_error);
    EXPECT_THROW(apply_config({}, parse("c_grid = 1, -1\n")), config_error);
    EXPECT_THROW(apply_config({}, parse("seed = seven\n")), config_error);
    EXPECT_THROW(apply_config({}, parse("mislabel_prob = 0.2\n")), config_error);
    EXPECT_THROW(apply_config({}, parse("selection = bootstrap\n")), config_error);
}

TEST(Config, EntriesRoundTrip) {
    const auto cfg = small_config();
    config_map m;
    for (const auto& [k, v] : cfg.entries()) m[k] = v;
    EXPECT_EQ(apply_config({}, m).entries(), cfg.entries());
}

TEST(Folds, StratifiedAndReproducible) {
    rng g(1);
    auto d = split_per_class(gen_threeclass(40, g), 17, g).train;
    rng a(3), b(3);
    const auto fa = stratified_folds(d, 5, a);
    EXPECT_EQ(fa, stratified_folds(d, 5, b));
    for (int s = 1; s <= 3; ++s) {
        std::vector<int> count(5, 0);
        for (int i : d.class_indices(s)) ++count[static_cast<std::size_t>(fa[static_cast<std::size_t>(i)])];
        EXPECT_LE(*std::max_element(count.begin(), count.end()) - *std::min_element(count.begin(), count.end()), 1);
    }
    EXPECT_THROW(stratified_folds(d, 1, a), std::invalid_argument);
}

TEST(Folds, LeaveOneOutGuard) {
    rng g(2);
    const auto small = gen_threeclass(40, g);
    const auto loo = selection_folds(small, {selection_kind::loo, 0}, g);
    EXPECT_EQ(loo.size(), 120u);
    EXPECT_EQ(loo.back(), 119);
    const auto big = gen_threeclass(41, g);
    EXPECT_THROW(selection_folds(big, {selection_kind::loo, 0}, g), std::invalid_argument);
}

TEST(GridSearch, SinglePointGrid) {
    const auto d = fixtures::separable_binary(1, 6);
    rng r(1);
    const auto folds = stratified_folds(d, 3, r);
    const auto gs = grid_search(d, {soft(1.0)}, folds, {});
    EXPECT_EQ(gs.best, 0u);
    EXPECT_EQ(gs.errors.size(), 1u);
    EXPECT_EQ(gs.errors[0], 0.0);
}

TEST(GridSearch, TiesPreferSimplerKernelThenSmallerC) {
    const auto d = fixtures::separable_binary(2, 6);
    std::vector<int> loo(d.size());
    std::iota(loo.begin(), loo.end(), 0);
    const auto gs = grid_search(d, {soft(10.0, kernel_spec::rbf(0.1)), soft(10.0)}, loo, {});
    EXPECT_EQ(gs.errors, (std::vector<double>{0.0, 0.0}));
    EXPECT_EQ(gs.best, 1u);
    const auto gc = grid_search(d, {soft(100.0), soft(10.0), soft(50.0)}, loo, {});
    EXPECT_EQ(gc.best, 1u);
    EXPECT_LT(tie_key(soft(1.0, kernel_spec::polynomial(2))), tie_key(soft(1.0, kernel_spec::polynomial(4))));
    EXPECT_LT(tie_key(soft(1.0, kernel_spec::polynomial(6))), tie_key(soft(1.0, kernel_spec::rbf(0.01))));
    EXPECT_THROW(grid_search(d, {}, loo, {}), std::invalid_argument);
}

TEST(GridSearch, ReproducibleSelection) {
    experiment_config cfg;
    rng g(3);
    const auto d = split_per_class(gen_binary_instance(2, 50, g), 12, g).train;
    const auto cands = column_candidates(cfg, "CS", "RBF", 2, d.size());
    ASSERT_EQ(cands.size(), 25u);
    rng a(4), b(4);
    const auto ga = grid_search(d, cands, stratified_folds(d, 5, a), {});
    const auto gb = grid_search(d, cands, stratified_folds(d, 5, b), {}, 3);
    EXPECT_EQ(ga.best, gb.best);
    EXPECT_EQ(ga.errors, gb.errors);
}

TEST(Candidates, GridShapes) {
    auto cfg = small_config();
    const auto cs = column_candidates(cfg, "CS", "LIN", 2, 20);
    ASSERT_EQ(cs.size(), 2u);
    EXPECT_EQ(cs[1].C, 200.0);  // C / N = 10
    EXPECT_FALSE(cs[0].kernel.has_value());
    EXPECT_EQ(column_candidates(cfg, "CC", "RBF", 3, 20).size(), 4u);
    EXPECT_EQ(column_candidates(cfg, "CC", "d=4", 3, 20)[0].kernel->degree, 4);
    EXPECT_EQ(column_candidates(cfg, "CC", "d=4", 3, 20)[0].rho, (std::vector<double>{1.0, 1.0, 1.0}));
    cfg.alpha_mode = "fixed";
    cfg.alpha = {0.1};
    const auto fixed = column_candidates(cfg, "CC", "LIN", 3, 20);
    ASSERT_EQ(fixed.size(), 1u);
    EXPECT_EQ(fixed[0].form, formulation::cc);
    EXPECT_EQ(fixed[0].alpha, (std::vector<double>{0.1, 0.1, 0.1}));
    EXPECT_EQ(describe(fixed[0]), "linear alpha=0.1/0.1/0.1");
}

TEST(Report, MeanStd) {
    const auto [m, s] = mean_std({1.0, 2.0, 3.0});
    EXPECT_DOUBLE_EQ(m, 2.0);
    EXPECT_DOUBLE_EQ(*s, 1.0);
    EXPECT_FALSE(mean_std({0.5}).second.has_value());
}

TEST(Report, EmptyModelListGivesHeaderOnlyTable) {
    report r;
    r.config.models = {};
    const auto md = emit_markdown(r);
    EXPECT_NE(md.find("| Model | LIN | d=2 | d=4 | d=6 | RBF |\n|---|---|---|---|---|---|\n\n"), std::string::npos);
    EXPECT_EQ(emit_csv(r), "model,kernel,runs,mean,std,class_1,class_2,flagged\n");
}

TEST(Report, TableShapeAndCsvRoundTrip) {
    report r;
    r.n_classes = 3;
    r.config.replications = 3;
    for (const auto& m : r.config.models) {
        for (const auto& c : kernel_columns()) {
            for (int rep = 0; rep < 3; ++rep) {
                run_record run;
                run.replication = rep;
                run.model = m;
                run.column = c;
                run.accuracy = 0.1 * rep + 1.0 / 3.0;
                run.class_accuracy = {0.7, 1.0 / 7.0, 0.9 - 0.01 * rep};
                run.flagged = rep == 2 && c == "RBF";
                r.runs.push_back(run);
            }
        }
    }
    r.cells = aggregate(r.config, r.runs, 3);
    ASSERT_EQ(r.cells.size(), 10u);
    const auto md = emit_markdown(r);
    EXPECT_NE(md.find("| CS | 43.3%(10.0%) | 43.3%(10.0%) | 43.3%(10.0%) | 43.3%(10.0%) | 43.3%(10.0%)* |"),
              std::string::npos);
    EXPECT_NE(md.find("## Accuracy per class"), std::string::npos);
    EXPECT_NE(md.find("| 2 | CC | 14.3% |"), std::string::npos);

    std::istringstream in(emit_csv(r));
    const auto back = read_summary_csv(in);
    ASSERT_EQ(back.size(), r.cells.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].model, r.cells[i].model);
        EXPECT_EQ(back[i].column, r.cells[i].column);
        EXPECT_EQ(back[i].mean, r.cells[i].mean);
        EXPECT_EQ(*back[i].stddev, *r.cells[i].stddev);
        EXPECT_EQ(back[i].class_mean, r.cells[i].class_mean);
        EXPECT_EQ(back[i].flagged, r.cells[i].flagged);
    }
}

TEST(RunExperiment, SingleReplicationOmitsStd) {
    auto cfg = small_config();
    cfg.replications = 1;
    cfg.kernels = {"LIN"};
    const auto r = run_experiment(cfg);
    for (const auto& c : r.cells) EXPECT_FALSE(c.stddev.has_value());
    EXPECT_EQ(emit_markdown(r).find("%("), std::string::npos);
}

TEST(RunExperiment, DeterministicAcrossRerunsAndThreads) {
    auto cfg = small_config();
    const auto a = emit_csv(run_experiment(cfg));
    const auto b = emit_csv(run_experiment(cfg));
    cfg.threads = 2;
    const auto c = run_experiment(cfg);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, emit_csv(c));
    for (const auto& cell : c.cells) {
        EXPECT_GE(cell.mean, 0.0);
        EXPECT_LE(cell.mean, 1.0);
        ASSERT_TRUE(cell.stddev.has_value());
        EXPECT_GE(*cell.stddev, 0.0);
        EXPECT_LE(*cell.stddev, 0.5);
    }
    for (const auto& run : c.runs) EXPECT_GT(run.flips + 1, 0);
}

TEST(RunExperiment, FixedAlphaRespectsBudgets) {
    auto cfg = small_config();
    cfg.models = {"CC"};
    cfg.alpha_mode = "fixed";
    cfg.alpha = {0.2};
    const auto r = run_experiment(cfg);
    for (const auto& run : r.runs) {
        ASSERT_EQ(run.train_violation.size(), 2u);
        for (double v : run.train_violation) EXPECT_LE(v, 0.2 + 1e-12);
    }
}

TEST(RunExperiment, ZeroAlphaMatchesHardMarginOnSeparableData) {
    // instance 1 is labelled by a line, so it is linearly separable
    experiment_config cfg;
    cfg.source = "binary:1";
    cfg.n_per_class = 40;
    cfg.n_train = 10;
    cfg.models = {"CC"};
    cfg.kernels = {"LIN"};
    cfg.alpha_mode = "fixed";
    cfg.alpha = {0.0};
    cfg.replications = 3;
    const auto r = run_experiment(cfg);
    ASSERT_EQ(r.runs.size(), 3u);
    for (const auto& run : r.runs) {
        rng g(run.seed);
        const auto all = gen_binary_instance(1, 40, g);
        const auto split = split_per_class(all, 10, g);
        train_spec hard;
        hard.form = formulation::hard;
        EXPECT_EQ(run.accuracy, accuracy(train(split.train, hard), split.test).overall);
    }
}

TEST(RunExperiment, InstanceOneLinearCcIsAccurate) {
    experiment_config cfg;
    cfg.source = "binary:1";
    cfg.models = {"CC"};
    cfg.kernels = {"LIN"};
    cfg.replications = 10;
    const auto r = run_experiment(cfg);
    ASSERT_EQ(r.cells.size(), 1u);
    EXPECT_GE(r.cells[0].mean, 0.95);
}

TEST(RunExperiment, CsvSourceUsesFileRows) {
    experiment_config cfg;
    cfg.source = std::string("csv:") + CCSVM_SOURCE_DIR + "/data/iris.csv";
    cfg.header = true;
    cfg.n_train = 5;
    cfg.models = {"CS"};
    cfg.kernels = {"LIN"};
    cfg.c_grid = {1.0};
    cfg.folds = 2;
    cfg.replications = 1;
    const auto r = run_experiment(cfg);
    EXPECT_EQ(r.n_classes, 3);
    ASSERT_EQ(r.runs.size(), 1u);
    EXPECT_EQ(r.runs[0].class_accuracy.size(), 3u);
    EXPECT_GT(r.runs[0].accuracy, 0.5);
}
