#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "conclusive_forest/errors.hpp"
#include "conclusive_forest/evaluation.hpp"
#include "support.hpp"

using namespace cforest;
using namespace cftest;

namespace {

ExplanationRule range_rule(int f, double lo, double hi, int class_index) {
    ExplanationRule r;
    FeatureRange c;
    c.feature = f;
    c.lower = lo;
    c.upper = hi;
    r.conditions.emplace_back(c);
    r.consequent.class_index = class_index;
    return r;
}

FeatureMatrix column(std::initializer_list<double> values) {
    FeatureMatrix x(static_cast<Eigen::Index>(values.size()), 1);
    Eigen::Index i = 0;
    for (double v : values) x(i++, 0) = v;
    return x;
}

}  // namespace

TEST_CASE("coverage counts satisfied rows") {
    const ForestModel m(Task::binary, labels(2), numeric_features(1), {stump(0, 0.5, vec({1, 0}), vec({0, 1}))});
    const auto x = column({0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
    CHECK(coverage(range_rule(0, 0.0, 0.2, 0), x, m) == doctest::Approx(0.3));
    CHECK(coverage(ExplanationRule{}, x, m) == 1.0);
    CHECK_THROWS_AS(coverage(ExplanationRule{}, FeatureMatrix(0, 1), m), UndefinedMetric);
    CHECK_THROWS_AS(coverage(ExplanationRule{}, FeatureMatrix(2, 3), m), SchemaError);
}

TEST_CASE("precision against the model and the truth") {
    const ForestModel m(Task::binary, labels(2), numeric_features(1), {stump(0, 0.5, vec({1, 0}), vec({0, 1}))});
    const auto x = column({0.2, 0.3, 0.4, 0.6, 0.9});
    const auto rule = range_rule(0, 0.2, 0.6, 0);  // four rows, three predicted c0
    CHECK(precision(rule, x, m) == doctest::Approx(0.75));
    const Eigen::VectorXd truth = vec({0, 1, 1, 1, 1});
    CHECK(precision(rule, x, m, PrecisionMode::ground_truth, &truth) == doctest::Approx(0.25));
    CHECK_THROWS_AS(precision(range_rule(0, 2.0, 3.0, 0), x, m), UndefinedMetric);

    ExplanationRule reg = range_rule(0, 0.0, 0.4, 0);
    reg.task = Task::regression;
    reg.consequent.value = 1.0;
    const ForestModel rm(Task::regression, {}, numeric_features(1), {stump(0, 0.25, vec({0.5}), vec({2.0}))});
    // covered predictions 0.5, 2.0, 2.0
    CHECK(precision(reg, x, rm) == doctest::Approx((0.5 + 1.0 + 1.0) / 3.0));
}

TEST_CASE("rule length and reduction ratios") {
    ExplanationRule r = range_rule(0, 0, 1, 0);
    r.conditions.emplace_back(CategoricalEquality{"g", "a", 3});
    r.alternatives.push_back({"h", {"x"}});
    CHECK(rule_length(r) == 2);
    CHECK(reduction_ratio(51, 100) == doctest::Approx(0.49));
    CHECK(reduction_ratio(0, 0) == 0.0);
    CHECK(reduction_ratio(5, 4) == 0.0);
}

TEST_CASE("mean and population deviation") {
    const auto s = mean_std({2, 4, 4, 4, 5, 5, 7, 9});
    CHECK(s.mean == 5.0);
    CHECK(s.std == 2.0);
    CHECK(std::isnan(mean_std({}).mean));
}

TEST_CASE("path reduction of the random reducer is exact") {
    std::vector<Tree> trees;
    for (int t = 0; t < 100; ++t) trees.push_back(stump(0, 0.5, vec({1, 0}), t < 89 ? vec({0, 1}) : vec({1, 0})));
    const ForestModel m(Task::binary, labels(2), numeric_features(1), trees);
    EvaluationOptions opts;
    opts.explain.method = "3";
    const auto x = column({0.7});
    const auto report = evaluate(m, x, x, nullptr, opts);
    REQUIRE(report.instances.size() == 1);
    CHECK(report.instances[0].path_reduction == doctest::Approx(1.0 - 51.0 / 89.0));
    CHECK(report.conclusive_rate == 1.0);
}

TEST_CASE("ties are skipped") {
    const ForestModel m(Task::binary, labels(2), numeric_features(1),
                        {constant(vec({1, 0})), constant(vec({0, 1}))});
    const auto report = evaluate(m, column({0.1, 0.2}), column({0.1}), nullptr, {});
    CHECK(report.ties_skipped == 2);
    CHECK(report.instances.empty());
}

TEST_CASE("single-cell sweep") {
    SweepGrid grid;
    grid.n_estimators = {10};
    grid.instances = 5;
    const auto data = make_banknote_like(0);
    std::vector<std::string> logged;
    const auto result = sensitivity_sweep(data, "bank", Task::binary, grid, [&](const std::string& s) { logged.push_back(s); });
    REQUIRE(result.rows.size() == 1);
    const auto& row = result.rows[0];
    CHECK(row.report.instances.size() + row.report.ties_skipped == 5);
    CHECK(row.report.conclusive_rate == 1.0);

    const std::string csv = sweep_to_csv(result.rows);
    CHECK(csv.rfind("dataset,task,n_estimators,max_depth,max_features,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    CHECK(sweep_to_csv(sensitivity_sweep(data, "bank", Task::binary, grid).rows) == csv);

    grid.methods = {"123", "5"};
    const auto skipped = sensitivity_sweep(data, "bank", Task::binary, grid, [&](const std::string& s) { logged.push_back(s); });
    CHECK(skipped.rows.size() == 1);
    CHECK(skipped.skipped.size() == 1);
    CHECK_FALSE(logged.empty());
}

TEST_CASE("regression sweep scales the budget") {
    SweepGrid grid;
    grid.n_estimators = {8};
    grid.methods = {"1", "3"};
    grid.allowed_error_scale = {0.5, 1.0};
    grid.instances = 3;
    auto data = make_wine_like(0);
    data = subset(data, split_indices(data.rows(), 0.9, 0).train);
    const auto result = sensitivity_sweep(data, "wine", Task::regression, grid);
    REQUIRE(result.rows.size() == 4);
    for (const auto& r : result.rows) {
        REQUIRE(r.allowed_error);
        CHECK(r.report.conclusive_rate == 1.0);
    }
    CHECK(*result.rows[0].allowed_error * 2 == doctest::Approx(*result.rows[1].allowed_error));
}
