#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "conclusive_forest/conclusiveness.hpp"
#include "conclusive_forest/errors.hpp"
#include "conclusive_forest/pipeline.hpp"
#include "support.hpp"

#include <json.hpp>

#include <random>

using namespace cforest;
using namespace cftest;

namespace {

ExplanationRule rule_with(Task task, int class_index, std::vector<RuleCondition> conditions) {
    ExplanationRule r;
    r.task = task;
    r.consequent.class_index = class_index;
    r.consequent.label = "c" + std::to_string(class_index);
    r.conditions = std::move(conditions);
    return r;
}

FeatureRange range(int f, double lo, double hi) {
    FeatureRange r;
    r.feature = f;
    r.lower = lo;
    r.upper = hi;
    return r;
}

// dense sweep of one feature at a time over the rule's ranges (or the domain)
bool grid_conclusive(const ForestModel& m, const Eigen::VectorXd& x, const ExplanationRule& rule, int steps) {
    const int expected = m.predict(x).class_index;
    for (std::size_t f = 0; f < m.num_features(); ++f) {
        const auto* r = rule.range_for(static_cast<int>(f));
        for (int j = 0; j <= steps; ++j) {
            const double v = static_cast<double>(j) / steps;
            if (r && !r->contains(v)) continue;
            Eigen::VectorXd p = x;
            p[static_cast<Eigen::Index>(f)] = v;
            if (m.predict(p).class_index != expected) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("breakpoints are sorted and distinct") {
    const ForestModel m(Task::binary, labels(2), numeric_features(2),
                        {stump(0, 0.7, vec({1, 0}), vec({0, 1})), stump(0, 0.5, vec({1, 0}), vec({0, 1})),
                         stump(0, 0.7, vec({1, 0}), vec({0, 1}))});
    CHECK(breakpoints(m, 0) == std::vector<double>{0.5, 0.7});
    CHECK(breakpoints(m, 1).empty());
}

TEST_CASE("probe values") {
    const std::vector<double> b{0.5, 0.7};
    CHECK(probe_values(b, 0.0, 1.0) == std::vector<double>{0.0, 0.6, 1.0});
    const auto excl = probe_values(b, 0.5, 0.7, false, true);
    REQUIRE(excl.size() == 2);
    CHECK(excl[0] > 0.5);
    CHECK(excl[1] == 0.7);
    CHECK(probe_values(b, 0.6, 0.6).size() == 1);
    CHECK(probe_values(b, 0.6, 0.6, false, true).empty());
    const auto open = probe_values(b, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
    CHECK(open == std::vector<double>{0.5, 0.6, 1.7});
    CHECK(probe_values({}, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()).size() == 1);
}

TEST_CASE("probes cover every constant piece of random forests") {
    std::mt19937_64 rng(14);
    for (int round = 0; round < 60; ++round) {
        RandomForestSpec spec;
        spec.n_features = 1;
        spec.n_trees = 4;
        spec.max_depth = 4;
        const ForestModel m = random_forest(rng, spec);
        const auto probes = probe_values(breakpoints(m, 0), 0.0, 1.0);
        std::set<std::vector<double>> seen_by_probe, seen_by_grid;
        for (double v : probes) {
            const auto p = m.predict(vec({v}));
            seen_by_probe.insert({p.probabilities.begin(), p.probabilities.end()});
        }
        for (int j = 0; j <= 1000; ++j) {
            const auto p = m.predict(vec({j / 1000.0}));
            seen_by_grid.insert({p.probabilities.begin(), p.probabilities.end()});
        }
        CHECK(seen_by_probe == seen_by_grid);
    }
}

TEST_CASE("a one-condition rule that misses a breakpoint is violated") {
    // f0 flips at 0.5, f1 is never used
    const ForestModel m(Task::binary, labels(2), numeric_features(2),
                        {stump(0, 0.5, vec({1, 0}), vec({0, 1})), stump(0, 0.5, vec({1, 0}), vec({0, 1}))});
    const Eigen::VectorXd x = vec({0.2, 0.3});

    const auto empty = audit(m, x, rule_with(Task::binary, 0, {}), "r0");
    CHECK_FALSE(empty.conclusive);
    REQUIRE_FALSE(empty.violations.empty());
    CHECK(empty.violations[0].feature == 0);
    CHECK(empty.violations[0].value > 0.5);
    CHECK(empty.violations[0].new_class == 1);

    const auto tight = audit(m, x, rule_with(Task::binary, 0, {range(0, 0.0, 0.5)}));
    CHECK(tight.conclusive);
    CHECK(tight.probes_evaluated > 0);

    const auto loose = audit(m, x, rule_with(Task::binary, 0, {range(0, 0.0, 0.6)}));
    CHECK_FALSE(loose.conclusive);

    CHECK_THROWS_AS(audit(m, x, rule_with(Task::binary, 1, {range(0, 0.0, 0.5)})), ConsequentMismatch);

    const auto doc = nlohmann::json::parse(audit_to_json(empty, m));
    CHECK(doc["rule_id"] == "r0");
    CHECK(doc["verdict"] == "violated");
    CHECK(doc["violations"][0]["name"] == "f0");
    CHECK(doc["violations"][0]["new_prediction"] == "c1");
}

TEST_CASE("audit agrees with a dense grid on lattice forests") {
    std::mt19937_64 rng(77);
    int violated = 0, conclusive = 0;
    for (int round = 0; round < 80; ++round) {
        RandomForestSpec spec;
        spec.n_trees = 5;
        spec.max_depth = 3;
        const ForestModel m = random_forest(rng, spec);
        const Eigen::VectorXd x = random_instance(rng, spec.n_features);
        const int predicted = m.predict(x).class_index;
        std::vector<RuleCondition> conditions;
        for (int f = 0; f < spec.n_features; ++f) {
            if (rng() % 2) continue;
            const double a = std::uniform_int_distribution<int>(0, 1000)(rng) / 1000.0;
            const double b = std::uniform_int_distribution<int>(0, 1000)(rng) / 1000.0;
            FeatureRange r = range(f, std::min({a, b, x[f]}), std::max({a, b, x[f]}));
            conditions.emplace_back(r);
        }
        const auto rule = rule_with(Task::binary, predicted, conditions);
        const bool verdict = audit(m, x, rule).conclusive;
        CHECK(verdict == grid_conclusive(m, x, rule, 1000));
        (verdict ? conclusive : violated) += 1;
    }
    CHECK(conclusive > 0);
    CHECK(violated > 0);
}

TEST_CASE("regression tolerance") {
    const ForestModel m(Task::regression, {}, numeric_features(1),
                        {stump(0, 0.5, vec({1.0}), vec({1.4})), constant(vec({1.0}))});
    const Eigen::VectorXd x = vec({0.2});
    ExplanationRule r;
    r.task = Task::regression;
    r.consequent.value = 1.0;
    r.consequent.allowed_error = 0.3;
    CHECK(audit(m, x, r).conclusive);  // worst move is 0.2
    r.consequent.allowed_error = 0.1;
    CHECK_FALSE(audit(m, x, r).conclusive);
    r.consequent.allowed_error.reset();
    r.consequent.local_error = 0.2;
    CHECK(audit(m, x, r).conclusive);
    r.consequent.value = 3.0;
    CHECK_THROWS_AS(audit(m, x, r), ConsequentMismatch);
}

TEST_CASE("pipeline rules pass the audit") {
    std::mt19937_64 rng(5);
    int audited = 0;
    for (int round = 0; round < 40; ++round) {
        RandomForestSpec spec;
        spec.task = round % 2 ? Task::multiclass : Task::binary;
        spec.n_classes = round % 2 ? 3 : 2;
        spec.n_trees = 9;
        const ForestModel m = random_forest(rng, spec);
        const Eigen::VectorXd x = random_instance(rng, spec.n_features);
        for (const char* method : {"1", "2", "3", "123"}) {
            ExplainOptions opts;
            opts.method = method;
            try {
                const auto e = explain(m, x, opts);
                CHECK(audit(m, x, e.rule).conclusive);
                CHECK(grid_conclusive(m, x, e.rule, 1000));
                ++audited;
            } catch (const TieError&) {
            }
        }
    }
    CHECK(audited > 100);
}
