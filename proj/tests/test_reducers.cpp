#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "conclusive_forest/errors.hpp"
#include "conclusive_forest/kmedoids.hpp"
#include "conclusive_forest/reducers.hpp"
#include "support.hpp"

#include <random>
#include <set>

using namespace cforest;
using namespace cftest;

namespace {

// Path over closed-ish intervals: (lo, hi] per listed feature.
DecisionPath make_path(int tree, int vote, int n_classes, const std::vector<std::tuple<int, double, double>>& ivs) {
    DecisionPath p;
    p.tree_index = tree;
    p.vote = vote;
    p.leaf = Eigen::VectorXd::Zero(n_classes);
    p.leaf[vote] = 1.0;
    for (const auto& [f, lo, hi] : ivs) {
        p.conditions.push_back({f, Relation::greater, lo});
        p.conditions.push_back({f, Relation::less_equal, hi});
    }
    return p;
}

FeatureRanges unit_ranges(int n) { return FeatureRanges(static_cast<std::size_t>(n), {0.0, 10.0}); }

// 60 paths on features {0, 1}, 40 on {2, 3}; all vote class 1 of 2.
std::vector<DecisionPath> two_cluster_paths(int first = 60, int second = 40) {
    std::vector<DecisionPath> paths;
    for (int t = 0; t < first + second; ++t) {
        if (t < first) paths.push_back(make_path(t, 1, 2, {{0, 1.0, 2.0}, {1, 3.0, 4.0}}));
        else paths.push_back(make_path(t, 1, 2, {{2, 1.0, 2.0}, {3, 3.0, 4.0}}));
    }
    return paths;
}

std::set<int> union_features(const ReductionOutcome& o) {
    std::set<int> s;
    for (const auto& p : o.retained_paths)
        for (const auto& c : p.conditions) s.insert(c.feature);
    return s;
}

int count_vote(const ReductionOutcome& o, int c) {
    return static_cast<int>(std::count_if(o.retained_paths.begin(), o.retained_paths.end(),
                                          [&](const DecisionPath& p) { return p.vote == c; }));
}

}  // namespace

TEST_CASE("path similarity") {
    const auto ranges = unit_ranges(3);
    const DecisionPath a = make_path(0, 0, 2, {{0, 0.0, 2.0}, {2, 1.0, 5.0}});
    const DecisionPath b = make_path(1, 0, 2, {{0, 1.0, 3.0}});
    CHECK(path_similarity(a, b, ranges) == doctest::Approx((1.0 / 3.0 + 1.0) / 3.0));
    CHECK(path_similarity(a, a, ranges) == 1.0);

    const auto one = unit_ranges(1);
    CHECK(path_similarity(make_path(0, 0, 2, {{0, 0.0, 1.0}}), make_path(1, 0, 2, {{0, 2.0, 3.0}}), one) == 0.0);

    // open sides close on the domain: (-inf, 5] vs (5, +inf) on [0, 10]
    DecisionPath left, right;
    left.conditions = {{0, Relation::less_equal, 5.0}};
    right.conditions = {{0, Relation::greater, 5.0}};
    CHECK(path_similarity(left, right, one) == 0.0);
    DecisionPath wide;
    wide.conditions = {{0, Relation::less_equal, 10.0}};
    CHECK(path_similarity(left, wide, one) == doctest::Approx(0.5));

    const std::vector<DecisionPath> ps{a, b, a};
    const Eigen::MatrixXd d = dissimilarity_matrix(ps, ranges);
    CHECK(d.diagonal().isZero());
    CHECK(d.isApprox(d.transpose()));
    CHECK(d(0, 2) == 0.0);
    CHECK((d.array() >= 0.0).all());
    CHECK((d.array() <= 1.0).all());
}

TEST_CASE("association rules keep the larger cluster") {
    const auto ctx = ReductionContext::classification(two_cluster_paths(), 2, 1, unit_ranges(4));
    CHECK(ctx.needed_from_pool() == 51);
    for (Miner miner : {Miner::apriori, Miner::fpgrowth}) {
        ReducerOptions opts;
        opts.miner = miner;
        const auto o = reduce_association_rules(ctx, opts);
        CHECK(o.retained_paths.size() == 60);
        CHECK(o.retained_features == std::vector<int>{0, 1});
        CHECK(std::all_of(o.retained_paths.begin(), o.retained_paths.end(),
                          [](const auto& p) { return p.tree_index < 60; }));
    }
}

TEST_CASE("association rules with one shared feature set") {
    std::vector<DecisionPath> paths;
    for (int t = 0; t < 10; ++t) paths.push_back(make_path(t, 0, 2, {{1, 0.0, 1.0}}));
    const auto ctx = ReductionContext::classification(paths, 2, 0, unit_ranges(3));
    const auto o = reduce_association_rules(ctx, ReducerOptions{});
    CHECK(o.retained_features == std::vector<int>{1});
    CHECK(o.retained_paths.size() >= 6);
}

TEST_CASE("association rules fall back to every path") {
    // every path tests its own feature: no itemset reaches the support
    std::vector<DecisionPath> paths;
    for (int t = 0; t < 10; ++t) paths.push_back(make_path(t, 0, 2, {{t, 0.0, 1.0}}));
    const auto ctx = ReductionContext::classification(paths, 2, 0, unit_ranges(10));
    ReducerOptions opts;
    opts.min_support = 0.5;
    const auto o = reduce_association_rules(ctx, opts);
    CHECK(o.retained_paths.size() == 10);
    CHECK(std::find(o.method_trace.begin(), o.method_trace.end(), "AR:fallback_all_paths") != o.method_trace.end());
    CHECK(o.retained_features.size() == 10);
    const auto via_pipeline = run_pipeline(ctx, "1", opts);
    CHECK(via_pipeline.retained_trees() == ctx.no_reduction().retained_trees());
}

TEST_CASE("clustering keeps the 60-path cluster") {
    const auto paths = two_cluster_paths();
    const auto ctx = ReductionContext::classification(paths, 2, 1, unit_ranges(4));
    ReducerOptions opts;
    opts.k = 2;
    const auto o = reduce_clustering(ctx, opts);
    CHECK(o.retained_paths.size() == 60);
    CHECK(o.retained_features == std::vector<int>{0, 1});

    // PAM's cost equals the best 2-medoid cost found by exhaustive search
    const Eigen::MatrixXd d = dissimilarity_matrix(paths, ctx.ranges());
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 100; ++i)
        for (int j = i + 1; j < 100; ++j) best = std::min(best, medoid_cost(d, {i, j}));
    CHECK(pam(d, 2).cost == doctest::Approx(best));

    opts.k = 1;
    CHECK(reduce_clustering(ctx, opts).retained_paths.size() == 100);
    opts.k = 101;
    CHECK_THROWS_AS(reduce_clustering(ctx, opts), ConfigError);
}

TEST_CASE("clustering accumulates whole clusters past the largest") {
    std::vector<DecisionPath> paths;
    for (int t = 0; t < 100; ++t) {
        const int group = t < 30 ? 0 : t < 60 ? 1 : 2;
        paths.push_back(make_path(t, 0, 2, {{group, 1.0, 2.0}}));
    }
    const auto ctx = ReductionContext::classification(paths, 2, 0, unit_ranges(3));
    ReducerOptions opts;
    opts.k = 3;
    const auto o = reduce_clustering(ctx, opts);
    CHECK(o.retained_paths.size() == 70);
    CHECK(o.retained_features.size() == 2);
}

TEST_CASE("random selection") {
    SUBCASE("89 majority paths, quorum 51") {
        std::vector<DecisionPath> paths;
        for (int t = 0; t < 100; ++t) paths.push_back(make_path(t, t < 89 ? 1 : 0, 2, {{t % 3, 0.0, 1.0}}));
        const auto ctx = ReductionContext::classification(paths, 2, 1, unit_ranges(3));
        const auto o = reduce_random(ctx, ReducerOptions{});
        CHECK(o.retained_paths.size() == 51);
        CHECK(count_vote(o, 1) == 51);
        const auto again = reduce_random(ctx, ReducerOptions{});
        CHECK(again.retained_trees() == o.retained_trees());
        ReducerOptions other;
        other.seed = 99;
        CHECK(reduce_random(ctx, other).retained_paths.size() == 51);
        CHECK(run_pipeline(ctx, "3", ReducerOptions{}).retained_trees() == o.retained_trees());
    }
    SUBCASE("requirement equal to the path count") {
        const auto ctx = ReductionContext::classification({make_path(0, 0, 2, {{0, 0.0, 1.0}})}, 2, 0, unit_ranges(1));
        CHECK(reduce_random(ctx, ReducerOptions{}).retained_paths.size() == 1);
    }
    SUBCASE("K-rule keeps classes M and L whole") {
        std::vector<DecisionPath> paths;
        for (int t = 0; t < 100; ++t) paths.push_back(make_path(t, t < 45 ? 0 : t < 80 ? 1 : 2, 3, {{0, 0.0, 1.0}}));
        const auto ctx = ReductionContext::classification(paths, 3, 0, unit_ranges(1));
        CHECK(ctx.requirement().rationale == Rationale::k_rule);
        CHECK(ctx.needed_from_pool() == 11);
        const auto o = reduce_random(ctx, ReducerOptions{});
        CHECK(o.retained_paths.size() == 91);
        CHECK(count_vote(o, 0) == 45);
        CHECK(count_vote(o, 1) == 35);
        CHECK(count_vote(o, 2) == 11);
    }
    SUBCASE("regression with zero budget keeps everything") {
        std::mt19937_64 rng(4);
        RandomForestSpec spec;
        spec.task = Task::regression;
        spec.n_trees = 12;
        const ForestModel m = random_forest(rng, spec);
        const auto x = random_instance(rng, 3);
        const auto ctx = ReductionContext::from_model(m, x, ErrorBudget{0.0});
        const auto o = reduce_random(ctx, ReducerOptions{});
        std::size_t constant_trees = 0;
        for (const auto& s : m.tree_stats()) constant_trees += s.min_pred == s.max_pred ? 1 : 0;
        CHECK(o.retained_paths.size() + constant_trees >= 12);
        CHECK(*o.achieved_local_error == 0.0);
    }
}

TEST_CASE("distribution-based selection") {
    SUBCASE("identical predictions") {
        std::vector<Tree> trees(5, constant(vec({2.0})));
        const ForestModel m(Task::regression, {}, numeric_features(1), trees);
        const auto ctx = ReductionContext::from_model(m, vec({0.5}), ErrorBudget{0.1});
        const auto o = reduce_distribution(ctx, DistributionVariant::inner, ReducerOptions{});
        CHECK(o.retained_paths.size() == 5);
        CHECK(*o.achieved_local_error == 0.0);
        CHECK(reduce_distribution(ctx, DistributionVariant::outer, ReducerOptions{}).retained_paths.size() == 5);
    }
    SUBCASE("bimodal predictions") {
        std::vector<Tree> trees;
        for (int t = 0; t < 20; ++t) trees.push_back(stump(0, 0.5, vec({t < 10 ? 1.0 : 9.0}), vec({5.0})));
        const ForestModel m(Task::regression, {}, numeric_features(1), trees);
        const auto ctx = ReductionContext::from_model(m, vec({0.1}), ErrorBudget{100.0});
        const auto outer = reduce_distribution(ctx, DistributionVariant::outer, ReducerOptions{});
        CHECK(outer.retained_paths.size() == 20);
        const auto inner = reduce_distribution(ctx, DistributionVariant::inner, ReducerOptions{});
        CHECK(inner.retained_paths.size() == 20);
        CHECK(inner.method_trace.back() == "DSi:no_band_qualified");
    }
    SUBCASE("two outliers are dropped") {
        std::vector<Tree> trees(18, constant(vec({5.0})));
        trees.push_back(stump(0, 0.5, vec({50.0}), vec({40.0})));
        trees.push_back(stump(0, 0.5, vec({50.0}), vec({40.0})));
        const ForestModel m(Task::regression, {}, numeric_features(1), trees);
        const auto x = vec({0.2});
        // each outlier can fall by 10, so excluding both costs 20 / 20
        const std::vector<int> cluster{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17};
        CHECK(local_error(m, x, cluster) == doctest::Approx(1.0));
        const auto ctx = ReductionContext::from_model(m, x, ErrorBudget{1.0});
        const auto o = reduce_distribution(ctx, DistributionVariant::inner, ReducerOptions{});
        CHECK(o.retained_trees() == cluster);
        CHECK(*o.achieved_local_error <= 1.0);

        const auto tight = ReductionContext::from_model(m, x, ErrorBudget{0.5});
        CHECK(reduce_distribution(tight, DistributionVariant::inner, ReducerOptions{}).retained_paths.size() == 20);
    }
}

TEST_CASE("pipeline composition") {
    const auto ctx = ReductionContext::classification(two_cluster_paths(), 2, 1, unit_ranges(4));
    const auto o = run_pipeline(ctx, "123", ReducerOptions{});
    CHECK(static_cast<int>(o.retained_paths.size()) == ctx.requirement().minimum_paths);
    CHECK(o.retained_features == std::vector<int>{0, 1});
    CHECK(o.method_trace.size() >= 3);

    CHECK_THROWS_AS(run_pipeline(ctx, "4", ReducerOptions{}), MethodError);
    CHECK_THROWS_AS(run_pipeline(ctx, "DSi", ReducerOptions{}), MethodError);
    CHECK_THROWS_AS(validate_method("2", Task::regression), MethodError);
    CHECK_THROWS_AS(validate_method("12", Task::regression), MethodError);
    CHECK_NOTHROW(validate_method("AR+RS", Task::regression));
    CHECK_NOTHROW(validate_method("none", Task::multiclass));

    const auto none = run_pipeline(ctx, "none", ReducerOptions{});
    CHECK(none.retained_paths.size() == 100);
}

TEST_CASE("soft prediction against the hard majority keeps the whole forest") {
    // two weak votes for class 0, one confident vote for class 1: soft argmax is 1
    std::vector<DecisionPath> paths;
    for (int t = 0; t < 3; ++t) {
        DecisionPath p = make_path(t, t < 2 ? 0 : 1, 2, {{t, 0.0, 1.0}});
        p.leaf = t < 2 ? vec({0.55, 0.45}) : vec({0.0, 1.0});
        paths.push_back(p);
    }
    const auto ctx = ReductionContext::classification(paths, 2, 1, unit_ranges(3));
    CHECK(ctx.requirement().rationale == Rationale::full_forest);
    CHECK(run_pipeline(ctx, "123", ReducerOptions{}).retained_paths.size() == 3);
}

TEST_CASE("outcomes survive adversarial reassignment of excluded trees") {
    std::mt19937_64 rng(31);
    int checked = 0;
    for (int round = 0; round < 300; ++round) {
        RandomForestSpec spec;
        spec.task = round % 2 ? Task::binary : Task::multiclass;
        spec.n_classes = spec.task == Task::binary ? 2 : 3 + static_cast<int>(rng() % 2);
        spec.n_trees = 1 + static_cast<int>(rng() % 20);
        spec.max_depth = 2;
        spec.hard_leaves = rng() % 2;
        const ForestModel m = random_forest(rng, spec);
        const auto x = random_instance(rng, spec.n_features);
        std::optional<ReductionContext> ctx;
        try {
            ctx = ReductionContext::from_model(m, x);
        } catch (const TieError&) {
            continue;
        }
        const int predicted = m.predict(x).class_index;
        for (const char* method : {"1", "2", "3", "12", "13", "23", "123", "none"}) {
            ReducerOptions opts;
            opts.k = 2;
            opts.seed = static_cast<std::uint64_t>(round);
            ReductionOutcome o;
            try {
                o = run_pipeline(*ctx, method, opts);
            } catch (const TieError&) {
                continue;  // exact probability ties cannot be stabilised
            }
            CHECK(std::set<int>(o.retained_features.begin(), o.retained_features.end()) == union_features(o));
            CHECK(ctx->requirement_met(o.retained_trees()));
            // per rival, the excluded trees independently pick their most hostile leaf
            const auto trees = o.retained_trees();
            const std::set<int> kept(trees.begin(), trees.end());
            Eigen::VectorXd base = Eigen::VectorXd::Zero(spec.n_classes);
            for (int t : kept) base += m.tree(static_cast<std::size_t>(t)).output(x);
            for (int j = 0; j < spec.n_classes; ++j) {
                if (j == predicted) continue;
                double gap = base[j] - base[predicted];
                for (int t = 0; t < spec.n_trees; ++t) {
                    if (kept.count(t)) continue;
                    double worst = -std::numeric_limits<double>::infinity();
                    for (const auto& n : m.tree(static_cast<std::size_t>(t)).nodes)
                        if (n.is_leaf()) worst = std::max(worst, n.leaf_value[j] - n.leaf_value[predicted]);
                    gap += worst;
                }
                const bool flips = j < predicted ? gap >= 0.0 : gap > 0.0;
                CHECK_FALSE(flips);
            }
            ++checked;
        }
    }
    CHECK(checked > 1000);
}

TEST_CASE("regression outcomes stay within budget") {
    std::mt19937_64 rng(41);
    for (int round = 0; round < 100; ++round) {
        RandomForestSpec spec;
        spec.task = Task::regression;
        spec.n_trees = 1 + static_cast<int>(rng() % 20);
        const ForestModel m = random_forest(rng, spec);
        const auto x = random_instance(rng, spec.n_features);
        const double budget = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
        const auto ctx = ReductionContext::from_model(m, x, ErrorBudget{budget});
        for (const char* method : {"1", "3", "13", "AR+RS", "DSi", "DSo", "none"}) {
            const auto o = run_pipeline(ctx, method, ReducerOptions{});
            CHECK(*o.achieved_local_error <= budget);
            CHECK(*o.achieved_local_error == doctest::Approx(local_error(m, x, o.retained_trees())));
            CHECK(std::set<int>(o.retained_features.begin(), o.retained_features.end()) == union_features(o));
        }
    }
}
