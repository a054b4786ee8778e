#include "conclusive_forest/evaluation.hpp"

#include "conclusive_forest/conclusiveness.hpp"
#include "conclusive_forest/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace cforest {

std::size_t rule_length(const ExplanationRule& rule) { return rule.conditions.size(); }

bool covers(const ExplanationRule& rule, const InstanceRef& row) {
    for (const RuleCondition& c : rule.conditions) {
        if (const auto* r = std::get_if<FeatureRange>(&c)) {
            if (!r->contains(row[r->feature])) return false;
        } else {
            const auto& e = std::get<CategoricalEquality>(c);
            if (!(row[e.feature] > 0.5)) return false;
        }
    }
    return true;
}

namespace {

void check_width(const FeatureMatrix& data, const ForestModel& model) {
    if (data.cols() != static_cast<Eigen::Index>(model.num_features()))
        throw SchemaError("dataset has " + std::to_string(data.cols()) + " columns, model expects " +
                          std::to_string(model.num_features()));
}

}  // namespace

double coverage(const ExplanationRule& rule, const FeatureMatrix& data, const ForestModel& model) {
    check_width(data, model);
    if (data.rows() == 0) throw UndefinedMetric("coverage of an empty dataset");
    Eigen::Index hits = 0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) hits += covers(rule, data.row(i).transpose()) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(data.rows());
}

double precision(const ExplanationRule& rule, const FeatureMatrix& data, const ForestModel& model,
                 PrecisionMode mode, const Eigen::VectorXd* targets) {
    check_width(data, model);
    if (mode == PrecisionMode::ground_truth && (!targets || targets->size() != data.rows()))
        throw SchemaError("ground-truth precision needs one target per row");
    double acc = 0.0;
    Eigen::Index covered = 0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const Eigen::VectorXd row = data.row(i).transpose();
        if (!covers(rule, row)) continue;
        ++covered;
        if (model.task() == Task::regression) {
            const double v = mode == PrecisionMode::fidelity ? model.predict(row).value : (*targets)[i];
            acc += std::abs(v - rule.consequent.value);
        } else {
            const int c = mode == PrecisionMode::fidelity ? model.predict(row).class_index
                                                          : static_cast<int>((*targets)[i]);
            acc += c == rule.consequent.class_index ? 1.0 : 0.0;
        }
    }
    if (covered == 0) throw UndefinedMetric("precision is undefined: the rule covers no row");
    return acc / static_cast<double>(covered);
}

double reduction_ratio(std::size_t reduced, std::size_t baseline) {
    if (baseline == 0) return 0.0;
    return std::clamp(1.0 - static_cast<double>(reduced) / static_cast<double>(baseline), 0.0, 1.0);
}

MeanStd mean_std(const std::vector<double>& values) {
    if (values.empty()) return {std::nan(""), std::nan("")};
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / n)};
}

EvaluationReport evaluate(const ForestModel& model, const FeatureMatrix& explained, const FeatureMatrix& metric_data,
                          const Eigen::VectorXd* metric_targets, const EvaluationOptions& options,
                          std::span<const double> importances) {
    check_width(explained, model);
    EvaluationReport report;
    std::vector<double> lengths, coverages, precisions, frs, prs;
    std::size_t conclusive = 0, audited = 0;
    for (Eigen::Index i = 0; i < explained.rows(); ++i) {
        const Eigen::VectorXd x = explained.row(i).transpose();
        Explanation e;
        try {
            e = explain(model, x, options.explain, importances);
        } catch (const TieError&) {
            ++report.ties_skipped;
            continue;
        }
        InstanceMetrics m;
        m.row = static_cast<std::size_t>(i);
        m.rule_length = rule_length(e.rule);
        m.coverage = metric_data.rows() ? coverage(e.rule, metric_data, model) : 0.0;
        if (m.coverage > 0.0)
            m.precision = precision(e.rule, metric_data, model, options.precision_mode, metric_targets);
        m.feature_reduction = reduction_ratio(e.outcome.retained_features.size(), e.baseline.retained_features.size());
        m.path_reduction = reduction_ratio(e.outcome.retained_paths.size(), e.baseline.retained_paths.size());
        if (options.audit) {
            m.conclusive = audit(model, x, e.rule).conclusive;
            ++audited;
            conclusive += *m.conclusive ? 1 : 0;
        }
        lengths.push_back(static_cast<double>(m.rule_length));
        coverages.push_back(m.coverage);
        if (m.precision) precisions.push_back(*m.precision);
        frs.push_back(m.feature_reduction);
        prs.push_back(m.path_reduction);
        report.instances.push_back(m);
    }
    report.rule_length = mean_std(lengths);
    report.coverage = mean_std(coverages);
    report.precision = mean_std(precisions);
    report.feature_reduction = mean_std(frs);
    report.path_reduction = mean_std(prs);
    if (audited) report.conclusive_rate = static_cast<double>(conclusive) / static_cast<double>(audited);
    return report;
}

SweepResult sensitivity_sweep(const Dataset& data, const std::string& dataset_name, Task task,
                              const SweepGrid& grid, const std::function<void(const std::string&)>& log) {
    auto empty = [](const auto& v) { return v.empty(); };
    if (empty(grid.n_estimators) || empty(grid.max_depth) || empty(grid.max_features) ||
        empty(grid.min_samples_leaf) || empty(grid.bootstrap) || empty(grid.methods) || empty(grid.miners) ||
        empty(grid.min_support) || empty(grid.k) || empty(grid.allowed_error_scale) || empty(grid.seeds))
        throw ConfigError("every sweep grid must be non-empty");
    if (!data.has_targets()) throw SchemaError("sweep dataset needs a target column");

    SweepResult result;
    auto skip = [&](const std::string& reason) {
        result.skipped.push_back(reason);
        if (log) log(reason);
    };
    std::vector<std::string> methods;
    for (const std::string& m : grid.methods) {
        try {
            validate_method(m, task);
            methods.push_back(m);
        } catch (const MethodError& err) {
            skip("skipped method " + m + " for " + std::string(to_string(task)) + ": " + err.what());
        }
    }

    for (int n_estimators : grid.n_estimators)
    for (const auto& max_depth : grid.max_depth)
    for (const MaxFeatures& max_features : grid.max_features)
    for (int min_samples_leaf : grid.min_samples_leaf)
    for (bool bootstrap : grid.bootstrap)
    for (std::uint64_t seed : grid.seeds) {
        TrainConfig config{n_estimators, max_depth, max_features, min_samples_leaf, bootstrap, seed};
        try {
            config.validate();
        } catch (const ConfigError& err) {
            skip(std::string("skipped forest configuration: ") + err.what());
            continue;
        }
        const SplitIndices split = split_indices(data.rows(), grid.test_fraction, seed);
        const Dataset train_part = subset(data, split.train);
        const Dataset test_part = subset(data, split.test.empty() ? split.train : split.test);
        const ForestModel model = train(train_part, task, config);
        const FeatureMatrix test_x = align_to_model(test_part, model);
        const Eigen::VectorXd test_y = encode_targets(test_part, model);
        const std::vector<double> importances =
            permutation_importance(model, test_x, test_y, PermutationOptions{5, seed});

        std::vector<std::size_t> order(test_part.rows());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(seed);
        std::shuffle(order.begin(), order.end(), rng);
        order.resize(std::min(order.size(), grid.instances));
        FeatureMatrix explained(static_cast<Eigen::Index>(order.size()), test_x.cols());
        for (std::size_t i = 0; i < order.size(); ++i)
            explained.row(static_cast<Eigen::Index>(i)) = test_x.row(static_cast<Eigen::Index>(order[i]));

        std::optional<double> mae;
        if (task == Task::regression) mae = default_allowed_error(model, test_x, test_y).allowed_error;

        for (const std::string& method : methods)
        for (Miner miner : grid.miners)
        for (double min_support : grid.min_support)
        for (int k : grid.k)
        for (double scale : grid.allowed_error_scale) {
            SweepRow row;
            row.dataset = dataset_name;
            row.task = task;
            row.train = config;
            row.method = method;
            row.miner = miner;
            row.min_support = min_support;
            row.k = k;
            row.allowed_error_scale = scale;
            row.seed = seed;
            if (mae) row.allowed_error = scale * *mae;

            EvaluationOptions options;
            options.explain.method = method;
            options.explain.reducer.miner = miner;
            options.explain.reducer.min_support = min_support;
            options.explain.reducer.k = k;
            options.explain.reducer.seed = seed;
            options.explain.allowed_error = row.allowed_error;
            options.audit = grid.audit;
            try {
                row.report = evaluate(model, explained, test_x, &test_y, options, importances);
            } catch (const ConfigError& err) {
                skip("skipped " + method + " (k=" + std::to_string(k) + "): " + err.what());
                continue;
            }
            result.rows.push_back(std::move(row));
        }
    }
    return result;
}

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "dataset,task,n_estimators,max_depth,max_features,min_samples_leaf,bootstrap,method,miner,"
           "min_support,k,allowed_error_scale,allowed_error,seed,instances,ties_skipped,rule_length_mean,"
           "rule_length_std,coverage_mean,coverage_std,precision_mean,precision_std,fr_mean,fr_std,"
           "pr_mean,pr_std,conclusive_rate\n";
    for (const SweepRow& r : rows) {
        const EvaluationReport& e = r.report;
        out << r.dataset << ',' << to_string(r.task) << ',' << r.train.n_estimators << ','
            << (r.train.max_depth ? std::to_string(*r.train.max_depth) : "none") << ','
            << r.train.max_features.to_string() << ',' << r.train.min_samples_leaf << ','
            << (r.train.bootstrap ? "true" : "false") << ',' << r.method << ',' << to_string(r.miner) << ','
            << num(r.min_support) << ',' << r.k << ',' << num(r.allowed_error_scale) << ','
            << (r.allowed_error ? num(*r.allowed_error) : "") << ',' << r.seed << ',' << e.instances.size() << ','
            << e.ties_skipped << ',' << num(e.rule_length.mean) << ',' << num(e.rule_length.std) << ','
            << num(e.coverage.mean) << ',' << num(e.coverage.std) << ',' << num(e.precision.mean) << ','
            << num(e.precision.std) << ',' << num(e.feature_reduction.mean) << ','
            << num(e.feature_reduction.std) << ',' << num(e.path_reduction.mean) << ','
            << num(e.path_reduction.std) << ',' << (e.conclusive_rate ? num(*e.conclusive_rate) : "") << '\n';
    }
    return out.str();
}

}  // namespace cforest
