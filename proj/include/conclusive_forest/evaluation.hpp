#pragma once

#include "conclusive_forest/dataset.hpp"
#include "conclusive_forest/explanation.hpp"
#include "conclusive_forest/itemsets.hpp"
#include "conclusive_forest/pipeline.hpp"
#include "conclusive_forest/trainer.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cforest {

/// Number of conditions (ranges and categorical equalities).
std::size_t rule_length(const ExplanationRule& rule);

/// True when `row` satisfies every condition of `rule`.
bool covers(const ExplanationRule& rule, const InstanceRef& row);

/// Fraction of rows satisfying the antecedent. Columns must follow the
/// model's feature order. Throws SchemaError on a width mismatch and
/// UndefinedMetric on an empty dataset.
double coverage(const ExplanationRule& rule, const FeatureMatrix& data, const ForestModel& model);

enum class PrecisionMode { fidelity, ground_truth };

/// Classification: share of covered rows whose model prediction (or, in
/// ground_truth mode, target class index) equals the consequent.
/// Regression: mean absolute difference to the consequent over covered rows.
/// Throws UndefinedMetric when no row is covered.
double precision(const ExplanationRule& rule, const FeatureMatrix& data, const ForestModel& model,
                 PrecisionMode mode = PrecisionMode::fidelity, const Eigen::VectorXd* targets = nullptr);

/// 1 - |reduced| / |baseline| clamped to [0, 1]; 0 when the baseline is empty.
double reduction_ratio(std::size_t reduced, std::size_t baseline);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};
MeanStd mean_std(const std::vector<double>& values);

struct InstanceMetrics {
    std::size_t row = 0;
    std::size_t rule_length = 0;
    double coverage = 0.0;
    std::optional<double> precision;
    double feature_reduction = 0.0;
    double path_reduction = 0.0;
    std::optional<bool> conclusive;
};

struct EvaluationReport {
    std::vector<InstanceMetrics> instances;
    std::size_t ties_skipped = 0;
    MeanStd rule_length;
    MeanStd coverage;
    MeanStd precision;  // over instances with a defined precision
    MeanStd feature_reduction;
    MeanStd path_reduction;
    std::optional<double> conclusive_rate;
};

struct EvaluationOptions {
    ExplainOptions explain;
    PrecisionMode precision_mode = PrecisionMode::fidelity;
    bool audit = true;
};

/// Explains each row of `explained` and scores the rules on `metric_data`
/// (both in model feature order). Rows whose votes tie are counted and skipped.
EvaluationReport evaluate(const ForestModel& model, const FeatureMatrix& explained, const FeatureMatrix& metric_data,
                          const Eigen::VectorXd* metric_targets, const EvaluationOptions& options,
                          std::span<const double> importances = {});

struct SweepGrid {
    std::vector<int> n_estimators{100};
    std::vector<std::optional<int>> max_depth{std::nullopt};
    std::vector<MaxFeatures> max_features{MaxFeatures{}};
    std::vector<int> min_samples_leaf{1};
    std::vector<bool> bootstrap{true};
    std::vector<std::string> methods{"123"};
    std::vector<Miner> miners{Miner::apriori};
    std::vector<double> min_support{0.1};
    std::vector<int> k{5};
    std::vector<double> allowed_error_scale{1.0};  // multiples of the model MAE (regression)
    std::vector<std::uint64_t> seeds{0};
    std::size_t instances = 20;
    double test_fraction = 0.25;
    bool audit = true;
};

struct SweepRow {
    std::string dataset;
    Task task = Task::binary;
    TrainConfig train;
    std::string method;
    Miner miner = Miner::apriori;
    double min_support = 0.1;
    int k = 5;
    double allowed_error_scale = 1.0;
    std::optional<double> allowed_error;
    std::uint64_t seed = 0;
    EvaluationReport report;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<std::string> skipped;  // one reason per infeasible combination
};

/// Cross product of the grids. For each forest configuration and seed the
/// data is split, a forest trained on the training part, and `instances`
/// seeded test rows explained and scored against the test part.
/// Combinations a task does not support are skipped with a reason passed to
/// `log` and recorded in the result.
SweepResult sensitivity_sweep(const Dataset& data, const std::string& dataset_name, Task task,
                              const SweepGrid& grid,
                              const std::function<void(const std::string&)>& log = {});

/// Fixed column order:
/// dataset,task,n_estimators,max_depth,max_features,min_samples_leaf,bootstrap,method,miner,
/// min_support,k,allowed_error_scale,allowed_error,seed,instances,ties_skipped,rule_length_mean,
/// rule_length_std,coverage_mean,coverage_std,precision_mean,precision_std,fr_mean,fr_std,
/// pr_mean,pr_std,conclusive_rate
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace cforest
