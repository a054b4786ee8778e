#pragma once

#include "conclusive_forest/forest_model.hpp"
#include "conclusive_forest/reducers.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cforest {

enum class BoundOrigin { path_bound, domain_bound };

/// Numeric condition `lower (<|<=) x[feature] (<|<=) upper`. Bounds taken
/// from a path's `>` condition are exclusive; all others inclusive.
struct FeatureRange {
    int feature = 0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    bool lower_inclusive = true;
    bool upper_inclusive = true;
    BoundOrigin lower_origin = BoundOrigin::domain_bound;
    BoundOrigin upper_origin = BoundOrigin::domain_bound;

    bool contains(double v) const {
        return (lower_inclusive ? v >= lower : v > lower) && (upper_inclusive ? v <= upper : v < upper);
    }
};

/// `group = value`, backed by the one-hot column `feature`.
struct CategoricalEquality {
    std::string group;
    std::string value;
    int feature = -1;
};

using RuleCondition = std::variant<FeatureRange, CategoricalEquality>;

struct Alternatives {
    std::string group;
    std::vector<std::string> values;
};

struct Consequent {
    int class_index = -1;
    std::string label;
    double value = 0.0;
    std::optional<double> local_error;
    std::optional<double> allowed_error;
};

struct ExplanationRule {
    Task task = Task::binary;
    std::vector<RuleCondition> conditions;
    std::vector<Alternatives> alternatives;
    Consequent consequent;
    std::vector<std::string> method_trace;
    std::vector<int> retained_trees;

    const FeatureRange* range_for(int feature) const;
    const CategoricalEquality* equality_for(std::string_view group) const;
    const Alternatives* alternatives_for(std::string_view group) const;
};

/// Per retained numeric feature, the overlap of every retained path's
/// interval. Open sides fall back to the declared domain (widened to the
/// instance value if it lies outside). One-hot columns are skipped.
std::vector<FeatureRange> intersect_ranges(const ReductionOutcome& outcome, const InstanceRef& x,
                                           const std::vector<FeatureSpec>& features);

struct CategoricalResolution {
    std::vector<CategoricalEquality> equalities;
    std::vector<Alternatives> alternatives;
};

/// Throws SchemaError when a group of `x` does not hold exactly one active member.
CategoricalResolution resolve_categoricals(const ReductionOutcome& outcome, const InstanceRef& x,
                                           const std::vector<FeatureSpec>& features);

struct PermutationOptions {
    int repeats = 5;
    std::uint64_t seed = 0;
};

/// Mean drop of weighted F1 (classification) or rise of MAE (regression)
/// over `repeats` shuffles of each column. `targets` hold class indices for
/// classification.
std::vector<double> permutation_importance(const ForestModel& model, const FeatureMatrix& features,
                                           const Eigen::VectorXd& targets, const PermutationOptions& options = {});

double weighted_f1(std::span<const int> truth, std::span<const int> predicted, std::size_t n_classes);

/// Builds the final rule. Conditions are ordered by descending importance,
/// ties by feature id. Empty `importances` means all zero.
ExplanationRule compose_rule(const ReductionOutcome& outcome, const InstanceRef& x, const ForestModel& model,
                             std::span<const double> importances,
                             std::optional<double> allowed_error = std::nullopt);

enum class RenderFormat { text, json, plotdata };
RenderFormat render_format_from_string(std::string_view name);

/// Extra inputs for plot data: training values for the histograms, the
/// no-reduction rule for the outer bounds, and the instance.
struct PlotInputs {
    const FeatureMatrix* training = nullptr;
    const ExplanationRule* baseline = nullptr;
    std::optional<Eigen::VectorXd> instance;
    int bins = 10;
};

std::string render(const ExplanationRule& rule, const ForestModel& model, RenderFormat format,
                   const PlotInputs& plot = {});

/// Reads a rule in the json render format. Ranges may omit a bound (or set
/// it to null) to leave that side open; features resolve by id or name.
ExplanationRule parse_rule_json(std::string_view document, const ForestModel& model);

}  // namespace cforest
