#pragma once

#include "conclusive_forest/explanation.hpp"
#include "conclusive_forest/forest_model.hpp"
#include "conclusive_forest/reducers.hpp"

#include <optional>
#include <span>
#include <string>

namespace cforest {

struct ExplainOptions {
    std::string method;  // empty: "123" for classification, "13" for regression
    ReducerOptions reducer;
    std::optional<double> allowed_error;  // required for regression
    bool no_reduction = false;
};

struct Explanation {
    ExplanationRule rule;
    ReductionOutcome outcome;
    ExplanationRule baseline_rule;  // every voting path kept
    ReductionOutcome baseline;
};

std::string default_method(Task task);

/// predict, extract paths, reduce, compose. `importances` orders the
/// conditions (empty: feature id order).
Explanation explain(const ForestModel& model, const InstanceRef& x, const ExplainOptions& options,
                    std::span<const double> importances = {});

}  // namespace cforest
