#pragma once

#include "conclusive_forest/explanation.hpp"
#include "conclusive_forest/forest_model.hpp"

#include <string>
#include <vector>

namespace cforest {

struct Violation {
    int feature = -1;         // numeric feature, or -1 for a categorical group
    std::string group;        // categorical group, empty for numeric
    double value = 0.0;       // probed numeric value
    std::string category;     // probed category
    int new_class = -1;
    double new_value = 0.0;
};

struct AuditReport {
    std::string rule_id;
    bool conclusive = true;
    std::vector<Violation> violations;  // sorted by feature/group, then value
    std::size_t probes_evaluated = 0;
};

/// Sorted distinct thresholds on `feature` over every tree.
std::vector<double> breakpoints(const ForestModel& model, int feature);

/// One representative value for every interval on which the model is
/// constant along a single feature, restricted to the given bounds (either
/// may be infinite), plus the reachable endpoints.
std::vector<double> probe_values(const std::vector<double>& breaks, double lower, double upper,
                                 bool lower_inclusive = true, bool upper_inclusive = true);

/// Single-feature perturbation audit of `rule` at `x`.
///  - numeric features outside the rule: every probe over the declared domain;
///  - numeric features in the rule: every probe within the rule's range;
///  - one-hot groups: absent from the rule, every category; present only
///    through alternatives, every category not listed; with an equality the
///    group is pinned to its value and not probed.
/// A probe that changes the class (or moves a regression prediction more
/// than the allowed error away from the consequent) is a violation.
/// Throws ConsequentMismatch when the rule does not match predict(x).
AuditReport audit(const ForestModel& model, const InstanceRef& x, const ExplanationRule& rule,
                  std::string rule_id = {});

std::string audit_to_json(const AuditReport& report, const ForestModel& model);

}  // namespace cforest
