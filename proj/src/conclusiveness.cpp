#include "conclusive_forest/conclusiveness.hpp"

#include "conclusive_forest/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace cforest {

std::vector<double> breakpoints(const ForestModel& model, int feature) {
    std::vector<double> out;
    for (int t : model.trees_using(feature))
        for (const TreeNode& node : model.tree(static_cast<std::size_t>(t)).nodes)
            if (!node.is_leaf() && node.feature == feature) out.push_back(node.threshold);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<double> probe_values(const std::vector<double>& breaks, double lower, double upper,
                                 bool lower_inclusive, bool upper_inclusive) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const std::optional<double> lo =
        std::isinf(lower) ? std::nullopt
                          : std::optional<double>(lower_inclusive ? lower : std::nextafter(lower, inf));
    const std::optional<double> hi =
        std::isinf(upper) ? std::nullopt
                          : std::optional<double>(upper_inclusive ? upper : std::nextafter(upper, -inf));
    if (lo && hi && *lo > *hi) return {};

    // breakpoints strictly inside the probed span split it into constant pieces (b_i, b_{i+1}]
    std::vector<double> inner;
    for (double b : breaks)
        if ((!lo || b > *lo) && (!hi || b < *hi)) inner.push_back(b);

    std::vector<double> out;
    if (lo) out.push_back(*lo);
    else if (!inner.empty()) out.push_back(inner.front());
    for (std::size_t i = 0; i + 1 < inner.size(); ++i) {
        const double mid = inner[i] + (inner[i + 1] - inner[i]) / 2.0;
        out.push_back(mid > inner[i] ? mid : inner[i + 1]);
    }
    if (hi) {
        out.push_back(*hi);
    } else if (!inner.empty()) {
        out.push_back(inner.back() + std::max(1.0, std::abs(inner.back())));
    } else if (lo) {
        out.push_back(*lo + std::max(1.0, std::abs(*lo)));
    }
    if (out.empty()) out.push_back(0.0);  // unbounded on both sides with no breakpoints: constant
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

/// Re-evaluates only the trees that can react to the perturbed columns.
class Prober {
public:
    Prober(const ForestModel& model, const InstanceRef& x) : model_(model), x_(x) {
        outputs_.reserve(model.num_trees());
        base_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.output_size()));
        for (const Tree& tree : model.trees()) {
            outputs_.push_back(tree.output(x_));
            base_ += outputs_.back();
        }
    }

    Prediction evaluate(const std::vector<int>& trees, const Eigen::VectorXd& perturbed) {
        ++probes_;
        Eigen::VectorXd sum = base_;
        for (int t : trees) {
            sum -= outputs_[static_cast<std::size_t>(t)];
            sum += model_.tree(static_cast<std::size_t>(t)).output(perturbed);
        }
        return model_.combine(sum);
    }

    std::size_t probes() const { return probes_; }

private:
    const ForestModel& model_;
    Eigen::VectorXd x_;
    Eigen::VectorXd base_;
    std::vector<Eigen::VectorXd> outputs_;
    std::size_t probes_ = 0;
};

}  // namespace

AuditReport audit(const ForestModel& model, const InstanceRef& x, const ExplanationRule& rule, std::string rule_id) {
    model.check_instance(x);
    if (rule.task != model.task()) throw SchemaError("rule task differs from model task");
    const Prediction reference = model.predict(x);
    double tolerance = 0.0;
    if (model.task() == Task::regression) {
        if (std::abs(rule.consequent.value - reference.value) > 1e-9 * std::max(1.0, std::abs(reference.value)))
            throw ConsequentMismatch("rule consequent " + std::to_string(rule.consequent.value) +
                                     " differs from the model prediction " + std::to_string(reference.value));
        tolerance = rule.consequent.allowed_error.value_or(rule.consequent.local_error.value_or(0.0)) +
                    1e-9 * std::max(1.0, std::abs(reference.value));
    } else if (rule.consequent.class_index != reference.class_index) {
        throw ConsequentMismatch("rule consequent '" + rule.consequent.label + "' differs from the model prediction '" +
                                 model.classes()[static_cast<std::size_t>(reference.class_index)] + "'");
    }
    auto changed = [&](const Prediction& p) {
        return model.task() == Task::regression ? std::abs(p.value - rule.consequent.value) > tolerance
                                                : p.class_index != rule.consequent.class_index;
    };

    AuditReport report;
    report.rule_id = std::move(rule_id);
    Prober prober(model, x);
    Eigen::VectorXd perturbed = x;

    for (const FeatureSpec& spec : model.features()) {
        if (spec.is_one_hot()) continue;
        const int f = spec.id;
        const auto& trees = model.trees_using(f);
        if (trees.empty()) continue;  // the output cannot depend on f
        const FeatureRange* r = rule.range_for(f);
        const auto probes = r ? probe_values(breakpoints(model, f), r->lower, r->upper, r->lower_inclusive,
                                             r->upper_inclusive)
                              : probe_values(breakpoints(model, f), spec.domain_min, spec.domain_max);
        for (double v : probes) {
            perturbed[f] = v;
            const Prediction p = prober.evaluate(trees, perturbed);
            if (changed(p)) report.violations.push_back({f, {}, v, {}, p.class_index, p.value});
        }
        perturbed[f] = x[f];
    }

    for (const OneHotGroup& g : one_hot_groups(model.features())) {
        if (rule.equality_for(g.name)) continue;
        const Alternatives* alt = rule.alternatives_for(g.name);
        std::set<int> tree_set;
        for (int m : g.members) tree_set.insert(model.trees_using(m).begin(), model.trees_using(m).end());
        if (tree_set.empty()) continue;
        const std::vector<int> trees(tree_set.begin(), tree_set.end());
        for (int m : g.members) {
            const std::string& value = model.feature(m).member_value;
            if (alt && std::find(alt->values.begin(), alt->values.end(), value) != alt->values.end()) continue;
            for (int other : g.members) perturbed[other] = other == m ? 1.0 : 0.0;
            const Prediction p = prober.evaluate(trees, perturbed);
            if (changed(p)) report.violations.push_back({-1, g.name, 0.0, value, p.class_index, p.value});
        }
        for (int other : g.members) perturbed[other] = x[other];
    }

    std::sort(report.violations.begin(), report.violations.end(), [](const Violation& a, const Violation& b) {
        if (a.feature != b.feature) return a.feature < b.feature;
        if (a.group != b.group) return a.group < b.group;
        if (a.value != b.value) return a.value < b.value;
        return a.category < b.category;
    });
    report.probes_evaluated = prober.probes();
    report.conclusive = report.violations.empty();
    return report;
}

std::string audit_to_json(const AuditReport& report, const ForestModel& model) {
    using nlohmann::json;
    json violations = json::array();
    for (const Violation& v : report.violations) {
        json j;
        if (v.feature >= 0) {
            j["feature"] = v.feature;
            j["name"] = model.feature(v.feature).name;
            j["value"] = v.value;
        } else {
            j["group"] = v.group;
            j["category"] = v.category;
        }
        if (model.task() == Task::regression) {
            j["new_prediction"] = v.new_value;
        } else {
            j["new_class_index"] = v.new_class;
            j["new_prediction"] = model.classes()[static_cast<std::size_t>(v.new_class)];
        }
        violations.push_back(std::move(j));
    }
    json doc{{"rule_id", report.rule_id},
             {"verdict", report.conclusive ? "conclusive" : "violated"},
             {"violations", std::move(violations)},
             {"probes_evaluated", report.probes_evaluated}};
    return doc.dump(2) + "\n";
}

}  // namespace cforest
