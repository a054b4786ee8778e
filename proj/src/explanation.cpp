#include "conclusive_forest/explanation.hpp"

#include "conclusive_forest/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace cforest {

using nlohmann::json;

const FeatureRange* ExplanationRule::range_for(int feature) const {
    for (const RuleCondition& c : conditions)
        if (const auto* r = std::get_if<FeatureRange>(&c); r && r->feature == feature) return r;
    return nullptr;
}

const CategoricalEquality* ExplanationRule::equality_for(std::string_view group) const {
    for (const RuleCondition& c : conditions)
        if (const auto* e = std::get_if<CategoricalEquality>(&c); e && e->group == group) return e;
    return nullptr;
}

const Alternatives* ExplanationRule::alternatives_for(std::string_view group) const {
    for (const Alternatives& a : alternatives)
        if (a.group == group) return &a;
    return nullptr;
}

std::vector<FeatureRange> intersect_ranges(const ReductionOutcome& outcome, const InstanceRef& x,
                                           const std::vector<FeatureSpec>& features) {
    std::vector<FeatureRange> out;
    for (int f : outcome.retained_features) {
        const FeatureSpec& spec = features[static_cast<std::size_t>(f)];
        if (spec.is_one_hot()) continue;
        Interval iv;
        for (const DecisionPath& p : outcome.retained_paths)
            if (auto pi = path_interval(p, f)) {
                iv.lower = std::max(iv.lower, pi->lower);
                iv.upper = std::min(iv.upper, pi->upper);
            }
        const double v = x[f];
        FeatureRange r;
        r.feature = f;
        if (std::isinf(iv.lower)) {
            r.lower = std::min(spec.domain_min, v);
        } else {
            r.lower = iv.lower;
            r.lower_inclusive = false;
            r.lower_origin = BoundOrigin::path_bound;
        }
        if (std::isinf(iv.upper)) {
            r.upper = std::max(spec.domain_max, v);
        } else {
            r.upper = iv.upper;
            r.upper_origin = BoundOrigin::path_bound;
        }
        if (!r.contains(v))
            throw Error("internal consistency failure: range of feature '" + spec.name +
                        "' excludes the instance value");
        out.push_back(r);
    }
    return out;
}

CategoricalResolution resolve_categoricals(const ReductionOutcome& outcome, const InstanceRef& x,
                                           const std::vector<FeatureSpec>& features) {
    const std::set<int> used(outcome.retained_features.begin(), outcome.retained_features.end());
    CategoricalResolution out;
    for (const OneHotGroup& g : one_hot_groups(features)) {
        int active = -1;
        int active_count = 0;
        for (int m : g.members)
            if (x[m] > 0.5) {
                active = m;
                ++active_count;
            }
        if (active_count != 1)
            throw SchemaError("group '" + g.name + "' must have exactly one active member, found " +
                              std::to_string(active_count));
        Alternatives alt{g.name, {}};
        for (int m : g.members) {
            if (!used.count(m)) continue;
            const FeatureSpec& spec = features[static_cast<std::size_t>(m)];
            if (m == active)
                out.equalities.push_back({g.name, spec.member_value, m});
            else
                alt.values.push_back(spec.member_value);
        }
        if (!alt.values.empty()) out.alternatives.push_back(std::move(alt));
    }
    return out;
}

double weighted_f1(std::span<const int> truth, std::span<const int> predicted, std::size_t n_classes) {
    std::vector<double> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0), support(n_classes, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto t = static_cast<std::size_t>(truth[i]);
        const auto p = static_cast<std::size_t>(predicted[i]);
        support[t] += 1;
        if (t == p) {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn[t] += 1;
        }
    }
    double total = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (support[c] == 0) continue;
        const double denom = 2 * tp[c] + fp[c] + fn[c];
        total += support[c] * (denom > 0 ? 2 * tp[c] / denom : 0.0);
    }
    return truth.empty() ? 0.0 : total / static_cast<double>(truth.size());
}

namespace {

double score(const ForestModel& model, const FeatureMatrix& features, const Eigen::VectorXd& targets) {
    const auto n = features.rows();
    if (model.task() == Task::regression) {
        double err = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            err += std::abs(model.predict(features.row(i).transpose()).value - targets[i]);
        return -err / static_cast<double>(n);  // higher is better
    }
    std::vector<int> truth(static_cast<std::size_t>(n)), pred(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        truth[static_cast<std::size_t>(i)] = static_cast<int>(targets[i]);
        pred[static_cast<std::size_t>(i)] = model.predict(features.row(i).transpose()).class_index;
    }
    return weighted_f1(truth, pred, model.classes().size());
}

}  // namespace

std::vector<double> permutation_importance(const ForestModel& model, const FeatureMatrix& features,
                                           const Eigen::VectorXd& targets, const PermutationOptions& options) {
    if (features.rows() == 0) throw Error("permutation importance needs a non-empty dataset");
    if (static_cast<std::size_t>(features.cols()) != model.num_features())
        throw SchemaError("dataset width differs from the model's feature count");
    if (targets.size() != features.rows()) throw SchemaError("targets and features differ in length");
    if (options.repeats < 1) throw ConfigError("repeats must be >= 1");

    const double base = score(model, features, targets);
    std::vector<double> importance(model.num_features(), 0.0);
    FeatureMatrix shuffled = features;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(features.rows()));
    for (std::size_t f = 0; f < model.num_features(); ++f) {
        if (model.trees_using(static_cast<int>(f)).empty()) continue;  // output cannot move
        const auto col = static_cast<Eigen::Index>(f);
        double drop = 0.0;
        for (int r = 0; r < options.repeats; ++r) {
            std::seed_seq seq{options.seed, static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(r)};
            std::mt19937_64 rng(seq);
            std::iota(order.begin(), order.end(), Eigen::Index{0});
            std::shuffle(order.begin(), order.end(), rng);
            for (Eigen::Index i = 0; i < features.rows(); ++i)
                shuffled(i, col) = features(order[static_cast<std::size_t>(i)], col);
            drop += base - score(model, shuffled, targets);
        }
        shuffled.col(col) = features.col(col);
        importance[f] = drop / options.repeats;
    }
    return importance;
}

ExplanationRule compose_rule(const ReductionOutcome& outcome, const InstanceRef& x, const ForestModel& model,
                             std::span<const double> importances, std::optional<double> allowed_error) {
    ExplanationRule rule;
    rule.task = model.task();
    auto ranges = intersect_ranges(outcome, x, model.features());
    auto categoricals = resolve_categoricals(outcome, x, model.features());

    struct Keyed {
        double importance;
        int feature;
        RuleCondition condition;
    };
    auto importance_of = [&](int f) {
        return importances.empty() ? 0.0 : importances[static_cast<std::size_t>(f)];
    };
    std::vector<Keyed> keyed;
    for (const FeatureRange& r : ranges) keyed.push_back({importance_of(r.feature), r.feature, r});
    for (const CategoricalEquality& e : categoricals.equalities)
        keyed.push_back({importance_of(e.feature), e.feature, e});
    std::stable_sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
        return a.importance != b.importance ? a.importance > b.importance : a.feature < b.feature;
    });
    for (Keyed& k : keyed) rule.conditions.push_back(std::move(k.condition));
    rule.alternatives = std::move(categoricals.alternatives);

    const Prediction p = model.predict(x);
    if (model.task() == Task::regression) {
        rule.consequent.value = p.value;
        rule.consequent.local_error = outcome.achieved_local_error.value_or(0.0);
        rule.consequent.allowed_error = allowed_error;
    } else {
        rule.consequent.class_index = p.class_index;
        rule.consequent.label = model.classes()[static_cast<std::size_t>(p.class_index)];
    }
    rule.method_trace = outcome.method_trace;
    rule.retained_trees = outcome.retained_trees();
    return rule;
}

RenderFormat render_format_from_string(std::string_view name) {
    if (name == "text") return RenderFormat::text;
    if (name == "json") return RenderFormat::json;
    if (name == "plotdata") return RenderFormat::plotdata;
    throw ConfigError("unknown format '" + std::string(name) + "'");
}

namespace {

std::string num(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

json bound(double v) { return std::isinf(v) ? json(nullptr) : json(v); }

std::string origin_name(BoundOrigin o) { return o == BoundOrigin::path_bound ? "path_bound" : "domain_bound"; }

std::string render_text(const ExplanationRule& rule, const ForestModel& model) {
    std::ostringstream out;
    out << "if";
    bool first = true;
    for (const RuleCondition& c : rule.conditions) {
        out << (first ? " " : " and ");
        first = false;
        if (const auto* r = std::get_if<FeatureRange>(&c)) {
            const std::string& name = model.feature(r->feature).name;
            if (!std::isinf(r->lower)) out << num(r->lower) << (r->lower_inclusive ? " <= " : " < ");
            out << name;
            if (!std::isinf(r->upper)) out << (r->upper_inclusive ? " <= " : " < ") << num(r->upper);
        } else {
            const auto& e = std::get<CategoricalEquality>(c);
            out << e.group << " = " << e.value;
        }
    }
    out << " then ";
    if (rule.task == Task::regression)
        out << num(rule.consequent.value) << " ± " << num(rule.consequent.local_error.value_or(0.0));
    else
        out << rule.consequent.label;
    out << '\n';
    for (const Alternatives& a : rule.alternatives) {
        out << "alternative values that may change the prediction: " << a.group << " in {";
        for (std::size_t i = 0; i < a.values.size(); ++i) out << (i ? ", " : "") << a.values[i];
        out << "}\n";
    }
    return out.str();
}

json rule_to_json(const ExplanationRule& rule, const ForestModel& model) {
    json conditions = json::array();
    for (const RuleCondition& c : rule.conditions) {
        if (const auto* r = std::get_if<FeatureRange>(&c)) {
            conditions.push_back({{"kind", "range"},
                                  {"feature", r->feature},
                                  {"name", model.feature(r->feature).name},
                                  {"lower", bound(r->lower)},
                                  {"upper", bound(r->upper)},
                                  {"lower_inclusive", r->lower_inclusive},
                                  {"upper_inclusive", r->upper_inclusive},
                                  {"lower_origin", origin_name(r->lower_origin)},
                                  {"upper_origin", origin_name(r->upper_origin)}});
        } else {
            const auto& e = std::get<CategoricalEquality>(c);
            conditions.push_back({{"kind", "categorical"}, {"group", e.group}, {"value", e.value}});
        }
    }
    json alternatives = json::object();
    for (const Alternatives& a : rule.alternatives) alternatives[a.group] = a.values;

    json consequent;
    if (rule.task == Task::regression) {
        consequent["value"] = rule.consequent.value;
        consequent["local_error"] = rule.consequent.local_error.value_or(0.0);
        consequent["allowed_error"] =
            rule.consequent.allowed_error ? json(*rule.consequent.allowed_error) : json(nullptr);
    } else {
        consequent["class_index"] = rule.consequent.class_index;
        consequent["label"] = rule.consequent.label;
    }
    return {{"format_version", "1"},
            {"task", std::string(to_string(rule.task))},
            {"conditions", std::move(conditions)},
            {"alternatives", std::move(alternatives)},
            {"consequent", std::move(consequent)},
            {"trace", {{"methods", rule.method_trace}, {"retained_trees", rule.retained_trees}}}};
}

json histogram(const FeatureMatrix& data, int f, const FeatureSpec& spec, int bins) {
    json edges = json::array();
    std::vector<long long> counts(static_cast<std::size_t>(bins), 0);
    const double lo = spec.domain_min;
    const double hi = spec.domain_max;
    const double width = (hi - lo) / bins;
    for (int b = 0; b <= bins; ++b) edges.push_back(b == bins ? hi : lo + width * b);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const double v = data(i, f);
        int b = width > 0 ? static_cast<int>((v - lo) / width) : 0;
        b = std::clamp(b, 0, bins - 1);
        ++counts[static_cast<std::size_t>(b)];
    }
    return {{"edges", edges}, {"counts", counts}};
}

json render_plot(const ExplanationRule& rule, const ForestModel& model, const PlotInputs& plot) {
    json doc = json::object();
    for (const RuleCondition& c : rule.conditions) {
        const auto* r = std::get_if<FeatureRange>(&c);
        if (!r) continue;
        const FeatureSpec& spec = model.feature(r->feature);
        json entry;
        entry["histogram"] = plot.training ? histogram(*plot.training, r->feature, spec, plot.bins)
                                           : json{{"edges", json::array()}, {"counts", json::array()}};
        entry["instance_value"] = plot.instance ? json((*plot.instance)[r->feature]) : json(nullptr);
        entry["reduced"] = {bound(r->lower), bound(r->upper)};
        const FeatureRange* base = plot.baseline ? plot.baseline->range_for(r->feature) : nullptr;
        entry["original"] = base ? json{bound(base->lower), bound(base->upper)}
                                 : json{spec.domain_min, spec.domain_max};
        doc[spec.name] = std::move(entry);
    }
    json categoricals = json::object();
    for (const OneHotGroup& g : one_hot_groups(model.features())) {
        const auto* eq = rule.equality_for(g.name);
        const auto* alt = rule.alternatives_for(g.name);
        if (!eq && !alt) continue;
        std::string current;
        if (plot.instance)
            for (int m : g.members)
                if ((*plot.instance)[m] > 0.5) current = model.feature(m).member_value;
        if (current.empty() && eq) current = eq->value;
        categoricals[g.name] = {{"current", current},
                                {"alternatives", alt ? alt->values : std::vector<std::string>{}}};
    }
    doc["categoricals"] = std::move(categoricals);
    return doc;
}

}  // namespace

std::string render(const ExplanationRule& rule, const ForestModel& model, RenderFormat format,
                   const PlotInputs& plot) {
    switch (format) {
        case RenderFormat::text: return render_text(rule, model);
        case RenderFormat::json: return rule_to_json(rule, model).dump(2) + "\n";
        case RenderFormat::plotdata: return render_plot(rule, model, plot).dump(2) + "\n";
    }
    return {};
}

namespace {

int resolve_feature(const json& c, const ForestModel& model) {
    if (c.contains("feature") && !c["feature"].is_null()) {
        const int f = c["feature"].get<int>();
        if (f < 0 || static_cast<std::size_t>(f) >= model.num_features())
            throw SchemaError("rule references unknown feature id " + std::to_string(f));
        return f;
    }
    const auto name = c.at("name").get<std::string>();
    for (const FeatureSpec& spec : model.features())
        if (spec.name == name) return spec.id;
    throw SchemaError("rule references unknown feature '" + name + "'");
}

double read_bound(const json& c, const char* key, double open) {
    if (!c.contains(key) || c[key].is_null()) return open;
    return c[key].get<double>();
}

BoundOrigin read_origin(const json& c, const char* key) {
    return c.contains(key) && c[key] == "path_bound" ? BoundOrigin::path_bound : BoundOrigin::domain_bound;
}

}  // namespace

ExplanationRule parse_rule_json(std::string_view document, const ForestModel& model) {
    try {
        const json doc = json::parse(document);
        ExplanationRule rule;
        rule.task = doc.contains("task") ? task_from_string(doc["task"].get<std::string>()) : model.task();
        if (rule.task != model.task()) throw SchemaError("rule task differs from model task");
        constexpr double inf = std::numeric_limits<double>::infinity();
        for (const json& c : doc.value("conditions", json::array())) {
            const auto kind = c.at("kind").get<std::string>();
            if (kind == "range") {
                FeatureRange r;
                r.feature = resolve_feature(c, model);
                r.lower = read_bound(c, "lower", -inf);
                r.upper = read_bound(c, "upper", inf);
                r.lower_inclusive = c.value("lower_inclusive", true);
                r.upper_inclusive = c.value("upper_inclusive", true);
                r.lower_origin = read_origin(c, "lower_origin");
                r.upper_origin = read_origin(c, "upper_origin");
                rule.conditions.emplace_back(r);
            } else if (kind == "categorical") {
                CategoricalEquality e{c.at("group").get<std::string>(), c.at("value").get<std::string>(), -1};
                for (const FeatureSpec& spec : model.features())
                    if (spec.is_one_hot() && spec.group == e.group && spec.member_value == e.value) e.feature = spec.id;
                if (e.feature < 0)
                    throw SchemaError("rule references unknown category " + e.group + "=" + e.value);
                rule.conditions.emplace_back(std::move(e));
            } else {
                throw SchemaError("unknown condition kind '" + kind + "'");
            }
        }
        if (doc.contains("alternatives"))
            for (const auto& [group, values] : doc["alternatives"].items())
                rule.alternatives.push_back({group, values.get<std::vector<std::string>>()});

        const json& cq = doc.at("consequent");
        if (rule.task == Task::regression) {
            rule.consequent.value = cq.at("value").get<double>();
            if (cq.contains("local_error") && !cq["local_error"].is_null())
                rule.consequent.local_error = cq["local_error"].get<double>();
            if (cq.contains("allowed_error") && !cq["allowed_error"].is_null())
                rule.consequent.allowed_error = cq["allowed_error"].get<double>();
        } else {
            if (cq.contains("class_index")) {
                rule.consequent.class_index = cq["class_index"].get<int>();
            } else {
                const auto label = cq.at("label").get<std::string>();
                const auto& cls = model.classes();
                const auto it = std::find(cls.begin(), cls.end(), label);
                if (it == cls.end()) throw SchemaError("rule consequent names unknown class '" + label + "'");
                rule.consequent.class_index = static_cast<int>(it - cls.begin());
            }
            if (rule.consequent.class_index < 0 ||
                static_cast<std::size_t>(rule.consequent.class_index) >= model.classes().size())
                throw SchemaError("rule consequent class out of range");
            rule.consequent.label = model.classes()[static_cast<std::size_t>(rule.consequent.class_index)];
        }
        if (doc.contains("trace")) {
            rule.method_trace = doc["trace"].value("methods", std::vector<std::string>{});
            rule.retained_trees = doc["trace"].value("retained_trees", std::vector<int>{});
        }
        return rule;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed rule document: ") + e.what());
    }
}

}  // namespace cforest
