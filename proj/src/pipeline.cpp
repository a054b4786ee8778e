#include "conclusive_forest/pipeline.hpp"

#include "conclusive_forest/errors.hpp"

namespace cforest {

std::string default_method(Task task) { return task == Task::regression ? "13" : "123"; }

Explanation explain(const ForestModel& model, const InstanceRef& x, const ExplainOptions& options,
                    std::span<const double> importances) {
    model.check_instance(x);
    std::optional<ErrorBudget> budget;
    if (model.task() == Task::regression) {
        if (!options.allowed_error) throw ConfigError("regression explanations need an allowed error");
        if (!(*options.allowed_error >= 0.0)) throw ConfigError("allowed error must be non-negative");
        budget = ErrorBudget{*options.allowed_error, ErrorBudget::Source::user};
    }
    const auto ctx = ReductionContext::from_model(model, x, budget);
    const std::string method = options.method.empty() ? default_method(model.task()) : options.method;
    validate_method(method, model.task());

    Explanation out;
    out.baseline = ctx.no_reduction();
    out.baseline_rule = compose_rule(out.baseline, x, model, importances, options.allowed_error);
    if (options.no_reduction) {
        out.outcome = out.baseline;
        out.rule = out.baseline_rule;
    } else {
        out.outcome = run_pipeline(ctx, method, options.reducer);
        out.rule = compose_rule(out.outcome, x, model, importances, options.allowed_error);
    }
    return out;
}

}  // namespace cforest
