#include "conclusive_forest/cli.hpp"

#include "conclusive_forest/conclusiveness.hpp"
#include "conclusive_forest/dataset.hpp"
#include "conclusive_forest/errors.hpp"
#include "conclusive_forest/evaluation.hpp"
#include "conclusive_forest/explanation.hpp"
#include "conclusive_forest/model_io.hpp"
#include "conclusive_forest/pipeline.hpp"
#include "conclusive_forest/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <iostream>
#include <sstream>

namespace cforest {

namespace {

constexpr std::uint64_t default_seed = 0;
constexpr const char* seed_env = "CONCLUSIVE_FOREST_SEED";

std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t value) {
    if (opt->count()) return value;
    if (const char* env = std::getenv(seed_env)) {
        const std::string_view s(env);
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size())
            throw ConfigError(std::string(seed_env) + " is not an unsigned integer: '" + env + "'");
        return v;
    }
    return default_seed;
}

void emit(const std::string& out_path, const std::string& contents, std::ostream& out) {
    if (out_path.empty()) out << contents;
    else write_file_atomically(out_path, contents);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> items;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) items.push_back(item);
    return items;
}

double parse_double(const std::string& s, const std::string& what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError(what + ": not a number '" + s + "'");
    return v;
}

int parse_int(const std::string& s, const std::string& what) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError(what + ": not an integer '" + s + "'");
    return v;
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

struct InstanceArgs {
    std::string data;
    std::string target = "target";
    std::optional<std::size_t> row;
    std::string values;
};

void add_instance_options(CLI::App* cmd, InstanceArgs& a) {
    cmd->add_option("--data", a.data, "CSV with the model's feature columns");
    cmd->add_option("--target", a.target, "Name of the target column")->capture_default_str();
    auto* row = cmd->add_option("--row", a.row, "0-based data row to explain");
    auto* values = cmd->add_option("--values", a.values, "Comma-separated feature values in model order");
    row->excludes(values);
    values->excludes(row);
}

Eigen::VectorXd resolve_instance(const InstanceArgs& a, const ForestModel& model,
                                 const std::optional<FeatureMatrix>& data) {
    if (a.row) {
        if (!data) throw ConfigError("--row needs --data");
        if (*a.row >= static_cast<std::size_t>(data->rows()))
            throw ConfigError("--row " + std::to_string(*a.row) + " is out of range (" +
                              std::to_string(data->rows()) + " rows)");
        return data->row(static_cast<Eigen::Index>(*a.row)).transpose();
    }
    if (a.values.empty()) throw ConfigError("give the instance with --row or --values");
    const auto cells = split_list(a.values);
    if (cells.size() != model.num_features())
        throw SchemaError("--values has " + std::to_string(cells.size()) + " entries, model expects " +
                          std::to_string(model.num_features()));
    Eigen::VectorXd x(static_cast<Eigen::Index>(cells.size()));
    for (std::size_t i = 0; i < cells.size(); ++i) x[static_cast<Eigen::Index>(i)] = parse_double(cells[i], "--values");
    return x;
}

struct TrainArgs {
    std::string data, target = "target", task, out;
    int estimators = 100;
    std::optional<int> max_depth;
    std::string max_features = "sqrt";
    int min_samples_leaf = 1;
    bool no_bootstrap = false;
    std::uint64_t seed = 0;
    double test_fraction = 0.25;
};

int cmd_train(const TrainArgs& a, const CLI::Option* seed_opt, std::ostream& out) {
    TrainConfig config;
    config.n_estimators = a.estimators;
    config.max_depth = a.max_depth;
    config.max_features = MaxFeatures::parse(a.max_features);
    config.min_samples_leaf = a.min_samples_leaf;
    config.bootstrap = !a.no_bootstrap;
    config.seed = resolve_seed(seed_opt, a.seed);
    config.validate();

    const Task task = task_from_string(a.task);
    const Dataset data = read_csv(a.data, a.target);
    const SplitIndices split = split_indices(data.rows(), a.test_fraction, config.seed);
    const Dataset train_part = subset(data, split.train);
    const ForestModel model = train(train_part, task, config);
    write_file_atomically(a.out, serialize_model(model, 1));

    out << "trained " << model.num_trees() << " trees on " << train_part.rows() << " rows\n";
    if (!split.test.empty()) {
        const Dataset test_part = subset(data, split.test);
        const FeatureMatrix x = align_to_model(test_part, model);
        if (task == Task::regression) {
            const double mae = default_allowed_error(model, x, numeric_targets(test_part.targets)).allowed_error;
            out << "held-out MAE: " << fmt(mae) << " (" << test_part.rows() << " rows)\n";
        } else {
            // labels unseen during training cannot be predicted; count them as errors
            std::vector<int> truth, predicted;
            const auto& classes = model.classes();
            for (std::size_t i = 0; i < test_part.rows(); ++i) {
                const auto it = std::find(classes.begin(), classes.end(), test_part.targets[i]);
                const int p = model.predict(x.row(static_cast<Eigen::Index>(i)).transpose()).class_index;
                truth.push_back(it == classes.end() ? -1 : static_cast<int>(it - classes.begin()));
                predicted.push_back(p);
            }
            std::vector<int> t2, p2;
            for (std::size_t i = 0; i < truth.size(); ++i)
                if (truth[i] >= 0) {
                    t2.push_back(truth[i]);
                    p2.push_back(predicted[i]);
                }
            out << "held-out weighted F1: " << fmt(weighted_f1(t2, p2, classes.size())) << " ("
                << test_part.rows() << " rows)\n";
        }
    }
    out << "model written to " << a.out << "\n";
    return exit_code::ok;
}

struct ExplainArgs {
    std::string model, task, method, miner = "apriori", format = "text", out;
    InstanceArgs instance;
    double min_support = 0.1;
    int k = 5;
    std::optional<double> allowed_error;
    std::uint64_t seed = 0;
    bool no_reduction = false;
    bool trace = false;
};

int cmd_explain(const ExplainArgs& a, const CLI::Option* seed_opt, std::ostream& out, std::ostream& err) {
    const ForestModel model = load_model_file(a.model);
    if (!a.task.empty() && task_from_string(a.task) != model.task())
        throw ConfigError("--task " + a.task + " differs from the model task " + std::string(to_string(model.task())));
    const std::uint64_t seed = resolve_seed(seed_opt, a.seed);

    std::optional<Dataset> data;
    std::optional<FeatureMatrix> x_data;
    if (!a.instance.data.empty()) {
        data = read_csv(a.instance.data, a.instance.target);
        x_data = align_to_model(*data, model);
    }
    const Eigen::VectorXd x = resolve_instance(a.instance, model, x_data);

    std::vector<double> importances;
    std::optional<Eigen::VectorXd> targets;
    if (data && data->has_targets()) {
        targets = encode_targets(*data, model);
        importances = permutation_importance(model, *x_data, *targets, PermutationOptions{5, seed});
    }

    ExplainOptions options;
    options.method = a.method;
    options.reducer.miner = miner_from_string(a.miner);
    options.reducer.min_support = a.min_support;
    options.reducer.k = a.k;
    options.reducer.seed = seed;
    options.no_reduction = a.no_reduction;
    options.allowed_error = a.allowed_error;
    if (model.task() == Task::regression && !options.allowed_error) {
        if (!targets) throw ConfigError("regression needs --allowed-error or --data with a target column");
        options.allowed_error = default_allowed_error(model, *x_data, *targets).allowed_error;
    }

    const Explanation e = explain(model, x, options, importances);
    PlotInputs plot;
    if (x_data) plot.training = &*x_data;
    plot.baseline = &e.baseline_rule;
    plot.instance = x;
    emit(a.out, render(e.rule, model, render_format_from_string(a.format), plot), out);
    if (a.trace) {
        err << "trace:";
        for (const auto& m : e.outcome.method_trace) err << ' ' << m;
        err << "\nretained paths: " << e.outcome.retained_paths.size() << " of " << model.num_trees()
            << ", features: " << e.outcome.retained_features.size() << "\n";
    }
    return exit_code::ok;
}

struct AuditArgs {
    std::string model, rule, out, rule_id;
    InstanceArgs instance;
};

int cmd_audit(const AuditArgs& a, std::ostream& out, std::ostream& err) {
    const ForestModel model = load_model_file(a.model);
    std::optional<FeatureMatrix> x_data;
    if (!a.instance.data.empty()) x_data = align_to_model(read_csv(a.instance.data, a.instance.target), model);
    const Eigen::VectorXd x = resolve_instance(a.instance, model, x_data);
    const ExplanationRule rule = parse_rule_json(read_file(a.rule), model);
    AuditReport report;
    try {
        report = audit(model, x, rule, a.rule_id.empty() ? a.rule : a.rule_id);
    } catch (const ConsequentMismatch& e) {
        err << "audit: " << e.what() << "\n";
        return exit_code::mismatch;
    }
    emit(a.out, audit_to_json(report, model), out);
    if (report.conclusive) {
        err << "audit: conclusive (" << report.probes_evaluated << " probes)\n";
        return exit_code::ok;
    }
    err << "audit: violated, " << report.violations.size() << " counterexample(s) in " << report.probes_evaluated
        << " probes\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(report.violations.size(), 5); ++i) {
        const Violation& v = report.violations[i];
        err << "  ";
        if (v.feature >= 0) err << model.feature(v.feature).name << " = " << fmt(v.value);
        else err << v.group << " = " << v.category;
        err << " -> ";
        if (model.task() == Task::regression) err << fmt(v.new_value) << "\n";
        else err << model.classes()[static_cast<std::size_t>(v.new_class)] << "\n";
    }
    return exit_code::violated;
}

struct SweepArgs {
    std::string data, target = "target", task, name, out;
    std::string estimators = "100", max_depth = "none", max_features = "sqrt", min_samples_leaf = "1",
                bootstrap = "true", methods, miners = "apriori", min_support = "0.1", k = "5",
                allowed_error_scale = "1", seeds;
    std::size_t instances = 20;
    double test_fraction = 0.25;
    bool no_audit = false;
};

template <class T, class F>
std::vector<T> parse_list(const std::string& text, const std::string& what, F parse) {
    std::vector<T> out;
    for (const auto& item : split_list(text)) out.push_back(parse(item));
    if (out.empty()) throw ConfigError(what + " must list at least one value");
    return out;
}

int cmd_sweep(const SweepArgs& a, std::uint64_t seed, std::ostream& out, std::ostream& err) {
    const Task task = task_from_string(a.task);
    const Dataset data = read_csv(a.data, a.target);
    SweepGrid grid;
    grid.n_estimators = parse_list<int>(a.estimators, "--estimators", [](auto& s) { return parse_int(s, "--estimators"); });
    grid.max_depth = parse_list<std::optional<int>>(a.max_depth, "--max-depth", [](auto& s) {
        return s == "none" ? std::nullopt : std::optional<int>(parse_int(s, "--max-depth"));
    });
    grid.max_features = parse_list<MaxFeatures>(a.max_features, "--max-features", [](auto& s) { return MaxFeatures::parse(s); });
    grid.min_samples_leaf =
        parse_list<int>(a.min_samples_leaf, "--min-samples-leaf", [](auto& s) { return parse_int(s, "--min-samples-leaf"); });
    grid.bootstrap = parse_list<bool>(a.bootstrap, "--bootstrap", [](auto& s) {
        if (s == "true") return true;
        if (s == "false") return false;
        throw ConfigError("--bootstrap values must be true or false");
    });
    grid.methods = split_list(a.methods.empty() ? default_method(task) : a.methods);
    grid.miners = parse_list<Miner>(a.miners, "--miners", [](auto& s) { return miner_from_string(s); });
    grid.min_support = parse_list<double>(a.min_support, "--min-support", [](auto& s) { return parse_double(s, "--min-support"); });
    grid.k = parse_list<int>(a.k, "--k", [](auto& s) { return parse_int(s, "--k"); });
    grid.allowed_error_scale = parse_list<double>(a.allowed_error_scale, "--allowed-error-scale",
                                                  [](auto& s) { return parse_double(s, "--allowed-error-scale"); });
    grid.seeds = a.seeds.empty() ? std::vector<std::uint64_t>{seed}
                                 : parse_list<std::uint64_t>(a.seeds, "--seeds", [](auto& s) {
                                       return static_cast<std::uint64_t>(parse_int(s, "--seeds"));
                                   });
    grid.instances = a.instances;
    grid.test_fraction = a.test_fraction;
    grid.audit = !a.no_audit;

    const std::string name = a.name.empty() ? std::filesystem::path(a.data).stem().string() : a.name;
    const SweepResult result = sensitivity_sweep(data, name, task, grid, [&](const std::string& m) { err << m << "\n"; });
    emit(a.out, sweep_to_csv(result.rows), out);
    return exit_code::ok;
}

struct GenerateArgs {
    std::string kind, out;
    std::uint64_t seed = 0;
    std::size_t rows = 1000;
};

int cmd_generate(const GenerateArgs& a, std::uint64_t seed, std::ostream& out) {
    Dataset d;
    if (a.kind == "banknote") d = make_banknote_like(seed);
    else if (a.kind == "glass") d = make_glass_like(seed);
    else if (a.kind == "wine") d = make_wine_like(seed);
    else if (a.kind == "census") d = make_census_like(seed, a.rows);
    else throw ConfigError("unknown dataset kind '" + a.kind + "'");
    emit(a.out, to_csv(d), out);
    return exit_code::ok;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Conclusive single-rule explanations for random forests", "conclusive_forest"};
    app.require_subcommand(1, 1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train a bagged CART forest and write the model file");
    train_cmd->add_option("--data", train_args.data, "Training CSV")->required();
    train_cmd->add_option("--target", train_args.target, "Target column")->capture_default_str();
    train_cmd->add_option("--task", train_args.task, "binary, multiclass or regression")
        ->required()
        ->check(CLI::IsMember({"binary", "multiclass", "regression"}));
    train_cmd->add_option("--estimators", train_args.estimators, "Number of trees")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--max-depth", train_args.max_depth, "Maximum depth (unbounded when absent)")
        ->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--max-features", train_args.max_features, "sqrt, log2, all or a fraction")
        ->capture_default_str();
    train_cmd->add_option("--min-samples-leaf", train_args.min_samples_leaf, "Minimum samples per leaf")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    train_cmd->add_flag("--no-bootstrap", train_args.no_bootstrap, "Train every tree on all rows");
    auto* train_seed = train_cmd->add_option("--seed", train_args.seed, "Random seed");
    train_cmd->add_option("--test-fraction", train_args.test_fraction, "Held-out share for the reported score")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 0.99));
    train_cmd->add_option("--out", train_args.out, "Model file to write")->required();

    ExplainArgs explain_args;
    auto* explain_cmd = app.add_subcommand("explain", "Explain one instance with a conclusive rule");
    explain_cmd->add_option("--model", explain_args.model, "Model file")->required();
    add_instance_options(explain_cmd, explain_args.instance);
    explain_cmd->add_option("--task", explain_args.task, "Expected model task")
        ->check(CLI::IsMember({"binary", "multiclass", "regression"}));
    explain_cmd->add_option("--method", explain_args.method,
                            "Reduction: 1, 2, 3, 12, 13, 23, 123 (classification); 1, 3, 13, AR+RS, DSi, DSo "
                            "(regression); none");
    explain_cmd->add_option("--miner", explain_args.miner, "Itemset miner")
        ->capture_default_str()
        ->check(CLI::IsMember({"apriori", "fpgrowth"}));
    explain_cmd->add_option("--min-support", explain_args.min_support, "Itemset minimum support")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    explain_cmd->add_option("--k", explain_args.k, "Clusters for k-medoids")->capture_default_str()->check(CLI::PositiveNumber);
    explain_cmd->add_option("--allowed-error", explain_args.allowed_error, "Regression error budget (default: model MAE on --data)")
        ->check(CLI::NonNegativeNumber);
    auto* explain_seed = explain_cmd->add_option("--seed", explain_args.seed, "Random seed");
    explain_cmd->add_option("--format", explain_args.format, "text, json or plotdata")
        ->capture_default_str()
        ->check(CLI::IsMember({"text", "json", "plotdata"}));
    explain_cmd->add_flag("--no-reduction", explain_args.no_reduction, "Keep every voting path");
    explain_cmd->add_flag("--trace", explain_args.trace, "Print the reduction trace to stderr");
    explain_cmd->add_option("--out", explain_args.out, "Output file (default: stdout)");

    AuditArgs audit_args;
    auto* audit_cmd = app.add_subcommand("audit", "Check a rule for conclusiveness (exit 0 conclusive, 2 violated, 3 mismatch)");
    audit_cmd->add_option("--model", audit_args.model, "Model file")->required();
    audit_cmd->add_option("--rule", audit_args.rule, "Rule in the json format")->required();
    audit_cmd->add_option("--rule-id", audit_args.rule_id, "Identifier echoed in the report");
    add_instance_options(audit_cmd, audit_args.instance);
    audit_cmd->add_option("--out", audit_args.out, "Report file (default: stdout)");

    SweepArgs sweep_args;
    auto* sweep_cmd = app.add_subcommand("sweep", "Sensitivity sweep over forest and reduction grids (CSV)");
    sweep_cmd->add_option("--data", sweep_args.data, "Dataset CSV")->required();
    sweep_cmd->add_option("--target", sweep_args.target, "Target column")->capture_default_str();
    sweep_cmd->add_option("--task", sweep_args.task, "binary, multiclass or regression")
        ->required()
        ->check(CLI::IsMember({"binary", "multiclass", "regression"}));
    sweep_cmd->add_option("--dataset-name", sweep_args.name, "Name for the dataset column");
    sweep_cmd->add_option("--estimators", sweep_args.estimators, "Comma-separated list")->capture_default_str();
    sweep_cmd->add_option("--max-depth", sweep_args.max_depth, "Comma-separated list, 'none' for unbounded")->capture_default_str();
    sweep_cmd->add_option("--max-features", sweep_args.max_features, "Comma-separated list")->capture_default_str();
    sweep_cmd->add_option("--min-samples-leaf", sweep_args.min_samples_leaf, "Comma-separated list")->capture_default_str();
    sweep_cmd->add_option("--bootstrap", sweep_args.bootstrap, "Comma-separated true/false")->capture_default_str();
    sweep_cmd->add_option("--method", sweep_args.methods, "Comma-separated method codes");
    sweep_cmd->add_option("--miner", sweep_args.miners, "Comma-separated miners")->capture_default_str();
    sweep_cmd->add_option("--min-support", sweep_args.min_support, "Comma-separated list")->capture_default_str();
    sweep_cmd->add_option("--k", sweep_args.k, "Comma-separated list")->capture_default_str();
    sweep_cmd->add_option("--allowed-error-scale", sweep_args.allowed_error_scale,
                          "Comma-separated multiples of the model MAE")
        ->capture_default_str();
    sweep_cmd->add_option("--seeds", sweep_args.seeds, "Comma-separated seeds (default: --seed)");
    std::uint64_t sweep_seed_value = 0;
    auto* sweep_seed = sweep_cmd->add_option("--seed", sweep_seed_value, "Random seed");
    sweep_cmd->add_option("--instances", sweep_args.instances, "Explained instances per cell")->capture_default_str();
    sweep_cmd->add_option("--test-fraction", sweep_args.test_fraction, "Held-out share")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 0.99));
    sweep_cmd->add_flag("--no-audit", sweep_args.no_audit, "Skip the conclusiveness audit");
    sweep_cmd->add_option("--out", sweep_args.out, "CSV file (default: stdout)");

    GenerateArgs gen_args;
    auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic benchmark-shaped dataset");
    gen_cmd->add_option("--kind", gen_args.kind, "banknote, glass, wine or census")
        ->required()
        ->check(CLI::IsMember({"banknote", "glass", "wine", "census"}));
    auto* gen_seed = gen_cmd->add_option("--seed", gen_args.seed, "Random seed");
    gen_cmd->add_option("--rows", gen_args.rows, "Rows (census only)")->capture_default_str();
    gen_cmd->add_option("--out", gen_args.out, "CSV file (default: stdout)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_code::ok;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_code::ok;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        const auto& subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return exit_code::usage;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_args, train_seed, out);
        if (explain_cmd->parsed()) return cmd_explain(explain_args, explain_seed, out, err);
        if (audit_cmd->parsed()) return cmd_audit(audit_args, out, err);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_args, resolve_seed(sweep_seed, sweep_seed_value), out, err);
        if (gen_cmd->parsed()) return cmd_generate(gen_args, resolve_seed(gen_seed, gen_args.seed), out);
    } catch (const TieError& e) {
        err << "error: no unique majority to explain: " << e.what() << "\n";
        return exit_code::failure;
    } catch (const ConfigError& e) {
        err << "usage error: " << e.what() << "\n";
        return exit_code::usage;
    } catch (const MethodError& e) {
        err << "usage error: " << e.what() << "\n";
        return exit_code::usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::failure;
    }
    return exit_code::usage;
}

}  // namespace cforest
