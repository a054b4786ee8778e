#include "conclusive_forest/trainer.hpp"

#include "conclusive_forest/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace cforest {

MaxFeatures MaxFeatures::parse(std::string_view text) {
    if (text == "sqrt") return {Kind::sqrt, 1.0};
    if (text == "log2") return {Kind::log2, 1.0};
    if (text == "all") return {Kind::all, 1.0};
    double f = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), f);
    if (ec != std::errc() || ptr != text.data() + text.size() || !(f > 0.0 && f <= 1.0))
        throw ConfigError("max_features must be sqrt, log2, all or a fraction in (0, 1], got '" +
                          std::string(text) + "'");
    return {Kind::fraction, f};
}

std::size_t MaxFeatures::resolve(std::size_t n_features) const {
    const double n = static_cast<double>(n_features);
    double k = n;
    switch (kind) {
        case Kind::sqrt: k = std::floor(std::sqrt(n)); break;
        case Kind::log2: k = std::floor(std::log2(n)); break;
        case Kind::fraction: k = std::floor(fraction * n); break;
        case Kind::all: break;
    }
    return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, std::max<std::size_t>(n_features, 1));
}

std::string MaxFeatures::to_string() const {
    switch (kind) {
        case Kind::sqrt: return "sqrt";
        case Kind::log2: return "log2";
        case Kind::all: return "all";
        case Kind::fraction: break;
    }
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, fraction);
    return std::string(buf, res.ptr);
}

void TrainConfig::validate() const {
    if (n_estimators < 1) throw ConfigError("n_estimators must be at least 1");
    if (max_depth && *max_depth < 0) throw ConfigError("max_depth must be non-negative");
    if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be at least 1");
    if (max_features.kind == MaxFeatures::Kind::fraction &&
        !(max_features.fraction > 0.0 && max_features.fraction <= 1.0))
        throw ConfigError("max_features fraction must be in (0, 1]");
}

namespace {

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const FeatureMatrix& x, const Eigen::VectorXd& y, bool classification, std::size_t n_classes,
                const TrainConfig& config, std::uint64_t seed)
        : x_(x), y_(y), classification_(classification), n_classes_(n_classes), config_(config), rng_(seed),
          mtry_(config.max_features.resolve(static_cast<std::size_t>(x.cols()))) {}

    Tree build(std::vector<int> samples) {
        Tree tree;
        tree.root = grow(tree, samples, 0);
        return tree;
    }

private:
    Eigen::VectorXd leaf_payload(const std::vector<int>& samples) const {
        if (!classification_) {
            double sum = 0.0;
            for (int s : samples) sum += y_[s];
            return Eigen::VectorXd::Constant(1, sum / static_cast<double>(samples.size()));
        }
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_classes_));
        for (int s : samples) counts[static_cast<Eigen::Index>(y_[s])] += 1.0;
        return counts / static_cast<double>(samples.size());
    }

    // Larger is better: sum_k c_k^2 / n per side for Gini, sum^2 / n for variance.
    double node_score(const std::vector<int>& samples) const {
        if (!classification_) {
            double sum = 0.0;
            for (int s : samples) sum += y_[s];
            return sum * sum / static_cast<double>(samples.size());
        }
        std::vector<double> counts(n_classes_, 0.0);
        for (int s : samples) counts[static_cast<std::size_t>(y_[s])] += 1.0;
        double acc = 0.0;
        for (double c : counts) acc += c * c;
        return acc / static_cast<double>(samples.size());
    }

    bool is_pure(const std::vector<int>& samples) const {
        const double first = y_[samples.front()];
        return std::all_of(samples.begin(), samples.end(), [&](int s) { return y_[s] == first; });
    }

    std::optional<Split> best_split(const std::vector<int>& samples) {
        const auto n_features = static_cast<std::size_t>(x_.cols());
        std::vector<int> candidates(n_features);
        std::iota(candidates.begin(), candidates.end(), 0);
        if (mtry_ < n_features) {
            std::shuffle(candidates.begin(), candidates.end(), rng_);
            candidates.resize(mtry_);
            std::sort(candidates.begin(), candidates.end());
        }
        const double parent = node_score(samples);
        const double eps = 1e-12 * std::max(1.0, std::abs(parent));
        const std::size_t n = samples.size();
        const auto min_leaf = static_cast<std::size_t>(config_.min_samples_leaf);

        std::optional<Split> best;
        std::vector<int> order = samples;
        std::vector<double> left_counts(n_classes_), right_counts(n_classes_);
        for (int f : candidates) {
            std::sort(order.begin(), order.end(), [&](int a, int b) { return x_(a, f) < x_(b, f); });
            double left_sum = 0.0, right_sum = 0.0;
            double left_sq = 0.0, right_sq = 0.0;  // classification: sum of squared counts
            if (classification_) {
                std::fill(left_counts.begin(), left_counts.end(), 0.0);
                std::fill(right_counts.begin(), right_counts.end(), 0.0);
                for (int s : order) right_counts[static_cast<std::size_t>(y_[s])] += 1.0;
                for (double c : right_counts) right_sq += c * c;
            } else {
                for (int s : order) right_sum += y_[s];
            }
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const int s = order[i];
                if (classification_) {
                    const auto k = static_cast<std::size_t>(y_[s]);
                    left_sq += 2.0 * left_counts[k] + 1.0;
                    left_counts[k] += 1.0;
                    right_sq -= 2.0 * right_counts[k] - 1.0;
                    right_counts[k] -= 1.0;
                } else {
                    left_sum += y_[s];
                    right_sum -= y_[s];
                }
                const double a = x_(s, f);
                const double b = x_(order[i + 1], f);
                if (!(a < b)) continue;
                const std::size_t n_left = i + 1;
                if (n_left < min_leaf || n - n_left < min_leaf) continue;
                const double nl = static_cast<double>(n_left), nr = static_cast<double>(n - n_left);
                const double score = classification_ ? left_sq / nl + right_sq / nr
                                                     : left_sum * left_sum / nl + right_sum * right_sum / nr;
                if (score <= parent + eps) continue;
                if (best && score <= best->score + eps) continue;
                double t = a + (b - a) / 2.0;
                if (!(t >= a && t < b)) t = a;
                best = Split{f, t, score};
            }
        }
        return best;
    }

    int grow(Tree& tree, const std::vector<int>& samples, int depth) {
        const int index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[static_cast<std::size_t>(index)].node_id = index;

        const bool depth_left = !config_.max_depth || depth < *config_.max_depth;
        const bool splittable =
            depth_left && samples.size() >= 2 * static_cast<std::size_t>(config_.min_samples_leaf) &&
            !is_pure(samples);
        const auto split = splittable ? best_split(samples) : std::nullopt;
        if (!split) {
            tree.nodes[static_cast<std::size_t>(index)].leaf_value = leaf_payload(samples);
            return index;
        }
        std::vector<int> left, right;
        for (int s : samples) (x_(s, split->feature) <= split->threshold ? left : right).push_back(s);
        const int l = grow(tree, left, depth + 1);
        const int r = grow(tree, right, depth + 1);
        TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
        node.feature = split->feature;
        node.threshold = split->threshold;
        node.left = l;
        node.right = r;
        return index;
    }

    const FeatureMatrix& x_;
    const Eigen::VectorXd& y_;
    bool classification_;
    std::size_t n_classes_;
    const TrainConfig& config_;
    std::mt19937_64 rng_;
    std::size_t mtry_;
};

}  // namespace

ForestModel train(const FeatureMatrix& features, const Eigen::VectorXd& targets, Task task,
                  const TrainConfig& config, std::vector<FeatureSpec> specs, std::vector<std::string> classes) {
    config.validate();
    const auto n = features.rows();
    if (n == 0 || features.cols() == 0) throw ConfigError("training data is empty");
    if (targets.size() != n) throw SchemaError("target count differs from row count");
    if (static_cast<Eigen::Index>(specs.size()) != features.cols())
        throw SchemaError("feature spec count differs from column count");
    if (!features.allFinite() || !targets.allFinite()) throw SchemaError("training data has non-finite cells");

    const bool classification = is_classification(task);
    if (classification) {
        if (classes.size() < 2) throw ConfigError("classification needs at least two classes");
        if (task == Task::binary && classes.size() != 2) throw ConfigError("binary task needs exactly two classes");
        std::set<int> seen;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = targets[i];
            if (v < 0 || v >= static_cast<double>(classes.size()) || v != std::floor(v))
                throw SchemaError("class index out of range in targets");
            seen.insert(static_cast<int>(v));
        }
        if (seen.size() < 2) throw ConfigError("classification target is constant");
    } else {
        if (n < 2) throw ConfigError("regression needs at least two rows");
        classes.clear();
    }

    std::vector<Tree> trees;
    trees.reserve(static_cast<std::size_t>(config.n_estimators));
    for (int t = 0; t < config.n_estimators; ++t) {
        const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(t);
        TreeBuilder builder(features, targets, classification, classes.size(), config, seed);
        std::vector<int> samples(static_cast<std::size_t>(n));
        if (config.bootstrap) {
            std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
            std::uniform_int_distribution<int> pick(0, static_cast<int>(n) - 1);
            for (int& s : samples) s = pick(rng);
            std::sort(samples.begin(), samples.end());
        } else {
            std::iota(samples.begin(), samples.end(), 0);
        }
        trees.push_back(builder.build(std::move(samples)));
    }
    return ForestModel(task, std::move(classes), std::move(specs), std::move(trees));
}

ForestModel train(const Dataset& data, Task task, const TrainConfig& config) {
    if (!data.has_targets()) throw SchemaError("dataset has no '" + data.target_name + "' column");
    auto specs = infer_feature_specs(data.feature_names, data.features);
    if (is_classification(task)) {
        auto classes = infer_classes(data.targets);
        const Eigen::VectorXd y = class_indices(data.targets, classes);
        return train(data.features, y, task, config, std::move(specs), std::move(classes));
    }
    return train(data.features, numeric_targets(data.targets), task, config, std::move(specs));
}

}  // namespace cforest
