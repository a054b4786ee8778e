#include "conclusive_forest/forest_model.hpp"

#include "conclusive_forest/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace cforest {

std::string_view to_string(Task task) {
    switch (task) {
        case Task::binary: return "binary";
        case Task::multiclass: return "multiclass";
        case Task::regression: return "regression";
    }
    return "unknown";
}

Task task_from_string(std::string_view name) {
    if (name == "binary") return Task::binary;
    if (name == "multiclass") return Task::multiclass;
    if (name == "regression") return Task::regression;
    throw ConfigError("unknown task '" + std::string(name) + "'");
}

int Tree::leaf_index(const InstanceRef& x) const {
    int at = root;
    while (!nodes[static_cast<std::size_t>(at)].is_leaf()) {
        const TreeNode& node = nodes[static_cast<std::size_t>(at)];
        at = x[node.feature] <= node.threshold ? node.left : node.right;
    }
    return at;
}

std::vector<int> DecisionPath::features() const {
    std::vector<int> out;
    out.reserve(conditions.size());
    for (const Condition& c : conditions) out.push_back(c.feature);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

bool DecisionPath::mentions(int feature) const {
    return std::any_of(conditions.begin(), conditions.end(),
                       [feature](const Condition& c) { return c.feature == feature; });
}

std::optional<Interval> path_interval(const DecisionPath& path, int feature) {
    std::optional<Interval> out;
    for (const Condition& c : path.conditions) {
        if (c.feature != feature) continue;
        if (!out) out.emplace();
        if (c.relation == Relation::greater)
            out->lower = std::max(out->lower, c.threshold);
        else
            out->upper = std::min(out->upper, c.threshold);
    }
    return out;
}

TreeStats leaf_extrema(const Tree& tree) {
    TreeStats s{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const TreeNode& n : tree.nodes) {
        if (!n.is_leaf()) continue;
        s.min_pred = std::min(s.min_pred, n.leaf_value[0]);
        s.max_pred = std::max(s.max_pred, n.leaf_value[0]);
    }
    return s;
}

std::vector<OneHotGroup> one_hot_groups(const std::vector<FeatureSpec>& features) {
    std::vector<OneHotGroup> groups;
    for (const FeatureSpec& f : features) {
        if (!f.is_one_hot()) continue;
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const OneHotGroup& g) { return g.name == f.group; });
        if (it == groups.end()) {
            groups.push_back({f.group, {}});
            it = std::prev(groups.end());
        }
        it->members.push_back(f.id);
    }
    return groups;
}

namespace {

void validate_features(const std::vector<FeatureSpec>& features) {
    std::set<std::pair<std::string, std::string>> members;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const FeatureSpec& f = features[i];
        if (f.id != static_cast<int>(i))
            throw ModelFormatError("feature ids must be 0..n-1 in order; got " + std::to_string(f.id) +
                                   " at position " + std::to_string(i));
        if (!(f.domain_min <= f.domain_max))
            throw ModelFormatError("feature '" + f.name + "': domain_min > domain_max");
        if (f.is_one_hot()) {
            if (f.group.empty() || f.member_value.empty())
                throw ModelFormatError("one-hot feature '" + f.name + "' needs group and member_value");
            if (!members.insert({f.group, f.member_value}).second)
                throw ModelFormatError("duplicate member_value '" + f.member_value + "' in group '" +
                                       f.group + "'");
        } else if (!f.group.empty() || !f.member_value.empty()) {
            throw ModelFormatError("numeric feature '" + f.name + "' must not declare a group");
        }
    }
}

void validate_tree(const Tree& tree, std::size_t index, Task task, std::size_t n_features,
                   std::size_t n_classes) {
    const std::string where = "tree " + std::to_string(index) + ": ";
    const auto n = static_cast<int>(tree.nodes.size());
    if (n == 0) throw ModelFormatError(where + "no nodes");
    std::vector<int> parents(static_cast<std::size_t>(n), 0);
    for (const TreeNode& node : tree.nodes) {
        if (node.is_leaf()) {
            if (node.left >= 0 || node.right >= 0)
                throw ModelFormatError(where + "leaf " + std::to_string(node.node_id) + " has children");
            if (task == Task::regression) {
                if (node.leaf_value.size() != 1)
                    throw ModelFormatError(where + "regression leaf must hold a scalar");
                if (!std::isfinite(node.leaf_value[0]))
                    throw ModelFormatError(where + "non-finite leaf value");
            } else {
                if (static_cast<std::size_t>(node.leaf_value.size()) != n_classes)
                    throw ModelFormatError(where + "leaf vector length differs from class count");
                if ((node.leaf_value.array() < 0.0).any() || !node.leaf_value.allFinite())
                    throw ModelFormatError(where + "negative or non-finite class probability");
                if (std::abs(node.leaf_value.sum() - 1.0) > 1e-9)
                    throw ModelFormatError(where + "leaf vector of node " + std::to_string(node.node_id) +
                                           " is not normalized");
            }
            continue;
        }
        if (node.leaf_value.size() != 0)
            throw ModelFormatError(where + "internal node carries a leaf value");
        if (static_cast<std::size_t>(node.feature) >= n_features)
            throw ModelFormatError(where + "feature id out of range");
        if (!std::isfinite(node.threshold)) throw ModelFormatError(where + "non-finite threshold");
        for (int child : {node.left, node.right}) {
            if (child < 0 || child >= n) throw ModelFormatError(where + "dangling child reference");
            ++parents[static_cast<std::size_t>(child)];
        }
    }
    if (tree.root < 0 || tree.root >= n) throw ModelFormatError(where + "bad root");
    for (int i = 0; i < n; ++i) {
        const int expected = i == tree.root ? 0 : 1;
        if (parents[static_cast<std::size_t>(i)] != expected)
            throw ModelFormatError(where + "node " + std::to_string(tree.nodes[static_cast<std::size_t>(i)].node_id) +
                                   " is not part of a single binary tree");
    }
    // one parent per node + single root leaves only cycles detached from the root
    std::vector<int> stack{tree.root};
    int reached = 0;
    while (!stack.empty()) {
        const TreeNode& node = tree.nodes[static_cast<std::size_t>(stack.back())];
        stack.pop_back();
        if (++reached > n) break;
        if (!node.is_leaf()) {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
    if (reached != n) throw ModelFormatError(where + "cycle or unreachable nodes");
}

}  // namespace

ForestModel::ForestModel(Task task, std::vector<std::string> classes, std::vector<FeatureSpec> features,
                         std::vector<Tree> trees, std::optional<std::vector<TreeStats>> stored_stats)
    : task_(task), classes_(std::move(classes)), features_(std::move(features)), trees_(std::move(trees)) {
    if (trees_.empty()) throw ModelFormatError("model has no trees");
    if (features_.empty()) throw ModelFormatError("model has no features");
    validate_features(features_);
    if (task_ == Task::regression) {
        if (!classes_.empty()) throw ModelFormatError("regression model must not declare classes");
    } else {
        if (task_ == Task::binary && classes_.size() != 2)
            throw ModelFormatError("binary model needs exactly 2 classes");
        if (task_ == Task::multiclass && classes_.size() < 2)
            throw ModelFormatError("multiclass model needs at least 2 classes");
        if (std::set<std::string>(classes_.begin(), classes_.end()).size() != classes_.size())
            throw ModelFormatError("duplicate class labels");
    }
    for (std::size_t t = 0; t < trees_.size(); ++t)
        validate_tree(trees_[t], t, task_, features_.size(), classes_.size());

    if (task_ == Task::regression) {
        stats_.reserve(trees_.size());
        for (const Tree& tree : trees_) stats_.push_back(leaf_extrema(tree));
        if (stored_stats) {
            if (stored_stats->size() != trees_.size())
                throw ModelFormatError("tree_stats length differs from tree count");
            for (std::size_t t = 0; t < trees_.size(); ++t) {
                const TreeStats& s = (*stored_stats)[t];
                if (s.min_pred != stats_[t].min_pred || s.max_pred != stats_[t].max_pred)
                    throw ModelFormatError("stored tree_stats disagree with leaves of tree " + std::to_string(t));
            }
        }
    } else if (stored_stats && !stored_stats->empty()) {
        throw ModelFormatError("tree_stats are only valid for regression");
    }

    trees_using_.resize(features_.size());
    for (std::size_t t = 0; t < trees_.size(); ++t) {
        std::vector<bool> seen(features_.size(), false);
        for (const TreeNode& node : trees_[t].nodes)
            if (!node.is_leaf()) seen[static_cast<std::size_t>(node.feature)] = true;
        for (std::size_t f = 0; f < seen.size(); ++f)
            if (seen[f]) trees_using_[f].push_back(static_cast<int>(t));
    }
}

void ForestModel::check_instance(const InstanceRef& x) const {
    if (static_cast<std::size_t>(x.size()) != features_.size())
        throw SchemaError("instance has " + std::to_string(x.size()) + " values, model expects " +
                          std::to_string(features_.size()));
    if (!x.allFinite()) throw SchemaError("instance contains non-finite values");
}

Prediction ForestModel::combine(const Eigen::VectorXd& summed_outputs) const {
    Prediction p;
    const double n = static_cast<double>(trees_.size());
    if (task_ == Task::regression) {
        p.value = summed_outputs[0] / n;
    } else {
        p.probabilities = summed_outputs / n;
        Eigen::Index best = 0;
        summed_outputs.maxCoeff(&best);
        p.class_index = static_cast<int>(best);
    }
    return p;
}

Prediction ForestModel::predict(const InstanceRef& x) const {
    check_instance(x);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(output_size()));
    for (const Tree& tree : trees_) sum += tree.output(x);
    return combine(sum);
}

DecisionPath ForestModel::extract_path(std::size_t tree_index, const InstanceRef& x) const {
    const Tree& tree = trees_[tree_index];
    DecisionPath path;
    path.tree_index = static_cast<int>(tree_index);
    int at = tree.root;
    while (!tree.nodes[static_cast<std::size_t>(at)].is_leaf()) {
        const TreeNode& node = tree.nodes[static_cast<std::size_t>(at)];
        const bool left = x[node.feature] <= node.threshold;
        path.conditions.push_back({node.feature, left ? Relation::less_equal : Relation::greater, node.threshold});
        at = left ? node.left : node.right;
    }
    path.leaf = tree.nodes[static_cast<std::size_t>(at)].leaf_value;
    if (task_ == Task::regression) {
        path.value = path.leaf[0];
    } else {
        Eigen::Index best = 0;
        path.leaf.maxCoeff(&best);
        path.vote = static_cast<int>(best);
    }
    return path;
}

std::vector<DecisionPath> ForestModel::extract_paths(const InstanceRef& x) const {
    check_instance(x);
    std::vector<DecisionPath> paths;
    paths.reserve(trees_.size());
    for (std::size_t t = 0; t < trees_.size(); ++t) paths.push_back(extract_path(t, x));
    return paths;
}

}  // namespace cforest
