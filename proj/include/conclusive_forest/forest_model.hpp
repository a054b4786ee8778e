#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cforest {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using InstanceRef = Eigen::Ref<const Eigen::VectorXd>;

enum class Task { binary, multiclass, regression };

std::string_view to_string(Task task);
Task task_from_string(std::string_view name);
inline bool is_classification(Task task) { return task != Task::regression; }

enum class FeatureKind { numeric, one_hot_member };

struct FeatureSpec {
    int id = 0;
    std::string name;
    FeatureKind kind = FeatureKind::numeric;
    std::string group;         // one_hot_member only
    std::string member_value;  // one_hot_member only
    double domain_min = 0.0;
    double domain_max = 0.0;

    bool is_one_hot() const { return kind == FeatureKind::one_hot_member; }
};

/// Node of a binary decision tree. Internal nodes send `x[feature] <= threshold`
/// to `left` and everything else to `right`. Children are indices into
/// Tree::nodes; `node_id` is the identifier used by the exchange format.
struct TreeNode {
    int node_id = 0;
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    Eigen::VectorXd leaf_value;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;
    int root = 0;

    /// Index of the leaf reached by `x`.
    int leaf_index(const InstanceRef& x) const;
    const Eigen::VectorXd& output(const InstanceRef& x) const { return nodes[leaf_index(x)].leaf_value; }
};

struct TreeStats {
    double min_pred = 0.0;
    double max_pred = 0.0;
};

enum class Relation { less_equal, greater };

struct Condition {
    int feature = 0;
    Relation relation = Relation::less_equal;
    double threshold = 0.0;

    bool satisfied_by(double value) const {
        return relation == Relation::less_equal ? value <= threshold : value > threshold;
    }
};

/// Half-open interval (lower, upper]; either side may be infinite.
struct Interval {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();

    bool contains(double value) const { return value > lower && value <= upper; }
    bool empty() const { return !(lower < upper); }
};

struct DecisionPath {
    int tree_index = 0;
    std::vector<Condition> conditions;
    int vote = -1;               // classification: argmax of the leaf vector
    double value = 0.0;          // regression: leaf scalar
    Eigen::VectorXd leaf;        // the raw leaf payload

    /// Sorted distinct feature ids mentioned by the conditions.
    std::vector<int> features() const;
    bool mentions(int feature) const;
};

/// Intersection of the path's conditions on `feature`; nullopt when the
/// feature does not appear in the path.
std::optional<Interval> path_interval(const DecisionPath& path, int feature);

struct Prediction {
    int class_index = -1;
    Eigen::VectorXd probabilities;
    double value = 0.0;
};

/// Immutable random-forest ensemble. The constructor validates every
/// structural invariant and recomputes the per-tree leaf extrema.
class ForestModel {
public:
    ForestModel(Task task, std::vector<std::string> classes, std::vector<FeatureSpec> features,
                std::vector<Tree> trees, std::optional<std::vector<TreeStats>> stored_stats = std::nullopt);

    Task task() const { return task_; }
    const std::vector<std::string>& classes() const { return classes_; }
    const std::vector<FeatureSpec>& features() const { return features_; }
    const FeatureSpec& feature(int id) const { return features_[static_cast<std::size_t>(id)]; }
    const std::vector<Tree>& trees() const { return trees_; }
    const Tree& tree(std::size_t t) const { return trees_[t]; }
    const std::vector<TreeStats>& tree_stats() const { return stats_; }

    std::size_t num_trees() const { return trees_.size(); }
    std::size_t num_features() const { return features_.size(); }
    /// Width of a leaf payload: number of classes, or 1 for regression.
    std::size_t output_size() const { return task_ == Task::regression ? 1 : classes_.size(); }

    /// Tree indices whose internal nodes test `feature`.
    const std::vector<int>& trees_using(int feature) const {
        return trees_using_[static_cast<std::size_t>(feature)];
    }

    /// Throws SchemaError when `x` has the wrong length or non-finite cells.
    void check_instance(const InstanceRef& x) const;

    Prediction predict(const InstanceRef& x) const;
    /// Prediction assembled from per-tree leaf payloads (sum, then mean).
    Prediction combine(const Eigen::VectorXd& summed_outputs) const;

    DecisionPath extract_path(std::size_t tree_index, const InstanceRef& x) const;
    std::vector<DecisionPath> extract_paths(const InstanceRef& x) const;

private:
    Task task_;
    std::vector<std::string> classes_;
    std::vector<FeatureSpec> features_;
    std::vector<Tree> trees_;
    std::vector<TreeStats> stats_;
    std::vector<std::vector<int>> trees_using_;
};

/// Brute-force leaf extrema of a regression tree.
TreeStats leaf_extrema(const Tree& tree);

/// Feature id of each one-hot group member, keyed by group name in
/// declaration order.
struct OneHotGroup {
    std::string name;
    std::vector<int> members;
};
std::vector<OneHotGroup> one_hot_groups(const std::vector<FeatureSpec>& features);

}  // namespace cforest
