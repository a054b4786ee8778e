#pragma once

#include "conclusive_forest/forest_model.hpp"

#include <initializer_list>
#include <random>
#include <string>
#include <vector>

namespace cftest {

using cforest::FeatureSpec;
using cforest::ForestModel;
using cforest::Task;
using cforest::Tree;
using cforest::TreeNode;

inline Eigen::VectorXd vec(std::initializer_list<double> values) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v[i++] = x;
    return v;
}

inline TreeNode leaf(Eigen::VectorXd value) {
    TreeNode n;
    n.leaf_value = std::move(value);
    return n;
}

inline TreeNode split(int feature, double threshold, int left, int right) {
    TreeNode n;
    n.feature = feature;
    n.threshold = threshold;
    n.left = left;
    n.right = right;
    return n;
}

/// Node ids follow positions; the root is node 0.
inline Tree tree(std::vector<TreeNode> nodes) {
    Tree t;
    for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i].node_id = static_cast<int>(i);
    t.nodes = std::move(nodes);
    t.root = 0;
    return t;
}

/// Depth-one tree: x[f] <= t goes to `left`.
inline Tree stump(int f, double t, Eigen::VectorXd left, Eigen::VectorXd right) {
    return tree({split(f, t, 1, 2), leaf(std::move(left)), leaf(std::move(right))});
}

inline Tree constant(Eigen::VectorXd value) { return tree({leaf(std::move(value))}); }

inline std::vector<FeatureSpec> numeric_features(int n, double lo = 0.0, double hi = 1.0) {
    std::vector<FeatureSpec> out;
    for (int i = 0; i < n; ++i) {
        FeatureSpec f;
        f.id = i;
        f.name = "f" + std::to_string(i);
        f.domain_min = lo;
        f.domain_max = hi;
        out.push_back(f);
    }
    return out;
}

inline std::vector<std::string> labels(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back("c" + std::to_string(i));
    return out;
}

struct RandomForestSpec {
    Task task = Task::binary;
    int n_classes = 2;
    int n_features = 3;
    int n_trees = 5;
    int max_depth = 3;
    bool hard_leaves = false;  // one-hot class leaves
    /// Thresholds are drawn from {0.005 + 0.01 k}; domain is [0, 1].
    bool lattice_thresholds = true;
};

/// Random tree of depth at most `depth`; leaves are random class
/// distributions or values in [-5, 5].
inline int grow_random(std::vector<TreeNode>& nodes, std::mt19937_64& rng, const RandomForestSpec& s, int depth) {
    const int index = static_cast<int>(nodes.size());
    nodes.emplace_back();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (depth == 0 || (depth < s.max_depth && u(rng) < 0.25)) {
        if (s.task == Task::regression) {
            nodes[static_cast<std::size_t>(index)].leaf_value = vec({std::round((u(rng) * 10.0 - 5.0) * 100.0) / 100.0});
        } else if (s.hard_leaves) {
            Eigen::VectorXd v = Eigen::VectorXd::Zero(s.n_classes);
            v[std::uniform_int_distribution<int>(0, s.n_classes - 1)(rng)] = 1.0;
            nodes[static_cast<std::size_t>(index)].leaf_value = v;
        } else {
            Eigen::VectorXd v(s.n_classes);
            for (int k = 0; k < s.n_classes; ++k) v[k] = std::uniform_int_distribution<int>(0, 8)(rng);
            if (v.sum() == 0) v[0] = 1;
            nodes[static_cast<std::size_t>(index)].leaf_value = v / v.sum();
        }
        return index;
    }
    const int f = std::uniform_int_distribution<int>(0, s.n_features - 1)(rng);
    const double t = s.lattice_thresholds ? 0.005 + 0.01 * std::uniform_int_distribution<int>(0, 98)(rng) : u(rng);
    const int l = grow_random(nodes, rng, s, depth - 1);
    const int r = grow_random(nodes, rng, s, depth - 1);
    nodes[static_cast<std::size_t>(index)].feature = f;
    nodes[static_cast<std::size_t>(index)].threshold = t;
    nodes[static_cast<std::size_t>(index)].left = l;
    nodes[static_cast<std::size_t>(index)].right = r;
    return index;
}

inline ForestModel random_forest(std::mt19937_64& rng, const RandomForestSpec& s) {
    std::vector<Tree> trees;
    for (int t = 0; t < s.n_trees; ++t) {
        std::vector<TreeNode> nodes;
        grow_random(nodes, rng, s, s.max_depth);
        trees.push_back(tree(std::move(nodes)));
    }
    return ForestModel(s.task, s.task == Task::regression ? std::vector<std::string>{} : labels(s.n_classes),
                       numeric_features(s.n_features), std::move(trees));
}

inline Eigen::VectorXd random_instance(std::mt19937_64& rng, int n_features) {
    Eigen::VectorXd x(n_features);
    for (int i = 0; i < n_features; ++i) x[i] = std::uniform_int_distribution<int>(0, 1000)(rng) / 1000.0;
    return x;
}

}  // namespace cftest
