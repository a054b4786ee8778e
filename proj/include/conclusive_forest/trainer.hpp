#pragma once

#include "conclusive_forest/dataset.hpp"
#include "conclusive_forest/forest_model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cforest {

struct MaxFeatures {
    enum class Kind { sqrt, log2, fraction, all };
    Kind kind = Kind::sqrt;
    double fraction = 1.0;

    /// "sqrt", "log2", "all" or a fraction in (0, 1].
    static MaxFeatures parse(std::string_view text);
    /// Features sampled per split, at least 1.
    std::size_t resolve(std::size_t n_features) const;
    std::string to_string() const;
};

struct TrainConfig {
    int n_estimators = 100;
    std::optional<int> max_depth;
    MaxFeatures max_features;
    int min_samples_leaf = 1;
    bool bootstrap = true;
    std::uint64_t seed = 0;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

/// Bagged CART forest. Classification `targets` hold class indices into
/// `classes`; splits minimise Gini impurity and leaves hold class
/// frequencies. Regression splits minimise variance and leaves hold means.
/// Tree t draws from its own generator seeded with seed + t.
ForestModel train(const FeatureMatrix& features, const Eigen::VectorXd& targets, Task task,
                  const TrainConfig& config, std::vector<FeatureSpec> specs,
                  std::vector<std::string> classes = {});

/// Infers feature specs and classes from the data.
ForestModel train(const Dataset& data, Task task, const TrainConfig& config);

}  // namespace cforest
