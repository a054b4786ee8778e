#pragma once

#include "conclusive_forest/forest_model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cforest {

/// Headered table: numeric feature columns plus an optional target column
/// kept as raw text.
struct Dataset {
    std::vector<std::string> feature_names;
    FeatureMatrix features;
    std::vector<std::string> targets;  // empty when the file has no target column
    std::string target_name = "target";

    std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
    bool has_targets() const { return !targets.empty(); }
};

/// Parses CSV text. The column named `target_column` (if any) becomes the
/// target; every other cell must be a finite number.
Dataset parse_csv(std::string_view text, std::string_view target_column = "target");
Dataset read_csv(const std::filesystem::path& path, std::string_view target_column = "target");
std::string to_csv(const Dataset& data);

/// Distinct labels; numeric labels sort numerically, others lexicographically.
std::vector<std::string> infer_classes(const std::vector<std::string>& targets);
/// Throws SchemaError for labels not in `classes`.
Eigen::VectorXd class_indices(const std::vector<std::string>& targets, const std::vector<std::string>& classes);
Eigen::VectorXd numeric_targets(const std::vector<std::string>& targets);
/// Targets encoded for `model`: class indices, or numbers for regression.
Eigen::VectorXd encode_targets(const Dataset& data, const ForestModel& model);

/// Feature columns reordered to the model's declaration order; extra columns
/// are ignored, missing ones raise SchemaError.
FeatureMatrix align_to_model(const Dataset& data, const ForestModel& model);

/// Specs with domains taken from the data. Columns named "group=value" become
/// one-hot members of `group`.
std::vector<FeatureSpec> infer_feature_specs(const std::vector<std::string>& names, const FeatureMatrix& features);

Dataset subset(const Dataset& data, const std::vector<std::size_t>& rows);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};
/// Seeded shuffle split; `test_fraction` in [0, 1).
SplitIndices split_indices(std::size_t n, double test_fraction, std::uint64_t seed);

/// Synthetic stand-ins with the shapes of common benchmark tables.
/// 1372 x 4 binary: variance, skewness, curtosis, entropy.
Dataset make_banknote_like(std::uint64_t seed);
/// 214 x 9, six imbalanced classes.
Dataset make_glass_like(std::uint64_t seed);
/// 4898 x 12 regression target.
Dataset make_wine_like(std::uint64_t seed);
/// Binary table with numeric columns and one-hot encoded categoricals.
Dataset make_census_like(std::uint64_t seed, std::size_t rows = 1000);

}  // namespace cforest
