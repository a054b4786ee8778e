#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace cforest {

struct KMedoidsResult {
    std::vector<int> medoids;     // sorted point indices
    std::vector<int> assignment;  // per point: position in `medoids`
    double cost = 0.0;            // sum of distances to the assigned medoid
};

enum class MedoidInit { build, random };

/// PAM (BUILD + best-improvement SWAP) on a precomputed dissimilarity matrix.
/// With `MedoidInit::random` the starting medoids are drawn with `seed`.
/// Points are assigned to the nearest medoid, ties to the lowest index.
KMedoidsResult pam(const Eigen::MatrixXd& dissimilarity, int k, std::uint64_t seed = 0,
                   MedoidInit init = MedoidInit::build);

/// Sum over points of the distance to the nearest of `medoids`.
double medoid_cost(const Eigen::MatrixXd& dissimilarity, const std::vector<int>& medoids);

}  // namespace cforest
