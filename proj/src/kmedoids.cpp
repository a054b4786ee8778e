#include "conclusive_forest/kmedoids.hpp"

#include "conclusive_forest/errors.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

namespace cforest {

double medoid_cost(const Eigen::MatrixXd& d, const std::vector<int>& medoids) {
    double cost = 0.0;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int m : medoids) best = std::min(best, d(i, m));
        cost += best;
    }
    return cost;
}

namespace {

std::vector<int> build_init(const Eigen::MatrixXd& d, int k) {
    const auto n = static_cast<int>(d.rows());
    std::vector<int> medoids;
    // first medoid minimizes the total distance to all points
    Eigen::VectorXd nearest = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    int first = 0;
    double first_cost = std::numeric_limits<double>::infinity();
    for (int c = 0; c < n; ++c) {
        const double cost = d.col(c).sum();
        if (cost < first_cost) {
            first_cost = cost;
            first = c;
        }
    }
    medoids.push_back(first);
    nearest = d.col(first);
    while (static_cast<int>(medoids.size()) < k) {
        int pick = -1;
        double best_gain = -1.0;
        for (int c = 0; c < n; ++c) {
            if (std::find(medoids.begin(), medoids.end(), c) != medoids.end()) continue;
            double gain = 0.0;
            for (int j = 0; j < n; ++j) gain += std::max(0.0, nearest[j] - d(j, c));
            if (gain > best_gain) {
                best_gain = gain;
                pick = c;
            }
        }
        medoids.push_back(pick);
        nearest = nearest.cwiseMin(d.col(pick));
    }
    return medoids;
}

}  // namespace

KMedoidsResult pam(const Eigen::MatrixXd& d, int k, std::uint64_t seed, MedoidInit init) {
    const auto n = static_cast<int>(d.rows());
    if (d.rows() != d.cols()) throw Error("dissimilarity matrix must be square");
    if (k < 1 || k > n) throw ConfigError("k must be in [1, number of points]");

    std::vector<int> medoids;
    if (init == MedoidInit::build) {
        medoids = build_init(d, k);
    } else {
        std::vector<int> all(static_cast<std::size_t>(n));
        std::iota(all.begin(), all.end(), 0);
        std::mt19937_64 rng(seed);
        std::shuffle(all.begin(), all.end(), rng);
        medoids.assign(all.begin(), all.begin() + k);
    }

    double cost = medoid_cost(d, medoids);
    constexpr double improvement_eps = 1e-12;
    for (;;) {
        double best_cost = cost;
        int best_slot = -1;
        int best_candidate = -1;
        for (int slot = 0; slot < k; ++slot) {
            for (int c = 0; c < n; ++c) {
                if (std::find(medoids.begin(), medoids.end(), c) != medoids.end()) continue;
                std::vector<int> trial = medoids;
                trial[static_cast<std::size_t>(slot)] = c;
                const double trial_cost = medoid_cost(d, trial);
                if (trial_cost < best_cost - improvement_eps) {
                    best_cost = trial_cost;
                    best_slot = slot;
                    best_candidate = c;
                }
            }
        }
        if (best_slot < 0) break;
        medoids[static_cast<std::size_t>(best_slot)] = best_candidate;
        cost = best_cost;
    }

    std::sort(medoids.begin(), medoids.end());
    KMedoidsResult result;
    result.medoids = medoids;
    result.assignment.resize(static_cast<std::size_t>(n));
    result.cost = 0.0;
    for (int i = 0; i < n; ++i) {
        int best = 0;
        for (int m = 1; m < k; ++m)
            if (d(i, medoids[static_cast<std::size_t>(m)]) < d(i, medoids[static_cast<std::size_t>(best)])) best = m;
        // a medoid always belongs to its own cluster
        for (int m = 0; m < k; ++m)
            if (medoids[static_cast<std::size_t>(m)] == i) best = m;
        result.assignment[static_cast<std::size_t>(i)] = best;
        result.cost += d(i, medoids[static_cast<std::size_t>(best)]);
    }
    return result;
}

}  // namespace cforest
