#pragma once

#include "conclusive_forest/forest_model.hpp"
#include "conclusive_forest/itemsets.hpp"
#include "conclusive_forest/quorum.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cforest {

/// Closed training range per feature, used to close open path bounds.
using FeatureRanges = std::vector<std::pair<double, double>>;
FeatureRanges feature_ranges(const ForestModel& model);

struct ReductionOutcome {
    std::vector<DecisionPath> retained_paths;  // ascending tree index
    std::vector<int> retained_features;        // union over retained paths
    std::optional<double> achieved_local_error;
    std::vector<std::string> method_trace;

    std::vector<int> retained_trees() const;
};

struct ReducerOptions {
    Miner miner = Miner::apriori;
    double min_support = 0.1;
    std::size_t max_len = 4;
    int k = 5;
    std::uint64_t seed = 0;
    double band_constant = 3.0;
};

/// Everything a reducer needs about one explained instance: the per-tree
/// decision paths, what must be retained, and how candidate subsets are
/// accepted.
///
/// Classification: paths of the predicted class M form the selection pool
/// when M holds a quorum. Under the K-rule every path of M and L is
/// mandatory and the pool is the remaining classes' paths, from which
/// `free_pick` must be kept. Regression: every path is in the pool and the
/// error budget governs.
class ReductionContext {
public:
    static ReductionContext classification(std::vector<DecisionPath> paths, std::size_t n_classes,
                                           int predicted_class, FeatureRanges ranges);
    static ReductionContext regression(std::vector<DecisionPath> paths, std::vector<TreeStats> stats,
                                       ErrorBudget budget, FeatureRanges ranges);
    /// Throws TieError when the top two vote counts tie.
    static ReductionContext from_model(const ForestModel& model, const InstanceRef& x,
                                       std::optional<ErrorBudget> budget = std::nullopt);

    bool is_regression() const { return regression_; }
    const std::vector<DecisionPath>& paths() const { return paths_; }
    const FeatureRanges& ranges() const { return ranges_; }
    std::size_t num_features() const { return ranges_.size(); }

    const VoteTally& tally() const { return tally_; }
    const RetentionRequirement& requirement() const { return requirement_; }
    int predicted_class() const { return predicted_class_; }
    const ErrorBudget& budget() const { return budget_; }

    const std::vector<int>& pool() const { return pool_; }
    const std::vector<int>& mandatory() const { return mandatory_; }
    /// How many pool paths must survive (classification only).
    int needed_from_pool() const { return needed_; }

    double local_error(std::span<const int> retained) const;
    bool requirement_met(std::span<const int> retained) const;
    bool accepts(std::span<const int> retained) const;

    /// Merges the mandatory paths into `retained`, adds paths until
    /// `accepts` holds, and fills features and error.
    ReductionOutcome finalize(std::vector<int> retained, std::vector<std::string> trace) const;
    /// Baseline outcome: every pool and mandatory path.
    ReductionOutcome no_reduction() const;

private:
    ReductionContext() = default;

    bool regression_ = false;
    std::vector<DecisionPath> paths_;
    FeatureRanges ranges_;
    VoteTally tally_;
    RetentionRequirement requirement_;
    int predicted_class_ = -1;
    ErrorBudget budget_;
    std::vector<double> predictions_;
    std::vector<TreeStats> stats_;
    std::vector<int> pool_;
    std::vector<int> mandatory_;
    int needed_ = 0;
};

/// Similarity in [0, 1]: per feature, overlap / union of the two intervals
/// when both paths test it, 1 when neither does, 0 otherwise; averaged over
/// all features.
double path_similarity(const DecisionPath& a, const DecisionPath& b, const FeatureRanges& ranges);
/// 1 - path_similarity for every pair, zero diagonal.
Eigen::MatrixXd dissimilarity_matrix(std::span<const DecisionPath> paths, const FeatureRanges& ranges);

/// `candidates` index ctx.paths() and default to the context's pool.
ReductionOutcome reduce_association_rules(const ReductionContext& ctx, std::span<const int> candidates,
                                          const ReducerOptions& options);
ReductionOutcome reduce_association_rules(const ReductionContext& ctx, const ReducerOptions& options);

/// Classification only; throws ConfigError when k exceeds the candidates.
ReductionOutcome reduce_clustering(const ReductionContext& ctx, std::span<const int> candidates,
                                   const ReducerOptions& options);
ReductionOutcome reduce_clustering(const ReductionContext& ctx, const ReducerOptions& options);

ReductionOutcome reduce_random(const ReductionContext& ctx, std::span<const int> candidates,
                               const ReducerOptions& options);
ReductionOutcome reduce_random(const ReductionContext& ctx, const ReducerOptions& options);

enum class DistributionVariant { inner, outer };
/// The fixed grid of sigma divisors scanned by distribution-based selection.
std::span<const double> sigma_divisors();
ReductionOutcome reduce_distribution(const ReductionContext& ctx, DistributionVariant variant,
                                     const ReducerOptions& options);

/// Method codes: classification "1", "2", "3", "12", "13", "23", "123"
/// (association rules, clustering, random selection, applied in digit
/// order); regression "1", "3", "13" (alias "AR+RS"), "DSi", "DSo".
/// "none" yields the no-reduction baseline. Throws MethodError for codes that
/// are malformed or not applicable to the task.
ReductionOutcome run_pipeline(const ReductionContext& ctx, std::string_view method_code,
                              const ReducerOptions& options);
void validate_method(std::string_view method_code, Task task);

}  // namespace cforest
