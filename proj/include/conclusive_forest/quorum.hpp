#pragma once

#include "conclusive_forest/forest_model.hpp"

#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace cforest {

/// Hard-vote counts per class over one decision path per tree.
struct VoteTally {
    std::vector<int> counts;
    int majority = -1;  // M
    int second = -1;    // L
    int total = 0;      // |T|

    int majority_votes() const { return counts[static_cast<std::size_t>(majority)]; }
    int second_votes() const { return second < 0 ? 0 : counts[static_cast<std::size_t>(second)]; }
    bool tied() const { return second >= 0 && majority_votes() == second_votes(); }
};

VoteTally tally_votes(std::span<const int> votes, std::size_t n_classes);
VoteTally tally_votes(std::span<const DecisionPath> paths, std::size_t n_classes);

/// Strict majority: floor(total / 2) + 1.
constexpr int quorum(int total) { return total / 2 + 1; }

enum class Rationale { quorum, k_rule, full_forest };
std::string_view to_string(Rationale r);

struct RetentionRequirement {
    int minimum_paths = 0;
    std::vector<std::pair<int, int>> mandatory;  // (class, count kept in full)
    int free_pick = 0;                           // paths drawn from the other classes
    Rationale rationale = Rationale::quorum;
};

/// Binary retention: a quorum of majority-class paths. Throws TieError when
/// the majority does not reach the quorum.
RetentionRequirement requirement_binary(const VoteTally& tally);

/// Multi-class retention: the quorum rule when it applies, otherwise the
/// K-rule K = |T| + |C_L| - |C_M| + 1 keeping all of classes M and L plus
/// K - |C_M| - |C_L| paths of the remaining classes. Throws TieError when the
/// top two classes tie.
RetentionRequirement requirement_multiclass(const VoteTally& tally);

struct ErrorBudget {
    enum class Source { model_mae, user };
    double allowed_error = 0.0;
    Source source = Source::user;
};

/// Worst-case shift of the forest mean when every tree outside `retained`
/// may move to any of its leaves. Excluded trees are pushed to their farther
/// extreme; the larger of the all-up and all-down displacements is reported,
/// which is the exact maximum of |mean shift| over leaf substitutions.
double local_error(std::span<const double> tree_predictions, std::span<const TreeStats> stats,
                   std::span<const int> retained);
double local_error(const ForestModel& model, const InstanceRef& x, std::span<const int> retained);

/// Model MAE on a validation set, the default error budget.
ErrorBudget default_allowed_error(const ForestModel& model, const FeatureMatrix& features,
                                  const Eigen::VectorXd& targets);

/// Soft-voting acceptance of a retained subset for predicted class M.
///  - floor_identity: floor(sum_{T'} p_M / |T| + 1/2) equals the same
///    expression over the full forest.
///  - rival_margin: for every other class j, sum_{T'} p_M exceeds
///    sum_{T'} p_j + |T \ T'|, so no reassignment of the excluded trees'
///    probability mass can overturn the argmax.
struct SoftVoteCheck {
    bool floor_identity = false;
    bool rival_margin = false;
    bool ok() const { return floor_identity && rival_margin; }
};

SoftVoteCheck soft_vote_check(std::span<const DecisionPath> all_paths, std::span<const int> retained,
                              int predicted_class);

}  // namespace cforest
