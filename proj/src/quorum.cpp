#include "conclusive_forest/quorum.hpp"

#include "conclusive_forest/errors.hpp"

#include <cmath>
#include <string>

namespace cforest {

std::string_view to_string(Rationale r) {
    switch (r) {
        case Rationale::quorum: return "quorum";
        case Rationale::k_rule: return "k_rule";
        case Rationale::full_forest: return "full_forest";
    }
    return "unknown";
}

VoteTally tally_votes(std::span<const int> votes, std::size_t n_classes) {
    VoteTally t;
    t.counts.assign(n_classes, 0);
    for (int v : votes) {
        if (v < 0 || static_cast<std::size_t>(v) >= n_classes) throw Error("vote outside class range");
        ++t.counts[static_cast<std::size_t>(v)];
    }
    t.total = static_cast<int>(votes.size());
    for (std::size_t c = 0; c < n_classes; ++c) {
        const int cls = static_cast<int>(c);
        if (t.majority < 0 || t.counts[c] > t.counts[static_cast<std::size_t>(t.majority)]) {
            t.second = t.majority;
            t.majority = cls;
        } else if (t.second < 0 || t.counts[c] > t.counts[static_cast<std::size_t>(t.second)]) {
            t.second = cls;
        }
    }
    return t;
}

VoteTally tally_votes(std::span<const DecisionPath> paths, std::size_t n_classes) {
    std::vector<int> votes;
    votes.reserve(paths.size());
    for (const DecisionPath& p : paths) votes.push_back(p.vote);
    return tally_votes(votes, n_classes);
}

RetentionRequirement requirement_binary(const VoteTally& tally) {
    const int q = quorum(tally.total);
    if (tally.tied() || tally.majority_votes() < q)
        throw TieError("no strict majority: " + std::to_string(tally.majority_votes()) + " of " +
                       std::to_string(tally.total) + " votes, quorum is " + std::to_string(q));
    return {q, {{tally.majority, q}}, 0, Rationale::quorum};
}

RetentionRequirement requirement_multiclass(const VoteTally& tally) {
    if (tally.tied())
        throw TieError("classes " + std::to_string(tally.majority) + " and " + std::to_string(tally.second) +
                       " tie with " + std::to_string(tally.majority_votes()) + " votes");
    if (tally.majority_votes() >= quorum(tally.total)) return requirement_binary(tally);
    const int cm = tally.majority_votes();
    const int cl = tally.second_votes();
    const int k = tally.total + cl - cm + 1;
    RetentionRequirement r;
    r.minimum_paths = k;
    r.mandatory = {{tally.majority, cm}, {tally.second, cl}};
    r.free_pick = k - cm - cl;
    r.rationale = Rationale::k_rule;
    return r;
}

double local_error(std::span<const double> tree_predictions, std::span<const TreeStats> stats,
                   std::span<const int> retained) {
    const std::size_t n = tree_predictions.size();
    std::vector<bool> kept(n, false);
    for (int t : retained) kept[static_cast<std::size_t>(t)] = true;
    double up = 0.0;
    double down = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        if (kept[t]) continue;
        up += stats[t].max_pred - tree_predictions[t];
        down += tree_predictions[t] - stats[t].min_pred;
    }
    return std::max(up, down) / static_cast<double>(n);
}

double local_error(const ForestModel& model, const InstanceRef& x, std::span<const int> retained) {
    if (model.task() != Task::regression) throw Error("local_error requires a regression model");
    model.check_instance(x);
    std::vector<double> preds;
    preds.reserve(model.num_trees());
    for (const Tree& tree : model.trees()) preds.push_back(tree.output(x)[0]);
    return local_error(preds, model.tree_stats(), retained);
}

ErrorBudget default_allowed_error(const ForestModel& model, const FeatureMatrix& features,
                                  const Eigen::VectorXd& targets) {
    if (model.task() != Task::regression) throw Error("default_allowed_error requires a regression model");
    if (features.rows() == 0) throw Error("empty validation set");
    if (targets.size() != features.rows()) throw SchemaError("targets and features differ in length");
    double total = 0.0;
    for (Eigen::Index i = 0; i < features.rows(); ++i)
        total += std::abs(model.predict(features.row(i).transpose()).value - targets[i]);
    return {total / static_cast<double>(features.rows()), ErrorBudget::Source::model_mae};
}

SoftVoteCheck soft_vote_check(std::span<const DecisionPath> all_paths, std::span<const int> retained,
                              int predicted_class) {
    SoftVoteCheck check;
    if (all_paths.empty()) return check;
    const auto width = all_paths.front().leaf.size();
    Eigen::VectorXd full = Eigen::VectorXd::Zero(width);
    Eigen::VectorXd kept = Eigen::VectorXd::Zero(width);
    for (const DecisionPath& p : all_paths) full += p.leaf;
    for (int t : retained) kept += all_paths[static_cast<std::size_t>(t)].leaf;

    const double n = static_cast<double>(all_paths.size());
    const auto m = static_cast<Eigen::Index>(predicted_class);
    check.floor_identity = std::floor(kept[m] / n + 0.5) == std::floor(full[m] / n + 0.5);

    const double excluded = n - static_cast<double>(retained.size());
    constexpr double margin_eps = 1e-9;
    check.rival_margin = true;
    for (Eigen::Index j = 0; j < width; ++j) {
        if (j == m) continue;
        if (!(kept[m] - kept[j] - excluded > margin_eps)) {
            check.rival_margin = false;
            break;
        }
    }
    return check;
}

}  // namespace cforest
