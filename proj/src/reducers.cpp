#include "conclusive_forest/reducers.hpp"

#include "conclusive_forest/errors.hpp"
#include "conclusive_forest/kmedoids.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace cforest {

FeatureRanges feature_ranges(const ForestModel& model) {
    FeatureRanges out;
    out.reserve(model.num_features());
    for (const FeatureSpec& f : model.features()) out.emplace_back(f.domain_min, f.domain_max);
    return out;
}

std::vector<int> ReductionOutcome::retained_trees() const {
    std::vector<int> out;
    out.reserve(retained_paths.size());
    for (const DecisionPath& p : retained_paths) out.push_back(p.tree_index);
    return out;
}

namespace {

std::vector<int> all_indices(std::size_t n) {
    std::vector<int> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

std::vector<int> sorted_unique(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

std::string format_number(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

}  // namespace

ReductionContext ReductionContext::classification(std::vector<DecisionPath> paths, std::size_t n_classes,
                                                  int predicted_class, FeatureRanges ranges) {
    if (paths.empty()) throw Error("no decision paths");
    ReductionContext ctx;
    ctx.regression_ = false;
    ctx.paths_ = std::move(paths);
    ctx.ranges_ = std::move(ranges);
    ctx.predicted_class_ = predicted_class;
    ctx.tally_ = tally_votes(ctx.paths_, n_classes);
    if (ctx.tally_.tied())
        throw TieError("top two classes tie with " + std::to_string(ctx.tally_.majority_votes()) + " votes each");

    const int total = ctx.tally_.total;
    if (ctx.tally_.majority != predicted_class) {
        // soft voting disagrees with the hard-vote majority; nothing can be dropped safely by counting
        ctx.requirement_ = {total, {}, 0, Rationale::full_forest};
        ctx.pool_ = all_indices(ctx.paths_.size());
        ctx.needed_ = total;
        return ctx;
    }
    ctx.requirement_ = n_classes == 2 ? requirement_binary(ctx.tally_) : requirement_multiclass(ctx.tally_);
    for (const DecisionPath& p : ctx.paths_) {
        if (ctx.requirement_.rationale == Rationale::quorum) {
            if (p.vote == ctx.tally_.majority) ctx.pool_.push_back(p.tree_index);
        } else if (p.vote == ctx.tally_.majority || p.vote == ctx.tally_.second) {
            ctx.mandatory_.push_back(p.tree_index);
        } else {
            ctx.pool_.push_back(p.tree_index);
        }
    }
    ctx.needed_ = ctx.requirement_.rationale == Rationale::quorum ? ctx.requirement_.minimum_paths
                                                                   : ctx.requirement_.free_pick;
    return ctx;
}

ReductionContext ReductionContext::regression(std::vector<DecisionPath> paths, std::vector<TreeStats> stats,
                                              ErrorBudget budget, FeatureRanges ranges) {
    if (paths.empty()) throw Error("no decision paths");
    if (stats.size() != paths.size()) throw Error("tree_stats and paths differ in length");
    if (!(budget.allowed_error >= 0.0)) throw ConfigError("allowed_error must be >= 0");
    ReductionContext ctx;
    ctx.regression_ = true;
    ctx.paths_ = std::move(paths);
    ctx.stats_ = std::move(stats);
    ctx.budget_ = budget;
    ctx.ranges_ = std::move(ranges);
    for (const DecisionPath& p : ctx.paths_) ctx.predictions_.push_back(p.value);
    ctx.pool_ = all_indices(ctx.paths_.size());
    ctx.needed_ = 0;
    return ctx;
}

ReductionContext ReductionContext::from_model(const ForestModel& model, const InstanceRef& x,
                                              std::optional<ErrorBudget> budget) {
    auto paths = model.extract_paths(x);
    if (model.task() == Task::regression) {
        if (!budget) throw ConfigError("regression explanations need an error budget");
        return regression(std::move(paths), model.tree_stats(), *budget, feature_ranges(model));
    }
    const int predicted = model.predict(x).class_index;
    return classification(std::move(paths), model.classes().size(), predicted, feature_ranges(model));
}

double ReductionContext::local_error(std::span<const int> retained) const {
    if (!regression_) throw Error("local_error is only defined for regression");
    return cforest::local_error(predictions_, stats_, retained);
}

bool ReductionContext::requirement_met(std::span<const int> retained) const {
    if (regression_) return local_error(retained) <= budget_.allowed_error;
    switch (requirement_.rationale) {
        case Rationale::quorum: {
            const auto m = std::count_if(retained.begin(), retained.end(), [&](int t) {
                return paths_[static_cast<std::size_t>(t)].vote == tally_.majority;
            });
            return m >= needed_;
        }
        case Rationale::k_rule: {
            const std::set<int> kept(retained.begin(), retained.end());
            for (int t : mandatory_)
                if (!kept.count(t)) return false;
            const auto free =
                std::count_if(pool_.begin(), pool_.end(), [&](int t) { return kept.count(t) > 0; });
            return free >= needed_;
        }
        case Rationale::full_forest: return retained.size() == paths_.size();
    }
    return false;
}

bool ReductionContext::accepts(std::span<const int> retained) const {
    if (!requirement_met(retained)) return false;
    if (regression_) return true;
    return soft_vote_check(paths_, retained, predicted_class_).ok();
}

ReductionOutcome ReductionContext::finalize(std::vector<int> retained, std::vector<std::string> trace) const {
    retained.insert(retained.end(), mandatory_.begin(), mandatory_.end());
    retained = sorted_unique(std::move(retained));
    std::vector<bool> kept(paths_.size(), false);
    for (int t : retained) kept[static_cast<std::size_t>(t)] = true;
    auto add = [&](int t) {
        kept[static_cast<std::size_t>(t)] = true;
        retained.insert(std::upper_bound(retained.begin(), retained.end(), t), t);
    };

    if (!regression_) {
        const auto mass = [&](int t) { return paths_[static_cast<std::size_t>(t)].leaf[predicted_class_]; };
        // candidates ordered by predicted-class probability, then tree index
        auto by_mass = [&](std::vector<int> ids) {
            std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) { return mass(a) > mass(b); });
            return ids;
        };
        int added = 0;
        for (int t : by_mass(pool_)) {
            if (requirement_met(retained)) break;
            if (!kept[static_cast<std::size_t>(t)]) {
                add(t);
                ++added;
            }
        }
        if (added > 0) trace.push_back("requirement_restore(+" + std::to_string(added) + ")");
        added = 0;
        const auto order = by_mass(all_indices(paths_.size()));
        auto next = order.begin();
        while (!soft_vote_check(paths_, retained, predicted_class_).ok()) {
            while (next != order.end() && kept[static_cast<std::size_t>(*next)]) ++next;
            if (next == order.end()) throw TieError("class probabilities tie; no stable prediction to explain");
            add(*next);
            ++added;
        }
        if (added > 0) trace.push_back("soft_vote_restore(+" + std::to_string(added) + ")");
    } else {
        int added = 0;
        while (local_error(retained) > budget_.allowed_error) {
            int best = -1;
            double best_error = std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < paths_.size(); ++t) {
                if (kept[t]) continue;
                auto trial = retained;
                trial.push_back(static_cast<int>(t));
                const double e = local_error(trial);
                if (e < best_error) {
                    best_error = e;
                    best = static_cast<int>(t);
                }
            }
            add(best);
            ++added;
        }
        if (added > 0) trace.push_back("budget_restore(+" + std::to_string(added) + ")");
    }

    ReductionOutcome out;
    std::set<int> features;
    for (int t : retained) {
        out.retained_paths.push_back(paths_[static_cast<std::size_t>(t)]);
        for (const Condition& c : paths_[static_cast<std::size_t>(t)].conditions) features.insert(c.feature);
    }
    out.retained_features.assign(features.begin(), features.end());
    if (regression_) out.achieved_local_error = local_error(retained);
    out.method_trace = std::move(trace);
    return out;
}

ReductionOutcome ReductionContext::no_reduction() const { return finalize(pool_, {"none"}); }

double path_similarity(const DecisionPath& a, const DecisionPath& b, const FeatureRanges& ranges) {
    if (ranges.empty()) return 1.0;
    double s = 0.0;
    for (std::size_t f = 0; f < ranges.size(); ++f) {
        const auto ia = path_interval(a, static_cast<int>(f));
        const auto ib = path_interval(b, static_cast<int>(f));
        if (ia && ib) {
            auto close = [&](const Interval& iv) {
                return std::pair{std::isinf(iv.lower) ? ranges[f].first : iv.lower,
                                 std::isinf(iv.upper) ? ranges[f].second : iv.upper};
            };
            const auto [li, ui] = close(*ia);
            const auto [lj, uj] = close(*ib);
            const double inter = std::min(ui, uj) - std::max(li, lj);
            const double uni = std::max(ui, uj) - std::min(li, lj);
            if (inter > 0.0 && uni != 0.0) s += inter / uni;
        } else if (!ia && !ib) {
            s += 1.0;
        }
    }
    return s / static_cast<double>(ranges.size());
}

Eigen::MatrixXd dissimilarity_matrix(std::span<const DecisionPath> paths, const FeatureRanges& ranges) {
    const auto n = static_cast<Eigen::Index>(paths.size());
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = 1.0 - path_similarity(paths[static_cast<std::size_t>(i)],
                                                   paths[static_cast<std::size_t>(j)], ranges);
            d(i, j) = d(j, i) = std::clamp(v, 0.0, 1.0);
        }
    return d;
}

ReductionOutcome reduce_association_rules(const ReductionContext& ctx, std::span<const int> candidates,
                                          const ReducerOptions& options) {
    if (candidates.empty()) throw Error("empty transaction set");
    std::vector<Itemset> transactions;
    transactions.reserve(candidates.size());
    for (int t : candidates) transactions.push_back(ctx.paths()[static_cast<std::size_t>(t)].features());

    const auto frequent = mine_frequent_itemsets(transactions, options.min_support, options.max_len, options.miner);
    const auto rules = association_rules(frequent, transactions.size());
    std::vector<int> ordered;
    std::vector<bool> seen(ctx.num_features(), false);
    for (const AssociationRule& r : rules)
        for (int f : r.antecedent)
            if (!seen[static_cast<std::size_t>(f)]) {
                seen[static_cast<std::size_t>(f)] = true;
                ordered.push_back(f);
            }

    std::vector<bool> allowed(ctx.num_features(), false);
    for (int t : ctx.mandatory())
        for (const Condition& c : ctx.paths()[static_cast<std::size_t>(t)].conditions)
            allowed[static_cast<std::size_t>(c.feature)] = true;

    auto covered = [&] {
        std::vector<int> sel;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const auto& fs = transactions[i];
            if (std::all_of(fs.begin(), fs.end(), [&](int f) { return allowed[static_cast<std::size_t>(f)]; }))
                sel.push_back(candidates[i]);
        }
        return sel;
    };
    auto satisfied = [&](const std::vector<int>& sel) {
        if (!ctx.is_regression()) return static_cast<int>(sel.size()) >= ctx.needed_from_pool();
        return ctx.local_error(sel) <= ctx.budget().allowed_error;
    };

    std::vector<std::string> trace{"AR(" + std::string(to_string(options.miner)) +
                                   ",min_support=" + format_number(options.min_support) + ")"};
    std::vector<int> selected = covered();
    std::size_t used = 0;
    while (!satisfied(selected) && used < ordered.size()) {
        allowed[static_cast<std::size_t>(ordered[used++])] = true;
        selected = covered();
    }
    if (!satisfied(selected)) {
        selected.assign(candidates.begin(), candidates.end());
        trace.push_back("AR:fallback_all_paths");
    }
    return ctx.finalize(std::move(selected), std::move(trace));
}

ReductionOutcome reduce_association_rules(const ReductionContext& ctx, const ReducerOptions& options) {
    return reduce_association_rules(ctx, ctx.pool(), options);
}

ReductionOutcome reduce_clustering(const ReductionContext& ctx, std::span<const int> candidates,
                                   const ReducerOptions& options) {
    if (ctx.is_regression()) throw MethodError("clustering reduction is not defined for regression");
    if (options.k < 1) throw ConfigError("k must be >= 1");
    if (static_cast<std::size_t>(options.k) > candidates.size())
        throw ConfigError("k = " + std::to_string(options.k) + " exceeds the " +
                          std::to_string(candidates.size()) + " candidate paths");

    std::vector<DecisionPath> subset;
    subset.reserve(candidates.size());
    for (int t : candidates) subset.push_back(ctx.paths()[static_cast<std::size_t>(t)]);
    const auto result = pam(dissimilarity_matrix(subset, ctx.ranges()), options.k, options.seed);

    std::vector<std::vector<int>> clusters(static_cast<std::size_t>(options.k));
    for (std::size_t i = 0; i < candidates.size(); ++i)
        clusters[static_cast<std::size_t>(result.assignment[i])].push_back(candidates[i]);
    std::erase_if(clusters, [](const auto& c) { return c.empty(); });
    for (auto& c : clusters) std::sort(c.begin(), c.end());
    std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) {
        return a.size() != b.size() ? a.size() > b.size() : a.front() < b.front();
    });

    std::vector<int> selected;
    std::size_t used = 0;
    while (static_cast<int>(selected.size()) < ctx.needed_from_pool() && used < clusters.size()) {
        selected.insert(selected.end(), clusters[used].begin(), clusters[used].end());
        ++used;
    }
    std::vector<std::string> trace{"CL(kmedoids,k=" + std::to_string(options.k) + ",clusters_used=" +
                                   std::to_string(used) + ")"};
    return ctx.finalize(std::move(selected), std::move(trace));
}

ReductionOutcome reduce_clustering(const ReductionContext& ctx, const ReducerOptions& options) {
    return reduce_clustering(ctx, ctx.pool(), options);
}

ReductionOutcome reduce_random(const ReductionContext& ctx, std::span<const int> candidates,
                               const ReducerOptions& options) {
    std::mt19937_64 rng(options.seed);
    std::vector<int> pool(candidates.begin(), candidates.end());
    std::sort(pool.begin(), pool.end());
    std::vector<std::string> trace{"RS(seed=" + std::to_string(options.seed) + ")"};

    if (!ctx.is_regression()) {
        const auto needed = static_cast<std::size_t>(std::max(0, ctx.needed_from_pool()));
        if (pool.size() > needed) {
            std::shuffle(pool.begin(), pool.end(), rng);
            pool.resize(needed);
        }
        return ctx.finalize(std::move(pool), std::move(trace));
    }

    // One random priority per tree, so candidate subsets are removed in a
    // consistent order regardless of which subset arrives here.
    std::vector<int> priority = all_indices(ctx.paths().size());
    std::shuffle(priority.begin(), priority.end(), rng);
    std::vector<int> rank(priority.size());
    for (std::size_t r = 0; r < priority.size(); ++r) rank[static_cast<std::size_t>(priority[r])] = static_cast<int>(r);
    std::sort(pool.begin(), pool.end(), [&](int a, int b) {
        return rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)];
    });

    std::vector<int> kept = pool;
    std::size_t removed = 0;
    for (int t : pool) {
        if (kept.size() <= 1) break;
        std::vector<int> trial;
        trial.reserve(kept.size() - 1);
        for (int k : kept)
            if (k != t) trial.push_back(k);
        if (ctx.local_error(trial) > ctx.budget().allowed_error) break;  // the last removal is undone
        kept = std::move(trial);
        ++removed;
    }
    trace.push_back("RS:removed=" + std::to_string(removed));
    return ctx.finalize(std::move(kept), std::move(trace));
}

ReductionOutcome reduce_random(const ReductionContext& ctx, const ReducerOptions& options) {
    return reduce_random(ctx, ctx.pool(), options);
}

std::span<const double> sigma_divisors() {
    static constexpr std::array<double, 15> grid{.1, .2, .5, 1, 2, 4, 5, 6, 7, 8, 9, 10, 20, 50, 100};
    return grid;
}

ReductionOutcome reduce_distribution(const ReductionContext& ctx, DistributionVariant variant,
                                     const ReducerOptions& options) {
    if (!ctx.is_regression()) throw MethodError("distribution-based selection is regression only");
    const auto& paths = ctx.paths();
    const auto n = static_cast<double>(paths.size());
    double mean = 0.0;
    for (const DecisionPath& p : paths) mean += p.value;
    mean /= n;
    double var = 0.0;
    for (const DecisionPath& p : paths) var += (p.value - mean) * (p.value - mean);
    const double sigma = std::sqrt(var / n);

    const std::string name = variant == DistributionVariant::inner ? "DSi" : "DSo";
    std::vector<std::string> trace{name + "(c=" + format_number(options.band_constant) + ")"};
    std::vector<int> best = all_indices(paths.size());
    if (sigma == 0.0) {
        trace.push_back(name + ":zero_spread");
        return ctx.finalize(std::move(best), std::move(trace));
    }

    std::optional<double> chosen;
    for (double s : sigma_divisors()) {
        const double half = options.band_constant * sigma / s;
        const double lo = mean - half;
        const double hi = mean + half;
        std::vector<int> kept;
        for (const DecisionPath& p : paths) {
            const bool inside = !(p.value < lo || p.value > hi);
            if (inside == (variant == DistributionVariant::inner)) kept.push_back(p.tree_index);
        }
        if (kept.empty() || kept.size() >= best.size()) continue;
        if (ctx.local_error(kept) <= ctx.budget().allowed_error) {
            best = std::move(kept);
            chosen = s;
        }
    }
    trace.push_back(chosen ? name + ":s=" + format_number(*chosen) : name + ":no_band_qualified");
    return ctx.finalize(std::move(best), std::move(trace));
}

void validate_method(std::string_view code, Task task) {
    if (code == "none") return;
    if (task == Task::regression) {
        if (code == "1" || code == "3" || code == "13" || code == "AR+RS" || code == "DSi" || code == "DSo") return;
        throw MethodError("method '" + std::string(code) + "' is not available for regression");
    }
    static constexpr std::array<std::string_view, 7> valid{"1", "2", "3", "12", "13", "23", "123"};
    if (std::find(valid.begin(), valid.end(), code) == valid.end())
        throw MethodError("method '" + std::string(code) + "' is not available for classification");
}

ReductionOutcome run_pipeline(const ReductionContext& ctx, std::string_view code, const ReducerOptions& options) {
    validate_method(code, ctx.is_regression() ? Task::regression : Task::binary);
    if (code == "none") return ctx.no_reduction();
    if (code == "DSi") return reduce_distribution(ctx, DistributionVariant::inner, options);
    if (code == "DSo") return reduce_distribution(ctx, DistributionVariant::outer, options);
    const std::string digits = code == "AR+RS" ? "13" : std::string(code);

    const std::set<int> pool(ctx.pool().begin(), ctx.pool().end());
    std::vector<int> candidates = ctx.pool();
    ReductionOutcome outcome;
    std::vector<std::string> trace;
    for (char stage : digits) {
        if (candidates.empty()) break;
        switch (stage) {
            case '1': outcome = reduce_association_rules(ctx, candidates, options); break;
            case '2': {
                ReducerOptions clamped = options;
                clamped.k = std::min<int>(options.k, static_cast<int>(candidates.size()));
                outcome = reduce_clustering(ctx, candidates, clamped);
                break;
            }
            case '3': outcome = reduce_random(ctx, candidates, options); break;
            default: throw MethodError("bad method digit");
        }
        trace.insert(trace.end(), outcome.method_trace.begin(), outcome.method_trace.end());
        candidates.clear();
        for (int t : outcome.retained_trees())
            if (pool.count(t)) candidates.push_back(t);
    }
    if (outcome.retained_paths.empty() && candidates.empty()) outcome = ctx.finalize({}, {});
    outcome.method_trace = std::move(trace);
    return outcome;
}

}  // namespace cforest
