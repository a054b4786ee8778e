#include "conclusive_forest/itemsets.hpp"

#include "conclusive_forest/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

namespace cforest {

std::string_view to_string(Miner miner) { return miner == Miner::apriori ? "apriori" : "fpgrowth"; }

Miner miner_from_string(std::string_view name) {
    if (name == "apriori") return Miner::apriori;
    if (name == "fpgrowth") return Miner::fpgrowth;
    throw ConfigError("unknown miner '" + std::string(name) + "'");
}

int min_support_count(double min_support, std::size_t n_transactions) {
    if (!(min_support > 0.0 && min_support <= 1.0)) throw ConfigError("min_support must be in (0, 1]");
    const double raw = min_support * static_cast<double>(n_transactions);
    return std::max(1, static_cast<int>(std::ceil(raw - 1e-9)));
}

namespace {

std::vector<Itemset> normalized(const std::vector<Itemset>& transactions) {
    std::vector<Itemset> out;
    out.reserve(transactions.size());
    for (Itemset t : transactions) {
        std::sort(t.begin(), t.end());
        t.erase(std::unique(t.begin(), t.end()), t.end());
        out.push_back(std::move(t));
    }
    return out;
}

void canonical_sort(std::vector<FrequentItemset>& sets) {
    std::sort(sets.begin(), sets.end(), [](const FrequentItemset& a, const FrequentItemset& b) {
        if (a.items.size() != b.items.size()) return a.items.size() < b.items.size();
        return a.items < b.items;
    });
}

}  // namespace

std::vector<FrequentItemset> apriori(const std::vector<Itemset>& raw, double min_support, std::size_t max_len) {
    const auto transactions = normalized(raw);
    const int min_count = min_support_count(min_support, transactions.size());
    std::vector<FrequentItemset> result;
    if (max_len == 0) return result;

    std::map<int, int> singles;
    for (const Itemset& t : transactions)
        for (int item : t) ++singles[item];
    std::vector<FrequentItemset> level;
    for (const auto& [item, count] : singles)
        if (count >= min_count) level.push_back({{item}, count});

    while (!level.empty()) {
        result.insert(result.end(), level.begin(), level.end());
        if (level.front().items.size() >= max_len) break;

        std::set<Itemset> previous;
        for (const FrequentItemset& f : level) previous.insert(f.items);

        // join itemsets that share all but their last item
        std::vector<Itemset> candidates;
        for (std::size_t i = 0; i < level.size(); ++i) {
            for (std::size_t j = i + 1; j < level.size(); ++j) {
                const Itemset& a = level[i].items;
                const Itemset& b = level[j].items;
                if (!std::equal(a.begin(), a.end() - 1, b.begin())) break;
                Itemset c = a;
                c.push_back(b.back());
                bool all_frequent = true;
                for (std::size_t drop = 0; drop + 2 < c.size() && all_frequent; ++drop) {
                    Itemset sub;
                    for (std::size_t k = 0; k < c.size(); ++k)
                        if (k != drop) sub.push_back(c[k]);
                    all_frequent = previous.count(sub) > 0;
                }
                if (all_frequent) candidates.push_back(std::move(c));
            }
        }

        std::vector<FrequentItemset> next;
        for (Itemset& c : candidates) {
            int count = 0;
            for (const Itemset& t : transactions)
                if (std::includes(t.begin(), t.end(), c.begin(), c.end())) ++count;
            if (count >= min_count) next.push_back({std::move(c), count});
        }
        std::sort(next.begin(), next.end(),
                  [](const FrequentItemset& a, const FrequentItemset& b) { return a.items < b.items; });
        level = std::move(next);
    }
    canonical_sort(result);
    return result;
}

namespace {

struct WeightedTransaction {
    Itemset items;  // ordered by the tree's item order, not by id
    int weight = 0;
};

struct FpNode {
    int item = -1;
    int count = 0;
    int parent = -1;
    std::map<int, int> children;
};

class FpGrowth {
public:
    FpGrowth(int min_count, std::size_t max_len, std::vector<FrequentItemset>& out)
        : min_count_(min_count), max_len_(max_len), out_(out) {}

    void grow(const std::vector<WeightedTransaction>& db, Itemset& suffix) {
        std::map<int, int> counts;
        for (const WeightedTransaction& t : db)
            for (int item : t.items) counts[item] += t.weight;

        std::vector<std::pair<int, int>> order;  // (item, count)
        for (const auto& [item, count] : counts)
            if (count >= min_count_) order.emplace_back(item, count);
        std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        if (order.empty()) return;
        std::map<int, std::size_t> rank;
        for (std::size_t r = 0; r < order.size(); ++r) rank[order[r].first] = r;

        std::vector<FpNode> nodes(1);
        std::vector<std::vector<int>> header(order.size());
        for (const WeightedTransaction& t : db) {
            std::vector<int> items;
            for (int item : t.items)
                if (rank.count(item)) items.push_back(item);
            std::sort(items.begin(), items.end(), [&](int a, int b) { return rank[a] < rank[b]; });
            int at = 0;
            for (int item : items) {
                auto it = nodes[static_cast<std::size_t>(at)].children.find(item);
                int child;
                if (it == nodes[static_cast<std::size_t>(at)].children.end()) {
                    child = static_cast<int>(nodes.size());
                    nodes.push_back({item, 0, at, {}});
                    nodes[static_cast<std::size_t>(at)].children.emplace(item, child);
                    header[rank[item]].push_back(child);
                } else {
                    child = it->second;
                }
                nodes[static_cast<std::size_t>(child)].count += t.weight;
                at = child;
            }
        }

        for (std::size_t r = order.size(); r-- > 0;) {
            const int item = order[r].first;
            suffix.push_back(item);
            Itemset found = suffix;
            std::sort(found.begin(), found.end());
            out_.push_back({std::move(found), order[r].second});
            if (suffix.size() < max_len_) {
                std::vector<WeightedTransaction> conditional;
                for (int node : header[r]) {
                    WeightedTransaction base;
                    base.weight = nodes[static_cast<std::size_t>(node)].count;
                    for (int up = nodes[static_cast<std::size_t>(node)].parent; up > 0;
                         up = nodes[static_cast<std::size_t>(up)].parent)
                        base.items.push_back(nodes[static_cast<std::size_t>(up)].item);
                    if (!base.items.empty()) conditional.push_back(std::move(base));
                }
                grow(conditional, suffix);
            }
            suffix.pop_back();
        }
    }

private:
    int min_count_;
    std::size_t max_len_;
    std::vector<FrequentItemset>& out_;
};

}  // namespace

std::vector<FrequentItemset> fpgrowth(const std::vector<Itemset>& raw, double min_support, std::size_t max_len) {
    const auto transactions = normalized(raw);
    const int min_count = min_support_count(min_support, transactions.size());
    std::vector<FrequentItemset> result;
    if (max_len == 0) return result;
    std::vector<WeightedTransaction> db;
    db.reserve(transactions.size());
    for (const Itemset& t : transactions) db.push_back({t, 1});
    Itemset suffix;
    FpGrowth(min_count, max_len, result).grow(db, suffix);
    canonical_sort(result);
    return result;
}

std::vector<FrequentItemset> mine_frequent_itemsets(const std::vector<Itemset>& transactions, double min_support,
                                                    std::size_t max_len, Miner miner) {
    if (transactions.empty()) throw Error("empty transaction set");
    return miner == Miner::apriori ? apriori(transactions, min_support, max_len)
                                   : fpgrowth(transactions, min_support, max_len);
}

std::vector<AssociationRule> association_rules(const std::vector<FrequentItemset>& frequent,
                                               std::size_t n_transactions) {
    std::map<Itemset, int> count_of;
    for (const FrequentItemset& f : frequent) count_of[f.items] = f.count;

    std::vector<AssociationRule> rules;
    for (const FrequentItemset& f : frequent) {
        const std::size_t n = f.items.size();
        if (n < 2) continue;
        for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
            AssociationRule rule;
            for (std::size_t k = 0; k < n; ++k)
                ((mask >> k) & 1u ? rule.antecedent : rule.consequent).push_back(f.items[k]);
            auto it = count_of.find(rule.antecedent);
            if (it == count_of.end()) continue;  // cannot happen for a downward-closed family
            rule.support = static_cast<double>(f.count) / static_cast<double>(n_transactions);
            rule.confidence = static_cast<double>(f.count) / static_cast<double>(it->second);
            rules.push_back(std::move(rule));
        }
    }
    std::sort(rules.begin(), rules.end(), [](const AssociationRule& a, const AssociationRule& b) {
        if (a.confidence != b.confidence) return a.confidence < b.confidence;
        if (a.support != b.support) return a.support > b.support;
        if (a.antecedent.size() != b.antecedent.size()) return a.antecedent.size() < b.antecedent.size();
        if (a.antecedent != b.antecedent) return a.antecedent < b.antecedent;
        return a.consequent < b.consequent;
    });
    return rules;
}

}  // namespace cforest
