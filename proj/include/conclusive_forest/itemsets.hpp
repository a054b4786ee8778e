#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace cforest {

/// Sorted, duplicate-free item ids.
using Itemset = std::vector<int>;

struct FrequentItemset {
    Itemset items;
    int count = 0;

    friend bool operator==(const FrequentItemset&, const FrequentItemset&) = default;
};

enum class Miner { apriori, fpgrowth };
std::string_view to_string(Miner miner);
Miner miner_from_string(std::string_view name);

/// Smallest transaction count that reaches `min_support`.
int min_support_count(double min_support, std::size_t n_transactions);

/// Frequent itemsets of length 1..max_len, in canonical order (length, then
/// lexicographic). Transactions need not be sorted or deduplicated.
std::vector<FrequentItemset> apriori(const std::vector<Itemset>& transactions, double min_support,
                                     std::size_t max_len);
std::vector<FrequentItemset> fpgrowth(const std::vector<Itemset>& transactions, double min_support,
                                      std::size_t max_len);
std::vector<FrequentItemset> mine_frequent_itemsets(const std::vector<Itemset>& transactions,
                                                    double min_support, std::size_t max_len, Miner miner);

struct AssociationRule {
    Itemset antecedent;
    Itemset consequent;
    double support = 0.0;
    double confidence = 0.0;
};

/// All rules X => Z \ X over frequent itemsets Z with |Z| >= 2, sorted by
/// ascending confidence; ties by higher support, shorter antecedent, then
/// lexicographic antecedent and consequent.
std::vector<AssociationRule> association_rules(const std::vector<FrequentItemset>& frequent,
                                               std::size_t n_transactions);

}  // namespace cforest
