#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "conclusive_forest/errors.hpp"
#include "conclusive_forest/kmedoids.hpp"

#include <random>

using namespace cforest;

namespace {

Eigen::MatrixXd euclidean(const std::vector<std::pair<double, double>>& pts) {
    const auto n = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXd d(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            d(i, j) = std::hypot(pts[static_cast<std::size_t>(i)].first - pts[static_cast<std::size_t>(j)].first,
                                 pts[static_cast<std::size_t>(i)].second - pts[static_cast<std::size_t>(j)].second);
    return d;
}

double exhaustive_best(const Eigen::MatrixXd& d, int k) {
    const int n = static_cast<int>(d.rows());
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> chosen;
    std::function<void(int)> rec = [&](int start) {
        if (static_cast<int>(chosen.size()) == k) {
            best = std::min(best, medoid_cost(d, chosen));
            return;
        }
        for (int i = start; i < n; ++i) {
            chosen.push_back(i);
            rec(i + 1);
            chosen.pop_back();
        }
    };
    rec(0);
    return best;
}

}  // namespace

TEST_CASE("two separated groups") {
    const auto d = euclidean({{0, 0}, {0, 1}, {1, 0}, {10, 10}, {10, 11}});
    const auto r = pam(d, 2);
    REQUIRE(r.medoids.size() == 2);
    CHECK(r.assignment[0] == r.assignment[1]);
    CHECK(r.assignment[1] == r.assignment[2]);
    CHECK(r.assignment[3] == r.assignment[4]);
    CHECK(r.assignment[0] != r.assignment[3]);
    CHECK(r.cost == doctest::Approx(medoid_cost(d, r.medoids)));
}

TEST_CASE("k = 1 and k = n") {
    const auto d = euclidean({{0, 0}, {0, 2}, {0, 3}});
    CHECK(pam(d, 1).medoids == std::vector<int>{1});
    const auto all = pam(d, 3);
    CHECK(all.cost == 0.0);
    CHECK(all.assignment == std::vector<int>{0, 1, 2});
    CHECK_THROWS_AS(pam(d, 4), ConfigError);
    CHECK_THROWS_AS(pam(d, 0), ConfigError);
}

TEST_CASE("PAM reaches the exhaustive optimum on separated small fixtures") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> z(0.0, 0.3);
    for (int round = 0; round < 50; ++round) {
        const int k = 1 + static_cast<int>(rng() % 3);
        std::vector<std::pair<double, double>> pts;
        for (int c = 0; c < k; ++c)
            for (int i = 0; i < 2 + static_cast<int>(rng() % 2); ++i) pts.emplace_back(c * 10.0 + z(rng), z(rng));
        const auto d = euclidean(pts);
        for (MedoidInit init : {MedoidInit::build, MedoidInit::random}) {
            const auto r = pam(d, k, static_cast<std::uint64_t>(round), init);
            CHECK(r.cost == doctest::Approx(exhaustive_best(d, k)));
        }
    }
}

TEST_CASE("seeded random initialisation is deterministic") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < 30; ++i) pts.emplace_back(u(rng), u(rng));
    const auto d = euclidean(pts);
    const auto a = pam(d, 4, 9, MedoidInit::random);
    const auto b = pam(d, 4, 9, MedoidInit::random);
    CHECK(a.medoids == b.medoids);
    CHECK(a.assignment == b.assignment);
}
