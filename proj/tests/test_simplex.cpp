#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <set>
#include <vector>

#include "doctest.h"
#include "mpe/simplex.hpp"

using namespace mpe;

TEST_CASE("simplex sizes match binomial counts") {
    CHECK(SimplexTable::simplex_size(2, 3) == 4);
    CHECK(SimplexTable::simplex_size(3, 2) == 6);
    CHECK(SimplexTable::simplex_size(2, 5) == 6);
    CHECK(SimplexTable::simplex_size(3, 4) == 15);
    CHECK(SimplexTable::simplex_size(4, 24) == 2925);
    CHECK(SimplexTable(4, 24).size() == 2925);
}

TEST_CASE("d=2 N=3 enumerates the four vectors in documented order") {
    SimplexTable t(2, 3);
    REQUIRE(t.size() == 4);
    std::vector<CountVector> want = {{0, 3}, {1, 2}, {2, 1}, {3, 0}};
    for (std::size_t m = 0; m < 4; ++m) {
        auto c = t.counts(m);
        CHECK(CountVector(c.begin(), c.end()) == want[m]);
        CHECK(t.rank(want[m]) == m);
    }
    CHECK(t.rank(CountVector{0, 3}) == 0);
    CHECK(t.rank(CountVector{3, 0}) == 3);
}

TEST_CASE("rank is monotone in the documented order on d=3 N=2") {
    SimplexTable t(3, 2);
    REQUIRE(t.size() == 6);
    // brute-force: sort all vectors by the documented comparison and compare
    std::vector<CountVector> all;
    for (std::size_t m = 0; m < t.size(); ++m) {
        auto c = t.counts(m);
        all.emplace_back(c.begin(), c.end());
    }
    auto sorted = all;
    std::sort(sorted.begin(), sorted.end());  // lexicographic on (c_1..c_d)
    CHECK(all == sorted);
    for (std::size_t m = 0; m + 1 < t.size(); ++m)
        CHECK(t.rank(all[m]) < t.rank(all[m + 1]));
}

TEST_CASE("rank/unrank round-trip, uniqueness and sums for small tables") {
    for (auto [d, N] : std::vector<std::pair<int, int>>{
             {2, 3}, {2, 2000}, {3, 4}, {3, 50}, {4, 24}, {5, 10}, {6, 6}}) {
        SimplexTable t(d, N);
        REQUIRE(static_cast<std::size_t>(d) * t.size() <= 100000);
        std::set<CountVector> seen;
        for (std::size_t m = 0; m < t.size(); ++m) {
            auto c = t.counts(m);
            CountVector v(c.begin(), c.end());
            int sum = 0;
            for (int x : v) {
                CHECK(x >= 0);
                sum += x;
            }
            CHECK(sum == N);
            CHECK(seen.insert(v).second);  // no duplicates
            CHECK(t.rank(v) == m);
            CHECK(t.unrank(m) == v);
        }
    }
}

TEST_CASE("shift moves one player") {
    CHECK(shift({1, 2}, 0, 1) == CountVector{2, 1});
    CHECK(shift({1, 2}, 1, 1) == CountVector{1, 2});  // to == from is identity
    CHECK(shift({0, 3}, 0, 0) == CountVector{0, 3});  // identity with zero count
    CHECK_THROWS_AS(shift({0, 3}, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(shift({1, 2}, 0, 5), std::out_of_range);
}

TEST_CASE("shift is its own inverse when both moves are legal") {
    SimplexTable t(4, 6);
    for (std::size_t m = 0; m < t.size(); ++m) {
        auto c = t.counts(m);
        CountVector v(c.begin(), c.end());
        for (int y = 0; y < 4; ++y) {
            for (int z = 0; z < 4; ++z) {
                if (v[static_cast<std::size_t>(z)] == 0 && y != z) continue;
                CHECK(shift(shift(v, y, z), z, y) == v);
            }
        }
    }
}

TEST_CASE("precomputed shift table matches raw shifts") {
    SimplexTable t(3, 5);
    for (std::size_t m = 0; m < t.size(); ++m) {
        auto c = t.counts(m);
        CountVector v(c.begin(), c.end());
        for (int to = 0; to < 3; ++to)
            for (int from = 0; from < 3; ++from) {
                if (!t.can_shift(m, to, from)) continue;
                CHECK(t.shifted(m, to, from) == t.rank(shift(v, to, from)));
            }
    }
}

TEST_CASE("constructor and accessors reject invalid input") {
    CHECK_THROWS_AS(SimplexTable(1, 5), std::invalid_argument);
    CHECK_THROWS_AS(SimplexTable(2, 0), std::invalid_argument);
    SimplexTable t(3, 4);
    CHECK_THROWS_AS(t.rank(CountVector{1, 1}), std::invalid_argument);      // wrong d
    CHECK_THROWS_AS(t.rank(CountVector{1, 1, 1}), std::invalid_argument);   // wrong sum
    CHECK_THROWS_AS(t.rank(CountVector{-1, 2, 3}), std::invalid_argument);  // negative
    CHECK_THROWS_AS(t.unrank(t.size()), std::out_of_range);
}

TEST_CASE("flat joint index is a bijection") {
    SimplexTable t(3, 3);
    std::set<std::size_t> seen;
    for (int x = 0; x < 3; ++x)
        for (std::size_t m = 0; m < t.size(); ++m)
            CHECK(seen.insert(joint_index(x, m, t.size())).second);
    CHECK(seen.size() == 3 * t.size());
    CHECK(*seen.rbegin() == 3 * t.size() - 1);
}
