#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mpe {

// Count vector of untagged players per state: d nonnegative integers summing
// to N. The empirical distribution is counts[x]/N, computed on demand; counts
// are kept integral so simplex membership is exact.
using CountVector = std::vector<int>;

// Enumeration of the discretized simplex: all count vectors over d states with
// total N, in increasing lexicographic order on (c_1, ..., c_d), ranked by the
// combinatorial number system. The table also precomputes single-player moves
// (+1 at `to`, -1 at `from`) as rank lookups.
class SimplexTable {
public:
    // enumerate_simplex; rejects d < 2 or N < 1.
    SimplexTable(int d, int N);

    int d() const { return d_; }
    int N() const { return N_; }
    std::size_t size() const { return size_; }

    std::span<const int> counts(std::size_t m) const {
        return {counts_.data() + m * static_cast<std::size_t>(d_),
                static_cast<std::size_t>(d_)};
    }

    // O(d) via the combinatorial number system; validates the input.
    std::size_t rank(std::span<const int> mu) const;
    CountVector unrank(std::size_t m) const;

    // rank of mu_m + e_{to,from}; requires counts[from] >= 1 when to != from.
    std::size_t shifted(std::size_t m, int to, int from) const {
        return shift_[(m * d_ + from) * d_ + to];
    }
    bool can_shift(std::size_t m, int to, int from) const {
        return to == from || counts(m)[static_cast<std::size_t>(from)] >= 1;
    }

    static std::uint64_t simplex_size(int d, int N);

private:
    int d_, N_;
    std::size_t size_;
    std::vector<int> counts_;          // size_ * d
    std::vector<std::size_t> shift_;   // size_ * d * d, npos when illegal
    std::vector<std::uint64_t> binom_; // C(a,b) for a <= N+d, b <= d
    std::uint64_t binom(int a, int b) const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

// mu + e_{to,from} on raw counts; returns input unchanged when to == from.
// Rejects counts[from] == 0 with to != from.
CountVector shift(const CountVector& mu, int to, int from);

// Flat joint index over the state space {0..d-1} x simplex.
inline std::size_t joint_index(int x, std::size_t mu_rank, std::size_t S) {
    return static_cast<std::size_t>(x) * S + mu_rank;
}

}  // namespace mpe
