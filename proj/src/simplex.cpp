#include "mpe/simplex.hpp"

#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mpe {

namespace {
// Enumeration beyond this size would not fit the dense solver tables anyway.
constexpr std::uint64_t kMaxTableSize = 1ULL << 31;
}  // namespace

std::uint64_t SimplexTable::simplex_size(int d, int N) {
    // binomial(N+d-1, d-1), with overflow guard
    std::uint64_t r = 1;
    for (int i = 1; i <= d - 1; ++i) {
        std::uint64_t num = static_cast<std::uint64_t>(N) + static_cast<std::uint64_t>(i);
        if (r > std::numeric_limits<std::uint64_t>::max() / num)
            throw std::overflow_error("simplex_size: overflow");
        r = r * num / static_cast<std::uint64_t>(i);
    }
    return r;
}

SimplexTable::SimplexTable(int d, int N) : d_(d), N_(N) {
    if (d < 2) throw std::invalid_argument("SimplexTable: d must be >= 2");
    if (N < 1) throw std::invalid_argument("SimplexTable: N must be >= 1");

    std::uint64_t sz = simplex_size(d, N);
    if (sz > kMaxTableSize)
        throw std::length_error("SimplexTable: simplex too large to enumerate");
    size_ = static_cast<std::size_t>(sz);

    // Pascal triangle up to C(N+d, d)
    binom_.assign(static_cast<std::size_t>(N + d + 1) * (d + 1), 0);
    for (int a = 0; a <= N + d; ++a) {
        binom_[static_cast<std::size_t>(a) * (d_ + 1)] = 1;
        for (int b = 1; b <= std::min(a, d_); ++b) {
            binom_[static_cast<std::size_t>(a) * (d_ + 1) + b] =
                binom(a - 1, b - 1) + binom(a - 1, b);
        }
    }

    // Generate in increasing lexicographic order on (c_1, ..., c_d).
    counts_.reserve(size_ * d_);
    CountVector cur(d_, 0);
    cur[d_ - 1] = N_;
    for (std::size_t m = 0; m < size_; ++m) {
        counts_.insert(counts_.end(), cur.begin(), cur.end());
        if (m + 1 == size_) break;
        // lex successor: take one unit from the suffix of the rightmost
        // incrementable coordinate and reset the suffix to its minimum
        int j = d_ - 2;
        int suffix = cur[d_ - 1];
        while (suffix == 0) {
            suffix += cur[j];
            --j;
        }
        cur[j] += 1;
        for (int i = j + 1; i < d_; ++i) cur[i] = 0;
        cur[d_ - 1] = suffix - 1;
    }

    // Shift table: rank of mu + e_{to,from}
    shift_.assign(size_ * d_ * d_, npos);
    CountVector tmp(d_);
    for (std::size_t m = 0; m < size_; ++m) {
        auto c = counts(m);
        for (int from = 0; from < d_; ++from) {
            for (int to = 0; to < d_; ++to) {
                if (to == from) {
                    shift_[(m * d_ + from) * d_ + to] = m;
                    continue;
                }
                if (c[static_cast<std::size_t>(from)] == 0) continue;
                for (int i = 0; i < d_; ++i) tmp[i] = c[static_cast<std::size_t>(i)];
                tmp[to] += 1;
                tmp[from] -= 1;
                shift_[(m * d_ + from) * d_ + to] = rank(tmp);
            }
        }
    }
}

std::uint64_t SimplexTable::binom(int a, int b) const {
    if (b < 0 || b > a) return 0;
    if (b > d_) throw std::logic_error("binom: b out of table range");
    return binom_[static_cast<std::size_t>(a) * (d_ + 1) + b];
}

std::size_t SimplexTable::rank(std::span<const int> mu) const {
    if (static_cast<int>(mu.size()) != d_)
        throw std::invalid_argument("rank: count vector has wrong dimension");
    int sum = 0;
    for (int c : mu) {
        if (c < 0) throw std::invalid_argument("rank: negative count");
        sum += c;
    }
    if (sum != N_) throw std::invalid_argument("rank: counts must sum to N");

    // number of vectors lexicographically smaller: for each coordinate j, the
    // completions with the same prefix and a smaller j-th entry, summed in
    // closed form (hockey stick): C(r+q, q) - C(r-c_j+q, q) with q = d-1-j and
    // r the remaining mass.
    std::uint64_t idx = 0;
    int r = N_;
    for (int j = 0; j < d_ - 1; ++j) {
        int q = d_ - 1 - j;
        int c = mu[static_cast<std::size_t>(j)];
        idx += binom(r + q, q) - binom(r - c + q, q);
        r -= c;
    }
    return static_cast<std::size_t>(idx);
}

CountVector SimplexTable::unrank(std::size_t m) const {
    if (m >= size_) throw std::out_of_range("unrank: index out of range");
    CountVector out(d_, 0);
    std::uint64_t idx = m;
    int r = N_;
    for (int j = 0; j < d_ - 1; ++j) {
        int q = d_ - 1 - j;
        int c = 0;
        // peel off blocks of vectors whose j-th coordinate is c
        while (true) {
            std::uint64_t block = binom(r - c + q - 1, q - 1);
            if (idx < block) break;
            idx -= block;
            ++c;
        }
        out[static_cast<std::size_t>(j)] = c;
        r -= c;
    }
    out[static_cast<std::size_t>(d_ - 1)] = r;
    return out;
}

CountVector shift(const CountVector& mu, int to, int from) {
    int d = static_cast<int>(mu.size());
    if (to < 0 || to >= d || from < 0 || from >= d)
        throw std::out_of_range("shift: state out of range");
    if (to == from) return mu;
    if (mu[static_cast<std::size_t>(from)] < 1)
        throw std::invalid_argument("shift: no player to move from state " +
                                    std::to_string(from));
    CountVector out = mu;
    out[static_cast<std::size_t>(to)] += 1;
    out[static_cast<std::size_t>(from)] -= 1;
    return out;
}

}  // namespace mpe
