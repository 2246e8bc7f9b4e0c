#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "hoig/core/errors.hpp"

// Canonical storage for symmetric tensors: an order-L entry is addressed by the
// sorted (non-decreasing) version of its index tuple.  Ranks follow the multiset
// combinadic, i.e. canonical tuples are enumerated in colexicographic order:
// (0,0), (0,1), (1,1), (0,2), (1,2), (2,2), ...

namespace hoig {

// Small index tuple; L <= 4 in this library but nothing below assumes that
// except the fixed capacity.
struct IndexTuple {
    std::array<int, 4> idx{};
    int len = 0;

    int operator[](std::size_t k) const { return idx[k]; }
    int& operator[](std::size_t k) { return idx[k]; }

    bool operator==(const IndexTuple&) const = default;
};

inline IndexTuple make_tuple(std::initializer_list<int> is) {
    IndexTuple t;
    for (int i : is) t.idx[static_cast<std::size_t>(t.len++)] = i;
    return t;
}

inline IndexTuple sorted(IndexTuple t) {
    std::sort(t.idx.begin(), t.idx.begin() + t.len);
    return t;
}

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i; // exact: r*(n-k+i) is divisible by i at each step
    }
    return r;
}

// Number of canonical (non-decreasing) tuples of length L over {0..D-1}.
inline std::size_t canonical_count(int dim, int order) {
    return static_cast<std::size_t>(
        binomial(static_cast<std::uint64_t>(dim + order - 1), static_cast<std::uint64_t>(order)));
}

// Rank of a non-decreasing tuple within the colex enumeration.
// rank(i1<=...<=iL) = sum_k C(i_k + k - 1, k).
inline std::size_t canonical_rank(const IndexTuple& t) {
    std::uint64_t r = 0;
    for (int k = 0; k < t.len; ++k) {
        r += binomial(static_cast<std::uint64_t>(t.idx[static_cast<std::size_t>(k)] + k),
                      static_cast<std::uint64_t>(k + 1));
    }
    return static_cast<std::size_t>(r);
}

// Inverse of canonical_rank for a given order (greedy combinadic decode).
inline IndexTuple canonical_unrank(std::size_t rank, int order) {
    IndexTuple t;
    t.len = order;
    auto r = static_cast<std::uint64_t>(rank);
    for (int k = order; k >= 1; --k) {
        // largest i with C(i + k - 1, k) <= r
        int i = 0;
        while (binomial(static_cast<std::uint64_t>(i + k), static_cast<std::uint64_t>(k)) <= r) ++i;
        t.idx[static_cast<std::size_t>(k - 1)] = i;
        r -= binomial(static_cast<std::uint64_t>(i + k - 1), static_cast<std::uint64_t>(k));
    }
    return t;
}

// Number of distinct permutations of the tuple: L! / prod(count_v!) for each
// repeated value v.  This is the expansion multiplicity of a canonical entry.
inline std::uint64_t multiplicity(const IndexTuple& sorted_tuple) {
    static constexpr std::array<std::uint64_t, 5> factorial{1, 1, 2, 6, 24};
    std::uint64_t denom = 1;
    int run = 1;
    for (int k = 1; k < sorted_tuple.len; ++k) {
        if (sorted_tuple.idx[static_cast<std::size_t>(k)] ==
            sorted_tuple.idx[static_cast<std::size_t>(k - 1)]) {
            ++run;
        } else {
            denom *= factorial[static_cast<std::size_t>(run)];
            run = 1;
        }
    }
    denom *= factorial[static_cast<std::size_t>(run)];
    return factorial[static_cast<std::size_t>(sorted_tuple.len)] / denom;
}

// Visit every canonical tuple of the given dim/order in rank (colex) order.
template <typename Fn>
void for_each_canonical(int dim, int order, Fn&& fn) {
    IndexTuple t;
    t.len = order;
    // colex: advance the leftmost index first, carrying like a non-decreasing odometer
    for (int k = 0; k < order; ++k) t.idx[static_cast<std::size_t>(k)] = 0;
    while (true) {
        fn(const_cast<const IndexTuple&>(t));
        int k = 0;
        while (k < order) {
            int limit = (k + 1 < order) ? t.idx[static_cast<std::size_t>(k + 1)] : dim - 1;
            if (t.idx[static_cast<std::size_t>(k)] < limit) {
                ++t.idx[static_cast<std::size_t>(k)];
                for (int j = 0; j < k; ++j) t.idx[static_cast<std::size_t>(j)] = 0;
                break;
            }
            ++k;
        }
        if (k == order) break;
    }
}

// Visit the distinct permutations of a canonical tuple.
template <typename Fn>
void for_each_permutation(IndexTuple sorted_tuple, Fn&& fn) {
    do {
        fn(const_cast<const IndexTuple&>(sorted_tuple));
    } while (std::next_permutation(sorted_tuple.idx.begin(),
                                   sorted_tuple.idx.begin() + sorted_tuple.len));
}

// Row-major offset of an ordered tuple into a dense D^L array.
inline std::size_t dense_offset(const IndexTuple& t, int dim) {
    std::size_t off = 0;
    for (int k = 0; k < t.len; ++k) {
        off = off * static_cast<std::size_t>(dim) +
              static_cast<std::size_t>(t.idx[static_cast<std::size_t>(k)]);
    }
    return off;
}

} // namespace hoig
