#ifndef BRIDGEGP_DESIGN_HPP
#define BRIDGEGP_DESIGN_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "bridgegp/errors.hpp"
#include "bridgegp/rng.hpp"

namespace bridgegp {

enum class DesignKind { RandomLhs, MaximinLhs };

struct DesignSpec {
    Eigen::Index n = 2;
    Eigen::Index d = 1;
    DesignKind kind = DesignKind::RandomLhs;
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 2 || d < 1) throw ArgumentError("DesignSpec: need n >= 2 and d >= 1");
    }
};

/// Random Latin hypercube in [0,1]^d: each column is a random permutation of
/// stratified draws (k + U[0,1)) / n.
inline Eigen::MatrixXd random_lhs(const DesignSpec& spec) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, 0x1b5));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::MatrixXd X(spec.n, spec.d);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(spec.n));
    for (Eigen::Index k = 0; k < spec.d; ++k) {
        std::iota(perm.begin(), perm.end(), Eigen::Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        for (Eigen::Index i = 0; i < spec.n; ++i)
            X(i, k) = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + unif(rng)) /
                      static_cast<double>(spec.n);
    }
    return X;
}

namespace detail {

inline double min_pair_sqdist(const Eigen::MatrixXd& X) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = i + 1; j < X.rows(); ++j)
            best = std::min(best, (X.row(i) - X.row(j)).squaredNorm());
    return best;
}

/// Greedy within-column row swaps that increase the minimum inter-point
/// distance; candidate swaps always involve a row of the current closest
/// pair. Candidates are screened in O(n) with incremental distance updates
/// and three cached nearest neighbors per row; the exact O(n^2) minimum is
/// recomputed only on acceptance.
inline Eigen::MatrixXd improve_maximin(Eigen::MatrixXd X, Rng& rng, long budget) {
    const Eigen::Index n = X.rows(), d = X.cols();
    std::uniform_int_distribution<Eigen::Index> pick_row(0, n - 1);
    std::uniform_int_distribution<Eigen::Index> pick_col(0, d - 1);
    std::uniform_int_distribution<int> pick_side(0, 1);

    Eigen::MatrixXd D(n, n); // pairwise squared distances, +inf on the diagonal
    for (Eigen::Index i = 0; i < n; ++i) {
        D(i, i) = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = i + 1; j < n; ++j)
            D(i, j) = D(j, i) = (X.row(i) - X.row(j)).squaredNorm();
    }

    // three smallest entries per row; enough to look up the per-row minimum
    // with any two rows excluded
    struct Near {
        double v[3];
        Eigen::Index id[3];
    };
    std::vector<Near> near(static_cast<std::size_t>(n));
    const auto rebuild_near = [&](Eigen::Index row) {
        Near nr{{std::numeric_limits<double>::infinity(),
                 std::numeric_limits<double>::infinity(),
                 std::numeric_limits<double>::infinity()},
                {-1, -1, -1}};
        for (Eigen::Index l = 0; l < n; ++l) {
            if (l == row) continue;
            double v = D(row, l);
            Eigen::Index id = l;
            for (int s = 0; s < 3; ++s)
                if (v < nr.v[s]) {
                    std::swap(v, nr.v[s]);
                    std::swap(id, nr.id[s]);
                }
        }
        near[static_cast<std::size_t>(row)] = nr;
    };
    const auto rebuild_all_near = [&] {
        for (Eigen::Index row = 0; row < n; ++row) rebuild_near(row);
    };
    rebuild_all_near();

    const auto min_excluding = [&](Eigen::Index row, Eigen::Index a, Eigen::Index b) {
        const Near& nr = near[static_cast<std::size_t>(row)];
        for (int s = 0; s < 3; ++s)
            if (nr.id[s] != a && nr.id[s] != b) return nr.v[s];
        return std::numeric_limits<double>::infinity();
    };

    double cur = min_pair_sqdist(X);
    auto argmin_pair = [&]() {
        std::pair<Eigen::Index, Eigen::Index> best{0, 1};
        double bd = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j)
                if (D(i, j) < bd) {
                    bd = D(i, j);
                    best = {i, j};
                }
        return best;
    };
    auto close_pair = argmin_pair();

    for (long t = 0; t < budget; ++t) {
        const Eigen::Index i = pick_side(rng) == 0 ? close_pair.first : close_pair.second;
        const Eigen::Index j = pick_row(rng);
        if (j == i) continue;
        const Eigen::Index k = pick_col(rng);
        const double xi = X(i, k), xj = X(j, k);
        if (xi == xj) continue;

        // incremental screen: new distances touching rows i and j only
        double cand = std::numeric_limits<double>::infinity();
        for (Eigen::Index l = 0; l < n && cand > cur; ++l) {
            if (l == i || l == j) continue;
            const double xl = X(l, k);
            const double di = D(i, l) - (xi - xl) * (xi - xl) + (xj - xl) * (xj - xl);
            const double dj = D(j, l) - (xj - xl) * (xj - xl) + (xi - xl) * (xi - xl);
            cand = std::min({cand, di, dj, min_excluding(l, i, j)});
        }
        cand = std::min(cand, D(i, j)); // the (i,j) distance itself is unchanged
        if (cand <= cur) continue;

        std::swap(X(i, k), X(j, k));
        const double exact = min_pair_sqdist(X);
        if (exact > cur) {
            cur = exact;
            for (Eigen::Index l = 0; l < n; ++l) {
                if (l == i || l == j) continue;
                D(i, l) = D(l, i) = (X.row(i) - X.row(l)).squaredNorm();
                D(j, l) = D(l, j) = (X.row(j) - X.row(l)).squaredNorm();
            }
            rebuild_all_near();
            close_pair = argmin_pair();
        } else {
            std::swap(X(i, k), X(j, k)); // screen was optimistic; revert
        }
    }
    return X;
}

} // namespace detail

/// Best-of-restarts random LHS improved by distance-increasing swaps. The
/// first restart starts from random_lhs(spec) itself, so the result is never
/// worse than the plain design with the same seed.
inline Eigen::MatrixXd maximin_lhs(const DesignSpec& spec, int restarts = 10,
                                   long swap_budget = -1) {
    spec.validate();
    if (restarts < 1) throw ArgumentError("maximin_lhs: restarts must be >= 1");
    if (swap_budget < 0) swap_budget = 10L * spec.n * spec.d;

    Eigen::MatrixXd best;
    double best_dist = -1.0;
    for (int s = 0; s < restarts; ++s) {
        DesignSpec sub = spec;
        sub.seed = s == 0 ? spec.seed : derive_seed(spec.seed, 0xd5 + static_cast<std::uint64_t>(s));
        Eigen::MatrixXd X = random_lhs(sub);
        if (swap_budget > 0) {
            Rng rng(derive_seed(sub.seed, 0x5afe));
            X = detail::improve_maximin(std::move(X), rng, swap_budget);
        }
        const double dist = detail::min_pair_sqdist(X);
        if (dist > best_dist) {
            best_dist = dist;
            best = std::move(X);
        }
    }
    return best;
}

} // namespace bridgegp

#endif
