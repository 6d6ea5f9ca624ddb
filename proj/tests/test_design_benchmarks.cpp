#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <cmath>

#include "bridgegp/basis.hpp"
#include "bridgegp/benchmarks.hpp"
#include "bridgegp/design.hpp"

using namespace bridgegp;
using Catch::Approx;

namespace {

bool is_stratified(const Eigen::MatrixXd& X) {
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
        std::vector<double> col(static_cast<std::size_t>(X.rows()));
        for (Eigen::Index i = 0; i < X.rows(); ++i) col[static_cast<std::size_t>(i)] = X(i, k);
        std::sort(col.begin(), col.end());
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const double lo = double(i) / double(X.rows());
            const double hi = double(i + 1) / double(X.rows());
            if (!(col[static_cast<std::size_t>(i)] >= lo && col[static_cast<std::size_t>(i)] < hi))
                return false;
        }
    }
    return true;
}

double min_dist(const Eigen::MatrixXd& X) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = i + 1; j < X.rows(); ++j)
            best = std::min(best, (X.row(i) - X.row(j)).norm());
    return best;
}

Eigen::VectorXd borehole_mid() {
    Eigen::VectorXd x(8);
    x << 0.10, 25050.0, 89335.0, 1050.0, 89.55, 760.0, 1400.0, 10950.0;
    return x;
}

Eigen::VectorXd otl_mid() {
    Eigen::VectorXd x(6);
    x << 100.0, 47.5, 1.75, 1.85, 0.725, 175.0;
    return x;
}

Eigen::VectorXd piston_mid() {
    Eigen::VectorXd x(7);
    x << 45.0, 0.0125, 0.006, 3000.0, 100000.0, 293.0, 350.0;
    return x;
}

} // namespace

TEST_CASE("random LHS is stratified and deterministic per seed") {
    for (const auto& [n, d] : {std::pair<Eigen::Index, Eigen::Index>{2, 1}, {17, 3}, {40, 5}}) {
        DesignSpec spec{n, d, DesignKind::RandomLhs, 77};
        const Eigen::MatrixXd X = random_lhs(spec);
        CHECK(is_stratified(X));
        const Eigen::MatrixXd Y = random_lhs(spec);
        CHECK((X.array() == Y.array()).all());
        DesignSpec other = spec;
        other.seed = 78;
        CHECK_FALSE((random_lhs(other).array() == X.array()).all());
    }

    DesignSpec tiny{2, 1, DesignKind::RandomLhs, 5};
    const Eigen::MatrixXd X = random_lhs(tiny);
    std::vector<double> col{X(0, 0), X(1, 0)};
    std::sort(col.begin(), col.end());
    CHECK(col[0] < 0.5);
    CHECK(col[1] >= 0.5);
}

TEST_CASE("maximin LHS improves on the plain design and stays an LHS") {
    DesignSpec spec{30, 3, DesignKind::MaximinLhs, 91};

    SECTION("degenerate budget reproduces random_lhs") {
        const Eigen::MatrixXd plain = random_lhs(spec);
        const Eigen::MatrixXd same = maximin_lhs(spec, 1, 0);
        CHECK((plain.array() == same.array()).all());
    }

    SECTION("min distance never drops below the plain design's") {
        const Eigen::MatrixXd plain = random_lhs(spec);
        const Eigen::MatrixXd improved = maximin_lhs(spec, 10);
        CHECK(is_stratified(improved));
        CHECK(min_dist(improved) >= min_dist(plain));
    }

    SECTION("1-D minimum gap equals the permutation-exhaustive optimum") {
        DesignSpec d1{4, 1, DesignKind::MaximinLhs, 13};
        const Eigen::MatrixXd X = maximin_lhs(d1, 3);
        // in one dimension every permutation carries the same value set, so
        // the optimum is the minimum gap of the sorted sample
        std::vector<double> v{X(0, 0), X(1, 0), X(2, 0), X(3, 0)};
        std::sort(v.begin(), v.end());
        double gap = std::numeric_limits<double>::infinity();
        for (int i = 0; i + 1 < 4; ++i) gap = std::min(gap, v[i + 1] - v[i]);
        CHECK(min_dist(X) == Approx(gap).margin(1e-15));
        CHECK(std::abs(gap - 0.25) <= 0.25); // 1/4 up to within-stratum jitter
    }
}

TEST_CASE("benchmark midpoint fixtures") {
    // values computed by direct evaluation in an independent interpreter
    CHECK(eval_borehole(borehole_mid()) == Approx(70.8729126368189).epsilon(1e-10));
    CHECK(eval_otl(otl_mid()) == Approx(5.31061694218833).epsilon(1e-10));
    CHECK(eval_piston(piston_mid()) == Approx(0.464397022471802).epsilon(1e-10));
}

TEST_CASE("borehole structure") {
    Eigen::VectorXd x = borehole_mid();
    x(3) = x(5) = 800.0; // H_u = H_l
    CHECK(eval_borehole(x) == Approx(0.0).margin(1e-12));

    x = borehole_mid();
    double prev = -1e30;
    for (double hu = 990.0; hu <= 1110.0; hu += 10.0) {
        x(3) = hu;
        const double f = eval_borehole(x);
        CHECK(f > prev);
        prev = f;
    }

    x = borehole_mid();
    x(1) = 0.05; // r <= r_w
    x(0) = 0.10;
    CHECK_THROWS_AS(eval_borehole(x), DomainError);
}

TEST_CASE("otl structure") {
    // equal divider resistances pin V_b1 = 6 whatever their common value is
    Eigen::VectorXd a = otl_mid(), b = otl_mid();
    a(0) = a(1) = 60.0;
    b(0) = b(1) = 120.0;
    CHECK(eval_otl(a) == Approx(eval_otl(b)).epsilon(1e-14));

    // large-gain limit: V_m -> (V_b1 + 0.74) + 0.74 R_f / R_c1
    Eigen::VectorXd x = otl_mid();
    x(5) = 1e9;
    const double vb1 = 12.0 * x(1) / (x(0) + x(1));
    const double limit = (vb1 + 0.74) + 0.74 * x(2) / x(3);
    CHECK(std::abs(eval_otl(x) - limit) <= 1e-5);
}

TEST_CASE("piston is positive and finite over its box") {
    const BenchmarkFunction piston = make_benchmark(BenchmarkName::Piston);
    DesignSpec spec{1000, 7, DesignKind::RandomLhs, 17};
    const Eigen::MatrixXd U = random_lhs(spec);
    const Eigen::MatrixXd X = scale_from_unit(U, piston.ranges);
    for (Eigen::Index i = 0; i < X.rows(); ++i) CHECK(piston.eval(X.row(i).transpose()) > 0.0);

    // full 5^7 grid sweep: no NaN or Inf anywhere in the range box
    Eigen::VectorXd x(7);
    bool all_finite = true;
    std::array<int, 7> idx{};
    for (long cell = 0; cell < 78125; ++cell) {
        long rem = cell;
        for (int k = 0; k < 7; ++k) {
            idx[static_cast<std::size_t>(k)] = static_cast<int>(rem % 5);
            rem /= 5;
        }
        for (int k = 0; k < 7; ++k) {
            const auto [lo, hi] = piston.ranges[static_cast<std::size_t>(k)];
            x(k) = lo + (hi - lo) * idx[static_cast<std::size_t>(k)] / 4.0;
        }
        const double f = eval_piston(x);
        all_finite = all_finite && std::isfinite(f) && f > 0.0;
    }
    CHECK(all_finite);
}

TEST_CASE("padding appends inert unit-range inputs") {
    const BenchmarkFunction base = make_benchmark(BenchmarkName::Borehole);
    CHECK_THROWS_AS(pad_inert_dimensions(base, 7), ArgumentError);

    const BenchmarkFunction padded = pad_inert_dimensions(base, 20);
    CHECK(padded.d_total == 20);
    for (std::size_t k = 8; k < 20; ++k) {
        CHECK(padded.ranges[k].first == 0.0);
        CHECK(padded.ranges[k].second == 1.0);
    }

    Rng rng(3);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::VectorXd x(20);
    x.head(8) = borehole_mid();
    for (Eigen::Index k = 8; k < 20; ++k) x(k) = unif(rng);
    const double f1 = padded.eval(x);
    for (Eigen::Index k = 8; k < 20; ++k) x(k) = unif(rng);
    const double f2 = padded.eval(x);
    CHECK(f1 == f2); // bitwise: padded inputs never reach the formula
    CHECK(f1 == eval_borehole(borehole_mid()));
}

TEST_CASE("pre-specified GP simulator tracks its mean and covariance") {
    const PrespecifiedGpTruth truth = prespecified_gp_truth();
    const BasisSpec basis{BasisDegree::Linear, 5};

    // replicate realizations on a fixed design (design_seed pinned)
    const int reps = 300;
    const Eigen::Index n = 10;
    Eigen::MatrixXd Y(reps, n);
    Eigen::MatrixXd X;
    for (int r = 0; r < reps; ++r) {
        auto [train, test] = simulate_prespecified_gp(n, 0, 9000 + static_cast<std::uint64_t>(r),
                                                      2, std::uint64_t{424242});
        if (r == 0) X = train.X;
        CHECK((train.X.array() == X.array()).all()); // same design every replicate
        Y.row(r) = train.y.transpose();
    }

    const Eigen::VectorXd mean_true = basis_matrix(X, basis) * truth.beta;
    const Eigen::VectorXd mean_emp = Y.colwise().mean().transpose();
    for (Eigen::Index i = 0; i < n; ++i)
        CHECK(std::abs(mean_emp(i) - mean_true(i)) <= 3.0 / std::sqrt(double(reps)));

    // covariance spot check between the first two design points
    const double k12 =
        kernel(X.row(0).transpose(), X.row(1).transpose(), truth.omega);
    const Eigen::VectorXd c0 = Y.col(0).array() - mean_emp(0);
    const Eigen::VectorXd c1 = Y.col(1).array() - mean_emp(1);
    const double cov_emp = c0.dot(c1) / double(reps - 1);
    const double se = std::sqrt((1.0 + k12 * k12) / double(reps));
    CHECK(std::abs(cov_emp - truth.tau2 * k12) <= 4.0 * se);
}

TEST_CASE("omega = 0 override produces a perfectly correlated field") {
    PrespecifiedGpTruth flat = prespecified_gp_truth();
    flat.omega.setZero();
    auto [train, test] = simulate_prespecified_gp(12, 0, 5, 2, {}, &flat);
    const BasisSpec basis{BasisDegree::Linear, 5};
    const Eigen::VectorXd resid = train.y - basis_matrix(train.X, basis) * flat.beta;
    CHECK(resid.maxCoeff() - resid.minCoeff() <= 1e-4);
}

TEST_CASE("benchmark data generation adds calibrated noise") {
    const BenchmarkFunction otl = make_benchmark(BenchmarkName::OtlCircuit);
    auto [clean_train, clean_test] = make_benchmark_data(otl, 30, 10, 0.0, 99, 2);
    for (Eigen::Index i = 0; i < 30; ++i) {
        const Eigen::VectorXd phys =
            scale_from_unit(clean_train.X.row(i), otl.ranges).transpose();
        CHECK(clean_train.y(i) == Approx(otl.eval(phys)).epsilon(1e-12));
    }

    auto [noisy_train, noisy_test] = make_benchmark_data(otl, 30, 10, 0.01, 99, 2);
    CHECK((noisy_train.X.array() == clean_train.X.array()).all());
    CHECK_FALSE((noisy_train.y.array() == clean_train.y.array()).all());
}
