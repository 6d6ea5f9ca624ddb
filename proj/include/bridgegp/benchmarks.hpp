#ifndef BRIDGEGP_BENCHMARKS_HPP
#define BRIDGEGP_BENCHMARKS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bridgegp/basis.hpp"
#include "bridgegp/dataset.hpp"
#include "bridgegp/design.hpp"
#include "bridgegp/errors.hpp"
#include "bridgegp/kernel.hpp"

namespace bridgegp {

/// Water flow through a borehole; inputs (r_w, r, T_u, H_u, T_l, H_l, L, K_w).
inline double eval_borehole(const Eigen::VectorXd& x) {
    if (x.size() != 8) throw ArgumentError("eval_borehole: expected 8 inputs");
    const double rw = x(0), r = x(1), Tu = x(2), Hu = x(3), Tl = x(4), Hl = x(5), L = x(6),
                 Kw = x(7);
    if (r <= rw) throw DomainError("eval_borehole: need r > r_w");
    const double lg = std::log(r / rw);
    return 2.0 * std::numbers::pi * Tu * (Hu - Hl) /
           (lg * (1.0 + 2.0 * L * Tu / (lg * rw * rw * Kw) + Tu / Tl));
}

/// Midpoint voltage of an output transformerless push-pull circuit;
/// inputs (R_b1, R_b2, R_f, R_c1, R_c2, beta).
inline double eval_otl(const Eigen::VectorXd& x) {
    if (x.size() != 6) throw ArgumentError("eval_otl: expected 6 inputs");
    const double Rb1 = x(0), Rb2 = x(1), Rf = x(2), Rc1 = x(3), Rc2 = x(4), beta = x(5);
    const double Vb1 = 12.0 * Rb2 / (Rb1 + Rb2);
    const double D = beta * (Rc2 + 9.0) + Rf;
    return (Vb1 + 0.74) * beta * (Rc2 + 9.0) / D + 11.35 * Rf / D +
           0.74 * Rf * beta * (Rc2 + 9.0) / (D * Rc1);
}

/// Piston cycle time; inputs (M, S, V_0, k, P_0, T_a, T_0).
inline double eval_piston(const Eigen::VectorXd& x) {
    if (x.size() != 7) throw ArgumentError("eval_piston: expected 7 inputs");
    const double M = x(0), S = x(1), V0 = x(2), k = x(3), P0 = x(4), Ta = x(5), T0 = x(6);
    const double A = P0 * S + 19.62 * M - k * V0 / S;
    const double V = S / (2.0 * k) * (std::sqrt(A * A + 4.0 * k * (P0 * V0 / T0) * Ta) - A);
    if (!(V > 0.0)) throw NumericError("eval_piston: non-positive chamber volume");
    return 2.0 * std::numbers::pi * std::sqrt(M / (k + S * S * (P0 * V0 / T0) * (Ta / (V * V))));
}

enum class BenchmarkName { Borehole, OtlCircuit, Piston, PrespecifiedGp };

inline const char* to_string(BenchmarkName n) {
    switch (n) {
        case BenchmarkName::Borehole: return "borehole";
        case BenchmarkName::OtlCircuit: return "otl_circuit";
        case BenchmarkName::Piston: return "piston";
        case BenchmarkName::PrespecifiedGp: return "prespecified_gp";
    }
    return "?";
}

inline BenchmarkName benchmark_from_string(const std::string& s) {
    if (s == "borehole") return BenchmarkName::Borehole;
    if (s == "otl_circuit" || s == "otl") return BenchmarkName::OtlCircuit;
    if (s == "piston") return BenchmarkName::Piston;
    if (s == "prespecified_gp") return BenchmarkName::PrespecifiedGp;
    throw ArgumentError("unknown benchmark '" + s +
                        "' (borehole|otl_circuit|piston|prespecified_gp)");
}

/// A test function together with its physical input ranges; padded inputs
/// beyond d_native range over [0,1] and are ignored by evaluation.
struct BenchmarkFunction {
    BenchmarkName name = BenchmarkName::Borehole;
    Eigen::Index d_native = 8;
    Eigen::Index d_total = 8;
    std::vector<std::pair<double, double>> ranges; // size d_total

    /// Evaluate at a physical-units point of dimension d_total; warns (once
    /// per call) outside the tabulated ranges but still evaluates.
    double eval(const Eigen::VectorXd& x) const {
        if (x.size() != d_total) throw ArgumentError("BenchmarkFunction: dimension mismatch");
        for (Eigen::Index k = 0; k < d_native; ++k)
            if (x(k) < ranges[static_cast<std::size_t>(k)].first ||
                x(k) > ranges[static_cast<std::size_t>(k)].second) {
                std::cerr << "warning: " << to_string(name) << " input " << (k + 1)
                          << " outside tabulated range\n";
                break;
            }
        const Eigen::VectorXd native = x.head(d_native);
        switch (name) {
            case BenchmarkName::Borehole: return eval_borehole(native);
            case BenchmarkName::OtlCircuit: return eval_otl(native);
            case BenchmarkName::Piston: return eval_piston(native);
            case BenchmarkName::PrespecifiedGp:
                throw ArgumentError("prespecified_gp is a stochastic simulator, not a pointwise "
                                    "function; use simulate_prespecified_gp");
        }
        throw ArgumentError("BenchmarkFunction: unknown name");
    }
};

inline BenchmarkFunction make_benchmark(BenchmarkName name) {
    BenchmarkFunction f;
    f.name = name;
    switch (name) {
        case BenchmarkName::Borehole:
            f.d_native = 8;
            f.ranges = {{0.05, 0.15},     {100.0, 50000.0}, {63070.0, 115600.0}, {990.0, 1110.0},
                        {63.1, 116.0},    {700.0, 820.0},   {1120.0, 1680.0},    {9855.0, 12045.0}};
            break;
        case BenchmarkName::OtlCircuit:
            f.d_native = 6;
            f.ranges = {{50.0, 150.0}, {25.0, 70.0}, {0.5, 3.0},
                        {1.2, 2.5},    {0.25, 1.2},  {50.0, 300.0}};
            break;
        case BenchmarkName::Piston:
            f.d_native = 7;
            f.ranges = {{30.0, 60.0},         {0.005, 0.020}, {0.002, 0.010}, {1000.0, 5000.0},
                        {90000.0, 110000.0},  {290.0, 296.0}, {340.0, 360.0}};
            break;
        case BenchmarkName::PrespecifiedGp:
            f.d_native = 5;
            f.ranges = {{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}};
            break;
    }
    f.d_total = f.d_native;
    return f;
}

/// Append inert inputs (range [0,1], exactly ignored by eval) up to d_target.
inline BenchmarkFunction pad_inert_dimensions(const BenchmarkFunction& f, Eigen::Index d_target) {
    if (d_target < f.d_native)
        throw ArgumentError("pad_inert_dimensions: d_target below the native dimension");
    BenchmarkFunction out = f;
    out.d_total = d_target;
    out.ranges.resize(static_cast<std::size_t>(d_target), {0.0, 1.0});
    return out;
}

/// True parameters of the pre-specified GP simulation.
struct PrespecifiedGpTruth {
    Eigen::VectorXd beta;  // (3, -2, 2, -4, 4, 3): intercept then linear terms
    Eigen::VectorXd omega; // (1, 1.5, 2, 2.5, 3)
    double tau2 = 1.0;
};

inline PrespecifiedGpTruth prespecified_gp_truth() {
    PrespecifiedGpTruth t;
    t.beta.resize(6);
    t.beta << 3.0, -2.0, 2.0, -4.0, 4.0, 3.0;
    t.omega.resize(5);
    t.omega << 1.0, 1.5, 2.0, 2.5, 3.0;
    return t;
}

/// One noiseless GP realization over the union of a maximin-LHS training
/// design and a random-LHS test design in [0,1]^5, split into train/test.
/// design_seed pins the designs independently of the GP draw (replication
/// studies at fixed points); truth_override swaps the generating parameters.
inline std::pair<Dataset, Dataset> simulate_prespecified_gp(
    Eigen::Index n_train, Eigen::Index n_test, std::uint64_t seed, int maximin_restarts = 10,
    std::optional<std::uint64_t> design_seed = {},
    const PrespecifiedGpTruth* truth_override = nullptr) {
    const Eigen::Index d = 5;
    const PrespecifiedGpTruth truth =
        truth_override ? *truth_override : prespecified_gp_truth();

    const std::uint64_t dseed = design_seed ? *design_seed : seed;
    DesignSpec train_spec{n_train, d, DesignKind::MaximinLhs, derive_seed(dseed, 11)};
    DesignSpec test_spec{n_test, d, DesignKind::RandomLhs, derive_seed(dseed, 12)};
    const Eigen::MatrixXd Xtr = maximin_lhs(train_spec, maximin_restarts);
    const Eigen::MatrixXd Xte = n_test > 0 ? random_lhs(test_spec) : Eigen::MatrixXd(0, d);

    Eigen::MatrixXd X(n_train + n_test, d);
    X.topRows(n_train) = Xtr;
    if (n_test > 0) X.bottomRows(n_test) = Xte;

    const BasisSpec basis{BasisDegree::Linear, d};
    const Eigen::VectorXd mean = basis_matrix(X, basis) * truth.beta;

    // joint draw y = mean + tau L z with K = chol'd kernel (jitter ladder applies)
    const KernelBundle bundle = build_kernel_bundle(X, truth.omega, 0.0);
    Rng rng(derive_seed(seed, 13));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd z(X.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = gauss(rng);
    const Eigen::VectorXd y = mean + std::sqrt(truth.tau2) * (bundle.L * z);

    Dataset train{X.topRows(n_train), y.head(n_train), unit_ranges(d)};
    Dataset test{n_test > 0 ? X.bottomRows(n_test) : Eigen::MatrixXd(0, d), y.tail(n_test),
                 unit_ranges(d)};
    return {train, test};
}

/// Train/test data for a deterministic benchmark: unit-cube designs scaled to
/// the physical ranges for evaluation, Gaussian noise with sd equal to
/// noise_sd_factor times the sd of f over the training design added to both
/// sets. The returned datasets keep unit-cube inputs with the physical ranges
/// as scaling metadata.
inline std::pair<Dataset, Dataset> make_benchmark_data(const BenchmarkFunction& f,
                                                       Eigen::Index n_train, Eigen::Index n_test,
                                                       double noise_sd_factor,
                                                       std::uint64_t seed,
                                                       int maximin_restarts = 10) {
    const Eigen::Index d = f.d_total;
    DesignSpec train_spec{n_train, d, DesignKind::MaximinLhs, derive_seed(seed, 21)};
    DesignSpec test_spec{n_test, d, DesignKind::RandomLhs, derive_seed(seed, 22)};
    const Eigen::MatrixXd Utr = maximin_lhs(train_spec, maximin_restarts);
    const Eigen::MatrixXd Ute = n_test > 0 ? random_lhs(test_spec) : Eigen::MatrixXd(0, d);

    const Eigen::MatrixXd Xtr = scale_from_unit(Utr, f.ranges);
    const Eigen::MatrixXd Xte = n_test > 0 ? scale_from_unit(Ute, f.ranges) : Ute;

    Eigen::VectorXd ytr(n_train), yte(n_test);
    for (Eigen::Index i = 0; i < n_train; ++i) ytr(i) = f.eval(Xtr.row(i).transpose());
    for (Eigen::Index i = 0; i < n_test; ++i) yte(i) = f.eval(Xte.row(i).transpose());

    if (noise_sd_factor > 0.0) {
        const double sd_f = std::sqrt((ytr.array() - ytr.mean()).square().sum() /
                                      std::max<double>(1.0, double(n_train - 1)));
        const double noise_sd = noise_sd_factor * sd_f;
        Rng rng(derive_seed(seed, 23));
        std::normal_distribution<double> gauss(0.0, noise_sd);
        for (Eigen::Index i = 0; i < n_train; ++i) ytr(i) += gauss(rng);
        for (Eigen::Index i = 0; i < n_test; ++i) yte(i) += gauss(rng);
    }

    Dataset train{Utr, ytr, unit_ranges(d)};
    Dataset test{Ute, yte, unit_ranges(d)};
    return {train, test};
}

} // namespace bridgegp

#endif
