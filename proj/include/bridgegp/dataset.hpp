#ifndef BRIDGEGP_DATASET_HPP
#define BRIDGEGP_DATASET_HPP

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "bridgegp/errors.hpp"

namespace bridgegp {

/// Training inputs/responses plus the per-column ranges used to move between
/// physical units and the unit cube.
struct Dataset {
    Eigen::MatrixXd X;                                    // n x d
    Eigen::VectorXd y;                                    // n
    std::vector<std::pair<double, double>> column_ranges; // (lo, hi) per column

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index d() const { return X.cols(); }

    void validate() const {
        if (X.rows() < 1 || X.cols() < 1)
            throw ArgumentError("Dataset: need n >= 1 and d >= 1");
        if (y.size() != X.rows())
            throw ArgumentError("Dataset: y length " + std::to_string(y.size()) +
                                " does not match n = " + std::to_string(X.rows()));
        if (!X.allFinite() || !y.allFinite())
            throw ArgumentError("Dataset: non-finite entries");
        if (column_ranges.size() != static_cast<std::size_t>(X.cols()))
            throw ArgumentError("Dataset: column_ranges size mismatch");
        for (std::size_t k = 0; k < column_ranges.size(); ++k)
            if (!(column_ranges[k].first < column_ranges[k].second))
                throw ArgumentError("Dataset: column " + std::to_string(k + 1) +
                                    " has empty range [lo, hi)");
    }
};

/// Unit-cube ranges, the common case for designs generated in [0,1]^d.
inline std::vector<std::pair<double, double>> unit_ranges(Eigen::Index d) {
    return std::vector<std::pair<double, double>>(static_cast<std::size_t>(d), {0.0, 1.0});
}

/// Columnwise affine map into [0,1]^d given ranges.
inline Eigen::MatrixXd scale_to_unit(const Eigen::MatrixXd& X,
                                     const std::vector<std::pair<double, double>>& ranges) {
    Eigen::MatrixXd out = X;
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
        const auto [lo, hi] = ranges[static_cast<std::size_t>(k)];
        out.col(k) = (X.col(k).array() - lo) / (hi - lo);
    }
    return out;
}

/// Inverse of scale_to_unit.
inline Eigen::MatrixXd scale_from_unit(const Eigen::MatrixXd& U,
                                       const std::vector<std::pair<double, double>>& ranges) {
    Eigen::MatrixXd out = U;
    for (Eigen::Index k = 0; k < U.cols(); ++k) {
        const auto [lo, hi] = ranges[static_cast<std::size_t>(k)];
        out.col(k) = lo + U.col(k).array() * (hi - lo);
    }
    return out;
}

/// GP parameter state: fixed-effect coefficients, inverse length-scales,
/// process variance and nugget ratio eta = sigma^2 / tau^2.
struct GPParams {
    Eigen::VectorXd beta;  // p
    Eigen::VectorXd omega; // d
    double tau2 = 1.0;
    double eta = 0.0;

    void validate() const {
        if (!(tau2 > 0.0)) throw ArgumentError("GPParams: tau2 must be > 0");
        if (eta < 0.0) throw ArgumentError("GPParams: eta must be >= 0");
        if (!beta.allFinite() || !omega.allFinite() || !std::isfinite(tau2) || !std::isfinite(eta))
            throw ArgumentError("GPParams: non-finite entries");
    }
};

} // namespace bridgegp

#endif
