#ifndef BRIDGEGP_BALL_MAP_HPP
#define BRIDGEGP_BALL_MAP_HPP

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "bridgegp/errors.hpp"

namespace bridgegp {

/// lq "norm" (sum |v_i|^q)^(1/q); not subadditive for q < 1 but that is the
/// constraint functional used throughout.
inline double lq_norm(const Eigen::VectorXd& v, double q) {
    if (v.size() == 0) return 0.0;
    return std::pow(v.array().abs().pow(q).sum(), 1.0 / q);
}

/// A point of the unit l2 ball carrying the (radius, exponent) of the lq
/// constraint it represents.
struct BallPoint {
    Eigen::VectorXd theta; // ||theta||_2 <= 1
    double radius = 1.0;   // constraint radius r
    double q = 1.0;        // bridge exponent, 0 < q <= 2

    void validate() const {
        if (!(radius > 0.0)) throw ArgumentError("BallPoint: radius must be > 0");
        if (!(q > 0.0 && q <= 2.0)) throw ArgumentError("BallPoint: q must be in (0, 2]");
        if (theta.norm() > 1.0 + 1e-12)
            throw DomainError("BallPoint: ||theta||_2 exceeds 1");
    }
};

/// Point of the unit sphere S^d in R^{d+1}.
struct SpherePoint {
    Eigen::VectorXd theta_tilde;

    void renormalize() { theta_tilde /= theta_tilde.norm(); }
};

/// Sign-power map v_i -> sgn(v_i) |v_i / r|^{q/2} taking the lq ball of
/// radius r onto the unit l2 ball.
inline BallPoint param_to_ball(const Eigen::VectorXd& v, double r, double q) {
    const double norm_q = lq_norm(v, q);
    if (norm_q > r * (1.0 + 1e-12)) {
        std::ostringstream oss;
        oss << "param_to_ball: ||v||_q = " << norm_q << " exceeds radius r = " << r;
        throw DomainError(oss.str());
    }
    BallPoint b;
    b.radius = r;
    b.q = q;
    b.theta = v.unaryExpr([r, q](double vi) {
        const double s = vi < 0.0 ? -1.0 : 1.0;
        return s * std::pow(std::abs(vi) / r, q / 2.0);
    });
    if (double n2 = b.theta.norm(); n2 > 1.0) b.theta /= n2; // shave round-off overshoot
    return b;
}

/// Inverse map theta_i -> r sgn(theta_i) |theta_i|^{2/q}.
inline Eigen::VectorXd ball_to_param(const BallPoint& b) {
    const double r = b.radius, q = b.q;
    return b.theta.unaryExpr([r, q](double ti) {
        const double s = ti < 0.0 ? -1.0 : 1.0;
        return r * s * std::pow(std::abs(ti), 2.0 / q);
    });
}

/// Embed the ball point onto S^d by appending sign * sqrt(1 - ||theta||^2).
inline SpherePoint lift_to_sphere(const BallPoint& b, int hemisphere_sign = +1) {
    SpherePoint s;
    s.theta_tilde.resize(b.theta.size() + 1);
    s.theta_tilde.head(b.theta.size()) = b.theta;
    const double slack = std::max(0.0, 1.0 - b.theta.squaredNorm());
    s.theta_tilde(b.theta.size()) = (hemisphere_sign >= 0 ? 1.0 : -1.0) * std::sqrt(slack);
    s.renormalize();
    return s;
}

/// Drop the auxiliary coordinate; the first d components are the ball point.
inline Eigen::VectorXd drop_from_sphere(const SpherePoint& s) {
    return s.theta_tilde.head(s.theta_tilde.size() - 1);
}

/// log |d param / d theta_tilde| for a sphere-space draw:
///   sum_i [ log(2/q) + log r + (2/q - 1) log|theta_i| ] + log|theta_{d+1}|.
/// Attached to retained draws as a self-normalized importance weight (the
/// potential energy stays equal to the model's negative log density).
/// Magnitudes inside the logs are floored at 1e-12; `floored`, when given,
/// counts draws that hit the floor.
inline double log_jacobian_weight(const BallPoint& b, long* floored = nullptr) {
    constexpr double kFloor = 1e-12;
    const double two_over_q = 2.0 / b.q;
    bool hit = false;
    double lw = 0.0;
    for (Eigen::Index i = 0; i < b.theta.size(); ++i) {
        double a = std::abs(b.theta(i));
        if (a < kFloor) {
            a = kFloor;
            hit = true;
        }
        lw += std::log(two_over_q) + std::log(b.radius) + (two_over_q - 1.0) * std::log(a);
    }
    double last = std::sqrt(std::max(0.0, 1.0 - b.theta.squaredNorm()));
    if (last < kFloor) {
        last = kFloor;
        hit = true;
    }
    lw += std::log(last);
    if (hit && floored) ++(*floored);
    return lw;
}

/// Diagonal of d param / d theta: r (2/q) |theta_i|^{2/q - 1}, with |theta_i|
/// floored at 1e-12; chains model-space gradients back to ball coordinates.
inline Eigen::VectorXd dparam_dball_diag(const BallPoint& b) {
    static constexpr double kFloor = 1e-12;
    const double r = b.radius, q = b.q;
    return b.theta.unaryExpr([r, q](double ti) {
        const double a = std::max(std::abs(ti), kFloor);
        return r * (2.0 / q) * std::pow(a, 2.0 / q - 1.0);
    });
}

} // namespace bridgegp

#endif
