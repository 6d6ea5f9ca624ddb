#ifndef BRIDGEGP_SPH_HMC_HPP
#define BRIDGEGP_SPH_HMC_HPP

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "bridgegp/ball_map.hpp"
#include "bridgegp/hmc.hpp"
#include "bridgegp/rng.hpp"

namespace bridgegp {

/// Sphere position plus tangent velocity.
struct SphState {
    Eigen::VectorXd theta_tilde; // unit vector in R^{d+1}
    Eigen::VectorXd v_tilde;     // tangent: <theta_tilde, v_tilde> = 0
};

/// (I - t t^T) g, the tangent-space projection at t.
inline Eigen::VectorXd project_tangent(const Eigen::VectorXd& theta_tilde,
                                       const Eigen::VectorXd& grad) {
    return grad - theta_tilde * theta_tilde.dot(grad);
}

/// Exact great-circle rotation of (position, velocity) by arc ||v|| * eps;
/// preserves ||theta_tilde|| = 1 and the speed ||v||.
inline SphState geodesic_update(const SphState& state, double eps) {
    const double speed = state.v_tilde.norm();
    if (speed == 0.0) return state;
    const double ang = speed * eps;
    const double c = std::cos(ang), s = std::sin(ang);
    SphState out;
    out.theta_tilde = state.theta_tilde * c + (state.v_tilde / speed) * s;
    out.v_tilde = -state.theta_tilde * speed * s + state.v_tilde * c;
    out.theta_tilde /= out.theta_tilde.norm();
    out.v_tilde = project_tangent(out.theta_tilde, out.v_tilde);
    return out;
}

struct SphHmcResult {
    Eigen::VectorXd theta; // ball coordinates (first d entries of the sphere point)
    bool accepted = false;
    double accept_prob = 0.0;
    bool divergent = false;
    double log_weight = 0.0;
    int steps = 0;
};

namespace detail {

/// log|d param / d theta_tilde| evaluated directly on the sphere point.
inline double sphere_log_jacobian(const Eigen::VectorXd& theta_tilde, double r, double q) {
    constexpr double kFloor = 1e-12;
    const double two_over_q = 2.0 / q;
    const Eigen::Index d = theta_tilde.size() - 1;
    double lw = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        const double a = std::max(std::abs(theta_tilde(i)), kFloor);
        lw += std::log(two_over_q) + std::log(r) + (two_over_q - 1.0) * std::log(a);
    }
    lw += std::log(std::max(std::abs(theta_tilde(d)), kFloor));
    return lw;
}

inline Eigen::VectorXd sphere_log_jacobian_grad(const Eigen::VectorXd& theta_tilde, double q) {
    constexpr double kFloor = 1e-12;
    const double two_over_q = 2.0 / q;
    const Eigen::Index d = theta_tilde.size() - 1;
    Eigen::VectorXd g(theta_tilde.size());
    for (Eigen::Index i = 0; i < d; ++i) {
        const double t = theta_tilde(i);
        const double a = std::max(std::abs(t), kFloor);
        g(i) = (two_over_q - 1.0) / (t < 0.0 ? -a : a);
    }
    const double t = theta_tilde(d);
    const double a = std::max(std::abs(t), kFloor);
    g(d) = 1.0 / (t < 0.0 ? -a : a);
    return g;
}

} // namespace detail

/// One SphHMC transition for a target given in ball coordinates (U depends on
/// the first d entries only; the gradient is zero-extended before projection).
/// Returns the ball coordinates of the next state together with the
/// change-of-variables log weight for the (r, q) sign-power map. With
/// jacobian_in_potential the weight is folded into U instead and the returned
/// log_weight is 0.
inline SphHmcResult sph_hmc_iteration(const Eigen::VectorXd& theta_ball,
                                      const TargetFunctions& target_on_ball, double r, double q,
                                      double eps, int L_max_upper, Rng& rng,
                                      bool jacobian_in_potential = false,
                                      long* floored_events = nullptr) {
    const Eigen::Index d = theta_ball.size();

    const auto U_eff = [&](const Eigen::VectorXd& tt) {
        double u = target_on_ball.neg_log_density(tt.head(d));
        if (jacobian_in_potential) u -= detail::sphere_log_jacobian(tt, r, q);
        return u;
    };
    const auto grad_eff = [&](const Eigen::VectorXd& tt) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(d + 1);
        g.head(d) = target_on_ball.grad_neg_log_density(tt.head(d));
        if (jacobian_in_potential) g -= detail::sphere_log_jacobian_grad(tt, q);
        return g;
    };
    const auto state_weight = [&](const Eigen::VectorXd& ball) {
        if (jacobian_in_potential) return 0.0;
        BallPoint b{ball, r, q};
        return log_jacobian_weight(b, floored_events);
    };

    SphHmcResult res;
    res.theta = theta_ball;
    res.log_weight = state_weight(theta_ball);

    BallPoint b0{theta_ball, r, q};
    const SpherePoint start = lift_to_sphere(b0, +1);

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> len(1, std::max(1, L_max_upper));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    SphState st;
    st.theta_tilde = start.theta_tilde;
    st.v_tilde.resize(d + 1);
    for (Eigen::Index i = 0; i < d + 1; ++i) st.v_tilde(i) = gauss(rng);
    st.v_tilde = project_tangent(st.theta_tilde, st.v_tilde);
    const int L_max = len(rng);

    const double H0 = U_eff(st.theta_tilde) + 0.5 * st.v_tilde.squaredNorm();
    std::vector<Eigen::VectorXd> positions{st.theta_tilde};
    bool bad = !std::isfinite(H0);
    int L = L_max;
    for (int l = 1; l <= L_max && !bad; ++l) {
        Eigen::VectorXd g = grad_eff(st.theta_tilde);
        if (!g.allFinite()) {
            bad = true;
            break;
        }
        st.v_tilde -= 0.5 * eps * project_tangent(st.theta_tilde, g);
        st = geodesic_update(st, eps);
        g = grad_eff(st.theta_tilde);
        if (!g.allFinite()) {
            bad = true;
            break;
        }
        st.v_tilde -= 0.5 * eps * project_tangent(st.theta_tilde, g);
        ++res.steps;
        positions.push_back(st.theta_tilde);
        if (start.theta_tilde.dot(st.theta_tilde) < 0.0) { // u-turn on the sphere
            L = l;
            break;
        }
    }

    double dH = std::numeric_limits<double>::infinity();
    if (!bad) {
        const double H1 = U_eff(st.theta_tilde) + 0.5 * st.v_tilde.squaredNorm();
        dH = H1 - H0;
    }
    if (!std::isfinite(dH) || std::abs(dH) > 1000.0) {
        res.divergent = true;
        res.accept_prob = 0.0;
        return res; // previous point and its weight are re-emitted
    }

    // The dynamic stop must fire at the same step count along the reversed
    // trajectory (which retraces the stored positions) or the proposal is not
    // an involution; mismatches are rejected to keep the kernel exact.
    int L_rev = L_max;
    for (int k = 1; k <= L; ++k) {
        if (positions[static_cast<std::size_t>(L)].dot(
                positions[static_cast<std::size_t>(L - k)]) < 0.0) {
            L_rev = k;
            break;
        }
    }
    if (L_rev != L) {
        res.accept_prob = 0.0;
        return res;
    }

    res.accept_prob = std::min(1.0, std::exp(-dH));
    if (unif(rng) < res.accept_prob) {
        SpherePoint sp{st.theta_tilde};
        Eigen::VectorXd ball = drop_from_sphere(sp);
        if (double n2 = ball.norm(); n2 > 1.0) ball /= n2;
        res.theta = ball;
        res.accepted = true;
        res.log_weight = state_weight(ball);
    }
    return res;
}

} // namespace bridgegp

#endif
