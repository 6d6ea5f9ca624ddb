#ifndef BRIDGEGP_HMC_HPP
#define BRIDGEGP_HMC_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "bridgegp/errors.hpp"
#include "bridgegp/rng.hpp"

namespace bridgegp {

/// Potential energy U(theta) = -log density and its gradient.
struct TargetFunctions {
    std::function<double(const Eigen::VectorXd&)> neg_log_density;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad_neg_log_density;
};

/// Max |grad - central FD| / max(1, |FD|) over probe points; test-side
/// self-check, never called on the sampling path.
inline double check_gradient(const TargetFunctions& target,
                             const std::vector<Eigen::VectorXd>& probes, double h = 1e-5) {
    double worst = 0.0;
    for (const auto& x : probes) {
        const Eigen::VectorXd g = target.grad_neg_log_density(x);
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            Eigen::VectorXd xp = x, xm = x;
            xp(k) += h;
            xm(k) -= h;
            const double fd =
                (target.neg_log_density(xp) - target.neg_log_density(xm)) / (2.0 * h);
            worst = std::max(worst, std::abs(g(k) - fd) / std::max(1.0, std::abs(fd)));
        }
    }
    return worst;
}

struct HmcConfig {
    double step_size = 0.1;
    int L_max_upper = 10;        // L_max ~ UniformInt[1, L_max_upper] per iteration
    double target_accept = 0.8;  // dual-averaging target
    int adapt_iters = 0;         // warmup iterations with step-size adaptation
};

/// Nesterov dual averaging of log(step size) toward the target acceptance.
struct DualAveragingState {
    double mu = 0.0;
    double log_eps = 0.0;
    double log_eps_bar = 0.0;
    double H_bar = 0.0;
    long t = 0;
    double gamma = 0.05;
    double t0 = 10.0;
    double kappa = 0.75;

    static DualAveragingState init(double eps0) {
        DualAveragingState s;
        s.mu = std::log(10.0 * eps0);
        s.log_eps = std::log(eps0);
        s.log_eps_bar = std::log(eps0);
        return s;
    }

    double current_eps() const { return std::exp(log_eps); }
    double adapted_eps() const { return std::exp(log_eps_bar); }
};

/// One dual-averaging update; pure function of (state, accept_prob, target).
inline DualAveragingState adapt_step_size(const DualAveragingState& state, double accept_prob,
                                          double target_accept) {
    DualAveragingState s = state;
    s.t += 1;
    const double w = 1.0 / (static_cast<double>(s.t) + s.t0);
    s.H_bar = (1.0 - w) * s.H_bar + w * (target_accept - accept_prob);
    s.log_eps = s.mu - std::sqrt(static_cast<double>(s.t)) / s.gamma * s.H_bar;
    const double eta = std::pow(static_cast<double>(s.t), -s.kappa);
    s.log_eps_bar = eta * s.log_eps + (1.0 - eta) * s.log_eps_bar;
    return s;
}

struct LeapfrogResult {
    Eigen::VectorXd theta;
    Eigen::VectorXd phi;
    bool ok = true; // false on a non-finite gradient
};

/// Half-kick, drift, half-kick with identity mass; volume preserving and
/// time reversible.
inline LeapfrogResult leapfrog_step(const Eigen::VectorXd& theta, const Eigen::VectorXd& phi,
                                    double eps, const TargetFunctions& target) {
    LeapfrogResult r;
    Eigen::VectorXd g = target.grad_neg_log_density(theta);
    if (!g.allFinite()) {
        r.theta = theta;
        r.phi = phi;
        r.ok = false;
        return r;
    }
    const Eigen::VectorXd phi_half = phi - 0.5 * eps * g;
    r.theta = theta + eps * phi_half;
    g = target.grad_neg_log_density(r.theta);
    if (!g.allFinite()) {
        r.phi = phi_half;
        r.ok = false;
        return r;
    }
    r.phi = phi_half - 0.5 * eps * g;
    return r;
}

struct HmcResult {
    Eigen::VectorXd theta;
    bool accepted = false;
    double accept_prob = 0.0;
    bool divergent = false;
    bool reversibility_rejected = false;
    int steps = 0;
};

/// One HMC transition: draw momentum, integrate until the displacement
/// no-u-turn test <theta_l - theta_0, phi_l> < 0 fires or L_max steps elapse,
/// Metropolis-accept on the energy difference. |dH| > 1000 auto-rejects.
///
/// The dynamic stop alone is not a reversible proposal, so the stopping time
/// of the time-reversed trajectory (free to evaluate: leapfrog retraces the
/// stored states) is compared and the move rejected on mismatch; on the
/// matched set the proposal is an involution and plain Metropolis is exact.
inline HmcResult hmc_iteration(const Eigen::VectorXd& theta0, const TargetFunctions& target,
                               const HmcConfig& config, double eps, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> len(1, std::max(1, config.L_max_upper));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Eigen::VectorXd phi0(theta0.size());
    for (Eigen::Index i = 0; i < phi0.size(); ++i) phi0(i) = gauss(rng);
    const int L_max = len(rng);

    HmcResult res;
    res.theta = theta0;

    const double H0 = target.neg_log_density(theta0) + 0.5 * phi0.squaredNorm();
    std::vector<Eigen::VectorXd> thetas{theta0}, phis{phi0};
    Eigen::VectorXd theta = theta0, phi = phi0;
    bool bad = !std::isfinite(H0);
    int L = L_max;
    for (int l = 1; l <= L_max && !bad; ++l) {
        const LeapfrogResult step = leapfrog_step(theta, phi, eps, target);
        theta = step.theta;
        phi = step.phi;
        ++res.steps;
        if (!step.ok || !theta.allFinite()) {
            bad = true;
            break;
        }
        thetas.push_back(theta);
        phis.push_back(phi);
        if ((theta - theta0).dot(phi) < 0.0) {
            L = l;
            break;
        }
    }

    double dH = std::numeric_limits<double>::infinity();
    if (!bad) {
        const double H1 = target.neg_log_density(theta) + 0.5 * phi.squaredNorm();
        dH = H1 - H0;
    }
    if (!std::isfinite(dH) || std::abs(dH) > 1000.0) {
        res.divergent = true;
        res.accept_prob = 0.0;
        return res; // res.theta is still theta0
    }

    int L_rev = L_max;
    for (int k = 1; k <= L; ++k) {
        const std::size_t at = static_cast<std::size_t>(L - k);
        if ((thetas[at] - thetas[static_cast<std::size_t>(L)]).dot(-phis[at]) < 0.0) {
            L_rev = k;
            break;
        }
    }
    if (L_rev != L) {
        res.reversibility_rejected = true;
        res.accept_prob = 0.0;
        return res;
    }

    res.accept_prob = std::min(1.0, std::exp(-dH));
    if (unif(rng) < res.accept_prob) {
        res.theta = theta;
        res.accepted = true;
    }
    return res;
}

/// Find-reasonable-epsilon: from eps = 1, double or halve until one leapfrog
/// step crosses acceptance probability 1/2. Capped at 2^10 for flat targets.
inline double heuristic_initial_step(const Eigen::VectorXd& theta0, const TargetFunctions& target,
                                     Rng& rng, double eps_max = 1024.0) {
    const double U0 = target.neg_log_density(theta0);
    if (!std::isfinite(U0) || !target.grad_neg_log_density(theta0).allFinite())
        throw NumericError("heuristic_initial_step: target not finite at the initial point");

    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd phi(theta0.size());
    for (Eigen::Index i = 0; i < phi.size(); ++i) phi(i) = gauss(rng);
    const double H0 = U0 + 0.5 * phi.squaredNorm();

    const auto accept_prob = [&](double eps) {
        const LeapfrogResult step = leapfrog_step(theta0, phi, eps, target);
        if (!step.ok || !step.theta.allFinite() || !step.phi.allFinite()) return 0.0;
        const double H1 = target.neg_log_density(step.theta) + 0.5 * step.phi.squaredNorm();
        if (!std::isfinite(H1)) return 0.0;
        return std::exp(-(H1 - H0));
    };

    double eps = 1.0;
    double a_prob = accept_prob(eps);
    const double dir = a_prob > 0.5 ? 1.0 : -1.0;
    constexpr double eps_min = 1e-10;
    while (std::pow(a_prob, dir) > std::pow(2.0, -dir)) {
        eps *= std::pow(2.0, dir);
        if (eps >= eps_max) return eps_max;
        if (eps <= eps_min) return eps_min;
        a_prob = accept_prob(eps);
    }
    return eps;
}

} // namespace bridgegp

#endif
