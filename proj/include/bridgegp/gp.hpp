#ifndef BRIDGEGP_GP_HPP
#define BRIDGEGP_GP_HPP

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bridgegp/basis.hpp"
#include "bridgegp/dataset.hpp"
#include "bridgegp/kernel.hpp"

namespace bridgegp {

/// Posterior predictive summaries per query point.
struct PredictiveResult {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
    long clamped = 0; // count of negative-variance round-off clamps
};

/// Full Gaussian negative log-likelihood of y | params, constant included:
/// (n/2) log 2*pi*tau^2 + (1/2) log det(K+eta I) + S^2/(2 tau^2).
inline double neg_log_likelihood_with(const KernelBundle& bundle, const Eigen::MatrixXd& G,
                                      const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                                      double tau2) {
    const double n = static_cast<double>(y.size());
    const Eigen::VectorXd resid = y - G * beta;
    const double S2 = bundle.quad_form(resid);
    return 0.5 * n * std::log(2.0 * std::numbers::pi) + 0.5 * n * std::log(tau2) +
           0.5 * bundle.logdet + S2 / (2.0 * tau2);
}

inline double neg_log_likelihood(const Dataset& data, const BasisSpec& spec,
                                 const GPParams& params) {
    params.validate();
    const KernelBundle bundle = build_kernel_bundle(data.X, params.omega, params.eta);
    return neg_log_likelihood_with(bundle, basis_matrix(data.X, spec), data.y, params.beta,
                                   params.tau2);
}

/// Analytic gradient of neg_log_likelihood in omega. Entry k:
///   (1/2) tr(A dK/dw_k) - (1/(2 tau^2)) r^T A (dK/dw_k) A r,
/// with dK/dw_k = K .* (-2 w_k D_k) and A = (K + eta I)^{-1}.
inline Eigen::VectorXd grad_negloglik_omega_with(const KernelBundle& bundle,
                                                 const SquaredDiffs& sqd,
                                                 const Eigen::VectorXd& omega,
                                                 const Eigen::VectorXd& resid, double tau2) {
    const Eigen::MatrixXd A = bundle.inverse();
    const Eigen::VectorXd u = bundle.solve(resid); // A r
    Eigen::VectorXd grad(omega.size());
    for (Eigen::Index k = 0; k < omega.size(); ++k) {
        const Eigen::MatrixXd dK =
            (bundle.K.array() * (-2.0 * omega(k)) * sqd.D[static_cast<std::size_t>(k)].array())
                .matrix();
        const double trace_term = 0.5 * (A.array() * dK.array()).sum();
        const double quad_term = u.dot(dK * u) / (2.0 * tau2);
        grad(k) = trace_term - quad_term;
    }
    return grad;
}

inline Eigen::VectorXd grad_negloglik_omega(const Dataset& data, const BasisSpec& spec,
                                            const GPParams& params) {
    params.validate();
    const SquaredDiffs sqd(data.X);
    const KernelBundle bundle = build_kernel_bundle(sqd, params.omega, params.eta);
    const Eigen::VectorXd resid = data.y - basis_matrix(data.X, spec) * params.beta;
    return grad_negloglik_omega_with(bundle, sqd, params.omega, resid, params.tau2);
}

/// Predictive mean g(x)^T b + k(x)^T A (y - G b) and variance
/// tau^2 (1 - k(x)^T A k(x)), the latter clamped at zero.
inline PredictiveResult predict(const Dataset& data, const BasisSpec& spec, const GPParams& params,
                                const Eigen::MatrixXd& Xquery) {
    params.validate();
    if (Xquery.cols() != data.X.cols())
        throw ArgumentError("predict: query dimension mismatch");
    const KernelBundle bundle = build_kernel_bundle(data.X, params.omega, params.eta);
    const Eigen::MatrixXd G = basis_matrix(data.X, spec);
    const Eigen::VectorXd alpha = bundle.solve(data.y - G * params.beta);

    PredictiveResult out;
    out.mean.resize(Xquery.rows());
    out.variance.resize(Xquery.rows());
    for (Eigen::Index m = 0; m < Xquery.rows(); ++m) {
        const Eigen::VectorXd xq = Xquery.row(m).transpose();
        Eigen::VectorXd kx(data.n());
        for (Eigen::Index i = 0; i < data.n(); ++i)
            kx(i) = kernel(xq, data.X.row(i).transpose(), params.omega);
        out.mean(m) = expand_basis(xq, spec).dot(params.beta) + kx.dot(alpha);
        double var = params.tau2 * (1.0 - bundle.quad_form(kx));
        if (var < 0.0) {
            var = 0.0;
            ++out.clamped;
        }
        out.variance(m) = var;
    }
    return out;
}

/// Unconstrained moments of the beta conditional (GLS form):
/// cov = tau^2 (G^T A G)^{-1}, mean = (G^T A G)^{-1} G^T A y.
struct BetaMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

inline BetaMoments beta_conditional_moments_with(const KernelBundle& bundle,
                                                 const Eigen::MatrixXd& G,
                                                 const Eigen::VectorXd& y, double tau2,
                                                 const BasisSpec* spec_for_names = nullptr) {
    const Eigen::MatrixXd W = bundle.L.triangularView<Eigen::Lower>().solve(G); // L^{-1} G
    const Eigen::MatrixXd GtAG = W.transpose() * W;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(GtAG);
    lu.setThreshold(1e-10);
    if (lu.rank() < GtAG.rows()) {
        std::ostringstream oss;
        oss << "beta_conditional_moments: G^T A G is rank-deficient (rank " << lu.rank() << " of "
            << GtAG.rows() << ")";
        if (spec_for_names) {
            // the trailing columns of the pivot permutation are the dependent directions
            const auto names = spec_for_names->term_names();
            oss << "; dependent basis columns:";
            const auto& perm = lu.permutationQ().indices();
            for (Eigen::Index j = lu.rank(); j < GtAG.rows(); ++j)
                oss << ' ' << names[static_cast<std::size_t>(perm(j))];
        }
        throw NumericError(oss.str());
    }
    BetaMoments m;
    const Eigen::VectorXd GtAy = G.transpose() * bundle.solve(y);
    m.mean = lu.solve(GtAy);
    m.cov = tau2 * lu.inverse();
    return m;
}

inline BetaMoments beta_conditional_moments(const Dataset& data, const BasisSpec& spec,
                                            const Eigen::VectorXd& omega, double tau2,
                                            double eta) {
    if (spec.p() > data.n())
        throw NumericError("beta_conditional_moments: p > n makes G^T A G singular");
    const KernelBundle bundle = build_kernel_bundle(data.X, omega, eta);
    return beta_conditional_moments_with(bundle, basis_matrix(data.X, spec), data.y, tau2, &spec);
}

} // namespace bridgegp

#endif
