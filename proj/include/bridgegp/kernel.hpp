#ifndef BRIDGEGP_KERNEL_HPP
#define BRIDGEGP_KERNEL_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "bridgegp/errors.hpp"

namespace bridgegp {

/// Separable anisotropic Gaussian kernel exp(-sum_k w_k^2 (x_ik - x_jk)^2).
inline double kernel(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj,
                     const Eigen::VectorXd& omega) {
    if (xi.size() != xj.size() || xi.size() != omega.size())
        throw ArgumentError("kernel: dimension mismatch");
    const double s = (omega.array().square() * (xi - xj).array().square()).sum();
    return std::exp(-s);
}

/// Pairwise squared coordinate differences D_k(i,j) = (x_ik - x_jk)^2,
/// precomputed once per design; K(omega) and its omega-derivatives are
/// elementwise functions of these.
struct SquaredDiffs {
    std::vector<Eigen::MatrixXd> D; // d matrices, n x n

    SquaredDiffs() = default;
    explicit SquaredDiffs(const Eigen::MatrixXd& X) {
        const Eigen::Index n = X.rows(), d = X.cols();
        D.reserve(static_cast<std::size_t>(d));
        for (Eigen::Index k = 0; k < d; ++k) {
            Eigen::MatrixXd Dk(n, n);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j) {
                    const double diff = X(i, k) - X(j, k);
                    Dk(i, j) = diff * diff;
                }
            D.push_back(std::move(Dk));
        }
    }

    Eigen::Index dims() const { return static_cast<Eigen::Index>(D.size()); }
    Eigen::Index n() const { return D.empty() ? 0 : D.front().rows(); }

    Eigen::MatrixXd kernel_matrix(const Eigen::VectorXd& omega) const {
        if (omega.size() != dims()) throw ArgumentError("kernel_matrix: omega dimension mismatch");
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n(), n());
        for (Eigen::Index k = 0; k < dims(); ++k) S += (omega(k) * omega(k)) * D[static_cast<std::size_t>(k)];
        return (-S.array()).exp();
    }
};

/// Cholesky factorization of K_n + eta I_n with the jitter ladder applied;
/// immutable and safe to share between threads once built.
struct KernelBundle {
    Eigen::MatrixXd K;           // kernel matrix (no nugget)
    Eigen::MatrixXd Kn_plus_etaI; // K + (eta + jitter) I, the factored matrix
    Eigen::MatrixXd L;           // lower-triangular Cholesky factor
    double logdet = 0.0;         // log det(Kn_plus_etaI)
    double eta = 0.0;
    double jitter = 0.0;         // total diagonal jitter added beyond eta
    int jitter_retries = 0;

    /// Solve (K + eta I) x = b via the cached factor; preserves the
    /// vector/matrix shape of b.
    template <typename Derived>
    typename Derived::PlainObject solve(const Eigen::MatrixBase<Derived>& b) const {
        typename Derived::PlainObject x = L.triangularView<Eigen::Lower>().solve(b.derived());
        L.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
        return x;
    }

    /// v^T (K + eta I)^{-1} v.
    double quad_form(const Eigen::VectorXd& v) const {
        return L.triangularView<Eigen::Lower>().solve(v).squaredNorm();
    }

    /// Explicit inverse; needed only for the trace terms of the omega gradient.
    Eigen::MatrixXd inverse() const {
        return solve(Eigen::MatrixXd::Identity(L.rows(), L.cols()));
    }
};

namespace detail {

inline bool try_cholesky(const Eigen::MatrixXd& M, Eigen::MatrixXd& L_out, double& logdet_out) {
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) return false;
    L_out = llt.matrixL();
    // guard against a "successful" factorization with non-positive pivots
    if ((L_out.diagonal().array() <= 0.0).any()) return false;
    logdet_out = 2.0 * L_out.diagonal().array().log().sum();
    return std::isfinite(logdet_out);
}

} // namespace detail

/// Assemble and factor K + eta I. On failure, climbs the jitter ladder:
/// 1e-10 * mean(diag), x10 per retry, at most 6 retries.
inline KernelBundle build_kernel_bundle(const SquaredDiffs& sqd, const Eigen::VectorXd& omega,
                                        double eta) {
    if (eta < 0.0) throw ArgumentError("build_kernel_bundle: eta must be >= 0");
    KernelBundle b;
    b.eta = eta;
    b.K = sqd.kernel_matrix(omega);
    const Eigen::Index n = b.K.rows();
    Eigen::MatrixXd M = b.K + eta * Eigen::MatrixXd::Identity(n, n);
    const double base = 1e-10 * M.diagonal().mean();
    double jit = 0.0;
    for (int attempt = 0; attempt <= 6; ++attempt) {
        if (attempt > 0) {
            jit = base * std::pow(10.0, attempt - 1);
            b.jitter_retries = attempt;
        }
        Eigen::MatrixXd Mj = M + jit * Eigen::MatrixXd::Identity(n, n);
        if (detail::try_cholesky(Mj, b.L, b.logdet)) {
            b.Kn_plus_etaI = std::move(Mj);
            b.jitter = jit;
            return b;
        }
    }
    std::ostringstream oss;
    oss << "build_kernel_bundle: Cholesky failed after jitter ladder (n=" << n
        << ", eta=" << eta << ", final jitter=" << jit
        << ", diag range=[" << M.diagonal().minCoeff() << ", " << M.diagonal().maxCoeff()
        << "], min off-diag gap=" << (M.diagonal().minCoeff() - M.cwiseAbs().maxCoeff()) << ")";
    throw NumericError(oss.str());
}

inline KernelBundle build_kernel_bundle(const Eigen::MatrixXd& X, const Eigen::VectorXd& omega,
                                        double eta) {
    return build_kernel_bundle(SquaredDiffs(X), omega, eta);
}

/// Refactor an existing kernel matrix with a new nugget (eta moves, omega
/// does not); same jitter ladder as build_kernel_bundle.
inline KernelBundle build_bundle_from_K(const Eigen::MatrixXd& K, double eta) {
    if (eta < 0.0) throw ArgumentError("build_bundle_from_K: eta must be >= 0");
    KernelBundle b;
    b.eta = eta;
    b.K = K;
    const Eigen::Index n = K.rows();
    Eigen::MatrixXd M = K + eta * Eigen::MatrixXd::Identity(n, n);
    const double base = 1e-10 * M.diagonal().mean();
    double jit = 0.0;
    for (int attempt = 0; attempt <= 6; ++attempt) {
        if (attempt > 0) {
            jit = base * std::pow(10.0, attempt - 1);
            b.jitter_retries = attempt;
        }
        Eigen::MatrixXd Mj = M + jit * Eigen::MatrixXd::Identity(n, n);
        if (detail::try_cholesky(Mj, b.L, b.logdet)) {
            b.Kn_plus_etaI = std::move(Mj);
            b.jitter = jit;
            return b;
        }
    }
    throw NumericError("build_bundle_from_K: Cholesky failed after jitter ladder (eta=" +
                       std::to_string(eta) + ")");
}

} // namespace bridgegp

#endif
