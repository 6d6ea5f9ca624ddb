#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "bridgegp/gp.hpp"
#include "bridgegp/kernel.hpp"
#include "bridgegp/rng.hpp"

using namespace bridgegp;
using Catch::Approx;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index d, Rng& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> unif(0.0, scale);
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) X(i, j) = unif(rng);
    return X;
}

Eigen::VectorXd random_vector(Eigen::Index n, Rng& rng, double lo, double hi) {
    std::uniform_real_distribution<double> unif(lo, hi);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = unif(rng);
    return v;
}

// Dense-formula oracle built from scratch (kernel loops, explicit inverse
// and determinant); independent of the Cholesky path under test.
Eigen::MatrixXd dense_cov(const Eigen::MatrixXd& X, const Eigen::VectorXd& omega, double eta) {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd M(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            double s = 0.0;
            for (Eigen::Index k = 0; k < X.cols(); ++k)
                s += omega(k) * omega(k) * (X(i, k) - X(j, k)) * (X(i, k) - X(j, k));
            M(i, j) = std::exp(-s) + (i == j ? eta : 0.0);
        }
    return M;
}

} // namespace

TEST_CASE("kernel basics") {
    Rng rng(7);
    Eigen::VectorXd xi = random_vector(3, rng, -1, 1);
    Eigen::VectorXd omega = random_vector(3, rng, 0, 2);
    CHECK(kernel(xi, xi, omega) == Approx(1.0));
    CHECK(kernel(xi, random_vector(3, rng, -1, 1), Eigen::VectorXd::Zero(3)) == Approx(1.0));

    Eigen::VectorXd a(2), b(2), w(2);
    a << 0, 0;
    b << 1, 1;
    w << 1, 1;
    CHECK(kernel(a, b, w) == Approx(std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("kernel symmetry and permutation equivariance") {
    Rng rng(11);
    for (int t = 0; t < 50; ++t) {
        Eigen::VectorXd xi = random_vector(4, rng, -2, 2);
        Eigen::VectorXd xj = random_vector(4, rng, -2, 2);
        Eigen::VectorXd w = random_vector(4, rng, 0, 3);
        CHECK(kernel(xi, xj, w) == Approx(kernel(xj, xi, w)).epsilon(1e-14));

        Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
        perm.setIdentity();
        std::shuffle(perm.indices().data(), perm.indices().data() + 4, rng);
        CHECK(kernel(perm * xi, perm * xj, perm * w) ==
              Approx(kernel(xi, xj, w)).epsilon(1e-14));
    }
}

TEST_CASE("bundle handles the single point and rank-1 limits") {
    Eigen::MatrixXd X1(1, 1);
    X1 << 0.3;
    Eigen::VectorXd w1(1);
    w1 << 2.0;
    const double eta = 0.25;
    const KernelBundle b1 = build_kernel_bundle(X1, w1, eta);
    CHECK(b1.Kn_plus_etaI(0, 0) == Approx(1.0 + eta));
    CHECK(b1.logdet == Approx(std::log(1.0 + eta)));

    // omega = 0, eta = 0 makes K all ones (singular): the jitter ladder engages
    Eigen::MatrixXd X2(2, 1);
    X2 << 0.0, 1.0;
    const KernelBundle b2 = build_kernel_bundle(X2, Eigen::VectorXd::Zero(1), 0.0);
    CHECK(b2.jitter_retries >= 1);
    CHECK(b2.jitter > 0.0);
}

TEST_CASE("bundle invariants and logdet against a direct determinant") {
    Rng rng(21);
    const Eigen::MatrixXd X = random_matrix(5, 2, rng);
    Eigen::VectorXd w(2);
    w << 1.0, 1.0;
    const KernelBundle b = build_kernel_bundle(X, w, 0.1);

    const Eigen::MatrixXd recon = b.L * b.L.transpose();
    CHECK((recon - b.Kn_plus_etaI).norm() / b.Kn_plus_etaI.norm() <= 1e-10);

    const double det = dense_cov(X, w, 0.1).determinant();
    CHECK(b.logdet == Approx(std::log(det)).epsilon(1e-8));
}

TEST_CASE("negative log-likelihood includes its constant") {
    Dataset data;
    data.X.resize(1, 1);
    data.X << 0.0;
    data.y.resize(1);
    data.y << 1.7;
    data.column_ranges = {{-1.0, 1.0}};
    GPParams params;
    params.beta = data.y;
    params.omega = Eigen::VectorXd::Ones(1);
    params.tau2 = 1.0;
    params.eta = 0.0;
    const BasisSpec spec{BasisDegree::Constant, 1};
    CHECK(neg_log_likelihood(data, spec, params) ==
          Approx(0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("negative log-likelihood matches the dense MVN formula") {
    Rng rng(33);
    Dataset data;
    data.X = random_matrix(3, 2, rng);
    data.y = random_vector(3, rng, -2, 2);
    data.column_ranges = unit_ranges(2);
    const BasisSpec spec{BasisDegree::Linear, 2};
    GPParams params;
    params.beta = random_vector(spec.p(), rng, -1, 1);
    params.omega = random_vector(2, rng, 0.2, 1.5);
    params.tau2 = 0.7;
    params.eta = 0.05;

    const Eigen::MatrixXd M = dense_cov(data.X, params.omega, params.eta);
    const Eigen::VectorXd r = data.y - basis_matrix(data.X, spec) * params.beta;
    const double n = 3.0;
    const double direct = 0.5 * n * std::log(2.0 * std::numbers::pi) +
                          0.5 * n * std::log(params.tau2) + 0.5 * std::log(M.determinant()) +
                          r.dot(M.inverse() * r) / (2.0 * params.tau2);
    CHECK(neg_log_likelihood(data, spec, params) == Approx(direct).epsilon(1e-8));
}

TEST_CASE("quadratic term scales with the squared residual") {
    Rng rng(34);
    Dataset data;
    data.X = random_matrix(4, 1, rng);
    data.y = random_vector(4, rng, -1, 1);
    data.column_ranges = unit_ranges(1);
    const BasisSpec spec{BasisDegree::Constant, 1};
    GPParams params;
    params.beta = Eigen::VectorXd::Zero(1);
    params.omega = Eigen::VectorXd::Ones(1);
    params.tau2 = 1.0;
    params.eta = 0.3;

    const KernelBundle b = build_kernel_bundle(data.X, params.omega, params.eta);
    const double base = 2.0 + 0.5 * b.logdet; // placeholder, cancelled below
    (void)base;
    const double nll1 = neg_log_likelihood(data, spec, params);
    Dataset data2 = data;
    data2.y *= 2.0;
    const double nll2 = neg_log_likelihood(data2, spec, params);
    const double constant = 0.5 * 4.0 * std::log(2.0 * std::numbers::pi) + 0.5 * b.logdet;
    CHECK(nll2 - constant == Approx(4.0 * (nll1 - constant)).epsilon(1e-10));
}

TEST_CASE("omega gradient is zero when omega vanishes or a column is constant") {
    Rng rng(35);
    Dataset data;
    data.X = random_matrix(5, 3, rng);
    data.X.col(2).setConstant(0.4); // no spread in dimension 3
    data.y = random_vector(5, rng, -1, 1);
    data.column_ranges = unit_ranges(3);
    const BasisSpec spec{BasisDegree::Constant, 3};
    GPParams params;
    params.beta = Eigen::VectorXd::Zero(1);
    params.omega = Eigen::VectorXd::Zero(3);
    params.tau2 = 1.0;
    params.eta = 0.1;

    CHECK(grad_negloglik_omega(data, spec, params).norm() == Approx(0.0).margin(1e-14));

    params.omega << 0.8, 1.2, 0.5;
    const Eigen::VectorXd g = grad_negloglik_omega(data, spec, params);
    CHECK(g(2) == Approx(0.0).margin(1e-14));
}

TEST_CASE("omega gradient matches central finite differences on 20 seeded instances") {
    for (int t = 0; t < 20; ++t) {
        Rng rng(100 + static_cast<std::uint64_t>(t));
        std::uniform_int_distribution<int> pick_n(3, 8), pick_d(1, 4);
        const Eigen::Index n = pick_n(rng), d = pick_d(rng);
        Dataset data;
        data.X = random_matrix(n, d, rng);
        data.y = random_vector(n, rng, -2, 2);
        data.column_ranges = unit_ranges(d);
        const BasisSpec spec{BasisDegree::Linear, d};
        GPParams params;
        params.beta = spec.p() <= n ? random_vector(spec.p(), rng, -1, 1)
                                    : Eigen::VectorXd::Zero(spec.p());
        params.omega = random_vector(d, rng, 0.3, 2.0);
        params.tau2 = 0.9;
        params.eta = 0.05;

        const Eigen::VectorXd analytic = grad_negloglik_omega(data, spec, params);
        Eigen::VectorXd fd(d);
        const double h = 1e-5;
        for (Eigen::Index k = 0; k < d; ++k) {
            GPParams up = params, dn = params;
            up.omega(k) += h;
            dn.omega(k) -= h;
            fd(k) = (neg_log_likelihood(data, spec, up) - neg_log_likelihood(data, spec, dn)) /
                    (2.0 * h);
        }
        CHECK((analytic - fd).norm() / fd.norm() <= 1e-5);
    }
}

TEST_CASE("predict interpolates with zero nugget and reverts to the trend far away") {
    Rng rng(55);
    Dataset data;
    data.X = random_matrix(6, 2, rng);
    data.y = random_vector(6, rng, -3, 3);
    data.column_ranges = unit_ranges(2);
    const BasisSpec spec{BasisDegree::Linear, 2};
    GPParams params;
    params.beta = random_vector(3, rng, -1, 1);
    params.omega = random_vector(2, rng, 0.8, 1.4);
    params.tau2 = 2.0;
    params.eta = 0.0;

    const PredictiveResult at_train = predict(data, spec, params, data.X);
    const double sd_y = std::sqrt((data.y.array() - data.y.mean()).square().mean());
    CHECK((at_train.mean - data.y).cwiseAbs().maxCoeff() <= 1e-6 * sd_y);

    Eigen::MatrixXd far(1, 2);
    far << 500.0, -500.0;
    const PredictiveResult out = predict(data, spec, params, far);
    CHECK(out.mean(0) == Approx(expand_basis(far.row(0).transpose(), spec).dot(params.beta))
                             .margin(1e-10));
    CHECK(out.variance(0) == Approx(params.tau2).epsilon(1e-12));
}

TEST_CASE("predict matches the dense-formula oracle") {
    Rng rng(56);
    Dataset data;
    data.X = random_matrix(4, 2, rng);
    data.y = random_vector(4, rng, -2, 2);
    data.column_ranges = unit_ranges(2);
    const BasisSpec spec{BasisDegree::Constant, 2};
    GPParams params;
    params.beta = random_vector(1, rng, -1, 1);
    params.omega = random_vector(2, rng, 0.4, 1.6);
    params.tau2 = 1.3;
    params.eta = 0.2;

    const Eigen::MatrixXd Xq = random_matrix(2, 2, rng);
    const PredictiveResult out = predict(data, spec, params, Xq);

    const Eigen::MatrixXd Minv = dense_cov(data.X, params.omega, params.eta).inverse();
    const Eigen::VectorXd resid = data.y - basis_matrix(data.X, spec) * params.beta;
    for (Eigen::Index m = 0; m < 2; ++m) {
        Eigen::VectorXd kx(4);
        for (Eigen::Index i = 0; i < 4; ++i)
            kx(i) = kernel(Xq.row(m).transpose(), data.X.row(i).transpose(), params.omega);
        const double mu = expand_basis(Xq.row(m).transpose(), spec).dot(params.beta) +
                          kx.dot(Minv * resid);
        const double var = params.tau2 * (1.0 - kx.dot(Minv * kx));
        CHECK(out.mean(m) == Approx(mu).epsilon(1e-8));
        CHECK(out.variance(m) == Approx(var).epsilon(1e-8));
    }
}

TEST_CASE("beta conditional moments") {
    SECTION("constant basis with identity covariance gives the sample mean") {
        Dataset data;
        data.X.resize(3, 1);
        data.X << 0.0, 1e3, 2e3; // kernel underflows to exactly zero off-diagonal
        data.y.resize(3);
        data.y << 1.0, 2.0, 6.0;
        data.column_ranges = {{0.0, 2e3}};
        const BasisSpec spec{BasisDegree::Constant, 1};
        const BetaMoments m =
            beta_conditional_moments(data, spec, Eigen::VectorXd::Ones(1), 2.0, 0.0);
        CHECK(m.mean(0) == Approx(3.0).epsilon(1e-12));
        CHECK(m.cov(0, 0) == Approx(2.0 / 3.0).epsilon(1e-12));
    }

    SECTION("matches an independent GLS computation and scales with tau2") {
        Rng rng(77);
        Dataset data;
        data.X = random_matrix(8, 2, rng);
        data.y = random_vector(8, rng, -2, 2);
        data.column_ranges = unit_ranges(2);
        const BasisSpec spec{BasisDegree::Linear, 2};
        Eigen::VectorXd w(2);
        w << 0.9, 1.4;
        const double eta = 0.15, tau2 = 0.8;

        const BetaMoments m = beta_conditional_moments(data, spec, w, tau2, eta);

        const Eigen::MatrixXd A = dense_cov(data.X, w, eta).inverse();
        const Eigen::MatrixXd G = basis_matrix(data.X, spec);
        const Eigen::MatrixXd GtAG_inv = (G.transpose() * A * G).inverse();
        const Eigen::VectorXd mean = GtAG_inv * G.transpose() * A * data.y;
        CHECK(m.mean.isApprox(mean, 1e-8));
        CHECK(m.cov.isApprox(tau2 * GtAG_inv, 1e-8));

        const BetaMoments m2 = beta_conditional_moments(data, spec, w, 2.0 * tau2, eta);
        CHECK(m2.cov.isApprox(2.0 * m.cov, 1e-12));
        CHECK(m2.mean.isApprox(m.mean, 1e-12));
    }

    SECTION("rank deficiency names the offending columns") {
        Rng rng(78);
        Dataset data;
        data.X = random_matrix(10, 2, rng);
        data.X.col(1) = data.X.col(0); // x2 duplicates x1
        data.y = random_vector(10, rng, -1, 1);
        data.column_ranges = unit_ranges(2);
        const BasisSpec spec{BasisDegree::Linear, 2};
        CHECK_THROWS_AS(
            beta_conditional_moments(data, spec, Eigen::VectorXd::Ones(2), 1.0, 0.1),
            NumericError);
    }
}

TEST_CASE("the GLS mean minimizes the likelihood over beta") {
    Rng rng(79);
    Dataset data;
    data.X = random_matrix(7, 2, rng);
    data.y = random_vector(7, rng, -2, 2);
    data.column_ranges = unit_ranges(2);
    const BasisSpec spec{BasisDegree::Linear, 2};
    Eigen::VectorXd w(2);
    w << 1.1, 0.6;
    const double tau2 = 1.2, eta = 0.1;
    const BetaMoments m = beta_conditional_moments(data, spec, w, tau2, eta);

    GPParams params;
    params.beta = m.mean;
    params.omega = w;
    params.tau2 = tau2;
    params.eta = eta;
    const double at_min = neg_log_likelihood(data, spec, params);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int t = 0; t < 25; ++t) {
        Eigen::VectorXd dir(spec.p());
        for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = gauss(rng);
        GPParams perturbed = params;
        perturbed.beta += 1e-3 * dir.normalized();
        CHECK(neg_log_likelihood(data, spec, perturbed) >= at_min - 1e-9);
    }
}
