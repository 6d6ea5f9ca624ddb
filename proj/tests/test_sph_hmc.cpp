#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "bridgegp/ball_map.hpp"
#include "bridgegp/sph_hmc.hpp"

using namespace bridgegp;
using Catch::Approx;

namespace {

TargetFunctions flat_ball_target(Eigen::Index d) {
    TargetFunctions t;
    t.neg_log_density = [](const Eigen::VectorXd&) { return 0.0; };
    t.grad_neg_log_density = [d](const Eigen::VectorXd&) {
        return Eigen::VectorXd::Zero(d).eval();
    };
    return t;
}

} // namespace

TEST_CASE("tangent projection") {
    Eigen::VectorXd e3 = Eigen::VectorXd::Unit(3, 2);

    CHECK(project_tangent(e3, (2.5 * e3).eval()).norm() == Approx(0.0).margin(1e-15));

    Eigen::VectorXd orth(3);
    orth << 1.0, -2.0, 0.0;
    CHECK(project_tangent(e3, orth).isApprox(orth, 1e-15));

    Eigen::VectorXd g(3);
    g << 1.0, 2.0, 3.0;
    Eigen::VectorXd want(3);
    want << 1.0, 2.0, 0.0;
    CHECK(project_tangent(e3, g).isApprox(want, 1e-15));
}

TEST_CASE("geodesic update special cases") {
    SECTION("zero velocity is the identity") {
        SphState s;
        s.theta_tilde = Eigen::VectorXd::Unit(3, 0);
        s.v_tilde = Eigen::VectorXd::Zero(3);
        const SphState out = geodesic_update(s, 0.7);
        CHECK(out.theta_tilde.isApprox(s.theta_tilde, 1e-15));
        CHECK(out.v_tilde.norm() == 0.0);
    }

    SECTION("full rotation returns to the start") {
        SphState s;
        s.theta_tilde = Eigen::VectorXd::Unit(3, 0);
        s.v_tilde = 2.0 * Eigen::VectorXd::Unit(3, 1);
        const SphState out = geodesic_update(s, std::numbers::pi); // ||v|| eps = 2 pi
        CHECK((out.theta_tilde - s.theta_tilde).norm() <= 1e-9);
        CHECK((out.v_tilde - s.v_tilde).norm() <= 1e-9);
    }

    SECTION("quarter circle in R^2 (d = 1)") {
        SphState s;
        s.theta_tilde = Eigen::VectorXd::Unit(2, 0);
        s.v_tilde = Eigen::VectorXd::Unit(2, 1);
        const SphState out = geodesic_update(s, std::numbers::pi / 2.0);
        CHECK(out.theta_tilde.isApprox(Eigen::VectorXd::Unit(2, 1), 1e-12));
        CHECK(out.v_tilde.isApprox((-Eigen::VectorXd::Unit(2, 0)).eval(), 1e-12));
    }
}

TEST_CASE("geodesic update conserves the norm and tangency") {
    Rng rng(9);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int t = 0; t < 500; ++t) {
        Eigen::VectorXd tt(4), v(4);
        for (int i = 0; i < 4; ++i) {
            tt(i) = gauss(rng);
            v(i) = gauss(rng);
        }
        SphState s;
        s.theta_tilde = tt / tt.norm();
        s.v_tilde = project_tangent(s.theta_tilde, v);
        const double speed = s.v_tilde.norm();
        const SphState out = geodesic_update(s, 0.31);
        CHECK(std::abs(out.theta_tilde.norm() - 1.0) <= 1e-12);
        CHECK(std::abs(out.theta_tilde.dot(out.v_tilde)) <= 1e-10);
        CHECK(out.v_tilde.norm() == Approx(speed).epsilon(1e-10));
    }
}

TEST_CASE("free motion on the sphere is accepted with probability one") {
    Rng rng(17);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
    const TargetFunctions t = flat_ball_target(2);
    long accepted = 0;
    const int iters = 5000;
    for (int i = 0; i < iters; ++i) {
        const SphHmcResult r = sph_hmc_iteration(theta, t, 1.0, 2.0, 0.6, 10, rng);
        CHECK(r.accept_prob == Approx(1.0).margin(1e-12));
        accepted += r.accepted ? 1 : 0;
        theta = r.theta;
    }
    CHECK(accepted == iters);
}

TEST_CASE("uniform-on-ball calibration after importance reweighting") {
    // q = 2 with unit radius makes the ball map the identity, so the weighted
    // dropped-coordinate draws must be uniform on the unit ball:
    // E||theta||^2 = d / (d + 2).
    for (const Eigen::Index d : {1, 2, 3}) {
        Rng rng(700 + static_cast<std::uint64_t>(d));
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
        const TargetFunctions t = flat_ball_target(d);
        const int iters = 50000;
        double sw = 0.0, swn2 = 0.0;
        Eigen::VectorXd swx = Eigen::VectorXd::Zero(d);
        for (int i = 0; i < iters; ++i) {
            const SphHmcResult r = sph_hmc_iteration(theta, t, 1.0, 2.0, 0.6, 10, rng);
            theta = r.theta;
            CHECK(theta.norm() <= 1.0 + 1e-12);
            const double w = std::exp(r.log_weight);
            sw += w;
            swx += w * theta;
            swn2 += w * theta.squaredNorm();
        }
        const double expect = double(d) / double(d + 2);
        CHECK(std::abs(swn2 / sw - expect) <= 0.02);
        for (Eigen::Index k = 0; k < d; ++k) CHECK(std::abs(swx(k) / sw) <= 0.02);
    }
}

TEST_CASE("every draw respects the lq constraint after mapping") {
    Rng rng(23);
    const double q = 0.8, r = 1.7;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(3);
    const TargetFunctions t = flat_ball_target(3);
    for (int i = 0; i < 2000; ++i) {
        const SphHmcResult res = sph_hmc_iteration(theta, t, r, q, 0.5, 10, rng);
        theta = res.theta;
        CHECK(theta.norm() <= 1.0 + 1e-10);
        CHECK(lq_norm(ball_to_param(BallPoint{theta, r, q}), q) <= r + 1e-10);
    }
}

TEST_CASE("folding the jacobian into the potential gives the same ball law") {
    Rng rng(29);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
    const TargetFunctions t = flat_ball_target(2);
    double sn2 = 0.0;
    const int iters = 60000;
    for (int i = 0; i < iters; ++i) {
        const SphHmcResult r =
            sph_hmc_iteration(theta, t, 1.0, 2.0, 0.4, 10, rng, /*jacobian_in_potential=*/true);
        CHECK(r.log_weight == 0.0);
        theta = r.theta;
        sn2 += theta.squaredNorm();
    }
    CHECK(std::abs(sn2 / iters - 0.5) <= 0.03);
}

TEST_CASE("divergent trajectories re-emit the previous state and weight") {
    TargetFunctions wall;
    wall.neg_log_density = [](const Eigen::VectorXd& th) {
        return th(0) > 0.05 ? std::numeric_limits<double>::infinity() : 0.0;
    };
    wall.grad_neg_log_density = [](const Eigen::VectorXd& th) {
        return Eigen::VectorXd::Zero(th.size()).eval();
    };
    Rng rng(31);
    Eigen::VectorXd theta(2);
    theta << 0.0, 0.3;
    int divergent = 0;
    for (int i = 0; i < 200; ++i) {
        const SphHmcResult r = sph_hmc_iteration(theta, wall, 1.0, 2.0, 0.8, 10, rng);
        if (r.divergent) {
            ++divergent;
            CHECK((r.theta.array() == theta.array()).all());
            CHECK(r.log_weight ==
                  Approx(log_jacobian_weight(BallPoint{theta, 1.0, 2.0})).margin(1e-14));
        }
        theta = r.theta;
        CHECK(theta(0) <= 0.05);
    }
    CHECK(divergent > 0);
}
