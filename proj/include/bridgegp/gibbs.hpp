#ifndef BRIDGEGP_GIBBS_HPP
#define BRIDGEGP_GIBBS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <future>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bridgegp/ball_map.hpp"
#include "bridgegp/basis.hpp"
#include "bridgegp/dataset.hpp"
#include "bridgegp/gp.hpp"
#include "bridgegp/hmc.hpp"
#include "bridgegp/kernel.hpp"
#include "bridgegp/rng.hpp"
#include "bridgegp/sph_hmc.hpp"

namespace bridgegp {

enum class Variant { Sph, Hmc };

inline const char* to_string(Variant v) { return v == Variant::Sph ? "sph" : "hmc"; }

inline Variant variant_from_string(const std::string& s) {
    if (s == "sph") return Variant::Sph;
    if (s == "hmc") return Variant::Hmc;
    throw ArgumentError("unknown variant '" + s + "' (sph|hmc)");
}

/// Prior hyperparameters shared by both samplers plus the bridge exponent q.
struct PriorConfig {
    double q = 1.0;     // bridge exponent, 0 < q <= 2
    double a_eta = 0.5; // Gamma(a_eta, b_eta) prior on the nugget ratio
    double b_eta = 0.5;
    double df_tau2 = 4.0; // Inverse-chi^2 prior on tau^2
    double a_beta = 1.0;  // Inverse-Gamma priors on nu_beta^2, nu_omega^2 (hmc variant)
    double b_beta = 1.0;
    double a_omega = 1.0;
    double b_omega = 1.0;
    double rho = 0.5; // shrinkage ladder ratio for R

    void validate() const {
        if (!(q > 0.0 && q <= 2.0)) throw ArgumentError("PriorConfig: q must be in (0, 2]");
        if (!(a_eta > 0 && b_eta > 0 && df_tau2 > 0 && a_beta > 0 && b_beta > 0 && a_omega > 0 &&
              b_omega > 0))
            throw ArgumentError("PriorConfig: prior hyperparameters must be positive");
        if (!(rho > 0.0 && rho < 1.0)) throw ArgumentError("PriorConfig: rho must be in (0, 1)");
    }
};

/// Diagonal prior correlation R with entry rho^(polynomial order of term j).
struct ShrinkageLadder {
    Eigen::VectorXd diag;

    ShrinkageLadder() = default;
    ShrinkageLadder(const BasisSpec& spec, double rho) {
        const auto orders = spec.term_orders();
        diag.resize(static_cast<Eigen::Index>(orders.size()));
        for (std::size_t j = 0; j < orders.size(); ++j)
            diag(static_cast<Eigen::Index>(j)) = std::pow(rho, orders[j]);
    }

    Eigen::VectorXd inv_diag() const { return diag.cwiseInverse(); }
};

/// Optional initial-state overrides (testing and tail-start experiments).
struct InitOverrides {
    std::optional<Eigen::VectorXd> beta;
    std::optional<Eigen::VectorXd> omega;
    std::optional<double> r_beta, r_omega, tau2, eta, nu_beta2, nu_omega2;
};

struct McmcConfig {
    int burnin = 1600;
    int total = 3000;
    std::uint64_t seed = 1;
    int check_every = 350;       // two-chain convergence check cadence past burnin
    double rhat_threshold = 1.1; // <= 0 disables early stopping
    int L_max_upper = 10;
    double target_accept = 0.8;
    bool jacobian_in_potential = false; // fold the sphere Jacobian into U instead of weights
    double mh_initial_step = 0.1;
    double mh_target_accept = 0.4;

    // per-update toggles; tests freeze conditionals with these
    bool update_beta = true, update_r_beta = true, update_omega = true, update_r_omega = true,
         update_tau2 = true, update_eta = true, update_nu_beta2 = true, update_nu_omega2 = true;

    InitOverrides init;
    std::optional<InitOverrides> init_chain2; // second-chain override (overdispersed starts)
    std::function<void(const char*)> on_update; // order-instrumentation hook

    void validate() const {
        if (burnin < 0 || total < 0 || burnin > total)
            throw ArgumentError("McmcConfig: need 0 <= burnin <= total");
        if (check_every < 1) throw ArgumentError("McmcConfig: check_every must be >= 1");
        if (L_max_upper < 1) throw ArgumentError("McmcConfig: L_max_upper must be >= 1");
    }
};

/// Full parameter state; the sph fields and the hmc fields are both present,
/// only the active variant's set is updated.
struct ChainState {
    Eigen::VectorXd beta;
    Eigen::VectorXd omega;
    Eigen::VectorXd theta_beta, theta_omega; // ball coordinates (sph)
    double r_beta = 1.0, r_omega = 1.0;      // constraint radii (sph)
    double nu_beta2 = 1.0, nu_omega2 = 1.0;  // prior variances (hmc)
    double tau2 = 1.0, eta = 1e-3;
};

struct ChainDiagnostics {
    long attempts_beta = 0, accepts_beta = 0;
    long attempts_omega = 0, accepts_omega = 0;
    long attempts_r_beta = 0, accepts_r_beta = 0;
    long attempts_r_omega = 0, accepts_r_omega = 0;
    long attempts_eta = 0, accepts_eta = 0;
    long divergences_beta = 0, divergences_omega = 0;
    double adapted_eps_beta = 0.0, adapted_eps_omega = 0.0;
    double mh_step_r_beta = 0.0, mh_step_r_omega = 0.0, mh_step_eta = 0.0;
    long jitter_events = 0, weight_floor_events = 0;

    double accept_rate_beta() const {
        return attempts_beta ? double(accepts_beta) / double(attempts_beta) : 0.0;
    }
    double accept_rate_omega() const {
        return attempts_omega ? double(accepts_omega) / double(attempts_omega) : 0.0;
    }
};

/// Retained draws of one chain as a column table. Layout for both variants:
///   beta_1..beta_p, {r_beta | nu_beta2}, omega_1..omega_d,
///   {r_omega | nu_omega2}, tau2, eta, log_weight, loglik
/// log_weight is identically 0 for the hmc variant.
struct ChainTrace {
    Variant variant = Variant::Sph;
    Eigen::Index p = 0, d = 0;
    std::vector<std::string> columns;
    Eigen::MatrixXd values; // retained iterations x columns
    ChainDiagnostics diag;
    bool aborted = false;
    int aborted_at = -1;
    int iterations_run = 0;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index beta_col(Eigen::Index j) const { return j; }
    Eigen::Index scale_beta_col() const { return p; } // r_beta or nu_beta2
    Eigen::Index omega_col(Eigen::Index k) const { return p + 1 + k; }
    Eigen::Index scale_omega_col() const { return p + 1 + d; }
    Eigen::Index tau2_col() const { return p + d + 2; }
    Eigen::Index eta_col() const { return p + d + 3; }
    Eigen::Index log_weight_col() const { return p + d + 4; }
    Eigen::Index loglik_col() const { return p + d + 5; }

    static std::vector<std::string> column_names(Variant variant, Eigen::Index p,
                                                 Eigen::Index d) {
        std::vector<std::string> cols;
        for (Eigen::Index j = 0; j < p; ++j) cols.push_back("beta_" + std::to_string(j + 1));
        cols.push_back(variant == Variant::Sph ? "r_beta" : "nu_beta2");
        for (Eigen::Index k = 0; k < d; ++k) cols.push_back("omega_" + std::to_string(k + 1));
        cols.push_back(variant == Variant::Sph ? "r_omega" : "nu_omega2");
        cols.push_back("tau2");
        cols.push_back("eta");
        cols.push_back("log_weight");
        cols.push_back("loglik");
        return cols;
    }
};

namespace detail {

inline double draw_chi_squared(double dof, Rng& rng) {
    std::chi_squared_distribution<double> chi2(dof);
    return chi2(rng);
}

inline double draw_inverse_gamma(double shape, double rate_b, Rng& rng) {
    std::gamma_distribution<double> gamma(shape, 1.0);
    double g = 0.0;
    do {
        g = gamma(rng);
    } while (g <= 0.0);
    return rate_b / g;
}

/// Robbins-Monro scaling of a log-scale random-walk step toward a target
/// acceptance rate; frozen after burn-in.
struct MhStep {
    double step = 0.1;
    long t = 0;

    void adapt(double accept_prob, double target) {
        ++t;
        const double gain = std::pow(static_cast<double>(t), -0.6);
        step *= std::exp(gain * (accept_prob - target));
        step = std::clamp(step, 1e-6, 1e3);
    }
};

} // namespace detail

/// One MCMC chain for either sampler variant. Owns its RNG stream and all
/// cached matrices; advance() may be driven segment-by-segment so two chains
/// can interleave convergence checks.
class GibbsSampler {
public:
    GibbsSampler(Variant variant, const Dataset& data, const BasisSpec& spec,
                 const PriorConfig& prior, const McmcConfig& mcmc, std::uint64_t chain_seed)
        : variant_(variant), data_(data), spec_(spec), prior_(prior), cfg_(mcmc),
          rng_(chain_seed) {
        data_.validate();
        prior_.validate();
        cfg_.validate();
        if (spec_.d != data_.d()) throw ArgumentError("GibbsSampler: basis dimension mismatch");
        G_ = basis_matrix(data_.X, spec_);
        sqd_ = SquaredDiffs(data_.X);
        ladder_ = ShrinkageLadder(spec_, prior_.rho);
        trace_.variant = variant_;
        trace_.p = spec_.p();
        trace_.d = data_.d();
        trace_.columns = ChainTrace::column_names(variant_, trace_.p, trace_.d);
        trace_.values.resize(std::max(0, cfg_.total - cfg_.burnin),
                             static_cast<Eigen::Index>(trace_.columns.size()));
        initialize();
    }

    /// Run up to `iters` further iterations (capped at the configured total).
    /// Returns false if the chain aborted on an unrecoverable numeric failure.
    bool advance(int iters) {
        for (int k = 0; k < iters && iter_ < cfg_.total && !trace_.aborted; ++k) {
            try {
                iterate();
            } catch (const NumericError&) {
                trace_.aborted = true;
                trace_.aborted_at = iter_ + 1;
                break;
            }
            ++iter_;
            trace_.iterations_run = iter_;
            if (iter_ > cfg_.burnin) record();
            if (iter_ == cfg_.burnin) freeze_adaptation();
        }
        return !trace_.aborted;
    }

    bool finished() const { return trace_.aborted || iter_ >= cfg_.total; }
    int iterations_run() const { return iter_; }

    const ChainTrace& trace() const { return trace_; }
    ChainTrace take_trace() {
        finalize_diag();
        ChainTrace t = trace_;
        t.values.conservativeResize(retained_, Eigen::NoChange);
        return t;
    }

    ChainState& state() { return st_; }
    const ChainState& state() const { return st_; }
    const KernelBundle& bundle() const { return *bundle_; }
    ChainDiagnostics& diag() { return trace_.diag; }
    Rng& rng() { return rng_; }

    void refresh_bundle() { set_bundle(build_bundle(st_.omega, st_.eta)); }

    // --- individual conditional updates (Gibbs steps) ---

    /// SphHMC draw of beta from its truncated-normal conditional.
    void sample_beta_sph() {
        const Eigen::MatrixXd W = bundle_->L.triangularView<Eigen::Lower>().solve(G_);
        const Eigen::MatrixXd GtAG = W.transpose() * W;
        const Eigen::VectorXd GtAy = G_.transpose() * bundle_->solve(data_.y);
        const double tau2 = st_.tau2;
        const double r = st_.r_beta, q = prior_.q;

        TargetFunctions ball_target;
        ball_target.neg_log_density = [&, r, q](const Eigen::VectorXd& th) {
            const Eigen::VectorXd beta = ball_to_param(BallPoint{th, r, q});
            return (beta.dot(GtAG * beta) - 2.0 * beta.dot(GtAy)) / (2.0 * tau2);
        };
        ball_target.grad_neg_log_density = [&, r, q](const Eigen::VectorXd& th) {
            const BallPoint b{th, r, q};
            const Eigen::VectorXd beta = ball_to_param(b);
            const Eigen::VectorXd grad_beta = (GtAG * beta - GtAy) / tau2;
            return (dparam_dball_diag(b).array() * grad_beta.array()).matrix().eval();
        };

        maybe_init_eps_beta(ball_target);
        const SphHmcResult res = sph_hmc_iteration(
            st_.theta_beta, ball_target, r, q, eps_beta_, cfg_.L_max_upper, rng_,
            cfg_.jacobian_in_potential, &trace_.diag.weight_floor_events);
        ++trace_.diag.attempts_beta;
        if (res.accepted) ++trace_.diag.accepts_beta;
        if (res.divergent) ++trace_.diag.divergences_beta;
        st_.theta_beta = res.theta;
        st_.beta = ball_to_param(BallPoint{st_.theta_beta, r, q});
        adapt_eps_beta(res.accept_prob);
    }

    /// MH on log r_beta; beta is re-derived from the ball point afterwards.
    void sample_r_beta() {
        const Eigen::VectorXd u = ball_to_param(BallPoint{st_.theta_beta, 1.0, prior_.q});
        const Eigen::VectorXd Gu = G_ * u;
        const double a = bundle_->L.triangularView<Eigen::Lower>().solve(Gu).squaredNorm();
        const double c = Gu.dot(bundle_->solve(data_.y));
        const auto neg_log_target = [&](double r) {
            return (r * r * a - 2.0 * r * c) / (2.0 * st_.tau2);
        };

        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const double r_cur = st_.r_beta;
        const double r_prop = r_cur * std::exp(mh_r_beta_.step * gauss(rng_));
        // flat prior on (0, inf); proposal Jacobian ratio r'/r from the log scale
        const double log_alpha =
            neg_log_target(r_cur) - neg_log_target(r_prop) + std::log(r_prop / r_cur);
        const double alpha = std::min(1.0, std::exp(log_alpha));
        ++trace_.diag.attempts_r_beta;
        if (unif(rng_) < alpha) {
            st_.r_beta = r_prop;
            ++trace_.diag.accepts_r_beta;
        }
        st_.beta = ball_to_param(BallPoint{st_.theta_beta, st_.r_beta, prior_.q});
        if (iter_ < cfg_.burnin) mh_r_beta_.adapt(alpha, cfg_.mh_target_accept);
    }

    /// SphHMC draw of omega from its constrained conditional (determinant term
    /// included); kernel bundles along the trajectory are memoized.
    void sample_omega_sph() {
        const Eigen::VectorXd resid = data_.y - G_ * st_.beta;
        const double tau2 = st_.tau2, eta = st_.eta;
        const double r = st_.r_omega, q = prior_.q;
        auto memo = std::make_shared<BundleMemo>();

        TargetFunctions ball_target;
        ball_target.neg_log_density = [this, memo, resid, tau2, eta, r, q](
                                          const Eigen::VectorXd& th) {
            const Eigen::VectorXd omega = ball_to_param(BallPoint{th, r, q});
            const KernelBundle* b = memo_bundle(*memo, omega, eta);
            if (!b) return std::numeric_limits<double>::infinity();
            return 0.5 * b->logdet + b->quad_form(resid) / (2.0 * tau2);
        };
        ball_target.grad_neg_log_density = [this, memo, resid, tau2, eta, r, q](
                                               const Eigen::VectorXd& th) {
            const BallPoint bp{th, r, q};
            const Eigen::VectorXd omega = ball_to_param(bp);
            const KernelBundle* b = memo_bundle(*memo, omega, eta);
            if (!b)
                return Eigen::VectorXd::Constant(th.size(),
                                                 std::numeric_limits<double>::quiet_NaN())
                    .eval();
            const Eigen::VectorXd grad_omega =
                grad_negloglik_omega_with(*b, sqd_, omega, resid, tau2);
            return (dparam_dball_diag(bp).array() * grad_omega.array()).matrix().eval();
        };

        maybe_init_eps_omega(ball_target);
        const SphHmcResult res = sph_hmc_iteration(
            st_.theta_omega, ball_target, r, q, eps_omega_, cfg_.L_max_upper, rng_,
            cfg_.jacobian_in_potential, &trace_.diag.weight_floor_events);
        ++trace_.diag.attempts_omega;
        if (res.accepted) ++trace_.diag.accepts_omega;
        if (res.divergent) ++trace_.diag.divergences_omega;
        if (res.accepted) {
            st_.theta_omega = res.theta;
            st_.omega = ball_to_param(BallPoint{st_.theta_omega, r, q});
            const KernelBundle* b = memo_bundle(*memo, st_.omega, eta);
            if (b)
                set_bundle(*b);
            else
                refresh_bundle();
        }
        adapt_eps_omega(res.accept_prob);
    }

    /// MH on log r_omega; the kernel matrix depends on r_omega through
    /// omega = r_omega * sgn(theta) |theta|^{2/q}.
    void sample_r_omega() {
        const Eigen::VectorXd resid = data_.y - G_ * st_.beta;
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);

        const double r_cur = st_.r_omega;
        const double r_prop = r_cur * std::exp(mh_r_omega_.step * gauss(rng_));
        const double f_cur = 0.5 * bundle_->logdet + bundle_->quad_form(resid) / (2.0 * st_.tau2);

        double alpha = 0.0;
        std::optional<KernelBundle> cand;
        try {
            const Eigen::VectorXd omega_prop =
                ball_to_param(BallPoint{st_.theta_omega, r_prop, prior_.q});
            cand = build_bundle(omega_prop, st_.eta);
            const double f_prop =
                0.5 * cand->logdet + cand->quad_form(resid) / (2.0 * st_.tau2);
            alpha = std::min(1.0, std::exp(f_cur - f_prop + std::log(r_prop / r_cur)));
        } catch (const NumericError&) {
            alpha = 0.0; // unbuildable proposal is rejected
        }
        ++trace_.diag.attempts_r_omega;
        if (cand && unif(rng_) < alpha) {
            st_.r_omega = r_prop;
            st_.omega = ball_to_param(BallPoint{st_.theta_omega, st_.r_omega, prior_.q});
            set_bundle(std::move(*cand));
            ++trace_.diag.accepts_r_omega;
        }
        if (iter_ < cfg_.burnin) mh_r_omega_.adapt(alpha, cfg_.mh_target_accept);
    }

    /// Exact Scaled-Inverse-chi^2 draw: tau^2 = (1 + S_n^2) / chi^2_{df+n}.
    void sample_tau2() {
        const Eigen::VectorXd resid = data_.y - G_ * st_.beta;
        const double S2 = bundle_->quad_form(resid);
        if (!std::isfinite(S2)) throw NumericError("sample_tau2: non-finite S^2");
        const double dof = prior_.df_tau2 + static_cast<double>(data_.n());
        st_.tau2 = (1.0 + S2) / detail::draw_chi_squared(dof, rng_);
    }

    /// MH on log eta against Gamma-prior x likelihood (determinant included).
    void sample_eta() {
        const Eigen::VectorXd resid = data_.y - G_ * st_.beta;
        const auto neg_log_target = [&](double eta, const KernelBundle& b) {
            return (1.0 - prior_.a_eta) * std::log(eta) + prior_.b_eta * eta + 0.5 * b.logdet +
                   b.quad_form(resid) / (2.0 * st_.tau2);
        };
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);

        const double eta_cur = st_.eta;
        const double eta_prop = eta_cur * std::exp(mh_eta_.step * gauss(rng_));
        const double f_cur = neg_log_target(eta_cur, *bundle_);

        double alpha = 0.0;
        std::optional<KernelBundle> cand;
        try {
            cand = build_bundle_from_K(bundle_->K, eta_prop);
            trace_.diag.jitter_events += cand->jitter_retries > 0 ? 1 : 0;
            const double f_prop = neg_log_target(eta_prop, *cand);
            alpha = std::min(1.0, std::exp(f_cur - f_prop + std::log(eta_prop / eta_cur)));
        } catch (const NumericError&) {
            alpha = 0.0;
        }
        ++trace_.diag.attempts_eta;
        if (cand && unif(rng_) < alpha) {
            st_.eta = eta_prop;
            bundle_ = std::make_shared<const KernelBundle>(std::move(*cand));
            ++trace_.diag.accepts_eta;
        }
        if (iter_ < cfg_.burnin) mh_eta_.adapt(alpha, cfg_.mh_target_accept);
    }

    /// Exact MVN draw of beta for the hmc variant (ridge-regularized GLS).
    void sample_beta_hmc() {
        const Eigen::MatrixXd W = bundle_->L.triangularView<Eigen::Lower>().solve(G_);
        Eigen::MatrixXd precision = (W.transpose() * W) / st_.tau2;
        precision.diagonal() += ladder_.inv_diag() / st_.nu_beta2;
        const Eigen::LLT<Eigen::MatrixXd> llt(precision);
        if (llt.info() != Eigen::Success)
            throw NumericError("sample_beta_hmc: precision factorization failed");
        const Eigen::VectorXd GtAy = G_.transpose() * bundle_->solve(data_.y);
        const Eigen::VectorXd mean = llt.solve(GtAy / st_.tau2);
        Eigen::VectorXd z(spec_.p());
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = gauss(rng_);
        // beta = mean + L^{-T} z has covariance precision^{-1}
        st_.beta = mean + llt.matrixU().solve(z);
    }

    void sample_nu_beta2() {
        const double quad = st_.beta.dot((ladder_.inv_diag().array() * st_.beta.array()).matrix());
        st_.nu_beta2 = detail::draw_inverse_gamma(prior_.a_beta + 0.5 * double(spec_.p()),
                                                  0.5 * quad + prior_.b_beta, rng_);
    }

    /// Euclidean HMC draw of omega with the Gaussian shrinkage prior.
    void sample_omega_hmc() {
        const Eigen::VectorXd resid = data_.y - G_ * st_.beta;
        const double tau2 = st_.tau2, eta = st_.eta, nu2 = st_.nu_omega2;
        auto memo = std::make_shared<BundleMemo>();

        TargetFunctions target;
        target.neg_log_density = [this, memo, resid, tau2, eta, nu2](const Eigen::VectorXd& w) {
            const KernelBundle* b = memo_bundle(*memo, w, eta);
            if (!b) return std::numeric_limits<double>::infinity();
            return 0.5 * b->logdet + b->quad_form(resid) / (2.0 * tau2) +
                   w.squaredNorm() / (2.0 * nu2);
        };
        target.grad_neg_log_density = [this, memo, resid, tau2, eta, nu2](
                                          const Eigen::VectorXd& w) {
            const KernelBundle* b = memo_bundle(*memo, w, eta);
            if (!b)
                return Eigen::VectorXd::Constant(w.size(),
                                                 std::numeric_limits<double>::quiet_NaN())
                    .eval();
            return (grad_negloglik_omega_with(*b, sqd_, w, resid, tau2) + w / nu2).eval();
        };

        maybe_init_eps_omega(target, /*on_ball=*/false);
        HmcConfig hc;
        hc.L_max_upper = cfg_.L_max_upper;
        const HmcResult res = hmc_iteration(st_.omega, target, hc, eps_omega_, rng_);
        ++trace_.diag.attempts_omega;
        if (res.accepted) ++trace_.diag.accepts_omega;
        if (res.divergent) ++trace_.diag.divergences_omega;
        if (res.accepted) {
            st_.omega = res.theta;
            const KernelBundle* b = memo_bundle(*memo, st_.omega, eta);
            if (b)
                set_bundle(*b);
            else
                refresh_bundle();
        }
        adapt_eps_omega(res.accept_prob);
    }

    void sample_nu_omega2() {
        st_.nu_omega2 = detail::draw_inverse_gamma(prior_.a_omega + 0.5 * double(data_.d()),
                                                   0.5 * st_.omega.squaredNorm() + prior_.b_omega,
                                                   rng_);
    }

    /// Negative log-likelihood of the current state (used for the R-hat trace).
    double current_loglik() const {
        return -neg_log_likelihood_with(*bundle_, G_, data_.y, st_.beta, st_.tau2);
    }

    double current_log_weight(long* floored = nullptr) const {
        if (variant_ != Variant::Sph || cfg_.jacobian_in_potential) return 0.0;
        return log_jacobian_weight(BallPoint{st_.theta_beta, st_.r_beta, prior_.q}, floored) +
               log_jacobian_weight(BallPoint{st_.theta_omega, st_.r_omega, prior_.q}, floored);
    }

private:
    struct BundleMemo {
        Eigen::VectorXd omega;
        double eta = -1.0;
        std::shared_ptr<const KernelBundle> bundle;
    };

    const KernelBundle* memo_bundle(BundleMemo& memo, const Eigen::VectorXd& omega, double eta) {
        if (memo.bundle && memo.eta == eta && memo.omega.size() == omega.size() &&
            memo.omega == omega)
            return memo.bundle.get();
        try {
            memo.bundle = std::make_shared<const KernelBundle>(build_bundle(omega, eta));
        } catch (const NumericError&) {
            memo.bundle.reset();
            return nullptr;
        }
        memo.omega = omega;
        memo.eta = eta;
        return memo.bundle.get();
    }

    KernelBundle build_bundle(const Eigen::VectorXd& omega, double eta) {
        KernelBundle b = build_kernel_bundle(sqd_, omega, eta);
        if (b.jitter_retries > 0) ++trace_.diag.jitter_events;
        return b;
    }

    void set_bundle(KernelBundle b) { bundle_ = std::make_shared<const KernelBundle>(std::move(b)); }

    void initialize() {
        const Eigen::Index p = spec_.p(), d = data_.d();
        st_.omega = Eigen::VectorXd::Ones(d);
        st_.eta = 1e-3;
        const double n = static_cast<double>(data_.n());
        const double var_y =
            n > 1 ? (data_.y.array() - data_.y.mean()).square().sum() / (n - 1.0) : 1.0;
        st_.tau2 = var_y > 0.0 ? var_y : 1.0;

        if (cfg_.init.omega) st_.omega = *cfg_.init.omega;
        if (cfg_.init.eta) st_.eta = *cfg_.init.eta;
        if (cfg_.init.tau2) st_.tau2 = *cfg_.init.tau2;
        refresh_bundle();

        Eigen::VectorXd beta0;
        if (cfg_.init.beta) {
            beta0 = *cfg_.init.beta;
        } else if (p <= data_.n()) {
            beta0 = beta_conditional_moments_with(*bundle_, G_, data_.y, st_.tau2, &spec_).mean;
        } else {
            beta0 = Eigen::VectorXd::Zero(p);
        }

        if (variant_ == Variant::Sph) {
            const double q = prior_.q;
            st_.r_beta = cfg_.init.r_beta ? *cfg_.init.r_beta
                                          : std::max(2.0 * lq_norm(beta0, q), 1e-3);
            if (lq_norm(beta0, q) > st_.r_beta)
                beta0 *= 0.9 * st_.r_beta / lq_norm(beta0, q);
            st_.beta = beta0;
            st_.theta_beta = param_to_ball(st_.beta, st_.r_beta, q).theta;

            st_.r_omega = cfg_.init.r_omega ? *cfg_.init.r_omega
                                            : std::max(2.0 * lq_norm(st_.omega, q), 1e-3);
            if (lq_norm(st_.omega, q) > st_.r_omega)
                st_.omega *= 0.9 * st_.r_omega / lq_norm(st_.omega, q);
            st_.theta_omega = param_to_ball(st_.omega, st_.r_omega, q).theta;
        } else {
            st_.beta = beta0;
            st_.nu_beta2 = cfg_.init.nu_beta2 ? *cfg_.init.nu_beta2 : 1.0;
            st_.nu_omega2 = cfg_.init.nu_omega2 ? *cfg_.init.nu_omega2 : 1.0;
        }

        mh_r_beta_.step = mh_r_omega_.step = mh_eta_.step = cfg_.mh_initial_step;
    }

    void iterate() {
        const auto note = [&](const char* step) {
            if (cfg_.on_update) cfg_.on_update(step);
        };
        if (variant_ == Variant::Sph) {
            if (cfg_.update_beta) { sample_beta_sph(); note("beta"); }
            if (cfg_.update_r_beta) { sample_r_beta(); note("r_beta"); }
            if (cfg_.update_omega) { sample_omega_sph(); note("omega"); }
            if (cfg_.update_r_omega) { sample_r_omega(); note("r_omega"); }
            if (cfg_.update_tau2) { sample_tau2(); note("tau2"); }
            if (cfg_.update_eta) { sample_eta(); note("eta"); }
        } else {
            if (cfg_.update_beta) { sample_beta_hmc(); note("beta"); }
            if (cfg_.update_nu_beta2) { sample_nu_beta2(); note("nu_beta2"); }
            if (cfg_.update_omega) { sample_omega_hmc(); note("omega"); }
            if (cfg_.update_nu_omega2) { sample_nu_omega2(); note("nu_omega2"); }
            if (cfg_.update_tau2) { sample_tau2(); note("tau2"); }
            if (cfg_.update_eta) { sample_eta(); note("eta"); }
        }
    }

    void record() {
        Eigen::Index row = retained_++;
        auto& v = trace_.values;
        v.block(row, 0, 1, spec_.p()) = st_.beta.transpose();
        v(row, trace_.scale_beta_col()) = variant_ == Variant::Sph ? st_.r_beta : st_.nu_beta2;
        v.block(row, trace_.omega_col(0), 1, data_.d()) = st_.omega.transpose();
        v(row, trace_.scale_omega_col()) = variant_ == Variant::Sph ? st_.r_omega : st_.nu_omega2;
        v(row, trace_.tau2_col()) = st_.tau2;
        v(row, trace_.eta_col()) = st_.eta;
        v(row, trace_.log_weight_col()) = current_log_weight(&trace_.diag.weight_floor_events);
        v(row, trace_.loglik_col()) = current_loglik();
    }

    void maybe_init_eps_beta(const TargetFunctions& ball_target) {
        if (eps_beta_ > 0.0) return;
        double eps = heuristic_initial_step(st_.theta_beta, ball_target, rng_);
        eps = std::min(eps, 1.0); // step is an arc length on the sphere
        da_beta_ = DualAveragingState::init(eps);
        eps_beta_ = eps;
    }

    void maybe_init_eps_omega(const TargetFunctions& target, bool on_ball = true) {
        if (eps_omega_ > 0.0) return;
        double eps = heuristic_initial_step(on_ball ? st_.theta_omega : st_.omega, target, rng_);
        if (on_ball) eps = std::min(eps, 1.0);
        da_omega_ = DualAveragingState::init(eps);
        eps_omega_ = eps;
    }

    void adapt_eps_beta(double accept_prob) {
        if (iter_ >= cfg_.burnin) return;
        da_beta_ = adapt_step_size(da_beta_, accept_prob, cfg_.target_accept);
        eps_beta_ = da_beta_.current_eps();
    }

    void adapt_eps_omega(double accept_prob) {
        if (iter_ >= cfg_.burnin) return;
        da_omega_ = adapt_step_size(da_omega_, accept_prob, cfg_.target_accept);
        eps_omega_ = da_omega_.current_eps();
    }

    void freeze_adaptation() {
        if (da_beta_.t > 0) eps_beta_ = da_beta_.adapted_eps();
        if (da_omega_.t > 0) eps_omega_ = da_omega_.adapted_eps();
        trace_.diag.adapted_eps_beta = eps_beta_;
        trace_.diag.adapted_eps_omega = eps_omega_;
    }

    void finalize_diag() {
        trace_.diag.mh_step_r_beta = mh_r_beta_.step;
        trace_.diag.mh_step_r_omega = mh_r_omega_.step;
        trace_.diag.mh_step_eta = mh_eta_.step;
        if (trace_.diag.adapted_eps_beta == 0.0) trace_.diag.adapted_eps_beta = eps_beta_;
        if (trace_.diag.adapted_eps_omega == 0.0) trace_.diag.adapted_eps_omega = eps_omega_;
    }

    Variant variant_;
    Dataset data_;
    BasisSpec spec_;
    PriorConfig prior_;
    McmcConfig cfg_;
    Rng rng_;

    Eigen::MatrixXd G_;
    SquaredDiffs sqd_;
    ShrinkageLadder ladder_;
    std::shared_ptr<const KernelBundle> bundle_;

    ChainState st_;
    ChainTrace trace_;
    Eigen::Index retained_ = 0;
    int iter_ = 0;

    double eps_beta_ = 0.0, eps_omega_ = 0.0;
    DualAveragingState da_beta_, da_omega_;
    detail::MhStep mh_r_beta_, mh_r_omega_, mh_eta_;
};

/// Split-R-hat over M scalar chains (each split in half).
inline double split_rhat(const std::vector<Eigen::VectorXd>& chains) {
    std::vector<Eigen::VectorXd> halves;
    for (const auto& c : chains) {
        const Eigen::Index half = c.size() / 2;
        if (half < 2) return std::numeric_limits<double>::infinity();
        halves.push_back(c.head(half));
        halves.push_back(c.segment(c.size() - half, half));
    }
    const double N = static_cast<double>(halves.front().size());
    const double M = static_cast<double>(halves.size());
    double W = 0.0;
    Eigen::VectorXd means(halves.size());
    for (std::size_t j = 0; j < halves.size(); ++j) {
        const double m = halves[j].mean();
        means(static_cast<Eigen::Index>(j)) = m;
        W += (halves[j].array() - m).square().sum() / (N - 1.0);
    }
    W /= M;
    const double grand = means.mean();
    const double B = N * (means.array() - grand).square().sum() / (M - 1.0);
    if (W < 1e-300) return 1.0;
    const double var_plus = (N - 1.0) / N * W + B / N;
    return std::sqrt(var_plus / W);
}

/// Single chain, full length.
inline ChainTrace run_chain(Variant variant, const Dataset& data, const BasisSpec& spec,
                            const PriorConfig& prior, const McmcConfig& mcmc) {
    GibbsSampler sampler(variant, data, spec, prior, mcmc, mcmc.seed);
    sampler.advance(mcmc.total);
    return sampler.take_trace();
}

struct TwoChainResult {
    ChainTrace chain1, chain2;
    int converged_at = 0; // iteration at which the early-stop criterion fired (or total)
    bool stopped_early = false;
    bool degraded = false; // one chain aborted
};

/// Two chains with independent derived seeds, advanced in lockstep segments;
/// split-R-hat on the log-likelihood trace decides early stopping.
inline TwoChainResult run_two_chains(Variant variant, const Dataset& data, const BasisSpec& spec,
                                     const PriorConfig& prior, const McmcConfig& mcmc) {
    McmcConfig cfg1 = mcmc, cfg2 = mcmc;
    cfg1.seed = derive_seed(mcmc.seed, 1);
    cfg2.seed = derive_seed(mcmc.seed, 2);
    if (mcmc.init_chain2) cfg2.init = *mcmc.init_chain2;
    GibbsSampler s1(variant, data, spec, prior, cfg1, cfg1.seed);
    GibbsSampler s2(variant, data, spec, prior, cfg2, cfg2.seed);

    const auto advance_both = [&](int iters) {
        auto f1 = std::async(std::launch::async, [&] { return s1.advance(iters); });
        const bool ok2 = s2.advance(iters);
        const bool ok1 = f1.get();
        return ok1 && ok2;
    };

    TwoChainResult out;
    bool ok = advance_both(mcmc.burnin);
    out.converged_at = mcmc.total;
    while (ok && !s1.finished() && !s2.finished()) {
        ok = advance_both(mcmc.check_every);
        if (!ok) break;
        if (mcmc.rhat_threshold <= 0.0) continue;
        const Eigen::Index n1 = s1.trace().rows(), n2 = s2.trace().rows();
        const Eigen::Index m = std::min(std::min(s1.iterations_run() - mcmc.burnin,
                                                 s2.iterations_run() - mcmc.burnin),
                                        static_cast<int>(std::min(n1, n2)));
        if (m < 4) continue;
        const Eigen::Index col = s1.trace().loglik_col();
        const double rhat = split_rhat({s1.trace().values.col(col).head(m).eval(),
                                        s2.trace().values.col(col).head(m).eval()});
        if (rhat < mcmc.rhat_threshold) {
            out.converged_at = s1.iterations_run();
            out.stopped_early = true;
            break;
        }
    }
    out.degraded = s1.trace().aborted || s2.trace().aborted;
    if (!out.stopped_early && !out.degraded) out.converged_at = std::max(s1.iterations_run(), s2.iterations_run());
    out.chain1 = s1.take_trace();
    out.chain2 = s2.take_trace();
    return out;
}

} // namespace bridgegp

#endif
