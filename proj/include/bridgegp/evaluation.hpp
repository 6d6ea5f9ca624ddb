#ifndef BRIDGEGP_EVALUATION_HPP
#define BRIDGEGP_EVALUATION_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "bridgegp/benchmarks.hpp"
#include "bridgegp/dataset.hpp"
#include "bridgegp/gibbs.hpp"
#include "bridgegp/gp.hpp"

namespace bridgegp {

/// RMSE(y, yhat) / sd(y) with the 1/n variance convention.
inline double standardized_rmse(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
    if (y_true.size() != y_pred.size()) throw ArgumentError("standardized_rmse: length mismatch");
    if (y_true.size() < 2) throw ArgumentError("standardized_rmse: need at least 2 points");
    const double ss_err = (y_true - y_pred).squaredNorm();
    const double ss_tot = (y_true.array() - y_true.mean()).square().sum();
    if (!(ss_tot > 0.0))
        throw ArgumentError("standardized_rmse: constant y_true, metric undefined");
    return std::sqrt(ss_err / ss_tot);
}

/// Weighted quantile by cumulative-normalized-weight inversion: the smallest
/// sample value whose cumulative weight reaches prob.
inline double weighted_quantile(const Eigen::VectorXd& values, const Eigen::VectorXd& weights,
                                double prob) {
    if (values.size() == 0) throw ArgumentError("weighted_quantile: empty sample");
    if (values.size() != weights.size())
        throw ArgumentError("weighted_quantile: size mismatch");
    const double total = weights.sum();
    if (!(total > 0.0)) throw ArgumentError("weighted_quantile: weights sum to zero");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(values.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::sort(idx.begin(), idx.end(),
              [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
    const double target = std::clamp(prob, 0.0, 1.0) * total;
    double cum = 0.0;
    for (const Eigen::Index i : idx) {
        cum += weights(i);
        if (cum >= target) return values(i);
    }
    return values(idx.back());
}

struct ParamSummary {
    std::string name;
    double mean = 0.0, median = 0.0, q025 = 0.0, q975 = 0.0;
    bool significant = false; // 0 outside the central 95% interval
};

struct PosteriorSummary {
    std::vector<ParamSummary> params;
    double ess = 0.0; // (sum w)^2 / sum w^2 over pooled retained draws
    long n_retained = 0;
    double accept_rate_beta = 0.0, accept_rate_omega = 0.0;
    long divergences = 0;

    const ParamSummary& by_name(const std::string& name) const {
        for (const auto& p : params)
            if (p.name == name) return p;
        throw ArgumentError("PosteriorSummary: no parameter named '" + name + "'");
    }
};

namespace detail {

/// Pool retained rows of several chains; returns (values, normalized weights).
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> pool_traces(
    const std::vector<const ChainTrace*>& traces) {
    if (traces.empty()) throw ArgumentError("pool_traces: no chains");
    Eigen::Index rows = 0;
    for (const auto* t : traces) rows += t->values.rows();
    if (rows == 0) throw ArgumentError("pool_traces: empty retained trace");
    const Eigen::Index cols = traces.front()->values.cols();
    Eigen::MatrixXd pooled(rows, cols);
    Eigen::VectorXd log_w(rows);
    Eigen::Index at = 0;
    for (const auto* t : traces) {
        if (t->values.cols() != cols) throw ArgumentError("pool_traces: column mismatch");
        pooled.middleRows(at, t->values.rows()) = t->values;
        log_w.segment(at, t->values.rows()) = t->values.col(t->log_weight_col());
        at += t->values.rows();
    }
    const double m = log_w.maxCoeff();
    Eigen::VectorXd w = (log_w.array() - m).exp();
    const double total = w.sum();
    if (!(total > 0.0) || !std::isfinite(total))
        throw ArgumentError("pool_traces: weights sum to zero");
    return {std::move(pooled), w / total};
}

} // namespace detail

/// Importance-weighted posterior summaries over the pooled retained draws of
/// one or more chains (weights are identically 1 for the hmc variant).
inline PosteriorSummary summarize(const std::vector<const ChainTrace*>& traces) {
    auto [pooled, w] = detail::pool_traces(traces);
    const ChainTrace& ref = *traces.front();

    PosteriorSummary out;
    out.n_retained = pooled.rows();
    out.ess = 1.0 / w.squaredNorm(); // weights already sum to one

    long attempts_b = 0, accepts_b = 0, attempts_o = 0, accepts_o = 0;
    for (const auto* t : traces) {
        attempts_b += t->diag.attempts_beta;
        accepts_b += t->diag.accepts_beta;
        attempts_o += t->diag.attempts_omega;
        accepts_o += t->diag.accepts_omega;
        out.divergences += t->diag.divergences_beta + t->diag.divergences_omega;
    }
    out.accept_rate_beta = attempts_b ? double(accepts_b) / double(attempts_b) : 0.0;
    out.accept_rate_omega = attempts_o ? double(accepts_o) / double(accepts_o) : 0.0;

    const Eigen::Index skip_from = ref.log_weight_col(); // exclude log_weight and loglik
    for (Eigen::Index c = 0; c < skip_from; ++c) {
        ParamSummary ps;
        ps.name = ref.columns[static_cast<std::size_t>(c)];
        const Eigen::VectorXd col = pooled.col(c);
        ps.mean = col.dot(w);
        ps.median = weighted_quantile(col, w, 0.5);
        ps.q025 = weighted_quantile(col, w, 0.025);
        ps.q975 = weighted_quantile(col, w, 0.975);
        ps.significant = !(ps.q025 <= 0.0 && 0.0 <= ps.q975);
        out.params.push_back(std::move(ps));
    }
    return out;
}

inline PosteriorSummary summarize(const TwoChainResult& r) {
    return summarize({&r.chain1, &r.chain2});
}

/// Posterior-averaged prediction over every thin-th pooled retained draw:
/// the point prediction is the weighted average of per-draw means, the total
/// variance follows the law of total variance across draws.
inline PredictiveResult posterior_predict(const std::vector<const ChainTrace*>& traces,
                                          const Dataset& data, const BasisSpec& spec,
                                          const Eigen::MatrixXd& Xquery, int thin = 5) {
    if (thin < 1) throw ArgumentError("posterior_predict: thin must be >= 1");
    auto [pooled, w] = detail::pool_traces(traces);
    const ChainTrace& ref = *traces.front();
    const Eigen::Index n = data.n(), m = Xquery.rows(), d = data.d(), p = spec.p();
    if (Xquery.cols() != d) throw ArgumentError("posterior_predict: query dimension mismatch");

    const Eigen::MatrixXd G = basis_matrix(data.X, spec);
    const Eigen::MatrixXd Gq = basis_matrix(Xquery, spec);
    const SquaredDiffs sqd(data.X);

    // cross squared differences per dimension, shared across draws
    std::vector<Eigen::MatrixXd> cross(static_cast<std::size_t>(d));
    for (Eigen::Index k = 0; k < d; ++k) {
        cross[static_cast<std::size_t>(k)].resize(n, m);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < m; ++j) {
                const double diff = data.X(i, k) - Xquery(j, k);
                cross[static_cast<std::size_t>(k)](i, j) = diff * diff;
            }
    }

    Eigen::VectorXd acc_mean = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd acc_second = Eigen::VectorXd::Zero(m); // E[var + mean^2]
    double acc_w = 0.0;
    PredictiveResult out;

    for (Eigen::Index row = 0; row < pooled.rows(); row += thin) {
        const double wt = w(row);
        GPParams params;
        params.beta = pooled.block(row, 0, 1, p).transpose();
        params.omega = pooled.block(row, ref.omega_col(0), 1, d).transpose();
        params.tau2 = pooled(row, ref.tau2_col());
        params.eta = pooled(row, ref.eta_col());

        const KernelBundle bundle = build_kernel_bundle(sqd, params.omega, params.eta);
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, m);
        for (Eigen::Index k = 0; k < d; ++k)
            S += (params.omega(k) * params.omega(k)) * cross[static_cast<std::size_t>(k)];
        const Eigen::MatrixXd Kx = (-S.array()).exp();

        const Eigen::VectorXd alpha = bundle.solve(data.y - G * params.beta);
        const Eigen::VectorXd mean = Gq * params.beta + Kx.transpose() * alpha;
        const Eigen::MatrixXd V = bundle.L.triangularView<Eigen::Lower>().solve(Kx);
        Eigen::VectorXd var =
            params.tau2 * (1.0 - V.colwise().squaredNorm().transpose().array()).matrix();
        for (Eigen::Index j = 0; j < m; ++j)
            if (var(j) < 0.0) {
                var(j) = 0.0;
                ++out.clamped;
            }

        acc_mean += wt * mean;
        acc_second += wt * (var + mean.cwiseProduct(mean));
        acc_w += wt;
    }
    if (!(acc_w > 0.0)) throw ArgumentError("posterior_predict: no draws selected");

    out.mean = acc_mean / acc_w;
    out.variance = (acc_second / acc_w - out.mean.cwiseProduct(out.mean)).cwiseMax(0.0);
    return out;
}

inline PredictiveResult posterior_predict(const TwoChainResult& r, const Dataset& data,
                                          const BasisSpec& spec, const Eigen::MatrixXd& Xquery,
                                          int thin = 5) {
    return posterior_predict({&r.chain1, &r.chain2}, data, spec, Xquery, thin);
}

// ---------------------------------------------------------------------------
// Replicated benchmark experiments
// ---------------------------------------------------------------------------

struct ReplicateConfig {
    BenchmarkName benchmark = BenchmarkName::PrespecifiedGp;
    Eigen::Index d = 0; // 0 => native; above native pads inert dimensions
    Eigen::Index n_train = 200;
    Eigen::Index n_test = 1000;
    int replicates = 1;
    Variant variant = Variant::Sph;
    BasisDegree basis = BasisDegree::Linear;
    PriorConfig prior;
    McmcConfig mcmc;
    double noise_sd_factor = 0.01; // deterministic benchmarks only
    std::uint64_t seed = 1;
    int thin = 5;
    int maximin_restarts = 10;
    int jobs = 1; // replicates run in parallel up to this many at a time
};

struct ReplicateResult {
    std::uint64_t seed = 0;
    double rmse = 0.0;
    int converged_at = 0;
    bool stopped_early = false;
    bool degraded = false;
    std::string error; // non-empty for excluded replicates
    PosteriorSummary summary;
};

struct ExperimentReport {
    ReplicateConfig config;
    std::vector<ReplicateResult> replicates;
    double mean_rmse = 0.0;
    std::optional<double> sd_rmse; // absent for a single successful replicate
    int n_ok = 0;
    int n_excluded = 0;
};

/// One replicate: generate data, fit two chains, predict, score.
inline ReplicateResult run_replicate(const ReplicateConfig& cfg, int replicate_index) {
    ReplicateResult res;
    res.seed = derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(replicate_index));

    Dataset train, test;
    if (cfg.benchmark == BenchmarkName::PrespecifiedGp) {
        if (cfg.d != 0 && cfg.d != 5)
            throw ArgumentError("prespecified_gp is defined for d = 5 only");
        std::tie(train, test) =
            simulate_prespecified_gp(cfg.n_train, cfg.n_test, res.seed, cfg.maximin_restarts);
    } else {
        BenchmarkFunction f = make_benchmark(cfg.benchmark);
        if (cfg.d > 0 && cfg.d != f.d_native) f = pad_inert_dimensions(f, cfg.d);
        std::tie(train, test) = make_benchmark_data(f, cfg.n_train, cfg.n_test,
                                                    cfg.noise_sd_factor, res.seed,
                                                    cfg.maximin_restarts);
    }

    const BasisSpec spec{cfg.basis, train.d()};
    if (spec.p() > train.n())
        throw ConfigError("basis size p = " + std::to_string(spec.p()) +
                          " exceeds n = " + std::to_string(train.n()) +
                          "; choose a lower basis degree");

    McmcConfig mcmc = cfg.mcmc;
    mcmc.seed = res.seed;
    const TwoChainResult chains = run_two_chains(cfg.variant, train, spec, cfg.prior, mcmc);
    res.converged_at = chains.converged_at;
    res.stopped_early = chains.stopped_early;
    res.degraded = chains.degraded;

    std::vector<const ChainTrace*> traces;
    if (!chains.chain1.aborted) traces.push_back(&chains.chain1);
    if (!chains.chain2.aborted) traces.push_back(&chains.chain2);
    if (traces.empty()) throw NumericError("both chains aborted");

    res.summary = summarize(traces);
    const PredictiveResult pred = posterior_predict(traces, train, spec, test.X, cfg.thin);
    res.rmse = standardized_rmse(test.y, pred.mean);
    return res;
}

/// Replicated experiment with derived per-replicate seeds; replicates that
/// throw are recorded and excluded from the aggregate. Results land in
/// replicate order whatever the parallel schedule was.
inline ExperimentReport replicate_experiment(const ReplicateConfig& cfg) {
    ExperimentReport report;
    report.config = cfg;
    report.replicates.resize(static_cast<std::size_t>(cfg.replicates));

    const auto run_one = [&](int i) {
        ReplicateResult res;
        try {
            res = run_replicate(cfg, i);
        } catch (const std::exception& e) {
            res.seed = derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(i));
            res.error = e.what();
        }
        report.replicates[static_cast<std::size_t>(i)] = std::move(res);
    };

    const int jobs = std::max(1, cfg.jobs);
    if (jobs == 1) {
        for (int i = 0; i < cfg.replicates; ++i) run_one(i);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < std::min(jobs, cfg.replicates); ++t)
            pool.emplace_back([&] {
                for (int i = next.fetch_add(1); i < cfg.replicates; i = next.fetch_add(1))
                    run_one(i);
            });
        for (auto& th : pool) th.join();
    }

    std::vector<double> ok;
    for (const auto& r : report.replicates)
        if (r.error.empty()) ok.push_back(r.rmse);
    report.n_ok = static_cast<int>(ok.size());
    report.n_excluded = cfg.replicates - report.n_ok;
    if (!ok.empty()) {
        report.mean_rmse = std::accumulate(ok.begin(), ok.end(), 0.0) / double(ok.size());
        if (ok.size() > 1) {
            double ss = 0.0;
            for (double v : ok) ss += (v - report.mean_rmse) * (v - report.mean_rmse);
            report.sd_rmse = std::sqrt(ss / double(ok.size() - 1));
        }
    }
    return report;
}

} // namespace bridgegp

#endif
