// bridgegp: fit, predict and benchmark Bayesian bridge GP regression models.
//
// Exit codes: 0 ok, 2 usage/configuration, 3 data, 4 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bridgegp/bridgegp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonOpts {
    std::string variant = "sph";
    double q = 1.0;
    std::string basis = "linear";
    int burnin = 1600;
    int iters = 3000;
    std::uint64_t seed = 1;
    int jobs = 1;
    int check_every = 350;
    double rhat_threshold = 1.1;
    int thin = 5;
    std::string config_path;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--variant", o.variant, "sampler variant (sph|hmc)");
    cmd->add_option("--q", o.q, "bridge exponent in (0, 2]");
    cmd->add_option("--basis", o.basis, "mean basis (constant|linear|quadratic)");
    cmd->add_option("--burnin", o.burnin, "burn-in iterations per chain");
    cmd->add_option("--iters", o.iters, "total iterations per chain (including burn-in)");
    cmd->add_option("--seed", o.seed, "master RNG seed");
    cmd->add_option("--jobs", o.jobs, "max parallel replicates");
    cmd->add_option("--check-every", o.check_every, "two-chain convergence check cadence");
    cmd->add_option("--rhat-threshold", o.rhat_threshold,
                    "split-R-hat early-stop threshold (0 disables)");
    cmd->add_option("--thin", o.thin, "thinning for posterior prediction");
    cmd->add_option("--config", o.config_path, "flat JSON config file (flags override it)");
}

// A flat JSON config supplies defaults; explicit flags override it, and
// BRIDGEGP_SEED overrides the seed over both.
void apply_config_file(const CLI::App& cmd, CommonOpts& o) {
    if (o.config_path.empty()) return;
    std::ifstream in(o.config_path);
    if (!in) throw bridgegp::ParseError(o.config_path + ": cannot open config");
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw bridgegp::ParseError(o.config_path + ": " + e.what());
    }
    const auto use_file = [&](const char* flag) { return cmd.count(flag) == 0; };
    if (cfg.contains("variant") && use_file("--variant")) o.variant = cfg["variant"];
    if (cfg.contains("q") && use_file("--q")) o.q = cfg["q"];
    if (cfg.contains("basis") && use_file("--basis")) o.basis = cfg["basis"];
    if (cfg.contains("burnin") && use_file("--burnin")) o.burnin = cfg["burnin"];
    if (cfg.contains("iters") && use_file("--iters")) o.iters = cfg["iters"];
    if (cfg.contains("seed") && use_file("--seed")) o.seed = cfg["seed"];
    if (cfg.contains("jobs") && use_file("--jobs")) o.jobs = cfg["jobs"];
    if (cfg.contains("check_every") && use_file("--check-every")) o.check_every = cfg["check_every"];
    if (cfg.contains("rhat_threshold") && use_file("--rhat-threshold"))
        o.rhat_threshold = cfg["rhat_threshold"];
    if (cfg.contains("thin") && use_file("--thin")) o.thin = cfg["thin"];
}

void apply_seed_env(CommonOpts& o) {
    if (const char* env = std::getenv("BRIDGEGP_SEED")) o.seed = std::stoull(env);
}

bridgegp::McmcConfig make_mcmc(const CommonOpts& o) {
    bridgegp::McmcConfig mcmc;
    mcmc.burnin = o.burnin;
    mcmc.total = o.iters;
    mcmc.seed = o.seed;
    mcmc.check_every = o.check_every;
    mcmc.rhat_threshold = o.rhat_threshold;
    return mcmc;
}

json ranges_to_json(const std::vector<std::pair<double, double>>& ranges) {
    json out = json::array();
    for (const auto& [lo, hi] : ranges) out.push_back({lo, hi});
    return out;
}

std::vector<std::pair<double, double>> ranges_from_json(const json& j) {
    std::vector<std::pair<double, double>> out;
    for (const auto& pair : j) out.emplace_back(pair.at(0), pair.at(1));
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw bridgegp::ArgumentError("cannot write " + path.string());
    out << text;
}

int cmd_fit(const CommonOpts& o, const std::string& data_path, const std::string& out_dir) {
    using namespace bridgegp;
    auto [Xraw, y] = read_xy_csv(data_path);

    // column ranges from the observed data; fitting happens on the unit cube
    std::vector<std::pair<double, double>> ranges;
    for (Eigen::Index k = 0; k < Xraw.cols(); ++k) {
        const double lo = Xraw.col(k).minCoeff(), hi = Xraw.col(k).maxCoeff();
        if (!(lo < hi))
            throw ParseError(data_path + ": column x" + std::to_string(k + 1) +
                             " is constant; cannot scale to [0,1]");
        ranges.emplace_back(lo, hi);
    }
    Dataset data{scale_to_unit(Xraw, ranges), y, unit_ranges(Xraw.cols())};
    data.validate();

    const BasisSpec spec{basis_degree_from_string(o.basis), data.d()};
    if (spec.p() > data.n())
        throw ConfigError("basis '" + o.basis + "' needs p = " + std::to_string(spec.p()) +
                          " coefficients but the data has only n = " + std::to_string(data.n()) +
                          " rows; choose a lower basis degree");

    PriorConfig prior;
    prior.q = o.q;
    prior.validate();
    const Variant variant = variant_from_string(o.variant);
    const McmcConfig mcmc = make_mcmc(o);
    mcmc.validate();

    const TwoChainResult chains = run_two_chains(variant, data, spec, prior, mcmc);

    fs::create_directories(out_dir);
    write_trace_csv(chains.chain1, (fs::path(out_dir) / "trace_chain1.csv").string());
    write_trace_bin(chains.chain1, (fs::path(out_dir) / "trace_chain1.bin").string());
    write_trace_csv(chains.chain2, (fs::path(out_dir) / "trace_chain2.csv").string());
    write_trace_bin(chains.chain2, (fs::path(out_dir) / "trace_chain2.bin").string());
    write_xy_csv(data.X, data.y, (fs::path(out_dir) / "train_used.csv").string());

    json model = {{"schema_version", kReportSchemaVersion},
                  {"variant", o.variant},
                  {"q", o.q},
                  {"basis", o.basis},
                  {"d", data.d()},
                  {"p", spec.p()},
                  {"n", data.n()},
                  {"thin", o.thin},
                  {"column_ranges", ranges_to_json(ranges)},
                  {"basis_terms", spec.term_names()},
                  {"train_csv", "train_used.csv"},
                  {"traces", {"trace_chain1.csv", "trace_chain2.csv"}}};
    write_text(fs::path(out_dir) / "model.json", model.dump(2) + "\n");

    const PosteriorSummary summary = summarize(chains);
    json sj = {{"schema_version", kReportSchemaVersion},
               {"config_echo",
                {{"data", data_path},
                 {"variant", o.variant},
                 {"q", o.q},
                 {"basis", o.basis},
                 {"burnin", o.burnin},
                 {"iters", o.iters},
                 {"seed", o.seed},
                 {"check_every", o.check_every},
                 {"rhat_threshold", o.rhat_threshold}}},
               {"converged_at", chains.converged_at},
               {"stopped_early", chains.stopped_early},
               {"degraded", chains.degraded},
               {"posterior", summary_to_json(summary)}};
    write_text(fs::path(out_dir) / "summary.json", sj.dump(2) + "\n");
    std::cout << "fit: wrote " << out_dir << " (converged_at=" << chains.converged_at << ")\n";
    return kExitOk;
}

int cmd_predict(const std::string& model_dir, const std::string& query_path,
                const std::string& out_path, int thin_override) {
    using namespace bridgegp;
    const fs::path dir(model_dir);
    std::ifstream in(dir / "model.json");
    if (!in) throw ParseError((dir / "model.json").string() + ": cannot open");
    json model;
    try {
        in >> model;
    } catch (const json::exception& e) {
        throw ParseError((dir / "model.json").string() + ": " + e.what());
    }

    const auto ranges = ranges_from_json(model.at("column_ranges"));
    auto [Xtr, ytr] = read_xy_csv((dir / model.at("train_csv").get<std::string>()).string());
    Dataset train{Xtr, ytr, unit_ranges(Xtr.cols())};
    const BasisSpec spec{basis_degree_from_string(model.at("basis")), train.d()};

    const ChainTrace t1 = read_trace_csv((dir / "trace_chain1.csv").string());
    const ChainTrace t2 = read_trace_csv((dir / "trace_chain2.csv").string());

    const Eigen::MatrixXd Q = read_x_csv(query_path);
    if (Q.cols() != train.d())
        throw ParseError(query_path + ": expected d = " + std::to_string(train.d()) +
                         " feature columns, found " + std::to_string(Q.cols()));
    const Eigen::MatrixXd Qscaled = scale_to_unit(Q, ranges);

    const int thin = thin_override > 0 ? thin_override : model.value("thin", 5);
    const PredictiveResult pred = posterior_predict({&t1, &t2}, train, spec, Qscaled, thin);
    write_predictions_csv(pred.mean, pred.variance, out_path);
    std::cout << "predict: wrote " << out_path << " (" << Q.rows() << " rows)\n";
    return kExitOk;
}

int cmd_benchmark(const CommonOpts& o, const std::string& name, Eigen::Index dim, Eigen::Index n,
                  Eigen::Index n_test, int replicates, double noise_sd_factor,
                  const std::string& out_path, const std::string& export_train) {
    using namespace bridgegp;
    ReplicateConfig cfg;
    cfg.benchmark = benchmark_from_string(name);
    cfg.d = dim;
    cfg.n_train = n;
    cfg.n_test = n_test;
    cfg.replicates = replicates;
    cfg.variant = variant_from_string(o.variant);
    cfg.basis = basis_degree_from_string(o.basis);
    cfg.prior.q = o.q;
    cfg.prior.validate();
    cfg.mcmc = make_mcmc(o);
    cfg.noise_sd_factor = noise_sd_factor;
    cfg.seed = o.seed;
    cfg.thin = o.thin;
    cfg.jobs = o.jobs;

    if (!export_train.empty()) {
        // write the first replicate's training set in physical units
        const std::uint64_t rep_seed = derive_seed(cfg.seed, 1000);
        if (cfg.benchmark == BenchmarkName::PrespecifiedGp) {
            auto [train, test] = simulate_prespecified_gp(cfg.n_train, 0, rep_seed,
                                                          cfg.maximin_restarts);
            write_xy_csv(train.X, train.y, export_train);
        } else {
            BenchmarkFunction f = make_benchmark(cfg.benchmark);
            if (cfg.d > 0 && cfg.d != f.d_native) f = pad_inert_dimensions(f, cfg.d);
            auto [train, test] = make_benchmark_data(f, cfg.n_train, 0, cfg.noise_sd_factor,
                                                     rep_seed, cfg.maximin_restarts);
            write_xy_csv(scale_from_unit(train.X, f.ranges), train.y, export_train);
        }
        std::cout << "benchmark: exported training data to " << export_train << "\n";
    }

    const ExperimentReport report = replicate_experiment(cfg);
    write_text(out_path, report_to_string(report));
    std::cout << "benchmark: wrote " << out_path << " (mean rmse=" << report.mean_rmse
              << ", ok=" << report.n_ok << ", excluded=" << report.n_excluded << ")\n";
    return report.n_ok > 0 ? kExitOk : kExitNumeric;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian bridge Gaussian process regression"};
    app.require_subcommand(1);

    CommonOpts fit_opts, bench_opts;
    std::string data_path, out_dir = "bridgegp_out";
    CLI::App* fit = app.add_subcommand("fit", "fit a model to a CSV dataset");
    add_common(fit, fit_opts);
    fit->add_option("--data", data_path, "training CSV with header x1..xd,y")->required();
    fit->add_option("--out-dir", out_dir, "output directory for model artifacts");

    std::string model_dir, query_path, pred_out = "predictions.csv";
    int pred_thin = 0;
    CLI::App* predict = app.add_subcommand("predict", "predict from fitted model artifacts");
    predict->add_option("--model-dir", model_dir, "directory written by fit")->required();
    predict->add_option("--query", query_path, "query CSV with header x1..xd")->required();
    predict->add_option("--out", pred_out, "output predictions CSV");
    predict->add_option("--thin", pred_thin, "thinning override (0 = model default)");

    std::string bench_name, report_out = "report.json", export_train;
    Eigen::Index bench_dim = 0, bench_n = 200, bench_n_test = 1000;
    int bench_reps = 1;
    double noise_sd_factor = 0.01;
    CLI::App* bench = app.add_subcommand("benchmark", "replicated benchmark experiment");
    add_common(bench, bench_opts);
    bench->add_option("--name", bench_name,
                      "borehole|otl_circuit|piston|prespecified_gp")->required();
    bench->add_option("--dim", bench_dim, "total input dimension (0 = native; > native pads)");
    bench->add_option("--n", bench_n, "training points per replicate");
    bench->add_option("--n-test", bench_n_test, "test points per replicate");
    bench->add_option("--replicates", bench_reps, "number of replicates");
    bench->add_option("--noise-sd-factor", noise_sd_factor,
                      "training noise sd as a fraction of sd(f)");
    bench->add_option("--out", report_out, "output report JSON");
    bench->add_option("--export-train", export_train,
                      "also write the first replicate's training CSV here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*fit) {
            apply_config_file(*fit, fit_opts);
            apply_seed_env(fit_opts);
            return cmd_fit(fit_opts, data_path, out_dir);
        }
        if (*predict) return cmd_predict(model_dir, query_path, pred_out, pred_thin);
        if (*bench) {
            apply_config_file(*bench, bench_opts);
            apply_seed_env(bench_opts);
            return cmd_benchmark(bench_opts, bench_name, bench_dim, bench_n, bench_n_test,
                                 bench_reps, noise_sd_factor, report_out, export_train);
        }
    } catch (const bridgegp::ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const bridgegp::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const bridgegp::ArgumentError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const bridgegp::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const bridgegp::DomainError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
