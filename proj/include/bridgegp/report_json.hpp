#ifndef BRIDGEGP_REPORT_JSON_HPP
#define BRIDGEGP_REPORT_JSON_HPP

#include <string>

#include <json.hpp>

#include "bridgegp/evaluation.hpp"

namespace bridgegp {

inline constexpr int kReportSchemaVersion = 1;

inline nlohmann::json summary_to_json(const PosteriorSummary& s) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : s.params)
        params.push_back({{"name", p.name},
                          {"mean", p.mean},
                          {"median", p.median},
                          {"q2.5", p.q025},
                          {"q97.5", p.q975},
                          {"significant", p.significant}});
    return {{"params", params},
            {"ess", s.ess},
            {"n_retained", s.n_retained},
            {"accept_rate_beta", s.accept_rate_beta},
            {"accept_rate_omega", s.accept_rate_omega},
            {"divergences", s.divergences}};
}

inline nlohmann::json config_to_json(const ReplicateConfig& c) {
    return {{"benchmark", to_string(c.benchmark)},
            {"d", c.d},
            {"n_train", c.n_train},
            {"n_test", c.n_test},
            {"replicates", c.replicates},
            {"variant", to_string(c.variant)},
            {"basis", to_string(c.basis)},
            {"q", c.prior.q},
            {"burnin", c.mcmc.burnin},
            {"iters", c.mcmc.total},
            {"check_every", c.mcmc.check_every},
            {"rhat_threshold", c.mcmc.rhat_threshold},
            {"noise_sd_factor", c.noise_sd_factor},
            {"thin", c.thin},
            {"seed", c.seed}};
}

inline nlohmann::json report_to_json(const ExperimentReport& r) {
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& rep : r.replicates) {
        nlohmann::json j = {{"seed", rep.seed},
                            {"rmse", rep.rmse},
                            {"converged_at", rep.converged_at},
                            {"diagnostics",
                             {{"stopped_early", rep.stopped_early},
                              {"degraded", rep.degraded},
                              {"ess", rep.summary.ess},
                              {"accept_rate_beta", rep.summary.accept_rate_beta},
                              {"accept_rate_omega", rep.summary.accept_rate_omega},
                              {"divergences", rep.summary.divergences}}}};
        if (!rep.error.empty())
            j["error"] = rep.error;
        else
            j["params"] = summary_to_json(rep.summary)["params"];
        reps.push_back(std::move(j));
    }
    nlohmann::json aggregate = {{"mean", r.mean_rmse},
                                {"n_ok", r.n_ok},
                                {"n_excluded", r.n_excluded}};
    if (r.sd_rmse)
        aggregate["sd"] = *r.sd_rmse;
    else
        aggregate["sd"] = nullptr;
    return {{"schema_version", kReportSchemaVersion},
            {"config_echo", config_to_json(r.config)},
            {"per_replicate", reps},
            {"aggregate", aggregate}};
}

inline std::string report_to_string(const ExperimentReport& r) {
    return report_to_json(r).dump(2) + "\n";
}

} // namespace bridgegp

#endif
