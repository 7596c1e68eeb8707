#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace switchkac::experiments {

struct CheckResult {
    std::string name;
    double value = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    double runtime_s = 0.0;
};

struct RunReport {
    std::string experiment;
    std::string version;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<CheckResult> checks;
    bool pass = false;

    nlohmann::json to_json() const;
};

struct SuiteParams {
    std::uint64_t seed = 0;
    int n_threads = 1;
    std::string output_dir;     // empty: no files written
    nlohmann::json overrides;   // suite-specific numeric overrides
};

// The named experiment suites. Defaults reproduce the acceptance runs;
// overrides scale them down for smoke use.
std::vector<CheckResult> run_feynman_kac_smoke(const SuiteParams& params);
std::vector<CheckResult> run_feynman_kac_jump(const SuiteParams& params);
std::vector<CheckResult> run_dirichlet(const SuiteParams& params);
std::vector<CheckResult> run_dynkin(const SuiteParams& params);
std::vector<CheckResult> run_pricing(const SuiteParams& params);
std::vector<CheckResult> run_averaging(const SuiteParams& params);
std::vector<CheckResult> run_arcsine(const SuiteParams& params);
std::vector<CheckResult> run_stieltjes(const SuiteParams& params);
std::vector<CheckResult> run_l2_gap(const SuiteParams& params);
std::vector<CheckResult> run_solver_quality(const SuiteParams& params);

std::vector<std::string> suite_names();

// Parses and validates a config (strict keys), runs the named suite, writes
// report.json plus the suite's CSV tables into the output directory, and
// returns the report. Throws UsageError for unknown names/keys.
RunReport run_experiment(const nlohmann::json& config, const std::string& output_dir_override = "",
                         int n_threads = 1,
                         std::optional<std::uint64_t> seed_override = std::nullopt);

}  // namespace switchkac::experiments
