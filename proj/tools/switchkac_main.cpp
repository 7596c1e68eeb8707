#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "switchkac/errors.hpp"
#include "switchkac/experiments.hpp"

namespace {

int run_command(const std::string& config_path, const std::string& out_dir, int threads,
                std::optional<std::uint64_t> seed_override) {
    std::ifstream in(config_path);
    if (!in) {
        std::fprintf(stderr, "error: cannot read config '%s'\n", config_path.c_str());
        return 2;
    }
    nlohmann::json config;
    try {
        in >> config;
    } catch (const nlohmann::json::parse_error& e) {
        std::fprintf(stderr, "error: config is not valid JSON: %s\n", e.what());
        return 2;
    }

    const auto report = switchkac::experiments::run_experiment(config, out_dir, threads,
                                                               seed_override);
    for (const auto& check : report.checks) {
        std::printf("[%s] %-45s value=%.6g target=%.6g tol=%.3g (%.1fs)\n",
                    check.pass ? "PASS" : "FAIL", check.name.c_str(), check.value, check.target,
                    check.tolerance, check.runtime_s);
    }
    std::printf("%s: %s (seed=%llu, config=%s)\n", report.experiment.c_str(),
                report.pass ? "PASS" : "FAIL", static_cast<unsigned long long>(report.seed),
                report.config_hash.c_str());
    return report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"switchkac: regime-switching jump diffusions, their Feynman-Kac "
                 "representations, and PIDE cross-checks"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int threads = 1;
    std::optional<std::uint64_t> seed_override;

    auto* run = app.add_subcommand("run", "run a named experiment suite from a JSON config");
    run->add_option("config", config_path, "path to the experiment config (JSON)")->required();
    run->add_option("--out", out_dir, "output directory (overrides config output_dir)");
    run->add_option("--threads", threads, "worker threads for Monte Carlo ensembles")
        ->check(CLI::PositiveNumber);
    std::uint64_t seed_value = 0;
    auto* seed_opt = run->add_option("--seed-override", seed_value, "replace the config seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    if (seed_opt->count() > 0) seed_override = seed_value;

    try {
        return run_command(config_path, out_dir, threads, seed_override);
    } catch (const switchkac::UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const switchkac::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
