#include <doctest.h>

#include <cmath>

#include "switchkac/averaging.hpp"
#include "switchkac/errors.hpp"
#include "switchkac/path_sim.hpp"
#include "test_helpers.hpp"

using namespace switchkac;
using namespace switchkac::testing;

TEST_SUITE_BEGIN("path_sim");

namespace {

SimParams quick_params(double horizon, double h, std::uint64_t seed, double delta = 0.0) {
    SimParams p;
    p.horizon = horizon;
    p.max_step = h;
    p.truncation = delta;
    p.seed = seed;
    return p;
}

}  // namespace

TEST_CASE("all-zero coefficients give a constant path") {
    const auto spec = diffusion_model({0.0}, {0.0}, Matrix(1, 1, 0.0), 0.0);
    RngStream rng(1, 0, 0);
    const auto path = simulate_path(spec, {Vec{2.5}, {1}}, quick_params(1.0, 0.1, 1), rng);
    CHECK(path.times.front() == 0.0);
    CHECK(path.final_time() == doctest::Approx(1.0));
    for (std::size_t k = 0; k < path.size(); ++k) {
        CHECK(path.state(k) == 2.5);
        CHECK(path.regimes[k] == 1);
    }
    CHECK(path.switches.empty());
    CHECK(path.jumps.empty());
}

TEST_CASE("zero generator records no switches") {
    const auto spec = diffusion_model({0.0, 0.0}, {1.0, 1.0}, Matrix(2, 2, 0.0), 0.0);
    RngStream rng(2, 0, 0);
    const auto path = simulate_path(spec, {Vec{0.0}, {2}}, quick_params(2.0, 0.01, 2), rng);
    CHECK(path.switches.empty());
    CHECK(path.final_regime() == 2);
}

TEST_CASE("compensated dynamics keep the ensemble mean at the start point") {
    const auto spec = two_regime_jump_model();
    auto params = quick_params(1.0, 5e-3, 31, 0.05);
    const auto estimate = simulate_ensemble(spec, {Vec{0.4}, {1}}, params, 20000,
                                            [](const Path& p) { return p.state(p.size() - 1); });
    CHECK(estimate.metadata.valid);
    CHECK(std::fabs(estimate.mean - 0.4) < 3.0 * estimate.std_error);
}

TEST_CASE("ensemble determinism and trivial functional") {
    const auto spec = two_regime_jump_model();
    const auto params = quick_params(0.5, 0.01, 77, 0.05);
    const HybridState start{Vec{0.0}, {1}};

    const auto ones =
        simulate_ensemble(spec, start, params, 5000, [](const Path&) { return 1.0; });
    CHECK(ones.mean == 1.0);
    CHECK(ones.std_error == 0.0);
    CHECK(ones.n_paths == 5000);

    auto last = [](const Path& p) { return p.state(p.size() - 1); };
    const auto a = simulate_ensemble(spec, start, params, 3000, last);
    const auto b = simulate_ensemble(spec, start, params, 3000, last);
    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);

    // Worker count must not change the aggregate bits.
    const auto threaded = simulate_ensemble(spec, start, params, 3000, last, 3);
    CHECK(threaded.mean == a.mean);
    CHECK(threaded.std_error == a.std_error);
}

TEST_CASE("thinning reproduces the chain law for constant Q") {
    Matrix q(2, 2, 0.0);
    q(0, 0) = -1.0;
    q(0, 1) = 1.0;
    q(1, 0) = 2.0;
    q(1, 1) = -2.0;
    const auto spec = diffusion_model({0.0, 0.0}, {1.0, 1.0}, q, 2.0);
    const Vec nu = stationary_distribution(q);  // (2/3, 1/3)

    const double horizon = 50.0;
    const double q1 = 1.0, q2 = 2.0;
    auto params = quick_params(horizon, 0.05, 5);

    // Exact finite-horizon oracles from the Kolmogorov forward equation,
    // starting in regime 1: P_1(t) = nu_1 + nu_2 e^{-(q1+q2) t}. The burn-in
    // correction (~nu_2 / ((q1+q2) T)) is well above the Monte Carlo noise.
    const double relax = (1.0 - std::exp(-(q1 + q2) * horizon)) / (q1 + q2);
    const double occ_oracle = nu[0] + nu[1] * relax / horizon;
    const double count_oracle =
        horizon * (nu[0] * q1 + nu[1] * q2) + nu[1] * (q1 - q2) * relax;

    // Occupation fraction of regime 1 along each path.
    auto occupation = [](const Path& p) {
        double time_in_1 = 0.0;
        for (std::size_t k = 0; k + 1 < p.size(); ++k)
            if (p.regimes[k] == 1) time_in_1 += p.times[k + 1] - p.times[k];
        return time_in_1 / p.final_time();
    };
    const auto occ = simulate_ensemble(spec, {Vec{0.0}, {1}}, params, 4000, occupation);
    CHECK(std::fabs(occ.mean - occ_oracle) < 3.0 * occ.std_error);
    // Long-horizon reading: the stationary distribution within the burn-in
    // allowance.
    CHECK(std::fabs(occ.mean - nu[0]) < 3.0 * occ.std_error + nu[1] * relax / horizon);

    // Switch count: T * sum_i nu_i (-q_ii) plus the same burn-in term.
    auto switches = [](const Path& p) { return static_cast<double>(p.switches.size()); };
    const auto count = simulate_ensemble(spec, {Vec{0.0}, {1}}, params, 4000, switches);
    CHECK(std::fabs(count.mean - count_oracle) < 3.0 * count.std_error);
}

TEST_CASE("path jump skeleton reproduces sample_jumps for the same stream") {
    const auto spec = two_regime_jump_model();
    const auto params = quick_params(2.0, 0.01, 99, 0.1);

    RngStream rng_path(params.seed, params.stream_id, 0);
    const auto path = simulate_path(spec, {Vec{0.0}, {1}}, params, rng_path);

    RngStream rng_jumps(params.seed, params.stream_id, 0);
    const auto jumps = sample_jumps(spec.levy, params.truncation, params.horizon, rng_jumps);

    REQUIRE(path.jumps.size() == jumps.size());
    for (std::size_t k = 0; k < jumps.size(); ++k) {
        CHECK(path.jumps[k].time == jumps[k].time);
        CHECK(path.jumps[k].mark[0] == jumps[k].mark[0]);
    }
}

TEST_CASE("weak-order trend under step halving") {
    // Geometric Brownian motion: E[X(T)] = x0 e^{mu T}; the Euler mean bias
    // is O(h), so successive halvings shrink the defect monotonically.
    ModelSpec spec = standard_bm();
    spec.drift = [](const Vec& x, int, Vec& out) { out.assign(1, x[0]); };
    spec.diffusion = [](const Vec& x, int, Matrix& out) {
        out.resize(1, 1);
        out(0, 0) = 0.3 * x[0];
    };
    auto last = [](const Path& p) { return p.state(p.size() - 1); };

    std::vector<double> diffs;
    double prev_mean = 0.0;
    bool first = true;
    for (double h : {0.2, 0.1, 0.05, 0.025}) {
        auto params = quick_params(1.0, h, 12345);
        const auto est = simulate_ensemble(spec, {Vec{1.0}, {1}}, params, 100000, last);
        if (!first) diffs.push_back(std::fabs(est.mean - prev_mean));
        prev_mean = est.mean;
        first = false;
    }
    REQUIRE(diffs.size() == 3);
    CHECK(diffs[1] < diffs[0]);
    CHECK(diffs[2] < diffs[1]);
}

TEST_CASE("explosion carries the partial path and flags the ensemble") {
    ModelSpec spec = standard_bm();
    spec.drift = [](const Vec& x, int, Vec& out) { out.assign(1, x[0] * x[0] * x[0]); };
    const auto params = quick_params(5.0, 0.5, 3);

    RngStream rng(3, 0, 0);
    CHECK_THROWS_AS(simulate_path(spec, {Vec{5.0}, {1}}, params, rng), SimulationError);

    const auto est = simulate_ensemble(spec, {Vec{5.0}, {1}}, params, 100,
                                       [](const Path& p) { return p.state(p.size() - 1); });
    CHECK(!est.metadata.valid);
    CHECK(est.metadata.exploded_paths > 0);
}

TEST_CASE("empirical moment bound") {
    SUBCASE("constant path: |x0|^p exactly") {
        const auto frozen = diffusion_model({0.0}, {0.0}, Matrix(1, 1, 0.0), 0.0);
        const auto est =
            empirical_moment_bound(frozen, {Vec{-3.0}, {1}}, quick_params(1.0, 0.1, 4), 2.0, 100);
        CHECK(est.mean == doctest::Approx(9.0));
        CHECK(est.std_error == 0.0);
    }

    SUBCASE("standard BM: stable under doubling, Jensen ordering") {
        const auto bm = standard_bm();
        const auto params = quick_params(1.0, 0.01, 6);
        const HybridState start{Vec{0.0}, {1}};
        const auto p2_a = empirical_moment_bound(bm, start, params, 2.0, 4000);
        SimParams params_b = params;
        params_b.stream_id = 1;
        const auto p2_b = empirical_moment_bound(bm, start, params_b, 2.0, 8000);
        CHECK(std::isfinite(p2_a.mean));
        CHECK(std::fabs(p2_a.mean - p2_b.mean) <
              3.0 * std::sqrt(p2_a.std_error * p2_a.std_error + p2_b.std_error * p2_b.std_error));

        const auto p1 = empirical_moment_bound(bm, start, params, 1.0, 4000);
        CHECK(p1.mean <= std::sqrt(p2_a.mean) + 3.0 * p1.std_error);

        CHECK_THROWS_AS(empirical_moment_bound(bm, start, params, 2.5, 100), ConfigError);
    }
}

TEST_SUITE_END();
