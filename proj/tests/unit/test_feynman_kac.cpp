#include <doctest.h>

#include <cmath>

#include "switchkac/errors.hpp"
#include "switchkac/feynman_kac.hpp"
#include "test_helpers.hpp"

using namespace switchkac;
using namespace switchkac::testing;

TEST_SUITE_BEGIN("feynman_kac");

namespace {

SimParams quick_params(double h, std::uint64_t seed, double delta = 0.0) {
    SimParams p;
    p.max_step = h;
    p.truncation = delta;
    p.seed = seed;
    return p;
}

const ScalarField kZero = make_field([](double, int) { return 0.0; });
const ScalarField kOne = make_field([](double, int) { return 1.0; });

}  // namespace

TEST_CASE("initial value: degenerate discounts") {
    const auto bm = standard_bm();
    const HybridState start{Vec{0.0}, {1}};

    // c = 0, f = 1: every path contributes exactly 1.
    auto est = estimate_initial_value(bm, kZero, kOne, 1.0, start, quick_params(0.05, 1), 500);
    CHECK(est.mean == 1.0);
    CHECK(est.std_error == 0.0);

    // Constant c: the discount integral is exact on the skeleton.
    const double lambda = 0.7, t = 1.3;
    const auto c = make_field([lambda](double, int) { return lambda; });
    est = estimate_initial_value(bm, c, kOne, t, start, quick_params(0.05, 2), 500);
    CHECK(est.mean == doctest::Approx(std::exp(-lambda * t)).epsilon(1e-12));
    CHECK(est.std_error < 1e-14);
}

TEST_CASE("initial value: Gaussian second-moment oracle") {
    // E[(x + W_t)^2] = x^2 + t.
    const auto bm = standard_bm();
    const auto f = make_field([](double x, int) { return x * x; });
    const auto est = estimate_initial_value(bm, kZero, f, 1.0, {Vec{0.0}, {1}},
                                            quick_params(1e-3, 3), 20000);
    CHECK(std::fabs(est.mean - 1.0) < 3.0 * est.std_error);
}

TEST_CASE("initial value: monotone in the kill rate for nonnegative data") {
    const auto spec = two_regime_jump_model();
    const auto f = make_field([](double x, int) { return 1.0 / (1.0 + x * x); });
    const auto c_low = make_field([](double x, int) { return 0.1 + 0.2 * x * x; });
    const auto c_high = make_field([](double x, int) { return 0.4 + 0.2 * x * x; });
    const auto params = quick_params(0.01, 4, 0.05);
    const HybridState start{Vec{0.2}, {1}};
    // Same seed, same paths: the discounted value is smaller pathwise.
    const auto low = estimate_initial_value(spec, c_low, f, 1.0, start, params, 4000);
    const auto high = estimate_initial_value(spec, c_high, f, 1.0, start, params, 4000);
    CHECK(high.mean < low.mean);
}

TEST_CASE("terminal value: sign conventions") {
    const auto bm = standard_bm();
    const HybridState start{Vec{0.0}, {1}};
    const double t = 0.25, horizon = 1.0;
    const TimeField zero_c{[](double, const Vec&, int) { return 0.0; }};
    const TimeField no_g{};

    auto est = estimate_terminal_value(bm, zero_c, no_g, kOne, t, horizon, start,
                                       quick_params(0.05, 5), 500);
    CHECK(est.mean == 1.0);

    // f = 0, g = 1, c = 0: exactly -(T - t), deterministic.
    const TimeField one_g{[](double, const Vec&, int) { return 1.0; }};
    est = estimate_terminal_value(bm, zero_c, one_g, kZero, t, horizon, start,
                                  quick_params(0.05, 6), 500);
    CHECK(est.mean == doctest::Approx(-(horizon - t)).epsilon(1e-12));
    CHECK(est.std_error < 1e-14);

    // c = lambda, f = 1, g = 0.
    const double lambda = 0.9;
    const TimeField const_c{[lambda](double, const Vec&, int) { return lambda; }};
    est = estimate_terminal_value(bm, const_c, no_g, kOne, t, horizon, start,
                                  quick_params(0.05, 7), 500);
    CHECK(est.mean == doctest::Approx(std::exp(-lambda * (horizon - t))).epsilon(1e-12));
}

TEST_CASE("terminal value matches initial value for time-homogeneous data") {
    const auto spec = two_regime_jump_model();
    const auto f = make_field([](double x, int i) { return std::cos(x) + 0.2 * i; });
    const auto c = make_field([](double x, int) { return 0.1 + 0.05 * std::tanh(x); });
    const HybridState start{Vec{0.3}, {2}};
    const auto params = quick_params(0.01, 8, 0.05);

    const double t = 0.3, horizon = 1.0;
    const auto terminal = estimate_terminal_value(spec, constant_in_time(c), TimeField{}, f, t,
                                                  horizon, start, params, 4000);
    const auto initial = estimate_initial_value(spec, c, f, horizon - t, start, params, 4000);
    // Same streams, same horizon: identical path functionals.
    CHECK(terminal.mean == doctest::Approx(initial.mean).epsilon(1e-12));
}

TEST_CASE("dirichlet: trivial exterior data") {
    const auto bm = standard_bm();
    DirichletProblemSpec problem;
    problem.domain = {Vec{-1.0}, Vec{1.0}};
    problem.kill_rate = kZero;
    problem.source = kZero;
    problem.exterior = kOne;
    const auto est =
        estimate_dirichlet(bm, problem, {Vec{0.0}, {1}}, quick_params(0.01, 9), 500);
    CHECK(est.mean == doctest::Approx(1.0));
    CHECK(est.metadata.censored_fraction <= 0.01);
}

TEST_CASE("dirichlet: BM exit-time and hitting-probability oracles") {
    const auto bm = standard_bm();
    const auto params = quick_params(1e-3, 10);

    // E[tau] from (1/2)u'' = -1: u(x) = 1 - x^2.
    DirichletProblemSpec exit_time;
    exit_time.domain = {Vec{-1.0}, Vec{1.0}};
    exit_time.kill_rate = kZero;
    exit_time.source = make_field([](double, int) { return -1.0; });
    exit_time.exterior = kZero;
    for (double x : {-0.5, 0.0, 0.5}) {
        const auto est = estimate_dirichlet(bm, exit_time, {Vec{x}, {1}}, params, 2000);
        CHECK(est.metadata.valid);
        CHECK(std::fabs(est.mean - (1.0 - x * x)) < 3.0 * est.std_error + 0.05);
    }

    // Hitting probability of the right boundary: (x + 1) / 2.
    DirichletProblemSpec hitting;
    hitting.domain = {Vec{-1.0}, Vec{1.0}};
    hitting.kill_rate = kZero;
    hitting.source = kZero;
    hitting.exterior = make_field([](double x, int) { return x >= 1.0 ? 1.0 : 0.0; });
    const auto est = estimate_dirichlet(bm, hitting, {Vec{0.0}, {1}}, params, 2000);
    CHECK(std::fabs(est.mean - 0.5) < 3.0 * est.std_error + 0.01);
}

TEST_CASE("dirichlet on a huge box censored at t reproduces the initial-value estimate") {
    const auto spec = two_regime_jump_model();
    const auto f = make_field([](double x, int i) { return std::exp(-x * x) + 0.1 * i; });
    const HybridState start{Vec{0.0}, {1}};
    const auto params = quick_params(0.01, 11, 0.05);
    const double t = 0.5;

    DirichletProblemSpec big_box;
    big_box.domain = {Vec{-50.0}, Vec{50.0}};
    big_box.kill_rate = kZero;
    big_box.source = kZero;
    big_box.exterior = f;
    big_box.max_horizon = t;

    const auto dirichlet = estimate_dirichlet(spec, big_box, start, params, 3000);
    const auto initial = estimate_initial_value(spec, kZero, f, t, start, params, 3000);
    CHECK(dirichlet.mean == doctest::Approx(initial.mean).epsilon(1e-12));
    // Censoring is the mechanism here, so the flag must fire.
    CHECK(dirichlet.metadata.censored_fraction > 0.9);
}

TEST_CASE("dirichlet rejects starts outside the domain") {
    const auto bm = standard_bm();
    DirichletProblemSpec problem;
    problem.domain = {Vec{-1.0}, Vec{1.0}};
    problem.kill_rate = kZero;
    problem.source = kZero;
    problem.exterior = kOne;
    CHECK_THROWS_AS(estimate_dirichlet(bm, problem, {Vec{2.0}, {1}}, quick_params(0.01, 1), 100),
                    ConfigError);
}

TEST_CASE("dynkin residual") {
    SUBCASE("f = 0 vanishes exactly") {
        const auto bm = standard_bm();
        DynkinStopping stop{true, 0.5, {}};
        const auto est =
            dynkin_residual(bm, kZero, stop, {Vec{0.0}, {1}}, quick_params(0.01, 12), 200);
        CHECK(est.mean == 0.0);
        CHECK(est.std_error == 0.0);
    }

    SUBCASE("constant f is statistically zero") {
        const auto spec = two_regime_jump_model();
        const auto c = make_field([](double, int) { return 2.0; });
        DynkinStopping stop{true, 0.5, {}};
        const auto est =
            dynkin_residual(spec, c, stop, {Vec{0.0}, {1}}, quick_params(0.01, 13, 0.05), 200);
        CHECK(std::fabs(est.mean) < 1e-6);
    }

    SUBCASE("compactly supported bump under BM") {
        const auto bm = standard_bm();
        ScalarField bump;
        bump.eval = [](const Vec& x, int) {
            const double r = x[0] / 2.0;
            return std::fabs(r) < 1.0 ? std::exp(-1.0 / (1.0 - r * r)) : 0.0;
        };
        DynkinStopping stop{true, 0.5, {}};
        const auto est =
            dynkin_residual(bm, bump, stop, {Vec{0.0}, {1}}, quick_params(5e-3, 14), 2000);
        CHECK(std::fabs(est.mean) < 3.0 * est.std_error + 0.02);
    }
}

TEST_SUITE_END();
