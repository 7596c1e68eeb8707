#include <doctest.h>

#include <cmath>
#include <limits>

#include "switchkac/errors.hpp"
#include "switchkac/model.hpp"
#include "test_helpers.hpp"

using namespace switchkac;
using namespace switchkac::testing;

TEST_SUITE_BEGIN("model");

namespace {

std::vector<HybridState> probes() {
    return {{Vec{0.0}, {1}}, {Vec{1.0}, {1}}, {Vec{-2.0}, {1}}};
}

std::vector<std::pair<HybridState, HybridState>> probe_pairs() {
    return {{{Vec{0.0}, {1}}, {Vec{1.0}, {1}}}, {{Vec{-1.0}, {1}}, {Vec{2.0}, {1}}}};
}

}  // namespace

TEST_CASE("validate_model: single-regime BM passes") {
    const auto spec = standard_bm();
    const auto report = validate_model(spec, probes(), probe_pairs());
    CHECK(report.ok);
    CHECK(report.violations.empty());
    CHECK(report.sampled_kappa == doctest::Approx(0.0));
}

TEST_CASE("validate_model: broken generator row is reported, not repaired") {
    auto spec = diffusion_model({0.0, 0.0}, {1.0, 1.0}, Matrix(2, 2, 0.0), 1.0);
    spec.generator_q = [](const Vec&, Matrix& out) {
        out.resize(2, 2);
        out(0, 0) = -0.9;  // row sums to 0.1
        out(0, 1) = 1.0;
        out(1, 0) = 1.0;
        out(1, 1) = -1.0;
    };
    auto states = probes();
    for (auto& s : states) s.regime.index = 1;
    const auto report = validate_model(spec, states, {});
    CHECK(!report.ok);
    REQUIRE(!report.violations.empty());
    bool found = false;
    for (const auto& v : report.violations) found = found || v.check == "generator row sum";
    CHECK(found);
}

TEST_CASE("validate_model: untruncated beta=1 with gamma=z has infinite second moment") {
    auto spec = two_regime_jump_model(1.0, 0.0, std::numeric_limits<double>::infinity(), 1.0);
    const auto report = validate_model(spec, probes(), {});
    CHECK(!report.ok);
    bool found = false;
    for (const auto& v : report.violations) found = found || v.check == "jump second moment infinite";
    CHECK(found);
}

TEST_CASE("validate_model: dimension mismatch is a configuration error") {
    const auto spec = standard_bm();
    CHECK_THROWS_AS(validate_model(spec, {{Vec{0.0, 0.0}, {1}}}, {}), ConfigError);
    CHECK_THROWS_AS(validate_model(spec, {}, {}), ConfigError);
}

TEST_CASE("apply_generator: classical diffusion terms") {
    const auto spec = standard_bm();

    // f = x^2: (1/2) sigma^2 f'' = 1.
    const auto quadratic = make_field([](double x, int) { return x * x; });
    CHECK(apply_generator(spec, quadratic, {Vec{0.7}, {1}}) == doctest::Approx(1.0).epsilon(1e-6));

    // f constant: everything vanishes.
    const auto constant = make_field([](double, int) { return 3.5; });
    CHECK(apply_generator(spec, constant, {Vec{0.7}, {1}}) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("apply_generator: switching term") {
    Matrix q(2, 2, 0.0);
    q(0, 0) = -1.0;
    q(0, 1) = 1.0;
    q(1, 0) = 2.0;
    q(1, 1) = -2.0;
    const auto spec = diffusion_model({0.0, 0.0}, {0.0, 0.0}, q, 2.0);
    const auto indicator = make_field([](double, int i) { return i == 2 ? 1.0 : 0.0; });
    CHECK(apply_generator(spec, indicator, {Vec{0.0}, {1}}) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(apply_generator(spec, indicator, {Vec{0.0}, {2}}) == doctest::Approx(-2.0).epsilon(1e-9));
}

TEST_CASE("apply_generator equals the sum of its four terms and is linear") {
    auto spec = two_regime_jump_model();
    spec.drift = [](const Vec& x, int i, Vec& out) { out.assign(1, 0.1 * x[0] + 0.05 * i); };

    // Analytic derivatives keep the comparison at quadrature precision; the
    // finite-difference fallback carries an eps/h^2 noise floor near 2e-6.
    auto gaussian_field = [](double amp) {
        ScalarField field;
        field.eval = [amp](const Vec& x, int i) {
            return amp * std::exp(-x[0] * x[0]) * (1.0 + 0.3 * i);
        };
        field.gradient = [amp](const Vec& x, int i, Vec& out) {
            out.assign(1, amp * -2.0 * x[0] * std::exp(-x[0] * x[0]) * (1.0 + 0.3 * i));
        };
        field.hessian = [amp](const Vec& x, int i, Matrix& out) {
            out.resize(1, 1);
            out(0, 0) = amp * (4.0 * x[0] * x[0] - 2.0) * std::exp(-x[0] * x[0]) * (1.0 + 0.3 * i);
        };
        return field;
    };
    ScalarField cos_field;
    cos_field.eval = [](const Vec& x, int i) { return std::cos(x[0]) + 0.1 * i; };
    cos_field.gradient = [](const Vec& x, int, Vec& out) { out.assign(1, -std::sin(x[0])); };
    cos_field.hessian = [](const Vec& x, int, Matrix& out) {
        out.resize(1, 1);
        out(0, 0) = -std::cos(x[0]);
    };

    const ScalarField f = gaussian_field(1.0);
    const ScalarField g = cos_field;
    const HybridState state{Vec{0.4}, {2}};

    // Independent term-by-term recomputation.
    Vec grad;
    field_gradient(f, state.x, 2, grad);
    Matrix hess;
    field_hessian(f, state.x, 2, hess);
    Vec b;
    spec.drift(state.x, 2, b);
    Matrix sigma;
    spec.diffusion(state.x, 2, sigma);
    Matrix q;
    spec.generator_q(state.x, q);
    const double drift_term = grad[0] * b[0];
    const double diff_term = 0.5 * sigma(0, 0) * sigma(0, 0) * hess(0, 0);
    const double switch_term = q(1, 0) * (f.eval(state.x, 1) - f.eval(state.x, 2));
    const double jump_term = levy_compensated_integral(spec, f, state);
    const double total = apply_generator(spec, f, state);
    CHECK(total == doctest::Approx(drift_term + diff_term + switch_term + jump_term).epsilon(1e-10));

    // Linearity in f, analytic derivatives: quadrature precision.
    ScalarField combo;
    combo.eval = [&](const Vec& x, int i) { return 2.0 * f.eval(x, i) - 3.0 * g.eval(x, i); };
    combo.gradient = [&](const Vec& x, int i, Vec& out) {
        Vec gf, gg;
        f.gradient(x, i, gf);
        g.gradient(x, i, gg);
        out.assign(1, 2.0 * gf[0] - 3.0 * gg[0]);
    };
    combo.hessian = [&](const Vec& x, int i, Matrix& out) {
        Matrix hf, hg;
        f.hessian(x, i, hf);
        g.hessian(x, i, hg);
        out.resize(1, 1);
        out(0, 0) = 2.0 * hf(0, 0) - 3.0 * hg(0, 0);
    };
    const double lhs = apply_generator(spec, combo, state);
    const double rhs = 2.0 * apply_generator(spec, f, state) - 3.0 * apply_generator(spec, g, state);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));

    // Finite-difference fallback stays linear within its noise floor.
    const auto f_fd = make_field([](double x, int i) { return std::exp(-x * x) * (1.0 + 0.3 * i); });
    const auto g_fd = make_field([](double x, int i) { return std::cos(x) + 0.1 * i; });
    const auto combo_fd = make_field(
        [&](double x, int i) { return 2.0 * f_fd.eval(Vec{x}, i) - 3.0 * g_fd.eval(Vec{x}, i); });
    const double lhs_fd = apply_generator(spec, combo_fd, state);
    const double rhs_fd =
        2.0 * apply_generator(spec, f_fd, state) - 3.0 * apply_generator(spec, g_fd, state);
    CHECK(std::fabs(lhs_fd - rhs_fd) < 2e-5);
}

TEST_CASE("levy_compensated_integral closed forms") {
    const HybridState state{Vec{0.0}, {1}};

    SUBCASE("compound poisson with gamma = z and f = x^2 gives lambda * E[z^2]") {
        auto spec = two_regime_jump_model();
        CompoundPoissonSpec cp;
        cp.rate = 2.0;
        cp.sample_mark = [](RngStream&, Vec& z) { z.assign(1, 1.0); };
        cp.mark_tail_prob = [](double r) { return r < 1.0 ? 1.0 : 0.0; };
        cp.mark_nodes = {Vec{1.0}, Vec{-2.0}};
        cp.mark_weights = {0.5, 0.5};
        spec.levy = {cp};
        spec.jump_coeff = [](const Vec&, int, const Vec& z, Vec& out) { out.assign(1, z[0]); };
        const auto f = make_field([](double x, int) { return x * x; });
        const double second_moment = 0.5 * 1.0 + 0.5 * 4.0;
        CHECK(levy_compensated_integral(spec, f, state) ==
              doctest::Approx(2.0 * second_moment).epsilon(1e-9));
    }

    SUBCASE("linear f has zero Taylor remainder") {
        auto spec = two_regime_jump_model();
        const auto f = make_field([](double x, int) { return 3.0 * x + 1.0; });
        CHECK(levy_compensated_integral(spec, f, state) == doctest::Approx(0.0).epsilon(1e-9));
    }

    SUBCASE("stable-like truncated closed form for f = x^2, gamma = z") {
        // integrand is exactly z^2: 2 (Z^{2-b} - d^{2-b}) / (2-b).
        const double beta = 0.5, lo = 0.05, hi = 2.0;
        auto spec = two_regime_jump_model(beta, lo, hi, 1.0);
        const auto f = make_field([](double x, int) { return x * x; });
        const double oracle =
            2.0 * (std::pow(hi, 2.0 - beta) - std::pow(lo, 2.0 - beta)) / (2.0 - beta);
        CHECK(levy_compensated_integral(spec, f, state) == doctest::Approx(oracle).epsilon(1e-8));
    }
}

TEST_CASE("stable-like family integrability in the Example-2.4 regime") {
    // gamma = g1 |z|^{b1} (|z|<=1) + g2 |z|^{b2} (|z|>1), finite when
    // b1 > beta/2 and b2 < beta/2.
    const double beta = 1.2, b1 = 0.8, b2 = 0.4;
    ModelSpec spec = two_regime_jump_model(beta, 0.0, std::numeric_limits<double>::infinity(), 1.0);
    spec.jump_coeff = [=](const Vec&, int, const Vec& z, Vec& out) {
        const double az = std::fabs(z[0]);
        out.assign(1, az <= 1.0 ? std::pow(az, b1) : std::pow(az, b2));
    };
    const auto f = make_field([](double x, int) { return 1.0 / (1.0 + x * x); });
    for (double x : {0.0, 0.5, -1.5}) {
        const double value = levy_compensated_integral(spec, f, {Vec{x}, {1}});
        CHECK(std::isfinite(value));
    }
}

TEST_SUITE_END();
