#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "switchkac/errors.hpp"
#include "switchkac/levy.hpp"
#include "switchkac/model.hpp"
#include "switchkac/stats.hpp"
#include "test_helpers.hpp"

using namespace switchkac;
using switchkac::testing::two_regime_jump_model;

namespace {

LevyMeasureSpec stable(double beta, double inner, double outer) {
    return {StableLikeSpec{beta, inner, outer}};
}

// Two-point compound Poisson: marks +1.5 / -0.5 with probabilities 0.6 / 0.4.
LevyMeasureSpec two_point_cp(double rate) {
    CompoundPoissonSpec cp;
    cp.rate = rate;
    cp.sample_mark = [](RngStream& rng, Vec& z) { z.assign(1, rng.uniform() < 0.6 ? 1.5 : -0.5); };
    cp.mark_tail_prob = [](double r) {
        double p = 0.0;
        if (1.5 > r) p += 0.6;
        if (0.5 > r) p += 0.4;
        return p;
    };
    cp.mark_nodes = {Vec{1.5}, Vec{-0.5}};
    cp.mark_weights = {0.6, 0.4};
    return {cp};
}

// Oracle: closed-form antiderivative of the stable-like density.
double stable_tail_oracle(double beta, double lo, double hi) {
    return 2.0 * (std::pow(lo, -beta) - std::pow(hi, -beta)) / beta;
}

}  // namespace

TEST_SUITE_BEGIN("levy");

TEST_CASE("tail mass closed forms") {
    // Stable-like with (0, inf) cutoffs: 2 delta^-beta / beta.
    const auto unbounded = stable(1.0, 0.0, std::numeric_limits<double>::infinity());
    CHECK(tail_mass(unbounded, 0.5) == doctest::Approx(2.0 * std::pow(0.5, -1.0) / 1.0));
    CHECK(tail_mass(unbounded, 2.0) == doctest::Approx(1.0));

    // Truncated: cross-check against adaptive quadrature of the density.
    const auto truncated = stable(0.5, 0.05, 2.0);
    const double closed = stable_tail_oracle(0.5, 0.05, 2.0);
    CHECK(tail_mass(truncated, 0.05) == doctest::Approx(closed).epsilon(1e-12));
    const double by_quadrature =
        integrate_levy(truncated, 0.05, std::numeric_limits<double>::infinity(),
                       [](double) { return 1.0; });
    CHECK(by_quadrature == doctest::Approx(closed).epsilon(1e-9));

    // Compound Poisson with every mark above delta: the whole rate.
    CHECK(tail_mass(two_point_cp(3.0), 0.1) == doctest::Approx(3.0));
    // delta at/above the outer cutoff: empty tail.
    CHECK(tail_mass(truncated, 2.0) == doctest::Approx(0.0));
    CHECK(tail_mass(truncated, 5.0) == doctest::Approx(0.0));
}

TEST_CASE("sample_jumps: skeleton law and bookkeeping") {
    const auto measure = two_point_cp(2.0);
    const double horizon = 10.0;

    std::vector<std::uint64_t> counts;
    double total = 0.0;
    const int runs = 20000;
    for (int r = 0; r < runs; ++r) {
        RngStream rng(11, 0, static_cast<std::uint64_t>(r));
        const auto jumps = sample_jumps(measure, 0.0, horizon, rng);
        counts.push_back(jumps.size());
        total += static_cast<double>(jumps.size());
        if (r == 0) {
            for (std::size_t k = 1; k < jumps.size(); ++k)
                CHECK(jumps[k].time >= jumps[k - 1].time);
            for (const auto& j : jumps) {
                CHECK(j.time >= 0.0);
                CHECK(j.time <= horizon);
            }
        }
    }
    // Poisson-mean oracle: E[count] = T * tail_mass = 20.
    const double mean = total / runs;
    const double se = std::sqrt(20.0 / runs);
    CHECK(std::fabs(mean - 20.0) < 3.0 * se);
    CHECK(chi_square_poisson_gof(counts, 20.0).p_value > 0.01);
}

TEST_CASE("sample_jumps: marks stay above the truncation level") {
    const auto measure = stable(0.5, 0.0, std::numeric_limits<double>::infinity());
    RngStream rng(5, 0, 0);
    const auto jumps = sample_jumps(measure, 0.25, 50.0, rng);
    CHECK(!jumps.empty());
    for (const auto& j : jumps) CHECK(std::fabs(j.mark[0]) > 0.25);

    CHECK_THROWS_AS(sample_jumps(measure, 0.0, 1.0, rng), ConfigError);
    // delta at the outer cutoff: empty list.
    RngStream rng2(5, 0, 1);
    CHECK(sample_jumps(stable(0.5, 0.05, 2.0), 2.0, 10.0, rng2).empty());
}

TEST_CASE("stable tail sampler matches the normalized tail cdf") {
    const StableLikeSpec st{0.7, 0.05, 3.0};
    const LevyMeasureSpec measure{st};
    const double delta = 0.1;
    const double mass = tail_mass(measure, delta);

    std::vector<double> radii;
    RngStream rng(17, 0, 0);
    while (radii.size() < 10000) {
        for (const auto& j : sample_jumps(measure, delta, 100.0, rng))
            radii.push_back(std::fabs(j.mark[0]));
    }
    radii.resize(10000);
    std::sort(radii.begin(), radii.end());

    auto radius_cdf = [&](double r) {
        if (r <= delta) return 0.0;
        if (r >= st.outer_cutoff) return 1.0;
        return stable_tail_oracle(st.beta, delta, r) / mass;
    };
    CHECK(ks_statistic(radii, radius_cdf) < ks_critical_1pct(radii.size()));
}

TEST_CASE("compensator correction") {
    auto spec = two_regime_jump_model();  // gamma = 0.4 z, symmetric measure
    const HybridState state{Vec{0.3}, {1}};

    SUBCASE("odd gamma against a symmetric measure vanishes") {
        const Vec corr = compensator_correction(spec, state, 0.1);
        CHECK(std::fabs(corr[0]) < 1e-12);
    }

    SUBCASE("compound poisson moment oracle: -lambda * mu") {
        spec.levy = two_point_cp(2.0);
        spec.jump_coeff = [](const Vec&, int, const Vec& z, Vec& out) { out.assign(1, z[0]); };
        const double mark_mean = 0.6 * 1.5 + 0.4 * (-0.5);  // 0.7
        const Vec corr = compensator_correction(spec, state, 0.0);
        CHECK(corr[0] == doctest::Approx(-2.0 * mark_mean).epsilon(1e-12));
    }

    SUBCASE("delta at the outer cutoff gives zero") {
        const Vec corr = compensator_correction(spec, state, 2.0);
        CHECK(corr[0] == 0.0);
    }

    SUBCASE("annulus identity") {
        // correction(d1) - correction(d2) = - int_{d1<|z|<=d2} gamma nu(dz)
        spec.jump_coeff = [](const Vec&, int, const Vec& z, Vec& out) {
            out.assign(1, z[0] + 0.1 * z[0] * z[0]);  // not odd
        };
        const double d1 = 0.1, d2 = 0.5;
        const Vec c1 = compensator_correction(spec, state, d1);
        const Vec c2 = compensator_correction(spec, state, d2);
        const double annulus = integrate_levy(spec.levy, d1, d2,
                                              [](double z) { return z + 0.1 * z * z; });
        CHECK(c1[0] - c2[0] == doctest::Approx(-annulus).epsilon(1e-8));
    }
}

TEST_CASE("small jump second moment") {
    auto spec = two_regime_jump_model(1.0, 0.0, std::numeric_limits<double>::infinity(), 1.0);
    const HybridState state{Vec{0.0}, {1}};

    // gamma = z, beta = 1, cutoffs (0, inf): integral = 2 delta.
    CHECK(small_jump_second_moment(spec, state, 0.35) == doctest::Approx(0.7).epsilon(1e-7));
    CHECK(small_jump_second_moment(spec, state, 0.05) == doctest::Approx(0.1).epsilon(1e-7));

    // Monotone decreasing toward zero as delta shrinks.
    double prev = small_jump_second_moment(spec, state, 0.1);
    for (double delta : {0.05, 0.01, 0.001}) {
        const double cur = small_jump_second_moment(spec, state, delta);
        CHECK(cur < prev);
        prev = cur;
    }
    CHECK(prev < 0.01);

    // gamma = 0: vanishes.
    spec.jump_coeff = [](const Vec&, int, const Vec&, Vec& out) { out.assign(1, 0.0); };
    CHECK(small_jump_second_moment(spec, state, 0.35) == 0.0);
}

TEST_CASE("suggested truncation meets the bias budget") {
    auto spec = two_regime_jump_model();
    const HybridState state{Vec{0.0}, {1}};
    const double delta = suggest_truncation(spec, state, 1.0, 1.0);
    CHECK(small_jump_second_moment(spec, state, delta) <= 1e-4);
}

TEST_SUITE_END();
