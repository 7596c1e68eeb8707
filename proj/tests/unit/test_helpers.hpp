#pragma once

#include <cmath>
#include <functional>

#include "switchkac/model.hpp"

namespace switchkac::testing {

inline ScalarField make_field(std::function<double(double, int)> f) {
    return ScalarField{[f = std::move(f)](const Vec& x, int i) { return f(x[0], i); }, {}, {}};
}

// 1-D single- or multi-regime model with constant coefficients and no jumps.
inline ModelSpec diffusion_model(Vec drifts, Vec sigmas, Matrix q, double q_bound) {
    ModelSpec spec;
    spec.n = 1;
    spec.m = static_cast<int>(sigmas.size());
    spec.levy = no_jumps();
    spec.q_bound = q_bound;
    spec.drift = [d = std::move(drifts)](const Vec&, int i, Vec& out) { out.assign(1, d[i - 1]); };
    spec.diffusion = [s = std::move(sigmas)](const Vec&, int i, Matrix& out) {
        out.resize(1, 1);
        out(0, 0) = s[i - 1];
    };
    spec.jump_coeff = [](const Vec&, int, const Vec&, Vec& out) { out.assign(1, 0.0); };
    spec.generator_q = [qm = std::move(q)](const Vec&, Matrix& out) { out = qm; };
    spec.jump_coeff_state_independent = true;
    return spec;
}

inline ModelSpec standard_bm() {
    return diffusion_model({0.0}, {1.0}, Matrix(1, 1, 0.0), 0.0);
}

// Two regimes, sigma = (1, 2), symmetric unit-rate switching, jumps
// gamma(x, i, z) = jump_scale * z with a truncated stable-like measure.
inline ModelSpec two_regime_jump_model(double beta = 0.5, double inner = 0.05, double outer = 2.0,
                                       double jump_scale = 0.4) {
    ModelSpec spec = diffusion_model({0.0, 0.0}, {1.0, 2.0},
                                     Matrix(2, 2, 0.0), 1.0);
    Matrix q(2, 2, 0.0);
    q(0, 0) = -1.0;
    q(0, 1) = 1.0;
    q(1, 0) = 1.0;
    q(1, 1) = -1.0;
    spec.generator_q = [q](const Vec&, Matrix& out) { out = q; };
    spec.levy = LevyMeasureSpec{StableLikeSpec{beta, inner, outer}};
    spec.jump_coeff = [jump_scale](const Vec&, int, const Vec& z, Vec& out) {
        out.assign(1, jump_scale * z[0]);
    };
    spec.jump_coeff_state_independent = true;
    return spec;
}

// Scaling-squaring matrix exponential, test-only oracle helper.
inline Matrix matrix_exponential(Matrix a) {
    const std::size_t n = a.rows;
    double norm = 0.0;
    for (double v : a.data) norm = std::max(norm, std::fabs(v));
    int squarings = 0;
    while (norm > 0.25) {
        norm *= 0.5;
        ++squarings;
    }
    const double scale = std::ldexp(1.0, -squarings);
    for (double& v : a.data) v *= scale;

    auto matmul = [n](const Matrix& x, const Matrix& y) {
        Matrix out(n, n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k)
                for (std::size_t j = 0; j < n; ++j) out(i, j) += x(i, k) * y(k, j);
        return out;
    };

    Matrix result(n, n, 0.0), term(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) result(i, i) = term(i, i) = 1.0;
    for (int k = 1; k <= 24; ++k) {
        term = matmul(term, a);
        for (double& v : term.data) v /= static_cast<double>(k);
        for (std::size_t e = 0; e < result.data.size(); ++e) result.data[e] += term.data[e];
    }
    for (int s = 0; s < squarings; ++s) result = matmul(result, result);
    return result;
}

}  // namespace switchkac::testing
