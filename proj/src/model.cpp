#include "switchkac/model.hpp"

#include <cmath>
#include <limits>

#include "switchkac/errors.hpp"

namespace switchkac {

namespace {

double fd_step(const Vec& x) { return std::max(1e-5, 1e-5 * norm2(x)); }

}  // namespace

void field_gradient(const ScalarField& f, const Vec& x, int regime, Vec& out) {
    out.assign(x.size(), 0.0);
    if (f.gradient) {
        f.gradient(x, regime, out);
        return;
    }
    const double h = fd_step(x);
    Vec xp = x;
    for (std::size_t d = 0; d < x.size(); ++d) {
        xp[d] = x[d] + h;
        const double up = f.eval(xp, regime);
        xp[d] = x[d] - h;
        const double um = f.eval(xp, regime);
        xp[d] = x[d];
        out[d] = (up - um) / (2.0 * h);
    }
}

void field_hessian(const ScalarField& f, const Vec& x, int regime, Matrix& out) {
    const auto n = x.size();
    out.resize(n, n);
    if (f.hessian) {
        f.hessian(x, regime, out);
        return;
    }
    const double h = fd_step(x);
    const double f0 = f.eval(x, regime);
    Vec xp = x;
    for (std::size_t d = 0; d < n; ++d) {
        xp[d] = x[d] + h;
        const double up = f.eval(xp, regime);
        xp[d] = x[d] - h;
        const double um = f.eval(xp, regime);
        xp[d] = x[d];
        out(d, d) = (up - 2.0 * f0 + um) / (h * h);
    }
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            xp[a] = x[a] + h;
            xp[b] = x[b] + h;
            const double upp = f.eval(xp, regime);
            xp[b] = x[b] - h;
            const double upm = f.eval(xp, regime);
            xp[a] = x[a] - h;
            const double umm = f.eval(xp, regime);
            xp[b] = x[b] + h;
            const double ump = f.eval(xp, regime);
            xp[a] = x[a];
            xp[b] = x[b];
            out(a, b) = out(b, a) = (upp - upm - ump + umm) / (4.0 * h * h);
        }
    }
}

ValidationReport validate_model(const ModelSpec& spec, const std::vector<HybridState>& probe_points,
                                const std::vector<std::pair<HybridState, HybridState>>& probe_pairs) {
    if (probe_points.empty()) throw ConfigError("validate_model: probe set is empty");
    for (const auto& p : probe_points)
        if (static_cast<int>(p.x.size()) != spec.n)
            throw ConfigError("validate_model: probe point dimension does not match spec.n");
    for (const auto& [a, b] : probe_pairs)
        if (static_cast<int>(a.x.size()) != spec.n || static_cast<int>(b.x.size()) != spec.n)
            throw ConfigError("validate_model: probe pair dimension does not match spec.n");

    ValidationReport report;
    auto flag = [&](const std::string& check, const HybridState& where, const std::string& msg) {
        report.violations.push_back({check, where, msg});
    };

    Matrix q;
    for (const auto& p : probe_points) {
        spec.generator_q(p.x, q);
        if (static_cast<int>(q.rows) != spec.m || static_cast<int>(q.cols) != spec.m)
            throw ConfigError("validate_model: generator_q shape is not m x m");
        for (int i = 0; i < spec.m; ++i) {
            double row_sum = 0.0;
            for (int j = 0; j < spec.m; ++j) {
                const double qij = q(i, j);
                row_sum += qij;
                if (i != j) {
                    if (qij < -1e-12)
                        flag("generator off-diagonal sign", p, "q_ij < 0 in row " + std::to_string(i + 1));
                    if (qij > spec.q_bound + 1e-12)
                        flag("generator rate bound", p,
                             "q_ij exceeds q_bound in row " + std::to_string(i + 1));
                }
            }
            if (std::fabs(row_sum) > 1e-12)
                flag("generator row sum", p, "row " + std::to_string(i + 1) + " sums to " +
                                                 std::to_string(row_sum));
        }
    }

    // Jump second moment: finite for every probe, per the (A1) growth bound.
    Vec gamma(spec.n), zv(1);
    const bool has_jumps = spec.levy.support_radius() > 0.0;
    for (const auto& p : probe_points) {
        if (!has_jumps) break;
        for (int i = 1; i <= spec.m; ++i) {
            const HybridState probe{p.x, {i}};
            try {
                double second_moment = 0.0;
                if (spec.levy.dimension() == 1 &&
                    std::holds_alternative<StableLikeSpec>(spec.levy.variant)) {
                    second_moment = integrate_levy(
                        spec.levy, 0.0, std::numeric_limits<double>::infinity(),
                        [&](double z) {
                            zv[0] = z;
                            spec.jump_coeff(p.x, i, zv, gamma);
                            return dot(gamma, gamma);
                        },
                        1e-8);
                } else {
                    const auto nodes = levy_quadrature_nodes(
                        spec.levy, 0.0, std::numeric_limits<double>::infinity(), 1);
                    for (const auto& node : nodes) {
                        spec.jump_coeff(p.x, i, node.z, gamma);
                        second_moment += node.weight * dot(gamma, gamma);
                    }
                }
                const double growth = second_moment / (1.0 + dot(p.x, p.x));
                report.sampled_kappa = std::max(report.sampled_kappa, growth);
            } catch (const NumericalError&) {
                flag("jump second moment infinite", probe,
                     "integral of |gamma|^2 nu(dz) did not converge");
            }
        }
    }

    // Lipschitz quotients of drift and diffusion over the probe pairs.
    Vec bx, by;
    Matrix sx, sy;
    for (const auto& [a, b] : probe_pairs) {
        Vec diff(spec.n);
        for (int d = 0; d < spec.n; ++d) diff[d] = a.x[d] - b.x[d];
        const double dist_sq = dot(diff, diff);
        if (dist_sq == 0.0) continue;
        for (int i = 1; i <= spec.m; ++i) {
            spec.drift(a.x, i, bx);
            spec.drift(b.x, i, by);
            double num = 0.0;
            for (int d = 0; d < spec.n; ++d) num += (bx[d] - by[d]) * (bx[d] - by[d]);
            spec.diffusion(a.x, i, sx);
            spec.diffusion(b.x, i, sy);
            for (std::size_t k = 0; k < sx.data.size(); ++k)
                num += (sx.data[k] - sy.data[k]) * (sx.data[k] - sy.data[k]);
            report.sampled_kappa = std::max(report.sampled_kappa, num / dist_sq);
        }
    }

    report.ok = report.violations.empty();
    return report;
}

double levy_compensated_integral(const ModelSpec& spec, const ScalarField& f,
                                 const HybridState& state, const QuadratureParams& quad) {
    if (spec.levy.support_radius() == 0.0) return 0.0;
    const Vec& x = state.x;
    const int i = state.regime.index;

    Vec grad;
    field_gradient(f, x, i, grad);
    Matrix hess;
    bool have_hess = false;
    const double f0 = f.eval(x, i);
    const double taylor_cut = 1e-3 * std::max(1.0, norm2(x));

    Vec gamma(spec.n), shifted(spec.n), zv(1);
    auto taylor_form = [&]() {
        if (!have_hess) {
            field_hessian(f, x, i, hess);
            have_hess = true;
        }
        double acc = 0.0;
        for (int a = 0; a < spec.n; ++a)
            for (int b = 0; b < spec.n; ++b) acc += gamma[a] * hess(a, b) * gamma[b];
        return 0.5 * acc;
    };
    auto exact_form = [&]() {
        for (int d = 0; d < spec.n; ++d) shifted[d] = x[d] + gamma[d];
        return f.eval(shifted, i) - f0 - dot(grad, gamma);
    };
    // Blend the Taylor and exact forms over [cut/2, cut] so the integrand
    // stays smooth; a hard switch inside a quadrature panel stalls the
    // refinement comparison.
    auto integrand_for = [&](const Vec& z) {
        spec.jump_coeff(x, i, z, gamma);
        const double g_norm = norm2(gamma);
        if (g_norm <= 0.5 * taylor_cut) return taylor_form();
        if (g_norm >= taylor_cut) return exact_form();
        const double s = (g_norm - 0.5 * taylor_cut) / (0.5 * taylor_cut);
        const double w = s * s * (3.0 - 2.0 * s);
        return w * exact_form() + (1.0 - w) * taylor_form();
    };

    if (spec.levy.dimension() == 1 && std::holds_alternative<StableLikeSpec>(spec.levy.variant)) {
        return integrate_levy(
            spec.levy, 0.0, std::numeric_limits<double>::infinity(),
            [&](double z) {
                zv[0] = z;
                return integrand_for(zv);
            },
            quad.abs_tol, quad.base_level);
    }
    const auto nodes =
        levy_quadrature_nodes(spec.levy, 0.0, std::numeric_limits<double>::infinity(), quad.base_level);
    double acc = 0.0;
    for (const auto& node : nodes) acc += node.weight * integrand_for(node.z);
    return acc;
}

double apply_generator(const ModelSpec& spec, const ScalarField& f, const HybridState& state,
                       const QuadratureParams& quad) {
    const Vec& x = state.x;
    const int i = state.regime.index;

    Vec grad;
    field_gradient(f, x, i, grad);
    Vec b;
    spec.drift(x, i, b);
    double value = dot(grad, b);

    Matrix sigma, hess;
    spec.diffusion(x, i, sigma);
    field_hessian(f, x, i, hess);
    // (1/2) tr(sigma sigma' H) = (1/2) sum_ab (sigma sigma')_ab H_ab
    for (int a = 0; a < spec.n; ++a) {
        for (int c = 0; c < spec.n; ++c) {
            double ss = 0.0;
            for (int k = 0; k < spec.n; ++k) ss += sigma(a, k) * sigma(c, k);
            value += 0.5 * ss * hess(a, c);
        }
    }

    Matrix q;
    spec.generator_q(x, q);
    const double fi = f.eval(x, i);
    for (int j = 1; j <= spec.m; ++j) {
        if (j == i) continue;
        value += q(i - 1, j - 1) * (f.eval(x, j) - fi);
    }

    value += levy_compensated_integral(spec, f, state, quad);
    return value;
}

}  // namespace switchkac
