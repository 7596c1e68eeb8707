#include "switchkac/pide.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "switchkac/errors.hpp"

namespace switchkac {

namespace {

struct StencilEntry {
    int node;
    double coef;
};

// Static spatial discretization of everything except the implicit diffusion
// solve: drift stencils, jump stencils (with the small-displacement Taylor
// part folded into an effective diffusion), per-node generator matrices.
struct Discretization {
    int regimes = 1;
    int nodes = 0;
    double dx = 0.0;
    std::vector<Vec> a_eff;                                  // [i][k] sigma^2 + jump fold
    std::vector<std::vector<std::vector<StencilEntry>>> lin;  // [i][k] same-regime entries
    std::vector<Vec> lin_const;                              // [i][k] extension constants
    std::vector<Matrix> q_at_node;                           // [k]
    // Ghost values for the implicit second difference at the two edges:
    // contribution of the ghost node expressed on nodes {0,1} / {K-2,K-1}
    // plus a constant (payoff extensions).
    double ghost_left_w0 = 1.0, ghost_left_w1 = 0.0;
    double ghost_right_w0 = 1.0, ghost_right_w1 = 0.0;  // w0 on K-1, w1 on K-2
    std::vector<double> ghost_left_const, ghost_right_const;  // [i]
    double lambda_large = 0.0;
    double max_abs_drift = 0.0;
    double max_row_rate = 0.0;
};

// Resolves "value of u at node index j" (possibly out of range) into stencil
// entries / a constant under the extension rule.
void resolve_node(const Grid1D& grid, const Extension& ext, int regime, int j, double coef,
                  std::vector<StencilEntry>& entries, double& constant) {
    const int last = grid.n_nodes - 1;
    if (j >= 0 && j <= last) {
        entries.push_back({j, coef});
        return;
    }
    switch (ext.kind) {
        case ExtensionKind::ConstantContinuation:
            entries.push_back({j < 0 ? 0 : last, coef});
            return;
        case ExtensionKind::LinearExtrapolation: {
            if (j < 0) {
                const double s = static_cast<double>(j);  // u_j = u0 + s (u1 - u0)
                entries.push_back({0, coef * (1.0 - s)});
                entries.push_back({1, coef * s});
            } else {
                const double s = static_cast<double>(j - last);
                entries.push_back({last, coef * (1.0 + s)});
                entries.push_back({last - 1, coef * (-s)});
            }
            return;
        }
        case ExtensionKind::PayoffFormula: {
            const Vec xq{grid.x_min + grid.dx() * static_cast<double>(j)};
            constant += coef * ext.formula.eval(xq, regime);
            return;
        }
    }
}

// Resolves "value of u at off-grid point y" by linear interpolation inside
// the grid and the extension rule outside.
void resolve_point(const Grid1D& grid, const Extension& ext, int regime, double y, double coef,
                   std::vector<StencilEntry>& entries, double& constant) {
    const int last = grid.n_nodes - 1;
    if (y >= grid.x_min && y <= grid.x_max) {
        const double s = (y - grid.x_min) / grid.dx();
        int j = std::min(static_cast<int>(s), last - 1);
        const double theta = s - static_cast<double>(j);
        entries.push_back({j, coef * (1.0 - theta)});
        entries.push_back({j + 1, coef * theta});
        return;
    }
    switch (ext.kind) {
        case ExtensionKind::ConstantContinuation:
            entries.push_back({y < grid.x_min ? 0 : last, coef});
            return;
        case ExtensionKind::LinearExtrapolation: {
            const double s = (y - grid.x_min) / grid.dx();
            if (y < grid.x_min) {
                entries.push_back({0, coef * (1.0 - s)});
                entries.push_back({1, coef * s});
            } else {
                const double r = s - static_cast<double>(last);
                entries.push_back({last, coef * (1.0 + r)});
                entries.push_back({last - 1, coef * (-r)});
            }
            return;
        }
        case ExtensionKind::PayoffFormula: {
            const Vec xq{y};
            constant += coef * ext.formula.eval(xq, regime);
            return;
        }
    }
}

Discretization build_discretization(const ModelSpec& spec, const Grid1D& grid,
                                    const Extension& ext, const QuadratureParams& quad) {
    if (spec.n != 1) throw ConfigError("pide: only 1-D state space is supported");
    if (grid.n_nodes < 3) throw ConfigError("pide: grid needs at least 3 nodes");
    if (grid.m != spec.m) throw ConfigError("pide: grid regime count does not match the model");

    Discretization d;
    d.regimes = spec.m;
    d.nodes = grid.n_nodes;
    d.dx = grid.dx();
    d.a_eff.assign(spec.m, Vec(grid.n_nodes, 0.0));
    d.lin.assign(spec.m, std::vector<std::vector<StencilEntry>>(grid.n_nodes));
    d.lin_const.assign(spec.m, Vec(grid.n_nodes, 0.0));
    d.q_at_node.resize(grid.n_nodes);
    d.ghost_left_const.assign(spec.m, 0.0);
    d.ghost_right_const.assign(spec.m, 0.0);

    const bool has_jumps = spec.levy.support_radius() > 0.0;
    std::vector<WeightedMark> jump_nodes;
    if (has_jumps) {
        // Finite-activity variants carry their own finite node sets; an
        // unbounded stable-like measure is rejected inside the node builder.
        jump_nodes = levy_quadrature_nodes(spec.levy, 0.0, std::numeric_limits<double>::infinity(),
                                           quad.base_level + 1);
    }

    Vec xk(1), drift_out(1), gamma_out(1);
    Matrix sigma_out;
    for (int k = 0; k < grid.n_nodes; ++k) {
        xk[0] = grid.node(k);
        spec.generator_q(xk, d.q_at_node[k]);
        for (int i = 1; i <= spec.m; ++i) {
            double row_rate = 0.0;
            for (int j = 1; j <= spec.m; ++j)
                if (j != i) row_rate += d.q_at_node[k](i - 1, j - 1);
            d.max_row_rate = std::max(d.max_row_rate, row_rate);

            spec.diffusion(xk, i, sigma_out);
            d.a_eff[i - 1][k] = sigma_out(0, 0) * sigma_out(0, 0);

            auto& entries = d.lin[i - 1][k];
            double& constant = d.lin_const[i - 1][k];

            spec.drift(xk, i, drift_out);
            const double b = drift_out[0];
            d.max_abs_drift = std::max(d.max_abs_drift, std::fabs(b));
            if (b != 0.0) {
                resolve_node(grid, ext, i, k + 1, b / (2.0 * d.dx), entries, constant);
                resolve_node(grid, ext, i, k - 1, -b / (2.0 * d.dx), entries, constant);
            }

            if (has_jumps) {
                double large_mass = 0.0;
                for (const auto& node : jump_nodes) {
                    spec.jump_coeff(xk, i, node.z, gamma_out);
                    const double disp = gamma_out[0];
                    if (std::fabs(disp) <= 0.5 * d.dx) {
                        // Compensated integrand collapses to its Taylor form;
                        // fold as extra (implicit) diffusion.
                        d.a_eff[i - 1][k] += node.weight * disp * disp;
                        continue;
                    }
                    large_mass += node.weight;
                    resolve_point(grid, ext, i, grid.node(k) + disp, node.weight, entries, constant);
                    entries.push_back({k, -node.weight});
                    // compensator -w * disp * D_x u, central difference
                    resolve_node(grid, ext, i, k + 1, -node.weight * disp / (2.0 * d.dx), entries,
                                 constant);
                    resolve_node(grid, ext, i, k - 1, node.weight * disp / (2.0 * d.dx), entries,
                                 constant);
                }
                d.lambda_large = std::max(d.lambda_large, large_mass);
            }

            // Compact duplicate columns so the per-step sweep stays short.
            std::sort(entries.begin(), entries.end(),
                      [](const StencilEntry& a, const StencilEntry& b) { return a.node < b.node; });
            std::size_t out = 0;
            for (std::size_t e = 0; e < entries.size(); ++e) {
                if (out > 0 && entries[out - 1].node == entries[e].node)
                    entries[out - 1].coef += entries[e].coef;
                else
                    entries[out++] = entries[e];
            }
            entries.resize(out);
        }
    }

    // Ghost-node resolution for the implicit second difference at the edges.
    switch (ext.kind) {
        case ExtensionKind::ConstantContinuation:
            d.ghost_left_w0 = 1.0;
            d.ghost_left_w1 = 0.0;
            d.ghost_right_w0 = 1.0;
            d.ghost_right_w1 = 0.0;
            break;
        case ExtensionKind::LinearExtrapolation:
            d.ghost_left_w0 = 2.0;
            d.ghost_left_w1 = -1.0;
            d.ghost_right_w0 = 2.0;
            d.ghost_right_w1 = -1.0;
            break;
        case ExtensionKind::PayoffFormula: {
            d.ghost_left_w0 = d.ghost_left_w1 = 0.0;
            d.ghost_right_w0 = d.ghost_right_w1 = 0.0;
            const Vec xl{grid.x_min - d.dx};
            const Vec xr{grid.x_max + d.dx};
            for (int i = 1; i <= spec.m; ++i) {
                d.ghost_left_const[i - 1] = ext.formula.eval(xl, i);
                d.ghost_right_const[i - 1] = ext.formula.eval(xr, i);
            }
            break;
        }
    }
    return d;
}

double second_difference(const Discretization& d, const Vec& u, int regime, int k) {
    const int last = d.nodes - 1;
    double left, right;
    if (k == 0)
        left = d.ghost_left_w0 * u[0] + d.ghost_left_w1 * u[1] + d.ghost_left_const[regime - 1];
    else
        left = u[k - 1];
    if (k == last)
        right = d.ghost_right_w0 * u[last] + d.ghost_right_w1 * u[last - 1] +
                d.ghost_right_const[regime - 1];
    else
        right = u[k + 1];
    return (right - 2.0 * u[k] + left) / (d.dx * d.dx);
}

// Explicit part at one node: stencil entries + extension constants + coupling.
double explicit_part(const Discretization& d, const std::vector<Vec>& u, int regime, int k) {
    double acc = d.lin_const[regime - 1][k];
    for (const auto& entry : d.lin[regime - 1][k]) acc += entry.coef * u[regime - 1][entry.node];
    const Matrix& q = d.q_at_node[k];
    const double uk = u[regime - 1][k];
    for (int j = 1; j <= d.regimes; ++j) {
        if (j == regime) continue;
        acc += q(regime - 1, j - 1) * (u[j - 1][k] - uk);
    }
    return acc;
}

}  // namespace

double PideSolution::value_at(double t, double x, int regime) const {
    if (times.empty()) throw ConfigError("PideSolution: empty solution");
    std::size_t best = 0;
    for (std::size_t level = 1; level < times.size(); ++level)
        if (std::fabs(times[level] - t) < std::fabs(times[best] - t)) best = level;
    const Vec& u = values[best][regime - 1];
    const double s = (x - grid.x_min) / grid.dx();
    if (s <= 0.0) return u.front();
    if (s >= static_cast<double>(grid.n_nodes - 1)) return u.back();
    const int j = std::min(static_cast<int>(s), grid.n_nodes - 2);
    const double theta = s - static_cast<double>(j);
    return (1.0 - theta) * u[j] + theta * u[j + 1];
}

void PideSolution::write_csv(std::ostream& os) const {
    os << "t,x,regime,u\n";
    char line[128];
    for (std::size_t level = 0; level < times.size(); ++level) {
        for (int i = 1; i <= grid.m; ++i) {
            for (int k = 0; k < grid.n_nodes; ++k) {
                std::snprintf(line, sizeof(line), "%.17g,%.17g,%d,%.17g\n", times[level],
                              grid.node(k), i, values[level][i - 1][k]);
                os << line;
            }
        }
    }
}

std::vector<Vec> apply_discrete_generator(const ModelSpec& spec, const Grid1D& grid,
                                          const std::vector<Vec>& u, const Extension& extension,
                                          const QuadratureParams& quad) {
    if (static_cast<int>(u.size()) != spec.m)
        throw ConfigError("apply_discrete_generator: u must have one vector per regime");
    const Discretization d = build_discretization(spec, grid, extension, quad);
    std::vector<Vec> out(spec.m, Vec(grid.n_nodes, 0.0));
    for (int i = 1; i <= spec.m; ++i)
        for (int k = 0; k < grid.n_nodes; ++k)
            out[i - 1][k] = explicit_part(d, u, i, k) +
                            0.5 * d.a_eff[i - 1][k] * second_difference(d, u[i - 1], i, k);
    return out;
}

PideSolution solve_cauchy(const ModelSpec& spec, const Grid1D& grid, const TimeField& c,
                          const ScalarField& data, const TimeField* source, MarchDirection direction,
                          double horizon, int n_steps, const Extension& extension, int store_every,
                          const QuadratureParams& quad) {
    if (horizon <= 0.0 || n_steps < 1) throw ConfigError("solve_cauchy: need horizon > 0, n_steps >= 1");
    const Discretization d = build_discretization(spec, grid, extension, quad);
    const double dt = horizon / static_cast<double>(n_steps);
    const bool backward = direction == MarchDirection::Backward;

    // Explicit-part stability: dt <= dx / (max|b| + lambda_large + max row rate),
    // plus dt * max c <= 1 for the explicit kill term.
    const double denom = d.max_abs_drift + d.lambda_large + d.max_row_rate;
    if (denom > 0.0 && dt > d.dx / denom) {
        throw NumericalError("solve_cauchy: explicit step bound violated, dt * (|b| + lambda + q) / dx = " +
                                 std::to_string(dt * denom / d.dx),
                             dt, d.dx / denom);
    }
    Vec xk(1);
    double max_c = 0.0;
    for (int k = 0; k < grid.n_nodes; ++k) {
        xk[0] = grid.node(k);
        for (int i = 1; i <= spec.m; ++i)
            max_c = std::max(max_c, std::fabs(c.eval(backward ? horizon : 0.0, xk, i)));
    }
    if (dt * max_c > 1.0)
        throw NumericalError("solve_cauchy: explicit kill term unstable, dt * max|c| = " +
                                 std::to_string(dt * max_c),
                             dt, 1.0 / max_c);

    // March v_s = L v - c~ v + src~ with v(0) = data; for backward problems
    // v(s) = u(T - s), c~(s) = c(T - s), src~(s) = -g(T - s).
    std::vector<Vec> u(spec.m, Vec(grid.n_nodes));
    for (int i = 1; i <= spec.m; ++i)
        for (int k = 0; k < grid.n_nodes; ++k) {
            xk[0] = grid.node(k);
            u[i - 1][k] = data.eval(xk, i);
        }

    PideSolution solution;
    solution.grid = grid;
    auto record = [&](double s) {
        solution.times.push_back(backward ? horizon - s : s);
        solution.values.push_back(u);
    };
    record(0.0);

    std::vector<Vec> expl(spec.m, Vec(grid.n_nodes));
    std::vector<double> lower(grid.n_nodes), diag(grid.n_nodes), upper(grid.n_nodes),
        rhs(grid.n_nodes);

    for (int step = 0; step < n_steps; ++step) {
        const double s = dt * static_cast<double>(step);
        const double t_eval = backward ? horizon - s : s;

        for (int i = 1; i <= spec.m; ++i) {
            for (int k = 0; k < grid.n_nodes; ++k) {
                xk[0] = grid.node(k);
                double rate = explicit_part(d, u, i, k) - c.eval(t_eval, xk, i) * u[i - 1][k];
                if (source) {
                    const double g_val = source->eval(t_eval, xk, i);
                    rate += backward ? -g_val : g_val;
                }
                expl[i - 1][k] = rate;
            }
        }

        for (int i = 1; i <= spec.m; ++i) {
            const int last = grid.n_nodes - 1;
            for (int k = 0; k <= last; ++k) {
                const double load = 0.5 * dt * d.a_eff[i - 1][k] / (d.dx * d.dx);
                diag[k] = 1.0 + 2.0 * load;
                lower[k] = -load;
                upper[k] = -load;
                rhs[k] = u[i - 1][k] + dt * expl[i - 1][k];
            }
            // Edge rows absorb the ghost node per the extension rule.
            {
                const double load = 0.5 * dt * d.a_eff[i - 1][0] / (d.dx * d.dx);
                diag[0] = 1.0 + 2.0 * load - load * d.ghost_left_w0;
                upper[0] = -load - load * d.ghost_left_w1;
                rhs[0] += load * d.ghost_left_const[i - 1];
            }
            {
                const double load = 0.5 * dt * d.a_eff[i - 1][last] / (d.dx * d.dx);
                diag[last] = 1.0 + 2.0 * load - load * d.ghost_right_w0;
                lower[last] = -load - load * d.ghost_right_w1;
                rhs[last] += load * d.ghost_right_const[i - 1];
            }
            solve_tridiagonal(lower, diag, upper, rhs);
            u[i - 1] = rhs;
        }

        const bool at_end = step + 1 == n_steps;
        if (at_end || (store_every > 0 && (step + 1) % store_every == 0))
            record(dt * static_cast<double>(step + 1));
    }

    if (backward) {
        std::reverse(solution.times.begin(), solution.times.end());
        std::reverse(solution.values.begin(), solution.values.end());
    }
    for (const auto& level : solution.values)
        for (const auto& regime_values : level)
            if (!all_finite(regime_values))
                throw NumericalError("solve_cauchy: non-finite solution values");
    return solution;
}

PideSolution solve_dirichlet(const ModelSpec& spec, const Grid1D& grid, const ScalarField& c,
                             const ScalarField& xi, const ScalarField& eta,
                             const QuadratureParams& quad) {
    Extension ext{ExtensionKind::PayoffFormula, eta};
    const Discretization d = build_discretization(spec, grid, ext, quad);

    const int interior = grid.n_nodes - 2;
    if (interior < 1) throw ConfigError("solve_dirichlet: no interior nodes");
    for (int i = 1; i <= spec.m; ++i)
        for (int k = 1; k <= interior; ++k)
            if (d.a_eff[i - 1][k] <= 0.0)
                throw ConfigError("solve_dirichlet: degenerate diffusion on the domain");

    const auto unknown = [&](int regime, int k) { return (regime - 1) * interior + (k - 1); };
    const int size = spec.m * interior;
    Matrix a(size, size, 0.0);
    Vec rhs(size, 0.0);

    Vec xk(1);
    auto eta_at_node = [&](int node, int regime) {
        const Vec xq{grid.node(node)};
        return eta.eval(xq, regime);
    };

    for (int i = 1; i <= spec.m; ++i) {
        for (int k = 1; k <= interior; ++k) {
            const int row = unknown(i, k);
            xk[0] = grid.node(k);
            rhs[row] = xi.eval(xk, i);

            auto add = [&](int node, double coef) {
                // Boundary nodes carry eta; interior nodes are unknowns.
                if (node <= 0 || node >= grid.n_nodes - 1)
                    rhs[row] -= coef * eta_at_node(std::clamp(node, 0, grid.n_nodes - 1), i);
                else
                    a(row, unknown(i, node)) += coef;
            };

            // Diffusion (including the folded small-jump load).
            const double load = 0.5 * d.a_eff[i - 1][k] / (d.dx * d.dx);
            add(k - 1, load);
            add(k + 1, load);
            add(k, -2.0 * load);

            // Drift, compensator, and large-jump stencil entries.
            for (const auto& entry : d.lin[i - 1][k]) add(entry.node, entry.coef);
            rhs[row] -= d.lin_const[i - 1][k];

            // Regime coupling.
            const Matrix& q = d.q_at_node[k];
            for (int j = 1; j <= spec.m; ++j) {
                if (j == i) continue;
                const double rate = q(i - 1, j - 1);
                a(row, unknown(j, k)) += rate;
                a(row, unknown(i, k)) -= rate;
            }

            // Kill term.
            a(row, unknown(i, k)) -= c.eval(xk, i);
        }
    }

    Vec solved = solve_dense(a, rhs);

    PideSolution solution;
    solution.grid = grid;
    solution.times.push_back(0.0);
    solution.values.emplace_back(spec.m, Vec(grid.n_nodes, 0.0));
    for (int i = 1; i <= spec.m; ++i) {
        solution.values[0][i - 1][0] = eta_at_node(0, i);
        solution.values[0][i - 1][grid.n_nodes - 1] = eta_at_node(grid.n_nodes - 1, i);
        for (int k = 1; k <= interior; ++k) solution.values[0][i - 1][k] = solved[unknown(i, k)];
        if (!all_finite(solution.values[0][i - 1]))
            throw NumericalError("solve_dirichlet: non-finite solution values");
    }
    return solution;
}

}  // namespace switchkac
