#pragma once

#include <iosfwd>
#include <vector>

#include "switchkac/feynman_kac.hpp"
#include "switchkac/model.hpp"

namespace switchkac {

// Uniform 1-D grid shared by all regimes.
struct Grid1D {
    double x_min = -1.0;
    double x_max = 1.0;
    int n_nodes = 3;
    int m = 1;

    double dx() const { return (x_max - x_min) / static_cast<double>(n_nodes - 1); }
    double node(int k) const { return x_min + dx() * static_cast<double>(k); }
};

// How the solution is read outside the grid: clamp to the boundary value,
// extrapolate from the last two nodes, or evaluate a supplied formula
// (Dirichlet exterior data, option payoffs).
enum class ExtensionKind { ConstantContinuation, LinearExtrapolation, PayoffFormula };

struct Extension {
    ExtensionKind kind = ExtensionKind::ConstantContinuation;
    ScalarField formula;  // used by PayoffFormula
};

struct PideSolution {
    Grid1D grid;
    std::vector<double> times;
    // values[level][regime][node]
    std::vector<std::vector<Vec>> values;

    // Linear interpolation in x at the stored time level nearest to t.
    double value_at(double t, double x, int regime) const;
    void write_csv(std::ostream& os) const;
};

// One application of the discretized generator to a regime-indexed node
// vector: central differences for drift/diffusion, exact regime coupling,
// jump integral by precomputed quadrature stencils with off-grid reads
// resolved by the extension rule.
std::vector<Vec> apply_discrete_generator(const ModelSpec& spec, const Grid1D& grid,
                                          const std::vector<Vec>& u, const Extension& extension,
                                          const QuadratureParams& quad = {});

enum class MarchDirection { Forward, Backward };

// IMEX marcher for the coupled Cauchy systems. Forward solves
// du/dt = Lu - cu from u(0) = data; Backward solves du/dt + Lu - cu = g from
// u(T) = data toward t = 0. Diffusion (plus the small-jump Taylor load) is
// implicit per regime; drift, coupling, the large-jump integral, c, and g are
// explicit. Fails with the offending ratio when the explicit-part step bound
// is violated.
PideSolution solve_cauchy(const ModelSpec& spec, const Grid1D& grid, const TimeField& c,
                          const ScalarField& data, const TimeField* source, MarchDirection direction,
                          double horizon, int n_steps, const Extension& extension,
                          int store_every = 0, const QuadratureParams& quad = {});

// Stationary coupled system L u - c u = xi on the interior with u = eta on
// the boundary nodes and everywhere outside, assembled over all regimes and
// solved directly.
PideSolution solve_dirichlet(const ModelSpec& spec, const Grid1D& grid, const ScalarField& c,
                             const ScalarField& xi, const ScalarField& eta,
                             const QuadratureParams& quad = {});

}  // namespace switchkac
