#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "switchkac/levy.hpp"
#include "switchkac/linalg.hpp"

namespace switchkac {

// Regime labels are 1-based, matching the switching chain's state space.
struct Regime {
    int index = 1;
};

struct HybridState {
    Vec x;
    Regime regime;
};

// A per-regime scalar function of the state. Gradient and Hessian are
// optional; when absent they are produced by central finite differences with
// step max(1e-5, 1e-5*|x|).
struct ScalarField {
    std::function<double(const Vec&, int)> eval;
    std::function<void(const Vec&, int, Vec&)> gradient;
    std::function<void(const Vec&, int, Matrix&)> hessian;
};

void field_gradient(const ScalarField& f, const Vec& x, int regime, Vec& out);
void field_hessian(const ScalarField& f, const Vec& x, int regime, Matrix& out);

// The full hybrid system: state dynamics coefficients, switching generator,
// and the jump measure. Immutable after construction; all evaluation hooks
// must be pure.
struct ModelSpec {
    int n = 1;  // spatial dimension
    int m = 1;  // regime count
    std::function<void(const Vec& x, int regime, Vec& out)> drift;
    std::function<void(const Vec& x, int regime, Matrix& out)> diffusion;
    std::function<void(const Vec& x, int regime, const Vec& z, Vec& out)> jump_coeff;
    std::function<void(const Vec& x, Matrix& out)> generator_q;
    LevyMeasureSpec levy;
    double q_bound = 0.0;
    // gamma(x, i, z) independent of x: lets simulators cache per-regime
    // compensator corrections instead of re-integrating each step.
    bool jump_coeff_state_independent = false;
};

struct QuadratureParams {
    double abs_tol = 1e-8;
    int base_level = 1;
};

struct Violation {
    std::string check;
    HybridState where;
    std::string message;
};

struct ValidationReport {
    bool ok = true;
    std::vector<Violation> violations;
    // Largest observed (A1)-style quotient over the probe set.
    double sampled_kappa = 0.0;
};

// Spot-checks the model at the probe points: generator rows (off-diagonal
// sign, zero row sums, q_bound), Lipschitz quotients of drift/diffusion over
// the probe pairs, and finiteness of the jump second moment. Findings are
// returned, never thrown; dimension mismatches are configuration errors.
ValidationReport validate_model(const ModelSpec& spec, const std::vector<HybridState>& probe_points,
                                const std::vector<std::pair<HybridState, HybridState>>& probe_pairs);

// Pointwise generator: drift term + (1/2) tr(sigma sigma' D^2 f) + switching
// coupling + compensated jump integral.
double apply_generator(const ModelSpec& spec, const ScalarField& f, const HybridState& state,
                       const QuadratureParams& quad = {});

// integral of [f(x + gamma(x,i,z), i) - f(x,i) - Df(x,i).gamma(x,i,z)] nu(dz).
// Displacements small enough to suffer cancellation are evaluated through the
// second-order Taylor form (1/2) gamma' D^2 f gamma instead.
double levy_compensated_integral(const ModelSpec& spec, const ScalarField& f,
                                 const HybridState& state, const QuadratureParams& quad = {});

}  // namespace switchkac
