#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <variant>
#include <vector>

#include "switchkac/linalg.hpp"
#include "switchkac/rng.hpp"

namespace switchkac {

struct ModelSpec;
struct HybridState;

// Finite-activity measure: rate * (law of the mark). The mark law is carried
// three ways: a sampler for simulation, a tail function for exact tail masses,
// and quadrature nodes (weights summing to 1) for moment integrals.
struct CompoundPoissonSpec {
    double rate = 1.0;
    int dim = 1;
    std::function<void(RngStream&, Vec&)> sample_mark;
    std::function<double(double)> mark_tail_prob;  // P(|mark| > r)
    std::vector<Vec> mark_nodes;
    std::vector<double> mark_weights;
};

// Symmetric density |z|^(-1-beta) dz restricted to inner <= |z| <= outer.
struct StableLikeSpec {
    double beta = 0.5;  // in (0, 2)
    double inner_cutoff = 0.0;
    double outer_cutoff = std::numeric_limits<double>::infinity();
};

// Atomic measure on nonzero 1-D nodes with positive masses.
struct TabulatedSpec {
    std::vector<double> nodes;
    std::vector<double> weights;
};

struct LevyMeasureSpec {
    std::variant<CompoundPoissonSpec, StableLikeSpec, TabulatedSpec> variant;

    int dimension() const;
    bool finite_activity() const;
    // Largest |z| in the support; +inf when unbounded.
    double support_radius() const;
};

// The zero measure: models without a jump part.
inline LevyMeasureSpec no_jumps() {
    CompoundPoissonSpec cp;
    cp.rate = 0.0;
    return {cp};
}

struct WeightedMark {
    Vec z;
    double weight;
};

// nu({ |z| > delta }). Closed form for compound Poisson and stable-like,
// summation for tabulated.
double tail_mass(const LevyMeasureSpec& measure, double delta);

struct JumpSample {
    double time;
    Vec mark;
};

// Compound-Poisson skeleton of the jumps with |z| > delta on [0, T]:
// Poisson(T * tail_mass(delta)) events, times sorted, marks from the
// normalized tail measure.
std::vector<JumpSample> sample_jumps(const LevyMeasureSpec& measure, double delta, double horizon,
                                     RngStream& rng);

// Quadrature nodes {z_k, w_k} such that sum w_k g(z_k) approximates
// integral of g over {lo <= |z| <= hi} against the measure, for smooth g.
// Continuous variants use Gauss-Legendre panels split at |z| = 1 and refined
// geometrically toward the origin; level doubles the panel count. Atomic and
// compound-Poisson variants are exact at every level. hi must be finite or
// the measure's support bounded.
std::vector<WeightedMark> levy_quadrature_nodes(const LevyMeasureSpec& measure, double lo,
                                                double hi, int level = 1);

// Adaptive integral of g against the measure over {lo <= |z| <= hi}
// (1-D variants; hi may be +inf). Refines until successive levels agree to
// abs_tol; two refinements past the base level, then throws NumericalError
// carrying both estimates.
double integrate_levy(const LevyMeasureSpec& measure, double lo, double hi,
                      const std::function<double(double)>& g, double abs_tol = 1e-8,
                      int base_level = 1);

// -integral over {|z| > delta} of gamma(x, i, z) nu(dz): the drift that
// compensates uncompensated large-jump sampling.
Vec compensator_correction(const ModelSpec& spec, const HybridState& state, double delta);

// integral over {|z| <= delta} of |gamma(x, i, z)|^2 nu(dz): the retained
// second moment of the dropped small jumps, reported as the truncation bias
// proxy.
double small_jump_second_moment(const ModelSpec& spec, const HybridState& state, double delta);

// Smallest truncation level (searched on a log grid) whose retained
// small-jump second moment is <= target_variance * 1e-4 / horizon.
double suggest_truncation(const ModelSpec& spec, const HybridState& state, double horizon,
                          double target_variance);

}  // namespace switchkac
