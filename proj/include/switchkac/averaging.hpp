#pragma once

#include <functional>
#include <vector>

#include "switchkac/model.hpp"
#include "switchkac/path_sim.hpp"
#include "switchkac/stats.hpp"

namespace switchkac {

// Unique probability vector with nu Q = 0 for an irreducible generator.
Vec stationary_distribution(const Matrix& generator);

// Fast-switching family: base model with constant generator Q; the scaled
// model runs Q / epsilon and epsilon * gamma with zero drift.
struct TwoTimeScaleSpec {
    ModelSpec base;
    double epsilon = 1.0;
};

ModelSpec build_scaled_model(const TwoTimeScaleSpec& spec);

// sqrt( sum_i sigma^2(x, i) nu_i ), the diffusion coefficient of the weak limit.
double averaged_sigma(const TwoTimeScaleSpec& spec, const Vec& nu, double x);

struct OccupationSpec {
    std::function<double(double)> f;  // bounded, piecewise continuous
    double f_plus = 1.0;
    double f_minus = 0.0;
};

// [ (1/T) int_0^T f(X(t)) dt - f_minus ] / (f_plus - f_minus), trapezoid on
// the event-split skeleton.
double occupation_statistic(const Path& path, const OccupationSpec& occ);

// (2/pi) arcsin(sqrt z) on [0, 1].
double arcsine_cdf(double z);

// Target of E[1/(z + Xi)] for the two-sided occupation limit,
// A = sqrt(p_plus / p_minus).
double stieltjes_rhs(double z, double A);

struct SpatialAverages {
    double p_plus = 0.0;
    double p_minus = 0.0;
    double f_plus = 0.0;
    double f_minus = 0.0;
    double p_gap = 0.0;  // last-two-iterate gaps of the running averages
    double f_gap = 0.0;
    bool converged = false;
};

// Running averages (1/L) int_0^L p and int_0^L f p / int_0^L p at each L in
// the (increasing) schedule, both directions, p(x) = 1 / sigma_bar^2(x).
SpatialAverages spatial_averages(const std::function<double(double)>& sigma_bar,
                                 const std::function<double(double)>& f,
                                 const std::vector<double>& l_schedule, double tol = 1e-3);

// Closed form of E_{x,1} |X^eps(t) - X(t)|^2 for the two-regime coupled pair.
double l2_gap_formula(double sigma1, double sigma2, double q1, double q2, double t, double eps);

// Coupled-path Monte Carlo of the same quantity: X^eps and the averaged
// diffusion share Brownian increments; the chain is simulated exactly.
Estimate l2_gap_mc(double sigma1, double sigma2, double q1, double q2, double t, double eps,
                   std::int64_t n_paths, std::uint64_t seed, std::uint64_t stream_id = 0);

}  // namespace switchkac
