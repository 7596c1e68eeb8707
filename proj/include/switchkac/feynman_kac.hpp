#pragma once

#include <functional>

#include "switchkac/model.hpp"
#include "switchkac/path_sim.hpp"

namespace switchkac {

// Scalar function of (t, x, regime) for time-dependent discount/source terms.
struct TimeField {
    std::function<double(double, const Vec&, int)> eval;
};

inline TimeField constant_in_time(ScalarField field) {
    return {[f = std::move(field)](double, const Vec& x, int i) { return f.eval(x, i); }};
}

// Axis-aligned open box; the Dirichlet domain.
struct BoxDomain {
    Vec lo;
    Vec hi;

    bool contains(const Vec& x) const {
        for (std::size_t d = 0; d < lo.size(); ++d)
            if (x[d] <= lo[d] || x[d] >= hi[d]) return false;
        return true;
    }
    double diameter_sq() const {
        double acc = 0.0;
        for (std::size_t d = 0; d < lo.size(); ++d) acc += (hi[d] - lo[d]) * (hi[d] - lo[d]);
        return acc;
    }
};

struct DirichletProblemSpec {
    BoxDomain domain;
    ScalarField kill_rate;  // c >= 0 on D
    ScalarField source;     // xi on D
    ScalarField exterior;   // eta, evaluable anywhere in D^c (jumps overshoot)
    // Censoring time; 0 selects 50 * diam(D)^2 / min diffusivity.
    double max_horizon = 0.0;
};

// E[ exp(-int_0^t c(X,alpha)) f(X(t), alpha(t)) ], discount accumulated by
// the trapezoid rule on the event-split skeleton.
Estimate estimate_initial_value(const ModelSpec& spec, const ScalarField& c, const ScalarField& f,
                                double t, const HybridState& start, const SimParams& params,
                                std::int64_t n_paths, int n_threads = 1);

// E[ e^{-int_t^T c} f(X(T), alpha(T)) - int_t^T e^{-int_t^s c} g(s, X(s), alpha(s)) ds ].
Estimate estimate_terminal_value(const ModelSpec& spec, const TimeField& c, const TimeField& g,
                                 const ScalarField& f, double t, double T, const HybridState& start,
                                 const SimParams& params, std::int64_t n_paths, int n_threads = 1);

// E[ eta(X(tau), alpha(tau)) e^{-int_0^tau c} ] - E[ int_0^tau xi e^{-int_0^t c} dt ]
// with tau the first skeleton time outside D. Paths censored at max_horizon
// are counted; the estimate is flagged when the censored fraction exceeds 1%.
Estimate estimate_dirichlet(const ModelSpec& spec, const DirichletProblemSpec& problem,
                            const HybridState& start, const SimParams& params, std::int64_t n_paths,
                            int n_threads = 1);

struct DynkinStopping {
    bool fixed_time = true;
    double t = 1.0;
    BoxDomain domain;  // used when fixed_time is false
};

// E[f(X(tau), alpha(tau))] - f(x, i) - E[ int_0^tau L f ], which is
// statistically zero for f in the generator's domain.
Estimate dynkin_residual(const ModelSpec& spec, const ScalarField& f, const DynkinStopping& stopping,
                         const HybridState& start, const SimParams& params, std::int64_t n_paths,
                         const QuadratureParams& quad = {}, int n_threads = 1);

// Trapezoid of s -> field(s, X(s), alpha(s)) along the skeleton, evaluating
// the pre-event state at jump/switch epochs so the integrand is treated
// piecewise. time_offset shifts path time into absolute time.
double integrate_along_path(const Path& path, const TimeField& field, double time_offset = 0.0);

}  // namespace switchkac
