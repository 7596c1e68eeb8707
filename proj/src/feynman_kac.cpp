#include "switchkac/feynman_kac.hpp"

#include <atomic>
#include <cmath>
#include <limits>

#include "switchkac/errors.hpp"

namespace switchkac {

namespace {

// Iterates skeleton segments [t_k, t_{k+1}], presenting the post-event state
// on the left and the reconstructed pre-event state on the right, so that
// integrands are evaluated piecewise across jumps and switches.
template <typename Visitor>
void walk_segments(const Path& path, Visitor&& visit) {
    const std::size_t count = path.size();
    if (count < 2) return;
    const int n = path.n;

    std::size_t ji = 0, si = 0;
    Vec x_right(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k + 1 < count; ++k) {
        const double t0 = path.times[k];
        const double t1 = path.times[k + 1];
        const double* x0 = &path.states[k * static_cast<std::size_t>(n)];
        const double* x1 = &path.states[(k + 1) * static_cast<std::size_t>(n)];
        const int i0 = path.regimes[k];
        int i1_pre = path.regimes[k + 1];

        bool event = false;
        for (int d = 0; d < n; ++d) x_right[d] = x1[d];
        while (ji < path.jumps.size() && path.jumps[ji].time <= t1) {
            if (path.jumps[ji].time == t1) {
                for (int d = 0; d < n; ++d) x_right[d] -= path.jumps[ji].displacement[d];
                event = true;
            }
            ++ji;
        }
        while (si < path.switches.size() && path.switches[si].time <= t1) {
            if (path.switches[si].time == t1) {
                i1_pre = path.switches[si].from;
                event = true;
            }
            ++si;
        }
        visit(t0, x0, i0, t1, x_right.data(), i1_pre, event);
    }
}

}  // namespace

double integrate_along_path(const Path& path, const TimeField& field, double time_offset) {
    if (path.size() < 2) return 0.0;
    const int n = path.n;
    Vec xl(static_cast<std::size_t>(n)), xr(static_cast<std::size_t>(n));

    for (int d = 0; d < n; ++d) xl[d] = path.states[d];
    double left_val = field.eval(time_offset + path.times[0], xl, path.regimes[0]);
    double total = 0.0;

    std::size_t seg_index = 0;
    walk_segments(path, [&](double t0, const double*, int, double t1, const double* x1, int i1_pre,
                            bool event) {
        for (int d = 0; d < n; ++d) xr[d] = x1[d];
        const double right_val = field.eval(time_offset + t1, xr, i1_pre);
        total += 0.5 * (left_val + right_val) * (t1 - t0);
        ++seg_index;
        if (event) {
            const std::size_t k = seg_index;  // post-event skeleton index
            for (int d = 0; d < n; ++d) xr[d] = path.states[k * static_cast<std::size_t>(n) + d];
            left_val = field.eval(time_offset + t1, xr, path.regimes[k]);
        } else {
            left_val = right_val;
        }
    });
    return total;
}

namespace {

// Joint pass: returns the total discount integral D(tau) and accumulates
// int e^{-D(s)} g(s) ds when a source is present.
struct DiscountedSourceResult {
    double discount_integral = 0.0;
    double source_integral = 0.0;
};

DiscountedSourceResult discounted_source_pass(const Path& path, const TimeField& c,
                                              const TimeField* g, double time_offset) {
    DiscountedSourceResult result;
    if (path.size() < 2) return result;
    const int n = path.n;
    Vec xl(static_cast<std::size_t>(n)), xr(static_cast<std::size_t>(n));

    for (int d = 0; d < n; ++d) xl[d] = path.states[d];
    double c_left = c.eval(time_offset + path.times[0], xl, path.regimes[0]);
    double g_left = g ? g->eval(time_offset + path.times[0], xl, path.regimes[0]) : 0.0;

    std::size_t seg_index = 0;
    walk_segments(path, [&](double t0, const double*, int, double t1, const double* x1, int i1_pre,
                            bool event) {
        for (int d = 0; d < n; ++d) xr[d] = x1[d];
        const double c_right = c.eval(time_offset + t1, xr, i1_pre);
        const double dt = t1 - t0;
        const double d_increment = 0.5 * (c_left + c_right) * dt;
        if (g) {
            const double g_right = g->eval(time_offset + t1, xr, i1_pre);
            const double e_left = std::exp(-result.discount_integral);
            const double e_right = std::exp(-(result.discount_integral + d_increment));
            result.source_integral += 0.5 * (e_left * g_left + e_right * g_right) * dt;
            g_left = g_right;
        }
        result.discount_integral += d_increment;

        ++seg_index;
        if (event) {
            const std::size_t k = seg_index;
            for (int d = 0; d < n; ++d) xr[d] = path.states[k * static_cast<std::size_t>(n) + d];
            c_left = c.eval(time_offset + t1, xr, path.regimes[k]);
            if (g) g_left = g->eval(time_offset + t1, xr, path.regimes[k]);
        } else {
            c_left = c_right;
        }
    });
    return result;
}

Vec final_state(const Path& path) {
    const std::size_t k = path.size() - 1;
    Vec x(static_cast<std::size_t>(path.n));
    for (int d = 0; d < path.n; ++d) x[d] = path.state(k, d);
    return x;
}

double min_diffusivity(const ModelSpec& spec, const Vec& at) {
    Matrix sigma;
    double lowest = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= spec.m; ++i) {
        spec.diffusion(at, i, sigma);
        for (int d = 0; d < spec.n; ++d) {
            double ss = 0.0;
            for (int k = 0; k < spec.n; ++k) ss += sigma(d, k) * sigma(d, k);
            lowest = std::min(lowest, ss);
        }
    }
    return lowest;
}

}  // namespace

Estimate estimate_initial_value(const ModelSpec& spec, const ScalarField& c, const ScalarField& f,
                                double t, const HybridState& start, const SimParams& params,
                                std::int64_t n_paths, int n_threads) {
    if (t <= 0.0) throw ConfigError("estimate_initial_value: t must be positive");
    SimParams run = params;
    run.horizon = t;
    const TimeField c_time = constant_in_time(c);
    auto functional = [&](const Path& path) {
        const double discount = integrate_along_path(path, c_time);
        return std::exp(-discount) * f.eval(final_state(path), path.final_regime());
    };
    Estimate estimate = simulate_ensemble(spec, start, run, n_paths, functional, n_threads);
    estimate.metadata.truncation_second_moment =
        small_jump_second_moment(spec, start, params.truncation);
    return estimate;
}

Estimate estimate_terminal_value(const ModelSpec& spec, const TimeField& c, const TimeField& g,
                                 const ScalarField& f, double t, double T, const HybridState& start,
                                 const SimParams& params, std::int64_t n_paths, int n_threads) {
    if (t < 0.0 || t > T) throw ConfigError("estimate_terminal_value: require 0 <= t <= T");
    SimParams run = params;
    run.horizon = T - t;
    const bool has_source = static_cast<bool>(g.eval);
    auto functional = [&](const Path& path) {
        const auto pass = discounted_source_pass(path, c, has_source ? &g : nullptr, t);
        const double terminal =
            std::exp(-pass.discount_integral) * f.eval(final_state(path), path.final_regime());
        return terminal - pass.source_integral;
    };
    Estimate estimate = simulate_ensemble(spec, start, run, n_paths, functional, n_threads);
    estimate.metadata.truncation_second_moment =
        small_jump_second_moment(spec, start, params.truncation);
    return estimate;
}

Estimate estimate_dirichlet(const ModelSpec& spec, const DirichletProblemSpec& problem,
                            const HybridState& start, const SimParams& params, std::int64_t n_paths,
                            int n_threads) {
    if (!problem.domain.contains(start.x))
        throw ConfigError("estimate_dirichlet: start must lie inside the domain");
    const double diffusivity = min_diffusivity(spec, start.x);
    if (diffusivity <= 0.0)
        throw ConfigError("estimate_dirichlet: needs a non-degenerate diffusion direction on D");
    if (problem.kill_rate.eval(start.x, start.regime.index) < 0.0)
        throw ConfigError("estimate_dirichlet: kill rate must be nonnegative");

    SimParams run = params;
    run.horizon = problem.max_horizon > 0.0
                      ? problem.max_horizon
                      : 50.0 * problem.domain.diameter_sq() / diffusivity;
    run.stop_when = [&problem](double, const Vec& x, int) { return !problem.domain.contains(x); };

    const TimeField c_time = constant_in_time(problem.kill_rate);
    std::atomic<std::int64_t> censored{0};

    auto functional = [&](const Path& path) {
        // xi integral accumulates e^{-D(s)} xi(X(s)); eta term applies at exit.
        const int n = path.n;
        Vec xl(static_cast<std::size_t>(n)), xr(static_cast<std::size_t>(n));
        for (int d = 0; d < n; ++d) xl[d] = path.states[d];
        double c_left = problem.kill_rate.eval(xl, path.regimes[0]);
        double xi_left = problem.source.eval(xl, path.regimes[0]);
        double discount = 0.0;
        double xi_integral = 0.0;
        std::size_t seg_index = 0;
        walk_segments(path, [&](double t0, const double*, int, double t1, const double* x1,
                                int i1_pre, bool event) {
            for (int d = 0; d < n; ++d) xr[d] = x1[d];
            const double c_right = problem.kill_rate.eval(xr, i1_pre);
            const double xi_right = problem.source.eval(xr, i1_pre);
            const double dt = t1 - t0;
            const double d_inc = 0.5 * (c_left + c_right) * dt;
            xi_integral += 0.5 * (std::exp(-discount) * xi_left +
                                  std::exp(-(discount + d_inc)) * xi_right) *
                           dt;
            discount += d_inc;
            ++seg_index;
            if (event) {
                const std::size_t k = seg_index;
                for (int d = 0; d < n; ++d) xr[d] = path.states[k * static_cast<std::size_t>(n) + d];
                c_left = problem.kill_rate.eval(xr, path.regimes[k]);
                xi_left = problem.source.eval(xr, path.regimes[k]);
            } else {
                c_left = c_right;
                xi_left = xi_right;
            }
        });

        // Censored paths are treated as exiting at the horizon point; the
        // censored fraction is reported and gates the validity flag.
        if (!path.stopped_early) censored.fetch_add(1, std::memory_order_relaxed);
        const double eta_term =
            std::exp(-discount) * problem.exterior.eval(final_state(path), path.final_regime());
        return eta_term - xi_integral;
    };

    Estimate estimate = simulate_ensemble(spec, start, run, n_paths, functional, n_threads);
    const double fraction =
        static_cast<double>(censored.load()) / static_cast<double>(std::max<std::int64_t>(1, n_paths));
    estimate.metadata.censored_fraction = fraction;
    if (fraction > 0.01) {
        estimate.metadata.valid = false;
        estimate.metadata.flag = "horizon too short";
    }
    return estimate;
}

Estimate dynkin_residual(const ModelSpec& spec, const ScalarField& f, const DynkinStopping& stopping,
                         const HybridState& start, const SimParams& params, std::int64_t n_paths,
                         const QuadratureParams& quad, int n_threads) {
    SimParams run = params;
    if (stopping.fixed_time) {
        run.horizon = stopping.t;
    } else {
        run.stop_when = [&stopping](double, const Vec& x, int) {
            return !stopping.domain.contains(x);
        };
    }
    const double f_start = f.eval(start.x, start.regime.index);
    const TimeField lf{[&spec, &f, &quad](double, const Vec& x, int i) {
        return apply_generator(spec, f, {x, {i}}, quad);
    }};
    auto functional = [&](const Path& path) {
        const double generator_integral = integrate_along_path(path, lf);
        return f.eval(final_state(path), path.final_regime()) - f_start - generator_integral;
    };
    return simulate_ensemble(spec, start, run, n_paths, functional, n_threads);
}

}  // namespace switchkac
