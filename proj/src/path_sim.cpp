#include "switchkac/path_sim.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "switchkac/errors.hpp"

namespace switchkac {

namespace {

constexpr double kExplosionBound = 1e12;
constexpr std::int64_t kBlockSize = 1024;

double inf() { return std::numeric_limits<double>::infinity(); }

// Radius beyond which the remaining tail mass is negligible; used to cap the
// per-step compensator quadrature when gamma depends on the state and the
// measure support is unbounded.
double tail_cap_radius(const LevyMeasureSpec& measure, double delta) {
    const double support = measure.support_radius();
    if (std::isfinite(support)) return support;
    const double reference = tail_mass(measure, std::max(delta, 1e-12));
    double r = std::max(1.0, delta);
    while (r < kExplosionBound && tail_mass(measure, r) > 1e-10 * reference) r *= 4.0;
    return r;
}

struct StepEngine {
    const ModelSpec& spec;
    const SimParams& params;

    Vec drift_buf, comp_buf, gamma_buf, dw_buf, x_left;
    Matrix sigma_buf;
    Matrix q_buf;
    std::vector<Vec> comp_per_regime;
    std::vector<WeightedMark> tail_nodes;
    bool has_jumps = false;

    StepEngine(const ModelSpec& model, const SimParams& p, const HybridState& start)
        : spec(model), params(p) {
        drift_buf.resize(spec.n);
        comp_buf.assign(spec.n, 0.0);
        gamma_buf.resize(spec.n);
        dw_buf.resize(spec.n);
        x_left.resize(spec.n);

        const double mass = tail_mass(spec.levy, params.truncation);
        has_jumps = mass > 0.0;
        if (!has_jumps) return;
        if (spec.jump_coeff_state_independent) {
            comp_per_regime.resize(spec.m + 1);
            for (int i = 1; i <= spec.m; ++i)
                comp_per_regime[i] = compensator_correction(spec, {start.x, {i}}, params.truncation);
        } else {
            tail_nodes = levy_quadrature_nodes(spec.levy, params.truncation,
                                               tail_cap_radius(spec.levy, params.truncation), 2);
        }
    }

    const Vec& compensator(const Vec& x, int regime) {
        if (!has_jumps) return comp_buf;  // stays zero
        if (spec.jump_coeff_state_independent) return comp_per_regime[regime];
        std::fill(comp_buf.begin(), comp_buf.end(), 0.0);
        for (const auto& node : tail_nodes) {
            spec.jump_coeff(x, regime, node.z, gamma_buf);
            for (int d = 0; d < spec.n; ++d) comp_buf[d] -= node.weight * gamma_buf[d];
        }
        return comp_buf;
    }
};

void record_point(Path& out, double t, const Vec& x, int regime) {
    out.times.push_back(t);
    out.states.insert(out.states.end(), x.begin(), x.end());
    out.regimes.push_back(regime);
}

bool state_ok(const Vec& x) {
    for (double v : x) {
        if (!std::isfinite(v) || std::fabs(v) > kExplosionBound) return false;
    }
    return true;
}

}  // namespace

bool simulate_path_into(const ModelSpec& spec, const HybridState& start, const SimParams& params,
                        RngStream& rng, Path& out) {
    if (params.horizon <= 0.0 || params.max_step <= 0.0 || params.truncation < 0.0)
        throw ConfigError("simulate_path: require horizon > 0, max_step > 0, truncation >= 0");
    if (static_cast<int>(start.x.size()) != spec.n)
        throw ConfigError("simulate_path: start dimension does not match spec.n");

    out.clear();
    out.n = spec.n;

    // Large jumps are drawn first so that the jump skeleton is exactly what
    // sample_jumps yields for the same stream.
    std::vector<JumpSample> jumps;
    if (tail_mass(spec.levy, params.truncation) > 0.0)
        jumps = sample_jumps(spec.levy, params.truncation, params.horizon, rng);

    StepEngine engine(spec, params, start);
    const double dominating = static_cast<double>(spec.m) * spec.q_bound;

    Vec x = start.x;
    int regime = start.regime.index;
    double t = 0.0;
    record_point(out, t, x, regime);

    std::size_t next_jump = 0;
    double next_candidate = dominating > 0.0 ? rng.exponential(dominating) : inf();

    while (t < params.horizon) {
        const double t_grid = std::min(t + params.max_step, params.horizon);
        const double t_jump = next_jump < jumps.size() ? jumps[next_jump].time : inf();
        const double t_next = std::min({t_grid, t_jump, next_candidate});
        const double dt = t_next - t;

        engine.x_left = x;
        if (dt > 0.0) {
            spec.drift(x, regime, engine.drift_buf);
            const Vec& comp = engine.compensator(x, regime);
            spec.diffusion(x, regime, engine.sigma_buf);
            const double sqrt_dt = std::sqrt(dt);
            for (int d = 0; d < spec.n; ++d) engine.dw_buf[d] = sqrt_dt * rng.normal();
            for (int d = 0; d < spec.n; ++d) {
                double dx = (engine.drift_buf[d] + comp[d]) * dt;
                for (int k = 0; k < spec.n; ++k) dx += engine.sigma_buf(d, k) * engine.dw_buf[k];
                x[d] += dx;
            }
            if (params.retain_brownian)
                out.brownian_increments.insert(out.brownian_increments.end(), engine.dw_buf.begin(),
                                               engine.dw_buf.end());
        }
        t = t_next;

        if (t_jump <= t_next) {
            const Vec& mark = jumps[next_jump].mark;
            spec.jump_coeff(x, regime, mark, engine.gamma_buf);
            for (int d = 0; d < spec.n; ++d) x[d] += engine.gamma_buf[d];
            out.jumps.push_back({t, mark, engine.gamma_buf});
            ++next_jump;
        }
        if (next_candidate <= t_next) {
            // Thinning: accept candidate i -> j with probability
            // q_ij(X at the step's left endpoint) / (m * q_bound).
            spec.generator_q(engine.x_left, engine.q_buf);
            const double u = rng.uniform();
            double cumulative = 0.0;
            int target = regime;
            for (int j = 1; j <= spec.m; ++j) {
                if (j == regime) continue;
                const double rate = engine.q_buf(regime - 1, j - 1);
                if (rate < 0.0) throw ConfigError("simulate_path: negative off-diagonal rate");
                cumulative += rate / dominating;
                if (u < cumulative) {
                    target = j;
                    break;
                }
            }
            if (cumulative > 1.0 + 1e-9)
                throw ConfigError("simulate_path: generator row exceeds the dominating rate m*q_bound");
            if (target != regime) {
                out.switches.push_back({t, regime, target});
                regime = target;
            }
            next_candidate = t + rng.exponential(dominating);
        }

        record_point(out, t, x, regime);

        if (!state_ok(x)) {
            out.exploded = true;
            return false;
        }
        if (params.stop_when && params.stop_when(t, x, regime)) {
            out.stopped_early = true;
            break;
        }
    }
    return true;
}

Path simulate_path(const ModelSpec& spec, const HybridState& start, const SimParams& params,
                   RngStream& rng) {
    Path path;
    if (!simulate_path_into(spec, start, params, rng, path)) {
        // Message built first: the argument evaluation order would otherwise
        // race the move.
        std::string what = "simulate_path: state exploded at t = " + std::to_string(path.final_time());
        throw SimulationError(std::move(what), std::move(path));
    }
    return path;
}

Estimate simulate_ensemble(const ModelSpec& spec, const HybridState& start, const SimParams& params,
                           std::int64_t n_paths, const std::function<double(const Path&)>& functional,
                           int n_threads) {
    if (n_paths < 2) throw ConfigError("simulate_ensemble: n_paths must be >= 2");

    const std::int64_t n_blocks = (n_paths + kBlockSize - 1) / kBlockSize;
    std::vector<Accumulator> block_acc(n_blocks);
    std::vector<std::int64_t> block_exploded(n_blocks, 0);

    auto run_block = [&](std::int64_t block, Path& workspace) {
        const std::int64_t begin = block * kBlockSize;
        const std::int64_t end = std::min(n_paths, begin + kBlockSize);
        for (std::int64_t p = begin; p < end; ++p) {
            RngStream rng(params.seed, params.stream_id, static_cast<std::uint64_t>(p));
            if (simulate_path_into(spec, start, params, rng, workspace))
                block_acc[block].add(functional(workspace));
            else
                ++block_exploded[block];
        }
    };

    const int workers = std::max(1, n_threads);
    if (workers == 1) {
        Path workspace;
        for (std::int64_t b = 0; b < n_blocks; ++b) run_block(b, workspace);
    } else {
        std::atomic<std::int64_t> next_block{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                Path workspace;
                for (std::int64_t b = next_block.fetch_add(1); b < n_blocks;
                     b = next_block.fetch_add(1))
                    run_block(b, workspace);
            });
        }
        for (auto& th : pool) th.join();
    }

    Accumulator total;
    std::int64_t exploded = 0;
    for (std::int64_t b = 0; b < n_blocks; ++b) {
        total.merge(block_acc[b]);
        exploded += block_exploded[b];
    }

    Estimate estimate = total.to_estimate();
    estimate.metadata.exploded_paths = exploded;
    if (exploded > 0) {
        estimate.metadata.valid = false;
        estimate.metadata.flag = "exploded paths: " + std::to_string(exploded);
    }
    return estimate;
}

Estimate empirical_moment_bound(const ModelSpec& spec, const HybridState& start,
                                const SimParams& params, double p, std::int64_t n_paths,
                                int n_threads) {
    if (p <= 0.0 || p > 2.0) throw ConfigError("empirical_moment_bound: p must lie in (0, 2]");
    auto functional = [p](const Path& path) {
        double sup_sq = 0.0;
        const std::size_t count = path.size();
        for (std::size_t k = 0; k < count; ++k) {
            double norm_sq = 0.0;
            for (int d = 0; d < path.n; ++d) {
                const double v = path.state(k, d);
                norm_sq += v * v;
            }
            sup_sq = std::max(sup_sq, norm_sq);
        }
        return std::pow(sup_sq, 0.5 * p);
    };
    return simulate_ensemble(spec, start, params, n_paths, functional, n_threads);
}

}  // namespace switchkac
