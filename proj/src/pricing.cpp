#include "switchkac/pricing.hpp"

#include <cmath>
#include <limits>

#include "switchkac/errors.hpp"
#include "switchkac/feynman_kac.hpp"

namespace switchkac {

namespace {

void check_market(const MarketSpec& market) {
    if (market.rates.empty() || market.rates.size() != market.vols.size())
        throw ConfigError("market: rates and vols must have one entry per regime");
    if (market.generator.rows != market.rates.size() ||
        market.generator.cols != market.rates.size())
        throw ConfigError("market: generator shape does not match regime count");
    for (double r : market.rates)
        if (r < 0.0) throw ConfigError("market: rates must be nonnegative");
    if (market.s0 <= 0.0) throw ConfigError("market: s0 must be positive");
    if (!market.levy.finite_activity())
        throw ConfigError("market: risk-neutral measure must have finite activity");
}

// integral of gamma(i, z) nu(dz), the jump compensator of the stock SDE.
double gamma_mean(const MarketSpec& market, int regime) {
    if (market.levy.support_radius() == 0.0) return 0.0;
    return integrate_levy(market.levy, 0.0, std::numeric_limits<double>::infinity(),
                          [&](double z) { return market.jump_multiplier(regime, z); });
}

// integral of [log(1 + gamma(i, z)) - gamma(i, z)] nu(dz).
double log_drift_correction(const MarketSpec& market, int regime) {
    if (market.levy.support_radius() == 0.0) return 0.0;
    return integrate_levy(market.levy, 0.0, std::numeric_limits<double>::infinity(), [&](double z) {
        const double g = market.jump_multiplier(regime, z);
        if (g <= -1.0) throw ConfigError("market: jump multiplier <= -1");
        return std::log1p(g) - g;
    });
}

}  // namespace

Path simulate_stock_path(const MarketSpec& market, double horizon, const SimParams& params,
                         RngStream& rng, int start_regime) {
    (void)params;
    check_market(market);
    const int m = static_cast<int>(market.rates.size());
    if (start_regime < 1 || start_regime > m)
        throw ConfigError("simulate_stock_path: start regime out of range");

    // Closed-form segment drift of the log price: r - sigma^2/2 - int gamma nu.
    Vec seg_drift(m);
    for (int i = 1; i <= m; ++i)
        seg_drift[i - 1] = market.rates[i - 1] - 0.5 * market.vols[i - 1] * market.vols[i - 1] -
                           gamma_mean(market, i);

    std::vector<JumpSample> jumps;
    if (tail_mass(market.levy, 0.0) > 0.0) jumps = sample_jumps(market.levy, 0.0, horizon, rng);

    Path path;
    path.n = 1;
    double t = 0.0;
    double log_s = std::log(market.s0);
    int regime = start_regime;

    path.times.push_back(0.0);
    path.states.push_back(market.s0);
    path.regimes.push_back(regime);

    std::size_t next_jump = 0;
    double hold_end;
    auto draw_hold = [&](int i) {
        const double rate = -market.generator(i - 1, i - 1);
        return rate > 0.0 ? t + rng.exponential(rate) : std::numeric_limits<double>::infinity();
    };
    hold_end = draw_hold(regime);

    while (t < horizon) {
        const double t_jump =
            next_jump < jumps.size() ? jumps[next_jump].time : std::numeric_limits<double>::infinity();
        const double t_next = std::min({horizon, t_jump, hold_end});
        const double dt = t_next - t;
        if (dt > 0.0) {
            const double sigma = market.vols[regime - 1];
            log_s += seg_drift[regime - 1] * dt + sigma * std::sqrt(dt) * rng.normal();
        }
        t = t_next;

        if (t_jump <= t_next) {
            const double z = jumps[next_jump].mark[0];
            const double g = market.jump_multiplier(regime, z);
            if (g <= -1.0)
                throw SimulationError("stock path: sampled jump multiplier <= -1", std::move(path));
            const double s_before = std::exp(log_s);
            log_s += std::log1p(g);
            path.jumps.push_back({t, jumps[next_jump].mark, Vec{std::exp(log_s) - s_before}});
            ++next_jump;
        }
        if (hold_end <= t_next) {
            // Exact embedded chain: leave regime i with rates q_ij / (-q_ii).
            const double total = -market.generator(regime - 1, regime - 1);
            const double u = rng.uniform() * total;
            double cumulative = 0.0;
            int target = regime;
            for (int j = 1; j <= m; ++j) {
                if (j == regime) continue;
                cumulative += market.generator(regime - 1, j - 1);
                if (u < cumulative) {
                    target = j;
                    break;
                }
            }
            path.switches.push_back({t, regime, target});
            regime = target;
            hold_end = draw_hold(regime);
        }

        path.times.push_back(t);
        path.states.push_back(std::exp(log_s));
        path.regimes.push_back(regime);
    }
    return path;
}

namespace {

// Exact discount integral: r is piecewise constant in the regime, and the
// trapezoid walker evaluates the pre-switch regime at switch epochs.
double rate_integral(const MarketSpec& market, const Path& path) {
    const TimeField rate_field{
        [&market](double, const Vec&, int i) { return market.rates[i - 1]; }};
    return integrate_along_path(path, rate_field);
}

}  // namespace

Estimate price_european_mc(const MarketSpec& market, const PayoffSpec& payoff, double t, double s,
                           int regime, double horizon, const SimParams& params, std::int64_t n_paths,
                           int n_threads) {
    (void)n_threads;  // the exact sampler is cheap; blocks keep determinism
    if (t >= horizon) throw ConfigError("price_european_mc: need t < T");
    if (s <= 0.0) throw ConfigError("price_european_mc: spot must be positive");
    if (regime < 1 || regime > static_cast<int>(market.rates.size()))
        throw ConfigError("price_european_mc: regime out of range");
    check_market(market);

    MarketSpec shifted = market;
    shifted.s0 = s;
    const double span = horizon - t;

    constexpr std::int64_t block_size = 1024;
    const std::int64_t n_blocks = (n_paths + block_size - 1) / block_size;
    Accumulator total;
    for (std::int64_t block = 0; block < n_blocks; ++block) {
        const std::int64_t begin = block * block_size;
        const std::int64_t end = std::min(n_paths, begin + block_size);
        for (std::int64_t p = begin; p < end; ++p) {
            RngStream rng(params.seed, params.stream_id, static_cast<std::uint64_t>(p));
            Path path = simulate_stock_path(shifted, span, params, rng, regime);
            const double discount = rate_integral(shifted, path);
            const double s_final = path.state(path.size() - 1);
            total.add(std::exp(-discount) * payoff.h(s_final, path.final_regime()));
        }
    }
    return total.to_estimate();
}

ModelSpec log_price_model(const MarketSpec& market) {
    check_market(market);
    const int m = static_cast<int>(market.rates.size());

    Vec drift(m);
    for (int i = 1; i <= m; ++i)
        drift[i - 1] = market.rates[i - 1] - 0.5 * market.vols[i - 1] * market.vols[i - 1] +
                       log_drift_correction(market, i);

    double q_bound = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (i != j) q_bound = std::max(q_bound, market.generator(i, j));

    ModelSpec model;
    model.n = 1;
    model.m = m;
    model.levy = market.levy;
    model.q_bound = q_bound;
    model.jump_coeff_state_independent = true;
    model.drift = [drift](const Vec&, int i, Vec& out) { out.assign(1, drift[i - 1]); };
    model.diffusion = [vols = market.vols](const Vec&, int i, Matrix& out) {
        out.resize(1, 1);
        out(0, 0) = vols[i - 1];
    };
    model.jump_coeff = [mult = market.jump_multiplier](const Vec&, int i, const Vec& z, Vec& out) {
        const double g = mult(i, z[0]);
        if (g <= -1.0) throw ConfigError("market: jump multiplier <= -1");
        out.assign(1, std::log1p(g));
    };
    model.generator_q = [q = market.generator](const Vec&, Matrix& out) { out = q; };
    return model;
}

PideSolution price_european_pide(const MarketSpec& market, const PayoffSpec& payoff,
                                 const Grid1D& log_grid, double horizon, int n_steps) {
    const ModelSpec model = log_price_model(market);
    const ScalarField payoff_log{
        [&payoff](const Vec& x, int i) { return payoff.h(std::exp(x[0]), i); }, {}, {}};
    const TimeField discount{
        [rates = market.rates](double, const Vec&, int i) { return rates[i - 1]; }};
    const Extension extension{ExtensionKind::PayoffFormula, payoff_log};
    return solve_cauchy(model, log_grid, discount, payoff_log, nullptr, MarchDirection::Backward,
                        horizon, n_steps, extension);
}

double price_at(const PideSolution& solution, double t, double s, int regime) {
    if (s <= 0.0) throw ConfigError("price_at: spot must be positive");
    return solution.value_at(t, std::log(s), regime);
}

}  // namespace switchkac
