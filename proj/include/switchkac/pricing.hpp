#pragma once

#include <functional>

#include "switchkac/model.hpp"
#include "switchkac/path_sim.hpp"
#include "switchkac/pide.hpp"

namespace switchkac {

// Regime-switching jump market under the risk-neutral measure: bond with
// per-regime rate, stock with per-regime volatility and multiplicative jumps
// S -> S (1 + gamma(i, z)), gamma > -1.
struct MarketSpec {
    Vec rates;  // r_i >= 0
    Vec vols;   // sigma_i
    std::function<double(int regime, double z)> jump_multiplier;
    Matrix generator;      // constant Q
    LevyMeasureSpec levy;  // finite activity (scalar marks)
    double s0 = 1.0;
};

struct PayoffSpec {
    std::function<double(double s, int regime)> h;  // >= 0, at most quadratic growth
};

// Exact simulation of the stock path: the chain from exponential holding
// times, the log price from its closed-form segment drifts, Brownian
// contributions, and compensated jump sums. The returned Path carries the
// price coordinate; positivity is automatic.
Path simulate_stock_path(const MarketSpec& market, double horizon, const SimParams& params,
                         RngStream& rng, int start_regime = 1);

// E[ e^{-int_t^T r(alpha)} h(S(T), alpha(T)) | S(t) = s, alpha(t) = i ].
Estimate price_european_mc(const MarketSpec& market, const PayoffSpec& payoff, double t, double s,
                           int regime, double horizon, const SimParams& params, std::int64_t n_paths,
                           int n_threads = 1);

// The equivalent hybrid model in the log-price coordinate; its generator is
// exactly the pricing operator, so the generic Cauchy solver applies.
ModelSpec log_price_model(const MarketSpec& market);

// Backward solve of the pricing system on a log-price grid (payoff-formula
// far field), reported in the log coordinate; use price_at for prices.
PideSolution price_european_pide(const MarketSpec& market, const PayoffSpec& payoff,
                                 const Grid1D& log_grid, double horizon, int n_steps);

// Reads the PIDE solution at price s (log interpolation).
double price_at(const PideSolution& solution, double t, double s, int regime);

}  // namespace switchkac
