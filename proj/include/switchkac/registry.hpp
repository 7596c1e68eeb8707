#pragma once

#include <string>

#include <json.hpp>

#include "switchkac/model.hpp"
#include "switchkac/pricing.hpp"

namespace switchkac::registry {

// Normal-mark compound Poisson (Merton-style), mark quadrature by composite
// Simpson over +-8 standard deviations, weights normalized to sum to 1.
LevyMeasureSpec make_normal_compound_poisson(double rate, double mean, double stddev,
                                             int n_nodes = 201);

// Built-in coefficient families for config-declared models:
//   constant | affine | geometric | tabulated
// Each takes per-regime parameters and returns the scalar coefficient
// (x, i) -> value for 1-D models.
using Coefficient = std::function<double(double x, int regime)>;
Coefficient coefficient_from_json(const nlohmann::json& spec, int regimes,
                                  const std::string& context);

// Scalar-field families used for data/payoff/discount declarations:
//   constant | affine | cos | gaussian_bump | quadratic_capped |
//   indicator_right | smooth_bump | call_payoff | put_payoff | digital_payoff
ScalarField field_from_json(const nlohmann::json& spec, const std::string& context);

// Measure families: none | stable_like | compound_poisson_normal | tabulated.
LevyMeasureSpec levy_from_json(const nlohmann::json& spec, const std::string& context);

// Full hybrid-model declaration: n (=1), m, drift/diffusion/jump families,
// constant generator matrix, measure, q_bound (defaults to the largest
// off-diagonal entry).
ModelSpec model_from_json(const nlohmann::json& spec, const std::string& context);

MarketSpec market_from_json(const nlohmann::json& spec, const std::string& context);

// Strict-parsing helper: rejects keys outside `allowed` with a UsageError
// naming the offender.
void require_keys(const nlohmann::json& object, const std::vector<std::string>& allowed,
                  const std::string& context);

}  // namespace switchkac::registry
