#include "switchkac/registry.hpp"

#include <algorithm>
#include <cmath>

#include "switchkac/errors.hpp"
#include "switchkac/stats.hpp"

namespace switchkac::registry {

using nlohmann::json;

void require_keys(const json& object, const std::vector<std::string>& allowed,
                  const std::string& context) {
    if (!object.is_object()) throw UsageError(context + ": expected an object");
    for (const auto& [key, value] : object.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw UsageError(context + ": unknown key '" + key + "'");
    }
}

namespace {

double get_number(const json& object, const std::string& key, const std::string& context) {
    if (!object.contains(key) || !object[key].is_number())
        throw UsageError(context + ": missing numeric field '" + key + "'");
    return object[key].get<double>();
}

// Per-regime parameter list; a scalar broadcasts to every regime.
Vec per_regime(const json& value, int regimes, const std::string& context) {
    Vec out;
    if (value.is_number()) {
        out.assign(regimes, value.get<double>());
        return out;
    }
    if (!value.is_array() || static_cast<int>(value.size()) != regimes)
        throw UsageError(context + ": expected a scalar or an array with one entry per regime");
    for (const auto& v : value) {
        if (!v.is_number()) throw UsageError(context + ": non-numeric entry");
        out.push_back(v.get<double>());
    }
    return out;
}

std::string family_of(const json& spec, const std::string& context) {
    if (!spec.is_object() || !spec.contains("family") || !spec["family"].is_string())
        throw UsageError(context + ": missing 'family'");
    return spec["family"].get<std::string>();
}

}  // namespace

LevyMeasureSpec make_normal_compound_poisson(double rate, double mean, double stddev,
                                             int n_nodes) {
    if (rate < 0.0 || stddev <= 0.0)
        throw ConfigError("compound_poisson_normal: need rate >= 0, stddev > 0");
    if (n_nodes % 2 == 0) ++n_nodes;

    CompoundPoissonSpec cp;
    cp.rate = rate;
    cp.dim = 1;
    cp.sample_mark = [mean, stddev](RngStream& rng, Vec& z) {
        z.assign(1, mean + stddev * rng.normal());
    };
    cp.mark_tail_prob = [mean, stddev](double r) {
        return normal_cdf((mean - r) / stddev) + normal_cdf((-r - mean) / stddev);
    };

    const double lo = mean - 8.0 * stddev, hi = mean + 8.0 * stddev;
    const double h = (hi - lo) / (n_nodes - 1);
    double total = 0.0;
    for (int k = 0; k < n_nodes; ++k) {
        const double z = lo + h * k;
        const double simpson = (k == 0 || k == n_nodes - 1) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        const double w = simpson * std::exp(-0.5 * (z - mean) * (z - mean) / (stddev * stddev));
        cp.mark_nodes.push_back(Vec{z});
        cp.mark_weights.push_back(w);
        total += w;
    }
    for (double& w : cp.mark_weights) w /= total;
    return {cp};
}

Coefficient coefficient_from_json(const json& spec, int regimes, const std::string& context) {
    const std::string family = family_of(spec, context);
    if (family == "constant") {
        require_keys(spec, {"family", "values"}, context);
        const Vec values = per_regime(spec.at("values"), regimes, context);
        return [values](double, int i) { return values[i - 1]; };
    }
    if (family == "affine") {
        require_keys(spec, {"family", "intercept", "slope"}, context);
        const Vec a = per_regime(spec.at("intercept"), regimes, context);
        const Vec b = per_regime(spec.at("slope"), regimes, context);
        return [a, b](double x, int i) { return a[i - 1] + b[i - 1] * x; };
    }
    if (family == "geometric") {
        require_keys(spec, {"family", "values"}, context);
        const Vec values = per_regime(spec.at("values"), regimes, context);
        return [values](double x, int i) { return values[i - 1] * x; };
    }
    if (family == "tabulated") {
        require_keys(spec, {"family", "x", "values"}, context);
        const auto& xs_json = spec.at("x");
        if (!xs_json.is_array() || xs_json.size() < 2)
            throw UsageError(context + ": tabulated needs >= 2 x nodes");
        Vec xs;
        for (const auto& v : xs_json) xs.push_back(v.get<double>());
        for (std::size_t k = 1; k < xs.size(); ++k)
            if (xs[k] <= xs[k - 1]) throw UsageError(context + ": x nodes must increase");
        const auto& rows = spec.at("values");
        if (!rows.is_array() || static_cast<int>(rows.size()) != regimes)
            throw UsageError(context + ": values must have one row per regime");
        std::vector<Vec> table;
        for (const auto& row : rows) {
            if (!row.is_array() || row.size() != xs.size())
                throw UsageError(context + ": table row length mismatch");
            Vec r;
            for (const auto& v : row) r.push_back(v.get<double>());
            table.push_back(std::move(r));
        }
        return [xs, table](double x, int i) {
            const Vec& row = table[i - 1];
            if (x <= xs.front()) return row.front();
            if (x >= xs.back()) return row.back();
            const auto it = std::upper_bound(xs.begin(), xs.end(), x);
            const std::size_t j = static_cast<std::size_t>(it - xs.begin()) - 1;
            const double theta = (x - xs[j]) / (xs[j + 1] - xs[j]);
            return (1.0 - theta) * row[j] + theta * row[j + 1];
        };
    }
    throw UsageError(context + ": unknown coefficient family '" + family +
                     "' (valid: constant, affine, geometric, tabulated)");
}

ScalarField field_from_json(const json& spec, const std::string& context) {
    const std::string family = family_of(spec, context);
    auto from_plain = [](std::function<double(double, int)> f) {
        return ScalarField{[f = std::move(f)](const Vec& x, int i) { return f(x[0], i); }, {}, {}};
    };
    if (family == "constant") {
        require_keys(spec, {"family", "value"}, context);
        const double v = get_number(spec, "value", context);
        return from_plain([v](double, int) { return v; });
    }
    if (family == "affine") {
        require_keys(spec, {"family", "intercept", "slope"}, context);
        const double a = get_number(spec, "intercept", context);
        const double b = get_number(spec, "slope", context);
        return from_plain([a, b](double x, int) { return a + b * x; });
    }
    if (family == "cos") {
        require_keys(spec, {"family", "amplitude", "regime_offset"}, context);
        const double amp = get_number(spec, "amplitude", context);
        const double off = get_number(spec, "regime_offset", context);
        return from_plain([amp, off](double x, int i) { return amp * std::cos(x) + off * i; });
    }
    if (family == "gaussian_bump") {
        require_keys(spec, {"family", "width"}, context);
        const double w = get_number(spec, "width", context);
        return from_plain([w](double x, int) { return std::exp(-x * x / (w * w)); });
    }
    if (family == "quadratic_capped") {
        require_keys(spec, {"family", "cap"}, context);
        const double cap = get_number(spec, "cap", context);
        return from_plain([cap](double x, int) { return std::min(x * x, cap); });
    }
    if (family == "indicator_right") {
        require_keys(spec, {"family", "threshold"}, context);
        const double c = get_number(spec, "threshold", context);
        return from_plain([c](double x, int) { return x >= c ? 1.0 : 0.0; });
    }
    if (family == "smooth_bump") {
        require_keys(spec, {"family", "radius"}, context);
        const double radius = get_number(spec, "radius", context);
        return from_plain([radius](double x, int) {
            const double r = x / radius;
            return std::fabs(r) < 1.0 ? std::exp(-1.0 / (1.0 - r * r)) : 0.0;
        });
    }
    if (family == "call_payoff") {
        require_keys(spec, {"family", "strike"}, context);
        const double strike = get_number(spec, "strike", context);
        return from_plain([strike](double s, int) { return std::max(s - strike, 0.0); });
    }
    if (family == "put_payoff") {
        require_keys(spec, {"family", "strike"}, context);
        const double strike = get_number(spec, "strike", context);
        return from_plain([strike](double s, int) { return std::max(strike - s, 0.0); });
    }
    if (family == "digital_payoff") {
        require_keys(spec, {"family", "strike"}, context);
        const double strike = get_number(spec, "strike", context);
        return from_plain([strike](double s, int) { return s >= strike ? 1.0 : 0.0; });
    }
    throw UsageError(context + ": unknown field family '" + family + "'");
}

LevyMeasureSpec levy_from_json(const json& spec, const std::string& context) {
    const std::string family = family_of(spec, context);
    if (family == "none") {
        require_keys(spec, {"family"}, context);
        return no_jumps();
    }
    if (family == "stable_like") {
        require_keys(spec, {"family", "beta", "inner", "outer"}, context);
        const double beta = get_number(spec, "beta", context);
        if (beta <= 0.0 || beta >= 2.0) throw UsageError(context + ": beta must lie in (0, 2)");
        const double inner = get_number(spec, "inner", context);
        const double outer = spec.contains("outer") && spec["outer"].is_number()
                                 ? spec["outer"].get<double>()
                                 : std::numeric_limits<double>::infinity();
        return {StableLikeSpec{beta, inner, outer}};
    }
    if (family == "compound_poisson_normal") {
        require_keys(spec, {"family", "rate", "mean", "stddev"}, context);
        return make_normal_compound_poisson(get_number(spec, "rate", context),
                                            get_number(spec, "mean", context),
                                            get_number(spec, "stddev", context));
    }
    if (family == "tabulated") {
        require_keys(spec, {"family", "nodes", "weights"}, context);
        TabulatedSpec tab;
        for (const auto& v : spec.at("nodes")) tab.nodes.push_back(v.get<double>());
        for (const auto& v : spec.at("weights")) tab.weights.push_back(v.get<double>());
        if (tab.nodes.empty() || tab.nodes.size() != tab.weights.size())
            throw UsageError(context + ": nodes/weights mismatch");
        for (double z : tab.nodes)
            if (z == 0.0) throw UsageError(context + ": tabulated node at the origin");
        for (double w : tab.weights)
            if (w <= 0.0) throw UsageError(context + ": weights must be positive");
        return {tab};
    }
    throw UsageError(context + ": unknown measure family '" + family +
                     "' (valid: none, stable_like, compound_poisson_normal, tabulated)");
}

ModelSpec model_from_json(const json& spec, const std::string& context) {
    require_keys(spec,
                 {"m", "drift", "diffusion", "jump_scale", "generator", "levy", "q_bound"},
                 context);
    if (!spec.contains("m")) throw UsageError(context + ": missing 'm'");
    const int m = spec["m"].get<int>();
    if (m < 1) throw UsageError(context + ": m must be >= 1");

    ModelSpec model;
    model.n = 1;
    model.m = m;

    const auto drift = coefficient_from_json(spec.at("drift"), m, context + ".drift");
    const auto diffusion = coefficient_from_json(spec.at("diffusion"), m, context + ".diffusion");
    model.drift = [drift](const Vec& x, int i, Vec& out) { out.assign(1, drift(x[0], i)); };
    model.diffusion = [diffusion](const Vec& x, int i, Matrix& out) {
        out.resize(1, 1);
        out(0, 0) = diffusion(x[0], i);
    };

    // Jump coefficient gamma(x, i, z) = scale_i * z (state independent).
    const Vec scale = spec.contains("jump_scale")
                          ? per_regime(spec.at("jump_scale"), m, context + ".jump_scale")
                          : Vec(m, 0.0);
    model.jump_coeff = [scale](const Vec&, int i, const Vec& z, Vec& out) {
        out.assign(1, scale[i - 1] * z[0]);
    };
    model.jump_coeff_state_independent = true;

    if (!spec.contains("generator")) throw UsageError(context + ": missing 'generator'");
    const auto& gen = spec.at("generator");
    require_keys(gen, {"matrix"}, context + ".generator");
    Matrix q(m, m, 0.0);
    const auto& rows = gen.at("matrix");
    if (!rows.is_array() || static_cast<int>(rows.size()) != m)
        throw UsageError(context + ".generator: matrix must be m x m");
    double max_off = 0.0;
    for (int i = 0; i < m; ++i) {
        const auto& row = rows[i];
        if (!row.is_array() || static_cast<int>(row.size()) != m)
            throw UsageError(context + ".generator: matrix must be m x m");
        for (int j = 0; j < m; ++j) {
            q(i, j) = row[j].get<double>();
            if (i != j) max_off = std::max(max_off, q(i, j));
        }
    }
    model.generator_q = [q](const Vec&, Matrix& out) { out = q; };
    model.q_bound =
        spec.contains("q_bound") ? get_number(spec, "q_bound", context) : max_off;

    model.levy = spec.contains("levy") ? levy_from_json(spec.at("levy"), context + ".levy")
                                       : no_jumps();
    return model;
}

MarketSpec market_from_json(const json& spec, const std::string& context) {
    require_keys(spec, {"rates", "vols", "jump_scale", "generator", "levy", "s0"}, context);
    MarketSpec market;
    if (!spec.contains("rates") || !spec.contains("vols"))
        throw UsageError(context + ": missing 'rates' or 'vols'");
    for (const auto& v : spec.at("rates")) market.rates.push_back(v.get<double>());
    for (const auto& v : spec.at("vols")) market.vols.push_back(v.get<double>());
    const int m = static_cast<int>(market.rates.size());
    if (m < 1 || market.vols.size() != market.rates.size())
        throw UsageError(context + ": rates/vols must be nonempty and equal length");

    Vec scale(m, 1.0);
    if (spec.contains("jump_scale")) scale = per_regime(spec.at("jump_scale"), m, context);
    // Multiplier e^{scale z} - 1 stays above -1 for every mark.
    market.jump_multiplier = [scale](int i, double z) { return std::expm1(scale[i - 1] * z); };

    const auto& gen = spec.at("generator");
    require_keys(gen, {"matrix"}, context + ".generator");
    const auto& rows = gen.at("matrix");
    market.generator.resize(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) market.generator(i, j) = rows[i][j].get<double>();

    market.levy = spec.contains("levy") ? levy_from_json(spec.at("levy"), context + ".levy")
                                        : no_jumps();
    market.s0 = get_number(spec, "s0", context);
    return market;
}

}  // namespace switchkac::registry
