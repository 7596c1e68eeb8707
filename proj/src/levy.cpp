#include "switchkac/levy.hpp"

#include <algorithm>
#include <cmath>

#include "switchkac/errors.hpp"
#include "switchkac/model.hpp"

namespace switchkac {

namespace {

constexpr double kUnboundedCap = 1e12;

// 8-point Gauss-Legendre rule on [-1, 1].
constexpr double kGlNode[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                               0.9602898564975363};
constexpr double kGlWeight[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                 0.1012285362903763};

// Integral of g(z) * |z|^(-1-beta) over one positive interval [a, b].
template <typename Fn>
double gl_panel(double a, double b, double beta, Fn&& g) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) {
        const double zp = mid + half * kGlNode[k];
        const double zm = mid - half * kGlNode[k];
        acc += kGlWeight[k] * (g(zp) * std::pow(zp, -1.0 - beta) + g(zm) * std::pow(zm, -1.0 - beta));
    }
    return acc * half;
}

// Geometric panel edges on [a, b], 0 < a < b; count scales with the level.
std::vector<double> geometric_edges(double a, double b, int level) {
    const double decades = std::log10(b / a);
    const int panels = std::max(4, static_cast<int>(std::ceil(4.0 * std::max(1.0, decades)))) *
                       (1 << std::max(0, level - 1));
    std::vector<double> edges(panels + 1);
    const double ratio = std::pow(b / a, 1.0 / panels);
    edges[0] = a;
    for (int k = 1; k < panels; ++k) edges[k] = edges[k - 1] * ratio;
    edges[panels] = b;
    return edges;
}

// One-sided [a, b] split at 1, panels geometric in each part.
template <typename Fn>
double stable_side_integral(double a, double b, double beta, int level, Fn&& g) {
    if (a >= b) return 0.0;
    double acc = 0.0;
    const double split = 1.0;
    auto run = [&](double lo, double hi) {
        if (lo >= hi) return;
        const auto edges = geometric_edges(lo, hi, level);
        for (std::size_t p = 0; p + 1 < edges.size(); ++p) acc += gl_panel(edges[p], edges[p + 1], beta, g);
    };
    run(a, std::min(b, split));
    run(std::max(a, split), b);
    return acc;
}

const StableLikeSpec* as_stable(const LevyMeasureSpec& m) {
    return std::get_if<StableLikeSpec>(&m.variant);
}

}  // namespace

int LevyMeasureSpec::dimension() const {
    if (const auto* cp = std::get_if<CompoundPoissonSpec>(&variant)) return cp->dim;
    return 1;
}

bool LevyMeasureSpec::finite_activity() const {
    if (const auto* st = as_stable(*this)) return st->inner_cutoff > 0.0;
    return true;
}

double LevyMeasureSpec::support_radius() const {
    if (const auto* st = as_stable(*this)) return st->outer_cutoff;
    if (const auto* tab = std::get_if<TabulatedSpec>(&variant)) {
        double r = 0.0;
        for (double z : tab->nodes) r = std::max(r, std::fabs(z));
        return r;
    }
    const auto& cp = std::get<CompoundPoissonSpec>(variant);
    return cp.rate == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

double tail_mass(const LevyMeasureSpec& measure, double delta) {
    if (delta < 0.0) throw ConfigError("tail_mass: delta must be >= 0");
    if (const auto* cp = std::get_if<CompoundPoissonSpec>(&measure.variant)) {
        if (cp->rate == 0.0 || delta == 0.0) return cp->rate;
        return cp->rate * cp->mark_tail_prob(delta);
    }
    if (const auto* st = as_stable(measure)) {
        const double lo = std::max(delta, st->inner_cutoff);
        if (lo >= st->outer_cutoff) return 0.0;
        if (lo == 0.0) return std::numeric_limits<double>::infinity();
        const double outer = std::isinf(st->outer_cutoff) ? 0.0 : std::pow(st->outer_cutoff, -st->beta);
        return 2.0 * (std::pow(lo, -st->beta) - outer) / st->beta;
    }
    const auto& tab = std::get<TabulatedSpec>(measure.variant);
    double mass = 0.0;
    for (std::size_t k = 0; k < tab.nodes.size(); ++k)
        if (std::fabs(tab.nodes[k]) > delta) mass += tab.weights[k];
    return mass;
}

namespace {

// Inverse CDF of the stable-like tail radius on [lo, hi].
double stable_tail_radius(const StableLikeSpec& st, double lo, double u) {
    const double a = std::pow(lo, -st.beta);
    const double b = std::isinf(st.outer_cutoff) ? 0.0 : std::pow(st.outer_cutoff, -st.beta);
    return std::pow(a - u * (a - b), -1.0 / st.beta);
}

// Walker alias table for categorical draws.
struct AliasTable {
    std::vector<double> prob;
    std::vector<std::size_t> alias;

    explicit AliasTable(const std::vector<double>& weights) {
        const std::size_t n = weights.size();
        double total = 0.0;
        for (double w : weights) total += w;
        prob.assign(n, 0.0);
        alias.assign(n, 0);
        std::vector<double> scaled(n);
        std::vector<std::size_t> small, large;
        for (std::size_t k = 0; k < n; ++k) {
            scaled[k] = weights[k] * static_cast<double>(n) / total;
            (scaled[k] < 1.0 ? small : large).push_back(k);
        }
        while (!small.empty() && !large.empty()) {
            const std::size_t s = small.back();
            const std::size_t l = large.back();
            small.pop_back();
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            if (scaled[l] < 1.0) {
                large.pop_back();
                small.push_back(l);
            }
        }
        for (std::size_t k : large) prob[k] = 1.0;
        for (std::size_t k : small) prob[k] = 1.0;
    }

    std::size_t draw(RngStream& rng) const {
        const double u = rng.uniform() * static_cast<double>(prob.size());
        const auto k = std::min(static_cast<std::size_t>(u), prob.size() - 1);
        return (u - static_cast<double>(k)) < prob[k] ? k : alias[k];
    }
};

}  // namespace

std::vector<JumpSample> sample_jumps(const LevyMeasureSpec& measure, double delta, double horizon,
                                     RngStream& rng) {
    if (horizon <= 0.0) throw ConfigError("sample_jumps: horizon must be positive");
    if (!measure.finite_activity() && delta <= 0.0)
        throw ConfigError("sample_jumps: infinite activity requires delta > 0");
    const double mass = tail_mass(measure, delta);
    if (!std::isfinite(mass)) throw ConfigError("sample_jumps: infinite tail mass");

    std::vector<JumpSample> jumps(rng.poisson(mass * horizon));
    for (auto& j : jumps) j.time = horizon * rng.uniform();
    std::sort(jumps.begin(), jumps.end(),
              [](const JumpSample& a, const JumpSample& b) { return a.time < b.time; });

    if (const auto* cp = std::get_if<CompoundPoissonSpec>(&measure.variant)) {
        // Rejection from the mark sampler: exact draw from the tail law.
        for (auto& j : jumps) {
            j.mark.assign(cp->dim, 0.0);
            do {
                cp->sample_mark(rng, j.mark);
            } while (norm2(j.mark) <= delta);
        }
    } else if (const auto* st = as_stable(measure)) {
        const double lo = std::max(delta, st->inner_cutoff);
        for (auto& j : jumps) {
            const double r = stable_tail_radius(*st, lo, rng.uniform());
            j.mark.assign(1, rng.uniform() < 0.5 ? -r : r);
        }
    } else {
        const auto& tab = std::get<TabulatedSpec>(measure.variant);
        std::vector<double> nodes, weights;
        for (std::size_t k = 0; k < tab.nodes.size(); ++k) {
            if (std::fabs(tab.nodes[k]) > delta) {
                nodes.push_back(tab.nodes[k]);
                weights.push_back(tab.weights[k]);
            }
        }
        if (!jumps.empty()) {
            const AliasTable table(weights);
            for (auto& j : jumps) j.mark.assign(1, nodes[table.draw(rng)]);
        }
    }
    return jumps;
}

std::vector<WeightedMark> levy_quadrature_nodes(const LevyMeasureSpec& measure, double lo,
                                                double hi, int level) {
    std::vector<WeightedMark> out;
    if (const auto* cp = std::get_if<CompoundPoissonSpec>(&measure.variant)) {
        if (cp->mark_nodes.empty())
            throw ConfigError("levy_quadrature_nodes: compound Poisson measure has no mark nodes");
        for (std::size_t k = 0; k < cp->mark_nodes.size(); ++k) {
            const double r = norm2(cp->mark_nodes[k]);
            if (r >= lo && r <= hi)
                out.push_back({cp->mark_nodes[k], cp->rate * cp->mark_weights[k]});
        }
        return out;
    }
    if (const auto* tab = std::get_if<TabulatedSpec>(&measure.variant)) {
        for (std::size_t k = 0; k < tab->nodes.size(); ++k) {
            const double r = std::fabs(tab->nodes[k]);
            if (r >= lo && r <= hi) out.push_back({Vec{tab->nodes[k]}, tab->weights[k]});
        }
        return out;
    }
    const auto& st = std::get<StableLikeSpec>(measure.variant);
    const double a = std::max(lo, st.inner_cutoff);
    const double b = std::min(hi, st.outer_cutoff);
    if (!std::isfinite(b))
        throw ConfigError("levy_quadrature_nodes: unbounded support requires integrate_levy");
    if (a >= b) return out;
    const double floor = b * 1e-14;
    auto emit_part = [&](double plo, double phi) {
        if (plo >= phi) return;
        const auto edges = geometric_edges(std::max(plo, floor), phi, level);
        for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
            const double mid = 0.5 * (edges[p] + edges[p + 1]);
            const double half = 0.5 * (edges[p + 1] - edges[p]);
            for (int k = 0; k < 4; ++k) {
                for (double sign : {1.0, -1.0}) {
                    const double zp = mid + half * kGlNode[k];
                    const double zm = mid - half * kGlNode[k];
                    out.push_back({Vec{sign * zp}, kGlWeight[k] * half * std::pow(zp, -1.0 - st.beta)});
                    out.push_back({Vec{sign * zm}, kGlWeight[k] * half * std::pow(zm, -1.0 - st.beta)});
                }
            }
        }
    };
    emit_part(a, std::min(b, 1.0));
    emit_part(std::max(a, 1.0), b);
    return out;
}

namespace {

double stable_integral_level(const StableLikeSpec& st, double lo, double hi, int level,
                             const std::function<double(double)>& g, bool* truncated_tail,
                             double abs_tol) {
    const double a = std::max(lo, st.inner_cutoff);
    double b = std::min(hi, st.outer_cutoff);
    const double floor = (std::isfinite(b) ? b : 1.0) * 1e-14;
    auto g_both = [&](double z) { return g(z) + g(-z); };
    double acc = 0.0;
    if (std::isfinite(b)) {
        acc = stable_side_integral(std::max(a, floor), b, st.beta, level, g_both);
    } else {
        b = std::max(a, 1.0);
        acc = stable_side_integral(std::max(a, floor), b, st.beta, level, g_both);
        // Geometric continuation toward infinity; stops once the extrapolated
        // remaining tail (geometric decay of the chunk series) is negligible.
        // The decay estimate needs two chunks, so the first never breaks.
        double prev_mag = -1.0;
        while (b < kUnboundedCap) {
            const double next = b * 4.0;
            const double chunk = stable_side_integral(b, next, st.beta, level, g_both);
            acc += chunk;
            b = next;
            const double mag = std::fabs(chunk);
            if (prev_mag >= 0.0) {
                if (mag == 0.0 && prev_mag == 0.0) break;
                if (mag > 0.0 && mag < prev_mag) {
                    const double ratio = mag / prev_mag;
                    if (mag * ratio / (1.0 - ratio) < 0.5 * abs_tol) break;
                }
            }
            prev_mag = mag;
        }
        if (b >= kUnboundedCap) *truncated_tail = true;
    }
    return acc;
}

}  // namespace

double integrate_levy(const LevyMeasureSpec& measure, double lo, double hi,
                      const std::function<double(double)>& g, double abs_tol, int base_level) {
    if (measure.dimension() != 1)
        throw ConfigError("integrate_levy: scalar integrand requires a 1-D measure");
    if (const auto* cp = std::get_if<CompoundPoissonSpec>(&measure.variant)) {
        double acc = 0.0;
        for (std::size_t k = 0; k < cp->mark_nodes.size(); ++k) {
            const double z = cp->mark_nodes[k][0];
            const double r = std::fabs(z);
            if (r >= lo && r <= hi) acc += cp->rate * cp->mark_weights[k] * g(z);
        }
        return acc;
    }
    if (const auto* tab = std::get_if<TabulatedSpec>(&measure.variant)) {
        double acc = 0.0;
        for (std::size_t k = 0; k < tab->nodes.size(); ++k) {
            const double r = std::fabs(tab->nodes[k]);
            if (r >= lo && r <= hi) acc += tab->weights[k] * g(tab->nodes[k]);
        }
        return acc;
    }
    const auto& st = std::get<StableLikeSpec>(measure.variant);
    bool truncated = false;
    double coarse = stable_integral_level(st, lo, hi, base_level, g, &truncated, abs_tol);
    for (int level = base_level + 1; level <= base_level + 2; ++level) {
        const double fine = stable_integral_level(st, lo, hi, level, g, &truncated, abs_tol);
        if (std::fabs(fine - coarse) <= abs_tol && !truncated)
            return fine;
        if (level == base_level + 2) {
            if (truncated || std::fabs(fine) > kUnboundedCap)
                throw NumericalError("integrate_levy: integral appears divergent", coarse, fine);
            if (std::fabs(fine - coarse) > abs_tol)
                throw NumericalError("integrate_levy: quadrature did not converge", coarse, fine);
            return fine;
        }
        coarse = fine;
        truncated = false;
    }
    return coarse;
}

Vec compensator_correction(const ModelSpec& spec, const HybridState& state, double delta) {
    Vec out(spec.n, 0.0);
    const double support = spec.levy.support_radius();
    if (delta >= support || tail_mass(spec.levy, delta) == 0.0) return out;

    Vec gamma(spec.n);
    if (spec.levy.dimension() == 1 && std::holds_alternative<StableLikeSpec>(spec.levy.variant)) {
        Vec zv(1);
        for (int d = 0; d < spec.n; ++d) {
            const int dim = d;
            out[d] = -integrate_levy(
                spec.levy, delta, std::numeric_limits<double>::infinity(),
                [&](double z) {
                    zv[0] = z;
                    spec.jump_coeff(state.x, state.regime.index, zv, gamma);
                    return gamma[dim];
                });
        }
        return out;
    }
    // Finite-activity variants: exact weighted sum over tail marks.
    const auto nodes =
        levy_quadrature_nodes(spec.levy, delta, std::numeric_limits<double>::infinity(), 1);
    for (const auto& node : nodes) {
        spec.jump_coeff(state.x, state.regime.index, node.z, gamma);
        for (int d = 0; d < spec.n; ++d) out[d] -= node.weight * gamma[d];
    }
    return out;
}

double small_jump_second_moment(const ModelSpec& spec, const HybridState& state, double delta) {
    if (delta <= 0.0 || spec.levy.support_radius() == 0.0) return 0.0;
    Vec gamma(spec.n);
    if (std::holds_alternative<StableLikeSpec>(spec.levy.variant)) {
        Vec zv(1);
        return integrate_levy(spec.levy, 0.0, delta, [&](double z) {
            zv[0] = z;
            spec.jump_coeff(state.x, state.regime.index, zv, gamma);
            return dot(gamma, gamma);
        });
    }
    const auto nodes = levy_quadrature_nodes(spec.levy, 0.0, delta, 1);
    double acc = 0.0;
    for (const auto& node : nodes) {
        if (norm2(node.z) > delta) continue;
        spec.jump_coeff(state.x, state.regime.index, node.z, gamma);
        acc += node.weight * dot(gamma, gamma);
    }
    return acc;
}

double suggest_truncation(const ModelSpec& spec, const HybridState& state, double horizon,
                          double target_variance) {
    const double budget = 1e-4 * target_variance / horizon;
    double delta = std::min(1.0, 0.5 * spec.levy.support_radius());
    for (int iter = 0; iter < 200; ++iter) {
        if (small_jump_second_moment(spec, state, delta) <= budget) return delta;
        delta *= 0.5;
        if (delta < 1e-12) break;
    }
    return delta;
}

}  // namespace switchkac
