#include "switchkac/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "switchkac/errors.hpp"

namespace switchkac {

double Accumulator::std_error() const {
    if (count < 2) return 0.0;
    return std::sqrt(variance() / static_cast<double>(count));
}

Estimate Accumulator::to_estimate() const {
    Estimate e;
    e.mean = mean();
    e.std_error = std_error();
    e.n_paths = count;
    return e;
}

double ks_statistic(const std::vector<double>& sorted_samples,
                    const std::function<double(double)>& cdf) {
    if (sorted_samples.empty()) throw ConfigError("ks_statistic: empty sample");
    const double n = static_cast<double>(sorted_samples.size());
    double sup = 0.0;
    for (std::size_t i = 0; i < sorted_samples.size(); ++i) {
        const double f = cdf(sorted_samples[i]);
        const double hi = (static_cast<double>(i) + 1.0) / n - f;
        const double lo = f - static_cast<double>(i) / n;
        sup = std::max({sup, hi, lo});
    }
    return sup;
}

double ks_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw ConfigError("ks_two_sample: empty sample");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t ia = 0, ib = 0;
    double sup = 0.0;
    while (ia < a.size() && ib < b.size()) {
        const double v = std::min(a[ia], b[ib]);
        while (ia < a.size() && a[ia] <= v) ++ia;
        while (ib < b.size() && b[ib] <= v) ++ib;
        sup = std::max(sup, std::fabs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
    }
    return sup;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

// Series expansion for P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double term = sum;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a, x), valid for x >= a + 1.
double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw ConfigError("gamma_p: invalid arguments");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw ConfigError("gamma_q: invalid arguments");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

double chi_square_pvalue(double statistic, double dof) {
    if (dof <= 0.0) return 1.0;
    return gamma_q(0.5 * dof, 0.5 * statistic);
}

GofResult chi_square_poisson_gof(const std::vector<std::uint64_t>& observed_counts, double mean,
                                 double min_expected) {
    if (observed_counts.empty()) throw ConfigError("chi_square_poisson_gof: no observations");
    const double n = static_cast<double>(observed_counts.size());

    std::uint64_t max_count = 0;
    std::map<std::uint64_t, double> histogram;
    for (std::uint64_t c : observed_counts) {
        histogram[c] += 1.0;
        max_count = std::max(max_count, c);
    }

    // Poisson pmf over 0..max_count, remainder lumped into the last cell.
    std::vector<double> expected(max_count + 2, 0.0);
    double pk = std::exp(-mean);
    double cum = 0.0;
    for (std::uint64_t k = 0; k <= max_count; ++k) {
        expected[k] = n * pk;
        cum += pk;
        pk *= mean / static_cast<double>(k + 1);
    }
    expected[max_count + 1] = n * std::max(0.0, 1.0 - cum);

    std::vector<double> observed(max_count + 2, 0.0);
    for (const auto& [k, c] : histogram) observed[k] = c;

    // Merge adjacent cells until every bin has enough expected mass.
    std::vector<double> obs_bins, exp_bins;
    double o_acc = 0.0, e_acc = 0.0;
    for (std::size_t k = 0; k < expected.size(); ++k) {
        o_acc += observed[k];
        e_acc += expected[k];
        if (e_acc >= min_expected) {
            obs_bins.push_back(o_acc);
            exp_bins.push_back(e_acc);
            o_acc = e_acc = 0.0;
        }
    }
    if (e_acc > 0.0 || o_acc > 0.0) {
        if (exp_bins.empty()) {
            obs_bins.push_back(o_acc);
            exp_bins.push_back(e_acc);
        } else {
            obs_bins.back() += o_acc;
            exp_bins.back() += e_acc;
        }
    }

    GofResult result;
    for (std::size_t b = 0; b < obs_bins.size(); ++b) {
        const double diff = obs_bins[b] - exp_bins[b];
        result.statistic += diff * diff / exp_bins[b];
    }
    result.dof = std::max(1.0, static_cast<double>(obs_bins.size()) - 1.0);
    result.p_value = chi_square_pvalue(result.statistic, result.dof);
    return result;
}

}  // namespace switchkac
