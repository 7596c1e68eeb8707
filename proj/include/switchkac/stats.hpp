#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace switchkac {

// Side information attached to a Monte Carlo estimate: path failures,
// censoring, and the retained small-jump second moment of the truncation.
struct EstimateMetadata {
    std::int64_t exploded_paths = 0;
    double censored_fraction = 0.0;
    double truncation_second_moment = 0.0;
    bool valid = true;
    std::string flag;
};

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t n_paths = 0;
    double confidence_level = 0.95;
    EstimateMetadata metadata;
};

// Mean/variance accumulator with a commutative, associative merge.
struct Accumulator {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::int64_t count = 0;

    void add(double v) {
        sum += v;
        sum_sq += v * v;
        ++count;
    }
    void merge(const Accumulator& other) {
        sum += other.sum;
        sum_sq += other.sum_sq;
        count += other.count;
    }
    double mean() const { return count > 0 ? sum / static_cast<double>(count) : 0.0; }
    double variance() const {
        if (count < 2) return 0.0;
        const double n = static_cast<double>(count);
        const double v = (sum_sq - sum * sum / n) / (n - 1.0);
        return v > 0.0 ? v : 0.0;
    }
    double std_error() const;
    Estimate to_estimate() const;
};

// sup_x |F_n(x) - F(x)| over the sample points, both one-sided limits.
// Samples must be sorted ascending.
double ks_statistic(const std::vector<double>& sorted_samples,
                    const std::function<double(double)>& cdf);

// Two-sample Kolmogorov-Smirnov distance; both inputs sorted ascending.
double ks_two_sample(const std::vector<double>& a, const std::vector<double>& b);

// 1% critical value for the one-sample KS statistic at sample size n.
inline double ks_critical_1pct(std::size_t n) { return 1.63 / std::sqrt(static_cast<double>(n)); }

double normal_cdf(double x);

// Regularized incomplete gamma P(a, x) and Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Upper-tail p-value of a chi-square statistic with dof degrees of freedom.
double chi_square_pvalue(double statistic, double dof);

struct GofResult {
    double statistic = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
};

// Pearson chi-square test of observed counts against Poisson(mean).
// Bins with expected count below min_expected are merged into their neighbor.
GofResult chi_square_poisson_gof(const std::vector<std::uint64_t>& observed_counts, double mean,
                                 double min_expected = 5.0);

}  // namespace switchkac
