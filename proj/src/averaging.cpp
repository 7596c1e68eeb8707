#include "switchkac/averaging.hpp"

#include <cmath>

#include "switchkac/errors.hpp"
#include "switchkac/feynman_kac.hpp"

namespace switchkac {

namespace {

// Strong connectivity of the positive-rate graph, both directions.
bool irreducible(const Matrix& q) {
    const int m = static_cast<int>(q.rows);
    auto reachable = [&](bool transpose) {
        std::vector<bool> seen(m, false);
        std::vector<int> stack{0};
        seen[0] = true;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int w = 0; w < m; ++w) {
                const double rate = transpose ? q(w, v) : q(v, w);
                if (w != v && rate > 0.0 && !seen[w]) {
                    seen[w] = true;
                    stack.push_back(w);
                }
            }
        }
        for (bool s : seen)
            if (!s) return false;
        return true;
    };
    return reachable(false) && reachable(true);
}

}  // namespace

Vec stationary_distribution(const Matrix& generator) {
    const int m = static_cast<int>(generator.rows);
    if (m < 1 || generator.cols != generator.rows)
        throw ConfigError("stationary_distribution: generator must be square");
    if (!irreducible(generator))
        throw ConfigError("stationary_distribution: generator is reducible");

    // Solve nu Q = 0 with the normalization row sum(nu) = 1 replacing one
    // equation of Q' nu' = 0.
    Matrix a(m, m, 0.0);
    Vec rhs(m, 0.0);
    for (int col = 0; col < m; ++col)
        for (int row = 0; row < m - 1; ++row) a(row, col) = generator(col, row);
    for (int col = 0; col < m; ++col) a(m - 1, col) = 1.0;
    rhs[m - 1] = 1.0;

    Vec nu = solve_dense(a, rhs);

    double residual = 0.0;
    for (int j = 0; j < m; ++j) {
        double entry = 0.0;
        for (int i = 0; i < m; ++i) entry += nu[i] * generator(i, j);
        residual = std::max(residual, std::fabs(entry));
    }
    for (double v : nu)
        if (v <= 0.0) throw ConfigError("stationary_distribution: non-positive component");
    if (residual > 1e-12)
        throw NumericalError("stationary_distribution: residual above 1e-12", residual, 0.0);
    return nu;
}

ModelSpec build_scaled_model(const TwoTimeScaleSpec& spec) {
    if (spec.epsilon <= 0.0) throw ConfigError("build_scaled_model: epsilon must be positive");
    ModelSpec scaled = spec.base;
    const double eps = spec.epsilon;
    scaled.drift = [n = spec.base.n](const Vec&, int, Vec& out) { out.assign(n, 0.0); };
    scaled.generator_q = [base_q = spec.base.generator_q, eps](const Vec& x, Matrix& out) {
        base_q(x, out);
        for (double& v : out.data) v /= eps;
    };
    scaled.jump_coeff = [base_gamma = spec.base.jump_coeff, eps](const Vec& x, int i, const Vec& z,
                                                                Vec& out) {
        base_gamma(x, i, z, out);
        for (double& v : out) v *= eps;
    };
    scaled.q_bound = spec.base.q_bound / eps;
    return scaled;
}

double averaged_sigma(const TwoTimeScaleSpec& spec, const Vec& nu, double x) {
    if (static_cast<int>(nu.size()) != spec.base.m)
        throw ConfigError("averaged_sigma: nu size does not match regime count");
    Matrix sigma;
    const Vec xv{x};
    double acc = 0.0;
    for (int i = 1; i <= spec.base.m; ++i) {
        spec.base.diffusion(xv, i, sigma);
        acc += sigma(0, 0) * sigma(0, 0) * nu[i - 1];
    }
    return std::sqrt(acc);
}

double occupation_statistic(const Path& path, const OccupationSpec& occ) {
    const double horizon = path.final_time();
    if (horizon <= 0.0) throw ConfigError("occupation_statistic: path has no positive horizon");
    if (occ.f_plus == occ.f_minus) throw ConfigError("occupation_statistic: f_plus == f_minus");
    const TimeField field{[&occ](double, const Vec& x, int) { return occ.f(x[0]); }};
    const double integral = integrate_along_path(path, field);
    return (integral / horizon - occ.f_minus) / (occ.f_plus - occ.f_minus);
}

double arcsine_cdf(double z) {
    if (z < 0.0 || z > 1.0) throw ConfigError("arcsine_cdf: z must lie in [0, 1]");
    return (2.0 / M_PI) * std::asin(std::sqrt(z));
}

double stieltjes_rhs(double z, double A) {
    if (z <= 0.0 || A <= 0.0) throw ConfigError("stieltjes_rhs: z and A must be positive");
    const double sz = std::sqrt(z);
    const double s1z = std::sqrt(1.0 + z);
    return (s1z + A * sz) / (std::sqrt((1.0 + z) * z) * (sz + A * s1z));
}

namespace {

// Composite Simpson on [a, b] with an even panel count.
double simpson(const std::function<double(double)>& g, double a, double b, int panels) {
    if (panels % 2 == 1) ++panels;
    const double h = (b - a) / panels;
    double acc = g(a) + g(b);
    for (int k = 1; k < panels; ++k) acc += g(a + h * k) * (k % 2 == 1 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

}  // namespace

SpatialAverages spatial_averages(const std::function<double(double)>& sigma_bar,
                                 const std::function<double(double)>& f,
                                 const std::vector<double>& l_schedule, double tol) {
    if (l_schedule.size() < 2) throw ConfigError("spatial_averages: schedule needs >= 2 lengths");
    for (std::size_t k = 1; k < l_schedule.size(); ++k)
        if (l_schedule[k] <= l_schedule[k - 1])
            throw ConfigError("spatial_averages: schedule must increase");
    for (double probe : {0.0, 1.0, -1.0, l_schedule.back(), -l_schedule.back()})
        if (sigma_bar(probe) <= 0.0)
            throw ConfigError("spatial_averages: sigma_bar must be bounded below by a positive constant");

    auto p = [&](double x) {
        const double s = sigma_bar(x);
        return 1.0 / (s * s);
    };
    auto fp = [&](double x) { return f(x) * p(x); };

    SpatialAverages result;
    for (int direction : {+1, -1}) {
        double p_prev = 0.0, f_prev = 0.0;
        double int_p = 0.0, int_fp = 0.0, prev_l = 0.0;
        for (double l : l_schedule) {
            const double a = direction > 0 ? prev_l : -l;
            const double b = direction > 0 ? l : -prev_l;
            const int panels = std::max(64, static_cast<int>((b - a) * 8.0));
            int_p += simpson(p, a, b, panels);
            int_fp += simpson(fp, a, b, panels);
            prev_l = l;

            const double p_avg = int_p / l;
            const double f_avg = int_fp / int_p;
            if (l == l_schedule.back()) {
                if (direction > 0) {
                    result.p_plus = p_avg;
                    result.f_plus = f_avg;
                    result.p_gap = std::fabs(p_avg - p_prev);
                    result.f_gap = std::fabs(f_avg - f_prev);
                } else {
                    result.p_minus = p_avg;
                    result.f_minus = f_avg;
                    result.p_gap = std::max(result.p_gap, std::fabs(p_avg - p_prev));
                    result.f_gap = std::max(result.f_gap, std::fabs(f_avg - f_prev));
                }
            }
            p_prev = p_avg;
            f_prev = f_avg;
        }
    }
    result.converged = result.p_gap <= tol && result.f_gap <= tol;
    return result;
}

double l2_gap_formula(double sigma1, double sigma2, double q1, double q2, double t, double eps) {
    if (q1 <= 0.0 || q2 <= 0.0 || t <= 0.0 || eps <= 0.0)
        throw ConfigError("l2_gap_formula: q1, q2, t, eps must be positive");
    const double nu1 = q2 / (q1 + q2);
    const double nu2 = q1 / (q1 + q2);
    const double sbar = std::sqrt(sigma1 * sigma1 * nu1 + sigma2 * sigma2 * nu2);
    const double limit = 2.0 * sbar * (sbar - (sigma1 * nu1 + sigma2 * nu2)) * t;
    const double transient = (sigma1 - sigma2) * (sigma1 + sigma2 - 2.0 * sbar) * nu2 *
                             (1.0 - std::exp(-(q1 + q2) * t / eps)) * eps / (q1 + q2);
    return limit + transient;
}

Estimate l2_gap_mc(double sigma1, double sigma2, double q1, double q2, double t, double eps,
                   std::int64_t n_paths, std::uint64_t seed, std::uint64_t stream_id) {
    if (n_paths < 2) throw ConfigError("l2_gap_mc: n_paths must be >= 2");
    const double nu1 = q2 / (q1 + q2);
    const double nu2 = q1 / (q1 + q2);
    const double sbar = std::sqrt(sigma1 * sigma1 * nu1 + sigma2 * sigma2 * nu2);

    constexpr std::int64_t block_size = 1024;
    const std::int64_t n_blocks = (n_paths + block_size - 1) / block_size;
    Accumulator total;
    for (std::int64_t block = 0; block < n_blocks; ++block) {
        const std::int64_t begin = block * block_size;
        const std::int64_t end = std::min(n_paths, begin + block_size);
        for (std::int64_t p = begin; p < end; ++p) {
            RngStream rng(seed, stream_id, static_cast<std::uint64_t>(p));
            // Exact two-state chain from regime 1; both diffusions share dW
            // segment by segment, so each is exact in law.
            double clock = 0.0;
            int regime = 1;
            double x_eps = 0.0, x_bar = 0.0;
            while (clock < t) {
                const double rate = (regime == 1 ? q1 : q2) / eps;
                const double hold = rng.exponential(rate);
                const double remaining = t - clock;
                const double dt = std::min(hold, remaining);
                const double dw = std::sqrt(dt) * rng.normal();
                x_eps += (regime == 1 ? sigma1 : sigma2) * dw;
                x_bar += sbar * dw;
                clock += dt;
                if (hold < remaining) regime = regime == 1 ? 2 : 1;
            }
            const double gap = x_eps - x_bar;
            total.add(gap * gap);
        }
    }
    return total.to_estimate();
}

}  // namespace switchkac
