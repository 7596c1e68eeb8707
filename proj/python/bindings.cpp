#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "switchkac/averaging.hpp"
#include "switchkac/experiments.hpp"
#include "switchkac/feynman_kac.hpp"
#include "switchkac/levy.hpp"
#include "switchkac/pide.hpp"
#include "switchkac/registry.hpp"

namespace py = pybind11;
using namespace switchkac;

namespace {

nlohmann::json to_json(const py::handle& obj) {
    const std::string dumped =
        py::str(py::module_::import("json").attr("dumps")(obj)).cast<std::string>();
    return nlohmann::json::parse(dumped);
}

py::object from_json(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix q(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != q.cols) throw ConfigError("generator rows must have equal length");
        for (std::size_t j = 0; j < q.cols; ++j) q(i, j) = rows[i][j];
    }
    return q;
}

py::dict estimate_to_dict(const Estimate& e) {
    py::dict d;
    d["mean"] = e.mean;
    d["std_error"] = e.std_error;
    d["n_paths"] = e.n_paths;
    d["confidence_level"] = e.confidence_level;
    d["valid"] = e.metadata.valid;
    d["censored_fraction"] = e.metadata.censored_fraction;
    d["exploded_paths"] = e.metadata.exploded_paths;
    return d;
}

}  // namespace

PYBIND11_MODULE(_switchkac, m) {
    m.doc() = "Regime-switching jump diffusions: Feynman-Kac Monte Carlo estimators, "
              "coupled-PIDE cross-checks, and averaging limits";

    m.def("arcsine_cdf", &arcsine_cdf, py::arg("z"));
    m.def("stieltjes_rhs", &stieltjes_rhs, py::arg("z"), py::arg("A"));
    m.def("l2_gap_formula", &l2_gap_formula, py::arg("sigma1"), py::arg("sigma2"), py::arg("q1"),
          py::arg("q2"), py::arg("t"), py::arg("eps"));

    m.def(
        "stationary_distribution",
        [](const std::vector<std::vector<double>>& rows) {
            Matrix q = matrix_from_rows(rows);
            return stationary_distribution(q);
        },
        py::arg("generator"));

    m.def(
        "l2_gap_mc",
        [](double s1, double s2, double q1, double q2, double t, double eps, std::int64_t n,
           std::uint64_t seed) { return estimate_to_dict(l2_gap_mc(s1, s2, q1, q2, t, eps, n, seed)); },
        py::arg("sigma1"), py::arg("sigma2"), py::arg("q1"), py::arg("q2"), py::arg("t"),
        py::arg("eps"), py::arg("n_paths"), py::arg("seed"));

    m.def(
        "tail_mass",
        [](const py::dict& levy, double delta) {
            return tail_mass(registry::levy_from_json(to_json(levy), "levy"), delta);
        },
        py::arg("levy"), py::arg("delta"));

    m.def(
        "estimate_initial_value",
        [](const py::dict& model, const py::dict& kill, const py::dict& data, double t, double x0,
           int regime, double h, double delta, std::int64_t n_paths, std::uint64_t seed) {
            const auto spec = registry::model_from_json(to_json(model), "model");
            const auto c = registry::field_from_json(to_json(kill), "c");
            const auto f = registry::field_from_json(to_json(data), "f");
            SimParams params;
            params.max_step = h;
            params.truncation = delta;
            params.seed = seed;
            return estimate_to_dict(
                estimate_initial_value(spec, c, f, t, {Vec{x0}, {regime}}, params, n_paths));
        },
        py::arg("model"), py::arg("kill"), py::arg("data"), py::arg("t"), py::arg("x0"),
        py::arg("regime"), py::arg("h"), py::arg("delta"), py::arg("n_paths"), py::arg("seed"));

    m.def(
        "solve_cauchy",
        [](const py::dict& model, const py::dict& kill, const py::dict& data, double t, double x_min,
           double x_max, int nodes, int steps) {
            const auto spec = registry::model_from_json(to_json(model), "model");
            const auto c = registry::field_from_json(to_json(kill), "c");
            const auto f = registry::field_from_json(to_json(data), "f");
            const Grid1D grid{x_min, x_max, nodes, spec.m};
            const auto sol =
                solve_cauchy(spec, grid, constant_in_time(c), f, nullptr, MarchDirection::Forward,
                             t, steps, Extension{ExtensionKind::ConstantContinuation, {}});
            py::dict out;
            std::vector<double> xs;
            for (int k = 0; k < grid.n_nodes; ++k) xs.push_back(grid.node(k));
            out["x"] = xs;
            out["values"] = sol.values.back();
            return out;
        },
        py::arg("model"), py::arg("kill"), py::arg("data"), py::arg("t"), py::arg("x_min"),
        py::arg("x_max"), py::arg("nodes"), py::arg("steps"));

    m.def(
        "run_experiment",
        [](const py::dict& config, const std::string& out_dir, int threads) {
            return from_json(
                experiments::run_experiment(to_json(config), out_dir, threads).to_json());
        },
        py::arg("config"), py::arg("out_dir") = std::string(), py::arg("threads") = 1);

    m.def("experiment_names", &experiments::suite_names);

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<UsageError>(m, "UsageError");
    py::register_exception<NumericalError>(m, "NumericalError");

    m.attr("__version__") = "0.1.0";
}
