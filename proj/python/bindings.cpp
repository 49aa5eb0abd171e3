#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "sdemap/config.hpp"
#include "sdemap/experiments.hpp"
#include "sdemap/oracle.hpp"

namespace py = pybind11;
using namespace sdemap;

namespace {

using MeasList = std::vector<std::pair<double, double>>;

// Paths cross the boundary as (N+1) x n arrays, one row per grid point.
DiscretePath to_path(const std::vector<double>& times, const Matrix& rows, const Problem& problem) {
  TimeGrid grid(times, measurement_times(problem.measurements));
  if (rows.cols() != problem.model.dim())
    throw std::invalid_argument("states must have one column per state component");
  return DiscretePath(std::move(grid), rows.transpose());
}

Matrix to_rows(const DiscretePath& p) { return p.states().transpose(); }

void attach(Problem& p, const MeasList& meas, const std::string& likelihood, double scale, Index component) {
  std::shared_ptr<const MeasurementLikelihood> lik;
  if (likelihood == "gaussian")
    lik = GaussianLikelihood::component(p.model.dim(), component, scale);
  else if (likelihood == "student_t")
    lik = std::make_shared<StudentTLikelihood>(component, scale);
  else
    throw std::invalid_argument("likelihood must be 'gaussian' or 'student_t'");
  for (const auto& [t, y] : meas) p.measurements.push_back({t, Vector::Constant(1, y), lik});
  p.validate();
}

py::object merit_to_py(const MeritValue& v) {
  if (!v.gradient) return py::make_tuple(v.value, py::none());
  return py::make_tuple(v.value, *v.gradient);
}

py::dict result_dict(const OptimizationResult& r) {
  py::dict d;
  d["times"] = r.path.grid().times();
  d["states"] = to_rows(r.path);
  d["merit"] = r.merit;
  d["grad_norm"] = r.grad_norm;
  d["iterations"] = r.iterations;
  d["status"] = to_string(r.status);
  d["trace"] = r.trace;
  return d;
}

ExperimentConfig config_from(const std::string& json_text) {
  ExperimentConfig c = json_text.empty() ? ExperimentConfig{} : parse_config(json_text);
  c.check();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "MAP and minimum-energy state path estimation for SDE models";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<MeshTooCoarseError>(m, "MeshTooCoarseError", PyExc_ArithmeticError);

  m.attr("MERIT_KINDS") = std::vector<std::string>{"euler", "trapezoidal", "exact", "energy", "onsager_machlup"};

  py::class_<Problem>(m, "Problem")
      .def_property_readonly("dim", [](const Problem& p) { return p.model.dim(); })
      .def_readonly("horizon", &Problem::horizon)
      .def_property_readonly("model", [](const Problem& p) { return p.model.drift->name(); })
      .def_property_readonly("measurement_times",
                             [](const Problem& p) { return measurement_times(p.measurements); })
      .def("drift", [](const Problem& p, double t, const Vector& x) { return p.model.drift->drift(t, x); })
      .def("jacobian", [](const Problem& p, double t, const Vector& x) { return p.model.drift->jacobian(t, x); })
      .def("divergence",
           [](const Problem& p, double t, const Vector& x) { return p.model.drift->divergence(t, x); });

  m.def(
      "builtin_problem",
      [](const std::string& name, double horizon, const MeasList& meas, const std::string& likelihood, double scale,
         Index component) {
        Problem p{builtin_model(name), {}, horizon};
        attach(p, meas, likelihood, scale, component);
        return p;
      },
      py::arg("name"), py::arg("horizon"), py::arg("measurements") = MeasList{},
      py::arg("likelihood") = "gaussian", py::arg("scale") = 1.0, py::arg("component") = 0,
      "Built-in model ('benes', 'vdp', 'ou') with scalar measurements (t, y) of one component.\n"
      "scale is the variance for 'gaussian' and sigma for 'student_t'.");

  m.def(
      "custom_problem",
      [](Index dim, CallbackDrift::VectorFn drift, CallbackDrift::MatrixFn jacobian, const Matrix& diffusion,
         const Vector& initial_mean, const Matrix& initial_covariance, double horizon, const MeasList& meas,
         const std::string& likelihood, double scale, Index component, CallbackDrift::ScalarFn divergence) {
        Problem p{Model{std::make_shared<CallbackDrift>(dim, std::move(drift), std::move(jacobian),
                                                        std::move(divergence), "python"),
                        Diffusion(diffusion), std::make_shared<GaussianDensity>(initial_mean, initial_covariance)},
                  {},
                  horizon};
        attach(p, meas, likelihood, scale, component);
        return p;
      },
      py::arg("dim"), py::arg("drift"), py::arg("jacobian"), py::arg("diffusion"), py::arg("initial_mean"),
      py::arg("initial_covariance"), py::arg("horizon"), py::arg("measurements") = MeasList{},
      py::arg("likelihood") = "gaussian", py::arg("scale") = 1.0, py::arg("component") = 0,
      py::arg("divergence") = nullptr,
      "Model from Python callables drift(t, x) and jacobian(t, x), Gaussian initial law.");

  m.def(
      "benes_problem",
      [](const std::string& config_json) { return benes_problem(config_from(config_json).benes); },
      py::arg("config_json") = "", "Benes problem of the convergence study (defaults or a JSON config).");
  m.def("ou_oracle_problem", &ou_oracle_problem, "OU problem used for the linear-Gaussian oracle.");

  m.def(
      "uniform_grid",
      [](double horizon, std::size_t segments, const std::vector<double>& meas) {
        return make_uniform_grid(horizon, segments, meas).times();
      },
      py::arg("horizon"), py::arg("segments"), py::arg("measurement_times") = std::vector<double>{});

  m.def(
      "initial_path",
      [](const Problem& p, std::size_t segments, const std::string& strategy) {
        const TimeGrid g = make_uniform_grid(p.horizon, segments, measurement_times(p.measurements));
        const DiscretePath x = initial_path(g, p, parse_init_strategy(strategy));
        return py::make_tuple(g.times(), to_rows(x));
      },
      py::arg("problem"), py::arg("segments"), py::arg("strategy") = "prior_mean",
      "(times, states) on a uniform grid with the measurement instants merged in.");

  m.def(
      "evaluate_merit",
      [](const std::string& kind, const Problem& p, const std::vector<double>& times, const Matrix& states) {
        return merit_to_py(evaluate_merit(parse_merit_kind(kind), to_path(times, states, p), p));
      },
      py::arg("kind"), py::arg("problem"), py::arg("times"), py::arg("states"),
      "(value, gradient) with the gradient flattened node-major; gradient is None at -inf.");

  m.def(
      "solve",
      [](const std::string& kind, const Problem& p, const std::vector<double>& times, const Matrix& states,
         const std::string& options_json) {
        const OptimizerOptions opts = config_from(options_json).optimizer;
        const DiscretePath x0 = to_path(times, states, p);
        const auto r = [&] {
          // Python callbacks need the interpreter lock.
          std::optional<py::gil_scoped_release> release;
          if (p.model.drift->name() != "python") release.emplace();
          return solve(p, parse_merit_kind(kind), x0, opts);
        }();
        return result_dict(r);
      },
      py::arg("kind"), py::arg("problem"), py::arg("times"), py::arg("states"), py::arg("config_json") = "",
      "Maximizes the merit from the given start; optimizer settings come from the config.");

  m.def(
      "simulate",
      [](const Problem& p, const Vector& x0, double step, const std::string& scheme, std::uint64_t seed,
         std::uint64_t stream) {
        RngStream rng(seed, stream);
        const DiscretePath x = scheme == "euler"
                                   ? euler_maruyama(*p.model.drift, p.model.diffusion, x0, step, p.horizon, rng)
                                   : strong_order15(*p.model.drift, p.model.diffusion, x0, step, p.horizon, rng);
        return py::make_tuple(x.grid().times(), to_rows(x));
      },
      py::arg("problem"), py::arg("x0"), py::arg("step"), py::arg("scheme") = "order15", py::arg("seed") = 1,
      py::arg("stream") = 0);

  m.def(
      "rts_smoother",
      [](const Problem& p, std::size_t segments) {
        const auto [lgs, meas] = linear_gaussian_from_problem(p);
        const TimeGrid g = make_uniform_grid(p.horizon, segments, measurement_times(p.measurements));
        const auto r = rts_smoother(lgs, g, meas);
        Matrix rows(static_cast<Index>(g.size()), p.model.dim());
        for (std::size_t k = 0; k < g.size(); ++k) rows.row(static_cast<Index>(k)) = r.means[k].transpose();
        return py::make_tuple(g.times(), rows);
      },
      py::arg("problem"), py::arg("segments"), "Smoothed means for a linear-Gaussian problem.");

  m.def("benes_exact_log_transition", &benes_exact_log_transition, py::arg("x_from"), py::arg("x_to"),
        py::arg("delta"));
  m.def(
      "student_t_loglik",
      [](double y, const Vector& x, double sigma, Index component) { return student_t_loglik(y, x, sigma, component); },
      py::arg("y"), py::arg("x"), py::arg("sigma"), py::arg("component") = 0);

  m.def(
      "gradient_suite",
      [](std::size_t cases, std::uint64_t seed) {
        const auto r = gradient_suite(cases, seed);
        py::dict d;
        for (const auto& c : r.checks) d[py::str(c.name)] = c.max_error;
        return d;
      },
      py::arg("cases") = 20, py::arg("seed") = 1, "Largest relative gradient error per functional.");

  m.def(
      "run_benes_convergence",
      [](const std::filesystem::path& out, const std::string& config_json, unsigned threads) {
        const ExperimentConfig c = config_from(config_json);
        const auto r = [&] {
          py::gil_scoped_release release;
          return run_benes_convergence(c, out, threads);
        }();
        py::list rows;
        for (const auto& k : r.finest_distances)
          rows.append(py::make_tuple(to_string(k.a), to_string(k.b), k.distance));
        return rows;
      },
      py::arg("out_dir"), py::arg("config_json") = "", py::arg("threads") = 1);

  m.def(
      "run_vdp_robust",
      [](const std::filesystem::path& out, const std::string& config_json, unsigned threads) {
        const ExperimentConfig c = config_from(config_json);
        const auto r = [&] {
          py::gil_scoped_release release;
          return run_vdp_robust(c, out, threads);
        }();
        py::dict d;
        for (const auto& s : r.summary) d[py::str(to_string(s.kind))] = s.median;
        d["outlier_fraction"] = r.outlier_fraction;
        return d;
      },
      py::arg("out_dir"), py::arg("config_json") = "", py::arg("threads") = 1,
      "Writes ise.csv, timing.csv and summary.json; returns median ISE per kind.");

  m.def(
      "run_validate",
      [](const std::string& config_json, unsigned threads) {
        const ExperimentConfig c = config_from(config_json);
        ValidateOptions v;
        v.config = c.validate;
        v.optimizer = c.optimizer;
        v.seed = c.seed;
        v.threads = threads;
        const auto r = [&] {
          py::gil_scoped_release release;
          return run_validate(v);
        }();
        py::list out;
        for (const auto& ch : r.checks) out.append(py::make_tuple(ch.name, ch.passed, ch.value, ch.threshold));
        return out;
      },
      py::arg("config_json") = "", py::arg("threads") = 1);
}
