// Command-line front end for the MAP / minimum-energy path estimation studies.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sdemap/config.hpp"
#include "sdemap/csv.hpp"
#include "sdemap/experiments.hpp"

namespace {

enum ExitCode { kOk = 0, kValidationFailure = 1, kUsageError = 2, kRuntimeError = 3 };

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  unsigned threads = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "Experiment config (JSON); defaults are used when omitted");
  cmd->add_option("--seed", args.seed, "Master seed (overrides the config)");
  cmd->add_option("--out", args.out, "Output directory")->capture_default_str();
  cmd->add_option("--threads", args.threads, "Worker threads (scheduling only, never results)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

sdemap::ExperimentConfig load(const CommonArgs& args) {
  sdemap::ExperimentConfig c;
  if (!args.config.empty()) c = sdemap::load_config(args.config);
  if (args.seed) c.seed = *args.seed;
  c.check();
  return c;
}

const char* kBenesHelp =
    "Outputs:\n"
    "  paths_{kind}_{N}.csv  t,x  maximizer at every grid point\n"
    "  convergence.csv       kind,N,sup_distance,merit,status,iterations,grad_norm,\n"
    "                        cold_merit,cold_distance,error\n"
    "                        sup_distance: to the finest level on common points\n"
    "                        (empty for a single level); cold_*: solve from the\n"
    "                        initial path instead of the warm start\n"
    "  comparison.csv        kind_a,kind_b,N,sup_distance  between finest maximizers";

const char* kVdpHelp =
    "Outputs:\n"
    "  ise.csv       replicate,kind,ise,status,iterations,grad_norm,measurements,outliers\n"
    "                ise empty and status 'failed' when a replicate failed\n"
    "  timing.csv    replicate,kind,runtime_seconds  (not reproducible)\n"
    "  summary.json  per kind: completed, failures, median, p5, p95; outlier_fraction";

const char* kSimulateHelp =
    "Outputs:\n"
    "  path.csv          t,x1,...,xn\n"
    "  measurements.csv  t,y,outlier_flag";

int run_simulate(const sdemap::ExperimentConfig& c, const std::filesystem::path& out) {
  using namespace sdemap;
  const auto& s = c.simulate;
  const Model model = builtin_model(s.model, s.params);
  if (s.observed_component >= model.dim()) throw ConfigError("simulate.observed_component: out of range");
  RngStream rng(c.seed, 0);
  const auto* init = dynamic_cast<const GaussianDensity*>(model.initial.get());
  const Vector x0 = sample_gaussian(init->mean(), init->covariance(), rng);
  const DiscretePath path = s.scheme == "euler"
                                ? euler_maruyama(*model.drift, model.diffusion, x0, s.step, s.horizon, rng)
                                : strong_order15(*model.drift, model.diffusion, x0, s.step, s.horizon, rng);
  const SimulatedMeasurements meas = sample_measurements(path, s.measurement_step, s.sigma_y, s.sigma_outlier,
                                                         s.p_outlier, s.observed_component, rng);
  std::filesystem::create_directories(out);
  std::vector<std::string> header{"t"};
  for (Index i = 0; i < path.dim(); ++i) header.push_back("x" + std::to_string(i + 1));
  CsvTable p(header);
  for (std::size_t k = 0; k < path.size(); ++k) {
    std::vector<std::string> row{format_double(path.grid().time(k))};
    for (Index i = 0; i < path.dim(); ++i) row.push_back(format_double(path.state(k)(i)));
    p.add_row(std::move(row));
  }
  p.write(out / "path.csv");
  CsvTable m({"t", "y", "outlier_flag"});
  for (std::size_t i = 0; i < meas.times.size(); ++i)
    m.add_row({format_double(meas.times[i]), format_double(meas.values[i]), meas.outlier[i] ? "1" : "0"});
  m.write(out / "measurements.csv");
  std::cout << "simulated " << path.size() << " states, " << meas.times.size() << " measurements ("
            << meas.outlier_count() << " outliers)\n";
  return kOk;
}

int report(const sdemap::ValidationReport& r) {
  for (const auto& c : r.checks)
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " value=" << c.value << " threshold=" << c.threshold
              << "\n";
  std::cout << (r.passed() ? "all checks passed\n" : "validation failed\n");
  return r.passed() ? kOk : kValidationFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MAP and minimum-energy state path estimation for SDE models"};
  app.require_subcommand(1);

  CommonArgs args;
  auto* benes = app.add_subcommand("benes-convergence", "Nested-grid study on the Benes example");
  benes->footer(kBenesHelp);
  auto* vdp = app.add_subcommand("vdp-robust", "Monte Carlo study on the Van der Pol oscillator");
  vdp->footer(kVdpHelp);
  auto* validate = app.add_subcommand("validate", "Model, gradient, density and linear-Gaussian checks");
  bool inject_fault = false;
  validate->add_flag("--inject-fault", inject_fault)->group("");
  auto* simulate = app.add_subcommand("simulate", "Simulate a built-in model and sample measurements");
  simulate->footer(kSimulateHelp);
  auto* gradcheck = app.add_subcommand("gradcheck", "Analytic gradients against central differences");
  std::size_t cases = 0;
  gradcheck->add_option("--cases", cases, "Random cases (default: validate.gradient_cases)");
  for (auto* cmd : {benes, vdp, validate, simulate, gradcheck}) add_common(cmd, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    const sdemap::ExperimentConfig config = load(args);
    const std::filesystem::path out = args.out;
    if (benes->parsed()) {
      const auto r = sdemap::run_benes_convergence(config, out, args.threads);
      for (const auto& d : r.finest_distances)
        std::cout << to_string(d.a) << " vs " << to_string(d.b) << ": sup_distance "
                  << sdemap::format_optional(d.distance) << "\n";
      return kOk;
    }
    if (vdp->parsed()) {
      const auto r = sdemap::run_vdp_robust(config, out, args.threads);
      for (const auto& s : r.summary)
        std::cout << to_string(s.kind) << ": median ISE " << sdemap::format_optional(s.median) << ", failures "
                  << s.failures << "\n";
      std::cout << "outlier fraction " << r.outlier_fraction << "\n";
      return kOk;
    }
    if (validate->parsed()) {
      sdemap::ValidateOptions v;
      v.config = config.validate;
      v.optimizer = config.optimizer;
      v.seed = config.seed;
      v.threads = args.threads;
      v.inject_gradient_fault = inject_fault;
      return report(sdemap::run_validate(v));
    }
    if (simulate->parsed()) return run_simulate(config, out);
    if (gradcheck->parsed()) {
      const auto g = sdemap::gradient_suite(cases ? cases : config.validate.gradient_cases, config.seed);
      sdemap::ValidationReport r;
      for (const auto& c : g.checks)
        r.checks.push_back({"gradient:" + c.name, c.max_error <= g.tolerance, c.max_error, g.tolerance});
      return report(r);
    }
  } catch (const sdemap::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
