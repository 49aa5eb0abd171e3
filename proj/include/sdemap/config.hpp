#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdemap/functionals.hpp"
#include "sdemap/optimizer.hpp"

namespace sdemap {

/// Invalid or unreadable configuration (a usage error for the CLI).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kConfigSchemaVersion = 1;

struct BenesConvergenceConfig {
  std::vector<std::size_t> levels{16, 32, 64, 128, 256, 512, 1024};
  std::vector<MeritKind> kinds{MeritKind::euler, MeritKind::trapezoidal, MeritKind::exact};
  double horizon = 5.0;
  double measurement_time = 5.0;
  double measurement_value = 1.5;
  double measurement_variance = 0.16;
  double initial_variance = 0.16;
  InitStrategy init = InitStrategy::prior_mean;
  bool cold_start = true;
};

struct VdpRobustConfig {
  std::size_t replicates = 50;
  double horizon = 16.0;
  double sim_step = 5e-4;
  double estimation_step = 5e-3;
  double measurement_step = 0.1;
  double sigma_y = 0.5;
  double sigma_outlier = 3.0;
  double p_outlier = 0.25;
  Index observed_component = 0;
  double damping = 2.0;
  double noise = 0.1;
  double initial_variance = 0.01;
  std::vector<MeritKind> kinds{MeritKind::euler, MeritKind::trapezoidal};
  InitStrategy init = InitStrategy::meas_interp;
};

struct SimulateConfig {
  std::string model = "vdp";
  std::string scheme = "order15";  ///< "order15" or "euler"
  double step = 5e-4;
  double horizon = 16.0;
  double measurement_step = 0.1;
  double sigma_y = 0.5;
  double sigma_outlier = 3.0;
  double p_outlier = 0.25;
  Index observed_component = 0;
  BuiltinParams params;
};

struct ValidateConfig {
  std::size_t model_samples = 100;
  std::size_t gradient_cases = 100;
  std::size_t ks_samples = 100000;
  double ks_step = 1e-4;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = 20240601;
  OptimizerOptions optimizer{.grad_tol = 1e-8, .max_iter = 5000, .memory = 20, .preconditioner_mass = 10.0};
  BenesConvergenceConfig benes;
  VdpRobustConfig vdp;
  SimulateConfig simulate;
  ValidateConfig validate;

  /// Throws ConfigError on out-of-range values.
  void check() const;
};

/// Parses a JSON document. Every object rejects unknown keys; omitted keys keep
/// their defaults. Throws ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

std::string to_string(InitStrategy strategy);
InitStrategy parse_init_strategy(std::string_view name);

}  // namespace sdemap
