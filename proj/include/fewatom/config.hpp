#ifndef FEWATOM_CONFIG_HPP
#define FEWATOM_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fewatom/physics.hpp"
#include "fewatom/kinetics.hpp"
#include "fewatom/sequencer.hpp"
#include "fewatom/signal.hpp"

namespace fewatom {

/// Parse or validation failure in a configuration file.  `line` is 0 when the
/// problem is not tied to one line (e.g. a range check after parsing).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class ExperimentKind {
  MotMonitor,
  Lifetime,
  MagneticLifetime,
  TransferEfficiency,
  DetectionDemo,
  Relaxation
};

std::string_view experiment_name(ExperimentKind kind);
ExperimentKind parse_experiment_kind(std::string_view name);

/// Schedule used when a config file omits schedule_s: hold times for the
/// lifetime kinds, 8 points over (0, 12] s for relaxation.
std::vector<double> default_schedule(ExperimentKind kind);

enum class OutputFormat { Csv, Json, Both };

struct ExperimentConfig {
  // [experiment]
  ExperimentKind kind = ExperimentKind::Lifetime;
  std::uint64_t master_seed = 1;
  std::vector<double> schedule{1, 5, 10, 20, 40, 60, 80};
  int atoms_per_point = 400;
  int min_atoms_per_run = 1;
  int max_atoms_per_run = 7;
  int runs_per_point = 30;   // relaxation batches
  int atoms_per_run = 3;     // relaxation and detection demo
  int repetitions = 1000;    // transfer-efficiency runs per atom number
  double hold_s = 1.0;       // transfer-efficiency / detection-demo hold
  double monitor_total_s = 30.0;
  double step_penalty = 0.0; // 0 selects the default penalty
  int workers = 1;
  std::string output_dir = "out";
  OutputFormat format = OutputFormat::Both;

  // [beam]
  GaussianBeam beam{2.5, 5e-6, 1.064e-6};
  // [trap]
  double raman_suppression = 90.0;
  double averaging_factor = 0.125;
  double peak_scattering_rate = 190.0;
  double dipole_lifetime = 51.0;
  LoadingMode loading = LoadingMode::Deterministic;
  double mot_radius = 10e-6;
  double mot_temperature = AtomParams::cesium().doppler_temperature;
  double field_gradient = 375.0;
  double contamination = 0.0;
  // [mot]
  MotRates mot{};
  // [detector]
  DetectorModel detector{};
  // [burst]
  BurstModel burst{};
  // [sequence]
  ProtocolParams protocol{};

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Full INI rendering with every key, numbers in shortest round-trip form.
/// Without `execution_keys` the keys that cannot change results (workers,
/// output_dir, format) are left out; datasets echo that form so their bytes
/// do not depend on where or how wide they were run.
std::string serialize_config(const ExperimentConfig& cfg, bool execution_keys = true);

} // namespace fewatom

#endif // FEWATOM_CONFIG_HPP
