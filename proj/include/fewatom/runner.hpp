#ifndef FEWATOM_RUNNER_HPP
#define FEWATOM_RUNNER_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fewatom/config.hpp"
#include "fewatom/fitting.hpp"
#include "fewatom/io.hpp"
#include "fewatom/sequencer.hpp"
#include "fewatom/signal.hpp"

namespace fewatom {

struct NamedFit {
  std::string name;
  FitResult fit;
};

struct NamedTrace {
  std::string name;
  PhotonTrace trace;
};

struct RunSeed {
  std::uint64_t point = 0;
  std::uint64_t run = 0;
  std::uint64_t seed = 0;

  bool operator==(const RunSeed&) const = default;
};

/// Output of one experiment.  Every field is a pure function of the config.
struct Dataset {
  ExperimentKind kind = ExperimentKind::Lifetime;
  std::uint64_t master_seed = 0;
  std::string config_echo; // serialize_config(cfg, false) of the config actually run
  std::vector<Table> tables;
  std::vector<NamedFit> fits;
  std::vector<NamedTrace> traces;
  std::vector<RunSeed> seeds; // in run-index order

  const Table& table(std::string_view name) const;
  const FitResult& fit(std::string_view name) const;
  const PhotonTrace& trace(std::string_view name) const;
};

/// Seed of run `run` at schedule point `point`: derive_seed(master, point << 32 | run).
std::uint64_t run_seed(std::uint64_t master, std::uint64_t point, std::uint64_t run);

/// Physical model implied by a config (trap from the beam, hyperfine rates
/// from the configured scattering rate, loading efficiency from the MOT cloud).
SimulationPhysics physics_from_config(const ExperimentConfig& cfg);

/// Atom numbers of the runs making up one lifetime point: min..max repeated,
/// the last run truncated so the total equals atoms_per_point.
std::vector<int> atoms_per_run_cycle(const ExperimentConfig& cfg);

/// Transfer, dipole hold of `hold` seconds and recapture, after a MOT phase.
Sequence lifetime_sequence(const ProtocolParams& p, double hold);
/// MOT phase, dipole on, state preparation, hold, release and detection.
Sequence relaxation_sequence(const ProtocolParams& p, Hyperfine prepared, double hold);

Dataset run_experiment(const ExperimentConfig& cfg);

/// Writes `<table>.csv`, `seeds.csv`, `fits.csv`, `trace_<name>.csv`,
/// `config.ini` (CSV format) and/or `dataset.json`.  Returns the paths
/// written, in order.  Throws DataError naming the path on I/O failure.
std::vector<std::filesystem::path> export_dataset(const Dataset& ds,
                                                  const std::filesystem::path& dir,
                                                  OutputFormat format);

std::string dataset_to_json(const Dataset& ds);
/// Inverse of dataset_to_json.
Dataset dataset_from_json(std::string_view text);

} // namespace fewatom

#endif // FEWATOM_RUNNER_HPP
