#ifndef FEWATOM_SEQUENCER_HPP
#define FEWATOM_SEQUENCER_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fewatom/analysis.hpp"
#include "fewatom/kinetics.hpp"
#include "fewatom/physics.hpp"
#include "fewatom/rng.hpp"
#include "fewatom/signal.hpp"

namespace fewatom {

enum class Channel { Cooling, Repumper, Dipole, Detection, BField };

inline constexpr std::array<Channel, 5> kAllChannels{Channel::Cooling, Channel::Repumper,
                                                     Channel::Dipole, Channel::Detection,
                                                     Channel::BField};

std::string_view channel_name(Channel c); // COOLING, REPUMPER, DIPOLE, DETECTION, B_FIELD
Channel parse_channel(std::string_view name);

struct SwitchEvent {
  double time = 0.0;
  Channel channel = Channel::Cooling;
  bool on = false;

  bool operator==(const SwitchEvent&) const = default;
};

/// Switching timeline.  A channel's state before its first event is the
/// opposite of that event; channels without events stay off.
struct Sequence {
  std::string label;
  std::vector<SwitchEvent> events;
  std::map<std::string, double> parameters;
  double duration = 0.0;

  /// Sorts events by (time, channel) and extends duration to the last event.
  void normalize();
  bool initial_state(Channel c) const;
  bool state_at(Channel c, double t) const; // state just after all events at t
};

enum class ProtocolKind { Transfer, Recapture, PrepareF3, PrepareF4, Detect, MotMonitor };

ProtocolKind parse_protocol_kind(std::string_view name);
std::string_view protocol_name(ProtocolKind kind);

struct ProtocolParams {
  double overlap = 5e-3;          // dipole on before the MOT light goes off
  double prep_delay = 8e-3;       // between switching off the two MOT lasers
  double pockels_gap = 50e-6;     // dipole off to detection on
  double detection_window = 2e-3;
  double monitor_duration = 0.2;  // MOT-only phase

  void validate() const;
  bool operator==(const ProtocolParams&) const = default;
};

/// Builds one protocol block starting at t = 0.
Sequence build_protocol(ProtocolKind kind, const ProtocolParams& params = {});

/// Mirror image in time: t -> duration - t with every switch inverted.
Sequence time_reversed(const Sequence& seq);

/// Appends `next` so that it starts `gap` after the end of `base`.
Sequence concatenate(const Sequence& base, const Sequence& next, double gap = 0.0);

struct Violation {
  enum class Kind { UnheldAtoms, DetectionOverlap, PockelsGap, Alternation };
  Kind kind;
  double time = 0.0; // onset
  double end = 0.0;  // end of the offending interval (== time for instants)
  std::string message;
};

std::string_view violation_code(Violation::Kind kind);

/// Ordering constraints of the transfer/detection protocols; empty when valid.
std::vector<Violation> validate_sequence(const Sequence& seq, double min_pockels_gap = 50e-6);

/// `time_s,channel,state` rows, times in shortest round-trip form.
void write_sequence_csv(std::ostream& out, const Sequence& seq);
Sequence read_sequence_csv(std::istream& in);

enum class LoadingMode { Deterministic, Geometric };
enum class PreparedState { None, F3, F4, Mixed };

std::string_view prepared_state_name(PreparedState s);

/// Everything simulate_sequence needs about the apparatus.
struct SimulationPhysics {
  TrapModel trap;
  double dipole_lifetime = 51.0;
  MotRates mot;
  HyperfineRates hyperfine;
  DetectorModel detector;
  BurstModel burst;
  LoadingMode loading = LoadingMode::Deterministic;
  double geometric_efficiency = 1.0; // per-atom capture probability in Geometric mode
  double contamination = 0.0;        // fraction prepared in the wrong hyperfine state
};

struct PhaseTrace {
  std::string phase; // "fluorescence" or "detection"
  PhotonTrace trace;
};

struct RunRecord {
  Sequence sequence;
  int prepared_n = 0;
  PreparedState prepared_state = PreparedState::None;
  std::vector<PhaseTrace> traces;
  int survivors = 0;
  int recaptured_n = 0;
  bool recaptured = false;
  int detected_atoms = 0;
  int detected_f4 = 0;
  std::int64_t detection_counts = 0;
  std::optional<BurstPosterior> classification;
  StateTrajectory atom_number; // atoms held in either trap
  std::uint64_t seed = 0;
};

struct SimulationOptions {
  bool record_traces = false;
};

/// Runs the timeline against the stochastic models: MOT phases evolve by
/// Gillespie, the MOT-off moment with the dipole on transfers (and prepares)
/// the atoms, dipole phases apply survival and Raman relaxation, detection
/// windows produce a burst and its classification, and switching the MOT back
/// on with the dipole still on recaptures the survivors.
/// Throws std::invalid_argument if validate_sequence reports violations.
RunRecord simulate_sequence(const Sequence& seq, int initial_n, const SimulationPhysics& physics,
                            Rng& rng, const SimulationOptions& options = {});

} // namespace fewatom

#endif // FEWATOM_SEQUENCER_HPP
