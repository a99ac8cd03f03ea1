#ifndef FEWATOM_KINETICS_HPP
#define FEWATOM_KINETICS_HPP

#include <cstdint>
#include <vector>

#include "fewatom/physics.hpp"
#include "fewatom/rng.hpp"

namespace fewatom {

/// Rate constants of the MOT birth-death process.
struct MotRates {
  double loading_rate = 0.1;        // atoms/s from the vapour
  double one_body_loss = 0.02;      // 1/s per atom (background collisions)
  double two_body_pair_rate = 0.01; // 1/s per unordered pair (cold collisions)
  int two_body_loss_multiplicity = 2;

  void validate() const;
  bool operator==(const MotRates&) const = default;
};

struct TrajectoryEvent {
  double time = 0.0;
  int value = 0;

  bool operator==(const TrajectoryEvent&) const = default;
};

/// Piecewise-constant integer record: events[i].value holds on
/// [events[i].time, events[i+1].time), the last one until t_end.
struct StateTrajectory {
  std::vector<TrajectoryEvent> events;
  double t_end = 0.0;
  std::uint64_t seed = 0;

  static StateTrajectory constant(int value, double t_end, std::uint64_t seed = 0);

  int value_at(double t) const;
  int final_value() const { return events.back().value; }
  /// Time-weighted mean of the value over [0, t_end].
  double time_average() const;
  /// Time spent at each value, indexed by value.
  std::vector<double> occupation_times() const;
  /// Appends a change at time t (no-op if the value is unchanged).
  void push(double t, int value);
  void validate() const;

  bool operator==(const StateTrajectory&) const = default;
};

enum class Hyperfine : int { F3 = 3, F4 = 4 };

struct HyperfineRates {
  double r_4to3 = 0.0;
  double r_3to4 = 0.0;

  static HyperfineRates from(const RelaxationRates& rates) {
    return {rates.r_4to3, rates.r_3to4};
  }
  double total() const { return r_4to3 + r_3to4; }
  void validate() const;
};

/// Gillespie simulation of the MOT atom number.  Events: loading N -> N+1 at
/// rate R, one-body loss N -> N-1 at gamma N, and two-body loss at
/// beta' N(N-1)/2 removing `two_body_loss_multiplicity` atoms (floored at 0).
StateTrajectory gillespie_mot(const MotRates& rates, int n0, double t_max, Rng& rng);

/// Binomial survivors after t_hold, each atom lasting with probability
/// exp(-t_hold / lifetime) independently of the others.
int dipole_survival(int n0, double lifetime, double t_hold, Rng& rng);

/// Magnetic quadrupole storage: a 50% spin-projection cut when the MOT light
/// goes off, followed by the same exponential decay as the dipole trap.
int magnetic_trap_survival(int n0, double lifetime, double t_hold, Rng& rng);

/// Two-state Raman telegraph process over {3, 4} on [0, t].
StateTrajectory hyperfine_telegraph(Hyperfine initial, const HyperfineRates& rates, double t,
                                    Rng& rng);

/// Closed-form P(F=4) at time t for the telegraph process.
double analytic_occupation(Hyperfine initial, const HyperfineRates& rates, double t);

} // namespace fewatom

#endif // FEWATOM_KINETICS_HPP
