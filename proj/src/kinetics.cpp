#include "fewatom/kinetics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fewatom {

void MotRates::validate() const {
  if (!(loading_rate >= 0.0 && one_body_loss >= 0.0 && two_body_pair_rate >= 0.0)) {
    throw std::invalid_argument("MOT rates must be non-negative");
  }
  if (two_body_loss_multiplicity != 1 && two_body_loss_multiplicity != 2) {
    throw std::invalid_argument("two-body loss multiplicity must be 1 or 2");
  }
}

void HyperfineRates::validate() const {
  if (!(r_4to3 >= 0.0 && r_3to4 >= 0.0)) {
    throw std::invalid_argument("hyperfine rates must be non-negative");
  }
}

StateTrajectory StateTrajectory::constant(int value, double t_end, std::uint64_t seed) {
  StateTrajectory traj;
  traj.events.push_back({0.0, value});
  traj.t_end = t_end;
  traj.seed = seed;
  return traj;
}

int StateTrajectory::value_at(double t) const {
  auto it = std::upper_bound(events.begin(), events.end(), t,
                             [](double x, const TrajectoryEvent& e) { return x < e.time; });
  if (it == events.begin()) return events.front().value;
  return std::prev(it)->value;
}

double StateTrajectory::time_average() const {
  if (t_end <= 0.0) return events.front().value;
  double acc = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const double stop = (i + 1 < events.size()) ? events[i + 1].time : t_end;
    acc += events[i].value * (stop - events[i].time);
  }
  return acc / t_end;
}

std::vector<double> StateTrajectory::occupation_times() const {
  int top = 0;
  for (const auto& e : events) top = std::max(top, e.value);
  std::vector<double> times(static_cast<std::size_t>(top) + 1, 0.0);
  for (std::size_t i = 0; i < events.size(); ++i) {
    const double stop = (i + 1 < events.size()) ? events[i + 1].time : t_end;
    times[static_cast<std::size_t>(events[i].value)] += stop - events[i].time;
  }
  return times;
}

void StateTrajectory::push(double t, int value) {
  if (!events.empty() && events.back().value == value) return;
  if (!events.empty() && t == events.back().time) {
    events.back().value = value;
    if (events.size() >= 2 && events[events.size() - 2].value == value) events.pop_back();
    return;
  }
  events.push_back({t, value});
}

void StateTrajectory::validate() const {
  if (events.empty() || events.front().time != 0.0) {
    throw std::logic_error("trajectory must start with an event at t=0");
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].value < 0) throw std::logic_error("trajectory values must be non-negative");
    if (i > 0 && !(events[i].time > events[i - 1].time)) {
      throw std::logic_error("trajectory times must be strictly increasing");
    }
  }
  if (t_end < events.back().time) throw std::logic_error("trajectory ends before its last event");
}

StateTrajectory gillespie_mot(const MotRates& rates, int n0, double t_max, Rng& rng) {
  rates.validate();
  if (!(t_max > 0.0)) throw std::invalid_argument("t_max must be positive");
  if (n0 < 0) throw std::invalid_argument("n0 must be non-negative");

  StateTrajectory traj = StateTrajectory::constant(n0, t_max, rng.seed());
  int n = n0;
  double t = 0.0;
  for (;;) {
    const double birth = rates.loading_rate;
    const double single = rates.one_body_loss * n;
    const double pair = rates.two_body_pair_rate * 0.5 * n * (n - 1);
    const double total = birth + single + pair;
    if (total <= 0.0) break;
    t += rng.exponential(total);
    if (t >= t_max) break;
    const double pick = rng.uniform() * total;
    if (pick < birth) {
      ++n;
    } else if (pick < birth + single) {
      --n;
    } else {
      n = std::max(0, n - rates.two_body_loss_multiplicity);
    }
    traj.events.push_back({t, n});
  }
  return traj;
}

int dipole_survival(int n0, double lifetime, double t_hold, Rng& rng) {
  if (!(lifetime > 0.0)) throw std::invalid_argument("lifetime must be positive");
  if (!(t_hold >= 0.0)) throw std::invalid_argument("hold time must be non-negative");
  if (n0 <= 0) return 0;
  if (t_hold == 0.0) return n0;
  return static_cast<int>(rng.binomial(n0, std::exp(-t_hold / lifetime)));
}

int magnetic_trap_survival(int n0, double lifetime, double t_hold, Rng& rng) {
  if (!(lifetime > 0.0)) throw std::invalid_argument("lifetime must be positive");
  if (!(t_hold >= 0.0)) throw std::invalid_argument("hold time must be non-negative");
  if (n0 <= 0) return 0;
  const auto projected = static_cast<int>(rng.binomial(n0, 0.5));
  return dipole_survival(projected, lifetime, t_hold, rng);
}

StateTrajectory hyperfine_telegraph(Hyperfine initial, const HyperfineRates& rates, double t,
                                    Rng& rng) {
  rates.validate();
  if (!(t >= 0.0)) throw std::invalid_argument("telegraph duration must be non-negative");
  StateTrajectory traj = StateTrajectory::constant(static_cast<int>(initial), t, rng.seed());
  int state = static_cast<int>(initial);
  double now = 0.0;
  for (;;) {
    const double rate = (state == 4) ? rates.r_4to3 : rates.r_3to4;
    if (rate <= 0.0) break;
    now += rng.exponential(rate);
    if (now >= t) break;
    state = (state == 4) ? 3 : 4;
    traj.events.push_back({now, state});
  }
  return traj;
}

double analytic_occupation(Hyperfine initial, const HyperfineRates& rates, double t) {
  rates.validate();
  const double p0 = (initial == Hyperfine::F4) ? 1.0 : 0.0;
  const double total = rates.total();
  if (total <= 0.0) return p0;
  const double eq = rates.r_3to4 / total;
  return eq + (p0 - eq) * std::exp(-total * t);
}

} // namespace fewatom
