#include "fewatom/sequencer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "fewatom/io.hpp"

namespace fewatom {

std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::Cooling: return "COOLING";
    case Channel::Repumper: return "REPUMPER";
    case Channel::Dipole: return "DIPOLE";
    case Channel::Detection: return "DETECTION";
    case Channel::BField: return "B_FIELD";
  }
  return "?";
}

Channel parse_channel(std::string_view name) {
  for (Channel c : kAllChannels) {
    if (channel_name(c) == name) return c;
  }
  throw DataError("unknown channel '" + std::string(name) + "'");
}

std::string_view protocol_name(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::Transfer: return "transfer";
    case ProtocolKind::Recapture: return "recapture";
    case ProtocolKind::PrepareF3: return "prepare_f3";
    case ProtocolKind::PrepareF4: return "prepare_f4";
    case ProtocolKind::Detect: return "detect";
    case ProtocolKind::MotMonitor: return "mot_monitor";
  }
  return "?";
}

ProtocolKind parse_protocol_kind(std::string_view name) {
  for (auto k : {ProtocolKind::Transfer, ProtocolKind::Recapture, ProtocolKind::PrepareF3,
                 ProtocolKind::PrepareF4, ProtocolKind::Detect, ProtocolKind::MotMonitor}) {
    if (protocol_name(k) == name) return k;
  }
  throw std::invalid_argument("unknown protocol kind '" + std::string(name) + "'");
}

std::string_view prepared_state_name(PreparedState s) {
  switch (s) {
    case PreparedState::None: return "none";
    case PreparedState::F3: return "F3";
    case PreparedState::F4: return "F4";
    case PreparedState::Mixed: return "mixed";
  }
  return "?";
}

std::string_view violation_code(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::UnheldAtoms: return "unheld_atoms";
    case Violation::Kind::DetectionOverlap: return "detection_overlap";
    case Violation::Kind::PockelsGap: return "pockels_gap";
    case Violation::Kind::Alternation: return "alternation";
  }
  return "?";
}

void Sequence::normalize() {
  std::stable_sort(events.begin(), events.end(), [](const SwitchEvent& a, const SwitchEvent& b) {
    if (a.time != b.time) return a.time < b.time;
    return static_cast<int>(a.channel) < static_cast<int>(b.channel);
  });
  if (!events.empty()) duration = std::max(duration, events.back().time);
}

bool Sequence::initial_state(Channel c) const {
  for (const auto& e : events) {
    if (e.channel == c) return !e.on;
  }
  return false;
}

bool Sequence::state_at(Channel c, double t) const {
  bool state = initial_state(c);
  for (const auto& e : events) {
    if (e.time > t) break;
    if (e.channel == c) state = e.on;
  }
  return state;
}

void ProtocolParams::validate() const {
  if (!(overlap > 0.0 && prep_delay > 0.0 && pockels_gap > 0.0 && detection_window > 0.0 &&
        monitor_duration > 0.0)) {
    throw std::invalid_argument("protocol durations must be positive");
  }
}

Sequence build_protocol(ProtocolKind kind, const ProtocolParams& p) {
  p.validate();
  Sequence seq;
  seq.label = std::string(protocol_name(kind));
  switch (kind) {
    case ProtocolKind::Transfer:
      seq.events = {{0.0, Channel::Dipole, true},
                    {p.overlap, Channel::Cooling, false},
                    {p.overlap, Channel::Repumper, false}};
      seq.duration = p.overlap;
      seq.parameters["overlap_s"] = p.overlap;
      break;
    case ProtocolKind::Recapture: {
      Sequence transfer = build_protocol(ProtocolKind::Transfer, p);
      seq = time_reversed(transfer);
      seq.label = "recapture";
      break;
    }
    case ProtocolKind::PrepareF3:
      seq.events = {{0.0, Channel::Repumper, false}, {p.prep_delay, Channel::Cooling, false}};
      seq.duration = p.prep_delay;
      seq.parameters["prep_delay_s"] = p.prep_delay;
      break;
    case ProtocolKind::PrepareF4:
      seq.events = {{0.0, Channel::Cooling, false}, {p.prep_delay, Channel::Repumper, false}};
      seq.duration = p.prep_delay;
      seq.parameters["prep_delay_s"] = p.prep_delay;
      break;
    case ProtocolKind::Detect:
      seq.events = {{0.0, Channel::Dipole, false},
                    {p.pockels_gap, Channel::Detection, true},
                    {p.pockels_gap + p.detection_window, Channel::Detection, false}};
      seq.duration = p.pockels_gap + p.detection_window;
      seq.parameters["pockels_gap_s"] = p.pockels_gap;
      seq.parameters["detection_window_s"] = p.detection_window;
      break;
    case ProtocolKind::MotMonitor:
      seq.events = {{0.0, Channel::Cooling, true},
                    {0.0, Channel::Repumper, true},
                    {0.0, Channel::BField, true}};
      seq.duration = p.monitor_duration;
      seq.parameters["monitor_s"] = p.monitor_duration;
      break;
  }
  seq.normalize();
  return seq;
}

Sequence time_reversed(const Sequence& seq) {
  Sequence out;
  out.label = seq.label + "_reversed";
  out.parameters = seq.parameters;
  out.duration = seq.duration;
  for (const auto& e : seq.events) out.events.push_back({seq.duration - e.time, e.channel, !e.on});
  out.normalize();
  return out;
}

Sequence concatenate(const Sequence& base, const Sequence& next, double gap) {
  if (!(gap >= 0.0)) throw std::invalid_argument("gap must be non-negative");
  Sequence out = base;
  const double offset = base.duration + gap;
  out.label = base.label.empty() ? next.label : base.label + "+" + next.label;
  for (const auto& e : next.events) out.events.push_back({offset + e.time, e.channel, e.on});
  for (const auto& [k, v] : next.parameters) out.parameters.emplace(k, v);
  out.duration = offset + next.duration;
  out.normalize();
  return out;
}

namespace {

struct ChannelState {
  std::array<bool, 5> on{};
  bool operator[](Channel c) const { return on[static_cast<std::size_t>(c)]; }
  bool& operator[](Channel c) { return on[static_cast<std::size_t>(c)]; }
  bool mot() const { return (*this)[Channel::Cooling] && (*this)[Channel::Repumper]; }
};

ChannelState initial_states(const Sequence& seq) {
  ChannelState s;
  for (Channel c : kAllChannels) s[c] = seq.initial_state(c);
  return s;
}

std::vector<double> breakpoints(const Sequence& seq) {
  std::vector<double> times{0.0};
  for (const auto& e : seq.events) times.push_back(e.time);
  times.push_back(seq.duration);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

std::string fmt_time(double t) { return format_shortest(t) + " s"; }

} // namespace

std::vector<Violation> validate_sequence(const Sequence& seq, double min_pockels_gap) {
  std::vector<Violation> out;
  Sequence s = seq;
  s.normalize();

  // (d) per-channel alternation
  for (Channel c : kAllChannels) {
    std::optional<bool> last;
    for (const auto& e : s.events) {
      if (e.channel != c) continue;
      if (last && *last == e.on) {
        out.push_back({Violation::Kind::Alternation, e.time, e.time,
                       std::string(channel_name(c)) + " switched " + (e.on ? "on" : "off") +
                           " twice in a row at " + fmt_time(e.time)});
      }
      last = e.on;
    }
  }

  const auto times = breakpoints(s);
  ChannelState state = initial_states(s);
  bool present = state[Channel::Cooling] || state[Channel::Dipole];
  bool unheld = false;
  double unheld_since = 0.0;
  std::optional<double> last_dipole_off;
  std::size_t next_event = 0;

  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const ChannelState before = state;
    while (next_event < s.events.size() && s.events[next_event].time <= t) {
      const auto& e = s.events[next_event++];
      state[e.channel] = e.on;
      if (e.channel == Channel::Dipole && !e.on) last_dipole_off = e.time;
    }
    const bool detection_starts = state[Channel::Detection] && !before[Channel::Detection];

    // (c) Pockels-cell gap at every detection onset
    if (detection_starts && !state[Channel::Dipole] && last_dipole_off &&
        t - *last_dipole_off < min_pockels_gap * (1.0 - 1e-9)) {
      out.push_back({Violation::Kind::PockelsGap, t, t,
                     "DETECTION on at " + fmt_time(t) + " only " + format_shortest(t - *last_dipole_off) +
                         " s after DIPOLE off (minimum " + format_shortest(min_pockels_gap) + " s)"});
    }

    // (a) atoms must sit in the MOT or the dipole trap until released for detection
    const bool held = state[Channel::Cooling] || state[Channel::Dipole];
    if (unheld && (held || detection_starts)) {
      if (!detection_starts) {
        out.push_back({Violation::Kind::UnheldAtoms, unheld_since, t,
                       "atoms unheld from " + fmt_time(unheld_since) + " to " + fmt_time(t)});
      }
      unheld = false;
    }
    if (detection_starts) present = false;
    if (state[Channel::Cooling]) present = true;
    if (present && !held && !unheld && !state[Channel::Detection]) {
      unheld = true;
      unheld_since = t;
    }

    if (i + 1 >= times.size()) break;
    const double stop = times[i + 1];
    // (b) detection light never shares time with the dipole trap
    if (stop > t && state[Channel::Detection] && state[Channel::Dipole]) {
      out.push_back({Violation::Kind::DetectionOverlap, t, stop,
                     "DETECTION overlaps DIPOLE from " + fmt_time(t) + " to " + fmt_time(stop)});
    }
  }
  if (unheld && s.duration > unheld_since) {
    out.push_back({Violation::Kind::UnheldAtoms, unheld_since, s.duration,
                   "atoms unheld from " + fmt_time(unheld_since) + " to " + fmt_time(s.duration)});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Violation& a, const Violation& b) { return a.time < b.time; });
  return out;
}

void write_sequence_csv(std::ostream& out, const Sequence& seq) {
  out << "time_s,channel,state\n";
  for (const auto& e : seq.events) {
    out << format_shortest(e.time) << ',' << channel_name(e.channel) << ',' << (e.on ? "on" : "off")
        << '\n';
  }
}

Sequence read_sequence_csv(std::istream& in) {
  Sequence seq;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto fields = split(text, ',');
    if (!header) {
      if (fields != std::vector<std::string>{"time_s", "channel", "state"}) {
        throw DataError("sequence CSV header must be 'time_s,channel,state'");
      }
      header = true;
      continue;
    }
    try {
      if (fields.size() != 3) throw DataError("expected 3 fields");
      SwitchEvent e;
      e.time = parse_double(fields[0], "time_s");
      if (e.time < 0.0) throw DataError("negative time");
      e.channel = parse_channel(fields[1]);
      if (fields[2] == "on") {
        e.on = true;
      } else if (fields[2] == "off") {
        e.on = false;
      } else {
        throw DataError("state must be 'on' or 'off', got '" + fields[2] + "'");
      }
      seq.events.push_back(e);
    } catch (const DataError& err) {
      throw DataError("sequence line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  if (!header) throw DataError("empty sequence CSV");
  seq.label = "loaded";
  seq.normalize();
  return seq;
}

namespace {

enum class Location { None, Mot, Dipole, Free };

} // namespace

RunRecord simulate_sequence(const Sequence& input, int initial_n, const SimulationPhysics& physics,
                            Rng& rng, const SimulationOptions& options) {
  if (initial_n < 0) throw std::invalid_argument("initial atom number must be non-negative");
  Sequence seq = input;
  seq.normalize();
  if (const auto violations = validate_sequence(seq); !violations.empty()) {
    std::string msg = "invalid sequence:";
    for (const auto& v : violations) msg += " [" + std::string(violation_code(v.kind)) + "] " + v.message + ";";
    throw std::invalid_argument(msg);
  }
  if (!(seq.duration > 0.0)) throw std::invalid_argument("sequence must have positive duration");
  physics.mot.validate();
  physics.hyperfine.validate();
  if (!(physics.dipole_lifetime > 0.0)) throw std::invalid_argument("dipole lifetime must be positive");

  RunRecord rec;
  rec.sequence = seq;
  rec.seed = rng.seed();

  const double mixed_p4 = physics.hyperfine.total() > 0.0
                              ? physics.hyperfine.r_3to4 / physics.hyperfine.total()
                              : 0.5;
  const bool mot_active = physics.mot.loading_rate > 0.0 || physics.mot.one_body_loss > 0.0 ||
                          physics.mot.two_body_pair_rate > 0.0;

  ChannelState state = initial_states(seq);
  Location where = Location::None;
  int n = 0;
  std::vector<int> spins; // hyperfine state per dipole-trapped atom
  std::optional<Channel> remaining_laser;
  bool mot_was_complete = state.mot();

  bool pending_load = true; // initial atoms enter when the MOT first lights up
  if (state.mot()) {
    where = Location::Mot;
    n = initial_n;
    pending_load = false;
  } else if (state[Channel::Dipole]) {
    where = Location::Dipole;
    n = initial_n;
    rec.prepared_n = n;
    rec.prepared_state = PreparedState::Mixed;
    for (int i = 0; i < n; ++i) spins.push_back(rng.bernoulli(mixed_p4) ? 4 : 3);
    pending_load = false;
  }
  rec.atom_number = StateTrajectory::constant(n, seq.duration, rng.seed());

  std::vector<TimeWindow> overlap_windows;
  std::vector<TimeWindow> mot_off_windows;
  const auto times = breakpoints(seq);
  std::size_t next_event = 0;

  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const ChannelState before = state;
    while (next_event < seq.events.size() && seq.events[next_event].time <= t) {
      const auto& e = seq.events[next_event++];
      state[e.channel] = e.on;
    }

    // MOT light partially off: remember which laser is still pumping.
    if (before.mot() && !state.mot()) {
      mot_was_complete = true;
      remaining_laser.reset();
      if (state[Channel::Cooling]) remaining_laser = Channel::Cooling;
      if (state[Channel::Repumper]) remaining_laser = Channel::Repumper;
    }
    const bool mot_dark = !state[Channel::Cooling] && !state[Channel::Repumper];
    const bool detection_starts = state[Channel::Detection] && !before[Channel::Detection];

    if (where == Location::Free && !detection_starts) {
      n = 0; // released atoms fly away unless probed immediately
      where = Location::None;
    }

    if (where == Location::Mot && mot_dark) {
      if (state[Channel::Dipole]) {
        rec.prepared_n = n;
        if (mot_was_complete && remaining_laser == Channel::Cooling) {
          rec.prepared_state = PreparedState::F3; // cooling alone depumps into F=3
        } else if (mot_was_complete && remaining_laser == Channel::Repumper) {
          rec.prepared_state = PreparedState::F4; // repumper alone pumps into F=4
        } else {
          rec.prepared_state = PreparedState::Mixed;
        }
        if (physics.loading == LoadingMode::Geometric) {
          n = static_cast<int>(rng.binomial(n, physics.geometric_efficiency));
        }
        spins.clear();
        for (int a = 0; a < n; ++a) {
          int f;
          switch (rec.prepared_state) {
            case PreparedState::F3: f = rng.bernoulli(physics.contamination) ? 4 : 3; break;
            case PreparedState::F4: f = rng.bernoulli(physics.contamination) ? 3 : 4; break;
            default: f = rng.bernoulli(mixed_p4) ? 4 : 3; break;
          }
          spins.push_back(f);
        }
        where = Location::Dipole;
      } else {
        n = 0;
        where = Location::None;
      }
      remaining_laser.reset();
    }

    if (where == Location::Dipole && state.mot()) {
      rec.survivors = n;
      rec.recaptured_n = n;
      rec.recaptured = true;
      spins.clear();
      where = Location::Mot;
    } else if (where == Location::Dipole && !state[Channel::Dipole]) {
      rec.survivors = n;
      where = Location::Free;
    }

    if (detection_starts) {
      double stop = seq.duration;
      for (std::size_t k = next_event; k < seq.events.size(); ++k) {
        if (seq.events[k].channel == Channel::Detection && !seq.events[k].on) {
          stop = seq.events[k].time;
          break;
        }
      }
      int f4 = 0;
      int f3 = 0;
      if (where == Location::Free) {
        for (int f : spins) (f == 4 ? f4 : f3) += 1;
      }
      BurstModel burst = physics.burst;
      burst.window = std::max(stop - t, 1e-12);
      PhotonTrace trace = synthesize_detection_burst(f4, f3, burst, rng);
      trace.t0 = t;
      rec.detected_atoms = f4 + f3;
      rec.detected_f4 = f4;
      rec.detection_counts = trace.total();
      rec.classification = classify_burst(rec.detection_counts, f4 + f3, burst);
      if (options.record_traces) rec.traces.push_back({"detection", std::move(trace)});
      n = 0;
      spins.clear();
      where = Location::None;
    }

    if (!before.mot() && state.mot() && where == Location::None) {
      where = Location::Mot;
      if (pending_load) n = initial_n;
    }
    if (state.mot()) pending_load = false;
    if (state.mot()) mot_was_complete = true;
    rec.atom_number.push(t, n);

    if (i + 1 >= times.size()) break;
    const double stop = times[i + 1];
    const double dt = stop - t;
    if (dt <= 0.0) continue;

    if (state.mot() && state[Channel::Dipole]) overlap_windows.push_back({t, stop});
    if (!state.mot()) mot_off_windows.push_back({t, stop});

    if (where == Location::Mot && state.mot() && mot_active) {
      const StateTrajectory local = gillespie_mot(physics.mot, n, dt, rng);
      for (std::size_t k = 1; k < local.events.size(); ++k) {
        rec.atom_number.push(t + local.events[k].time, local.events[k].value);
      }
      n = local.final_value();
    } else if (where == Location::Dipole && state[Channel::Dipole]) {
      const int kept = dipole_survival(n, physics.dipole_lifetime, dt, rng);
      for (int lost = n - kept; lost > 0; --lost) {
        const auto j = static_cast<std::size_t>(rng.uniform_index(spins.size()));
        spins[j] = spins.back();
        spins.pop_back();
      }
      n = kept;
      if (physics.hyperfine.total() > 0.0) {
        for (int& f : spins) {
          f = hyperfine_telegraph(static_cast<Hyperfine>(f), physics.hyperfine, dt, rng).final_value();
        }
      }
      rec.atom_number.push(stop, n);
    }
  }
  if (where == Location::Dipole) rec.survivors = n;

  if (options.record_traces) {
    // Merge adjacent windows so the trace synthesiser sees whole phases.
    auto merge = [](std::vector<TimeWindow> ws) {
      std::vector<TimeWindow> merged;
      for (const auto& w : ws) {
        if (!merged.empty() && merged.back().stop == w.start) {
          merged.back().stop = w.stop;
        } else {
          merged.push_back(w);
        }
      }
      return merged;
    };
    StateTrajectory fluor = rec.atom_number;
    fluor.t_end = seq.duration;
    PhotonTrace trace = synthesize_mot_trace(fluor, physics.detector, merge(overlap_windows), rng,
                                             merge(mot_off_windows));
    rec.traces.insert(rec.traces.begin(), PhaseTrace{"fluorescence", std::move(trace)});
  }
  return rec;
}

} // namespace fewatom
