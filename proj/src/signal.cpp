#include "fewatom/signal.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <iterator>
#include <ostream>
#include <stdexcept>
#include <string>

#include "fewatom/io.hpp"

namespace fewatom {

void DetectorModel::validate() const {
  if (!(per_atom_rate >= 0.0 && background_rate >= 0.0 && dipole_stray_rate >= 0.0)) {
    throw std::invalid_argument("detector rates must be non-negative");
  }
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be positive");
  if (!(overlap_suppression >= 0.0 && overlap_suppression <= 1.0)) {
    throw std::invalid_argument("overlap suppression must lie in [0, 1]");
  }
}

std::int64_t PhotonTrace::total() const {
  std::int64_t sum = 0;
  for (auto c : counts) sum += c;
  return sum;
}

void PhotonTrace::validate() const {
  if (!(bin_width > 0.0)) throw std::invalid_argument("trace bin width must be positive");
  if (counts.empty()) throw std::invalid_argument("trace must contain at least one bin");
  for (auto c : counts) {
    if (c < 0) throw std::invalid_argument("trace counts must be non-negative");
  }
}

void BurstModel::validate() const {
  if (!(mean_photons_per_atom >= 0.0 && background_photons_per_window >= 0.0 &&
        burst_duration_mean >= 0.0)) {
    throw std::invalid_argument("burst model parameters must be non-negative");
  }
  if (!(detection_bin > 0.0 && window > 0.0)) {
    throw std::invalid_argument("detection bin and window must be positive");
  }
}

void PiecewiseRate::set(double t, double rate) {
  if (!(rate >= 0.0) || !std::isfinite(rate)) throw std::invalid_argument("rates must be non-negative");
  if (!starts_.empty() && t < starts_.back()) {
    throw std::invalid_argument("piecewise rate segments must be added in time order");
  }
  if (!starts_.empty() && t == starts_.back()) {
    rates_.back() = rate;
    return;
  }
  starts_.push_back(t);
  rates_.push_back(rate);
}

double PiecewiseRate::at(double t) const {
  if (starts_.empty()) return 0.0;
  auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
  if (it == starts_.begin()) return rates_.front();
  return rates_[static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1];
}

double PiecewiseRate::integral(double a, double b) const {
  if (starts_.empty() || !(b > a)) return 0.0;
  auto it = std::upper_bound(starts_.begin(), starts_.end(), a);
  std::size_t i = (it == starts_.begin()) ? 0 : static_cast<std::size_t>(it - starts_.begin()) - 1;
  double acc = 0.0;
  double cursor = a;
  while (cursor < b) {
    const double seg_end = (i + 1 < starts_.size()) ? std::min(b, starts_[i + 1]) : b;
    if (seg_end > cursor) acc += rates_[i] * (seg_end - cursor);
    cursor = seg_end;
    if (i + 1 < starts_.size()) {
      ++i;
    } else {
      break;
    }
  }
  return acc;
}

PhotonTrace synthesize_counts(const PiecewiseRate& rate, double t0, double t1, double bin_width,
                              Rng& rng) {
  if (!(t1 > t0)) throw std::invalid_argument("trace span must be positive");
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be positive");
  const auto n_bins =
      static_cast<std::size_t>(std::max(1.0, std::ceil((t1 - t0) / bin_width - 1e-9)));
  PhotonTrace trace;
  trace.t0 = t0;
  trace.bin_width = bin_width;
  trace.counts.resize(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i) {
    const double a = t0 + static_cast<double>(i) * bin_width;
    trace.counts[i] = rng.poisson(rate.integral(a, a + bin_width));
  }
  return trace;
}

namespace {

bool inside(const std::vector<TimeWindow>& windows, double t) {
  return std::any_of(windows.begin(), windows.end(),
                     [t](const TimeWindow& w) { return t >= w.start && t < w.stop; });
}

void check_windows(const std::vector<TimeWindow>& windows, double t_end) {
  for (const auto& w : windows) {
    if (!(w.start >= 0.0 && w.stop <= t_end && w.stop >= w.start)) {
      throw std::invalid_argument("signal window lies outside the trajectory span");
    }
  }
}

} // namespace

PhotonTrace synthesize_mot_trace(const StateTrajectory& traj, const DetectorModel& det,
                                 const std::vector<TimeWindow>& overlap_windows, Rng& rng,
                                 const std::vector<TimeWindow>& mot_off_windows) {
  det.validate();
  traj.validate();
  if (!(traj.t_end > 0.0)) throw std::invalid_argument("trajectory must have positive duration");
  check_windows(overlap_windows, traj.t_end);
  check_windows(mot_off_windows, traj.t_end);

  std::vector<double> breaks;
  for (const auto& e : traj.events) breaks.push_back(e.time);
  for (const auto* ws : {&overlap_windows, &mot_off_windows}) {
    for (const auto& w : *ws) {
      breaks.push_back(w.start);
      breaks.push_back(w.stop);
    }
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  PiecewiseRate rate;
  for (double t : breaks) {
    if (t >= traj.t_end) break;
    double r;
    if (inside(mot_off_windows, t)) {
      r = det.dipole_stray_rate;
    } else {
      const double atoms = traj.value_at(t) * det.per_atom_rate;
      r = det.background_rate + (inside(overlap_windows, t) ? det.overlap_suppression : 1.0) * atoms;
    }
    rate.set(t, r);
  }
  return synthesize_counts(rate, 0.0, traj.t_end, det.bin_width, rng);
}

PhotonTrace synthesize_detection_burst(int n_f4, int n_f3, const BurstModel& model, Rng& rng) {
  model.validate();
  if (n_f4 < 0 || n_f3 < 0) throw std::invalid_argument("atom counts must be non-negative");
  const double window = model.window;
  const auto n_bins =
      static_cast<std::size_t>(std::max(1.0, std::ceil(window / model.detection_bin - 1e-9)));
  PhotonTrace trace;
  trace.t0 = 0.0;
  trace.bin_width = model.detection_bin;
  trace.counts.assign(n_bins, 0);

  auto deposit = [&](double t) {
    auto i = static_cast<std::size_t>(t / model.detection_bin);
    trace.counts[std::min(i, n_bins - 1)] += 1;
  };

  const double tau = model.burst_duration_mean;
  // Fraction of an untruncated exponential profile that falls inside the window.
  const double kept = (tau > 0.0) ? -std::expm1(-window / tau) : 1.0;
  for (int atom = 0; atom < n_f4; ++atom) {
    const auto photons = rng.poisson(model.mean_photons_per_atom);
    for (std::int64_t k = 0; k < photons; ++k) {
      const double t = (tau > 0.0) ? -tau * std::log1p(-rng.uniform() * kept) : 0.0;
      deposit(std::min(t, window));
    }
  }
  const auto background = rng.poisson(model.background_photons_per_window);
  for (std::int64_t k = 0; k < background; ++k) deposit(rng.uniform() * window);
  return trace;
}

void write_trace_csv(std::ostream& out, const PhotonTrace& trace) {
  out << "bin_start_s,counts\n";
  for (std::size_t i = 0; i < trace.counts.size(); ++i) {
    out << format_sig9(trace.bin_start(i)) << ',' << trace.counts[i] << '\n';
  }
}

PhotonTrace read_trace_csv(std::istream& in) {
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const Table table = table_from_csv(text, "trace");
  if (table.header.size() != 2 || table.header[0] != "bin_start_s" || table.header[1] != "counts") {
    throw DataError("trace CSV header must be 'bin_start_s,counts'");
  }
  if (table.rows.size() < 2) throw DataError("trace CSV needs at least two bins to infer the bin width");
  PhotonTrace trace;
  trace.t0 = table.rows.front()[0];
  const double span = table.rows.back()[0] - trace.t0;
  trace.bin_width = parse_double(format_sig9(span / static_cast<double>(table.rows.size() - 1)),
                                 "bin width");
  if (!(trace.bin_width > 0.0)) throw DataError("trace bin starts must increase");
  for (const auto& row : table.rows) {
    const double c = row[1];
    if (c < 0.0 || c != std::floor(c)) throw DataError("trace counts must be non-negative integers");
    trace.counts.push_back(static_cast<std::int64_t>(c));
  }
  return trace;
}

} // namespace fewatom
