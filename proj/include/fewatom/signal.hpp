#ifndef FEWATOM_SIGNAL_HPP
#define FEWATOM_SIGNAL_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fewatom/kinetics.hpp"
#include "fewatom/rng.hpp"

namespace fewatom {

struct DetectorModel {
  double per_atom_rate = 1.6e4;     // counts/s per MOT atom
  double background_rate = 5e3;     // counts/s, MOT stray light
  double dipole_stray_rate = 5e3;   // counts/s while only the dipole laser is on
  double bin_width = 0.1;           // s
  double overlap_suppression = 0.3; // fluorescence multiplier with both traps on

  void validate() const;
  bool operator==(const DetectorModel&) const = default;
};

/// Binned photon counts; bin i covers [t0 + i*bin_width, t0 + (i+1)*bin_width).
struct PhotonTrace {
  double t0 = 0.0;
  double bin_width = 0.0;
  std::vector<std::int64_t> counts;

  double bin_start(std::size_t i) const { return t0 + static_cast<double>(i) * bin_width; }
  std::int64_t total() const;
  void validate() const;

  bool operator==(const PhotonTrace&) const = default;
};

struct BurstModel {
  double mean_photons_per_atom = 3.0;
  double background_photons_per_window = 0.5;
  double burst_duration_mean = 400e-6; // s
  double detection_bin = 200e-6;       // s
  double window = 2e-3;                // s, detection-laser on time

  void validate() const;
  bool operator==(const BurstModel&) const = default;
};

/// Piecewise-constant rate: segment i holds from its start time until the
/// next segment begins; the first rate also applies before the first start.
class PiecewiseRate {
 public:
  PiecewiseRate() = default;
  explicit PiecewiseRate(double constant_rate) { set(0.0, constant_rate); }

  /// Sets the rate from t onward; t must not precede the last start.
  void set(double t, double rate);
  double at(double t) const;
  /// Exact integral over [a, b].
  double integral(double a, double b) const;
  bool empty() const { return starts_.empty(); }

 private:
  std::vector<double> starts_;
  std::vector<double> rates_;
};

struct TimeWindow {
  double start = 0.0;
  double stop = 0.0;
};

/// Poisson counts per bin with mean equal to the rate integral over the bin.
PhotonTrace synthesize_counts(const PiecewiseRate& rate, double t0, double t1, double bin_width,
                              Rng& rng);

/// MOT fluorescence staircase: background + N(t) * per_atom_rate, the atomic
/// part scaled by overlap_suppression inside overlap windows, and replaced by
/// the dipole stray level inside `mot_off_windows`.
PhotonTrace synthesize_mot_trace(const StateTrajectory& traj, const DetectorModel& det,
                                 const std::vector<TimeWindow>& overlap_windows, Rng& rng,
                                 const std::vector<TimeWindow>& mot_off_windows = {});

/// Fluorescence burst of state-selective detection, binned at detection_bin
/// over the detection window.  Each F=4 atom emits a Poisson number of
/// photons with mean mean_photons_per_atom, their arrival times following
/// the exponential decay of the burst (mean burst_duration_mean) within the
/// window.  F=3 atoms stay dark.  Background photons are uniform.
PhotonTrace synthesize_detection_burst(int n_f4, int n_f3, const BurstModel& model, Rng& rng);

/// `bin_start_s,counts`, times with 9 significant digits.
void write_trace_csv(std::ostream& out, const PhotonTrace& trace);
PhotonTrace read_trace_csv(std::istream& in);

} // namespace fewatom

#endif // FEWATOM_SIGNAL_HPP
