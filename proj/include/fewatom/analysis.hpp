#ifndef FEWATOM_ANALYSIS_HPP
#define FEWATOM_ANALYSIS_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fewatom/signal.hpp"

namespace fewatom {

/// Constant-rate segments of a photon trace.  Segment i spans bins
/// [begin(i), end(i)).
struct Segmentation {
  std::vector<std::size_t> change_points; // first bin of every segment after the first
  std::vector<double> levels;             // counts/s
  std::vector<int> inferred_n;            // filled by infer_atom_numbers
  std::vector<bool> ambiguous;
  std::size_t n_bins = 0;
  double bin_width = 0.0;

  std::size_t segment_count() const { return levels.size(); }
  std::size_t begin(std::size_t segment) const;
  std::size_t end(std::size_t segment) const;
  /// Segment index that contains `bin`.
  std::size_t segment_of(std::size_t bin) const;
};

/// Per-change-point penalty used when none is given: 1.5 ln(n_bins).
double default_step_penalty(std::size_t n_bins);

/// Binary segmentation under a Poisson likelihood: a segment is split at the
/// best bin boundary whenever the log-likelihood gain exceeds `penalty`.
Segmentation detect_steps(const PhotonTrace& trace, std::optional<double> penalty = std::nullopt);

inline constexpr double kAmbiguityThreshold = 0.3;

/// n = round((level - background) / per_atom_rate), flagged ambiguous when
/// the residual exceeds kAmbiguityThreshold atoms.
Segmentation infer_atom_numbers(Segmentation seg, const DetectorModel& det);

struct BurstPosterior {
  std::vector<double> posterior; // index k = number of atoms in F=4
  int map_k = 0;
};

/// Posterior over the number of F=4 atoms given the photon count of one
/// detection window: counts | k ~ Poisson(background + k * mean_photons).
/// An empty prior means uniform over 0..n_atoms.
BurstPosterior classify_burst(std::int64_t window_counts, int n_atoms, const BurstModel& model,
                              std::span<const double> prior = {});

} // namespace fewatom

#endif // FEWATOM_ANALYSIS_HPP
