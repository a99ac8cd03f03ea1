#include "fewatom/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace fewatom {

std::size_t Segmentation::begin(std::size_t segment) const {
  return segment == 0 ? 0 : change_points[segment - 1];
}

std::size_t Segmentation::end(std::size_t segment) const {
  return segment < change_points.size() ? change_points[segment] : n_bins;
}

std::size_t Segmentation::segment_of(std::size_t bin) const {
  return static_cast<std::size_t>(
      std::upper_bound(change_points.begin(), change_points.end(), bin) - change_points.begin());
}

double default_step_penalty(std::size_t n_bins) {
  return 1.5 * std::log(static_cast<double>(std::max<std::size_t>(n_bins, 2)));
}

namespace {

// Profile Poisson log-likelihood of a segment with total S over n bins,
// dropping the data-only log(k!) terms.
double segment_loglik(double sum, double n) {
  return sum > 0.0 ? sum * std::log(sum / n) - sum : 0.0;
}

} // namespace

Segmentation detect_steps(const PhotonTrace& trace, std::optional<double> penalty) {
  trace.validate();
  const std::size_t n = trace.counts.size();
  const double pen = penalty.value_or(default_step_penalty(n));

  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + static_cast<double>(trace.counts[i]);

  std::vector<std::size_t> cps;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, n}};
  while (!stack.empty()) {
    const auto [a, b] = stack.back();
    stack.pop_back();
    if (b - a < 2) continue;
    const double whole = segment_loglik(prefix[b] - prefix[a], static_cast<double>(b - a));
    double best_gain = 0.0;
    std::size_t best = 0;
    for (std::size_t k = a + 1; k < b; ++k) {
      const double gain = segment_loglik(prefix[k] - prefix[a], static_cast<double>(k - a)) +
                          segment_loglik(prefix[b] - prefix[k], static_cast<double>(b - k)) - whole;
      if (gain > best_gain) {
        best_gain = gain;
        best = k;
      }
    }
    if (best != 0 && best_gain > pen) {
      cps.push_back(best);
      stack.emplace_back(a, best);
      stack.emplace_back(best, b);
    }
  }
  std::sort(cps.begin(), cps.end());

  Segmentation seg;
  seg.change_points = std::move(cps);
  seg.n_bins = n;
  seg.bin_width = trace.bin_width;
  for (std::size_t s = 0; s <= seg.change_points.size(); ++s) {
    const auto a = seg.begin(s);
    const auto b = seg.end(s);
    seg.levels.push_back((prefix[b] - prefix[a]) / static_cast<double>(b - a) / trace.bin_width);
  }
  seg.inferred_n.assign(seg.levels.size(), 0);
  seg.ambiguous.assign(seg.levels.size(), false);
  return seg;
}

Segmentation infer_atom_numbers(Segmentation seg, const DetectorModel& det) {
  if (!(det.per_atom_rate > 0.0)) throw std::invalid_argument("per_atom_rate must be positive");
  seg.inferred_n.resize(seg.levels.size());
  seg.ambiguous.resize(seg.levels.size());
  for (std::size_t i = 0; i < seg.levels.size(); ++i) {
    const double atoms = (seg.levels[i] - det.background_rate) / det.per_atom_rate;
    const double rounded = std::max(0.0, std::round(atoms));
    seg.inferred_n[i] = static_cast<int>(rounded);
    seg.ambiguous[i] = std::abs(atoms - rounded) > kAmbiguityThreshold;
  }
  return seg;
}

BurstPosterior classify_burst(std::int64_t window_counts, int n_atoms, const BurstModel& model,
                              std::span<const double> prior) {
  model.validate();
  if (n_atoms < 0) throw std::invalid_argument("n_atoms must be non-negative");
  if (window_counts < 0) throw std::invalid_argument("window counts must be non-negative");
  const auto states = static_cast<std::size_t>(n_atoms) + 1;
  if (!prior.empty() && prior.size() != states) {
    throw std::invalid_argument("prior must have n_atoms + 1 entries");
  }

  const double c = static_cast<double>(window_counts);
  std::vector<double> logpost(states);
  for (std::size_t k = 0; k < states; ++k) {
    const double mean =
        model.background_photons_per_window + static_cast<double>(k) * model.mean_photons_per_atom;
    double loglik;
    if (mean > 0.0) {
      loglik = c * std::log(mean) - mean - std::lgamma(c + 1.0);
    } else {
      loglik = window_counts == 0 ? 0.0 : -INFINITY;
    }
    const double p = prior.empty() ? 1.0 : prior[k];
    if (p < 0.0) throw std::invalid_argument("prior weights must be non-negative");
    logpost[k] = (p > 0.0) ? loglik + std::log(p) : -INFINITY;
  }
  const double top = *std::max_element(logpost.begin(), logpost.end());
  if (!std::isfinite(top)) throw std::domain_error("burst count is impossible under every state");

  BurstPosterior out;
  out.posterior.resize(states);
  double norm = 0.0;
  for (std::size_t k = 0; k < states; ++k) {
    out.posterior[k] = std::exp(logpost[k] - top);
    norm += out.posterior[k];
  }
  for (auto& p : out.posterior) p /= norm;
  out.map_k = static_cast<int>(std::max_element(out.posterior.begin(), out.posterior.end()) -
                               out.posterior.begin());
  return out;
}

} // namespace fewatom
