#include <doctest.h>

#include <cmath>
#include <vector>

#include "fewatom/analysis.hpp"
#include "fewatom/signal.hpp"

using namespace fewatom;

namespace {

PhotonTrace staircase(const std::vector<int>& levels, std::size_t bins_each, const DetectorModel& det,
                      Rng& rng) {
  PiecewiseRate rate;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    rate.set(static_cast<double>(i * bins_each) * det.bin_width,
             det.background_rate + levels[i] * det.per_atom_rate);
  }
  const double t1 = static_cast<double>(levels.size() * bins_each) * det.bin_width;
  return synthesize_counts(rate, 0.0, t1, det.bin_width, rng);
}

} // namespace

TEST_CASE("segmentation accessors") {
  Segmentation s;
  s.change_points = {3, 7};
  s.n_bins = 10;
  s.levels = {1, 2, 3};
  CHECK(s.segment_count() == 3);
  CHECK(s.begin(0) == 0);
  CHECK(s.end(0) == 3);
  CHECK(s.begin(2) == 7);
  CHECK(s.end(2) == 10);
  CHECK(s.segment_of(2) == 0);
  CHECK(s.segment_of(3) == 1);
  CHECK(s.segment_of(9) == 2);
  CHECK(default_step_penalty(1000) == doctest::Approx(1.5 * std::log(1000.0)));
}

TEST_CASE("steps are found at the true boundaries") {
  const DetectorModel det;
  Rng rng(12);
  const PhotonTrace tr = staircase({0, 1, 3, 2, 2, 0}, 50, det, rng);
  const Segmentation seg = infer_atom_numbers(detect_steps(tr), det);
  // the 2 -> 2 boundary is not a step
  REQUIRE(seg.change_points == std::vector<std::size_t>{50, 100, 150, 250});
  CHECK(seg.inferred_n == std::vector<int>{0, 1, 3, 2, 0});
  for (bool a : seg.ambiguous) CHECK_FALSE(a);
  CHECK(seg.levels[2] == doctest::Approx(det.background_rate + 3 * det.per_atom_rate).epsilon(0.01));
}

TEST_CASE("a constant trace stays in one segment") {
  const DetectorModel det;
  int false_steps = 0;
  for (int i = 0; i < 50; ++i) {
    Rng rng = Rng::substream(77, static_cast<std::uint64_t>(i));
    false_steps += static_cast<int>(detect_steps(staircase({2}, 1000, det, rng)).change_points.size());
  }
  CHECK(false_steps <= 3);
  // an explicit huge penalty suppresses even real steps
  Rng rng(3);
  CHECK(detect_steps(staircase({0, 4}, 20, det, rng), 1e12).change_points.empty());
}

TEST_CASE("atom numbers and ambiguity flags") {
  DetectorModel det;
  Segmentation seg;
  seg.levels = {5000, 21000, 5000 + 1.5 * 16000, 5000 + 2.2 * 16000, 1000};
  seg.change_points = {1, 2, 3, 4};
  seg.n_bins = 5;
  seg = infer_atom_numbers(seg, det);
  CHECK(seg.inferred_n == std::vector<int>{0, 1, 2, 2, 0});
  CHECK(seg.ambiguous == std::vector<bool>{false, false, true, false, false});
  det.per_atom_rate = 0;
  CHECK_THROWS(infer_atom_numbers(seg, det));
}

TEST_CASE("burst classification posterior") {
  const BurstModel model;
  // e^-0.5 / (e^-0.5 + e^-3.5)
  const auto zero = classify_burst(0, 1, model);
  CHECK(zero.map_k == 0);
  CHECK(zero.posterior[0] == doctest::Approx(0.9525741268224333).epsilon(1e-12));

  for (std::int64_t c : {0, 2, 5, 9, 20}) {
    const auto p = classify_burst(c, 3, model);
    double sum = 0;
    for (double x : p.posterior) sum += x;
    CHECK(sum == doctest::Approx(1.0));
    CHECK(p.posterior.size() == 4);
  }
  CHECK(classify_burst(20, 3, model).map_k == 3);
  CHECK(classify_burst(3, 3, model).map_k == 1);

  // brute-force Poisson likelihood ratio for 4 counts over k in {0, 1, 2}
  const auto p4 = classify_burst(4, 2, model);
  const double l0 = std::pow(0.5, 4) * std::exp(-0.5);
  const double l1 = std::pow(3.5, 4) * std::exp(-3.5);
  const double l2 = std::pow(6.5, 4) * std::exp(-6.5);
  CHECK(p4.posterior[1] == doctest::Approx(l1 / (l0 + l1 + l2)).epsilon(1e-12));

  const std::vector<double> prior{0.0, 1.0};
  CHECK(classify_burst(0, 1, model, prior).map_k == 1);
  CHECK(classify_burst(0, 0, model).posterior == std::vector<double>{1.0});
  CHECK_THROWS(classify_burst(-1, 1, model));
  CHECK_THROWS(classify_burst(1, 1, model, std::vector<double>{1.0}));
  BurstModel dark = model;
  dark.background_photons_per_window = 0.0;
  dark.mean_photons_per_atom = 0.0;
  CHECK_THROWS(classify_burst(2, 1, dark));
}
