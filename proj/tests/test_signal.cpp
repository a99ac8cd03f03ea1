#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "fewatom/io.hpp"
#include "fewatom/signal.hpp"
#include "support.hpp"

using namespace fewatom;

TEST_CASE("piecewise rate integrates exactly") {
  PiecewiseRate r;
  r.set(0.0, 10.0);
  r.set(1.0, 30.0);
  r.set(2.5, 0.0);
  CHECK(r.at(-1.0) == 10.0);
  CHECK(r.at(1.0) == 30.0);
  CHECK(r.at(3.0) == 0.0);
  CHECK(r.integral(0.0, 1.0) == doctest::Approx(10.0));
  CHECK(r.integral(0.5, 2.0) == doctest::Approx(5.0 + 30.0));
  CHECK(r.integral(0.0, 10.0) == doctest::Approx(10.0 + 45.0));
  CHECK(r.integral(2.0, 2.0) == 0.0);
  CHECK_THROWS(r.set(1.0, 5.0));
  CHECK_THROWS(r.set(4.0, -1.0));
  CHECK(PiecewiseRate(7.0).integral(2.0, 4.0) == doctest::Approx(14.0));
}

TEST_CASE("binned counts are Poisson with the integrated mean") {
  Rng rng(21);
  const PhotonTrace tr = synthesize_counts(PiecewiseRate(80.0), 0.0, 500.0, 0.05, rng);
  REQUIRE(tr.counts.size() == 10000);
  std::vector<double> observed(12, 0.0);
  for (auto c : tr.counts) observed[static_cast<std::size_t>(std::min<std::int64_t>(c, 11))] += 1;
  const auto chi = testsupport::pearson(observed, testsupport::poisson_expected(4.0, 11, 10000));
  CHECK(chi.statistic < chi.critical());

  // a step halfway through a bin contributes its exact share
  PiecewiseRate step;
  step.set(0.0, 0.0);
  step.set(0.25, 1e6);
  Rng r2(1);
  const auto t2 = synthesize_counts(step, 0.0, 1.0, 0.5, r2);
  CHECK(t2.counts.size() == 2);
  CHECK(std::abs(static_cast<double>(t2.counts[0]) - 2.5e5) < 5 * std::sqrt(2.5e5));
  CHECK_THROWS(synthesize_counts(step, 1.0, 1.0, 0.1, r2));
}

TEST_CASE("MOT trace follows the atom-number staircase") {
  DetectorModel det;
  StateTrajectory traj = StateTrajectory::constant(0, 30.0);
  traj.push(10.0, 2);
  traj.push(20.0, 1);
  Rng rng(4);
  const PhotonTrace tr = synthesize_mot_trace(traj, det, {}, rng);
  CHECK(tr.counts.size() == 300);
  CHECK(tr.bin_width == 0.1);
  auto mean_rate = [&](std::size_t a, std::size_t b) {
    double s = 0;
    for (std::size_t i = a; i < b; ++i) s += static_cast<double>(tr.counts[i]);
    return s / (static_cast<double>(b - a) * det.bin_width);
  };
  // 100 bins of ~500 to ~3700 counts: 4 sigma of the mean is below 1%
  CHECK(mean_rate(0, 100) == doctest::Approx(det.background_rate).epsilon(0.02));
  CHECK(mean_rate(100, 200) == doctest::Approx(det.background_rate + 2 * det.per_atom_rate).epsilon(0.01));
  CHECK(mean_rate(200, 300) == doctest::Approx(det.background_rate + det.per_atom_rate).epsilon(0.01));

  // suppressed atomic light in the overlap, stray light only when the MOT is dark
  Rng rng2(4);
  StateTrajectory three = StateTrajectory::constant(3, 30.0);
  const PhotonTrace t2 = synthesize_mot_trace(three, det, {{0.0, 10.0}}, rng2, {{20.0, 30.0}});
  double s1 = 0, s3 = 0;
  for (std::size_t i = 0; i < 100; ++i) s1 += static_cast<double>(t2.counts[i]);
  for (std::size_t i = 200; i < 300; ++i) s3 += static_cast<double>(t2.counts[i]);
  CHECK(s1 / 10.0 == doctest::Approx(det.background_rate + 0.3 * 3 * det.per_atom_rate).epsilon(0.01));
  CHECK(s3 / 10.0 == doctest::Approx(det.dipole_stray_rate).epsilon(0.03));
  CHECK_THROWS(synthesize_mot_trace(three, det, {{25.0, 40.0}}, rng2));
}

TEST_CASE("detection burst window totals") {
  const BurstModel model;
  const int windows = 50000;
  for (int k : {0, 1, 3}) {
    std::vector<double> observed(25, 0.0);
    double sum = 0, sum2 = 0;
    for (int i = 0; i < windows; ++i) {
      Rng rng = Rng::substream(100 + static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(i));
      const PhotonTrace tr = synthesize_detection_burst(k, 3 - k, model, rng);
      REQUIRE(tr.counts.size() == 10);
      const auto c = tr.total();
      sum += static_cast<double>(c);
      sum2 += static_cast<double>(c * c);
      observed[static_cast<std::size_t>(std::min<std::int64_t>(c, 24))] += 1;
    }
    const double lambda = 0.5 + 3.0 * k; // F=3 atoms are dark
    const double mean = sum / windows;
    const double var = sum2 / windows - mean * mean;
    CHECK(std::abs(mean - lambda) < 4 * std::sqrt(lambda / windows));
    // dispersion index of a Poisson total is one
    CHECK(var / mean == doctest::Approx(1.0).epsilon(0.03));
    const auto chi = testsupport::pearson(observed, testsupport::poisson_expected(lambda, 24, windows));
    CHECK(chi.statistic < chi.critical());
  }
}

TEST_CASE("burst photons arrive with the truncated exponential profile") {
  BurstModel model;
  model.background_photons_per_window = 0.0;
  const double tau = model.burst_duration_mean;
  const double w = model.window;
  const double bin = model.detection_bin;
  // probability mass per bin of the profile truncated to the window
  std::vector<double> mass(10);
  const double norm = 1.0 - std::exp(-w / tau);
  for (std::size_t i = 0; i < 10; ++i) {
    const double a = static_cast<double>(i) * bin;
    mass[i] = (std::exp(-a / tau) - std::exp(-(a + bin) / tau)) / norm;
  }
  std::vector<double> observed(10, 0.0);
  double photons = 0;
  for (int i = 0; i < 20000; ++i) {
    Rng rng = Rng::substream(8, static_cast<std::uint64_t>(i));
    const auto tr = synthesize_detection_burst(1, 0, model, rng);
    for (std::size_t b = 0; b < 10; ++b) observed[b] += static_cast<double>(tr.counts[b]);
    photons += static_cast<double>(tr.total());
  }
  std::vector<double> expected(10);
  for (std::size_t b = 0; b < 10; ++b) expected[b] = photons * mass[b];
  const auto chi = testsupport::pearson(observed, expected);
  CHECK(chi.statistic < chi.critical());
  Rng rng(1);
  CHECK_THROWS(synthesize_detection_burst(-1, 0, model, rng));
}

TEST_CASE("trace CSV round trip") {
  PhotonTrace tr{0.0, 0.1, {5, 0, 12, 7}};
  std::ostringstream out;
  write_trace_csv(out, tr);
  CHECK(out.str().rfind("bin_start_s,counts\n0,5\n0.1,0\n0.2,12\n", 0) == 0);
  std::istringstream in(out.str());
  CHECK(read_trace_csv(in) == tr);

  std::istringstream bad_header("t,c\n0,1\n0.1,2\n");
  CHECK_THROWS_AS(read_trace_csv(bad_header), DataError);
  std::istringstream negative("bin_start_s,counts\n0,1\n0.1,-2\n");
  CHECK_THROWS_AS(read_trace_csv(negative), DataError);
  std::istringstream fractional("bin_start_s,counts\n0,1\n0.1,2.5\n");
  CHECK_THROWS_AS(read_trace_csv(fractional), DataError);
  std::istringstream garbage("bin_start_s,counts\n0,1\nx,2\n");
  CHECK_THROWS_AS(read_trace_csv(garbage), DataError);
  std::istringstream single("bin_start_s,counts\n0,1\n");
  CHECK_THROWS_AS(read_trace_csv(single), DataError);
}
