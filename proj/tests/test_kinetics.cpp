#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "fewatom/kinetics.hpp"
#include "support.hpp"

using namespace fewatom;

namespace {

// Stationary law of the MOT birth-death master equation on 0..nmax, solved
// as pi Q = 0 with sum(pi) = 1.
Eigen::VectorXd master_equation_stationary(const MotRates& r, int nmax) {
  const int m = nmax + 1;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m, m);
  for (int n = 0; n <= nmax; ++n) {
    if (n < nmax) q(n, n + 1) += r.loading_rate;
    if (n > 0) q(n, n - 1) += r.one_body_loss * n;
    if (n > 1) q(n, std::max(0, n - r.two_body_loss_multiplicity)) += r.two_body_pair_rate * 0.5 * n * (n - 1);
    q(n, n) = -q.row(n).sum();
  }
  Eigen::MatrixXd a(m + 1, m);
  a.topRows(m) = q.transpose();
  a.row(m).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m + 1);
  b(m) = 1.0;
  return a.colPivHouseholderQr().solve(b);
}

double telegraph_oracle(Hyperfine initial, const HyperfineRates& r, double t) {
  Eigen::Matrix2d q;
  // state order (F=3, F=4)
  q << -r.r_3to4, r.r_3to4, r.r_4to3, -r.r_4to3;
  const Eigen::Matrix2d p = (q * t).exp();
  return initial == Hyperfine::F4 ? p(1, 1) : p(0, 1);
}

} // namespace

TEST_CASE("trajectory bookkeeping") {
  StateTrajectory tr = StateTrajectory::constant(2, 10.0);
  tr.push(1.0, 3);
  tr.push(1.0, 4); // same instant overwrites
  tr.push(2.0, 4); // unchanged value is dropped
  tr.push(4.0, 1);
  REQUIRE(tr.events.size() == 3);
  CHECK(tr.value_at(0.5) == 2);
  CHECK(tr.value_at(1.0) == 4);
  CHECK(tr.value_at(9.0) == 1);
  CHECK(tr.final_value() == 1);
  CHECK(tr.time_average() == doctest::Approx((2 * 1.0 + 4 * 3.0 + 1 * 6.0) / 10.0));
  const auto occ = tr.occupation_times();
  CHECK(occ[1] == doctest::Approx(6.0));
  CHECK(occ[2] == doctest::Approx(1.0));
  CHECK(occ[4] == doctest::Approx(3.0));
  CHECK_NOTHROW(tr.validate());
  tr.push(5.0, 1);
  tr.push(5.0, 4);
  tr.push(5.0, 1); // reverting at the same instant collapses the event
  CHECK(tr.events.size() == 3);
}

TEST_CASE("Gillespie MOT matches the master-equation stationary law") {
  const MotRates rates{};
  const Eigen::VectorXd pi = master_equation_stationary(rates, 50);
  CHECK(pi.sum() == doctest::Approx(1.0));
  CHECK(pi.minCoeff() >= -1e-12);

  // ensemble of independent runs sampled long after the slowest relaxation (1/gamma = 50 s)
  const int runs = 20000;
  std::vector<double> observed(51, 0.0);
  for (int i = 0; i < runs; ++i) {
    Rng rng = Rng::substream(11, static_cast<std::uint64_t>(i));
    const auto tr = gillespie_mot(rates, 0, 500.0, rng);
    observed[static_cast<std::size_t>(std::min(tr.final_value(), 50))] += 1.0;
  }
  std::vector<double> expected(51);
  for (int n = 0; n <= 50; ++n) expected[static_cast<std::size_t>(n)] = runs * pi(n);
  const auto chi = testsupport::pearson(observed, expected);
  CHECK(chi.df >= 3);
  CHECK(chi.statistic < chi.critical());
}

TEST_CASE("Gillespie loading-only limit is Poisson") {
  // with no losses N(t) ~ Poisson(R t)
  const MotRates rates{2.0, 0.0, 0.0, 2};
  const int runs = 20000;
  std::vector<double> observed(15, 0.0);
  for (int i = 0; i < runs; ++i) {
    Rng rng = Rng::substream(3, static_cast<std::uint64_t>(i));
    observed[static_cast<std::size_t>(std::min(gillespie_mot(rates, 0, 2.0, rng).final_value(), 14))] += 1.0;
  }
  const auto chi = testsupport::pearson(observed, testsupport::poisson_expected(4.0, 14, runs));
  CHECK(chi.statistic < chi.critical());
}

TEST_CASE("Gillespie is a pure function of the seed") {
  Rng a(99), b(99);
  const auto ta = gillespie_mot(MotRates{}, 3, 100.0, a);
  const auto tb = gillespie_mot(MotRates{}, 3, 100.0, b);
  CHECK(ta == tb);
  CHECK(ta.seed == 99);
  CHECK_NOTHROW(ta.validate());
  Rng c(5);
  CHECK_THROWS(gillespie_mot(MotRates{-1.0, 0, 0, 2}, 0, 1.0, c));
  CHECK_THROWS(gillespie_mot(MotRates{}, -1, 1.0, c));
}

TEST_CASE("binomial survival in the dipole and magnetic traps") {
  const double tau = 51.0;
  const int samples = 4000;
  const int n0 = 100;
  double sum = 0.0, sum2 = 0.0, msum = 0.0;
  for (int i = 0; i < samples; ++i) {
    Rng rng = Rng::substream(17, static_cast<std::uint64_t>(i));
    const double k = dipole_survival(n0, tau, tau, rng);
    sum += k;
    sum2 += k * k;
    msum += magnetic_trap_survival(n0, tau, tau, rng);
  }
  const double p = std::exp(-1.0);
  const double mean = sum / samples;
  const double var = sum2 / samples - mean * mean;
  const double sigma_mean = std::sqrt(n0 * p * (1 - p) / samples);
  CHECK(std::abs(mean - n0 * p) < 4 * sigma_mean);
  CHECK(var == doctest::Approx(n0 * p * (1 - p)).epsilon(0.1));
  const double pm = 0.5 * p;
  CHECK(std::abs(msum / samples - n0 * pm) < 4 * std::sqrt(n0 * pm * (1 - pm) / samples));

  Rng rng(1);
  CHECK(dipole_survival(5, tau, 0.0, rng) == 5);
  CHECK(dipole_survival(0, tau, 10.0, rng) == 0);
  CHECK_THROWS(dipole_survival(5, 0.0, 1.0, rng));
  CHECK_THROWS(dipole_survival(5, tau, -1.0, rng));
}

TEST_CASE("telegraph process against the matrix exponential") {
  TrapModel trap;
  trap.peak_scattering_rate = 190.0;
  const auto rates = HyperfineRates::from(effective_relaxation_rates(trap));
  for (double t : {0.0, 0.5, 3.79, 10.0, 40.0}) {
    for (auto f : {Hyperfine::F3, Hyperfine::F4}) {
      CHECK(analytic_occupation(f, rates, t) == doctest::Approx(telegraph_oracle(f, rates, t)).epsilon(1e-12));
    }
  }
  const int atoms = 20000;
  for (auto f : {Hyperfine::F3, Hyperfine::F4}) {
    int in4 = 0;
    double switches = 0;
    for (int i = 0; i < atoms; ++i) {
      Rng rng = Rng::substream(static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(i));
      const auto tr = hyperfine_telegraph(f, rates, 2.0, rng);
      if (tr.final_value() == 4) ++in4;
      switches += static_cast<double>(tr.events.size() - 1);
      for (const auto& e : tr.events) CHECK((e.value == 3 || e.value == 4));
    }
    const double p = telegraph_oracle(f, rates, 2.0);
    CHECK(std::abs(static_cast<double>(in4) / atoms - p) < 4 * std::sqrt(p * (1 - p) / atoms));
    CHECK(switches > 0);
  }
  HyperfineRates frozen{0.0, 0.0};
  Rng rng(2);
  CHECK(hyperfine_telegraph(Hyperfine::F4, frozen, 100.0, rng).events.size() == 1);
  CHECK(analytic_occupation(Hyperfine::F3, frozen, 5.0) == 0.0);
}
