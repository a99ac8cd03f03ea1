#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "fewatom/physics.hpp"

using namespace fewatom;

namespace {

// Reference values evaluated independently (NumPy/SciPy) from the same
// constants: Gamma = 2pi x 5.2 MHz, D2 852 nm, D1 894.6 nm.
constexpr double kPeakIntensity = 63661977236.75813; // W/m^2 at 2.5 W, 5 um
constexpr double kDepthKelvin = 0.017308805017739664;
constexpr double kScattering = 209.40577086197095;
constexpr double kDopplerT = 0.00012478031983106645;
constexpr double kEmittedPower = 3.808819164353982e-12;
constexpr double kDetectedRate = 16336.281798666925;
constexpr double kLoading = 0.7026982212493198;
// Time-averaged I/I0 by adaptive quadrature over r with an algebraic end-point weight.
constexpr double kFactor05 = 0.7846380455785927;
constexpr double kFactor10 = 0.40682702650137353;
constexpr double kFactor12 = 0.28517710678325475;
constexpr double kFactor15 = 0.15078500548152704;
constexpr double kFactor18 = 0.06829196907802461;
constexpr double kAmplitudeEighth = 1.5772062932571733; // in units of w0

const GaussianBeam kBeam{2.5, 5e-6, 1.064e-6};

TrapModel unit_trap() {
  TrapModel t;
  t.depth_u0 = 1.0;
  t.waist = 1.0;
  return t;
}

} // namespace

TEST_CASE("cesium constants and beam geometry") {
  const auto cs = AtomParams::cesium();
  CHECK(cs.doppler_temperature == doctest::Approx(kDopplerT).epsilon(1e-12));
  CHECK(kBeam.peak_intensity() == doctest::Approx(kPeakIntensity).epsilon(1e-12));
  CHECK(kBeam.rayleigh_range() == doctest::Approx(constants::pi * 25e-12 / 1.064e-6));
  CHECK(kBeam.radius_at(kBeam.rayleigh_range()) == doctest::Approx(std::sqrt(2.0) * 5e-6));
  CHECK(beam_intensity(kBeam, 5e-6, 0.0) == doctest::Approx(kPeakIntensity * std::exp(-2.0)));
  CHECK(beam_intensity(kBeam, 0.0, kBeam.rayleigh_range()) == doctest::Approx(kPeakIntensity / 2));
}

TEST_CASE("two-line depth and scattering") {
  const auto cs = AtomParams::cesium();
  CHECK(trap_depth(kBeam, cs) / constants::boltzmann == doctest::Approx(kDepthKelvin).epsilon(1e-10));
  CHECK(peak_scattering_rate(kBeam, cs) == doctest::Approx(kScattering).epsilon(1e-10));

  // both quantities are linear in power
  GaussianBeam half = kBeam;
  half.power /= 2;
  CHECK(trap_depth(half, cs) == doctest::Approx(trap_depth(kBeam, cs) / 2));
  CHECK(peak_scattering_rate(half, cs) == doctest::Approx(peak_scattering_rate(kBeam, cs) / 2));

  GaussianBeam blue = kBeam;
  blue.wavelength = 800e-9;
  CHECK_THROWS_AS(trap_depth(blue, cs), std::domain_error);
  GaussianBeam between = kBeam;
  between.wavelength = 870e-9;
  CHECK_THROWS_AS(peak_scattering_rate(between, cs), std::domain_error);
  GaussianBeam bad = kBeam;
  bad.waist = -1;
  CHECK_THROWS(trap_depth(bad, cs));

  const TrapModel trap = make_trap(kBeam, cs);
  CHECK(trap.depth_temperature() == doctest::Approx(kDepthKelvin).epsilon(1e-10));
  CHECK(trap.waist == 5e-6);
}

TEST_CASE("fluorescence budget") {
  const auto b = fluorescence_budget(AtomParams::cesium(), 1e-3);
  CHECK(b.emitted_power == doctest::Approx(kEmittedPower).epsilon(1e-12));
  CHECK(b.detected_rate == doctest::Approx(kDetectedRate).epsilon(1e-12));
  CHECK_THROWS(fluorescence_budget(AtomParams::cesium(), 1.5));
}

TEST_CASE("geometric loading efficiency") {
  const double kb = constants::boltzmann;
  CHECK(geometric_loading_efficiency(125e-6 * kb, 16e-3 * kb, 5e-6, 10e-6) ==
        doctest::Approx(kLoading).epsilon(1e-12));
  CHECK(geometric_loading_efficiency(2.0, 1.0, 5e-6, 10e-6) == 0.0);
  CHECK(geometric_loading_efficiency(1.0, 1.0, 5e-6, 10e-6) == 0.0);
  CHECK(geometric_loading_efficiency(0.0, 1.0, 5e-6, 10e-6) == 1.0);
  // a tighter cloud loads better
  CHECK(geometric_loading_efficiency(0.1, 1.0, 5e-6, 5e-6) >
        geometric_loading_efficiency(0.1, 1.0, 5e-6, 10e-6));
  CHECK_THROWS(geometric_loading_efficiency(0.1, -1.0, 5e-6, 10e-6));

  // sampled cross-check: transverse positions with density exp(-r^2/r0^2),
  // captured when U0 exp(-r^2/w0^2) exceeds the kinetic energy
  std::mt19937_64 eng(7);
  std::normal_distribution<double> gauss(0.0, 10e-6 / std::sqrt(2.0));
  const double ratio = 125e-6 / 16e-3;
  int captured = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = gauss(eng), y = gauss(eng);
    if (std::exp(-(x * x + y * y) / 25e-12) > ratio) ++captured;
  }
  CHECK(static_cast<double>(captured) / n == doctest::Approx(kLoading).epsilon(0.01));
}

TEST_CASE("intensity averaging factor against quadrature") {
  const TrapModel t = unit_trap();
  CHECK(intensity_averaging_factor(0.0, t) == 1.0);
  CHECK(intensity_averaging_factor(0.5, t) == doctest::Approx(kFactor05).epsilon(1e-9));
  CHECK(intensity_averaging_factor(1.0, t) == doctest::Approx(kFactor10).epsilon(1e-9));
  CHECK(intensity_averaging_factor(1.2, t) == doctest::Approx(kFactor12).epsilon(1e-9));
  CHECK(intensity_averaging_factor(1.5, t) == doctest::Approx(kFactor15).epsilon(1e-9));
  CHECK(intensity_averaging_factor(1.8, t) == doctest::Approx(kFactor18).epsilon(1e-9));

  // harmonic limit: <exp(-2 A^2 sin^2)> -> 1 - A^2 for small A (w0 = 1)
  CHECK(intensity_averaging_factor(1e-3, t) == doctest::Approx(1.0 - 1e-6).epsilon(1e-10));

  // scales with the waist only through A / w0
  TrapModel wide = t;
  wide.waist = 5e-6;
  CHECK(intensity_averaging_factor(7.5e-6, wide) == doctest::Approx(kFactor15).epsilon(1e-9));

  double prev = 1.0;
  for (double a = 0.1; a < 3.0; a += 0.1) {
    const double f = intensity_averaging_factor(a, t);
    CHECK(f < prev);
    prev = f;
  }
  CHECK_THROWS(intensity_averaging_factor(-1.0, t));
  CHECK_THROWS(intensity_averaging_factor(1.0, t, 3));
}

TEST_CASE("amplitude for a given averaging factor") {
  const TrapModel t = unit_trap();
  CHECK(amplitude_for_factor(0.125, t) == doctest::Approx(kAmplitudeEighth).epsilon(1e-9));
  CHECK(amplitude_for_factor(1.0, t) == 0.0);
  for (double f : {0.9, 0.5, 0.2, 0.05}) {
    CHECK(intensity_averaging_factor(amplitude_for_factor(f, t), t) == doctest::Approx(f).epsilon(1e-9));
  }
  CHECK_THROWS_AS(amplitude_for_factor(0.0, t), std::domain_error);
  CHECK_THROWS_AS(amplitude_for_factor(1e-300, t), std::domain_error);
}

TEST_CASE("Raman relaxation rates") {
  TrapModel t;
  t.peak_scattering_rate = 190.0;
  const auto r = effective_relaxation_rates(t);
  CHECK(r.lambda_total == doctest::Approx(190.0 / 8.0 / 90.0).epsilon(1e-14));
  CHECK(r.r_4to3 == doctest::Approx(r.lambda_total * 7.0 / 16.0).epsilon(1e-14));
  CHECK(r.r_3to4 == doctest::Approx(r.lambda_total * 9.0 / 16.0).epsilon(1e-14));
  CHECK(r.p4_equilibrium == doctest::Approx(0.5625).epsilon(1e-14));
  CHECK(r.r_4to3 + r.r_3to4 == doctest::Approx(r.lambda_total).epsilon(1e-14));

  t.raman_suppression = 0.5;
  CHECK_THROWS(effective_relaxation_rates(t));
}
