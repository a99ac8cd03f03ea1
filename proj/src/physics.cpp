#include "fewatom/physics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fewatom {

using namespace constants;

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

// Oscillator strengths of the two lines in the ground-state polarizability.
constexpr double kD2Weight = 2.0 / 3.0;
constexpr double kD1Weight = 1.0 / 3.0;

struct LineTerm {
  double weight;
  double omega0;
};

void require_red_detuned(const GaussianBeam& beam, const AtomParams& atom) {
  const double omega = beam.angular_frequency();
  if (!(omega < atom.d1_angular_frequency() && omega < atom.d2_angular_frequency())) {
    throw std::domain_error("two-line dipole model requires a beam red-detuned from both D lines");
  }
}

// Rotating plus counter-rotating detuning denominators, times Gamma.
double amplitude(double gamma, double omega0, double omega) {
  return gamma / (omega0 - omega) + gamma / (omega0 + omega);
}

} // namespace

AtomParams AtomParams::from_linewidth(double linewidth_gamma, double wavelength_d2,
                                      double wavelength_d1, double mass) {
  AtomParams atom;
  atom.linewidth_gamma = linewidth_gamma;
  atom.wavelength_d2 = wavelength_d2;
  atom.wavelength_d1 = wavelength_d1;
  atom.mass = mass;
  atom.doppler_temperature = hbar * linewidth_gamma / (2.0 * boltzmann);
  atom.validate();
  return atom;
}

AtomParams AtomParams::cesium() {
  return from_linewidth(2.0 * pi * 5.2e6, 852e-9, 894.6e-9, cesium_mass);
}

double AtomParams::d2_angular_frequency() const {
  return 2.0 * pi * speed_of_light / wavelength_d2;
}

double AtomParams::d1_angular_frequency() const {
  return 2.0 * pi * speed_of_light / wavelength_d1;
}

void AtomParams::validate() const {
  require(linewidth_gamma > 0.0, "linewidth_gamma must be positive");
  require(wavelength_d2 > 0.0, "wavelength_d2 must be positive");
  require(wavelength_d1 > wavelength_d2, "wavelength_d1 must exceed wavelength_d2");
  require(mass > 0.0, "mass must be positive");
  require(doppler_temperature > 0.0, "doppler_temperature must be positive");
}

double GaussianBeam::peak_intensity() const {
  return 2.0 * power / (pi * waist * waist);
}

double GaussianBeam::rayleigh_range() const {
  return pi * waist * waist / wavelength;
}

double GaussianBeam::radius_at(double z) const {
  const double zr = z / rayleigh_range();
  return waist * std::sqrt(1.0 + zr * zr);
}

double GaussianBeam::angular_frequency() const {
  return 2.0 * pi * speed_of_light / wavelength;
}

void GaussianBeam::validate() const {
  require(power >= 0.0 && std::isfinite(power), "beam power must be non-negative");
  require(waist > 0.0 && std::isfinite(waist), "beam waist must be positive");
  require(wavelength > 0.0 && std::isfinite(wavelength), "beam wavelength must be positive");
}

double TrapModel::depth_temperature() const { return depth_u0 / boltzmann; }

void TrapModel::validate() const {
  require(depth_u0 > 0.0, "trap depth must be positive");
  require(waist > 0.0, "trap waist must be positive");
  require(peak_scattering_rate >= 0.0, "peak scattering rate must be non-negative");
  require(raman_suppression >= 1.0, "raman suppression must be at least 1");
  require(intensity_averaging_factor > 0.0 && intensity_averaging_factor <= 1.0,
          "intensity averaging factor must lie in (0, 1]");
}

MotCloud MotCloud::doppler_limited(const AtomParams& atom, double radius_r0) {
  MotCloud cloud;
  cloud.radius_r0 = radius_r0;
  cloud.temperature = atom.doppler_temperature;
  cloud.validate();
  return cloud;
}

double MotCloud::kinetic_energy() const { return boltzmann * temperature; }

void MotCloud::validate() const {
  require(radius_r0 >= 1e-6 && radius_r0 <= 100e-6, "MOT radius must lie in [1 um, 100 um]");
  require(temperature >= 0.0, "MOT temperature must be non-negative");
}

double beam_intensity(const GaussianBeam& beam, double r, double z) {
  const double w = beam.radius_at(z);
  const double ratio = beam.waist / w;
  return beam.peak_intensity() * ratio * ratio * std::exp(-2.0 * r * r / (w * w));
}

double trap_depth(const GaussianBeam& beam, const AtomParams& atom) {
  beam.validate();
  require_red_detuned(beam, atom);
  const double omega = beam.angular_frequency();
  const double intensity = beam.peak_intensity();
  const LineTerm lines[] = {{kD2Weight, atom.d2_angular_frequency()},
                            {kD1Weight, atom.d1_angular_frequency()}};
  double depth = 0.0;
  for (const auto& line : lines) {
    const double w3 = line.omega0 * line.omega0 * line.omega0;
    depth += line.weight * 3.0 * pi * speed_of_light * speed_of_light / (2.0 * w3) *
             amplitude(atom.linewidth_gamma, line.omega0, omega);
  }
  return depth * intensity;
}

double peak_scattering_rate(const GaussianBeam& beam, const AtomParams& atom) {
  beam.validate();
  require_red_detuned(beam, atom);
  const double omega = beam.angular_frequency();
  const double intensity = beam.peak_intensity();
  const LineTerm lines[] = {{kD2Weight, atom.d2_angular_frequency()},
                            {kD1Weight, atom.d1_angular_frequency()}};
  double rate = 0.0;
  for (const auto& line : lines) {
    const double w3 = line.omega0 * line.omega0 * line.omega0;
    const double a = amplitude(atom.linewidth_gamma, line.omega0, omega);
    rate += line.weight * 3.0 * pi * speed_of_light * speed_of_light / (2.0 * hbar * w3) * a * a;
  }
  return rate * intensity;
}

TrapModel make_trap(const GaussianBeam& beam, const AtomParams& atom, double raman_suppression,
                    double intensity_averaging_factor) {
  TrapModel trap;
  trap.depth_u0 = trap_depth(beam, atom);
  trap.waist = beam.waist;
  trap.peak_scattering_rate = peak_scattering_rate(beam, atom);
  trap.raman_suppression = raman_suppression;
  trap.intensity_averaging_factor = intensity_averaging_factor;
  trap.validate();
  return trap;
}

FluorescenceBudget fluorescence_budget(const AtomParams& atom, double overall_efficiency) {
  require(overall_efficiency >= 0.0 && overall_efficiency <= 1.0,
          "overall efficiency must lie in [0, 1]");
  const double half_gamma = atom.linewidth_gamma / 2.0;
  return {hbar * atom.d2_angular_frequency() * half_gamma, half_gamma * overall_efficiency};
}

double geometric_loading_efficiency(double e_kin, double u0, double w0, double r0) {
  require(u0 > 0.0, "u0 must be positive");
  require(w0 > 0.0, "w0 must be positive");
  require(r0 > 0.0, "r0 must be positive");
  require(e_kin >= 0.0, "e_kin must be non-negative");
  if (e_kin >= u0) return 0.0;
  return 1.0 - std::pow(e_kin / u0, (w0 * w0) / (r0 * r0));
}

double intensity_averaging_factor(double amplitude, const TrapModel& trap, int intervals) {
  require(std::isfinite(amplitude) && amplitude >= 0.0, "amplitude must be finite and non-negative");
  require(trap.waist > 0.0, "trap waist must be positive");
  require(intervals >= 2 && intervals % 2 == 0, "Simpson rule needs an even panel count");
  if (amplitude == 0.0) return 1.0;

  // With r = A sin(theta), dt ~ cos(theta) / sqrt(g(r) - g(A)) dtheta and
  // g(r) - g(A) = g(A) expm1(k cos^2 theta), k = 2 A^2 / w0^2.  The common
  // g(A)^(-1/2) cancels in the ratio.
  const double k = 2.0 * amplitude * amplitude / (trap.waist * trap.waist);
  const double inv_sqrt_k = 1.0 / std::sqrt(k);
  auto dwell = [&](double theta) {
    const double c = std::cos(theta);
    if (c <= 0.0) return inv_sqrt_k;
    const double x = k * c * c;
    const double em1 = std::expm1(x);
    return std::isfinite(em1) ? c / std::sqrt(em1) : 0.0;
  };

  const double h = (pi / 2.0) / intervals;
  double weight_sum = 0.0;
  double intensity_sum = 0.0;
  for (int i = 0; i <= intervals; ++i) {
    const double theta = i * h;
    const double simpson = (i == 0 || i == intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    const double s = std::sin(theta);
    const double w = simpson * dwell(theta);
    weight_sum += w;
    intensity_sum += w * std::exp(-k * s * s);
  }
  const double factor = intensity_sum / weight_sum;
  if (!(weight_sum > 0.0) || !std::isfinite(factor) || !(factor > 0.0)) {
    throw std::domain_error("oscillation amplitude escapes the Gaussian potential numerically");
  }
  return std::min(factor, 1.0);
}

double amplitude_for_factor(double target, const TrapModel& trap) {
  if (!(target > 0.0 && target <= 1.0)) {
    throw std::domain_error("target averaging factor must lie in (0, 1]");
  }
  if (target == 1.0) return 0.0;

  double lo = 0.0;
  double hi = trap.waist;
  // Bracket; the factor falls off like w0/A times exp(-2A^2/w0^2) asymptotically.
  while (intensity_averaging_factor(hi, trap) > target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 16.0 * trap.waist) {
      throw std::domain_error("target averaging factor is below the achievable range");
    }
  }
  for (int it = 0; it < 200 && (hi - lo) > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (intensity_averaging_factor(mid, trap) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

RelaxationRates effective_relaxation_rates(const TrapModel& trap) {
  require(trap.peak_scattering_rate >= 0.0, "peak scattering rate must be non-negative");
  require(trap.raman_suppression >= 1.0, "raman suppression must be at least 1");
  require(trap.intensity_averaging_factor > 0.0 && trap.intensity_averaging_factor <= 1.0,
          "intensity averaging factor must lie in (0, 1]");
  RelaxationRates rates;
  rates.lambda_total =
      trap.peak_scattering_rate * trap.intensity_averaging_factor / trap.raman_suppression;
  // 2F'+1 weights: F'=3 -> 7, F'=4 -> 9.
  rates.r_4to3 = 7.0 / 16.0 * rates.lambda_total;
  rates.r_3to4 = 9.0 / 16.0 * rates.lambda_total;
  rates.p4_equilibrium = 9.0 / 16.0;
  return rates;
}

} // namespace fewatom
