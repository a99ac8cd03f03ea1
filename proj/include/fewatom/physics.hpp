#ifndef FEWATOM_PHYSICS_HPP
#define FEWATOM_PHYSICS_HPP

#include <array>

namespace fewatom {

namespace constants {
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double speed_of_light = 299792458.0;      // m/s
inline constexpr double hbar = 1.054571817e-34;            // J s
inline constexpr double boltzmann = 1.380649e-23;          // J/K
inline constexpr double cesium_mass = 2.20694650e-25;      // kg
} // namespace constants

/// Atomic constants of the alkali D-line system used by the trap calculators.
struct AtomParams {
  double linewidth_gamma = 0.0;   // rad/s
  double wavelength_d2 = 0.0;     // m
  double wavelength_d1 = 0.0;     // m
  double mass = 0.0;              // kg
  double doppler_temperature = 0.0; // K
  std::array<int, 2> ground_states{3, 4};

  /// Builds the record and derives the Doppler temperature hbar*Gamma/(2 k_B).
  static AtomParams from_linewidth(double linewidth_gamma, double wavelength_d2,
                                   double wavelength_d1, double mass);
  /// Cesium: Gamma = 2pi x 5.2 MHz, D2 852 nm, D1 894.6 nm.
  static AtomParams cesium();

  double d2_angular_frequency() const;
  double d1_angular_frequency() const;
  void validate() const;
};

/// Focused Gaussian beam; waist is the 1/e^2 intensity radius.
struct GaussianBeam {
  double power = 0.0;      // W
  double waist = 0.0;      // m
  double wavelength = 0.0; // m

  double peak_intensity() const;
  double rayleigh_range() const;
  double radius_at(double z) const;
  double angular_frequency() const;
  void validate() const;

  bool operator==(const GaussianBeam&) const = default;
};

struct TrapModel {
  double depth_u0 = 0.0;              // J
  double waist = 0.0;                 // m
  double peak_scattering_rate = 0.0;  // 1/s
  double raman_suppression = 90.0;
  double intensity_averaging_factor = 0.125;

  double depth_temperature() const; // U0/k_B in kelvin
  void validate() const;
};

/// MOT cloud seen by the dipole trap during loading.
struct MotCloud {
  double radius_r0 = 10e-6; // m, 1/e radius of the fluorescence profile
  double temperature = 0.0; // K
  double field_gradient = 375.0; // G/cm, metadata only

  static MotCloud doppler_limited(const AtomParams& atom, double radius_r0 = 10e-6);
  double kinetic_energy() const;
  void validate() const;
};

double beam_intensity(const GaussianBeam& beam, double r, double z);

/// Ground-state light shift at the focus from the D1/D2 two-line model,
/// returned as a positive trap depth in joules.  Throws std::domain_error if
/// the beam is not red-detuned from both lines.
double trap_depth(const GaussianBeam& beam, const AtomParams& atom);

/// Total photon scattering rate at the focus, same two-line model.
double peak_scattering_rate(const GaussianBeam& beam, const AtomParams& atom);

TrapModel make_trap(const GaussianBeam& beam, const AtomParams& atom,
                    double raman_suppression = 90.0,
                    double intensity_averaging_factor = 0.125);

struct FluorescenceBudget {
  double emitted_power = 0.0; // W
  double detected_rate = 0.0; // 1/s
};

/// Strong-drive fluorescence: emitted power hbar*omega*Gamma/2, detected rate
/// Gamma/2 times the overall efficiency.
FluorescenceBudget fluorescence_budget(const AtomParams& atom, double overall_efficiency);

/// P = 1 - (E_kin/U0)^(w0^2/r0^2), zero once E_kin reaches U0.
double geometric_loading_efficiency(double e_kin, double u0, double w0, double r0);

/// Time average of I/I0 along a radial oscillation of turning point
/// `amplitude` in the Gaussian potential -U0 exp(-2 r^2/w0^2).
///
/// The half period is parametrised as r = A sin(theta), which removes the
/// inverse-square-root singularity at the turning point; the remaining smooth
/// integrand is integrated with composite Simpson on `intervals` panels.
double intensity_averaging_factor(double amplitude, const TrapModel& trap,
                                  int intervals = 4096);

/// Inverse of intensity_averaging_factor in the amplitude, by bisection.
double amplitude_for_factor(double target, const TrapModel& trap);

struct RelaxationRates {
  double lambda_total = 0.0;
  double r_4to3 = 0.0;
  double r_3to4 = 0.0;
  double p4_equilibrium = 0.0;
};

/// Raman relaxation between F=3 and F=4.  The hyperfine-changing rate into F'
/// is weighted by 2F'+1, so 4->3 carries 7/16 and 3->4 carries 9/16 of the total.
RelaxationRates effective_relaxation_rates(const TrapModel& trap);

} // namespace fewatom

#endif // FEWATOM_PHYSICS_HPP
