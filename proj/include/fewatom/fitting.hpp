#ifndef FEWATOM_FITTING_HPP
#define FEWATOM_FITTING_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fewatom/kinetics.hpp"
#include "fewatom/rng.hpp"

namespace fewatom {

/// Raised when a likelihood fit has no interior optimum or fails to converge.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitResult {
  std::string model;
  std::vector<std::string> names;
  Eigen::VectorXd values;
  Eigen::VectorXd errors;
  Eigen::MatrixXd covariance;
  double log_likelihood = 0.0;
  std::size_t n_points = 0;

  double value(std::string_view name) const;
  double error(std::string_view name) const;
};

struct SurvivalPoint {
  double t_hold = 0.0;
  std::int64_t survived = 0;
  std::int64_t total = 0;
};

struct RelaxationPoint {
  double t = 0.0;
  double p4_hat = 0.0;
  std::int64_t n_atoms = 0;
};

/// Binomial maximum likelihood for p(t) = a exp(-t / tau).  With
/// `offset_free` false the amplitude is fixed to one and only "tau" is
/// fitted; otherwise parameters are ("tau", "a") with a in (0, 1].
/// Standard errors come from the observed information matrix.
FitResult fit_exponential_survival(std::span<const SurvivalPoint> points, bool offset_free);

/// Binomial maximum likelihood for P4(t) = eq + (p0 - eq) exp(-t / tau),
/// parameters ("tau", "p4_eq", "p4_0").  `initial` only seeds the starting
/// point; both preparations are fitted with the same free model.
FitResult fit_relaxation(std::span<const RelaxationPoint> points, Hyperfine initial);

/// Log-likelihoods at explicit parameter vectors, in the fitters' ordering.
double survival_log_likelihood(std::span<const SurvivalPoint> points,
                               const Eigen::VectorXd& params, bool offset_free);
double relaxation_log_likelihood(std::span<const RelaxationPoint> points,
                                 const Eigen::VectorXd& params);

/// Parametric bootstrap of the standard errors: resample binomial counts from
/// the fitted model `resamples` times and refit.  Failed refits are skipped.
Eigen::VectorXd bootstrap_errors(std::span<const SurvivalPoint> points, const FitResult& fit,
                                 bool offset_free, Rng& rng, int resamples = 200);
Eigen::VectorXd bootstrap_errors(std::span<const RelaxationPoint> points, const FitResult& fit,
                                 Hyperfine initial, Rng& rng, int resamples = 200);

} // namespace fewatom

#endif // FEWATOM_FITTING_HPP
