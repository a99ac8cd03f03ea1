#include "fewatom/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <tuple>

namespace fewatom {

double FitResult::value(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return values[static_cast<Eigen::Index>(i)];
  }
  throw std::out_of_range("no fit parameter named '" + std::string(name) + "'");
}

double FitResult::error(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return errors[static_cast<Eigen::Index>(i)];
  }
  throw std::out_of_range("no fit parameter named '" + std::string(name) + "'");
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// One binomial observation with a possibly non-integer success count.
struct Observation {
  double t;
  double k;
  double n;
};

// p(t; theta) with its gradient and Hessian in theta.
using ProbabilityModel =
    std::function<void(double t, const VectorXd& theta, double& p, VectorXd& dp, MatrixXd& d2p)>;

struct Objective {
  std::vector<Observation> obs;
  ProbabilityModel model;
  Eigen::Index dim;

  double loglik(const VectorXd& theta) const {
    double ll = 0.0;
    VectorXd dp(dim);
    MatrixXd d2p(dim, dim);
    for (const auto& o : obs) {
      double p;
      model(o.t, theta, p, dp, d2p);
      ll += std::lgamma(o.n + 1.0) - std::lgamma(o.k + 1.0) - std::lgamma(o.n - o.k + 1.0);
      if (o.k > 0.0) {
        if (!(p > 0.0)) return -std::numeric_limits<double>::infinity();
        ll += o.k * std::log(p);
      }
      if (o.n - o.k > 0.0) {
        if (!(p < 1.0)) return -std::numeric_limits<double>::infinity();
        ll += (o.n - o.k) * std::log1p(-p);
      }
    }
    return ll;
  }

  void derivatives(const VectorXd& theta, VectorXd& grad, MatrixXd& hess) const {
    grad.setZero(dim);
    hess.setZero(dim, dim);
    VectorXd dp(dim);
    MatrixXd d2p(dim, dim);
    for (const auto& o : obs) {
      double p;
      model(o.t, theta, p, dp, d2p);
      const double fail = o.n - o.k;
      double w1 = 0.0;
      double w2 = 0.0;
      if (o.k > 0.0) {
        w1 += o.k / p;
        w2 += o.k / (p * p);
      }
      if (fail > 0.0) {
        w1 -= fail / (1.0 - p);
        w2 += fail / ((1.0 - p) * (1.0 - p));
      }
      grad += w1 * dp;
      hess += -w2 * dp * dp.transpose() + w1 * d2p;
    }
  }
};

struct Bounds {
  VectorXd lower;
  VectorXd upper;
};

struct Optimum {
  VectorXd theta;
  double loglik;
  std::vector<bool> at_bound;
  MatrixXd information; // -Hessian
};

// Bound-constrained damped Newton (Levenberg-Marquardt on the Hessian).
// Parameters sitting on a bound with the gradient pointing outward are held
// fixed for the step.
Optimum maximize(const Objective& f, VectorXd theta, const Bounds& bounds) {
  const Eigen::Index dim = f.dim;
  theta = theta.cwiseMax(bounds.lower).cwiseMin(bounds.upper);
  double ll = f.loglik(theta);
  if (!std::isfinite(ll)) throw FitError("no convergence: starting point has zero likelihood");

  VectorXd grad(dim);
  MatrixXd hess(dim, dim);
  std::vector<bool> fixed(static_cast<std::size_t>(dim), false);
  double mu = 1e-3;
  bool converged = false;

  for (int iter = 0; iter < 500; ++iter) {
    f.derivatives(theta, grad, hess);
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < dim; ++i) {
      const bool pinned = (theta[i] <= bounds.lower[i] && grad[i] < 0.0) ||
                          (theta[i] >= bounds.upper[i] && grad[i] > 0.0);
      fixed[static_cast<std::size_t>(i)] = pinned;
      if (!pinned) free.push_back(i);
    }
    if (free.empty()) {
      converged = true;
      break;
    }
    const auto m = static_cast<Eigen::Index>(free.size());
    VectorXd g(m);
    MatrixXd info(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      g[a] = grad[free[a]];
      for (Eigen::Index b = 0; b < m; ++b) info(a, b) = -hess(free[a], free[b]);
    }
    if (g.norm() < 1e-9) {
      converged = true;
      break;
    }

    VectorXd diag = info.diagonal().cwiseAbs().cwiseMax(1e-300);
    bool stepped = false;
    for (int tries = 0; tries < 80; ++tries) {
      MatrixXd damped = info;
      damped.diagonal() += mu * diag;
      Eigen::LDLT<MatrixXd> ldlt(damped);
      VectorXd delta = ldlt.solve(g);
      if (ldlt.info() != Eigen::Success || !delta.allFinite() ||
          (ldlt.vectorD().array() <= 0.0).any()) {
        mu = std::max(mu * 10.0, 1e-12);
        continue;
      }
      VectorXd candidate = theta;
      for (Eigen::Index a = 0; a < m; ++a) candidate[free[a]] += delta[a];
      candidate = candidate.cwiseMax(bounds.lower).cwiseMin(bounds.upper);
      const double ll_c = f.loglik(candidate);
      if (std::isfinite(ll_c) && ll_c >= ll) {
        const double step = (candidate - theta).norm();
        theta = candidate;
        ll = ll_c;
        mu = std::max(mu * 0.1, 1e-15);
        stepped = true;
        if (step <= 1e-15 * (1.0 + theta.norm())) converged = true;
        break;
      }
      mu = std::max(mu * 10.0, 1e-12);
    }
    if (!stepped || converged) break;
  }

  f.derivatives(theta, grad, hess);
  double free_grad = 0.0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (!fixed[static_cast<std::size_t>(i)]) free_grad += grad[i] * grad[i];
  }
  if (!converged && std::sqrt(free_grad) > 1e-6) {
    throw FitError("no convergence: likelihood maximisation stalled");
  }
  return {theta, ll, fixed, -hess};
}

// Covariance from the observed information on the free parameters; fixed
// parameters get zero variance.
MatrixXd covariance_from(const Optimum& opt) {
  const Eigen::Index dim = opt.theta.size();
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (!opt.at_bound[static_cast<std::size_t>(i)]) free.push_back(i);
  }
  MatrixXd cov = MatrixXd::Zero(dim, dim);
  if (free.empty()) return cov;
  const auto m = static_cast<Eigen::Index>(free.size());
  MatrixXd info(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) info(a, b) = opt.information(free[a], free[b]);
  }
  Eigen::LLT<MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) {
    throw FitError("no convergence: observed information is not positive definite");
  }
  const MatrixXd inv = llt.solve(MatrixXd::Identity(m, m));
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) cov(free[a], free[b]) = 0.5 * (inv(a, b) + inv(b, a));
  }
  return cov;
}

FitResult make_result(std::string model, std::vector<std::string> names, const Optimum& opt,
                      std::size_t n_points) {
  FitResult out;
  out.model = std::move(model);
  out.names = std::move(names);
  out.values = opt.theta;
  out.covariance = covariance_from(opt);
  out.errors = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  out.log_likelihood = opt.loglik;
  out.n_points = n_points;
  return out;
}

void survival_model(bool offset_free, double t, const VectorXd& theta, double& p, VectorXd& dp,
                    MatrixXd& d2p) {
  const double tau = theta[0];
  const double e = std::exp(-t / tau);
  const double d1 = t / (tau * tau);                       // d(-t/tau)/dtau
  const double d2 = t * t / std::pow(tau, 4) - 2.0 * t / std::pow(tau, 3);
  const double a = offset_free ? theta[1] : 1.0;
  p = a * e;
  dp[0] = a * e * d1;
  d2p(0, 0) = a * e * d2;
  if (offset_free) {
    dp[1] = e;
    d2p(0, 1) = d2p(1, 0) = e * d1;
    d2p(1, 1) = 0.0;
  }
}

void relaxation_model(double t, const VectorXd& theta, double& p, VectorXd& dp, MatrixXd& d2p) {
  const double tau = theta[0];
  const double eq = theta[1];
  const double p0 = theta[2];
  const double e = std::exp(-t / tau);
  const double d1 = t / (tau * tau);
  const double d2 = t * t / std::pow(tau, 4) - 2.0 * t / std::pow(tau, 3);
  p = eq + (p0 - eq) * e;
  dp << (p0 - eq) * e * d1, 1.0 - e, e;
  d2p.setZero();
  d2p(0, 0) = (p0 - eq) * e * d2;
  d2p(0, 1) = d2p(1, 0) = -e * d1;
  d2p(0, 2) = d2p(2, 0) = e * d1;
}

std::vector<Observation> survival_observations(std::span<const SurvivalPoint> points) {
  std::vector<Observation> obs;
  for (const auto& pt : points) {
    if (!(pt.total > 0)) throw std::invalid_argument("survival totals must be positive");
    if (pt.survived < 0 || pt.survived > pt.total) {
      throw std::invalid_argument("survived must lie in [0, total]");
    }
    if (!(pt.t_hold >= 0.0) || !std::isfinite(pt.t_hold)) {
      throw std::invalid_argument("hold times must be finite and non-negative");
    }
    obs.push_back({pt.t_hold, static_cast<double>(pt.survived), static_cast<double>(pt.total)});
  }
  // Canonical order makes every floating-point sum independent of input order.
  std::sort(obs.begin(), obs.end(), [](const Observation& x, const Observation& y) {
    return std::tie(x.t, x.k, x.n) < std::tie(y.t, y.k, y.n);
  });
  return obs;
}

std::vector<Observation> relaxation_observations(std::span<const RelaxationPoint> points) {
  std::vector<Observation> obs;
  for (const auto& pt : points) {
    if (!(pt.n_atoms > 0)) throw std::invalid_argument("relaxation atom counts must be positive");
    if (!(pt.p4_hat >= 0.0 && pt.p4_hat <= 1.0)) {
      throw std::invalid_argument("p4 estimates must lie in [0, 1]");
    }
    if (!(pt.t >= 0.0) || !std::isfinite(pt.t)) {
      throw std::invalid_argument("times must be finite and non-negative");
    }
    const double n = static_cast<double>(pt.n_atoms);
    obs.push_back({pt.t, pt.p4_hat * n, n});
  }
  std::sort(obs.begin(), obs.end(), [](const Observation& x, const Observation& y) {
    return std::tie(x.t, x.k, x.n) < std::tie(y.t, y.k, y.n);
  });
  return obs;
}

std::size_t distinct_times(const std::vector<Observation>& obs) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (i == 0 || obs[i].t != obs[i - 1].t) ++count;
  }
  return count;
}

double time_scale(const std::vector<Observation>& obs) {
  double top = 0.0;
  for (const auto& o : obs) top = std::max(top, o.t);
  return top > 0.0 ? top : 1.0;
}

Objective survival_objective(std::vector<Observation> obs, bool offset_free) {
  return {std::move(obs),
          [offset_free](double t, const VectorXd& th, double& p, VectorXd& dp, MatrixXd& d2p) {
            survival_model(offset_free, t, th, p, dp, d2p);
          },
          offset_free ? 2 : 1};
}

Objective relaxation_objective(std::vector<Observation> obs) {
  return {std::move(obs), relaxation_model, 3};
}

} // namespace

double survival_log_likelihood(std::span<const SurvivalPoint> points, const Eigen::VectorXd& params,
                               bool offset_free) {
  return survival_objective(survival_observations(points), offset_free).loglik(params);
}

double relaxation_log_likelihood(std::span<const RelaxationPoint> points,
                                 const Eigen::VectorXd& params) {
  return relaxation_objective(relaxation_observations(points)).loglik(params);
}

FitResult fit_exponential_survival(std::span<const SurvivalPoint> points, bool offset_free) {
  auto obs = survival_observations(points);
  if (distinct_times(obs) < 2) throw std::invalid_argument("survival fit needs at least two distinct hold times");
  const bool all_survived = std::all_of(obs.begin(), obs.end(), [](const Observation& o) { return o.k == o.n; });
  const bool all_lost = std::all_of(obs.begin(), obs.end(), [](const Observation& o) { return o.k == 0.0; });
  if (all_survived) throw FitError("no convergence: every atom survived, the lifetime is unbounded");
  if (all_lost) throw FitError("no convergence: every atom was lost, the lifetime is zero");

  const double scale = time_scale(obs);

  // Weighted log-linear regression for the starting point.
  double sw = 0, st = 0, sy = 0, stt = 0, sty = 0;
  for (const auto& o : obs) {
    const double f = o.k / o.n;
    if (f <= 0.0 || f >= 1.0) continue;
    const double w = o.n * f / (1.0 - f);
    const double y = std::log(f);
    sw += w;
    st += w * o.t;
    sy += w * y;
    stt += w * o.t * o.t;
    sty += w * o.t * y;
  }
  double tau0 = scale;
  double a0 = 0.9;
  if (offset_free) {
    const double det = sw * stt - st * st;
    if (sw > 0.0 && det > 0.0) {
      const double slope = (sw * sty - st * sy) / det;
      const double icpt = (sy - slope * st) / sw;
      if (slope < 0.0) tau0 = -1.0 / slope;
      a0 = std::clamp(std::exp(icpt), 0.05, 0.999);
    }
  } else if (sty < 0.0) {
    tau0 = -stt / sty;
  }

  const Objective objective = survival_objective(obs, offset_free);
  VectorXd start(objective.dim);
  Bounds bounds{VectorXd(objective.dim), VectorXd(objective.dim)};
  start[0] = std::clamp(tau0, 1e-3 * scale, 1e3 * scale);
  bounds.lower[0] = 1e-6 * scale;
  bounds.upper[0] = 1e6 * scale;
  if (offset_free) {
    start[1] = a0;
    bounds.lower[1] = 1e-9;
    bounds.upper[1] = 1.0;
  }
  const Optimum opt = maximize(objective, start, bounds);
  if (opt.theta[0] >= bounds.upper[0] || opt.theta[0] <= bounds.lower[0]) {
    throw FitError("no convergence: lifetime runs to the edge of the search range");
  }
  std::vector<std::string> names{"tau"};
  if (offset_free) names.emplace_back("a");
  return make_result(offset_free ? "survival_offset" : "survival", std::move(names), opt, obs.size());
}

FitResult fit_relaxation(std::span<const RelaxationPoint> points, Hyperfine initial) {
  auto obs = relaxation_observations(points);
  if (distinct_times(obs) < 3) throw std::invalid_argument("relaxation fit needs at least three time points");
  const double scale = time_scale(obs);

  const double first = obs.front().k / obs.front().n;
  double tail = 0.0, tail_n = 0.0;
  const std::size_t from = obs.size() - std::max<std::size_t>(1, obs.size() / 3);
  for (std::size_t i = from; i < obs.size(); ++i) {
    tail += obs[i].k;
    tail_n += obs[i].n;
  }
  const double fallback0 = (initial == Hyperfine::F4) ? 0.99 : 0.01;
  double p0 = std::clamp(obs.front().t == 0.0 ? first : fallback0, 1e-3, 1.0 - 1e-3);
  double eq = std::clamp(tail / tail_n, 0.01, 0.99);
  if (std::abs(p0 - eq) < 0.05) p0 = fallback0;

  const Objective objective = relaxation_objective(obs);
  Bounds bounds{VectorXd(3), VectorXd(3)};
  bounds.lower << 1e-6 * scale, 0.0, 0.0;
  bounds.upper << 1e6 * scale, 1.0, 1.0;

  // Coarse log grid in tau with the probabilities held at their seeds.
  VectorXd start(3);
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 60; ++i) {
    const double tau = scale * std::pow(10.0, -2.0 + 3.0 * i / 60.0);
    VectorXd trial(3);
    trial << tau, eq, p0;
    const double ll = objective.loglik(trial);
    if (ll > best) {
      best = ll;
      start = trial;
    }
  }
  if (!std::isfinite(best)) throw FitError("no convergence: no starting point with finite likelihood");

  const Optimum opt = maximize(objective, start, bounds);
  if (opt.theta[0] >= bounds.upper[0] || opt.theta[0] <= bounds.lower[0]) {
    throw FitError("no convergence: relaxation time runs to the edge of the search range");
  }
  return make_result("relaxation", {"tau", "p4_eq", "p4_0"}, opt, obs.size());
}

namespace {

Eigen::VectorXd spread(const std::vector<VectorXd>& samples, Eigen::Index dim) {
  VectorXd sd = VectorXd::Zero(dim);
  if (samples.size() < 2) return sd;
  VectorXd mean = VectorXd::Zero(dim);
  for (const auto& s : samples) mean += s;
  mean /= static_cast<double>(samples.size());
  for (const auto& s : samples) sd += (s - mean).cwiseAbs2();
  return (sd / static_cast<double>(samples.size() - 1)).cwiseSqrt();
}

} // namespace

Eigen::VectorXd bootstrap_errors(std::span<const SurvivalPoint> points, const FitResult& fit,
                                 bool offset_free, Rng& rng, int resamples) {
  std::vector<VectorXd> samples;
  const double a = offset_free ? fit.value("a") : 1.0;
  const double tau = fit.value("tau");
  std::vector<SurvivalPoint> fake(points.begin(), points.end());
  for (int r = 0; r < resamples; ++r) {
    for (auto& pt : fake) pt.survived = rng.binomial(pt.total, a * std::exp(-pt.t_hold / tau));
    try {
      samples.push_back(fit_exponential_survival(fake, offset_free).values);
    } catch (const FitError&) {
    }
  }
  return spread(samples, fit.values.size());
}

Eigen::VectorXd bootstrap_errors(std::span<const RelaxationPoint> points, const FitResult& fit,
                                 Hyperfine initial, Rng& rng, int resamples) {
  std::vector<VectorXd> samples;
  const double tau = fit.value("tau");
  const double eq = fit.value("p4_eq");
  const double p0 = fit.value("p4_0");
  std::vector<RelaxationPoint> fake(points.begin(), points.end());
  for (int r = 0; r < resamples; ++r) {
    for (auto& pt : fake) {
      const double p = eq + (p0 - eq) * std::exp(-pt.t / tau);
      pt.p4_hat = static_cast<double>(rng.binomial(pt.n_atoms, p)) / static_cast<double>(pt.n_atoms);
    }
    try {
      samples.push_back(fit_relaxation(fake, initial).values);
    } catch (const FitError&) {
    }
  }
  return spread(samples, fit.values.size());
}

} // namespace fewatom
