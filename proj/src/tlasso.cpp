#include "robustggm/tlasso.hpp"

#include "em_support.hpp"
#include "robustggm/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace robustggm {

GlassoOptions glasso_options(const FitConfig& config) {
  GlassoOptions o;
  o.tol = config.glasso_tol;
  o.inner_tol = config.glasso_inner_tol;
  o.max_sweeps = config.glasso_max_sweeps;
  return o;
}

ClassicalEStepOut e_step_classical(const Dataset& y, const Vector& mu, const SymMatrix& theta,
                                   double nu) {
  if (!(nu > 0.0)) throw UsageError("e_step_classical: nu must be positive");
  const Matrix l = theta.cholesky();
  const double p = static_cast<double>(y.p());
  ClassicalEStepOut out;
  out.tau.resize(y.n());
  out.delta.resize(y.n());
  for (Eigen::Index i = 0; i < y.n(); ++i) {
    const double d = mahalanobis_factored(y.values().row(i).transpose(), mu, l);
    out.delta(i) = d;
    out.tau(i) = (nu + p) / (nu + d);
  }
  return out;
}

MStepResult m_step_classical(const Dataset& y, const Vector& tau, double rho,
                             const GlassoOptions& opts, const GlassoState* warm) {
  if (tau.size() != y.n()) throw UsageError("m_step_classical: weight count mismatch");
  if (!(tau.minCoeff() > 0.0)) throw UsageError("m_step_classical: weights must be positive");
  const Matrix& v = y.values();
  MStepResult out;
  out.mu = (v.transpose() * tau) / tau.sum();
  const Matrix centered = v.rowwise() - out.mu.transpose();
  const Matrix scatter =
      centered.transpose() * tau.asDiagonal() * centered / static_cast<double>(y.n());
  out.scatter = SymMatrix::symmetrized(scatter);
  GlassoResult g = glasso_fit(out.scatter, rho, opts, warm);
  out.theta = std::move(g.theta_hat);
  out.state = std::move(g.state);
  return out;
}

double t_log_likelihood(const Dataset& y, const Vector& mu, const SymMatrix& theta, double nu) {
  if (!(nu > 0.0)) throw UsageError("t_log_likelihood: nu must be positive");
  const Matrix l = theta.cholesky();
  const double p = static_cast<double>(y.p());
  const double half_logdet = l.diagonal().array().log().sum();
  const double constant = std::lgamma(0.5 * (nu + p)) - std::lgamma(0.5 * nu) -
                          0.5 * p * std::log(std::numbers::pi * nu) + half_logdet;
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.n(); ++i) {
    const double d = mahalanobis_factored(y.values().row(i).transpose(), mu, l);
    total += constant - 0.5 * (nu + p) * std::log1p(d / nu);
  }
  return total;
}

double tlasso_objective(const Dataset& y, const Vector& mu, const SymMatrix& theta, double nu,
                        double rho) {
  return t_log_likelihood(y, mu, theta, nu) -
         0.5 * static_cast<double>(y.n()) * rho * theta.l1_norm();
}

namespace {

FitResult run_tlasso(const Dataset& y, const FitConfig& config, Vector mu, SymMatrix theta,
                     GlassoState state) {
  const GlassoOptions opts = glasso_options(config);
  FitResult r;
  double obj = tlasso_objective(y, mu, theta, config.nu, config.rho);
  r.objective_trace.push_back(obj);
  Vector tau = Vector::Ones(y.n());

  for (int it = 0; it < config.em_max_iter; ++it) {
    const ClassicalEStepOut e = e_step_classical(y, mu, theta, config.nu);
    tau = e.tau;
    MStepResult m = m_step_classical(y, tau, config.rho, opts, &state);
    detail::guard_m_step(m, theta, config.rho, opts);

    const double next = tlasso_objective(y, m.mu, m.theta, config.nu, config.rho);
    r.objective_trace.push_back(next);
    const double rel = std::abs(next - obj) / std::max(std::abs(obj), 1e-300);
    mu = std::move(m.mu);
    theta = std::move(m.theta);
    state = std::move(m.state);
    obj = next;
    r.iterations = it + 1;
    if (rel < config.em_tol) {
      r.converged = true;
      break;
    }
  }
  tau = e_step_classical(y, mu, theta, config.nu).tau;

  r.weights = tau.replicate(1, y.p());
  r.mu_hat = std::move(mu);
  r.sigma_hat = theta.inverse();
  r.graph = graph_from_precision(theta, config.zero_threshold);
  r.theta_hat = std::move(theta);
  r.solver_state = std::move(state);
  return r;
}

}  // namespace

FitResult tlasso_fit(const Dataset& y, const FitConfig& config, const FitResult* warm) {
  config.validate();
  const GlassoOptions opts = glasso_options(config);

  if (warm != nullptr && warm->mu_hat.size() == y.p()) {
    return run_tlasso(y, config, warm->mu_hat, warm->theta_hat, warm->solver_state);
  }

  const detail::Initialization init = detail::initialize(y, config.rho, opts);
  FitResult best = run_tlasso(y, config, init.mu, init.theta, init.state);
  Rng rng(config.seed);
  for (int k = 1; k < config.restarts; ++k) {
    Rng stream = rng.derive({0x7265737461727473ULL, static_cast<std::uint64_t>(k)});
    Vector mu0 = init.mu;
    for (Eigen::Index j = 0; j < mu0.size(); ++j) mu0(j) += 0.1 * init.scale(j) * stream.normal();
    FitResult cand = run_tlasso(y, config, mu0, init.theta, init.state);
    if (cand.objective_trace.back() > best.objective_trace.back()) best = std::move(cand);
  }
  return best;
}

double estimate_nu(const Dataset& y, const Vector& mu, const SymMatrix& theta,
                   const std::vector<double>& grid) {
  if (grid.empty()) throw UsageError("estimate_nu: empty grid");
  double best_nu = grid.front();
  double best_ll = -std::numeric_limits<double>::infinity();
  for (double nu : grid) {
    if (!(nu > 2.0)) throw UsageError("estimate_nu: grid values must exceed 2");
    const double ll = t_log_likelihood(y, mu, theta, nu);
    if (ll > best_ll || (ll == best_ll && nu < best_nu)) {
      best_ll = ll;
      best_nu = nu;
    }
  }
  return best_nu;
}

double profile_nu(const Dataset& y, const FitConfig& config, const std::vector<double>& grid) {
  if (grid.empty()) throw UsageError("profile_nu: empty grid");
  double best_nu = grid.front();
  double best_ll = -std::numeric_limits<double>::infinity();
  for (double nu : grid) {
    FitConfig c = config;
    c.nu = nu;
    const FitResult f = tlasso_fit(y, c);
    const double ll = t_log_likelihood(y, f.mu_hat, f.theta_hat, nu);
    if (ll > best_ll || (ll == best_ll && nu < best_nu)) {
      best_ll = ll;
      best_nu = nu;
    }
  }
  return best_nu;
}

}  // namespace robustggm
