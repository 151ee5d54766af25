#include "robustggm/tstar.hpp"

#include "em_support.hpp"
#include "robustggm/parallel.hpp"
#include "robustggm/special.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace robustggm {

double FullConditionalParams::gamma_prime() const { return gamma / (2.0 * std::sqrt(beta)); }

FullConditionalParams full_conditional_params(const Vector& y, const Vector& tau,
                                              const Vector& mu, const SymMatrix& theta,
                                              double nu, Eigen::Index j) {
  const Eigen::Index p = theta.p();
  if (y.size() != p || tau.size() != p || mu.size() != p || j < 0 || j >= p) {
    throw UsageError("full_conditional_params: dimension mismatch");
  }
  FullConditionalParams fc;
  const double dj = y(j) - mu(j);
  fc.alpha = 0.5 * (nu + 1.0);
  fc.beta = 0.5 * (nu + dj * dj * theta(j, j));
  double lin = 0.0;
  for (Eigen::Index k = 0; k < p; ++k) {
    if (k == j) continue;
    // latent normal X_k = sqrt(tau_k) (y_k - mu_k)
    lin += theta(j, k) * std::sqrt(tau(k)) * (y(k) - mu(k));
  }
  fc.gamma = dj * lin;
  return fc;
}

// ---------------------------------------------------------------------------

double SamplerStats::acceptance() const {
  return proposals() == 0 ? 1.0 : static_cast<double>(accepted()) / static_cast<double>(proposals());
}
double SamplerStats::gamma_acceptance() const {
  return gamma_proposals == 0 ? 1.0
                              : static_cast<double>(gamma_accepted) / static_cast<double>(gamma_proposals);
}
double SamplerStats::hybrid_acceptance() const {
  return hybrid_proposals == 0
             ? 1.0
             : static_cast<double>(hybrid_accepted) / static_cast<double>(hybrid_proposals);
}
void SamplerStats::merge(const SamplerStats& o) {
  gamma_proposals += o.gamma_proposals;
  gamma_accepted += o.gamma_accepted;
  hybrid_proposals += o.hybrid_proposals;
  hybrid_accepted += o.hybrid_accepted;
  grid_draws += o.grid_draws;
  max_envelope_ratio = std::max(max_envelope_ratio, o.max_envelope_ratio);
  if (record_gamma_prime) {
    gamma_primes.insert(gamma_primes.end(), o.gamma_primes.begin(), o.gamma_primes.end());
  }
}

double gamma_branch_delta(double g) {
  if (g >= 0.0) return 1.0;
  // 1 + (g^2 - sqrt(g^4 + 8 g^2)) / 4 without cancellation for large |g|.
  const double g2 = g * g;
  return 1.0 - 2.0 * g2 / (g2 + std::sqrt(g2 * g2 + 8.0 * g2));
}

namespace {

constexpr double kEnvelopeSlack = 1e-9;

void check_envelope(double log_ratio, SamplerStats* stats) {
  const double ratio = std::exp(log_ratio);
  if (ratio > 1.0 + kEnvelopeSlack) {
    std::ostringstream os;
    os << "rejection envelope violated: f/(M g) = " << ratio;
    throw std::logic_error(os.str());
  }
  if (stats != nullptr) stats->max_envelope_ratio = std::max(stats->max_envelope_ratio, ratio);
}

double sample_gamma_branch(double g, Rng& rng, SamplerStats* stats) {
  const double delta = gamma_branch_delta(g);
  const double one_minus = 1.0 - delta;
  for (;;) {
    const double t = rng.gamma(2.0, delta);
    const double root = std::sqrt(t);
    double log_ratio;
    if (g < 0.0) {
      // f/(M g_delta) = exp(-(1-delta) (sqrt(t) + g/(1-delta))^2)
      const double z = root + g / one_minus;
      log_ratio = -one_minus * z * z;
    } else {
      log_ratio = -2.0 * g * root;
    }
    check_envelope(log_ratio, stats);
    if (stats != nullptr) ++stats->gamma_proposals;
    if (std::log(rng.uniform()) <= log_ratio) {
      if (stats != nullptr) ++stats->gamma_accepted;
      return t;
    }
  }
}

// gamma' > 1: sample s = sqrt(t) from h(s) ∝ s^3 exp(-s^2 - 2 g s) with an
// exponential proposal of rate (g + 1) / 2.
double sample_hybrid_branch(double g, Rng& rng, SamplerStats* stats) {
  const double rate = 0.5 * (g + 1.0);
  const double b = 2.0 * g - rate;
  // maximiser of s^3 exp(-s^2 - b s): 2 s^2 + b s - 3 = 0
  const double s_star = (-b + std::sqrt(b * b + 24.0)) / 4.0;
  const double log_peak = 3.0 * std::log(s_star) - s_star * s_star - b * s_star;
  for (;;) {
    const double s = rng.gamma(1.0, rate);
    const double log_ratio = 3.0 * std::log(s) - s * s - b * s - log_peak;
    check_envelope(log_ratio, stats);
    if (stats != nullptr) ++stats->hybrid_proposals;
    if (std::log(rng.uniform()) <= log_ratio) {
      if (stats != nullptr) ++stats->hybrid_accepted;
      return s * s;
    }
  }
}

}  // namespace

double sample_fgamma(double gamma_prime, Rng& rng, SamplerStats* stats) {
  if (!std::isfinite(gamma_prime)) throw UsageError("sample_fgamma: gamma' must be finite");
  if (stats != nullptr && stats->record_gamma_prime) stats->gamma_primes.push_back(gamma_prime);
  if (gamma_prime <= 1.0) return sample_gamma_branch(gamma_prime, rng, stats);
  return sample_hybrid_branch(gamma_prime, rng, stats);
}

double sample_falpha_grid(double alpha, double g, Rng& rng) {
  if (!(alpha > 0.5)) throw UsageError("sample_falpha_grid: alpha must exceed 1/2");
  // Work on s = sqrt(t): log h(s) = (2 alpha - 1) log s - s^2 - 2 g s, log-concave.
  // The density is taken log-linear within each cell, so every cell inverts exactly.
  const double a = 2.0 * alpha - 1.0;
  const double mode = 0.5 * (-g + std::sqrt(g * g + 2.0 * a));
  const double sd = 1.0 / std::sqrt(a / (mode * mode) + 2.0);
  const double lo = std::max(0.0, mode - 12.0 * sd);
  const double hi = mode + 12.0 * sd;
  constexpr int kCells = 512;
  const double h = (hi - lo) / kCells;
  auto log_h = [&](double s) { return s > 0.0 ? a * std::log(s) - s * s - 2.0 * g * s : -INFINITY; };
  const double log_mode = log_h(mode);

  std::array<double, kCells + 1> logd;
  std::array<double, kCells + 1> cdf;
  for (int i = 0; i <= kCells; ++i) logd[i] = log_h(lo + h * i) - log_mode;
  // A cell starting at s = 0 uses the power law s^a instead.
  auto cell_mass = [&](int i, double x) {
    if (!std::isfinite(logd[i])) return std::exp(logd[i + 1]) * h / (a + 1.0);
    const double f0 = std::exp(logd[i]);
    const double c = (logd[i + 1] - logd[i]) / h;
    return std::abs(c * x) < 1e-10 ? f0 * x : f0 * std::expm1(c * x) / c;
  };
  cdf[0] = 0.0;
  for (int i = 0; i < kCells; ++i) cdf[i + 1] = cdf[i] + cell_mass(i, h);

  const double target = rng.uniform() * cdf[kCells];
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  const int cell = std::clamp(static_cast<int>(it - cdf.begin()) - 1, 0, kCells - 1);
  const double mass = target - cdf[cell];
  double x;
  if (!std::isfinite(logd[cell])) {
    x = h * std::pow(mass * (a + 1.0) / (std::exp(logd[cell + 1]) * h), 1.0 / (a + 1.0));
  } else {
    const double f0 = std::exp(logd[cell]);
    const double c = (logd[cell + 1] - logd[cell]) / h;
    x = std::abs(c * h) < 1e-10 ? mass / f0 : std::log1p(c * mass / f0) / c;
  }
  const double s = lo + h * cell + std::clamp(x, 0.0, h);
  return s * s;
}

double sample_full_conditional(const FullConditionalParams& params, Rng& rng,
                               SamplerStats* stats) {
  const double g = params.gamma_prime();
  double t;
  if (params.alpha == 2.0) {
    t = sample_fgamma(g, rng, stats);
  } else {
    if (stats != nullptr) ++stats->grid_draws;
    t = sample_falpha_grid(params.alpha, g, rng);
  }
  return t / params.beta;
}

double inverse_normalizing_constant(double g) {
  if (g > 10.0) {
    // 1/C = (1 / (8 g^4)) sum_k (-1)^k (2k+3)! / (k! (4 g^2)^k), truncated at
    // its smallest term. Below g = 10 the truncation error dominates; above it
    // the cancellation in the closed form does.
    const double x = 1.0 / (4.0 * g * g);
    double term = 6.0;  // 3!
    double sum = term;
    for (int k = 0; k < 200; ++k) {
      const double next = -term * (2.0 * k + 4.0) * (2.0 * k + 5.0) / (k + 1.0) * x;
      if (std::abs(next) >= std::abs(term)) break;
      sum += next;
      term = next;
      if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return sum / (8.0 * g * g * g * g);
  }
  // exp(g^2) (1 - Phi(g sqrt 2)) = erfcx(g) / 2
  return 1.0 + g * g -
         g * (2.0 * g * g + 3.0) * std::sqrt(std::numbers::pi) * 0.5 * erfcx(g);
}

double normalizing_constant_C(double gamma) { return 1.0 / inverse_normalizing_constant(gamma); }

// ---------------------------------------------------------------------------

SqrtTauMoments variational_e_step(const Vector& y, const Vector& mu, const SymMatrix& theta,
                                  double nu) {
  const Eigen::Index p = theta.p();
  if (y.size() != p || mu.size() != p) throw UsageError("variational_e_step: dimension mismatch");
  const double alpha = 0.5 * (nu + 1.0);
  const double sqrt_factor = std::exp(std::lgamma(alpha + 0.5) - std::lgamma(alpha));
  SqrtTauMoments m;
  m.e_tau.resize(p);
  m.e_sqrt_tau.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double d = y(j) - mu(j);
    const double beta = 0.5 * (nu + d * d * theta(j, j));
    m.e_tau(j) = alpha / beta;
    m.e_sqrt_tau(j) = sqrt_factor / std::sqrt(beta);
  }
  m.e_outer = m.e_sqrt_tau * m.e_sqrt_tau.transpose();
  m.e_outer.diagonal() = m.e_tau;
  return m;
}

SqrtTauMoments gibbs_e_step(const Vector& y, const Vector& mu, const SymMatrix& theta, double nu,
                            int sweeps, int burn_in, Rng& rng, SamplerStats* stats,
                            const Vector* tau_init) {
  if (sweeps < 1 || burn_in < 0) throw UsageError("gibbs_e_step: invalid sweep counts");
  const Eigen::Index p = theta.p();
  if (y.size() != p || mu.size() != p) throw UsageError("gibbs_e_step: dimension mismatch");
  const Vector d = y - mu;
  Vector tau = tau_init != nullptr ? *tau_init : variational_e_step(y, mu, theta, nu).e_tau;
  Vector x = tau.cwiseSqrt().cwiseProduct(d);  // latent normals

  FullConditionalParams fc;
  fc.alpha = 0.5 * (nu + 1.0);
  Vector sum_tau = Vector::Zero(p);
  Vector sum_sqrt = Vector::Zero(p);
  Matrix sum_outer = Matrix::Zero(p, p);
  const int total = burn_in + sweeps;
  for (int sweep = 0; sweep < total; ++sweep) {
    for (Eigen::Index j = 0; j < p; ++j) {
      fc.beta = 0.5 * (nu + d(j) * d(j) * theta(j, j));
      fc.gamma = d(j) * (theta.mat().row(j).dot(x) - theta(j, j) * x(j));
      tau(j) = sample_full_conditional(fc, rng, stats);
      x(j) = std::sqrt(tau(j)) * d(j);
    }
    if (sweep >= burn_in) {
      const Vector r = tau.cwiseSqrt();
      sum_tau += tau;
      sum_sqrt += r;
      sum_outer.noalias() += r * r.transpose();
    }
  }
  SqrtTauMoments m;
  m.e_tau = sum_tau / sweeps;
  m.e_sqrt_tau = sum_sqrt / sweeps;
  m.e_outer = sum_outer / sweeps;
  m.e_outer.diagonal() = m.e_tau;
  return m;
}

MStepResult tstar_m_step(const Dataset& y, const std::vector<SqrtTauMoments>& moments, double rho,
                         const GlassoOptions& opts, const GlassoState* warm) {
  const Eigen::Index n = y.n();
  const Eigen::Index p = y.p();
  if (static_cast<Eigen::Index>(moments.size()) != n) {
    throw UsageError("tstar_m_step: one moment set per observation required");
  }
  const Matrix& v = y.values();
  Vector num = Vector::Zero(p);
  Vector den = Vector::Zero(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    num += moments[i].e_tau.cwiseProduct(v.row(i).transpose());
    den += moments[i].e_tau;
  }
  MStepResult out;
  out.mu = num.cwiseQuotient(den);
  Matrix scatter = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector dev = v.row(i).transpose() - out.mu;
    scatter.noalias() += moments[i].e_outer.cwiseProduct(dev * dev.transpose());
  }
  out.scatter = SymMatrix::symmetrized(scatter / static_cast<double>(n));
  GlassoResult g = glasso_fit(out.scatter, rho, opts, warm);
  out.theta = std::move(g.theta_hat);
  out.state = std::move(g.state);
  return out;
}

double tstar_surrogate_objective(const SymMatrix& theta, const SymMatrix& scatter, Eigen::Index n,
                                 double rho) {
  return 0.5 * static_cast<double>(n) * penalized_gaussian_objective(theta, scatter, rho);
}

namespace {

std::vector<SqrtTauMoments> run_e_step(const Dataset& y, const Vector& mu, const SymMatrix& theta,
                                       const FitConfig& config, int em_iter,
                                       const TstarFitOptions& options) {
  const Eigen::Index n = y.n();
  std::vector<SqrtTauMoments> moments(static_cast<std::size_t>(n));
  if (config.estep_kind == EStepKind::variational) {
    for (Eigen::Index i = 0; i < n; ++i) {
      moments[static_cast<std::size_t>(i)] =
          variational_e_step(y.values().row(i).transpose(), mu, theta, config.nu);
    }
    return moments;
  }
  // Monte Carlo: one independent stream per (observation, EM iteration).
  const bool halve = em_iter >= 5;
  const int sweeps = halve ? std::max(1, config.gibbs_sweeps / 2) : config.gibbs_sweeps;
  const int burn_in = halve ? config.gibbs_burn_in / 2 : config.gibbs_burn_in;
  const Rng base(config.seed);
  std::vector<SamplerStats> stats(options.stats != nullptr ? static_cast<std::size_t>(n) : 0);
  parallel_for(static_cast<std::size_t>(n), options.threads, [&](std::size_t i) {
    Rng rng = base.derive({static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(em_iter)});
    SamplerStats* st = nullptr;
    if (options.stats != nullptr) {
      stats[i].record_gamma_prime = options.stats->record_gamma_prime;
      st = &stats[i];
    }
    moments[i] = gibbs_e_step(y.values().row(static_cast<Eigen::Index>(i)).transpose(), mu, theta,
                              config.nu, sweeps, burn_in, rng, st);
  });
  if (options.stats != nullptr) {
    for (const auto& s : stats) options.stats->merge(s);
  }
  return moments;
}

Matrix weights_of(const std::vector<SqrtTauMoments>& moments, Eigen::Index p) {
  Matrix w(static_cast<Eigen::Index>(moments.size()), p);
  for (std::size_t i = 0; i < moments.size(); ++i) {
    w.row(static_cast<Eigen::Index>(i)) = moments[i].e_tau.transpose();
  }
  return w;
}

}  // namespace

FitResult tstar_fit(const Dataset& y, const FitConfig& config, const FitResult* warm,
                    const TstarFitOptions& options) {
  config.validate();
  if (config.estep_kind != EStepKind::variational && config.estep_kind != EStepKind::monte_carlo) {
    throw UsageError("tstar_fit: estep_kind must be variational or monte_carlo");
  }
  const GlassoOptions opts = glasso_options(config);
  const bool monte_carlo = config.estep_kind == EStepKind::monte_carlo;

  Vector mu;
  SymMatrix theta;
  GlassoState state;
  if (warm != nullptr && warm->mu_hat.size() == y.p()) {
    mu = warm->mu_hat;
    theta = warm->theta_hat;
    state = warm->solver_state;
  } else {
    detail::Initialization init = detail::initialize(y, config.rho, opts);
    mu = std::move(init.mu);
    theta = std::move(init.theta);
    state = std::move(init.state);
  }

  FitResult r;
  std::vector<SqrtTauMoments> moments;
  std::vector<double> moving;  // 3-iteration moving average (Monte Carlo stop rule)
  for (int it = 0; it < config.em_max_iter; ++it) {
    moments = run_e_step(y, mu, theta, config, it, options);
    MStepResult m = tstar_m_step(y, moments, config.rho, opts, &state);
    detail::guard_m_step(m, theta, config.rho, opts);
    const double obj = tstar_surrogate_objective(m.theta, m.scatter, y.n(), config.rho);
    r.objective_trace.push_back(obj);
    mu = std::move(m.mu);
    theta = std::move(m.theta);
    state = std::move(m.state);
    r.iterations = it + 1;

    const auto& tr = r.objective_trace;
    if (!monte_carlo) {
      if (tr.size() >= 2) {
        const double prev = tr[tr.size() - 2];
        if (std::abs(obj - prev) / std::max(std::abs(prev), 1e-300) < config.em_tol) {
          r.converged = true;
          break;
        }
      }
    } else if (tr.size() >= 3) {
      moving.push_back((tr[tr.size() - 1] + tr[tr.size() - 2] + tr[tr.size() - 3]) / 3.0);
      if (moving.size() >= 2) {
        const double prev = moving[moving.size() - 2];
        if (std::abs(moving.back() - prev) / std::max(std::abs(prev), 1e-300) < config.em_tol) {
          r.converged = true;
          break;
        }
      }
    }
  }

  if (!monte_carlo || moments.empty()) {
    moments = run_e_step(y, mu, theta, config, r.iterations, options);
  }
  r.weights = weights_of(moments, y.p());
  r.mu_hat = std::move(mu);
  r.sigma_hat = theta.inverse();
  r.graph = graph_from_precision(theta, config.zero_threshold);
  r.theta_hat = std::move(theta);
  r.solver_state = std::move(state);
  return r;
}

double tstar_covariance_multiplier(double nu) {
  if (!(nu > 2.0)) throw UsageError("tstar_covariance_multiplier: nu must exceed 2");
  return 0.5 * nu * std::exp(2.0 * (std::lgamma(0.5 * (nu - 1.0)) - std::lgamma(0.5 * nu)));
}

double tstar_max_correlation(double nu) {
  return tstar_covariance_multiplier(nu) / (nu / (nu - 2.0));
}

}  // namespace robustggm
