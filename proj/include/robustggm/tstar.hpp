#pragma once

#include "robustggm/core.hpp"
#include "robustggm/glasso.hpp"
#include "robustggm/rng.hpp"
#include "robustggm/tlasso.hpp"

#include <cstdint>
#include <vector>

namespace robustggm {

// ---------------------------------------------------------------------------
// Full conditional of one divisor in the alternative (t*) model
// ---------------------------------------------------------------------------

/// Density of tau_ij given the other divisors of observation i:
///   f(t) ∝ t^{alpha-1} exp(-beta t - gamma sqrt(t)).
struct FullConditionalParams {
  double alpha = 2.0;  // (nu + 1) / 2
  double beta = 1.5;   // (nu + (y_j - mu_j)^2 theta_jj) / 2
  double gamma = 0.0;  // (y_j - mu_j) * sum_{k != j} theta_jk sqrt(tau_k) (y_k - mu_k)

  /// Reduced coefficient gamma / (2 sqrt(beta)) of the unit-rate density.
  double gamma_prime() const;
};

/// Per-observation expectations of the divisors.
struct SqrtTauMoments {
  Vector e_tau;       // E[tau_j]
  Vector e_sqrt_tau;  // E[sqrt(tau_j)]
  Matrix e_outer;     // E[sqrt(tau_j) sqrt(tau_k)], diagonal == e_tau
};

FullConditionalParams full_conditional_params(const Vector& y, const Vector& tau,
                                              const Vector& mu, const SymMatrix& theta,
                                              double nu, Eigen::Index j);

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

/// Acceptance bookkeeping for the rejection samplers.
struct SamplerStats {
  std::uint64_t gamma_proposals = 0;   // Gamma(2, delta) branch, gamma' <= 1
  std::uint64_t gamma_accepted = 0;
  std::uint64_t hybrid_proposals = 0;  // sqrt-scale branch, gamma' > 1
  std::uint64_t hybrid_accepted = 0;
  std::uint64_t grid_draws = 0;        // inverse-CDF fallback for alpha != 2
  double max_envelope_ratio = 0.0;     // largest f / (M g) seen; must stay <= 1
  bool record_gamma_prime = false;
  std::vector<double> gamma_primes;    // filled when record_gamma_prime

  std::uint64_t proposals() const { return gamma_proposals + hybrid_proposals; }
  std::uint64_t accepted() const { return gamma_accepted + hybrid_accepted; }
  double acceptance() const;
  double gamma_acceptance() const;
  double hybrid_acceptance() const;
  void merge(const SamplerStats& other);
};

/// Rate delta of the Gamma(2, delta) instrumental density for gamma' <= 1:
/// 1 + (g^2 - sqrt(g^4 + 8 g^2)) / 4 for g < 0, and 1 otherwise.
double gamma_branch_delta(double gamma_prime);

/// Exact draw from f(t) = C(g) t exp(-t - 2 g sqrt(t)) on t > 0.
double sample_fgamma(double gamma_prime, Rng& rng, SamplerStats* stats = nullptr);

/// Draw from f(t) ∝ t^{alpha-1} exp(-t - 2 g sqrt(t)) for general alpha by
/// inverting the CDF tabulated on a grid adapted to the mode and curvature.
double sample_falpha_grid(double alpha, double gamma_prime, Rng& rng);

/// Draw tau from the full conditional: sample the unit-rate density with
/// g = gamma / (2 sqrt(beta)) and divide by beta.
double sample_full_conditional(const FullConditionalParams& params, Rng& rng,
                               SamplerStats* stats = nullptr);

/// 1 / C(g) = int_0^inf t exp(-t - 2 g sqrt(t)) dt.
double inverse_normalizing_constant(double gamma);
double normalizing_constant_C(double gamma);

// ---------------------------------------------------------------------------
// E-steps
// ---------------------------------------------------------------------------

/// Gibbs sampler over the p divisors of one observation. Averages
/// sqrt(tau) sqrt(tau)^T over `sweeps` sweeps after `burn_in` discarded ones.
/// Starts from the mean-field expectations unless `tau_init` is given.
SqrtTauMoments gibbs_e_step(const Vector& y, const Vector& mu, const SymMatrix& theta, double nu,
                            int sweeps, int burn_in, Rng& rng, SamplerStats* stats = nullptr,
                            const Vector* tau_init = nullptr);

/// Mean-field E-step: tau_j ~ Gamma(alpha_j, beta_j) independently, where only
/// diag(Theta) enters beta_j.
SqrtTauMoments variational_e_step(const Vector& y, const Vector& mu, const SymMatrix& theta,
                                  double nu);

/// Coordinatewise weighted mean and glasso on
/// S* = (1/n) sum_i E[sqrt(tau_i) sqrt(tau_i)^T] ⊙ (Y_i - mu)(Y_i - mu)^T.
MStepResult tstar_m_step(const Dataset& y, const std::vector<SqrtTauMoments>& moments, double rho,
                         const GlassoOptions& opts, const GlassoState* warm = nullptr);

/// Surrogate objective (n/2)(log det Theta - tr(Theta S*)) - (n/2) rho ||Theta||_1.
double tstar_surrogate_objective(const SymMatrix& theta, const SymMatrix& scatter,
                                 Eigen::Index n, double rho);

struct TstarFitOptions {
  int threads = 1;
  SamplerStats* stats = nullptr;  // aggregated over all Gibbs E-steps when set
};

/// Variational or Monte Carlo t*-lasso, chosen by config.estep_kind.
FitResult tstar_fit(const Dataset& y, const FitConfig& config, const FitResult* warm = nullptr,
                    const TstarFitOptions& options = {});

/// Off-diagonal covariance factor nu Gamma((nu-1)/2)^2 / (2 Gamma(nu/2)^2) of
/// the t* distribution.
double tstar_covariance_multiplier(double nu);

/// Largest attainable correlation: multiplier / (nu / (nu - 2)).
double tstar_max_correlation(double nu);

}  // namespace robustggm
