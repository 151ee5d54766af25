#pragma once

#include "robustggm/core.hpp"
#include "robustggm/glasso.hpp"

#include <vector>

namespace robustggm {

/// Result of the classical E-step: tau_i = (nu + p) / (nu + delta_i).
struct ClassicalEStepOut {
  Vector tau;
  Vector delta;
};

/// Output of a weighted M-step (shared by the classical and t* EM variants).
struct MStepResult {
  Vector mu;
  SymMatrix theta;
  SymMatrix scatter;  // the weighted scatter handed to the glasso
  GlassoState state;
};

/// Solver settings derived from a FitConfig.
GlassoOptions glasso_options(const FitConfig& config);

ClassicalEStepOut e_step_classical(const Dataset& y, const Vector& mu, const SymMatrix& theta,
                                   double nu);

/// Weighted mean and glasso on S_tau(mu) = (1/n) sum tau_i (Y_i - mu)(Y_i - mu)^T.
MStepResult m_step_classical(const Dataset& y, const Vector& tau, double rho,
                             const GlassoOptions& opts, const GlassoState* warm = nullptr);

/// Sum over observations of the log multivariate-t density with dispersion Theta^{-1}.
double t_log_likelihood(const Dataset& y, const Vector& mu, const SymMatrix& theta, double nu);

/// Penalized observed log-likelihood: t_log_likelihood - (n/2) * rho * ||Theta||_1.
/// The n/2 factor keeps rho on the same scale as the Gaussian objective.
double tlasso_objective(const Dataset& y, const Vector& mu, const SymMatrix& theta, double nu,
                        double rho);

/// Penalized EM for the classical multivariate t. When `warm` is given the
/// EM starts from its estimates (rho paths); otherwise from the coordinatewise
/// median and the glasso on the sample covariance.
FitResult tlasso_fit(const Dataset& y, const FitConfig& config, const FitResult* warm = nullptr);

/// Grid argmax of t_log_likelihood at fixed (mu, Theta); ties go to smaller nu.
double estimate_nu(const Dataset& y, const Vector& mu, const SymMatrix& theta,
                   const std::vector<double>& grid);

/// Line search that refits the tlasso at every grid value and compares the
/// observed t log-likelihood of the fits. Ties go to smaller nu.
double profile_nu(const Dataset& y, const FitConfig& config, const std::vector<double>& grid);

}  // namespace robustggm
