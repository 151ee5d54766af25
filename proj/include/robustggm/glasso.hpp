#pragma once

#include "robustggm/core.hpp"

#include <optional>
#include <vector>

namespace robustggm {

struct GlassoOptions {
  /// Outer stop: mean |change| of W over a sweep <= tol * mean |off-diag S|.
  double tol = 1e-4;
  /// Inner lasso stop: max coordinate change < inner_tol.
  double inner_tol = 1e-6;
  int max_sweeps = 10000;
  int max_inner_passes = 100000;
  /// Record the penalized objective of the implied Theta after every sweep.
  bool track_objective = false;
};

class GlassoNonConvergence : public NonConvergence {
 public:
  GlassoNonConvergence(const std::string& what, double residual, GlassoState state)
      : NonConvergence(what, residual), state_(std::move(state)) {}
  const GlassoState& state() const noexcept { return state_; }

 private:
  GlassoState state_;
};

struct GlassoResult {
  SymMatrix sigma_hat;  // the solver's W; diag == diag(S) + rho exactly
  SymMatrix theta_hat;
  GlassoState state;
  std::vector<double> sweep_objectives;  // filled when track_objective
};

/// Maximizes log det(Theta) - tr(S Theta) - rho * ||Theta||_1 (diagonal
/// penalized) by block coordinate descent over the columns of W.
GlassoResult glasso_fit(const SymMatrix& s, double rho, const GlassoOptions& opts = {},
                        const GlassoState* warm = nullptr);

/// Coordinate descent for min_beta 1/2 b'W11 b - b's12 + rho ||b||_1.
/// `beta0` is the starting point (zeros when empty).
Vector lasso_inner(const Matrix& w11, const Vector& s12, double rho, double tol,
                   const Vector& beta0 = Vector(), int max_passes = 100000);

double penalized_gaussian_objective(const SymMatrix& theta, const SymMatrix& s, double rho);

struct KktResiduals {
  double inactive = 0.0;  // max_{j!=k} (|w_jk - s_jk| - rho)_+
  double active = 0.0;    // max over theta_jk != 0 of |w_jk - s_jk - rho*sgn(theta_jk)|
  double max() const { return inactive > active ? inactive : active; }
};

KktResiduals kkt_residuals(const SymMatrix& s, const SymMatrix& w, const SymMatrix& theta,
                           double rho);

}  // namespace robustggm
