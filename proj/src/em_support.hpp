#pragma once

// Helpers shared by the EM-based estimators (classical t and t*).

#include "robustggm/core.hpp"
#include "robustggm/glasso.hpp"
#include "robustggm/tlasso.hpp"

namespace robustggm::detail {

struct Initialization {
  Vector mu;
  SymMatrix theta;
  GlassoState state;
  Vector scale;  // per-column MAD, used to jitter restarts
};

/// Coordinatewise median and the glasso on the sample covariance.
Initialization initialize(const Dataset& y, double rho, const GlassoOptions& opts);

/// Makes the M-step a generalized EM step: the new Theta must not lower the
/// penalized Gaussian objective on the new scatter compared with the previous
/// Theta. Retries the glasso with tighter tolerances before falling back to
/// the previous Theta.
void guard_m_step(MStepResult& m, const SymMatrix& theta_old, double rho,
                  const GlassoOptions& opts);

}  // namespace robustggm::detail
