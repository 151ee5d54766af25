#include "em_support.hpp"

#include <cmath>

namespace robustggm::detail {

Initialization initialize(const Dataset& y, double rho, const GlassoOptions& opts) {
  Initialization init;
  init.mu = column_medians(y.values());
  init.scale.resize(y.p());
  for (Eigen::Index j = 0; j < y.p(); ++j) {
    std::vector<double> dev(static_cast<std::size_t>(y.n()));
    for (Eigen::Index i = 0; i < y.n(); ++i) {
      dev[static_cast<std::size_t>(i)] = std::abs(y.values()(i, j) - init.mu(j));
    }
    init.scale(j) = 1.482602218505602 * median(std::move(dev));
  }
  GlassoResult g = glasso_fit(sample_covariance(y.values()), rho, opts);
  init.theta = std::move(g.theta_hat);
  init.state = std::move(g.state);
  return init;
}

void guard_m_step(MStepResult& m, const SymMatrix& theta_old, double rho,
                  const GlassoOptions& opts) {
  const double q_old = penalized_gaussian_objective(theta_old, m.scatter, rho);
  auto q_of = [&](const SymMatrix& t) {
    return t.is_pd() ? penalized_gaussian_objective(t, m.scatter, rho) : -INFINITY;
  };
  if (q_of(m.theta) >= q_old) return;

  GlassoOptions tight = opts;
  tight.tol = opts.tol * 1e-3;
  tight.inner_tol = opts.inner_tol * 1e-3;
  try {
    GlassoResult g = glasso_fit(m.scatter, rho, tight, &m.state);
    if (q_of(g.theta_hat) >= q_old) {
      m.theta = std::move(g.theta_hat);
      m.state = std::move(g.state);
      return;
    }
  } catch (const NonConvergence&) {
  }
  m.theta = theta_old;
}

}  // namespace robustggm::detail
