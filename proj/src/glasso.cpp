#include "robustggm/glasso.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace robustggm {

namespace {

// W with row and column j removed.
Matrix drop_index(const Matrix& w, Eigen::Index j) {
  const Eigen::Index p = w.rows();
  Matrix out(p - 1, p - 1);
  for (Eigen::Index a = 0, ra = 0; a < p; ++a) {
    if (a == j) continue;
    for (Eigen::Index b = 0, rb = 0; b < p; ++b) {
      if (b == j) continue;
      out(ra, rb) = w(a, b);
      ++rb;
    }
    ++ra;
  }
  return out;
}

Vector drop_entry(const Vector& v, Eigen::Index j) {
  Vector out(v.size() - 1);
  for (Eigen::Index a = 0, r = 0; a < v.size(); ++a) {
    if (a != j) out(r++) = v(a);
  }
  return out;
}

SymMatrix theta_from_state(const Matrix& w, const Matrix& beta) {
  const Eigen::Index p = w.rows();
  Matrix t = Matrix::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const Vector b = beta.col(j);
    const Vector w12 = drop_entry(w.col(j), j);
    const double tjj = 1.0 / (w(j, j) - w12.dot(b));
    t(j, j) = tjj;
    for (Eigen::Index a = 0, r = 0; a < p; ++a) {
      if (a == j) continue;
      t(a, j) = -b(r++) * tjj;
    }
  }
  return SymMatrix::symmetrized(t);
}

double mean_abs_offdiag(const Matrix& m) {
  const Eigen::Index p = m.rows();
  if (p < 2) return 0.0;
  return (m.cwiseAbs().sum() - m.diagonal().cwiseAbs().sum()) / static_cast<double>(p * (p - 1));
}

}  // namespace

Vector lasso_inner(const Matrix& w11, const Vector& s12, double rho, double tol,
                   const Vector& beta0, int max_passes) {
  const Eigen::Index m = s12.size();
  Vector beta = beta0.size() == m ? beta0 : Vector::Zero(m);
  Vector wb = w11 * beta;  // running W11 * beta
  double max_delta = 0.0;
  for (int pass = 0; pass < max_passes; ++pass) {
    max_delta = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      const double wkk = w11(k, k);
      const double partial = s12(k) - (wb(k) - wkk * beta(k));
      const double updated = soft_threshold(partial, rho) / wkk;
      const double delta = updated - beta(k);
      if (delta != 0.0) {
        wb.noalias() += w11.col(k) * delta;
        beta(k) = updated;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    if (max_delta < tol) return beta;
  }
  std::ostringstream os;
  os << "lasso coordinate descent did not converge in " << max_passes
     << " passes (max change " << max_delta << ")";
  throw NonConvergence(os.str(), max_delta);
}

GlassoResult glasso_fit(const SymMatrix& s, double rho, const GlassoOptions& opts,
                        const GlassoState* warm) {
  if (!(rho >= 0.0)) throw UsageError("glasso: rho must be >= 0");
  const Eigen::Index p = s.p();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(s(j, j) >= 0.0)) throw UsageError("glasso: diagonal of S must be nonnegative");
  }
  if (rho == 0.0) s.require_pd("glasso with rho = 0 needs a positive definite S");

  GlassoState st;
  bool warmed = false;
  if (warm != nullptr && warm->w.rows() == p && warm->beta.rows() == p - 1 &&
      warm->beta.cols() == p) {
    st.w = warm->w;
    for (Eigen::Index j = 0; j < p; ++j) st.w(j, j) = s(j, j) + rho;
    Eigen::LLT<Matrix> llt(st.w);
    if (llt.info() == Eigen::Success) {
      st.beta = warm->beta;
      warmed = true;
    }
  }
  if (!warmed) {
    st.w = s.mat();
    for (Eigen::Index j = 0; j < p; ++j) st.w(j, j) = s(j, j) + rho;
    st.beta = Matrix::Zero(std::max<Eigen::Index>(p - 1, 0), p);
  }

  GlassoResult result;
  if (p == 1) {
    result.sigma_hat = SymMatrix(st.w);
    result.theta_hat = SymMatrix(Matrix::Constant(1, 1, 1.0 / st.w(0, 0)));
    result.state = std::move(st);
    return result;
  }

  const double threshold = opts.tol * mean_abs_offdiag(s.mat());
  const double n_offdiag = static_cast<double>(p * (p - 1));
  bool converged = false;
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double total_delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const Matrix w11 = drop_index(st.w, j);
      const Vector s12 = drop_entry(s.mat().col(j), j);
      const Vector beta = lasso_inner(w11, s12, rho, opts.inner_tol, st.beta.col(j),
                                      opts.max_inner_passes);
      st.beta.col(j) = beta;
      const Vector w12 = w11 * beta;
      for (Eigen::Index a = 0, r = 0; a < p; ++a) {
        if (a == j) continue;
        total_delta += std::abs(w12(r) - st.w(a, j));
        st.w(a, j) = w12(r);
        st.w(j, a) = w12(r);
        ++r;
      }
    }
    st.sweep_count = sweep + 1;
    st.last_mean_delta = total_delta / n_offdiag;
    if (opts.track_objective) {
      const SymMatrix t = theta_from_state(st.w, st.beta);
      result.sweep_objectives.push_back(
          t.is_pd() ? penalized_gaussian_objective(t, s, rho)
                    : -std::numeric_limits<double>::infinity());
    }
    if (st.last_mean_delta <= threshold) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "glasso did not converge in " << opts.max_sweeps << " sweeps (mean change "
       << st.last_mean_delta << ", threshold " << threshold << ")";
    const double residual = st.last_mean_delta;
    throw GlassoNonConvergence(os.str(), residual, std::move(st));
  }

  result.theta_hat = theta_from_state(st.w, st.beta);
  result.sigma_hat = SymMatrix::symmetrized(st.w);
  result.state = std::move(st);
  return result;
}

double penalized_gaussian_objective(const SymMatrix& theta, const SymMatrix& s, double rho) {
  if (theta.p() != s.p()) throw UsageError("objective: dimension mismatch");
  const double logdet = theta.log_det();
  const double trace = s.mat().cwiseProduct(theta.mat()).sum();
  return logdet - trace - rho * theta.l1_norm();
}

KktResiduals kkt_residuals(const SymMatrix& s, const SymMatrix& w, const SymMatrix& theta,
                           double rho) {
  KktResiduals r;
  const Eigen::Index p = s.p();
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = 0; k < p; ++k) {
      if (j == k) continue;
      const double g = w(j, k) - s(j, k);
      r.inactive = std::max(r.inactive, std::abs(g) - rho);
      if (theta(j, k) != 0.0) {
        const double sgn = theta(j, k) > 0.0 ? 1.0 : -1.0;
        // Theta^{-1} - S - rho*sgn(Theta) = 0 on the support.
        r.active = std::max(r.active, std::abs(g - rho * sgn));
      }
    }
  }
  r.inactive = std::max(r.inactive, 0.0);
  return r;
}

}  // namespace robustggm
