#include "robustggm/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace robustggm {

SymMatrix::SymMatrix(Matrix m) : m_(std::move(m)) {
  if (m_.rows() == 0 || m_.rows() != m_.cols()) {
    throw UsageError("SymMatrix: matrix must be square and non-empty");
  }
  for (Eigen::Index j = 0; j < m_.rows(); ++j) {
    for (Eigen::Index k = j + 1; k < m_.cols(); ++k) {
      if (m_(j, k) != m_(k, j)) {
        std::ostringstream os;
        os << "SymMatrix: entries (" << j << "," << k << ") are not symmetric";
        throw UsageError(os.str());
      }
    }
  }
}

SymMatrix SymMatrix::symmetrized(const Matrix& m) {
  if (m.rows() != m.cols()) throw UsageError("SymMatrix: matrix must be square");
  Matrix s = m;
  for (Eigen::Index j = 0; j < s.rows(); ++j) {
    for (Eigen::Index k = j + 1; k < s.cols(); ++k) {
      const double v = 0.5 * (m(j, k) + m(k, j));
      s(j, k) = v;
      s(k, j) = v;
    }
  }
  return SymMatrix(std::move(s));
}

SymMatrix SymMatrix::identity(Eigen::Index p) { return SymMatrix(Matrix::Identity(p, p)); }

SymMatrix SymMatrix::diagonal(const Vector& d) { return SymMatrix(Matrix(d.asDiagonal())); }

Matrix SymMatrix::cholesky() const {
  // Plain column Cholesky so the failing pivot is known.
  const Eigen::Index p = m_.rows();
  Matrix l = Matrix::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double d = m_(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) {
      std::ostringstream os;
      os << "matrix is not positive definite (Cholesky pivot " << (j + 1) << " = " << d << ")";
      throw PdViolation(os.str(), static_cast<int>(j + 1));
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < p; ++i) {
      l(i, j) = (m_(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return l;
}

bool SymMatrix::is_pd() const {
  Eigen::LLT<Matrix> llt(m_);
  if (llt.info() != Eigen::Success) return false;
  return llt.matrixLLT().diagonal().minCoeff() > 0.0;
}

void SymMatrix::require_pd(const char* what) const {
  try {
    (void)cholesky();
  } catch (const PdViolation& e) {
    throw PdViolation(std::string(what) + ": " + e.what(), e.pivot());
  }
}

SymMatrix SymMatrix::inverse() const {
  const Matrix l = cholesky();
  const Eigen::Index p = m_.rows();
  Matrix linv = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(p, p));
  return SymMatrix::symmetrized(linv.transpose() * linv);
}

double SymMatrix::log_det() const {
  const Matrix l = cholesky();
  return 2.0 * l.diagonal().array().log().sum();
}

double SymMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Matrix cholesky(const SymMatrix& theta) { return theta.cholesky(); }

// ---------------------------------------------------------------------------

Dataset::Dataset(Matrix values, std::optional<BoolMatrix> mask)
    : values_(std::move(values)), mask_(std::move(mask)) {
  if (values_.rows() < 2) throw DataError("dataset needs at least 2 observations");
  if (values_.cols() < 1) throw DataError("dataset needs at least 1 variable");
  if (!values_.allFinite()) throw DataError("dataset contains missing or non-finite values");
  if (mask_ && (mask_->rows() != values_.rows() || mask_->cols() != values_.cols())) {
    throw DataError("contamination mask shape does not match values");
  }
}

Dataset Dataset::rows(const std::vector<Eigen::Index>& idx) const {
  Matrix v(static_cast<Eigen::Index>(idx.size()), p());
  std::optional<BoolMatrix> m;
  if (mask_) m = BoolMatrix(v.rows(), p());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    v.row(static_cast<Eigen::Index>(r)) = values_.row(idx[r]);
    if (m) m->row(static_cast<Eigen::Index>(r)) = mask_->row(idx[r]);
  }
  return Dataset(std::move(v), std::move(m));
}

Dataset Dataset::without_row(Eigen::Index i) const {
  std::vector<Eigen::Index> idx;
  idx.reserve(static_cast<std::size_t>(n() - 1));
  for (Eigen::Index r = 0; r < n(); ++r) {
    if (r != i) idx.push_back(r);
  }
  return rows(idx);
}

bool GraphEstimate::has_edge(int j, int k) const {
  if (j > k) std::swap(j, k);
  return std::binary_search(edges.begin(), edges.end(), Edge{j, k});
}

// ---------------------------------------------------------------------------

std::string to_string(EStepKind k) {
  switch (k) {
    case EStepKind::classical: return "classical";
    case EStepKind::variational: return "variational";
    case EStepKind::monte_carlo: return "monte_carlo";
    case EStepKind::none: return "none";
  }
  return "none";
}

EStepKind estep_kind_from_string(const std::string& s) {
  if (s == "classical") return EStepKind::classical;
  if (s == "variational") return EStepKind::variational;
  if (s == "monte_carlo") return EStepKind::monte_carlo;
  if (s == "none") return EStepKind::none;
  throw UsageError("unknown E-step kind: " + s);
}

void FitConfig::validate() const {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw UsageError("rho must be a finite value >= 0");
  if (!(nu > 2.0)) throw UsageError("nu must exceed 2");
  if (!(em_tol > 0.0) || !(glasso_tol > 0.0) || !(glasso_inner_tol > 0.0)) {
    throw UsageError("tolerances must be positive");
  }
  if (em_max_iter < 0) throw UsageError("em_max_iter must be >= 0");
  if (glasso_max_sweeps < 1) throw UsageError("glasso_max_sweeps must be >= 1");
  if (gibbs_sweeps < 1 || gibbs_burn_in < 0) throw UsageError("invalid Gibbs budget");
  if (restarts < 1) throw UsageError("restarts must be >= 1");
  if (!(zero_threshold >= 0.0)) throw UsageError("zero_threshold must be >= 0");
}

// ---------------------------------------------------------------------------

double mahalanobis_factored(const Vector& y, const Vector& mu, const Matrix& chol_lower) {
  // (y-mu)^T L L^T (y-mu) = ||L^T (y-mu)||^2
  const Vector d = y - mu;
  return (chol_lower.transpose().triangularView<Eigen::Upper>() * d).squaredNorm();
}

double mahalanobis(const Vector& y, const Vector& mu, const SymMatrix& theta) {
  if (y.size() != theta.p() || mu.size() != theta.p()) {
    throw UsageError("mahalanobis: dimension mismatch");
  }
  return mahalanobis_factored(y, mu, theta.cholesky());
}

GraphEstimate graph_from_precision(const SymMatrix& theta, double eps) {
  GraphEstimate g;
  g.p = static_cast<int>(theta.p());
  g.zero_threshold = eps;
  for (int j = 0; j < g.p; ++j) {
    for (int k = j + 1; k < g.p; ++k) {
      if (std::abs(theta(j, k)) > eps) g.edges.emplace_back(j, k);
    }
  }
  return g;
}

double median(std::vector<double> v) {
  if (v.empty()) throw UsageError("median of empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

Vector column_medians(const Matrix& values) {
  Vector m(values.cols());
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    std::vector<double> col(values.col(j).data(), values.col(j).data() + values.rows());
    m(j) = median(std::move(col));
  }
  return m;
}

SymMatrix sample_covariance(const Matrix& values) {
  const Vector mean = values.colwise().mean();
  const Matrix centered = values.rowwise() - mean.transpose();
  return SymMatrix::symmetrized(centered.transpose() * centered / static_cast<double>(values.rows()));
}

}  // namespace robustggm
