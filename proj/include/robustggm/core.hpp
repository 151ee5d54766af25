#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace robustggm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Raised whenever a matrix that must be positive definite is not.
/// `pivot` is the 1-based Cholesky pivot at which factorization failed
/// (0 when unknown).
class PdViolation : public std::runtime_error {
 public:
  PdViolation(const std::string& what, int pivot)
      : std::runtime_error(what), pivot_(pivot) {}
  int pivot() const noexcept { return pivot_; }

 private:
  int pivot_;
};

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Invalid arguments or configuration (maps to CLI exit code 2).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input data (missing values, ragged rows, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// SymMatrix
// ---------------------------------------------------------------------------

/// Dense symmetric p x p matrix. Symmetry is exact: entries(j,k) == entries(k,j)
/// bit-for-bit. Holds S, Sigma, Psi and Theta.
class SymMatrix {
 public:
  SymMatrix() = default;

  /// Throws UsageError unless `m` is square, non-empty and exactly symmetric.
  explicit SymMatrix(Matrix m);

  /// Averages `m` with its transpose.
  static SymMatrix symmetrized(const Matrix& m);
  static SymMatrix identity(Eigen::Index p);
  static SymMatrix diagonal(const Vector& d);

  Eigen::Index p() const noexcept { return m_.rows(); }
  double operator()(Eigen::Index j, Eigen::Index k) const { return m_(j, k); }
  const Matrix& mat() const noexcept { return m_; }

  /// Lower Cholesky factor; throws PdViolation carrying the failing pivot.
  Matrix cholesky() const;
  bool is_pd() const;
  void require_pd(const char* what = "matrix") const;

  /// Inverse via Cholesky (requires PD).
  SymMatrix inverse() const;
  double log_det() const;
  double min_eigenvalue() const;

  /// Sum of absolute values of all entries, diagonal included.
  double l1_norm() const { return m_.cwiseAbs().sum(); }

 private:
  Matrix m_;
};

/// Lower-triangular Cholesky factor L with L L^T = theta.
Matrix cholesky(const SymMatrix& theta);

// ---------------------------------------------------------------------------
// Dataset / graphs
// ---------------------------------------------------------------------------

/// n x p observations, optionally with the simulation contamination mask.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(Matrix values, std::optional<BoolMatrix> mask = std::nullopt);

  Eigen::Index n() const noexcept { return values_.rows(); }
  Eigen::Index p() const noexcept { return values_.cols(); }
  const Matrix& values() const noexcept { return values_; }
  const std::optional<BoolMatrix>& contamination_mask() const noexcept { return mask_; }

  Dataset rows(const std::vector<Eigen::Index>& idx) const;
  Dataset without_row(Eigen::Index i) const;

 private:
  Matrix values_;
  std::optional<BoolMatrix> mask_;
};

using Edge = std::pair<int, int>;  // 0-based, first < second

struct GraphEstimate {
  int p = 0;
  std::vector<Edge> edges;  // sorted lexicographically
  double zero_threshold = 0.0;

  bool has_edge(int j, int k) const;
  std::size_t edge_count() const { return edges.size(); }
};

inline constexpr double kDefaultZeroThreshold = 1e-6;

// ---------------------------------------------------------------------------
// Fit configuration and results
// ---------------------------------------------------------------------------

enum class EStepKind { classical, variational, monte_carlo, none };

std::string to_string(EStepKind k);
EStepKind estep_kind_from_string(const std::string& s);

struct FitConfig {
  double rho = 0.1;
  double nu = 3.0;
  double em_tol = 1e-5;
  int em_max_iter = 200;
  double glasso_tol = 1e-4;
  double glasso_inner_tol = 1e-6;
  int glasso_max_sweeps = 10000;
  int gibbs_sweeps = 200;
  int gibbs_burn_in = 50;
  int restarts = 1;
  std::uint64_t seed = 0;
  EStepKind estep_kind = EStepKind::classical;
  double zero_threshold = kDefaultZeroThreshold;

  /// Throws UsageError on invalid settings.
  void validate() const;
};

/// Solver state; also used to warm start along rho paths and inside EM.
struct GlassoState {
  Matrix w;     // current Sigma estimate
  Matrix beta;  // (p-1) x p, column j holds beta* of node j
  int sweep_count = 0;
  double last_mean_delta = 0.0;
};

struct FitResult {
  Vector mu_hat;
  SymMatrix theta_hat;
  SymMatrix sigma_hat;       // theta_hat^{-1}
  Matrix weights;            // n x p matrix of E[tau]
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  GraphEstimate graph;
  GlassoState solver_state;  // last M-step solver state, for warm starts
};

// ---------------------------------------------------------------------------
// Primitive operations
// ---------------------------------------------------------------------------

/// sgn(x) * max(|x| - t, 0).
inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

/// (y - mu)^T Theta (y - mu), computed from the Cholesky factor of Theta.
double mahalanobis(const Vector& y, const Vector& mu, const SymMatrix& theta);

/// Same quadratic form given a precomputed lower factor L of Theta.
double mahalanobis_factored(const Vector& y, const Vector& mu, const Matrix& chol_lower);

GraphEstimate graph_from_precision(const SymMatrix& theta, double eps = kDefaultZeroThreshold);

/// Coordinatewise median of the columns of `values`.
Vector column_medians(const Matrix& values);

/// Sample covariance (1/n normalisation) around the sample mean.
SymMatrix sample_covariance(const Matrix& values);

double median(std::vector<double> v);

}  // namespace robustggm
