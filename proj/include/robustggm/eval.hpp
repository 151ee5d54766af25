#pragma once

#include "robustggm/core.hpp"
#include "robustggm/rng.hpp"
#include "robustggm/simgen.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace robustggm {

/// A study lost more than 10% of its units (folds, resamples, replicates).
class StudyFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Methods
// ---------------------------------------------------------------------------

enum class Method { glasso, tlasso, tstar_var, tstar_mc, robust_glasso };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct MethodOptions {
  int threads = 1;  // Gibbs E-step workers for tstar_mc
};

/// Fits one method at config.rho. estep_kind is set from the method.
/// glasso and robust_glasso run the glasso on S or the robust covariance.
FitResult fit_method(Method m, const Dataset& y, const FitConfig& config,
                     const FitResult* warm = nullptr, const MethodOptions& options = {});

/// Matrix the method's penalty acts on at its starting point: S for glasso,
/// the robust covariance for robust_glasso, and the E-step weighted scatter at
/// the initial estimate for the t methods. Used to size rho grids.
SymMatrix method_input_scatter(Method m, const Dataset& y, const FitConfig& config);

/// count values log-spaced from hi down to lo, returned ascending.
std::vector<double> log_grid(double lo, double hi, int count);

/// Grid from rho_max = max |off-diagonal| of the method's scatter down to
/// ratio * rho_max. For the EM methods rho_max is raised by factors of 1.25
/// until the fit at rho_max has no edges.
std::vector<double> adaptive_rho_grid(Method m, const Dataset& y, const FitConfig& config,
                                      int count = 30, double ratio = 0.01);

// ---------------------------------------------------------------------------
// Confusion counts and ROC
// ---------------------------------------------------------------------------

struct Confusion {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
};

/// Counts over unordered pairs j < k; an estimated edge is |theta_jk| > eps.
Confusion edge_confusion(const SymMatrix& theta_hat, const GraphEstimate& truth, double eps);
Confusion edge_confusion(const GraphEstimate& estimate, const GraphEstimate& truth);

struct RocPoint {
  double rho = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
  double tp = 0.0;  // averaged curves hold mean counts
  double fp = 0.0;
  double tn = 0.0;
  double fn = 0.0;
};

struct RocCurve {
  std::string method;
  int replicate = -1;  // -1 for averaged curves
  std::vector<RocPoint> points;  // rho ascending
};

/// TPR at a given FPR on the monotone envelope of the curve anchored at
/// (0,0) and (1,1), linearly interpolated.
double tpr_at_fpr(const RocCurve& curve, double fpr);

/// Area under the interpolated curve on [0, max_fpr].
double partial_auc(const RocCurve& curve, double max_fpr);

struct RocFailure {
  std::string method;
  int replicate = 0;
  double rho = 0.0;
  std::string message;
};

struct MethodSummary {
  std::string method;
  std::vector<double> fpr_grid;   // vertical averaging abscissae
  std::vector<double> mean_tpr;   // mean TPR at each fpr_grid value
  double partial_auc = 0.0;       // mean over replicates, FPR <= pauc_max_fpr
  int replicates_used = 0;
  std::size_t monotonicity_violations = 0;
};

struct RocOptions {
  std::vector<Method> methods{Method::glasso, Method::tlasso, Method::tstar_var,
                              Method::robust_glasso};
  int replicates = 25;
  int grid_points = 30;
  double grid_ratio = 0.01;
  std::vector<double> rho_grid;  // shared fixed grid; empty selects adaptive grids
  FitConfig config;              // everything but rho
  double pauc_max_fpr = 0.2;
  int fpr_grid_points = 101;
  int threads = 1;
};

struct RocStudy {
  std::vector<RocCurve> averaged;    // pointwise over the grid index, per method
  std::vector<RocCurve> replicates;  // every successful replicate path
  std::vector<MethodSummary> summaries;
  std::vector<RocFailure> failures;
  std::size_t attempted_fits = 0;
};

/// Replicate r simulates from spec with seed derived from (spec.seed, r). Each
/// method walks its rho path from sparse to dense with warm starts. A replicate
/// path with a failed fit is excluded from the averages and listed in failures.
RocStudy roc_study(const SimSpec& spec, const RocOptions& options);

const MethodSummary& summary_for(const RocStudy& study, Method m);

// ---------------------------------------------------------------------------
// Cross-validation and bootstrap
// ---------------------------------------------------------------------------

struct CvOptions {
  /// 0 selects leave-one-out; otherwise each fold holds out this fraction.
  double fold_fraction = 0.0;
  int threads = 1;
};

struct CvResult {
  std::vector<double> rho_grid;
  std::vector<double> mspe;
  double best_rho = 0.0;
  std::size_t best_index = 0;
  int folds = 0;
  int failed_folds = 0;
  std::vector<std::string> warnings;
};

/// E[1/sqrt(tau)] for tau ~ Gamma(nu/2, nu/2).
double prior_inverse_sqrt_tau(double nu);

/// Predicts every coordinate of y from the others: latent normals of the other
/// coordinates from the mean-field E-step, the Gaussian conditional mean for
/// the held-out one, scaled by the prior E[1/sqrt(tau)]. Returns the p-vector
/// of predictions.
Vector predict_coordinates(const Vector& y, const Vector& mu, const SymMatrix& theta, double nu);

/// Mean squared prediction error of predict_coordinates over all cells.
double prediction_mse(const Dataset& test, const Vector& mu, const SymMatrix& theta, double nu);

/// Cross-validated MSPE for the t* lasso (config.estep_kind variational or
/// monte_carlo). Ties go to the larger rho.
CvResult loo_cross_validation(const Dataset& y, const std::vector<double>& rho_grid,
                              const FitConfig& config, const CvOptions& options = {});

struct StabilityReport {
  int B = 0;
  int failures = 0;
  double threshold = 0.0;
  std::map<Edge, double> edge_freq;
  GraphEstimate stable_edges;
};

/// B row-resamples with replacement (stream b = rng.derive({b})), refit at a
/// fixed rho with the given method; stable edges have frequency > threshold.
StabilityReport bootstrap_stability(const Dataset& y, double rho, int B, double threshold,
                                    const FitConfig& config, const Rng& rng,
                                    Method method = Method::tstar_var, int threads = 1);

// ---------------------------------------------------------------------------
// Conditional correlation probe and the inverse-weight identity
// ---------------------------------------------------------------------------

struct WindowCorrelation {
  double x = 0.0;
  double corr = 0.0;
  std::size_t count = 0;
  bool missing = false;  // window starved before reaching the target
};

/// Draws from the generator (3 variables) until every window
/// [x, x + width) of Y3 holds target_count draws or max_draws is spent, and
/// returns the Pearson correlation of (Y1, Y2) in each window.
std::vector<WindowCorrelation> windowed_conditional_correlation(
    Generator generator, const SymMatrix& theta, double nu, double window_width,
    const std::vector<double>& x_values, std::size_t target_count, const Rng& rng,
    std::uint64_t max_draws = 200'000'000);

struct InverseWeightCheck {
  double sample_variance = 0.0;
  double predicted = 0.0;  // 2p / (nu + p)^2
};

/// Variance of (nu + delta) / (nu + p) for delta = squared Mahalanobis
/// distances of Gaussian draws at the true parameters.
InverseWeightCheck inverse_weight_variance(const SymMatrix& theta, double nu, std::size_t draws,
                                           const Rng& rng);

}  // namespace robustggm
