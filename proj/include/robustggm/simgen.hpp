#pragma once

#include "robustggm/core.hpp"
#include "robustggm/rng.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace robustggm {

enum class Generator { gaussian, t_classical, t_alternative, contaminated_gaussian };

std::string to_string(Generator g);
Generator generator_from_string(const std::string& s);

struct SimSpec {
  int p = 25;
  int n = 50;
  double edge_prob = 0.01;  // probability of -1, and separately of +1
  double min_eigenvalue = 0.6;
  Generator generator = Generator::gaussian;
  double nu = 3.0;
  double contamination_frac = 0.02;
  std::uint64_t seed = 0;

  /// Throws UsageError on invalid settings.
  void validate() const;

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static SimSpec from_json(const nlohmann::json& j);
};

struct TruePrecision {
  SymMatrix theta;     // after the diagonal shift
  SymMatrix dominant;  // diagonally dominant matrix before the shift
  GraphEstimate graph;
  double diagonal_shift = 0.0;
  std::string note;  // set when no shift could reach the target
};

/// Random sparse precision: lower-triangular entries -1/0/+1, diagonal 1 + row
/// count, then a common diagonal subtraction so the smallest eigenvalue equals
/// spec.min_eigenvalue.
TruePrecision random_sparse_precision(const SimSpec& spec, Rng& rng);

// Row i of every sampler draws from rng.derive({i}), so growing n appends rows
// without changing earlier ones.

Dataset sample_mvn(Eigen::Index n, const Vector& mu, const SymMatrix& theta, const Rng& rng);

/// One Gamma(nu/2, nu/2) divisor per row.
Dataset sample_t_classical(Eigen::Index n, const Vector& mu, const SymMatrix& theta, double nu,
                           const Rng& rng);

/// p independent Gamma(nu/2, nu/2) divisors per row.
Dataset sample_t_alternative(Eigen::Index n, const Vector& mu, const SymMatrix& theta, double nu,
                             const Rng& rng);

/// Replaces round(frac * n * p) distinct cells with N(mu_star, 0.2) draws and
/// records them in the mask.
Dataset contaminate(const Dataset& data, double frac, double mu_star, Rng& rng);

/// 2.5 times the largest diagonal element of theta^{-1}.
double contamination_mean(const SymMatrix& theta);

/// Rousseeuw-Croux Qn scale: the first quartile of the pairwise distances,
/// Gaussian-calibrated with the small-sample factor. Exact order statistic.
double qn_scale(std::vector<double> x);

/// Pairwise Gnanadesikan-Kettenring correlations r = (Qn(u)^2 - Qn(v)^2) /
/// (Qn(u)^2 + Qn(v)^2), u and v the sum and difference of the Qn-standardized
/// columns, times the Qn scales; then shifted on the diagonal by
/// max(0, -lambda_min) + 1e-8.
/// Indices of columns with zero robust scale are appended to `degenerate`.
SymMatrix robust_covariance(const Dataset& y, std::vector<int>* degenerate = nullptr);

/// MAD scale 1.4826 * median |x - median(x)|.
double mad_scale(const std::vector<double>& x);

struct Simulation {
  SimSpec spec;
  TruePrecision truth;
  Dataset data;
  double mu_star = 0.0;  // contamination mean (contaminated_gaussian only)
};

/// Full simulation from spec.seed: truth, then data, then contamination, each
/// from its own derived stream.
Simulation simulate(const SimSpec& spec);

}  // namespace robustggm
