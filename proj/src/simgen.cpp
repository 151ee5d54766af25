#include "robustggm/simgen.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace robustggm {

namespace {

constexpr double kMadConsistency = 1.482602218505602;
constexpr double kQnConsistency = 2.2219;
constexpr double kContaminationVariance = 0.2;
constexpr double kVarianceFloor = 1e-12;
constexpr double kPsdMargin = 1e-8;

void require_sampler_args(Eigen::Index n, const Vector& mu, const SymMatrix& theta) {
  if (n < 2) throw UsageError("sampler: n must be at least 2");
  if (mu.size() != theta.p()) throw UsageError("sampler: mu and theta dimensions differ");
}

// Lower factor L of theta; rows are mu + x with L^T x = z.
template <typename RowFn>
Dataset sample_rows(Eigen::Index n, const Vector& mu, const SymMatrix& theta, const Rng& rng,
                    RowFn&& row_fn) {
  require_sampler_args(n, mu, theta);
  const Matrix l = theta.cholesky();
  const auto lt = l.transpose().triangularView<Eigen::Upper>();
  const Eigen::Index p = theta.p();
  Matrix values(n, p);
  Vector z(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    Rng row = rng.derive({static_cast<std::uint64_t>(i)});
    for (Eigen::Index j = 0; j < p; ++j) z(j) = row.normal();
    Vector x = lt.solve(z);
    row_fn(x, row);
    values.row(i) = (mu + x).transpose();
  }
  return Dataset(std::move(values));
}

}  // namespace

std::string to_string(Generator g) {
  switch (g) {
    case Generator::gaussian: return "gaussian";
    case Generator::t_classical: return "t_classical";
    case Generator::t_alternative: return "t_alternative";
    case Generator::contaminated_gaussian: return "contaminated_gaussian";
  }
  return "gaussian";
}

Generator generator_from_string(const std::string& s) {
  if (s == "gaussian") return Generator::gaussian;
  if (s == "t_classical") return Generator::t_classical;
  if (s == "t_alternative") return Generator::t_alternative;
  if (s == "contaminated_gaussian") return Generator::contaminated_gaussian;
  throw UsageError("unknown generator '" + s + "'");
}

void SimSpec::validate() const {
  if (p < 1) throw UsageError("SimSpec: p must be at least 1");
  if (n < 2) throw UsageError("SimSpec: n must be at least 2");
  if (!(edge_prob >= 0.0) || !(2.0 * edge_prob < 1.0)) {
    throw UsageError("SimSpec: need 0 <= edge_prob and 2 * edge_prob < 1");
  }
  if (!(min_eigenvalue > 0.0) || !std::isfinite(min_eigenvalue)) {
    throw UsageError("SimSpec: min_eigenvalue must be positive");
  }
  if (!(contamination_frac >= 0.0 && contamination_frac < 1.0)) {
    throw UsageError("SimSpec: contamination_frac must lie in [0, 1)");
  }
  if ((generator == Generator::t_classical || generator == Generator::t_alternative) &&
      !(nu > 0.0 && std::isfinite(nu))) {
    throw UsageError("SimSpec: nu must be positive");
  }
}

nlohmann::json SimSpec::to_json() const {
  return nlohmann::json{{"p", p},
                        {"n", n},
                        {"edge_prob", edge_prob},
                        {"min_eigenvalue", min_eigenvalue},
                        {"generator", to_string(generator)},
                        {"nu", nu},
                        {"contamination_frac", contamination_frac},
                        {"seed", seed}};
}

SimSpec SimSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("SimSpec: expected a JSON object");
  SimSpec s;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "p") s.p = value.get<int>();
      else if (key == "n") s.n = value.get<int>();
      else if (key == "edge_prob") s.edge_prob = value.get<double>();
      else if (key == "min_eigenvalue") s.min_eigenvalue = value.get<double>();
      else if (key == "generator") s.generator = generator_from_string(value.get<std::string>());
      else if (key == "nu") s.nu = value.get<double>();
      else if (key == "contamination_frac") s.contamination_frac = value.get<double>();
      else if (key == "seed") s.seed = value.get<std::uint64_t>();
      else throw UsageError("SimSpec: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("SimSpec: ") + e.what());
  }
  s.validate();
  return s;
}

TruePrecision random_sparse_precision(const SimSpec& spec, Rng& rng) {
  spec.validate();
  const Eigen::Index p = spec.p;
  Matrix theta = Matrix::Zero(p, p);
  for (Eigen::Index j = 1; j < p; ++j) {
    for (Eigen::Index k = 0; k < j; ++k) {
      const double u = rng.uniform();
      const double v = u < spec.edge_prob ? -1.0 : (u < 2.0 * spec.edge_prob ? 1.0 : 0.0);
      theta(j, k) = v;
      theta(k, j) = v;
    }
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    theta(j, j) = 1.0 + static_cast<double>((theta.row(j).array() != 0.0).count());
  }

  TruePrecision out;
  out.dominant = SymMatrix(theta);
  out.graph = graph_from_precision(out.dominant, 0.0);
  // Subtracting d from the diagonal shifts every eigenvalue by -d.
  const double shift = out.dominant.min_eigenvalue() - spec.min_eigenvalue;
  if (shift > 0.0) {
    theta.diagonal().array() -= shift;
    out.diagonal_shift = shift;
  } else {
    std::ostringstream os;
    os << "smallest eigenvalue " << out.dominant.min_eigenvalue()
       << " already at or below target; matrix left unshifted";
    out.note = os.str();
  }
  out.theta = SymMatrix(theta);
  return out;
}

Dataset sample_mvn(Eigen::Index n, const Vector& mu, const SymMatrix& theta, const Rng& rng) {
  return sample_rows(n, mu, theta, rng, [](Vector&, Rng&) {});
}

Dataset sample_t_classical(Eigen::Index n, const Vector& mu, const SymMatrix& theta, double nu,
                           const Rng& rng) {
  if (!(nu > 0.0)) throw UsageError("sample_t_classical: nu must be positive");
  return sample_rows(n, mu, theta, rng, [nu](Vector& x, Rng& row) {
    x /= std::sqrt(row.gamma(0.5 * nu, 0.5 * nu));
  });
}

Dataset sample_t_alternative(Eigen::Index n, const Vector& mu, const SymMatrix& theta, double nu,
                             const Rng& rng) {
  if (!(nu > 0.0)) throw UsageError("sample_t_alternative: nu must be positive");
  return sample_rows(n, mu, theta, rng, [nu](Vector& x, Rng& row) {
    for (Eigen::Index j = 0; j < x.size(); ++j) x(j) /= std::sqrt(row.gamma(0.5 * nu, 0.5 * nu));
  });
}

double contamination_mean(const SymMatrix& theta) {
  return 2.5 * theta.inverse().mat().diagonal().maxCoeff();
}

Dataset contaminate(const Dataset& data, double frac, double mu_star, Rng& rng) {
  if (!(frac >= 0.0 && frac < 1.0)) throw UsageError("contaminate: fraction must lie in [0, 1)");
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  const auto cells = static_cast<std::size_t>(n * p);
  const auto count = static_cast<std::size_t>(std::llround(frac * static_cast<double>(cells)));

  // Partial Fisher-Yates: the first `count` slots are a uniform sample
  // without replacement.
  std::vector<std::size_t> order(cells);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t r = k + static_cast<std::size_t>(rng.uniform_index(cells - k));
    std::swap(order[k], order[r]);
  }
  Matrix values = data.values();
  BoolMatrix mask = data.contamination_mask().value_or(BoolMatrix::Constant(n, p, false));
  const double sd = std::sqrt(kContaminationVariance);
  for (std::size_t k = 0; k < count; ++k) {
    const auto i = static_cast<Eigen::Index>(order[k] / static_cast<std::size_t>(p));
    const auto j = static_cast<Eigen::Index>(order[k] % static_cast<std::size_t>(p));
    values(i, j) = mu_star + sd * rng.normal();
    mask(i, j) = true;
  }
  return Dataset(std::move(values), std::move(mask));
}

double mad_scale(const std::vector<double>& x) {
  const double m = median(x);
  std::vector<double> dev(x.size());
  std::transform(x.begin(), x.end(), dev.begin(), [m](double v) { return std::abs(v - m); });
  return kMadConsistency * median(std::move(dev));
}

double qn_scale(std::vector<double> x) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  std::sort(x.begin(), x.end());
  const std::size_t h = n / 2 + 1;
  const std::size_t k = h * (h - 1) / 2;
  // pairs i < j with x_j - x_i <= d
  auto count = [&x, n](double d) {
    std::size_t c = 0, i = 0;
    for (std::size_t j = 1; j < n; ++j) {
      while (x[j] - x[i] > d) ++i;
      c += j - i;
    }
    return c;
  };
  if (count(0.0) >= k) return 0.0;
  // count(lo) < k <= count(hi); the k-th difference is hi once they are adjacent
  double lo = 0.0, hi = x.back() - x.front();
  for (;;) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    (count(mid) >= k ? hi : lo) = mid;
  }
  static constexpr double small[] = {0.0, 0.0, 0.399, 0.994, 0.512, 0.844, 0.611, 0.857, 0.669, 0.872};
  const double dn = n <= 9 ? small[n]
                    : n % 2 == 1 ? static_cast<double>(n) / (n + 1.4)
                                 : static_cast<double>(n) / (n + 3.8);
  return kQnConsistency * dn * hi;
}

SymMatrix robust_covariance(const Dataset& y, std::vector<int>* degenerate) {
  const Eigen::Index n = y.n();
  const Eigen::Index p = y.p();
  if (n < 3) throw UsageError("robust_covariance: need n >= 3");
  const Matrix& v = y.values();

  Matrix z(n, p);  // columns divided by their Qn scale
  Vector scale(p);
  std::vector<double> col(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = v(i, j);
    scale(j) = qn_scale(col);
    if (scale(j) > 0.0) {
      z.col(j) = v.col(j) / scale(j);
    } else {
      z.col(j).setZero();
      if (degenerate != nullptr) degenerate->push_back(static_cast<int>(j));
    }
  }

  Matrix c = Matrix::Zero(p, p);
  std::vector<double> sum(static_cast<std::size_t>(n));
  std::vector<double> diff(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < p; ++j) {
    c(j, j) = scale(j) > 0.0 ? scale(j) * scale(j) : kVarianceFloor;
    if (scale(j) == 0.0) continue;
    for (Eigen::Index k = 0; k < j; ++k) {
      if (scale(k) == 0.0) continue;
      for (Eigen::Index i = 0; i < n; ++i) {
        sum[static_cast<std::size_t>(i)] = z(i, j) + z(i, k);
        diff[static_cast<std::size_t>(i)] = z(i, j) - z(i, k);
      }
      const double su = qn_scale(sum);
      const double sv = qn_scale(diff);
      const double den = su * su + sv * sv;
      const double r = den > 0.0 ? (su * su - sv * sv) / den : 0.0;
      c(j, k) = c(k, j) = r * scale(j) * scale(k);
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(c, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  c.diagonal().array() += std::max(0.0, -lmin) + kPsdMargin;
  return SymMatrix(c);
}

Simulation simulate(const SimSpec& spec) {
  spec.validate();
  const Rng root(spec.seed);
  Simulation sim;
  sim.spec = spec;
  Rng truth_rng = root.derive({1});
  sim.truth = random_sparse_precision(spec, truth_rng);
  const Vector mu = Vector::Zero(spec.p);
  const Rng data_rng = root.derive({2});
  switch (spec.generator) {
    case Generator::gaussian:
    case Generator::contaminated_gaussian:
      sim.data = sample_mvn(spec.n, mu, sim.truth.theta, data_rng);
      break;
    case Generator::t_classical:
      sim.data = sample_t_classical(spec.n, mu, sim.truth.theta, spec.nu, data_rng);
      break;
    case Generator::t_alternative:
      sim.data = sample_t_alternative(spec.n, mu, sim.truth.theta, spec.nu, data_rng);
      break;
  }
  if (spec.generator == Generator::contaminated_gaussian) {
    sim.mu_star = contamination_mean(sim.truth.theta);
    Rng c_rng = root.derive({3});
    sim.data = contaminate(sim.data, spec.contamination_frac, sim.mu_star, c_rng);
  }
  return sim;
}

}  // namespace robustggm
