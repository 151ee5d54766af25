#include "robustggm/eval.hpp"

#include "robustggm/glasso.hpp"
#include "robustggm/parallel.hpp"
#include "robustggm/tlasso.hpp"
#include "robustggm/tstar.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace robustggm {

// ---------------------------------------------------------------------------
// Methods
// ---------------------------------------------------------------------------

std::string to_string(Method m) {
  switch (m) {
    case Method::glasso: return "glasso";
    case Method::tlasso: return "tlasso";
    case Method::tstar_var: return "tstar-var";
    case Method::tstar_mc: return "tstar-mc";
    case Method::robust_glasso: return "robust-glasso";
  }
  return "glasso";
}

Method method_from_string(const std::string& s) {
  if (s == "glasso") return Method::glasso;
  if (s == "tlasso") return Method::tlasso;
  if (s == "tstar-var") return Method::tstar_var;
  if (s == "tstar-mc") return Method::tstar_mc;
  if (s == "robust-glasso") return Method::robust_glasso;
  throw UsageError("unknown method '" + s + "'");
}

namespace {

FitResult glasso_as_fit(const Dataset& y, const SymMatrix& s, Vector mu, const FitConfig& config,
                        const FitResult* warm) {
  GlassoOptions opts = glasso_options(config);
  const GlassoState* state = warm != nullptr && warm->solver_state.w.rows() == s.p()
                                 ? &warm->solver_state
                                 : nullptr;
  GlassoResult g = glasso_fit(s, config.rho, opts, state);
  FitResult r;
  r.mu_hat = std::move(mu);
  r.sigma_hat = g.theta_hat.inverse();
  r.weights = Matrix::Ones(y.n(), y.p());
  r.objective_trace.push_back(0.5 * static_cast<double>(y.n()) *
                              penalized_gaussian_objective(g.theta_hat, s, config.rho));
  r.iterations = g.state.sweep_count;
  r.converged = true;
  r.graph = graph_from_precision(g.theta_hat, config.zero_threshold);
  r.theta_hat = std::move(g.theta_hat);
  r.solver_state = std::move(g.state);
  return r;
}

FitConfig with_estep(const FitConfig& config, Method m) {
  FitConfig c = config;
  switch (m) {
    case Method::tlasso: c.estep_kind = EStepKind::classical; break;
    case Method::tstar_var: c.estep_kind = EStepKind::variational; break;
    case Method::tstar_mc: c.estep_kind = EStepKind::monte_carlo; break;
    default: c.estep_kind = EStepKind::none; break;
  }
  return c;
}

}  // namespace

FitResult fit_method(Method m, const Dataset& y, const FitConfig& config, const FitResult* warm,
                     const MethodOptions& options) {
  const FitConfig c = with_estep(config, m);
  c.validate();
  switch (m) {
    case Method::glasso:
      return glasso_as_fit(y, sample_covariance(y.values()), y.values().colwise().mean(), c, warm);
    case Method::robust_glasso:
      return glasso_as_fit(y, robust_covariance(y), column_medians(y.values()), c, warm);
    case Method::tlasso:
      return tlasso_fit(y, c, warm);
    case Method::tstar_var:
    case Method::tstar_mc: {
      TstarFitOptions o;
      o.threads = options.threads;
      return tstar_fit(y, c, warm, o);
    }
  }
  throw UsageError("fit_method: unknown method");
}

SymMatrix method_input_scatter(Method m, const Dataset& y, const FitConfig& config) {
  const SymMatrix s = sample_covariance(y.values());
  if (m == Method::glasso) return s;
  if (m == Method::robust_glasso) return robust_covariance(y);

  // Starting point of the EM fits at a penalty large enough to give a
  // diagonal Theta, then one E-step.
  double off = 0.0;
  for (Eigen::Index j = 0; j < s.p(); ++j)
    for (Eigen::Index k = 0; k < j; ++k) off = std::max(off, std::abs(s(j, k)));
  const Vector mu = column_medians(y.values());
  const SymMatrix theta = SymMatrix::diagonal((s.mat().diagonal().array() + off).inverse().matrix());
  if (m == Method::tlasso) {
    const Vector tau = e_step_classical(y, mu, theta, config.nu).tau;
    return m_step_classical(y, tau, off, glasso_options(config)).scatter;
  }
  std::vector<SqrtTauMoments> moments;
  moments.reserve(static_cast<std::size_t>(y.n()));
  for (Eigen::Index i = 0; i < y.n(); ++i) {
    moments.push_back(variational_e_step(y.values().row(i).transpose(), mu, theta, config.nu));
  }
  return tstar_m_step(y, moments, off, glasso_options(config)).scatter;
}

std::vector<double> log_grid(double lo, double hi, int count) {
  if (count < 1 || !(lo > 0.0) || !(hi >= lo)) throw UsageError("log_grid: need 0 < lo <= hi, count >= 1");
  std::vector<double> g(static_cast<std::size_t>(count));
  if (count == 1) {
    g[0] = hi;
    return g;
  }
  const double step = std::log(hi / lo) / (count - 1);
  for (int k = 0; k < count; ++k) g[static_cast<std::size_t>(k)] = lo * std::exp(step * k);
  g.front() = lo;
  g.back() = hi;
  return g;
}

std::vector<double> adaptive_rho_grid(Method m, const Dataset& y, const FitConfig& config,
                                      int count, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("adaptive_rho_grid: ratio must lie in (0,1)");
  const SymMatrix s = method_input_scatter(m, y, config);
  double rho_max = 0.0;
  for (Eigen::Index j = 0; j < s.p(); ++j)
    for (Eigen::Index k = 0; k < j; ++k) rho_max = std::max(rho_max, std::abs(s(j, k)));
  if (!(rho_max > 0.0)) rho_max = 1.0;
  if (m != Method::glasso && m != Method::robust_glasso) {
    // EM reweighting can revive edges the starting scatter rules out.
    FitConfig c = config;
    for (int step = 0; step < 30; ++step) {
      c.rho = rho_max;
      if (fit_method(m, y, c).graph.edge_count() == 0) break;
      rho_max *= 1.25;
    }
  }
  return log_grid(ratio * rho_max, rho_max, count);
}

// ---------------------------------------------------------------------------
// Confusion and ROC
// ---------------------------------------------------------------------------

Confusion edge_confusion(const GraphEstimate& estimate, const GraphEstimate& truth) {
  if (estimate.p != truth.p) throw UsageError("edge_confusion: dimension mismatch");
  const long p = truth.p;
  const long pairs = p * (p - 1) / 2;
  Confusion c;
  for (const Edge& e : estimate.edges) {
    if (truth.has_edge(e.first, e.second)) ++c.tp;
    else ++c.fp;
  }
  c.fn = static_cast<long>(truth.edge_count()) - c.tp;
  c.tn = pairs - c.tp - c.fp - c.fn;
  return c;
}

Confusion edge_confusion(const SymMatrix& theta_hat, const GraphEstimate& truth, double eps) {
  return edge_confusion(graph_from_precision(theta_hat, eps), truth);
}

namespace {

// Unique FPR abscissae with the running-max TPR, anchored at (0,0) and (1,1).
std::vector<std::pair<double, double>> envelope(const RocCurve& curve) {
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}, {1.0, 1.0}};
  for (const RocPoint& q : curve.points) pts.emplace_back(q.fpr, q.tpr);
  std::sort(pts.begin(), pts.end());
  std::vector<std::pair<double, double>> out;
  double best = 0.0;
  for (const auto& [f, t] : pts) {
    best = std::max(best, t);
    if (!out.empty() && out.back().first == f) out.back().second = best;
    else out.emplace_back(f, best);
  }
  return out;
}

}  // namespace

double tpr_at_fpr(const RocCurve& curve, double fpr) {
  const auto env = envelope(curve);
  fpr = std::clamp(fpr, 0.0, 1.0);
  for (std::size_t k = 1; k < env.size(); ++k) {
    if (env[k].first >= fpr) {
      const auto& [f0, t0] = env[k - 1];
      const auto& [f1, t1] = env[k];
      if (env[k].first == fpr) return t1;
      return t0 + (t1 - t0) * (fpr - f0) / (f1 - f0);
    }
  }
  return 1.0;
}

double partial_auc(const RocCurve& curve, double max_fpr) {
  const auto env = envelope(curve);
  max_fpr = std::clamp(max_fpr, 0.0, 1.0);
  double area = 0.0;
  for (std::size_t k = 1; k < env.size(); ++k) {
    const auto& [f0, t0] = env[k - 1];
    const auto& [f1, t1] = env[k];
    if (f0 >= max_fpr) break;
    const double hi = std::min(f1, max_fpr);
    const double t_hi = t0 + (t1 - t0) * (hi - f0) / (f1 - f0);
    area += 0.5 * (t0 + t_hi) * (hi - f0);
  }
  return area;
}

namespace {

struct PathOutcome {
  RocCurve curve;
  bool ok = true;
  RocFailure failure;
  std::size_t fits = 0;
  std::size_t violations = 0;
};

PathOutcome run_path(Method m, const Dataset& y, const GraphEstimate& truth,
                     const std::vector<double>& grid, const FitConfig& config, int replicate) {
  PathOutcome out;
  out.curve.method = to_string(m);
  out.curve.replicate = replicate;
  out.curve.points.resize(grid.size());
  const double pos = static_cast<double>(truth.edge_count());
  const double neg = static_cast<double>(truth.p) * (truth.p - 1) / 2.0 - pos;
  FitResult prev;
  bool have_prev = false;
  // sparse to dense
  for (std::size_t k = grid.size(); k-- > 0;) {
    FitConfig c = config;
    c.rho = grid[k];
    ++out.fits;
    try {
      FitResult f = fit_method(m, y, c, have_prev ? &prev : nullptr);
      const Confusion cf = edge_confusion(f.graph, truth);
      RocPoint& q = out.curve.points[k];
      q.rho = grid[k];
      q.tp = static_cast<double>(cf.tp);
      q.fp = static_cast<double>(cf.fp);
      q.tn = static_cast<double>(cf.tn);
      q.fn = static_cast<double>(cf.fn);
      q.tpr = pos > 0.0 ? q.tp / pos : 0.0;
      q.fpr = neg > 0.0 ? q.fp / neg : 0.0;
      prev = std::move(f);
      have_prev = true;
    } catch (const std::exception& e) {
      out.ok = false;
      out.failure = RocFailure{to_string(m), replicate, grid[k], e.what()};
      return out;
    }
  }
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const RocPoint& a = out.curve.points[k - 1];
    const RocPoint& b = out.curve.points[k];
    if (b.tpr > a.tpr || b.fpr > a.fpr) ++out.violations;
  }
  return out;
}

}  // namespace

RocStudy roc_study(const SimSpec& spec, const RocOptions& options) {
  spec.validate();
  if (options.replicates < 1) throw UsageError("roc_study: replicates must be at least 1");
  if (options.methods.empty()) throw UsageError("roc_study: no methods");
  if (!std::is_sorted(options.rho_grid.begin(), options.rho_grid.end())) {
    throw UsageError("roc_study: rho grid must be ascending");
  }
  if (options.rho_grid.empty() && options.grid_points < 2) {
    throw UsageError("roc_study: grid_points must be at least 2");
  }
  const std::size_t n_methods = options.methods.size();
  const std::size_t units = static_cast<std::size_t>(options.replicates) * n_methods;
  std::vector<PathOutcome> outcomes(units);
  const Rng root(spec.seed);

  // Simulations are shared by the methods of a replicate.
  std::vector<Simulation> sims(static_cast<std::size_t>(options.replicates));
  parallel_for(sims.size(), options.threads, [&](std::size_t r) {
    SimSpec s = spec;
    Rng seeder = root.derive({0x726f63ULL, static_cast<std::uint64_t>(r)});
    s.seed = seeder();
    sims[r] = simulate(s);
  });

  parallel_for(units, options.threads, [&](std::size_t u) {
    const std::size_t r = u / n_methods;
    const Method m = options.methods[u % n_methods];
    FitConfig c = options.config;
    c.seed = sims[r].spec.seed;
    std::vector<double> grid = options.rho_grid;
    PathOutcome& out = outcomes[u];
    try {
      if (grid.empty()) {
        grid = adaptive_rho_grid(m, sims[r].data, c, options.grid_points, options.grid_ratio);
      }
    } catch (const std::exception& e) {
      out.ok = false;
      out.failure = RocFailure{to_string(m), static_cast<int>(r), 0.0, e.what()};
      return;
    }
    out = run_path(m, sims[r].data, sims[r].truth.graph, grid, c, static_cast<int>(r));
  });

  RocStudy study;
  for (std::size_t mi = 0; mi < n_methods; ++mi) {
    const std::string name = to_string(options.methods[mi]);
    MethodSummary summary;
    summary.method = name;
    summary.fpr_grid.resize(static_cast<std::size_t>(options.fpr_grid_points));
    for (int k = 0; k < options.fpr_grid_points; ++k) {
      summary.fpr_grid[static_cast<std::size_t>(k)] =
          options.fpr_grid_points == 1 ? 0.0 : static_cast<double>(k) / (options.fpr_grid_points - 1);
    }
    summary.mean_tpr.assign(summary.fpr_grid.size(), 0.0);
    RocCurve avg;
    avg.method = name;
    for (int r = 0; r < options.replicates; ++r) {
      PathOutcome& o = outcomes[static_cast<std::size_t>(r) * n_methods + mi];
      study.attempted_fits += o.fits;
      if (!o.ok) {
        study.failures.push_back(o.failure);
        continue;
      }
      summary.monotonicity_violations += o.violations;
      ++summary.replicates_used;
      summary.partial_auc += partial_auc(o.curve, options.pauc_max_fpr);
      for (std::size_t k = 0; k < summary.fpr_grid.size(); ++k) {
        summary.mean_tpr[k] += tpr_at_fpr(o.curve, summary.fpr_grid[k]);
      }
      if (avg.points.empty()) avg.points.assign(o.curve.points.size(), RocPoint{});
      for (std::size_t k = 0; k < o.curve.points.size(); ++k) {
        RocPoint& a = avg.points[k];
        const RocPoint& q = o.curve.points[k];
        a.rho += q.rho;
        a.fpr += q.fpr;
        a.tpr += q.tpr;
        a.tp += q.tp;
        a.fp += q.fp;
        a.tn += q.tn;
        a.fn += q.fn;
      }
      study.replicates.push_back(std::move(o.curve));
    }
    if (summary.replicates_used > 0) {
      const double inv = 1.0 / summary.replicates_used;
      summary.partial_auc *= inv;
      for (double& t : summary.mean_tpr) t *= inv;
      for (RocPoint& a : avg.points) {
        a.rho *= inv;
        a.fpr *= inv;
        a.tpr *= inv;
        a.tp *= inv;
        a.fp *= inv;
        a.tn *= inv;
        a.fn *= inv;
      }
    }
    study.averaged.push_back(std::move(avg));
    study.summaries.push_back(std::move(summary));
  }
  return study;
}

const MethodSummary& summary_for(const RocStudy& study, Method m) {
  const std::string name = to_string(m);
  for (const auto& s : study.summaries) {
    if (s.method == name) return s;
  }
  throw UsageError("summary_for: method " + name + " not in study");
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

double prior_inverse_sqrt_tau(double nu) {
  if (!(nu > 1.0)) throw UsageError("prior_inverse_sqrt_tau: nu must exceed 1");
  return std::exp(std::lgamma(0.5 * (nu - 1.0)) - std::lgamma(0.5 * nu)) * std::sqrt(0.5 * nu);
}

Vector predict_coordinates(const Vector& y, const Vector& mu, const SymMatrix& theta, double nu) {
  const Eigen::Index p = theta.p();
  const SqrtTauMoments m = variational_e_step(y, mu, theta, nu);
  const Vector x = m.e_sqrt_tau.cwiseProduct(y - mu);
  const double scale = prior_inverse_sqrt_tau(nu);
  Vector pred(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double cross = theta.mat().row(j).dot(x) - theta(j, j) * x(j);
    pred(j) = mu(j) - cross / theta(j, j) * scale;
  }
  return pred;
}

namespace {

double prediction_sse(const Matrix& rows, const Vector& mu, const SymMatrix& theta, double nu) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const Vector y = rows.row(i).transpose();
    total += (predict_coordinates(y, mu, theta, nu) - y).squaredNorm();
  }
  return total;
}

}  // namespace

double prediction_mse(const Dataset& test, const Vector& mu, const SymMatrix& theta, double nu) {
  return prediction_sse(test.values(), mu, theta, nu) / static_cast<double>(test.n() * test.p());
}

CvResult loo_cross_validation(const Dataset& y, const std::vector<double>& rho_grid,
                              const FitConfig& config, const CvOptions& options) {
  config.validate();
  if (config.estep_kind != EStepKind::variational && config.estep_kind != EStepKind::monte_carlo) {
    throw UsageError("loo_cross_validation: estep_kind must be variational or monte_carlo");
  }
  if (y.n() < 3) throw UsageError("loo_cross_validation: need n >= 3");
  if (rho_grid.empty()) throw UsageError("loo_cross_validation: empty rho grid");
  if (!(options.fold_fraction >= 0.0 && options.fold_fraction < 1.0)) {
    throw UsageError("loo_cross_validation: fold_fraction must lie in [0, 1)");
  }
  std::vector<double> grid = rho_grid;
  std::sort(grid.begin(), grid.end());

  // Canonical (lexicographic) row order makes the result independent of the
  // order of the input rows.
  const Eigen::Index n = y.n();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const Matrix& v = y.values();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < y.p(); ++j) {
      if (v(a, j) != v(b, j)) return v(a, j) < v(b, j);
    }
    return false;
  });
  const Dataset canon = y.rows(order);

  const Eigen::Index held =
      options.fold_fraction == 0.0
          ? 1
          : std::max<Eigen::Index>(1, std::llround(options.fold_fraction * static_cast<double>(n)));
  const Eigen::Index folds = (n + held - 1) / held;

  struct FoldOut {
    std::vector<double> sse;  // per rho
    bool ok = true;
    std::string message;
  };
  std::vector<FoldOut> out(static_cast<std::size_t>(folds));
  const Rng root(config.seed);
  parallel_for(static_cast<std::size_t>(folds), options.threads, [&](std::size_t f) {
    const Eigen::Index lo = static_cast<Eigen::Index>(f) * held;
    const Eigen::Index hi = std::min(n, lo + held);
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
    for (Eigen::Index i = 0; i < n; ++i) (i >= lo && i < hi ? test : train).push_back(i);
    FoldOut& fo = out[f];
    fo.sse.assign(grid.size(), 0.0);
    try {
      const Dataset tr = canon.rows(train);
      // a single held-out row is not a valid Dataset, so score the raw rows
      Matrix te(static_cast<Eigen::Index>(test.size()), y.p());
      for (std::size_t t = 0; t < test.size(); ++t) te.row(static_cast<Eigen::Index>(t)) = canon.values().row(test[t]);
      FitConfig c = config;
      Rng seeder = root.derive({0x6376ULL, static_cast<std::uint64_t>(f)});
      c.seed = seeder();
      FitResult prev;
      bool have_prev = false;
      for (std::size_t k = grid.size(); k-- > 0;) {
        c.rho = grid[k];
        FitResult fit = tstar_fit(tr, c, have_prev ? &prev : nullptr);
        fo.sse[k] = prediction_sse(te, fit.mu_hat, fit.theta_hat, c.nu);
        prev = std::move(fit);
        have_prev = true;
      }
    } catch (const std::exception& e) {
      fo.ok = false;
      fo.message = e.what();
    }
  });

  CvResult r;
  r.rho_grid = grid;
  r.folds = static_cast<int>(folds);
  r.mspe.assign(grid.size(), 0.0);
  double cells = 0.0;
  for (std::size_t f = 0; f < out.size(); ++f) {
    if (!out[f].ok) {
      ++r.failed_folds;
      r.warnings.push_back("fold " + std::to_string(f) + " skipped: " + out[f].message);
      continue;
    }
    const Eigen::Index lo = static_cast<Eigen::Index>(f) * held;
    cells += static_cast<double>((std::min(n, lo + held) - lo) * y.p());
    for (std::size_t k = 0; k < grid.size(); ++k) r.mspe[k] += out[f].sse[k];
  }
  if (r.failed_folds * 10 > r.folds || cells == 0.0) {
    throw StudyFailure("loo_cross_validation: " + std::to_string(r.failed_folds) + " of " +
                       std::to_string(r.folds) + " folds failed");
  }
  for (double& m : r.mspe) m /= cells;
  r.best_index = 0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (r.mspe[k] <= r.mspe[r.best_index]) r.best_index = k;  // ties to larger rho
  }
  r.best_rho = grid[r.best_index];
  return r;
}

// ---------------------------------------------------------------------------
// Bootstrap
// ---------------------------------------------------------------------------

StabilityReport bootstrap_stability(const Dataset& y, double rho, int B, double threshold,
                                    const FitConfig& config, const Rng& rng, Method method,
                                    int threads) {
  if (B < 1) throw UsageError("bootstrap_stability: B must be at least 1");
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw UsageError("bootstrap_stability: threshold must lie in [0, 1]");
  }
  FitConfig c = config;
  c.rho = rho;
  const Eigen::Index n = y.n();
  std::vector<std::optional<GraphEstimate>> graphs(static_cast<std::size_t>(B));
  parallel_for(graphs.size(), threads, [&](std::size_t b) {
    Rng stream = rng.derive({static_cast<std::uint64_t>(b)});
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (auto& i : idx) i = static_cast<Eigen::Index>(stream.uniform_index(static_cast<std::uint64_t>(n)));
    FitConfig cb = c;
    cb.seed = stream();
    try {
      graphs[b] = fit_method(method, y.rows(idx), cb).graph;
    } catch (const std::exception&) {
    }
  });

  StabilityReport rep;
  rep.B = B;
  rep.threshold = threshold;
  std::map<Edge, int> counts;
  int ok = 0;
  for (const auto& g : graphs) {
    if (!g) {
      ++rep.failures;
      continue;
    }
    ++ok;
    for (const Edge& e : g->edges) ++counts[e];
  }
  if (rep.failures * 10 > B) {
    throw StudyFailure("bootstrap_stability: " + std::to_string(rep.failures) + " of " +
                       std::to_string(B) + " resamples failed");
  }
  rep.stable_edges.p = static_cast<int>(y.p());
  rep.stable_edges.zero_threshold = config.zero_threshold;
  for (const auto& [e, k] : counts) {
    const double freq = static_cast<double>(k) / ok;
    rep.edge_freq[e] = freq;
    if (freq > threshold) rep.stable_edges.edges.push_back(e);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Conditional correlation probe
// ---------------------------------------------------------------------------

std::vector<WindowCorrelation> windowed_conditional_correlation(
    Generator generator, const SymMatrix& theta, double nu, double window_width,
    const std::vector<double>& x_values, std::size_t target_count, const Rng& rng,
    std::uint64_t max_draws) {
  if (theta.p() != 3) throw UsageError("windowed_conditional_correlation: theta must be 3 x 3");
  if (!(window_width > 0.0)) throw UsageError("windowed_conditional_correlation: width must be positive");
  if (target_count < 100) throw UsageError("windowed_conditional_correlation: target_count < 100");
  if (generator == Generator::contaminated_gaussian) {
    throw UsageError("windowed_conditional_correlation: contaminated generator not supported");
  }
  const Matrix l = theta.cholesky();
  const Matrix lt = l.transpose();

  struct Acc {
    std::size_t n = 0;
    double m1 = 0, m2 = 0, c11 = 0, c22 = 0, c12 = 0;  // Welford moments
  };
  std::vector<std::size_t> order(x_values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x_values[a] < x_values[b]; });
  std::vector<double> xs(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) xs[k] = x_values[order[k]];
  std::vector<Acc> acc(xs.size());
  std::size_t open = xs.size();

  constexpr std::uint64_t kBatch = 1 << 16;
  std::uint64_t drawn = 0;
  for (std::uint64_t batch = 0; open > 0 && drawn < max_draws; ++batch) {
    Rng r = rng.derive({batch});
    for (std::uint64_t t = 0; t < kBatch && open > 0 && drawn < max_draws; ++t, ++drawn) {
      Eigen::Vector3d z(r.normal(), r.normal(), r.normal());
      // x solves L^T x = z (back substitution)
      Eigen::Vector3d x;
      x(2) = z(2) / lt(2, 2);
      x(1) = (z(1) - lt(1, 2) * x(2)) / lt(1, 1);
      x(0) = (z(0) - lt(0, 1) * x(1) - lt(0, 2) * x(2)) / lt(0, 0);
      if (generator == Generator::t_classical) {
        x /= std::sqrt(r.gamma(0.5 * nu, 0.5 * nu));
      } else if (generator == Generator::t_alternative) {
        for (int j = 0; j < 3; ++j) x(j) /= std::sqrt(r.gamma(0.5 * nu, 0.5 * nu));
      }
      // windows with x_k <= y3 < x_k + width
      auto it = std::upper_bound(xs.begin(), xs.end(), x(2));
      while (it != xs.begin()) {
        --it;
        if (!(x(2) < *it + window_width)) break;
        Acc& a = acc[static_cast<std::size_t>(it - xs.begin())];
        if (a.n >= target_count) continue;
        ++a.n;
        const double d1 = x(0) - a.m1;
        const double d2 = x(1) - a.m2;
        a.m1 += d1 / static_cast<double>(a.n);
        a.m2 += d2 / static_cast<double>(a.n);
        a.c11 += d1 * (x(0) - a.m1);
        a.c22 += d2 * (x(1) - a.m2);
        a.c12 += d1 * (x(1) - a.m2);
        if (a.n == target_count) --open;
      }
    }
  }

  std::vector<WindowCorrelation> res(x_values.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    WindowCorrelation& w = res[order[k]];
    w.x = xs[k];
    w.count = acc[k].n;
    w.missing = acc[k].n < target_count;
    w.corr = acc[k].n >= 2 ? acc[k].c12 / std::sqrt(acc[k].c11 * acc[k].c22)
                           : std::numeric_limits<double>::quiet_NaN();
  }
  return res;
}

InverseWeightCheck inverse_weight_variance(const SymMatrix& theta, double nu, std::size_t draws,
                                           const Rng& rng) {
  if (draws < 2) throw UsageError("inverse_weight_variance: need at least 2 draws");
  const Eigen::Index p = theta.p();
  const Matrix l = theta.cholesky();
  const auto lt = l.transpose().triangularView<Eigen::Upper>();
  const Vector mu = Vector::Zero(p);
  double mean = 0.0;
  double m2 = 0.0;
  Vector z(p);
  for (std::size_t i = 0; i < draws; ++i) {
    Rng r = rng.derive({static_cast<std::uint64_t>(i)});
    for (Eigen::Index j = 0; j < p; ++j) z(j) = r.normal();
    const Vector x = lt.solve(z);
    const double delta = mahalanobis_factored(x, mu, l);
    const double w = (nu + delta) / (nu + static_cast<double>(p));
    const double d = w - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (w - mean);
  }
  InverseWeightCheck out;
  out.sample_variance = m2 / static_cast<double>(draws - 1);
  const double denom = nu + static_cast<double>(p);
  out.predicted = 2.0 * static_cast<double>(p) / (denom * denom);
  return out;
}

}  // namespace robustggm
