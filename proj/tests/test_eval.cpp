#include "robustggm/eval.hpp"
#include "robustggm/glasso.hpp"
#include "robustggm/simgen.hpp"
#include "robustggm/tlasso.hpp"
#include "robustggm/tstar.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace robustggm;

namespace {

GraphEstimate graph_of(int p, std::vector<Edge> edges) {
  GraphEstimate g;
  g.p = p;
  g.edges = std::move(edges);
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

RocCurve curve_of(std::vector<std::pair<double, double>> pts) {
  RocCurve c;
  for (auto [f, t] : pts) {
    RocPoint q;
    q.fpr = f;
    q.tpr = t;
    c.points.push_back(q);
  }
  return c;
}

SymMatrix separator_theta() {
  Matrix t(3, 3);
  t << 1.0, 0.0, -0.5, 0.0, 1.0, -0.5, -0.5, -0.5, 1.0;
  return SymMatrix(t);
}

}  // namespace

TEST_CASE("method names") {
  for (Method m : {Method::glasso, Method::tlasso, Method::tstar_var, Method::tstar_mc, Method::robust_glasso}) {
    CHECK(method_from_string(to_string(m)) == m);
  }
  CHECK(to_string(Method::tstar_var) == "tstar-var");
  CHECK_THROWS_AS(method_from_string("lasso"), UsageError);
}

TEST_CASE("log_grid") {
  const auto g = log_grid(0.01, 1.0, 5);
  REQUIRE(g.size() == 5);
  CHECK(g.front() == 0.01);
  CHECK(g.back() == 1.0);
  CHECK(g[2] == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(std::is_sorted(g.begin(), g.end()));
  CHECK(log_grid(0.5, 2.0, 1) == std::vector<double>{2.0});
  CHECK_THROWS_AS(log_grid(0.0, 1.0, 3), UsageError);
  CHECK_THROWS_AS(log_grid(2.0, 1.0, 3), UsageError);
}

TEST_CASE("edge_confusion") {
  SUBCASE("support equal to truth") {
    const GraphEstimate t = graph_of(4, {{0, 1}, {2, 3}});
    const Confusion c = edge_confusion(t, t);
    CHECK(c.tp == 2);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);
    CHECK(c.tn == 4);
  }
  SUBCASE("empty against empty") {
    const Confusion c = edge_confusion(graph_of(6, {}), graph_of(6, {}));
    CHECK(c.tp == 0);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);
    CHECK(c.tn == 15);
  }
  SUBCASE("p = 3, truth (1,2), estimate (1,3)") {
    Matrix th = Matrix::Identity(3, 3);
    th(0, 2) = th(2, 0) = 0.3;
    th(0, 1) = th(1, 0) = 1e-7;  // below eps
    const Confusion c = edge_confusion(SymMatrix(th), graph_of(3, {{0, 1}}), 1e-6);
    CHECK(c.tp == 0);
    CHECK(c.fp == 1);
    CHECK(c.fn == 1);
    CHECK(c.tn == 1);
  }
  CHECK_THROWS_AS(edge_confusion(graph_of(3, {}), graph_of(4, {})), UsageError);
}

TEST_CASE("tpr_at_fpr and partial_auc") {
  const RocCurve c = curve_of({{0.3, 0.8}, {0.1, 0.5}});
  CHECK(tpr_at_fpr(c, 0.0) == 0.0);
  CHECK(tpr_at_fpr(c, 0.05) == doctest::Approx(0.25));
  CHECK(tpr_at_fpr(c, 0.1) == doctest::Approx(0.5));
  CHECK(tpr_at_fpr(c, 0.2) == doctest::Approx(0.65));
  CHECK(tpr_at_fpr(c, 1.0) == 1.0);
  CHECK(partial_auc(c, 0.2) == doctest::Approx(0.0825));
  CHECK(partial_auc(c, 1.0) == doctest::Approx(0.025 + 0.13 + 0.63));

  SUBCASE("envelope ignores a dip") {
    const RocCurve d = curve_of({{0.1, 0.5}, {0.2, 0.4}, {0.3, 0.8}});
    CHECK(tpr_at_fpr(d, 0.2) == doctest::Approx(0.5));
  }
  SUBCASE("perfect and chance curves") {
    CHECK(partial_auc(curve_of({{0.0, 1.0}}), 0.2) == doctest::Approx(0.2));
    CHECK(partial_auc(curve_of({}), 0.2) == doctest::Approx(0.02));
  }
}

TEST_CASE("fit_method") {
  SimSpec spec;
  spec.p = 8;
  spec.n = 40;
  spec.edge_prob = 0.08;
  spec.seed = 3;
  const Dataset y = simulate(spec).data;
  FitConfig c;
  c.rho = 0.1;

  SUBCASE("glasso is the library glasso on S") {
    const FitResult r = fit_method(Method::glasso, y, c);
    const GlassoResult g = glasso_fit(sample_covariance(y.values()), 0.1, glasso_options(c));
    CHECK(r.theta_hat.mat() == g.theta_hat.mat());
    CHECK(r.weights == Matrix::Ones(40, 8));
    CHECK(r.converged);
  }
  SUBCASE("robust glasso runs on the robust covariance with a median centre") {
    const FitResult r = fit_method(Method::robust_glasso, y, c);
    const GlassoResult g = glasso_fit(robust_covariance(y), 0.1, glasso_options(c));
    CHECK(r.theta_hat.mat() == g.theta_hat.mat());
    CHECK(r.mu_hat == column_medians(y.values()));
  }
  SUBCASE("t methods produce PD estimates with per-cell weights") {
    for (Method m : {Method::tlasso, Method::tstar_var, Method::tstar_mc}) {
      FitConfig cm = c;
      cm.gibbs_sweeps = 30;
      cm.gibbs_burn_in = 5;
      cm.em_max_iter = 10;
      const FitResult r = fit_method(m, y, cm);
      CHECK(r.theta_hat.is_pd());
      CHECK(r.weights.rows() == 40);
      CHECK(r.weights.cols() == 8);
    }
  }
  SUBCASE("adaptive grid starts from an empty graph") {
    for (Method m : {Method::glasso, Method::robust_glasso, Method::tlasso, Method::tstar_var}) {
      const auto grid = adaptive_rho_grid(m, y, c, 10, 0.01);
      REQUIRE(grid.size() == 10);
      CHECK(grid.front() == doctest::Approx(0.01 * grid.back()));
      FitConfig top = c;
      top.rho = grid.back();
      CHECK(fit_method(m, y, top).graph.edge_count() == 0);
    }
  }
}

TEST_CASE("roc_study") {
  SimSpec spec;
  spec.p = 10;
  spec.n = 40;
  spec.edge_prob = 0.06;
  spec.generator = Generator::t_classical;
  spec.seed = 5;
  RocOptions o;
  o.methods = {Method::glasso, Method::tlasso};
  o.replicates = 3;
  o.grid_points = 8;
  o.fpr_grid_points = 11;
  const RocStudy s = roc_study(spec, o);

  CHECK(s.failures.empty());
  CHECK(s.averaged.size() == 2);
  CHECK(s.replicates.size() == 6);
  CHECK(s.attempted_fits == 48);
  for (const RocCurve& c : s.replicates) {
    REQUIRE(c.points.size() == 8);
    const double pos = c.points[0].tp + c.points[0].fn;
    const double neg = c.points[0].fp + c.points[0].tn;
    CHECK(pos + neg == 45.0);
    for (std::size_t k = 0; k < c.points.size(); ++k) {
      const RocPoint& q = c.points[k];
      CHECK(q.fpr >= 0.0);
      CHECK(q.fpr <= 1.0);
      CHECK(q.tpr >= 0.0);
      CHECK(q.tpr <= 1.0);
      CHECK(q.tp + q.fn == pos);
      CHECK(q.fp + q.tn == neg);
      if (k > 0) CHECK(q.rho > c.points[k - 1].rho);
    }
    // sparsest end of the adaptive grid selects nothing
    CHECK(c.points.back().tp + c.points.back().fp == 0.0);
  }
  for (const MethodSummary& m : s.summaries) {
    CHECK(m.replicates_used == 3);
    CHECK(m.fpr_grid.size() == 11);
    CHECK(std::is_sorted(m.mean_tpr.begin(), m.mean_tpr.end()));
    CHECK(m.partial_auc >= 0.0);
    CHECK(m.partial_auc <= 0.2);
  }
  CHECK(summary_for(s, Method::tlasso).method == "tlasso");
  CHECK_THROWS_AS(summary_for(s, Method::tstar_mc), UsageError);

  SUBCASE("independent of the thread count") {
    RocOptions o2 = o;
    o2.threads = 3;
    const RocStudy t = roc_study(spec, o2);
    for (std::size_t m = 0; m < 2; ++m) {
      CHECK(t.summaries[m].mean_tpr == s.summaries[m].mean_tpr);
      CHECK(t.summaries[m].partial_auc == s.summaries[m].partial_auc);
    }
  }
  SUBCASE("a fixed shared grid") {
    RocOptions o3 = o;
    o3.rho_grid = {0.05, 0.1, 0.2};
    const RocStudy t = roc_study(spec, o3);
    CHECK(t.averaged[0].points.size() == 3);
    CHECK(t.averaged[0].points[1].rho == doctest::Approx(0.1));
    o3.rho_grid = {0.2, 0.1};
    CHECK_THROWS_AS(roc_study(spec, o3), UsageError);
  }
}

TEST_CASE("prior E[1/sqrt(tau)]") {
  CHECK(prior_inverse_sqrt_tau(3.0) == doctest::Approx(std::sqrt(1.5) / std::tgamma(1.5)).epsilon(1e-14));
  CHECK(prior_inverse_sqrt_tau(3.0) == doctest::Approx(1.38198).epsilon(1e-5));
  Rng rng(4);
  std::vector<double> v(200000);
  for (auto& x : v) x = 1.0 / std::sqrt(rng.gamma(1.5, 1.5));
  const auto m = oracle::mean_se(v);
  CHECK(std::abs(m.mean - prior_inverse_sqrt_tau(3.0)) < 3.0 * m.se);
}

TEST_CASE("predict_coordinates") {
  Matrix t(3, 3);
  t << 2.0, -0.8, 0.0, -0.8, 1.5, 0.4, 0.0, 0.4, 1.0;
  const SymMatrix theta(t);
  Vector mu(3), y(3);
  mu << 0.5, -1.0, 2.0;
  y << 1.5, 0.0, 1.0;

  SUBCASE("diagonal theta predicts the mean") {
    const Vector p = predict_coordinates(y, mu, SymMatrix::diagonal(t.diagonal()), 3.0);
    CHECK(p == mu);
  }
  SUBCASE("conditional mean of the latent normals, rescaled") {
    const Vector p = predict_coordinates(y, mu, theta, 3.0);
    const Vector es = variational_e_step(y, mu, theta, 3.0).e_sqrt_tau;
    const Vector x = es.cwiseProduct(y - mu);
    const double s = prior_inverse_sqrt_tau(3.0);
    CHECK(p(0) == doctest::Approx(mu(0) + 0.8 * x(1) / 2.0 * s));
    CHECK(p(1) == doctest::Approx(mu(1) - (-0.8 * x(0) + 0.4 * x(2)) / 1.5 * s));
    CHECK(p(2) == doctest::Approx(mu(2) - 0.4 * x(1) * s));
  }
}

TEST_CASE("loo_cross_validation") {
  SimSpec spec;
  spec.p = 6;
  spec.n = 24;
  spec.edge_prob = 0.1;
  spec.generator = Generator::t_alternative;
  spec.seed = 8;
  const Dataset y = simulate(spec).data;
  FitConfig c;
  c.estep_kind = EStepKind::variational;
  const std::vector<double> grid = log_grid(0.05, 0.6, 5);

  const CvResult r = loo_cross_validation(y, grid, c);
  CHECK(r.folds == 24);
  CHECK(r.failed_folds == 0);
  REQUIRE(r.mspe.size() == 5);
  CHECK(std::find(grid.begin(), grid.end(), r.best_rho) != grid.end());
  CHECK(r.mspe[r.best_index] == *std::min_element(r.mspe.begin(), r.mspe.end()));
  for (double m : r.mspe) CHECK(std::isfinite(m));

  SUBCASE("invariant to row order") {
    std::vector<Eigen::Index> perm(24);
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::reverse(perm.begin(), perm.end());
    std::swap(perm[3], perm[17]);
    const CvResult q = loo_cross_validation(y.rows(perm), grid, c);
    for (std::size_t k = 0; k < grid.size(); ++k) CHECK(std::abs(q.mspe[k] - r.mspe[k]) < 1e-10);
    CHECK(q.best_rho == r.best_rho);
  }
  SUBCASE("independent of the thread count") {
    const CvResult q = loo_cross_validation(y, grid, c, CvOptions{0.0, 3});
    CHECK(q.mspe == r.mspe);
  }
  SUBCASE("fold fraction") {
    const CvResult q = loo_cross_validation(y, grid, c, CvOptions{0.25, 1});
    CHECK(q.folds == 4);
  }
  SUBCASE("a single huge rho reduces to the marginal variance") {
    const CvResult q = loo_cross_validation(y, {1e3}, c);
    // diagonal theta: every prediction is the training mean
    double expected = 0.0;
    for (Eigen::Index i = 0; i < 24; ++i) {
      const Dataset tr = y.without_row(i);
      FitConfig ci = c;
      ci.rho = 1e3;
      const Vector mu = fit_method(Method::tstar_var, tr, ci).mu_hat;
      expected += (y.values().row(i).transpose() - mu).squaredNorm();
    }
    CHECK(q.mspe[0] == doctest::Approx(expected / (24.0 * 6.0)).epsilon(1e-6));
  }
  SUBCASE("input checks") {
    FitConfig cc = c;
    cc.estep_kind = EStepKind::classical;
    CHECK_THROWS_AS(loo_cross_validation(y, grid, cc), UsageError);
    CHECK_THROWS_AS(loo_cross_validation(y, {}, c), UsageError);
  }
}

TEST_CASE("bootstrap_stability") {
  SimSpec spec;
  spec.p = 6;
  spec.n = 40;
  spec.edge_prob = 0.1;
  spec.seed = 2;
  const Dataset y = simulate(spec).data;
  FitConfig c;

  SUBCASE("threshold 0 keeps every edge seen") {
    const StabilityReport r = bootstrap_stability(y, 0.1, 20, 0.0, c, Rng(1), Method::glasso);
    CHECK(r.B == 20);
    CHECK(r.failures == 0);
    std::set<Edge> seen;
    for (const auto& [e, f] : r.edge_freq) {
      CHECK(f > 0.0);
      CHECK(f <= 1.0);
      seen.insert(e);
    }
    CHECK(std::set<Edge>(r.stable_edges.edges.begin(), r.stable_edges.edges.end()) == seen);
  }
  SUBCASE("B = 1 gives frequencies 0 or 1") {
    const StabilityReport r = bootstrap_stability(y, 0.1, 1, 0.5, c, Rng(1));
    for (const auto& [e, f] : r.edge_freq) CHECK(f == 1.0);
    CHECK(r.stable_edges.edge_count() == r.edge_freq.size());
  }
  SUBCASE("stable edges exceed the threshold; thread count is irrelevant") {
    const StabilityReport a = bootstrap_stability(y, 0.1, 30, 0.8, c, Rng(3), Method::tstar_var, 1);
    const StabilityReport b = bootstrap_stability(y, 0.1, 30, 0.8, c, Rng(3), Method::tstar_var, 3);
    CHECK(a.edge_freq == b.edge_freq);
    for (const Edge& e : a.stable_edges.edges) CHECK(a.edge_freq.at(e) > 0.8);
  }
  SUBCASE("a stronger edge is found more often") {
    double prev = -1.0;
    for (double strength : {0.05, 0.3, 0.7}) {
      Matrix t = Matrix::Identity(4, 4);
      t(0, 1) = t(1, 0) = -strength;
      const Dataset d = sample_mvn(40, Vector::Zero(4), SymMatrix(t), Rng(9));
      const StabilityReport r = bootstrap_stability(d, 0.15, 40, 0.9, c, Rng(4), Method::glasso);
      const auto it = r.edge_freq.find({0, 1});
      const double f = it == r.edge_freq.end() ? 0.0 : it->second;
      CHECK(f >= prev);
      prev = f;
    }
    CHECK(prev == 1.0);
  }
  SUBCASE("input checks") {
    CHECK_THROWS_AS(bootstrap_stability(y, 0.1, 0, 0.5, c, Rng(1)), UsageError);
    CHECK_THROWS_AS(bootstrap_stability(y, 0.1, 5, 1.5, c, Rng(1)), UsageError);
  }
}

TEST_CASE("windowed_conditional_correlation") {
  const std::vector<double> xs{-2.0, -1.0, 0.0, 1.0};
  SUBCASE("Gaussian and classical t satisfy conditional uncorrelatedness") {
    for (Generator g : {Generator::gaussian, Generator::t_classical}) {
      const auto w = windowed_conditional_correlation(g, separator_theta(), 3.0, 0.1, xs, 10000, Rng(6));
      REQUIRE(w.size() == xs.size());
      for (std::size_t k = 0; k < w.size(); ++k) {
        CHECK(w[k].x == xs[k]);
        CHECK_FALSE(w[k].missing);
        CHECK(w[k].count == 10000);
        CHECK(std::abs(w[k].corr) < 0.05);
      }
    }
  }
  SUBCASE("t* does not, and follows the closed form") {
    const SymMatrix th = separator_theta();
    CHECK(oracle::tstar_conditional_correlation(th, 3.0, 0.0) == 0.0);
    CHECK(oracle::tstar_conditional_correlation(th, 3.0, 6.0) == doctest::Approx(0.0726).epsilon(1e-3));
    CHECK(oracle::tstar_conditional_correlation(th, 3.0, -6.0) == oracle::tstar_conditional_correlation(th, 3.0, 6.0));
    const auto w = windowed_conditional_correlation(Generator::t_alternative, th, 3.0, 0.1, {0.0, 3.0, 6.0},
                                                    10000, Rng(7));
    for (const auto& r : w) {
      CAPTURE(r.x);
      CHECK_FALSE(r.missing);
      // heavy tails: no finite fourth moment, so a generous tolerance
      CHECK(std::abs(r.corr - oracle::tstar_conditional_correlation(th, 3.0, r.x + 0.05)) < 0.03);
    }
    CHECK(w[2].corr - w[0].corr > 0.03);
  }
  SUBCASE("starved windows are reported missing") {
    const auto w = windowed_conditional_correlation(Generator::gaussian, separator_theta(), 3.0, 0.01,
                                                    {0.0, 8.0}, 100, Rng(1), 100000);
    CHECK_FALSE(w[0].missing);
    CHECK(w[1].missing);
    CHECK(w[1].count < 100);
  }
  SUBCASE("input checks") {
    CHECK_THROWS_AS(windowed_conditional_correlation(Generator::gaussian, SymMatrix::identity(2), 3.0, 0.1,
                                                     xs, 100, Rng(1)),
                    UsageError);
    CHECK_THROWS_AS(windowed_conditional_correlation(Generator::gaussian, separator_theta(), 3.0, 0.0, xs,
                                                     100, Rng(1)),
                    UsageError);
  }
}

TEST_CASE("inverse_weight_variance") {
  const InverseWeightCheck w = inverse_weight_variance(SymMatrix::identity(100), 3.0, 20000, Rng(2));
  CHECK(w.predicted == doctest::Approx(200.0 / (103.0 * 103.0)).epsilon(1e-15));
  CHECK(w.predicted == doctest::Approx(0.018853).epsilon(1e-4));
  CHECK(std::abs(w.sample_variance / w.predicted - 1.0) < 0.05);
}
