#include "robustggm/cli.hpp"

#include "robustggm/eval.hpp"
#include "robustggm/glasso.hpp"
#include "robustggm/io.hpp"
#include "robustggm/parallel.hpp"
#include "robustggm/simgen.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>

namespace robustggm {

using nlohmann::json;

namespace {

const char* const kRobustNote =
    "robust covariance is a pairwise Gnanadesikan-Kettenring estimate with Qn scales";

struct Outputs {
  std::map<std::string, std::string> files;  // path -> contents
  int exit_code = kExitOk;
};

std::string fmt(double v) { return format_double(v); }

FitConfig config_of(const json& o) { return fit_config_from_json(o.at("config")); }

bool wants_csv(const json& o) { return o.at("format").get<std::string>() == "csv"; }

int partial_exit(std::size_t failed, std::size_t total) {
  return failed * 10 > total ? kExitPartialFailure : kExitOk;
}

// --------------------------------------------------------------------------- simulate

Outputs cmd_simulate(const json& o, const std::string& run_id, const std::string& manifest) {
  const SimSpec spec = SimSpec::from_json(o.at("spec"));
  const Simulation sim = simulate(spec);
  const std::string out = o.at("out").get<std::string>();
  const std::string csv = dataset_to_csv(sim.data.values());

  json edges = json::array();
  for (const Edge& e : sim.truth.graph.edges) edges.push_back(json::array({e.first + 1, e.second + 1}));
  json mask = json::array();
  if (const auto& m = sim.data.contamination_mask()) {
    for (Eigen::Index i = 0; i < m->rows(); ++i)
      for (Eigen::Index j = 0; j < m->cols(); ++j)
        if ((*m)(i, j)) mask.push_back(json::array({i + 1, j + 1}));
  }
  json truth{{"schema_version", kSchemaVersion},
             {"run_id", run_id},
             {"manifest", manifest},
             {"spec", spec.to_json()},
             {"theta", matrix_to_json(sim.truth.theta.mat())},
             {"diagonal_shift", sim.truth.diagonal_shift},
             {"edges", edges},
             {"contamination_mask", mask},
             {"contamination_mean", sim.mu_star},
             {"data_file", std::filesystem::path(out + ".csv").filename().string()},
             {"data_digest", fnv1a_hex(csv)}};
  if (!sim.truth.note.empty()) truth["note"] = sim.truth.note;
  Outputs r;
  r.files[out + ".csv"] = csv;
  r.files[out + ".truth.json"] = dump_json(truth);
  return r;
}

// --------------------------------------------------------------------------- fit

Outputs cmd_fit(const json& o, const std::string& run_id, const std::string& manifest, int threads) {
  const Dataset y = read_csv(o.at("data").get<std::string>());
  const Method method = method_from_string(o.at("method").get<std::string>());
  const FitConfig config = config_of(o);
  const std::string out = o.at("out").get<std::string>();
  Outputs r;
  json j;
  try {
    MethodOptions mo;
    mo.threads = threads;
    ModelRecord rec;
    rec.run_id = run_id;
    rec.method = to_string(method);
    rec.config = config;
    rec.fit = fit_method(method, y, config, nullptr, mo);
    if (method == Method::robust_glasso) rec.note = kRobustNote;
    rec.manifest = manifest;
    j = model_to_json(rec);
  } catch (const NonConvergence& e) {
    // Non-convergence is reported, not treated as a failed run.
    j = json{{"schema_version", kSchemaVersion},
             {"run_id", run_id},
             {"method", to_string(method)},
             {"config", fit_config_to_json(config)},
             {"converged", false},
             {"error", e.what()},
             {"manifest", manifest}};
  }
  r.files[out + ".json"] = dump_json(j);
  return r;
}

// --------------------------------------------------------------------------- roc

Outputs cmd_roc(const json& o, const std::string& run_id, const std::string& manifest, int threads) {
  const SimSpec spec = SimSpec::from_json(o.at("spec"));
  RocOptions ro;
  ro.methods.clear();
  for (const auto& m : o.at("methods")) ro.methods.push_back(method_from_string(m.get<std::string>()));
  ro.replicates = o.at("replicates").get<int>();
  ro.grid_points = o.at("grid_points").get<int>();
  ro.grid_ratio = o.at("grid_ratio").get<double>();
  ro.rho_grid = o.at("rho_grid").get<std::vector<double>>();
  ro.config = config_of(o);
  ro.pauc_max_fpr = o.at("pauc_max_fpr").get<double>();
  ro.threads = threads;
  const RocStudy st = roc_study(spec, ro);
  const std::string out = o.at("out").get<std::string>();

  const std::size_t units = static_cast<std::size_t>(ro.replicates) * ro.methods.size();
  Outputs r;
  r.exit_code = partial_exit(st.failures.size(), units);

  json failures = json::array();
  for (const auto& f : st.failures) {
    failures.push_back(json{{"method", f.method}, {"replicate", f.replicate}, {"rho", f.rho}, {"message", f.message}});
  }
  if (wants_csv(o)) {
    std::vector<std::vector<std::string>> curves, vertical, summary, fails;
    for (const auto& c : st.averaged) {
      for (std::size_t k = 0; k < c.points.size(); ++k) {
        const RocPoint& q = c.points[k];
        curves.push_back({run_id, c.method, std::to_string(k), fmt(q.rho), fmt(q.fpr), fmt(q.tpr),
                          fmt(q.tp), fmt(q.fp), fmt(q.tn), fmt(q.fn)});
      }
    }
    for (const auto& s : st.summaries) {
      for (std::size_t k = 0; k < s.fpr_grid.size(); ++k) {
        vertical.push_back({run_id, s.method, fmt(s.fpr_grid[k]), fmt(s.mean_tpr[k])});
      }
      summary.push_back({run_id, s.method, fmt(s.partial_auc), std::to_string(s.replicates_used),
                         std::to_string(s.monotonicity_violations)});
    }
    for (const auto& f : st.failures) {
      fails.push_back({run_id, f.method, std::to_string(f.replicate), fmt(f.rho), "\"" + f.message + "\""});
    }
    r.files[out + ".curves.csv"] = table_to_csv(
        {"run_id", "method", "grid_index", "rho", "fpr", "tpr", "tp", "fp", "tn", "fn"}, curves);
    r.files[out + ".vertical.csv"] = table_to_csv({"run_id", "method", "fpr", "mean_tpr"}, vertical);
    r.files[out + ".summary.csv"] = table_to_csv(
        {"run_id", "method", "partial_auc", "replicates_used", "monotonicity_violations"}, summary);
    r.files[out + ".failures.csv"] =
        table_to_csv({"run_id", "method", "replicate", "rho", "message"}, fails);
    return r;
  }
  json curves = json::array();
  for (const auto& c : st.averaged) {
    json pts = json::array();
    for (const auto& q : c.points) {
      pts.push_back(json{{"rho", q.rho}, {"fpr", q.fpr}, {"tpr", q.tpr}, {"tp", q.tp},
                         {"fp", q.fp}, {"tn", q.tn}, {"fn", q.fn}});
    }
    curves.push_back(json{{"method", c.method}, {"points", pts}});
  }
  json summaries = json::array();
  for (const auto& s : st.summaries) {
    summaries.push_back(json{{"method", s.method},
                             {"fpr_grid", s.fpr_grid},
                             {"mean_tpr", s.mean_tpr},
                             {"partial_auc", s.partial_auc},
                             {"pauc_max_fpr", ro.pauc_max_fpr},
                             {"replicates_used", s.replicates_used},
                             {"monotonicity_violations", s.monotonicity_violations}});
  }
  json j{{"schema_version", kSchemaVersion}, {"run_id", run_id},     {"manifest", manifest},
         {"curves", curves},                 {"vertical", summaries}, {"failures", failures},
         {"attempted_fits", st.attempted_fits}};
  if (std::find(ro.methods.begin(), ro.methods.end(), Method::robust_glasso) != ro.methods.end()) {
    j["note"] = kRobustNote;
  }
  r.files[out + ".json"] = dump_json(j);
  return r;
}

// --------------------------------------------------------------------------- cv

Outputs cmd_cv(const json& o, const std::string& run_id, const std::string& manifest, int threads) {
  const Dataset y = read_csv(o.at("data").get<std::string>());
  FitConfig config = config_of(o);
  const Method method = method_from_string(o.at("method").get<std::string>());
  if (method != Method::tstar_var && method != Method::tstar_mc) {
    throw UsageError("cv supports tstar-var and tstar-mc");
  }
  config.estep_kind = method == Method::tstar_var ? EStepKind::variational : EStepKind::monte_carlo;
  CvOptions co;
  co.fold_fraction = o.at("fold_fraction").get<double>();
  co.threads = threads;
  const CvResult cv = loo_cross_validation(y, o.at("rho_grid").get<std::vector<double>>(), config, co);
  const std::string out = o.at("out").get<std::string>();
  Outputs r;
  if (wants_csv(o)) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k < cv.rho_grid.size(); ++k) {
      rows.push_back({run_id, fmt(cv.rho_grid[k]), fmt(cv.mspe[k]), k == cv.best_index ? "1" : "0"});
    }
    r.files[out + ".csv"] = table_to_csv({"run_id", "rho", "mspe", "best"}, rows);
    return r;
  }
  json j{{"schema_version", kSchemaVersion}, {"run_id", run_id},  {"manifest", manifest},
         {"rho_grid", cv.rho_grid},          {"mspe", cv.mspe},   {"best_rho", cv.best_rho},
         {"folds", cv.folds},                {"failures", cv.failed_folds},
         {"warnings", cv.warnings}};
  r.files[out + ".json"] = dump_json(j);
  return r;
}

// --------------------------------------------------------------------------- bootstrap

Outputs cmd_bootstrap(const json& o, const std::string& run_id, const std::string& manifest,
                      int threads) {
  const Dataset y = read_csv(o.at("data").get<std::string>());
  const FitConfig config = config_of(o);
  const Method method = method_from_string(o.at("method").get<std::string>());
  const StabilityReport rep =
      bootstrap_stability(y, o.at("rho").get<double>(), o.at("B").get<int>(),
                          o.at("threshold").get<double>(), config, Rng(config.seed), method, threads);
  const std::string out = o.at("out").get<std::string>();
  Outputs r;
  if (wants_csv(o)) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [e, f] : rep.edge_freq) {
      rows.push_back({run_id, std::to_string(e.first + 1), std::to_string(e.second + 1), fmt(f),
                      rep.stable_edges.has_edge(e.first, e.second) ? "1" : "0"});
    }
    r.files[out + ".csv"] = table_to_csv({"run_id", "j", "k", "freq", "stable"}, rows);
    return r;
  }
  json freq = json::array();
  for (const auto& [e, f] : rep.edge_freq) {
    freq.push_back(json{{"j", e.first + 1}, {"k", e.second + 1}, {"freq", f}});
  }
  json stable = json::array();
  for (const Edge& e : rep.stable_edges.edges) stable.push_back(json::array({e.first + 1, e.second + 1}));
  json j{{"schema_version", kSchemaVersion}, {"run_id", run_id},     {"manifest", manifest},
         {"B", rep.B},                       {"threshold", rep.threshold},
         {"failures", rep.failures},         {"edge_freq", freq},    {"stable_edges", stable}};
  r.files[out + ".json"] = dump_json(j);
  return r;
}

// --------------------------------------------------------------------------- condcorr

Outputs cmd_condcorr(const json& o, const std::string& run_id, const std::string& manifest) {
  const Generator g = generator_from_string(o.at("generator").get<std::string>());
  const SymMatrix theta(matrix_from_json(o.at("theta")));
  const auto xs = o.at("x_values").get<std::vector<double>>();
  const auto res = windowed_conditional_correlation(
      g, theta, o.at("nu").get<double>(), o.at("width").get<double>(), xs,
      o.at("target").get<std::size_t>(), Rng(o.at("seed").get<std::uint64_t>()),
      o.at("max_draws").get<std::uint64_t>());
  std::size_t missing = 0;
  for (const auto& w : res) missing += w.missing ? 1 : 0;
  const std::string out = o.at("out").get<std::string>();
  Outputs r;
  r.exit_code = partial_exit(missing, res.size());
  if (wants_csv(o)) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& w : res) {
      rows.push_back({run_id, fmt(w.x), w.count >= 2 ? fmt(w.corr) : "", std::to_string(w.count),
                      w.missing ? "1" : "0"});
    }
    r.files[out + ".csv"] = table_to_csv({"run_id", "x", "corr", "count", "missing"}, rows);
    return r;
  }
  json windows = json::array();
  for (const auto& w : res) {
    windows.push_back(json{{"x", w.x},
                           {"corr", w.count >= 2 ? json(w.corr) : json(nullptr)},
                           {"count", w.count},
                           {"missing", w.missing}});
  }
  json j{{"schema_version", kSchemaVersion}, {"run_id", run_id}, {"manifest", manifest},
         {"windows", windows}, {"failures", missing}};
  r.files[out + ".json"] = dump_json(j);
  return r;
}

// --------------------------------------------------------------------------- manifests

std::vector<std::string> input_paths(const json& o) {
  std::vector<std::string> v;
  if (o.contains("data")) v.push_back(o.at("data").get<std::string>());
  return v;
}

std::string compute_run_id(const std::string& command, const json& options,
                           const std::map<std::string, std::string>& input_digests) {
  std::string key = command + "\n" + options.dump() + "\n" + kVersion + "\n";
  for (const auto& [p, d] : input_digests) key += p + "=" + d + "\n";
  return fnv1a_hex(key);
}

}  // namespace

int execute_command(const std::string& command, const json& options, int threads,
                    std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  std::map<std::string, std::string> inputs;
  for (const auto& p : input_paths(options)) inputs[p] = file_digest(p);
  const std::string run_id = compute_run_id(command, options, inputs);
  const std::string out = options.at("out").get<std::string>();
  const std::string manifest_path = out + ".manifest.json";
  const std::string manifest_name = std::filesystem::path(manifest_path).filename().string();

  Outputs r;
  if (command == "simulate") r = cmd_simulate(options, run_id, manifest_name);
  else if (command == "fit") r = cmd_fit(options, run_id, manifest_name, threads);
  else if (command == "roc") r = cmd_roc(options, run_id, manifest_name, threads);
  else if (command == "cv") r = cmd_cv(options, run_id, manifest_name, threads);
  else if (command == "bootstrap") r = cmd_bootstrap(options, run_id, manifest_name, threads);
  else if (command == "condcorr") r = cmd_condcorr(options, run_id, manifest_name);
  else throw UsageError("unknown command '" + command + "'");

  json outputs = json::object();
  for (const auto& [path, text] : r.files) {
    write_text(path, text);
    outputs[path] = fnv1a_hex(text);
    log << "wrote " << path << "\n";
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest{{"schema_version", kSchemaVersion},
                {"command", command},
                {"config", options},
                {"seed", options.contains("seed")     ? options.at("seed")
                         : options.contains("config") ? options.at("config").at("seed")
                                                      : options.at("spec").at("seed")},
                {"version", kVersion},
                {"run_id", run_id},
                {"inputs", inputs},
                {"outputs", outputs},
                {"exit_code", r.exit_code},
                {"threads", threads},
                {"wall_time_seconds", wall}};
  write_text(manifest_path, dump_json(manifest));
  log << "wrote " << manifest_path << "\n";
  return r.exit_code;
}

namespace {

// --------------------------------------------------------------------------- argument parsing

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("ROBUSTGGM_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw UsageError(std::string("ROBUSTGGM_SEED is not an unsigned integer: ") + env);
    }
  }
  return 0;
}

struct ConfigFlags {
  double rho = 0.1;
  FitConfig defaults;
  void add(CLI::App* app, bool with_rho, const char* nu_flag = "--nu") {
    if (with_rho) app->add_option("--rho", rho, "Penalty (glasso scale)")->capture_default_str();
    app->add_option(nu_flag, defaults.nu, "Degrees of freedom assumed by the fit (> 2)")
        ->capture_default_str();
    app->add_option("--em-tol", defaults.em_tol, "Relative objective change stop")->capture_default_str();
    app->add_option("--em-max-iter", defaults.em_max_iter)->capture_default_str();
    app->add_option("--glasso-tol", defaults.glasso_tol)->capture_default_str();
    app->add_option("--glasso-inner-tol", defaults.glasso_inner_tol)->capture_default_str();
    app->add_option("--glasso-max-sweeps", defaults.glasso_max_sweeps)->capture_default_str();
    app->add_option("--gibbs-sweeps", defaults.gibbs_sweeps, "Monte Carlo sweeps M")->capture_default_str();
    app->add_option("--gibbs-burn-in", defaults.gibbs_burn_in)->capture_default_str();
    app->add_option("--restarts", defaults.restarts)->capture_default_str();
    app->add_option("--zero-threshold", defaults.zero_threshold)->capture_default_str();
  }
  json resolve(std::uint64_t seed, Method method) const {
    FitConfig c = defaults;
    c.rho = rho;
    c.seed = seed;
    switch (method) {
      case Method::tlasso: c.estep_kind = EStepKind::classical; break;
      case Method::tstar_var: c.estep_kind = EStepKind::variational; break;
      case Method::tstar_mc: c.estep_kind = EStepKind::monte_carlo; break;
      default: c.estep_kind = EStepKind::none; break;
    }
    c.validate();
    return fit_config_to_json(c);
  }
};

struct SpecFlags {
  SimSpec spec;
  std::string generator = "gaussian";
  std::string spec_file;
  void add(CLI::App* app) {
    app->add_option("--spec", spec_file, "SimSpec JSON; explicit flags override it");
    app->add_option("--p", spec.p)->capture_default_str();
    app->add_option("--n", spec.n)->capture_default_str();
    app->add_option("--edge-prob", spec.edge_prob)->capture_default_str();
    app->add_option("--min-eigenvalue", spec.min_eigenvalue)->capture_default_str();
    app->add_option("--generator", generator,
                    "gaussian|t_classical|t_alternative|contaminated_gaussian")
        ->capture_default_str();
    app->add_option("--nu", spec.nu)->capture_default_str();
    app->add_option("--contamination-frac", spec.contamination_frac)->capture_default_str();
  }
  json resolve(CLI::App* app, std::uint64_t seed) const {
    json j = spec.to_json();
    if (!spec_file.empty()) {
      json file;
      try {
        file = json::parse(read_text(spec_file));
      } catch (const json::parse_error& e) {
        throw UsageError(std::string("spec file: ") + e.what());
      }
      j = SimSpec::from_json(file).to_json();
    }
    auto set_if = [&](const char* flag, const char* key, const json& v) {
      if (app->count(flag) > 0) j[key] = v;
    };
    set_if("--p", "p", spec.p);
    set_if("--n", "n", spec.n);
    set_if("--edge-prob", "edge_prob", spec.edge_prob);
    set_if("--min-eigenvalue", "min_eigenvalue", spec.min_eigenvalue);
    set_if("--generator", "generator", generator);
    set_if("--nu", "nu", spec.nu);
    set_if("--contamination-frac", "contamination_frac", spec.contamination_frac);
    if (spec_file.empty() || app->count("--seed") > 0 || !j.contains("seed")) j["seed"] = seed;
    return SimSpec::from_json(j).to_json();  // validates
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int replay(const std::string& path, bool verify, int threads, std::ostream& out) {
  json m;
  try {
    m = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
  const std::string command = m.at("command").get<std::string>();
  const json options = m.at("config");
  for (const auto& [p, d] : m.at("inputs").items()) {
    if (file_digest(p) != d.get<std::string>()) {
      throw IoError("input '" + p + "' changed since the manifest was written");
    }
  }
  const json recorded = m.at("outputs");
  const int code = execute_command(command, options, threads, out);
  if (!verify) return code;
  bool same = true;
  for (const auto& [p, d] : recorded.items()) {
    const bool ok = file_digest(p) == d.get<std::string>();
    out << (ok ? "identical " : "DIFFERENT ") << p << "\n";
    same = same && ok;
  }
  return same ? code : kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust sparse graphical model selection (glasso, tlasso, t*-lasso)"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed_flag;
  int threads = default_thread_count();
  std::string out_prefix;
  std::string format = "json";
  auto common = [&](CLI::App* sub, bool with_format) {
    sub->add_option("--seed", seed_flag, "Seed (falls back to ROBUSTGGM_SEED, then 0)");
    sub->add_option("--threads", threads, "Worker threads (results do not depend on it)")
        ->capture_default_str();
    sub->add_option("--out", out_prefix, "Output path prefix")->required();
    if (with_format) {
      sub->add_option("--format", format, "json|csv")
          ->check(CLI::IsMember({"json", "csv"}))
          ->capture_default_str();
    }
  };

  // simulate
  CLI::App* sim = app.add_subcommand("simulate", "Simulate a dataset and its true graph");
  SpecFlags sim_spec;
  sim_spec.add(sim);
  common(sim, false);

  // fit
  CLI::App* fit = app.add_subcommand("fit", "Fit one estimator to a CSV dataset");
  std::string fit_data;
  std::string fit_method_name = "glasso";
  ConfigFlags fit_cfg;
  fit->add_option("--data", fit_data, "Input CSV")->required();
  fit->add_option("--method", fit_method_name, "glasso|tlasso|tstar-var|tstar-mc|robust-glasso")
      ->capture_default_str();
  fit_cfg.add(fit, true);
  common(fit, false);

  // roc
  CLI::App* roc = app.add_subcommand("roc", "ROC study over penalty paths");
  SpecFlags roc_spec;
  roc_spec.add(roc);
  ConfigFlags roc_cfg;
  roc_cfg.add(roc, false, "--fit-nu");
  std::string roc_methods = "glasso,tlasso,tstar-var,robust-glasso";
  int replicates = 25;
  int grid_points = 30;
  double grid_ratio = 0.01;
  std::string roc_grid;
  double pauc_max = 0.2;
  roc->add_option("--methods", roc_methods)->capture_default_str();
  roc->add_option("--replicates", replicates)->capture_default_str();
  roc->add_option("--grid-points", grid_points, "Adaptive grid size")->capture_default_str();
  roc->add_option("--grid-ratio", grid_ratio, "rho_min / rho_max of adaptive grids")->capture_default_str();
  roc->add_option("--rho-grid", roc_grid, "Shared grid start:stop:count (log-spaced)");
  roc->add_option("--pauc-max-fpr", pauc_max)->capture_default_str();
  common(roc, true);

  // cv
  CLI::App* cv = app.add_subcommand("cv", "Cross-validated choice of rho for the t* lasso");
  std::string cv_data;
  std::string cv_method = "tstar-var";
  std::string cv_grid = "0.05:0.6:12";
  double fold_fraction = 0.0;
  ConfigFlags cv_cfg;
  cv->add_option("--data", cv_data)->required();
  cv->add_option("--method", cv_method, "tstar-var|tstar-mc")->capture_default_str();
  cv->add_option("--rho-grid", cv_grid, "start:stop:count (log-spaced)")->capture_default_str();
  cv->add_option("--fold-fraction", fold_fraction, "0 for leave-one-out")->capture_default_str();
  cv_cfg.add(cv, false);
  common(cv, true);

  // bootstrap
  CLI::App* boot = app.add_subcommand("bootstrap", "Bootstrap edge stability at fixed rho");
  std::string boot_data;
  std::string boot_method = "tstar-var";
  int B = 500;
  double threshold = 0.985;
  ConfigFlags boot_cfg;
  boot->add_option("--data", boot_data)->required();
  boot->add_option("--method", boot_method)->capture_default_str();
  boot->add_option("--B", B)->capture_default_str();
  boot->add_option("--threshold", threshold)->capture_default_str();
  boot_cfg.add(boot, true);
  common(boot, true);

  // condcorr
  CLI::App* cc = app.add_subcommand("condcorr", "Windowed conditional correlation of Y1, Y2 given Y3");
  std::string cc_generator = "t_alternative";
  std::string cc_theta = "1,0,-0.5;0,1,-0.5;-0.5,-0.5,1";
  double cc_nu = 3.0;
  double cc_width = 0.01;
  std::string cc_x = "-6:5.9:120";
  std::size_t cc_target = 10000;
  std::uint64_t cc_max_draws = 200'000'000;
  cc->add_option("--generator", cc_generator, "gaussian|t_classical|t_alternative")->capture_default_str();
  cc->add_option("--theta", cc_theta, "3x3 precision, rows ';' entries ','")->capture_default_str();
  cc->add_option("--nu", cc_nu)->capture_default_str();
  cc->add_option("--width", cc_width)->capture_default_str();
  cc->add_option("--x", cc_x, "Window starts start:stop:count (linear)")->capture_default_str();
  cc->add_option("--target", cc_target)->capture_default_str();
  cc->add_option("--max-draws", cc_max_draws)->capture_default_str();
  common(cc, true);

  // replay
  CLI::App* rp = app.add_subcommand("replay", "Re-run a manifest");
  std::string manifest_path;
  bool verify = false;
  rp->add_option("manifest", manifest_path)->required();
  rp->add_flag("--verify", verify, "Compare regenerated outputs with the recorded digests");
  rp->add_option("--threads", threads)->capture_default_str();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (threads < 1) throw UsageError("--threads must be at least 1");
    if (*rp) return replay(manifest_path, verify, threads, out);

    const std::uint64_t seed = resolve_seed(seed_flag);
    json o{{"out", out_prefix}};
    std::string command;
    if (*sim) {
      command = "simulate";
      o["spec"] = sim_spec.resolve(sim, seed);
    } else if (*fit) {
      command = "fit";
      const Method m = method_from_string(fit_method_name);
      o["data"] = fit_data;
      o["method"] = to_string(m);
      o["config"] = fit_cfg.resolve(seed, m);
    } else if (*roc) {
      command = "roc";
      o["spec"] = roc_spec.resolve(roc, seed);
      json methods = json::array();
      for (const auto& m : split_list(roc_methods)) methods.push_back(to_string(method_from_string(m)));
      if (methods.empty()) throw UsageError("--methods is empty");
      o["methods"] = methods;
      o["replicates"] = replicates;
      o["grid_points"] = grid_points;
      o["grid_ratio"] = grid_ratio;
      o["rho_grid"] = roc_grid.empty() ? std::vector<double>{} : parse_log_grid(roc_grid);
      o["config"] = roc_cfg.resolve(seed, Method::glasso);
      o["pauc_max_fpr"] = pauc_max;
      o["format"] = format;
    } else if (*cv) {
      command = "cv";
      const Method m = method_from_string(cv_method);
      o["data"] = cv_data;
      o["method"] = to_string(m);
      o["rho_grid"] = parse_log_grid(cv_grid);
      o["fold_fraction"] = fold_fraction;
      o["config"] = cv_cfg.resolve(seed, m);
      o["format"] = format;
    } else if (*boot) {
      command = "bootstrap";
      const Method m = method_from_string(boot_method);
      o["data"] = boot_data;
      o["method"] = to_string(m);
      o["rho"] = boot_cfg.rho;
      o["B"] = B;
      o["threshold"] = threshold;
      o["config"] = boot_cfg.resolve(seed, m);
      o["format"] = format;
    } else if (*cc) {
      command = "condcorr";
      generator_from_string(cc_generator);
      o["generator"] = cc_generator;
      o["theta"] = matrix_to_json(parse_matrix(cc_theta));
      o["nu"] = cc_nu;
      o["width"] = cc_width;
      o["x_values"] = parse_linear_grid(cc_x);
      o["target"] = cc_target;
      o["max_draws"] = cc_max_draws;
      o["seed"] = seed;
      o["format"] = format;
    }
    return execute_command(command, o, threads, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitIo;
  } catch (const StudyFailure& e) {
    err << "study failed: " << e.what() << "\n";
    return kExitPartialFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace robustggm
