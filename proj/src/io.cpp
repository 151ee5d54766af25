#include "robustggm/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace robustggm {

using nlohmann::json;

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return os.str();
}

std::string file_digest(const std::string& path) { return fnv1a_hex(read_text(path)); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.close();
  if (!out) throw IoError("error writing '" + path + "'");
}

std::string format_double(double v) {
  if (!std::isfinite(v)) throw DataError("refusing to serialize a non-finite number");
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

bool parse_number(const std::string& raw, double& out) {
  std::string s = trim(raw);
  if (!s.empty() && s.front() == '+') s.erase(0, 1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

Dataset parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw DataError("CSV is empty");
  const std::size_t p = split(line, ',').size();
  std::vector<std::vector<double>> rows;
  std::vector<std::string> bad;
  std::size_t bad_count = 0;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split(line, ',');
    if (cells.size() != p) {
      std::ostringstream os;
      os << "row " << row << " has " << cells.size() << " fields, expected " << p;
      throw DataError(os.str());
    }
    std::vector<double> vals(p);
    for (std::size_t j = 0; j < p; ++j) {
      if (!parse_number(cells[j], vals[j])) {
        if (++bad_count <= 20) bad.push_back("(" + std::to_string(row) + "," + std::to_string(j + 1) + ")");
      }
    }
    rows.push_back(std::move(vals));
  }
  if (bad_count > 0) {
    std::ostringstream os;
    os << bad_count << " missing or non-numeric cell(s) at (row, column):";
    for (const auto& b : bad) os << ' ' << b;
    if (bad_count > bad.size()) os << " ...";
    throw DataError(os.str());
  }
  if (rows.size() < 2) throw DataError("CSV needs at least 2 data rows");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < p; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return Dataset(std::move(m));
}

Dataset read_csv(const std::string& path) { return parse_csv(read_text(path)); }

std::string dataset_to_csv(const Matrix& values) {
  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < values.cols(); ++j) header.push_back("v" + std::to_string(j + 1));
  std::vector<std::vector<std::string>> rows(static_cast<std::size_t>(values.rows()));
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < values.cols(); ++j) rows[static_cast<std::size_t>(i)].push_back(format_double(values(i, j)));
  return table_to_csv(header, rows);
}

std::string table_to_csv(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  auto emit = [&out](const std::vector<std::string>& r) {
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (k > 0) out += ',';
      out += r[k];
    }
    out += '\n';
  };
  emit(header);
  for (const auto& r : rows) emit(r);
  return out;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw DataError("matrix: expected an array of rows");
  const auto n = static_cast<Eigen::Index>(j.size());
  const auto p = n == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& r = j.at(static_cast<std::size_t>(i));
    if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != p) throw DataError("matrix: ragged rows");
    for (Eigen::Index k = 0; k < p; ++k) m(i, k) = r.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw DataError("vector: expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

namespace {

void require_finite(const json& j) {
  if (j.is_number_float() && !std::isfinite(j.get<double>())) {
    throw DataError("refusing to serialize a non-finite number");
  }
  if (j.is_structured()) {
    for (const auto& child : j) require_finite(child);
  }
}

}  // namespace

std::string dump_json(const json& j) {
  require_finite(j);
  return j.dump(2) + "\n";
}

json fit_config_to_json(const FitConfig& c) {
  return json{{"rho", c.rho},
              {"nu", c.nu},
              {"em_tol", c.em_tol},
              {"em_max_iter", c.em_max_iter},
              {"glasso_tol", c.glasso_tol},
              {"glasso_inner_tol", c.glasso_inner_tol},
              {"glasso_max_sweeps", c.glasso_max_sweeps},
              {"gibbs_sweeps", c.gibbs_sweeps},
              {"gibbs_burn_in", c.gibbs_burn_in},
              {"restarts", c.restarts},
              {"seed", c.seed},
              {"estep_kind", to_string(c.estep_kind)},
              {"zero_threshold", c.zero_threshold}};
}

FitConfig fit_config_from_json(const json& j) {
  FitConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "rho") c.rho = v.get<double>();
      else if (key == "nu") c.nu = v.get<double>();
      else if (key == "em_tol") c.em_tol = v.get<double>();
      else if (key == "em_max_iter") c.em_max_iter = v.get<int>();
      else if (key == "glasso_tol") c.glasso_tol = v.get<double>();
      else if (key == "glasso_inner_tol") c.glasso_inner_tol = v.get<double>();
      else if (key == "glasso_max_sweeps") c.glasso_max_sweeps = v.get<int>();
      else if (key == "gibbs_sweeps") c.gibbs_sweeps = v.get<int>();
      else if (key == "gibbs_burn_in") c.gibbs_burn_in = v.get<int>();
      else if (key == "restarts") c.restarts = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "estep_kind") c.estep_kind = estep_kind_from_string(v.get<std::string>());
      else if (key == "zero_threshold") c.zero_threshold = v.get<double>();
      else throw UsageError("config: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  return c;
}

json model_to_json(const ModelRecord& m) {
  const FitResult& f = m.fit;
  json edges = json::array();
  for (const Edge& e : f.graph.edges) {
    edges.push_back(json{{"j", e.first + 1}, {"k", e.second + 1}, {"theta", f.theta_hat(e.first, e.second)}});
  }
  json j{{"schema_version", kSchemaVersion},
         {"run_id", m.run_id},
         {"method", m.method},
         {"config", fit_config_to_json(m.config)},
         {"n", f.weights.rows()},
         {"p", f.theta_hat.p()},
         {"mu_hat", vector_to_json(f.mu_hat)},
         {"theta_hat", matrix_to_json(f.theta_hat.mat())},
         {"sigma_hat", matrix_to_json(f.sigma_hat.mat())},
         {"edges", edges},
         {"zero_threshold", f.graph.zero_threshold},
         {"weights", matrix_to_json(f.weights)},
         {"objective_trace", f.objective_trace},
         {"iterations", f.iterations},
         {"converged", f.converged}};
  if (!m.note.empty()) j["note"] = m.note;
  if (!m.manifest.empty()) j["manifest"] = m.manifest;
  return j;
}

ModelRecord model_from_json(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) throw DataError("model: unsupported schema_version");
    ModelRecord m;
    m.run_id = j.at("run_id").get<std::string>();
    m.method = j.at("method").get<std::string>();
    m.config = fit_config_from_json(j.at("config"));
    FitResult& f = m.fit;
    f.mu_hat = vector_from_json(j.at("mu_hat"));
    f.theta_hat = SymMatrix(matrix_from_json(j.at("theta_hat")));
    f.sigma_hat = SymMatrix(matrix_from_json(j.at("sigma_hat")));
    f.weights = matrix_from_json(j.at("weights"));
    f.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    f.iterations = j.at("iterations").get<int>();
    f.converged = j.at("converged").get<bool>();
    f.graph = graph_from_precision(f.theta_hat, j.at("zero_threshold").get<double>());
    if (j.contains("note")) m.note = j.at("note").get<std::string>();
    if (j.contains("manifest")) m.manifest = j.at("manifest").get<std::string>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model: ") + e.what());
  }
}

namespace {

void parse_triplet(const std::string& spec, double& a, double& b, int& count) {
  const auto parts = split(spec, ':');
  double c = 0.0;
  if (parts.size() != 3 || !parse_number(parts[0], a) || !parse_number(parts[1], b) ||
      !parse_number(parts[2], c) || c != std::floor(c) || c < 1) {
    throw UsageError("grid '" + spec + "' must be start:stop:count");
  }
  count = static_cast<int>(c);
}

}  // namespace

std::vector<double> parse_log_grid(const std::string& spec) {
  double a = 0.0, b = 0.0;
  int count = 0;
  parse_triplet(spec, a, b, count);
  if (!(a > 0.0 && b > 0.0)) throw UsageError("log grid '" + spec + "' needs positive endpoints");
  return log_grid(std::min(a, b), std::max(a, b), count);
}

std::vector<double> parse_linear_grid(const std::string& spec) {
  double a = 0.0, b = 0.0;
  int count = 0;
  parse_triplet(spec, a, b, count);
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    g[static_cast<std::size_t>(k)] = count == 1 ? a : a + (b - a) * k / (count - 1);
  }
  return g;
}

Matrix parse_matrix(const std::string& spec) {
  const auto rows = split(spec, ';');
  if (rows.empty()) throw UsageError("matrix '" + spec + "' is empty");
  std::vector<std::vector<double>> vals;
  for (const auto& r : rows) {
    std::vector<double> row;
    for (const auto& cell : split(r, ',')) {
      double v = 0.0;
      if (!parse_number(cell, v)) throw UsageError("matrix '" + spec + "' has a bad entry");
      row.push_back(v);
    }
    vals.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(vals.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(vals[static_cast<std::size_t>(i)].size()) != n) {
      throw UsageError("matrix '" + spec + "' must be square");
    }
    for (Eigen::Index k = 0; k < n; ++k) m(i, k) = vals[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }
  return m;
}

}  // namespace robustggm
