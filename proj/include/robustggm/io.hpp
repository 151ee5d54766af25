#pragma once

#include "robustggm/core.hpp"
#include "robustggm/eval.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace robustggm {

inline constexpr int kSchemaVersion = 1;

/// 64-bit FNV-1a of a byte string, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);
std::string file_digest(const std::string& path);

std::string read_text(const std::string& path);
/// Writes atomically enough for our purposes; throws IoError.
void write_text(const std::string& path, const std::string& text);

/// %.17g, locale independent; throws DataError on non-finite values.
std::string format_double(double v);

/// Comma-separated with a header row. Missing or non-numeric cells raise
/// DataError listing (row, column) positions, 1-based, header excluded.
Dataset parse_csv(const std::string& text);
Dataset read_csv(const std::string& path);

/// Header v1..vp.
std::string dataset_to_csv(const Matrix& values);

/// Generic table: header then rows, values already formatted.
std::string table_to_csv(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

/// Pretty-printed with sorted keys and a trailing newline. Throws DataError if
/// any number is non-finite.
std::string dump_json(const nlohmann::json& j);

nlohmann::json fit_config_to_json(const FitConfig& c);
FitConfig fit_config_from_json(const nlohmann::json& j);

/// Serialized fitted model.
struct ModelRecord {
  std::string run_id;
  std::string method;
  FitConfig config;
  FitResult fit;
  std::string note;
  std::string manifest;  // file name of the producing manifest, if any
};

nlohmann::json model_to_json(const ModelRecord& m);
ModelRecord model_from_json(const nlohmann::json& j);

/// "start:stop:count", log-spaced and ascending.
std::vector<double> parse_log_grid(const std::string& spec);
/// "start:stop:count", evenly spaced.
std::vector<double> parse_linear_grid(const std::string& spec);
/// Rows separated by ';', entries by ','.
Matrix parse_matrix(const std::string& spec);

}  // namespace robustggm
