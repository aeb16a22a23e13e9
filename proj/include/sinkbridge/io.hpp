#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "sinkbridge/scaling.hpp"

namespace sinkbridge {

using Json = nlohmann::json;

/// Shortest decimal with 17 significant digits (round-trip safe).
std::string format_double(double x);

/// Dense CSV: first line "m,n", then m row-major lines.
void write_matrix_csv(const std::string& path, const Matrix& m);
Matrix read_matrix_csv(const std::string& path);
std::string matrix_to_csv(const Matrix& m);
Matrix matrix_from_csv(const std::string& text);

/// Matrix as an array of rows.
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

/// {"alpha": [...], "beta": [...], "gauge": "..."}
Json potentials_to_json(const Potentials& p);
Potentials potentials_from_json(const Json& j);

/// {"r": [...], "c": [...]}
Json margins_to_json(const MarginPair& mg);
MarginPair margins_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);
void write_text_file(const std::string& path, const std::string& text);

/// Columns of equal length under the given header names.
std::string columns_to_csv(const std::vector<std::string>& header,
                           const std::vector<Vector>& columns);

}  // namespace sinkbridge
