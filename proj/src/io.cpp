#include "sinkbridge/io.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sinkbridge {

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> parse_row(const std::string& line, const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    // strtod, unlike stod, accepts subnormals.
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    bool ok = end != cell.c_str();
    for (const char* p = end; ok && *p; ++p) ok = std::isspace(static_cast<unsigned char>(*p));
    if (!ok) throw Error(ErrorCode::Io, "bad number '" + cell + "' in " + where);
    out.push_back(v);
  }
  return out;
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string matrix_to_csv(const Matrix& m) {
  std::string out = std::to_string(m.rows()) + "," + std::to_string(m.cols()) + "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Matrix matrix_from_csv(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line)) throw Error(ErrorCode::Io, "empty matrix CSV");
  const std::vector<double> dims = parse_row(line, "CSV header");
  if (dims.size() != 2 || dims[0] < 0 || dims[1] < 0) {
    throw Error(ErrorCode::Io, "CSV header must be 'm,n'");
  }
  const auto m = static_cast<Eigen::Index>(dims[0]);
  const auto n = static_cast<Eigen::Index>(dims[1]);
  Matrix out(m, n);
  Eigen::Index i = 0;
  while (std::getline(ss, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (i >= m) throw Error(ErrorCode::Io, "CSV has more rows than its header declares");
    const std::vector<double> row = parse_row(line, "CSV row " + std::to_string(i + 1));
    if (static_cast<Eigen::Index>(row.size()) != n) {
      throw Error(ErrorCode::DimensionMismatch, "CSV row " + std::to_string(i + 1) +
                                                    " has the wrong length");
    }
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = row[j];
    ++i;
  }
  if (i != m) throw Error(ErrorCode::Io, "CSV has fewer rows than its header declares");
  return out;
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
  write_text_file(path, matrix_to_csv(m));
}

Matrix read_matrix_csv(const std::string& path) { return matrix_from_csv(slurp(path)); }

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::Io, "matrix must be an array of rows");
  const auto m = static_cast<Eigen::Index>(j.size());
  const Eigen::Index n = m == 0 ? 0 : static_cast<Eigen::Index>(j[0].size());
  Matrix out(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!j[i].is_array() || static_cast<Eigen::Index>(j[i].size()) != n) {
      throw Error(ErrorCode::DimensionMismatch, "ragged matrix rows");
    }
    for (Eigen::Index k = 0; k < n; ++k) out(i, k) = j[i][k].get<double>();
  }
  return out;
}

Json vector_to_json(const Vector& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::Io, "vector must be an array");
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Json potentials_to_json(const Potentials& p) {
  return Json{{"alpha", vector_to_json(p.alpha)},
              {"beta", vector_to_json(p.beta)},
              {"gauge", to_string(p.gauge)}};
}

Potentials potentials_from_json(const Json& j) {
  Potentials p;
  p.alpha = vector_from_json(j.at("alpha"));
  p.beta = vector_from_json(j.at("beta"));
  p.gauge = gauge_from_string(j.at("gauge").get<std::string>());
  return p;
}

Json margins_to_json(const MarginPair& mg) {
  return Json{{"r", vector_to_json(mg.r)}, {"c", vector_to_json(mg.c)}};
}

MarginPair margins_from_json(const Json& j) {
  for (const auto& [key, value] : j.items()) {
    if (key != "r" && key != "c") throw Error(ErrorCode::InvalidArgument, "unknown margin field '" + key + "'");
  }
  return MarginPair::make(vector_from_json(j.at("r")), vector_from_json(j.at("c")));
}

Json read_json_file(const std::string& path) {
  try {
    return Json::parse(slurp(path));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::Io, "invalid JSON in '" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

std::string columns_to_csv(const std::vector<std::string>& header,
                           const std::vector<Vector>& columns) {
  if (header.size() != columns.size()) {
    throw Error(ErrorCode::DimensionMismatch, "header and columns differ in count");
  }
  std::string out;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (k > 0) out += ',';
    out += header[k];
  }
  out += '\n';
  const Eigen::Index rows = columns.empty() ? 0 : columns[0].size();
  for (const Vector& c : columns) {
    if (c.size() != rows) throw Error(ErrorCode::DimensionMismatch, "ragged columns");
  }
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < columns.size(); ++k) {
      if (k > 0) out += ',';
      out += format_double(columns[k](i));
    }
    out += '\n';
  }
  return out;
}

}  // namespace sinkbridge
