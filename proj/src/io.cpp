#include "opl/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace opl {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  add_row(header_);
  rows_ = 0;
}

void CsvTable::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != header_.size()) throw std::invalid_argument("csv: row width does not match the header");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) text_ += ',';
    text_ += cells[i];
  }
  text_ += '\n';
  ++rows_;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json_file(const std::filesystem::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

Json read_json_file(const std::filesystem::path& path) { return Json::parse(read_text_file(path)); }

Json to_json(const Vector& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Json to_json(const Matrix& m) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) j.push_back(to_json(Vector(m.row(i).transpose())));
  return j;
}

Vector vector_from_json(const Json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Matrix matrix_from_json(const Json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(i)].size()) != cols)
      throw std::invalid_argument("matrix rows have unequal lengths");
    m.row(i) = vector_from_json(j[static_cast<std::size_t>(i)]).transpose();
  }
  return m;
}

std::string dataset_csv(const Matrix& X, const IndicatorMatrix* B) {
  const auto d = X.cols();
  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < d; ++j) header.push_back("x" + std::to_string(j + 1));
  if (B)
    for (Eigen::Index j = 0; j < d; ++j) header.push_back("b" + std::to_string(j + 1));
  CsvTable table(header);
  std::vector<std::string> cells;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    cells.clear();
    for (Eigen::Index j = 0; j < d; ++j) cells.push_back(format_number(X(i, j)));
    if (B)
      for (Eigen::Index j = 0; j < d; ++j) cells.push_back((*B)(i, j) ? "1" : "0");
    table.add_row(cells);
  }
  return table.text();
}

Matrix read_dataset_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty dataset: " + path.string());
  std::vector<int> x_cols;
  {
    std::istringstream header(line);
    std::string name;
    for (int col = 0; std::getline(header, name, ','); ++col) {
      if (!name.empty() && name.back() == '\r') name.pop_back();
      if (!name.empty() && name[0] == 'x') x_cols.push_back(col);
    }
  }
  if (x_cols.empty()) throw std::invalid_argument("dataset has no x-columns: " + path.string());
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(std::strtod(cell.c_str(), nullptr));
    std::vector<double> x;
    for (int c : x_cols) {
      if (c >= static_cast<int>(cells.size())) throw std::invalid_argument("short row in " + path.string());
      x.push_back(cells[static_cast<std::size_t>(c)]);
    }
    rows.push_back(std::move(x));
  }
  Matrix X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(x_cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < x_cols.size(); ++j)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return X;
}

Json to_json(const ContaminationSpec& spec) {
  Json out;
  out["model"] = to_string(spec.model);
  out["epsilon"] = spec.epsilon;
  out["gamma"] = spec.gamma;
  Json gen;
  gen["kind"] = to_string(spec.outlier.kind);
  switch (spec.outlier.kind) {
    case OutlierGen::Kind::PointMass: gen["z"] = to_json(spec.outlier.z); break;
    case OutlierGen::Kind::GaussianShift:
      gen["mean"] = to_json(spec.outlier.mean);
      gen["var"] = spec.outlier.var;
      break;
    case OutlierGen::Kind::AdditiveShift: gen["t"] = spec.outlier.t; break;
  }
  out["outlier"] = gen;
  return out;
}

Json to_json(const LocationScatter& est, const std::string& estimator, std::uint64_t seed) {
  Json out;
  out["estimator"] = estimator;
  out["mu"] = to_json(est.mu);
  out["sigma"] = est.sigma ? to_json(*est.sigma) : Json(nullptr);
  out["objective"] = est.objective;
  out["iterations"] = est.iterations;
  out["converged"] = est.converged;
  out["seed"] = seed;
  return out;
}

}  // namespace opl
