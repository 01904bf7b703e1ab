#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "opl/contamination.hpp"
#include "opl/estimators.hpp"
#include "opl/types.hpp"

namespace opl {

using Json = nlohmann::ordered_json;

// Shortest text that parses back to the same double; "nan" for missing values.
std::string format_number(double x);

// Row-oriented CSV text with a fixed header.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(const std::vector<std::string>& cells);
  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_; }
  const std::string& text() const { return text_; }

 private:
  std::vector<std::string> header_;
  std::string text_;
  std::size_t rows_ = 0;
};

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);
Json read_json_file(const std::filesystem::path& path);

Json to_json(const Vector& v);
Json to_json(const Matrix& m);
Vector vector_from_json(const Json& j);
Matrix matrix_from_json(const Json& j);

// Dataset CSV: header x1..xd, optionally followed by b1..bd.
std::string dataset_csv(const Matrix& X, const IndicatorMatrix* B);
// Reads the x-columns of a dataset CSV (b-columns are ignored).
Matrix read_dataset_csv(const std::filesystem::path& path);

Json to_json(const ContaminationSpec& spec);
Json to_json(const LocationScatter& est, const std::string& estimator, std::uint64_t seed);

}  // namespace opl
