#include "hybrid/serialize.hpp"

namespace hybrid {

nlohmann::json to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  try {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    const auto& data = j.at("data");
    if (data.size() != rows) throw FormatError("matrix: row count mismatch");
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      if (data[r].size() != cols) throw FormatError("matrix: ragged row");
      for (std::size_t c = 0; c < cols; ++c) m(r, c) = data[r][c].get<double>();
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("matrix JSON: ") + e.what());
  }
}

}  // namespace hybrid
