#pragma once

#include <nlohmann/json.hpp>

#include "hybrid/matrix.hpp"

namespace hybrid {

/// Matrices serialize as a list of rows.
nlohmann::json to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace hybrid
