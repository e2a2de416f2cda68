#pragma once

// Delimited text datasets with a JSON sidecar describing column roles and
// types, plus the affine standardisation applied at ingestion.
//
// Sidecar layout (schema_version "1.x"):
//   {"schema_version": "1.0",
//    "columns": [{"name": "y", "role": "Y", "type": "continuous"},
//                {"name": "walks", "role": "X", "type": "categorical",
//                 "levels": ["no", "yes"]}, ...]}
// Roles are U, X, Y and Z (known class, optional). Categorical cells hold
// level names; Z cells hold 1-based class numbers.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "semimix/model.hpp"

namespace semimix::io {

inline constexpr int kSchemaMajor = 1;
inline constexpr const char* kSchemaVersion = "1.0";

// data.csv -> data.schema.json
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

nlohmann::json make_sidecar(const Dataset& data);

// Throws Error(Io) on unreadable files and Error(Schema) on malformed or
// unknown-major sidecars, unknown levels and non-numeric cells. Rows with
// an empty or "NA" cell are dropped and counted in *dropped.
Dataset read_dataset(const std::filesystem::path& csv, const std::filesystem::path& sidecar,
                     std::size_t* dropped = nullptr);
Dataset read_dataset(const std::filesystem::path& csv);

// Writes the CSV and its sidecar. Doubles are written with 17 significant
// digits so reading back reproduces them exactly.
void write_dataset(const Dataset& data, const std::filesystem::path& csv);

struct ColumnScale {
  std::string name;
  double mean = 0.0;
  double sd = 1.0;
};

// Centring and scaling of every continuous column (U, continuous X and Y).
struct Standardization {
  std::vector<ColumnScale> u;
  std::vector<ColumnScale> x;  // continuous X columns only, by name
  ColumnScale y;

  static Standardization fit(const Dataset& data);
  void apply(Dataset& data) const;

  // Coefficients and responses on the original scale. With y* = (y - m_y)/s_y
  // and u*_j = (u_j - m_j)/s_j: gamma_j = s_y gamma*_j / s_j and
  // delta_k = m_y + s_y delta*_k - sum_j gamma_j m_j.
  RegressionCoefficients to_original(const RegressionCoefficients& scaled) const;
  double response_to_original(double scaled) const { return y.mean + y.sd * scaled; }

  nlohmann::json to_json() const;
  static Standardization from_json(const nlohmann::json& j);
};

}  // namespace semimix::io
