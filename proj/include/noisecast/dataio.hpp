#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "noisecast/linalg.hpp"

namespace noisecast {

struct TransformStep {
    enum class Op { Lag, PctChange, Standardize, Demean, Select, DropNa };
    Op op = Op::DropNa;
    int k = 1;                         // Lag
    std::vector<std::string> columns;  // Select

    nlohmann::json to_json() const;
    static TransformStep from_json(const nlohmann::json& j);
};

// An immutable numeric table: named feature columns, one target column,
// a row index (date string or id), and the transform history that
// produced it.  All entries are finite; rows with missing cells are
// dropped at load time and counted.
struct Dataset {
    std::vector<std::string> feature_names;
    std::string target_name;
    std::string index_name;  // empty when no index column was declared
    Matrix X;
    Vector y;
    std::vector<std::string> index;
    std::vector<std::string> transform_log;  // human-readable effects
    std::vector<TransformStep> applied_steps;  // replayable history
    int dropped_rows = 0;

    int rows() const { return static_cast<int>(X.rows()); }
    int cols() const { return static_cast<int>(X.cols()); }
};

struct TransformSpec {
    std::vector<TransformStep> steps;

    static TransformSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Parses a headered CSV with decimal-point numeric cells; empty cells are
// missing values.  Rows missing the target or any feature are dropped and
// logged.  Errors carry row/column positions.
Dataset load_csv(const std::string& path, const std::string& target,
                 const std::optional<std::string>& index_column = {});

Dataset apply_transforms(const Dataset& d, const TransformSpec& spec);

// Snapshot: values as CSV plus a JSON sidecar (target, index, transform
// log, replayable steps).
void save_dataset(const Dataset& d, const std::string& csv_path,
                  const std::string& sidecar_path);

// In-memory dataset with a sequential row index ("0", "1", ...).
Dataset dataset_from_arrays(Matrix X, Vector y,
                            const std::string& target_name = "y",
                            const std::string& index_name = "t");

// Contiguous row slice [first, first + count).
Dataset dataset_rows(const Dataset& d, int first, int count);

}  // namespace noisecast
