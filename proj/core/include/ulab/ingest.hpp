#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ulab/dataset.hpp"

namespace ulab::ingest {

enum class ColumnKind { numeric, categorical, target, protected_attr, ignore };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
};

/// Column roles of a real-world CSV. Exactly one target column, at most one
/// protected column. A row is positive when its trimmed target cell (with a
/// trailing '.' dropped) is one of positive_labels; z = 1 when the protected
/// cell equals protected_positive.
struct TabularSchema {
  std::vector<ColumnSpec> columns;
  std::vector<std::string> positive_labels;
  std::string protected_positive;

  void validate() const;
};

/// JSON document:
///   {"columns": {"age": "numeric", "sex": "protected", ...},
///    "positive_label": ">50K" | [">50K"], "protected_positive": "Male"}
/// Column order follows the JSON object order.
TabularSchema parse_schema_json(const std::string& text);
TabularSchema load_schema(const std::filesystem::path& path);

/// Encoded real-world table: numeric columns first in schema order, then one
/// indicator per category (alphabetical within each categorical column).
struct EncodedTable {
  Dataset data;
  std::vector<std::string> feature_names;
  /// Indices of the columns that came from numeric inputs.
  std::vector<int> numeric_features;
};

struct LoadOptions {
  /// z-score numeric columns with this file's statistics.
  bool standardize = true;
};

/// Reads, validates and encodes a CSV. d is assigned per mode (CBUC needs a
/// protected column). Throws DataError naming the row and column of the first
/// unparseable cell, a missing column or an empty file.
EncodedTable load_csv(const std::filesystem::path& path, const TabularSchema& schema, Mode mode,
                      LoadOptions options = {});

/// z-scores `numeric_features` of every dataset with the mean and population
/// standard deviation of `reference`. Constant columns become all zeros.
void standardize(const Dataset& reference, std::span<const int> numeric_features, std::span<Dataset* const> targets);

struct Split {
  Dataset train;
  Dataset validation;
};

/// Carves a balanced validation set first (equal classes in CI, equal (y, z)
/// cells in CBUC, at most 20% of the source and 20% of the smallest group),
/// then draws the training set without replacement at the target ratio of
/// over-represented examples. Deterministic in seed. Throws DataError with the
/// maximum achievable ratio when the remaining data cannot reach the target.
Split subsample_to_unbalance(const Dataset& source, double target_ratio, Mode mode, std::uint64_t seed);

}  // namespace ulab::ingest
