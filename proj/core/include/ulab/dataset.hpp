#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ulab {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Which notion of unbalance the under-representation flag encodes.
/// CI: d marks the minority class. CBUC: d = u = |z - y|.
enum class Mode { CI, CBUC };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

/// Feature matrix (one row per example) with binary labels, an optional
/// binary confounder and the derived under-representation flag.
struct Dataset {
  RowMatrix x;
  std::vector<int> y;
  std::optional<std::vector<int>> z;
  std::vector<int> d;
  /// Minority class of the owning training set; only meaningful in CI mode.
  int minority_label = 1;

  std::size_t size() const noexcept { return y.size(); }
  std::size_t width() const noexcept { return static_cast<std::size_t>(x.cols()); }
  bool has_z() const noexcept { return z.has_value(); }

  /// Rows picked by index, in the given order.
  Dataset subset(std::span<const std::size_t> rows) const;

  /// Throws DataError when the parts disagree in length or hold non-binary values.
  void validate() const;
};

/// |z - y|; 1 for under-represented (y, z) combinations.
constexpr int u_value(int y, int z) noexcept { return y == z ? 0 : 1; }

/// Class with the fewer examples; ties resolve to class 1.
int minority_class(std::span<const int> labels);

/// Recomputes d (and minority_label for CI) from y and z according to mode.
void assign_d(Dataset& data, Mode mode);

/// count(d = 0) / count(d = 1) with d assigned per mode. Throws DataError when
/// either group is empty, since the correction is undefined there.
double k_factor(const Dataset& data, Mode mode);

/// CSV with header f0..f{N-1},y[,z]; one row per example in storage order.
/// Values are written with 17 significant digits so that reloading is exact.
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);

/// Reads the format written by write_dataset_csv. d is assigned per mode; when
/// mode is empty it is CBUC if a z column exists and CI otherwise.
Dataset read_dataset_csv(const std::filesystem::path& path, std::optional<Mode> mode = std::nullopt);

}  // namespace ulab
