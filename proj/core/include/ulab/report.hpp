#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ulab::report {

/// One matrix_<method>_<group>.csv file.
struct Matrix {
  std::string method;
  std::string group;  // underg or overg
  std::vector<std::string> row_labels;  // theta_y values, or "data"
  std::vector<double> unbalance;
  std::vector<std::vector<double>> values;  // [row][unbalance]
  std::vector<double> avg_std;
};

Matrix read_matrix_csv(const std::filesystem::path& path);

/// Grey level for a metric in [0, 1]: 0 maps to near black, 1 to near white.
/// Values outside the range are clamped.
std::string color_for(double metric);

/// Heatmap with rows by complexity, columns by increasing unbalance and a
/// colour legend.
std::string heatmap_svg(const Matrix& matrix);

/// Reads every matrix in results_dir and writes heatmap_<method>_<group>.svg,
/// report.txt and, when gaps were recorded, fairness_gaps.csv. Output depends
/// only on the CSV files. Returns the written paths in order.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& results_dir);

}  // namespace ulab::report
