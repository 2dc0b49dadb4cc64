#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>

#include "ulab/dataset.hpp"

namespace ulab::eval {

inline constexpr double kDefaultThreshold = 0.5;

/// Validation metrics split by representation group. The metric is accuracy
/// in CI mode (single-class groups) and AUC in CBUC mode.
struct GroupReport {
  Mode mode = Mode::CI;
  double underg_metric = 0.0;
  double overg_metric = 0.0;
  std::optional<double> fpr_gap;
  std::optional<double> fnr_gap;
  long n_underg = 0;
  long n_overg = 0;
};

/// Column order of to_csv_row.
std::string csv_header();
/// mode,underg_metric,overg_metric,fpr_gap,fnr_gap,n_underg,n_overg; absent gaps are empty cells.
std::string to_csv_row(const GroupReport& report);

/// Row indices of the two groups. CI: UnderG holds the rows of
/// `minority_label`; CBUC: UnderG holds u = 1 rows. Throws DataError when a
/// group is empty.
struct GroupIndex {
  std::vector<std::size_t> underg;
  std::vector<std::size_t> overg;
};
GroupIndex group_indices(const Dataset& validation, Mode mode, int minority_label = 1);

std::pair<Dataset, Dataset> split_groups(const Dataset& validation, Mode mode, int minority_label = 1);

/// Fraction of rows whose thresholded prediction (p > threshold) equals y.
double accuracy_group(std::span<const int> y, std::span<const double> p, double threshold = kDefaultThreshold);

/// Mann-Whitney AUC with half credit for tied scores. Throws DataError when
/// only one class is present.
double auc_group(std::span<const int> y, std::span<const double> p);

/// Exhaustive pair counting; O(n_pos * n_neg). Reference for auc_group.
double auc_pairwise(std::span<const int> y, std::span<const double> p);

struct FairnessGaps {
  double fpr_gap = 0.0;  // FPR(z=0) - FPR(z=1)
  double fnr_gap = 0.0;  // FNR(z=0) - FNR(z=1)
};

/// Signed hard-threshold rate gaps. Throws DataError when a (y, z) cell is empty.
FairnessGaps fairness_gaps(std::span<const int> y, std::span<const int> z, std::span<const double> p,
                           double threshold = kDefaultThreshold);

/// Full report for predictions p over `validation`. Gaps are filled when z is present.
GroupReport evaluate(const Dataset& validation, std::span<const double> p, Mode mode, int minority_label = 1,
                     double threshold = kDefaultThreshold);

}  // namespace ulab::eval
