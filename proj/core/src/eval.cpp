#include "ulab/eval.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "ulab/error.hpp"

namespace ulab::eval {

std::string csv_header() { return "mode,underg_metric,overg_metric,fpr_gap,fnr_gap,n_underg,n_overg"; }

std::string to_csv_row(const GroupReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string(); };
  return fmt::format("{},{:.6f},{:.6f},{},{},{},{}", to_string(r.mode), r.underg_metric, r.overg_metric,
                     opt(r.fpr_gap), opt(r.fnr_gap), r.n_underg, r.n_overg);
}

GroupIndex group_indices(const Dataset& validation, Mode mode, int minority_label) {
  if (validation.size() == 0) throw DataError("split_groups: empty validation set");
  if (mode == Mode::CBUC && !validation.z) throw DataError("split_groups: CB/UC mode needs z");
  GroupIndex g;
  for (std::size_t i = 0; i < validation.size(); ++i) {
    const bool under = mode == Mode::CI ? validation.y[i] == minority_label
                                        : u_value(validation.y[i], (*validation.z)[i]) == 1;
    (under ? g.underg : g.overg).push_back(i);
  }
  if (g.underg.empty() || g.overg.empty())
    throw DataError(fmt::format("split_groups: empty group (UnderG {}, OverG {})", g.underg.size(), g.overg.size()));
  return g;
}

std::pair<Dataset, Dataset> split_groups(const Dataset& validation, Mode mode, int minority_label) {
  const auto g = group_indices(validation, mode, minority_label);
  return {validation.subset(g.underg), validation.subset(g.overg)};
}

double accuracy_group(std::span<const int> y, std::span<const double> p, double threshold) {
  if (y.empty()) throw DataError("accuracy_group: empty group");
  if (y.size() != p.size()) throw ShapeError("accuracy_group: predictions vs labels", long(y.size()), long(p.size()));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) correct += (p[i] > threshold ? 1 : 0) == y[i];
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

double auc_group(std::span<const int> y, std::span<const double> p) {
  if (y.size() != p.size()) throw ShapeError("auc_group: predictions vs labels", long(y.size()), long(p.size()));
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  // Sum of midranks of the positives (Mann-Whitney U).
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && p[order[j]] == p[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (y[order[k]] == 1) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = y.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("auc_group: group has a single class; use accuracy_group instead");
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double auc_pairwise(std::span<const int> y, std::span<const double> p) {
  double score = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      if (p[i] > p[j])
        score += 1.0;
      else if (p[i] == p[j])
        score += 0.5;
    }
  }
  if (pairs == 0) throw DataError("auc_pairwise: group has a single class");
  return score / static_cast<double>(pairs);
}

FairnessGaps fairness_gaps(std::span<const int> y, std::span<const int> z, std::span<const double> p,
                           double threshold) {
  if (y.size() != p.size() || z.size() != p.size())
    throw ShapeError("fairness_gaps: label/prediction lengths", long(p.size()), long(y.size()));
  // Errors (false positives for y=0, false negatives for y=1) per cell 2*y+z.
  long errors[4] = {0, 0, 0, 0};
  long counts[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int cell = 2 * y[i] + z[i];
    const int pred = p[i] > threshold ? 1 : 0;
    errors[cell] += pred != y[i];
    ++counts[cell];
  }
  for (int c = 0; c < 4; ++c)
    if (counts[c] == 0) throw DataError(fmt::format("fairness_gaps: empty cell y={}, z={}", c / 2, c % 2));
  auto rate = [&](int c) { return static_cast<double>(errors[c]) / static_cast<double>(counts[c]); };
  return {rate(0) - rate(1), rate(2) - rate(3)};
}

GroupReport evaluate(const Dataset& validation, std::span<const double> p, Mode mode, int minority_label,
                     double threshold) {
  if (p.size() != validation.size())
    throw ShapeError("evaluate: predictions vs validation rows", long(validation.size()), long(p.size()));
  const auto groups = group_indices(validation, mode, minority_label);
  auto metric = [&](const std::vector<std::size_t>& rows) {
    std::vector<int> gy(rows.size());
    std::vector<double> gp(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      gy[i] = validation.y[rows[i]];
      gp[i] = p[rows[i]];
    }
    return mode == Mode::CI ? accuracy_group(gy, gp, threshold) : auc_group(gy, gp);
  };
  GroupReport r;
  r.mode = mode;
  r.underg_metric = metric(groups.underg);
  r.overg_metric = metric(groups.overg);
  r.n_underg = static_cast<long>(groups.underg.size());
  r.n_overg = static_cast<long>(groups.overg.size());
  if (validation.z) {
    const auto gaps = fairness_gaps(validation.y, *validation.z, p, threshold);
    r.fpr_gap = gaps.fpr_gap;
    r.fnr_gap = gaps.fnr_gap;
  }
  return r;
}

}  // namespace ulab::eval
