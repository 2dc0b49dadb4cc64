#include "ulab/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "csv_util.hpp"
#include "ulab/error.hpp"

namespace ulab {

std::string to_string(Mode mode) { return mode == Mode::CI ? "CI" : "CBUC"; }

Mode parse_mode(const std::string& text) {
  if (text == "CI" || text == "ci") return Mode::CI;
  if (text == "CBUC" || text == "cbuc" || text == "CB" || text == "UC" || text == "cb" || text == "uc")
    return Mode::CBUC;
  throw InvalidArgument("unknown mode '" + text + "' (expected CI or CBUC)");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.minority_label = minority_label;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.y.reserve(rows.size());
  out.d.reserve(rows.size());
  if (z) out.z.emplace().reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    out.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(r));
    out.y.push_back(y[r]);
    out.d.push_back(d[r]);
    if (z) out.z->push_back((*z)[r]);
  }
  return out;
}

void Dataset::validate() const {
  const auto n = y.size();
  if (static_cast<std::size_t>(x.rows()) != n) throw ShapeError("feature rows vs labels", long(n), long(x.rows()));
  if (d.size() != n) throw ShapeError("d flags vs labels", long(n), long(d.size()));
  if (z && z->size() != n) throw ShapeError("z values vs labels", long(n), long(z->size()));
  auto binary = [](int v) { return v == 0 || v == 1; };
  if (!std::all_of(y.begin(), y.end(), binary)) throw DataError("y must be 0/1");
  if (!std::all_of(d.begin(), d.end(), binary)) throw DataError("d must be 0/1");
  if (z && !std::all_of(z->begin(), z->end(), binary)) throw DataError("z must be 0/1");
}

int minority_class(std::span<const int> labels) {
  const auto ones = std::count(labels.begin(), labels.end(), 1);
  const auto zeros = static_cast<std::ptrdiff_t>(labels.size()) - ones;
  return ones <= zeros ? 1 : 0;
}

void assign_d(Dataset& data, Mode mode) {
  data.d.resize(data.y.size());
  if (mode == Mode::CI) {
    data.minority_label = minority_class(data.y);
    for (std::size_t i = 0; i < data.y.size(); ++i) data.d[i] = data.y[i] == data.minority_label ? 1 : 0;
    return;
  }
  if (!data.z) throw DataError("CB/UC mode needs a confounder column z");
  for (std::size_t i = 0; i < data.y.size(); ++i) data.d[i] = u_value(data.y[i], (*data.z)[i]);
}

double k_factor(const Dataset& data, Mode mode) {
  Dataset tmp;
  tmp.y = data.y;
  tmp.z = data.z;
  assign_d(tmp, mode);
  const auto under = std::count(tmp.d.begin(), tmp.d.end(), 1);
  const auto over = static_cast<std::ptrdiff_t>(tmp.d.size()) - under;
  if (under == 0 || over == 0) {
    throw DataError(fmt::format(
        "K factor undefined: {} over-represented and {} under-represented examples; "
        "the unbalance correction needs both groups populated",
        over, under));
  }
  return static_cast<double>(over) / static_cast<double>(under);
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  data.validate();
  std::string out;
  out.reserve(static_cast<std::size_t>(data.x.size()) * 12);
  for (Eigen::Index j = 0; j < data.x.cols(); ++j) fmt::format_to(std::back_inserter(out), "f{},", j);
  out += data.z ? "y,z\n" : "y\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = data.x.row(static_cast<Eigen::Index>(i));
    for (Eigen::Index j = 0; j < row.size(); ++j) fmt::format_to(std::back_inserter(out), "{:.17g},", row[j]);
    if (data.z)
      fmt::format_to(std::back_inserter(out), "{},{}\n", data.y[i], (*data.z)[i]);
    else
      fmt::format_to(std::back_inserter(out), "{}\n", data.y[i]);
  }
  detail::write_file_atomic(path, out);
}

Dataset read_dataset_csv(const std::filesystem::path& path, std::optional<Mode> mode) {
  const auto table = detail::read_csv(path);
  const auto& h = table.header;
  auto find = [&](const std::string& name) -> long {
    const auto it = std::find(h.begin(), h.end(), name);
    return it == h.end() ? -1 : static_cast<long>(it - h.begin());
  };
  const long y_col = find("y");
  if (y_col < 0) throw DataError(path.string() + ": missing column 'y'");
  const long z_col = find("z");
  std::vector<long> feature_cols;
  for (long j = 0;; ++j) {
    const long c = find(fmt::format("f{}", j));
    if (c < 0) break;
    feature_cols.push_back(c);
  }
  if (table.rows.empty()) throw DataError(path.string() + ": no data rows");

  Dataset data;
  const auto n = table.rows.size();
  data.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(feature_cols.size()));
  data.y.resize(n);
  if (z_col >= 0) data.z.emplace(n);
  auto parse_bit = [&](const std::string& cell, std::size_t row, const char* col) {
    double v = 0;
    if (!detail::parse_double(cell, v) || (v != 0.0 && v != 1.0))
      throw DataError(fmt::format("{}: row {} column {}: expected 0 or 1, got '{}'", path.string(), row, col, cell));
    return static_cast<int>(v);
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = table.rows[i];
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      double v = 0;
      if (!detail::parse_double(row[static_cast<std::size_t>(feature_cols[j])], v) || !std::isfinite(v))
        throw DataError(fmt::format("{}: row {} column f{}: unparseable value '{}'", path.string(), i, j,
                                    row[static_cast<std::size_t>(feature_cols[j])]));
      data.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
    data.y[i] = parse_bit(row[static_cast<std::size_t>(y_col)], i, "y");
    if (z_col >= 0) (*data.z)[i] = parse_bit(row[static_cast<std::size_t>(z_col)], i, "z");
  }
  assign_d(data, mode.value_or(data.z ? Mode::CBUC : Mode::CI));
  return data;
}

}  // namespace ulab
