#include "ulab/ingest.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "csv_util.hpp"
#include "json.hpp"
#include "ulab/error.hpp"
#include "ulab/rng.hpp"

namespace ulab::ingest {

namespace {

ColumnKind parse_kind(const std::string& s) {
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "categorical") return ColumnKind::categorical;
  if (s == "target") return ColumnKind::target;
  if (s == "protected") return ColumnKind::protected_attr;
  if (s == "ignore") return ColumnKind::ignore;
  throw InvalidArgument("schema: unknown column kind '" + s + "'");
}

std::string normalize_label(std::string_view cell) {
  auto s = detail::trim(cell);
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

}  // namespace

void TabularSchema::validate() const {
  int targets = 0, protecteds = 0;
  std::set<std::string> names;
  for (const auto& c : columns) {
    if (!names.insert(c.name).second) throw InvalidArgument("schema: duplicate column '" + c.name + "'");
    targets += c.kind == ColumnKind::target;
    protecteds += c.kind == ColumnKind::protected_attr;
  }
  if (targets != 1) throw InvalidArgument(fmt::format("schema: need exactly one target column, found {}", targets));
  if (protecteds > 1) throw InvalidArgument("schema: at most one protected column is allowed");
  if (positive_labels.empty()) throw InvalidArgument("schema: positive_label is required");
  if (protecteds == 1 && protected_positive.empty())
    throw InvalidArgument("schema: protected_positive is required with a protected column");
}

TabularSchema parse_schema_json(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("schema: ") + e.what());
  }
  TabularSchema schema;
  if (!j.contains("columns") || !j["columns"].is_object()) throw InvalidArgument("schema: missing 'columns' object");
  for (const auto& [name, kind] : j["columns"].items()) schema.columns.push_back({name, parse_kind(kind.get<std::string>())});
  if (j.contains("positive_label")) {
    const auto& pl = j["positive_label"];
    if (pl.is_array())
      for (const auto& v : pl) schema.positive_labels.push_back(normalize_label(v.get<std::string>()));
    else
      schema.positive_labels.push_back(normalize_label(pl.get<std::string>()));
  }
  if (j.contains("protected_positive")) schema.protected_positive = detail::trim(j["protected_positive"].get<std::string>());
  schema.validate();
  return schema;
}

TabularSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_schema_json(ss.str());
}

EncodedTable load_csv(const std::filesystem::path& path, const TabularSchema& schema, Mode mode, LoadOptions options) {
  schema.validate();
  const auto table = detail::read_csv(path);
  if (table.rows.empty()) throw DataError(path.string() + ": no data rows");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < table.header.size(); ++i) index[table.header[i]] = i;
  auto col = [&](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) throw DataError(path.string() + ": missing column '" + name + "'");
    return it->second;
  };

  const auto n = table.rows.size();
  std::vector<std::size_t> numeric_cols;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> categorical;  // column, sorted categories
  std::size_t target_col = 0;
  std::optional<std::size_t> protected_col;
  EncodedTable out;
  for (const auto& c : schema.columns) {
    switch (c.kind) {
      case ColumnKind::numeric:
        numeric_cols.push_back(col(c.name));
        out.feature_names.push_back(c.name);
        break;
      case ColumnKind::categorical: categorical.push_back({col(c.name), {}}); break;
      case ColumnKind::target: target_col = col(c.name); break;
      case ColumnKind::protected_attr: protected_col = col(c.name); break;
      case ColumnKind::ignore: col(c.name); break;
    }
  }
  for (auto& [c, cats] : categorical) {
    std::set<std::string> seen;
    for (const auto& row : table.rows) seen.insert(detail::trim(row[c]));
    cats.assign(seen.begin(), seen.end());
    for (const auto& v : cats) out.feature_names.push_back(table.header[c] + "=" + v);
  }

  auto& data = out.data;
  const auto width = static_cast<Eigen::Index>(out.feature_names.size());
  data.x = RowMatrix::Zero(static_cast<Eigen::Index>(n), width);
  data.y.resize(n);
  if (protected_col) data.z.emplace(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = table.rows[i];
    Eigen::Index j = 0;
    for (auto c : numeric_cols) {
      double v = 0;
      if (!detail::parse_double(row[c], v) || !std::isfinite(v))
        throw DataError(fmt::format("{}: row {} column '{}': unparseable numeric value '{}'", path.string(), i,
                                    table.header[c], row[c]));
      data.x(static_cast<Eigen::Index>(i), j++) = v;
    }
    for (const auto& [c, cats] : categorical) {
      const auto v = detail::trim(row[c]);
      const auto pos = std::lower_bound(cats.begin(), cats.end(), v) - cats.begin();
      data.x(static_cast<Eigen::Index>(i), j + pos) = 1.0;
      j += static_cast<Eigen::Index>(cats.size());
    }
    const auto label = normalize_label(row[target_col]);
    data.y[i] = std::find(schema.positive_labels.begin(), schema.positive_labels.end(), label) !=
                        schema.positive_labels.end()
                    ? 1
                    : 0;
    if (protected_col) (*data.z)[i] = detail::trim(row[*protected_col]) == schema.protected_positive ? 1 : 0;
  }
  for (std::size_t k = 0; k < numeric_cols.size(); ++k) out.numeric_features.push_back(static_cast<int>(k));
  assign_d(data, mode);
  if (options.standardize) {
    Dataset* self[] = {&data};
    const Dataset reference = data;
    standardize(reference, out.numeric_features, self);
  }
  return out;
}

void standardize(const Dataset& reference, std::span<const int> numeric_features, std::span<Dataset* const> targets) {
  const auto n = static_cast<double>(reference.size());
  if (reference.size() == 0) throw DataError("standardize: empty reference set");
  for (int j : numeric_features) {
    const auto column = reference.x.col(j);
    const double mean = column.sum() / n;
    const double var = (column.array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    for (Dataset* t : targets) {
      auto c = t->x.col(j);
      if (sd > 0)
        c = (c.array() - mean) / sd;
      else
        c.setZero();
    }
  }
}

namespace {

// Index lists per group, each shuffled from the stream.
std::vector<std::vector<std::size_t>> shuffled_groups(const Dataset& source, Mode mode, Rng& rng) {
  std::vector<std::vector<std::size_t>> groups(mode == Mode::CI ? 2 : 4);
  for (std::size_t i = 0; i < source.size(); ++i) {
    const int g = mode == Mode::CI ? source.y[i] : 2 * source.y[i] + (*source.z)[i];
    groups[static_cast<std::size_t>(g)].push_back(i);
  }
  for (auto& g : groups) rng.shuffle(std::span(g));
  return groups;
}

}  // namespace

Split subsample_to_unbalance(const Dataset& source, double target_ratio, Mode mode, std::uint64_t seed) {
  source.validate();
  if (!(target_ratio >= 0.5 && target_ratio < 1.0))
    throw InvalidArgument(fmt::format("target ratio must lie in [0.5, 1), got {}", target_ratio));
  if (mode == Mode::CBUC && !source.z) throw DataError("CB/UC subsampling needs a protected column");
  Rng rng(seed);
  auto groups = shuffled_groups(source, mode, rng);
  std::size_t smallest = source.size();
  for (const auto& g : groups) smallest = std::min(smallest, g.size());
  const auto per_group = std::min(source.size() / 5 / groups.size(), smallest / 5);
  if (per_group == 0) throw DataError("not enough data to carve a balanced validation set (need 5 examples per group)");

  std::vector<std::size_t> val_rows;
  for (auto& g : groups) {
    val_rows.insert(val_rows.end(), g.begin(), g.begin() + long(per_group));
    g.erase(g.begin(), g.begin() + long(per_group));
  }

  std::vector<std::size_t> train_rows;
  auto take = [&](std::vector<std::size_t>& g, std::size_t count) {
    train_rows.insert(train_rows.end(), g.begin(), g.begin() + long(count));
  };
  const double r = target_ratio;
  const int source_minority = minority_class(source.y);
  if (mode == Mode::CI) {
    auto& major = groups[static_cast<std::size_t>(1 - source_minority)];
    auto& minor = groups[static_cast<std::size_t>(source_minority)];
    auto n_minor = minor.size();
    auto n_major = static_cast<std::size_t>(std::llround(r / (1.0 - r) * double(n_minor)));
    if (n_major > major.size()) {
      n_major = major.size();
      n_minor = static_cast<std::size_t>(std::llround(double(n_major) * (1.0 - r) / r));
    }
    if (n_minor < 1 || n_major < 1) {
      throw DataError(fmt::format("insufficient data for ratio {}: maximum achievable ratio is {:.6f}", r,
                                  double(major.size()) / double(major.size() + 1)));
    }
    take(major, n_major);
    take(minor, n_minor);
  } else {
    // groups index = 2 * y + z; over-represented cells have z == y.
    double per_class = std::numeric_limits<double>::infinity();
    double max_ratio = 1.0;
    for (int y = 0; y < 2; ++y) {
      const double over = double(groups[static_cast<std::size_t>(2 * y + y)].size());
      const double under = double(groups[static_cast<std::size_t>(2 * y + 1 - y)].size());
      per_class = std::min({per_class, over / r, under / (1.0 - r)});
      max_ratio = std::min(max_ratio, over / (over + 1.0));
    }
    const auto n_y = static_cast<std::size_t>(std::floor(per_class + 1e-9));
    const auto n_over = static_cast<std::size_t>(std::llround(r * double(n_y)));
    const auto n_under = n_y - std::min(n_y, n_over);
    if (n_under < 1 || n_over < 1) {
      throw DataError(
          fmt::format("insufficient data for ratio {}: maximum achievable ratio is {:.6f}", r, max_ratio));
    }
    for (int y = 0; y < 2; ++y) {
      take(groups[static_cast<std::size_t>(2 * y + y)], n_over);
      take(groups[static_cast<std::size_t>(2 * y + 1 - y)], n_under);
    }
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(val_rows.begin(), val_rows.end());

  Split split{source.subset(train_rows), source.subset(val_rows)};
  for (auto* part : {&split.train, &split.validation}) {
    if (mode == Mode::CI) {
      part->minority_label = source_minority;
      for (std::size_t i = 0; i < part->size(); ++i) part->d[i] = part->y[i] == source_minority ? 1 : 0;
    } else {
      assign_d(*part, mode);
    }
  }
  return split;
}

}  // namespace ulab::ingest
