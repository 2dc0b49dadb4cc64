#include "ulab/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "csv_util.hpp"
#include "ulab/error.hpp"

namespace fs = std::filesystem;

namespace ulab::report {

namespace {

constexpr int kCell = 64;
constexpr int kLeft = 70;
constexpr int kTop = 50;

double cell_number(const fs::path& path, const std::string& cell, std::size_t row) {
  double v = 0;
  if (!detail::parse_double(cell, v))
    throw DataError(fmt::format("{}: row {}: bad value '{}'", path.string(), row + 1, cell));
  return v;
}

}  // namespace

Matrix read_matrix_csv(const fs::path& path) {
  const auto name = path.filename().string();
  const std::string prefix = "matrix_";
  Matrix m;
  for (const std::string group : {"underg", "overg"}) {
    const auto suffix = "_" + group + ".csv";
    if (name.starts_with(prefix) && name.ends_with(suffix) && name.size() > prefix.size() + suffix.size()) {
      m.method = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
      m.group = group;
    }
  }
  if (m.method.empty()) throw DataError(path.string() + ": not a matrix file name");
  const auto table = detail::read_csv(path);
  const auto& h = table.header;
  if (h.size() < 3 || h.front() != "theta_y" || h.back() != "avg_std")
    throw DataError(path.string() + ": unexpected header");
  for (std::size_t c = 1; c + 1 < h.size(); ++c) {
    double u = 0;
    if (!h[c].starts_with("u=") || !detail::parse_double(h[c].substr(2), u))
      throw DataError(path.string() + ": bad column '" + h[c] + "'");
    m.unbalance.push_back(u);
  }
  if (table.rows.empty()) throw DataError(path.string() + ": no rows");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    m.row_labels.push_back(row.front());
    std::vector<double> values;
    for (std::size_t c = 1; c + 1 < row.size(); ++c) values.push_back(cell_number(path, row[c], r));
    m.values.push_back(std::move(values));
    m.avg_std.push_back(cell_number(path, row.back(), r));
  }
  return m;
}

std::string color_for(double metric) {
  const double t = std::clamp(std::isnan(metric) ? 0.0 : metric, 0.0, 1.0);
  const int level = static_cast<int>(std::lround(16.0 + 224.0 * t));
  return fmt::format("#{0:02x}{0:02x}{0:02x}", level);
}

std::string heatmap_svg(const Matrix& m) {
  const int cols = static_cast<int>(m.unbalance.size());
  const int rows = static_cast<int>(m.row_labels.size());
  const int width = kLeft + cols * kCell + 110;
  const int height = std::max(kTop + rows * kCell + 50, kTop + 200);
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      width, height);
  s += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n", width, height);
  s += fmt::format("<text x=\"{}\" y=\"20\" font-size=\"14\">{} {}</text>\n", kLeft, m.method, m.group);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">unbalance</text>\n", kLeft + cols * kCell / 2,
                   kTop - 22);
  for (int c = 0; c < cols; ++c)
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:g}</text>\n", kLeft + c * kCell + kCell / 2,
                     kTop - 6, m.unbalance[c]);
  s += fmt::format("<text x=\"12\" y=\"{}\" transform=\"rotate(-90 12 {})\" text-anchor=\"middle\">theta_y</text>\n",
                   kTop + rows * kCell / 2, kTop + rows * kCell / 2);
  for (int r = 0; r < rows; ++r) {
    const int y = kTop + r * kCell;
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", kLeft - 6, y + kCell / 2 + 4,
                     m.row_labels[r]);
    for (int c = 0; c < cols; ++c) {
      const double v = m.values[r][c];
      const int x = kLeft + c * kCell;
      s += fmt::format(
          "<rect class=\"cell\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" data-row=\"{}\" "
          "data-col=\"{}\" data-value=\"{:.6f}\"/>\n",
          x, y, kCell, kCell, color_for(v), r, c, v);
      s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{}\">{:.2f}</text>\n", x + kCell / 2,
                       y + kCell / 2 + 4, v < 0.55 ? "#ffffff" : "#000000", v);
    }
  }
  // Legend: vertical bar from 1 (top) to 0 (bottom).
  const int lx = kLeft + cols * kCell + 30;
  constexpr int steps = 10;
  constexpr int step_h = 15;
  s += "<g class=\"legend\">\n";
  for (int i = 0; i < steps; ++i) {
    const double v = 1.0 - (i + 0.5) / steps;
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"20\" height=\"{}\" fill=\"{}\"/>\n", lx, kTop + i * step_h,
                     step_h, color_for(v));
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\">1</text>\n", lx + 26, kTop + 10);
  s += fmt::format("<text x=\"{}\" y=\"{}\">0</text>\n", lx + 26, kTop + steps * step_h);
  s += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", lx, kTop + steps * step_h + 20,
                   m.group == "underg" ? "UnderG" : "OverG");
  s += "</g>\n</svg>\n";
  return s;
}

std::vector<fs::path> write_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("results directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.starts_with("matrix_") && name.ends_with(".csv")) files.push_back(e.path());
  }
  if (files.empty()) throw DataError("no matrix_*.csv files in " + dir.string());
  std::sort(files.begin(), files.end());

  std::vector<Matrix> matrices;
  for (const auto& f : files) matrices.push_back(read_matrix_csv(f));

  std::vector<fs::path> written;
  for (const auto& m : matrices) {
    const auto out = dir / fmt::format("heatmap_{}_{}.svg", m.method, m.group);
    detail::write_file_atomic(out, heatmap_svg(m));
    written.push_back(out);
  }

  std::string text = "Results in " + dir.filename().string() + "\n";
  for (const auto& m : matrices) {
    text += fmt::format("\n{} {}\n{:>8}", m.method, m.group, "theta_y");
    for (double u : m.unbalance) text += fmt::format(" {:>8}", fmt::format("u={:g}", u));
    text += fmt::format(" {:>8}\n", "avg_std");
    for (std::size_t r = 0; r < m.row_labels.size(); ++r) {
      text += fmt::format("{:>8}", m.row_labels[r]);
      for (double v : m.values[r]) text += fmt::format(" {:>8.4f}", v);
      text += fmt::format(" {:>8.4f}\n", m.avg_std[r]);
    }
  }

  if (fs::exists(dir / "kxi_trend.csv")) {
    const auto trend = detail::read_csv(dir / "kxi_trend.csv");
    text += "\nSelected K^xi (fbi)\n";
    for (const auto& row : trend.rows)
      if (row.size() == 5)
        text += fmt::format("  unbalance {:>5} theta_y {:>5}  K {:>9}  xi {:>4}  K^xi {}\n", row[0], row[1], row[2],
                            row[3], row[4]);
  }

  if (fs::exists(dir / "summary.csv")) {
    const auto summary = detail::read_csv(dir / "summary.csv");
    const auto& h = summary.header;
    const auto col = [&](const std::string& name) {
      const auto it = std::find(h.begin(), h.end(), name);
      if (it == h.end()) throw DataError("summary.csv: missing column '" + name + "'");
      return static_cast<std::size_t>(it - h.begin());
    };
    const auto im = col("method"), it = col("theta_y"), iu = col("unbalance"), ifp = col("fpr_gap"),
               ifn = col("fnr_gap");
    std::string gaps = "method,theta_y,unbalance,fpr_gap,fnr_gap\n";
    bool any = false;
    for (const auto& row : summary.rows) {
      if (row[ifp].empty() || row[ifn].empty()) continue;
      any = true;
      gaps += fmt::format("{},{},{},{},{}\n", row[im], row[it], row[iu], row[ifp], row[ifn]);
    }
    if (any) {
      detail::write_file_atomic(dir / "fairness_gaps.csv", gaps);
      written.push_back(dir / "fairness_gaps.csv");
      text += "\nFPR/FNR gaps (z=0 minus z=1) are in fairness_gaps.csv\n";
    }
  }

  detail::write_file_atomic(dir / "report.txt", text);
  written.push_back(dir / "report.txt");
  return written;
}

}  // namespace ulab::report
