#include <regex>

#include "doctest.h"
#include "support.hpp"
#include "ulab/error.hpp"
#include "ulab/report.hpp"

using namespace ulab;
using namespace ulab::report;
namespace fs = std::filesystem;

namespace {

int grey_level(const std::string& fill) { return std::stoi(fill.substr(1, 2), nullptr, 16); }

std::vector<std::pair<double, int>> cells_of_svg(const std::string& svg) {
  std::vector<std::pair<double, int>> out;
  const std::regex re(R"re(class="cell"[^>]*fill="(#[0-9a-f]{6})"[^>]*data-value="([0-9.eE+-]+)")re");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it)
    out.emplace_back(std::stod((*it)[2]), grey_level((*it)[1]));
  return out;
}

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("colour scale runs from dark to light") {
    CHECK(grey_level(color_for(0.0)) < 40);
    CHECK(grey_level(color_for(1.0)) > 220);
    CHECK(color_for(-3) == color_for(0));
    CHECK(color_for(7) == color_for(1));
  }

  TEST_CASE("single cell result gives a 1x1 heatmap with a legend") {
    const auto dir = ulab::testing::scratch_dir("report_one");
    ulab::testing::spit(dir / "matrix_h_star_underg.csv", "theta_y,u=0.5,avg_std\n2,0.812345,0.010000\n");
    const auto written = write_report(dir);
    CHECK(written.size() == 2);
    const auto svg = ulab::testing::slurp(dir / "heatmap_h_star_underg.svg");
    CHECK(cells_of_svg(svg).size() == 1);
    CHECK(svg.find("class=\"legend\"") != std::string::npos);
    CHECK(fs::exists(dir / "report.txt"));
  }

  TEST_CASE("cell colours follow metric order and reruns are byte identical") {
    const auto dir = ulab::testing::scratch_dir("report_rank");
    ulab::testing::spit(dir / "matrix_fbi_overg.csv",
                        "theta_y,u=0.5,u=0.8,u=0.95,avg_std\n"
                        "0,0.500000,0.431000,0.950000,0.01\n"
                        "1,0.120000,0.800000,0.660000,0.02\n");
    ulab::testing::spit(dir / "summary.csv",
                        "method,theta_y,unbalance,chosen,k,under_mean,under_std,over_mean,over_std,fpr_gap,fnr_gap,runs\n"
                        "fbi,0,0.5,xi=0,1,0.5,0,0.5,0,0.01,-0.02,3\n");
    write_report(dir);
    const auto svg = ulab::testing::slurp(dir / "heatmap_fbi_overg.svg");
    auto cells = cells_of_svg(svg);
    REQUIRE(cells.size() == 6);
    std::sort(cells.begin(), cells.end());
    for (std::size_t i = 1; i < cells.size(); ++i) CHECK(cells[i].second >= cells[i - 1].second);
    CHECK(cells.front().second < cells.back().second);
    CHECK(fs::exists(dir / "fairness_gaps.csv"));
    const auto text = ulab::testing::slurp(dir / "report.txt");
    write_report(dir);
    CHECK(ulab::testing::slurp(dir / "heatmap_fbi_overg.svg") == svg);
    CHECK(ulab::testing::slurp(dir / "report.txt") == text);
  }

  TEST_CASE("missing matrices are an error") {
    const auto dir = ulab::testing::scratch_dir("report_none");
    CHECK_THROWS_AS(write_report(dir), DataError);
    CHECK_THROWS_AS(write_report(dir / "nope"), DataError);
  }
}
