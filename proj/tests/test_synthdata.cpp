#include <set>

#include "doctest.h"
#include "support.hpp"
#include "ulab/error.hpp"
#include "ulab/synthdata.hpp"

using namespace ulab;
using namespace ulab::synth;

namespace {

SynthConfig small(Mode mode, double unbalance, int n = 1000) {
  SynthConfig c;
  c.mode = mode;
  c.unbalance = unbalance;
  c.n_train = n;
  c.theta_y = 2;
  c.seed = 31;
  return c;
}

long count_if_rows(const Dataset& d, auto pred) {
  long n = 0;
  for (std::size_t i = 0; i < d.size(); ++i) n += pred(i) ? 1 : 0;
  return n;
}

}  // namespace

TEST_SUITE("synthdata") {
  TEST_CASE("feature blocks are contiguous and disjoint") {
    SynthConfig c;
    const auto a = assign_feature_sets(c);
    CHECK(a.y1_set == std::vector<int>{4, 5, 6, 7});
    c.n_features = 16;
    const auto t = assign_feature_sets(c);
    std::set<int> all;
    for (const auto* s : {&t.y0_set, &t.y1_set, &t.z0_set, &t.z1_set}) all.insert(s->begin(), s->end());
    CHECK(all.size() == 16);
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == 15);
    c.n_features = 10;
    CHECK_THROWS_AS(assign_feature_sets(c), InvalidArgument);
  }

  TEST_CASE("feature ranges follow the offsets") {
    SynthConfig c = small(Mode::CBUC, 0.8, 2000);
    const auto d = generate_train(c);
    const auto a = assign_feature_sets(c);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto& yset = d.y[i] ? a.y1_set : a.y0_set;
      const auto& zset = (*d.z)[i] ? a.z1_set : a.z0_set;
      for (int j = 0; j < c.n_features; ++j) {
        const double v = d.x(Eigen::Index(i), j);
        const bool in_y = std::find(yset.begin(), yset.end(), j) != yset.end();
        const bool in_z = std::find(zset.begin(), zset.end(), j) != zset.end();
        const double lo = -5 + (in_y ? 2 : 0) + (in_z ? 3 : 0);
        REQUIRE(v >= lo);
        REQUIRE(v <= lo + 10);
      }
    }
  }

  TEST_CASE("active y-set features average theta_y") {
    SynthConfig c = small(Mode::CI, 0.5, 20000);
    const auto d = generate_train(c);
    double sum = 0;
    long n = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (d.y[i] == 1)
        for (int j = 4; j < 8; ++j, ++n) sum += d.x(Eigen::Index(i), j);
    CHECK(sum / double(n) == doctest::Approx(2.0).epsilon(0.02));
  }

  TEST_CASE("CI counts and minority flag") {
    const auto d = generate_train(small(Mode::CI, 0.5));
    CHECK(count_if_rows(d, [&](auto i) { return d.y[i] == 0; }) == 500);
    const auto u = generate_train(small(Mode::CI, 0.9));
    CHECK(count_if_rows(u, [&](auto i) { return u.y[i] == 0; }) == 900);
    CHECK(u.minority_label == 1);
    CHECK_FALSE(u.has_z());
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(u.d[i] == (u.y[i] == 1 ? 1 : 0));
    CHECK(k_factor(u, Mode::CI) == doctest::Approx(9.0));
  }

  TEST_CASE("CBUC counts at unbalance 0.8") {
    const auto d = generate_train(small(Mode::CBUC, 0.8));
    for (int y = 0; y < 2; ++y) {
      CHECK(count_if_rows(d, [&](auto i) { return d.y[i] == y && (*d.z)[i] == y; }) == 400);
      CHECK(count_if_rows(d, [&](auto i) { return d.y[i] == y && (*d.z)[i] != y; }) == 100);
    }
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(d.d[i] == u_value(d.y[i], (*d.z)[i]));
    CHECK(k_factor(d, Mode::CBUC) == doctest::Approx(4.0));
  }

  TEST_CASE("k_factor tracks the unbalance") {
    for (double u : {0.5, 0.6, 0.75, 0.9, 0.95}) {
      const auto d = generate_train(small(Mode::CBUC, u, 2000));
      CHECK(k_factor(d, Mode::CBUC) == doctest::Approx(u / (1 - u)).epsilon(0.01));
    }
  }

  TEST_CASE("validation sets are balanced and disjoint from training") {
    auto c = small(Mode::CBUC, 0.9);
    const auto v = generate_validation(c, 4000);
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z)
        CHECK(count_if_rows(v, [&](auto i) { return v.y[i] == y && (*v.z)[i] == z; }) == 1000);
    CHECK(k_factor(v, Mode::CBUC) == 1.0);
    CHECK_THROWS_AS(generate_validation(c, 4002), InvalidArgument);

    const auto t = generate_train(c);
    std::set<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < t.x.rows(); ++i) rows.insert({t.x.row(i).begin(), t.x.row(i).end()});
    for (Eigen::Index i = 0; i < v.x.rows(); ++i) CHECK(rows.count({v.x.row(i).begin(), v.x.row(i).end()}) == 0);
  }

  TEST_CASE("generation is deterministic and seed sensitive") {
    const auto c = small(Mode::CI, 0.7);
    const auto a = generate_train(c), b = generate_train(c);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    auto c2 = c;
    c2.seed = 32;
    CHECK_FALSE(generate_train(c2).x == a.x);
    CHECK(stream_seed(1, "train") != stream_seed(1, "validation"));
  }

  TEST_CASE("configuration errors") {
    auto c = small(Mode::CI, 1.0);
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c.unbalance = 0.4;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    auto tiny = small(Mode::CI, 0.9999, 100);
    CHECK_THROWS_AS(generate_train(tiny), DataError);
  }

  TEST_CASE("CSV round trip is exact") {
    const auto dir = ulab::testing::scratch_dir("synth_csv");
    auto c = small(Mode::CBUC, 0.8, 200);
    c.n_features = 20;
    const auto d = generate_train(c);
    write_dataset_csv(d, dir / "d.csv");
    const auto text = ulab::testing::slurp(dir / "d.csv");
    CHECK(text.rfind("f0,f1,", 0) == 0);
    CHECK(text.substr(0, text.find('\n')).ends_with("f19,y,z"));
    const auto back = read_dataset_csv(dir / "d.csv");
    CHECK(back.x == d.x);
    CHECK(back.y == d.y);
    CHECK(*back.z == *d.z);
    CHECK(back.d == d.d);
  }

  TEST_CASE("CSV reader names the bad row and column") {
    const auto dir = ulab::testing::scratch_dir("synth_bad");
    ulab::testing::spit(dir / "bad.csv", "f0,f1,y\n1,2,0\n3,abc,1\n");
    try {
      read_dataset_csv(dir / "bad.csv");
      FAIL("expected DataError");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("f1") != std::string::npos);
      CHECK(msg.find("row") != std::string::npos);
    }
    ulab::testing::spit(dir / "empty.csv", "");
    CHECK_THROWS_AS(read_dataset_csv(dir / "empty.csv"), DataError);
    ulab::testing::spit(dir / "label.csv", "f0,y\n1,2\n");
    CHECK_THROWS_AS(read_dataset_csv(dir / "label.csv"), DataError);
  }
}
