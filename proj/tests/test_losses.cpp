#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "ulab/error.hpp"
#include "ulab/dataset.hpp"
#include "ulab/losses.hpp"
#include "ulab/net.hpp"
#include "ulab/rng.hpp"

using namespace ulab;
using namespace ulab::losses;
using ulab::testing::central_diff;
using ulab::testing::rel_err;

namespace {
constexpr double kLn2 = 0.6931471805599453;
}

TEST_SUITE("losses") {
  TEST_CASE("h_star values") {
    CHECK(h_star(1, 0.5).loss == doctest::Approx(kLn2).epsilon(1e-15));
    CHECK(h_star(0, 0.5).loss == doctest::Approx(kLn2).epsilon(1e-15));
    CHECK(h_star(1, 1.0 - kProbClamp).loss < 1e-6);
    CHECK(h_star(0, 0.3).loss == doctest::Approx(-std::log(0.7)).epsilon(1e-14));
  }

  TEST_CASE("weighted_ce and cc values") {
    CHECK(weighted_ce(1, 0.5, 0.2).loss == doctest::Approx(0.5545177444479562).epsilon(1e-12));
    CHECK(weighted_ce(0, 0.5, 0.2).loss == doctest::Approx(0.13862943611198905).epsilon(1e-12));
    CHECK(cc_loss(1, 0.5, 4).loss == doctest::Approx(2.772588722239781).epsilon(1e-12));
    CHECK(cc_loss(0, 0.37, 123.0).loss == h_star(0, 0.37).loss);
  }

  TEST_CASE("focal values") {
    // 0.01 * -ln 0.9 with 40-digit arithmetic.
    CHECK(focal_loss(1, 0.9, 1, 2).loss == doctest::Approx(0.001053605156578263).epsilon(1e-12));
    CHECK(focal_loss(0, 0.1, 5, 2).loss == doctest::Approx(0.001053605156578263).epsilon(1e-12));
  }

  TEST_CASE("fbi values and reductions") {
    CHECK(fbi_loss(1, 1, 0.5, 4, 1).loss == doctest::Approx(1.3862943611198906).epsilon(1e-12));
    CHECK(fbi_loss(1, 0, 0.3, 9, 3).loss == h_star(1, 0.3).loss);
    CHECK(fbi_loss(0, 1, 0.3, 9, 0).loss == h_star(0, 0.3).loss);
    CHECK(fbi_loss(0, 1, 0.3, 9, 0).dloss_dp == h_star(0, 0.3).dloss_dp);
  }

  TEST_CASE("loss derivatives match central differences") {
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
      const int y = int(rng.below(2));
      const int d = int(rng.below(2));
      const double p = rng.uniform(0.01, 0.99);
      const double c = rng.uniform(0.05, 0.95);
      const double big_c = rng.uniform(0.1, 20);
      const double k = rng.uniform(0.5, 20);
      const double alpha = rng.uniform(0, 5);
      const double xi = rng.uniform(0, 5);
      auto check = [&](auto f) {
        const double fd = central_diff([&](double q) { return f(q).loss; }, p);
        CHECK(rel_err(f(p).dloss_dp, fd) < 1e-4);
      };
      check([&](double q) { return h_star(y, q); });
      check([&](double q) { return weighted_ce(y, q, c); });
      check([&](double q) { return cc_loss(y, q, big_c); });
      check([&](double q) { return focal_loss(y, q, k, alpha); });
      check([&](double q) { return fbi_loss(y, d, q, k, xi); });
    }
  }

  TEST_CASE("reduction identities hold exactly") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
      const int y = int(rng.below(2));
      const double p = rng.uniform(kProbClamp, 1 - kProbClamp);
      const double k = rng.uniform(0.1, 50);
      const double c = rng.uniform(0.01, 0.99);
      const auto h = h_star(y, p);
      CHECK(fbi_loss(y, 0, p, k, 2.5).loss == h.loss);
      CHECK(fbi_loss(y, 1, p, k, 0.0).loss == h.loss);
      CHECK(focal_loss(y, p, 1.0, 0.0).loss == h.loss);
      CHECK(cc_loss(y, p, 1.0).loss == h.loss);
      CHECK(weighted_ce(y, p, 0.5).loss == doctest::Approx(0.5 * h.loss).epsilon(1e-15));
      CHECK(weighted_ce(y, p, c).loss == doctest::Approx(c * cc_loss(y, p, (1 - c) / c).loss).epsilon(1e-14));
    }
  }

  TEST_CASE("PEO constraint on the hand-worked batch") {
    const std::vector<int> y{0, 0, 0, 1, 1}, z{0, 0, 1, 0, 1};
    const std::vector<double> p{0.2, 0.4, 0.6, 0.9, 0.7};
    const auto c = peo_constraint(y, z, p);
    REQUIRE(c.defined);
    CHECK(c.fpr_gap == doctest::Approx(-0.3));
    CHECK(c.fnr_gap == doctest::Approx(-0.2));
    CHECK(c.value == doctest::Approx(0.5));

    const auto zero = peo_batch_loss(y, z, p, 0.0, 0.0);
    double mean = 0;
    for (int i = 0; i < 5; ++i) mean += h_star(y[i], p[i]).loss / 5;
    CHECK(zero.loss == doctest::Approx(mean).epsilon(1e-15));
    const auto with = peo_batch_loss(y, z, p, 2.0, 0.1);
    CHECK(with.loss == doctest::Approx(mean + 2.0 * 0.4).epsilon(1e-12));
  }

  TEST_CASE("PEO symmetric batch has no penalty; empty cell skips it") {
    const std::vector<int> y{0, 0, 1, 1}, z{0, 1, 0, 1};
    const std::vector<double> p{0.3, 0.3, 0.8, 0.8};
    CHECK(peo_constraint(y, z, p).value == 0.0);
    const std::vector<int> z2{0, 0, 0, 1};
    const auto b = peo_batch_loss(y, z2, p, 1.0, 0.0);
    CHECK(b.constraint_skipped);
    CHECK_FALSE(peo_constraint(y, z2, p).defined);
  }

  TEST_CASE("PEO batch gradient matches central differences") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 12;
      std::vector<int> y(n), z(n);
      std::vector<double> p(n);
      for (int i = 0; i < n; ++i) {
        y[i] = (i / 3) % 2;
        z[i] = i % 2;
        p[i] = rng.uniform(0.05, 0.95);
      }
      const double lambda = rng.uniform(0.1, 2), eps = rng.uniform(0, 0.1);
      const auto b = peo_batch_loss(y, z, p, lambda, eps);
      if (std::abs(peo_constraint(y, z, p).value - eps) < 1e-3) continue;  // too close to the hinge
      for (int i = 0; i < n; ++i) {
        auto f = [&](double v) {
          auto q = p;
          q[i] = v;
          return peo_batch_loss(y, z, q, lambda, eps).loss;
        };
        CHECK(rel_err(b.grad[i] / n, central_diff(f, p[i])) < 1e-4);
      }
    }
  }

  TEST_CASE("decision rule and weighted error") {
    CHECK(decision_rule(0.5, 0.3) == 1);
    CHECK(decision_rule(0.3, 0.5) == 0);
    CHECK(decision_rule(0.5, 0.5) == 0);
    CHECK(weighted_error(1, 0.7, 0.5) == 0.0);
    CHECK(weighted_error(1, 0.3, 0.5) == 0.5);
    CHECK(weighted_error(0, 0.7, 0.2) == 0.2);
  }

  TEST_CASE("baseline shift") {
    CHECK(baseline_shift(0.5, 0.5, 0.2) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(baseline_shift(0.5, 0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
    // 0.108 / 0.22 from a 40-digit evaluation.
    CHECK(baseline_shift(0.3, 0.4, 0.6) == doctest::Approx(0.49090909090909090909).epsilon(1e-14));
    CHECK_THROWS_AS(baseline_shift(1.0, 0.0, 0.0), InvalidArgument);
  }

  TEST_CASE("spec validation and names") {
    LossSpec s;
    s.kind = LossKind::focal;
    s.k = 0;
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
    s.kind = LossKind::weighted_ce;
    s.c = 1.0;
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
    CHECK(parse_loss_kind("fbi") == LossKind::fbi);
    CHECK(parse_loss_kind("h_star") == LossKind::standard_ce);
    CHECK_THROWS(parse_loss_kind("hinge"));
    CHECK(CostSpec::from_costs(1, 3).c() == doctest::Approx(0.25));
    CHECK(CostSpec::from_costs(1, 3).big_c() == doctest::Approx(3.0));
  }

  TEST_CASE("u_value") {
    CHECK(u_value(1, 1) == 0);
    CHECK(u_value(1, 0) == 1);
    CHECK(u_value(0, 1) == 1);
    CHECK(u_value(0, 0) == 0);
  }
}
