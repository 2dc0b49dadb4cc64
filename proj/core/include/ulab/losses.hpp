#pragma once

#include <span>
#include <string>
#include <vector>

namespace ulab::losses {

/// Loss value and its derivative with respect to the predicted probability p.
struct LossValue {
  double loss = 0.0;
  double dloss_dp = 0.0;
};

/// Misclassification costs c0 (class 0) and c1 (class 1) with the derived
/// threshold c = c0 / (c0 + c1) and class-1 weight C = (1 - c) / c.
struct CostSpec {
  double c0 = 1.0;
  double c1 = 1.0;

  static CostSpec from_costs(double c0, double c1);
  double c() const noexcept { return c0 / (c0 + c1); }
  double big_c() const noexcept { return c1 / c0; }
};

enum class LossKind { standard_ce, weighted_ce, cc, focal, fbi, peo };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

/// Loss family plus its hyperparameters; only the fields used by `kind` are read.
struct LossSpec {
  LossKind kind = LossKind::standard_ce;
  double c = 0.5;        // weighted_ce
  double big_c = 1.0;    // cc
  double k = 1.0;        // focal, fbi
  double alpha = 0.0;    // focal
  double xi = 0.0;       // fbi
  double lambda = 0.0;   // peo
  double epsilon = 0.0;  // peo

  /// Throws InvalidArgument for out-of-range fields of the selected family.
  void validate() const;
  bool needs_d() const noexcept { return kind == LossKind::fbi; }
  bool needs_z() const noexcept { return kind == LossKind::peo; }
};

/// Standard cross-entropy -y log p - (1 - y) log(1 - p).
LossValue h_star(int y, double p);

/// -(1 - c) y log p - c (1 - y) log(1 - p).
LossValue weighted_ce(int y, double p, double c);

/// C^y * h_star.
LossValue cc_loss(int y, double p, double big_c);

/// K^y * |y - p|^alpha * h_star. The modulating factor is differentiated.
LossValue focal_loss(int y, double p, double k, double alpha);

/// K^(d * |y - p| * xi) * h_star; the gradient goes through the exponent.
LossValue fbi_loss(int y, int d, double p, double k, double xi);

/// Per-example losses for every family except peo (which is batch-level).
LossValue evaluate(const LossSpec& spec, int y, int d, double p);

/// Soft equalized-odds violation over a batch:
///   |softFPR(z=0) - softFPR(z=1)| + |softFNR(z=0) - softFNR(z=1)|
/// with softFPR(g) the mean p over y=0, z=g and softFNR(g) the mean 1-p over
/// y=1, z=g. grad[i] = dC/dp_i, using sign(0) = 0 at the kinks.
struct PeoConstraint {
  bool defined = false;  // false when one of the four (y, z) cells is empty
  double value = 0.0;
  double fpr_gap = 0.0;  // signed softFPR(z=0) - softFPR(z=1)
  double fnr_gap = 0.0;
  std::vector<double> grad;
};

PeoConstraint peo_constraint(std::span<const int> y, std::span<const int> z, std::span<const double> p);

struct BatchLoss {
  double loss = 0.0;
  /// grad[i] = B * dLoss/dp_i, so that the batch-mean convention of
  /// backward() reproduces the exact gradient of `loss`.
  std::vector<double> grad;
  bool constraint_skipped = false;
};

/// mean h_star + lambda * max(0, C_PEO - epsilon). An empty (y, z) cell drops
/// the constraint term for that batch and sets constraint_skipped.
BatchLoss peo_batch_loss(std::span<const int> y, std::span<const int> z, std::span<const double> p,
                         double lambda, double epsilon);

/// Predicts 1 iff p > c (ties go to class 0).
int decision_rule(double p, double c);

/// (1 - c) y 1[p <= c] + c (1 - y) 1[p > c].
double weighted_error(int y, double p, double c);

/// Threshold after the class-1 prior moves from pi to pi_hat:
///   c_hat = c pi_hat (1 - pi) / (pi_hat (c - pi) - pi (c - 1)).
/// Throws InvalidArgument when the denominator vanishes.
double baseline_shift(double c, double pi, double pi_hat);

}  // namespace ulab::losses
