#include "ulab/losses.hpp"

#include <cmath>

#include "ulab/error.hpp"

namespace ulab::losses {

CostSpec CostSpec::from_costs(double c0, double c1) {
  if (!(c0 >= 0) || !(c1 >= 0) || c0 + c1 <= 0) throw InvalidArgument("costs must be nonnegative and not both zero");
  return {c0, c1};
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::standard_ce: return "h_star";
    case LossKind::weighted_ce: return "weighted_ce";
    case LossKind::cc: return "cc";
    case LossKind::focal: return "focal";
    case LossKind::fbi: return "fbi";
    case LossKind::peo: return "peo";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& text) {
  if (text == "h_star" || text == "standard_ce" || text == "ce") return LossKind::standard_ce;
  if (text == "weighted_ce") return LossKind::weighted_ce;
  if (text == "cc") return LossKind::cc;
  if (text == "focal") return LossKind::focal;
  if (text == "fbi") return LossKind::fbi;
  if (text == "peo") return LossKind::peo;
  throw InvalidArgument("unknown loss '" + text + "'");
}

void LossSpec::validate() const {
  switch (kind) {
    case LossKind::standard_ce: break;
    case LossKind::weighted_ce:
      if (!(c > 0 && c < 1)) throw InvalidArgument("weighted_ce needs c in (0, 1)");
      break;
    case LossKind::cc:
      if (!(big_c > 0)) throw InvalidArgument("cc needs C > 0");
      break;
    case LossKind::focal:
      if (!(k > 0)) throw InvalidArgument("focal needs K > 0");
      if (!(alpha >= 0)) throw InvalidArgument("focal needs alpha >= 0");
      break;
    case LossKind::fbi:
      if (!(k > 0)) throw InvalidArgument("fbi needs K > 0");
      if (!(xi >= 0)) throw InvalidArgument("fbi needs xi >= 0");
      break;
    case LossKind::peo:
      if (!(lambda >= 0)) throw InvalidArgument("peo needs lambda >= 0");
      if (!(epsilon >= 0)) throw InvalidArgument("peo needs epsilon >= 0");
      break;
  }
}

LossValue h_star(int y, double p) {
  if (y == 1) return {-std::log(p), -1.0 / p};
  return {-std::log1p(-p), 1.0 / (1.0 - p)};
}

LossValue weighted_ce(int y, double p, double c) {
  if (y == 1) return {-(1.0 - c) * std::log(p), -(1.0 - c) / p};
  return {-c * std::log1p(-p), c / (1.0 - p)};
}

LossValue cc_loss(int y, double p, double big_c) {
  const auto base = h_star(y, p);
  if (y == 0) return base;
  return {big_c * base.loss, big_c * base.dloss_dp};
}

LossValue focal_loss(int y, double p, double k, double alpha) {
  const auto base = h_star(y, p);
  const double weight = y == 1 ? k : 1.0;
  // m = |y - p|, dm/dp = -1 for y = 1 and +1 for y = 0.
  const double m = y == 1 ? 1.0 - p : p;
  const double dm = y == 1 ? -1.0 : 1.0;
  if (alpha == 0.0) return {weight * base.loss, weight * base.dloss_dp};
  const double mod = std::pow(m, alpha);
  const double dmod = alpha * std::pow(m, alpha - 1.0) * dm;
  return {weight * mod * base.loss, weight * (dmod * base.loss + mod * base.dloss_dp)};
}

LossValue fbi_loss(int y, int d, double p, double k, double xi) {
  const auto base = h_star(y, p);
  if (d == 0 || xi == 0.0) return base;
  const double m = y == 1 ? 1.0 - p : p;
  const double dm = y == 1 ? -1.0 : 1.0;
  const double rate = static_cast<double>(d) * xi * std::log(k);
  const double weight = std::exp(rate * m);
  return {weight * base.loss, weight * (rate * dm * base.loss + base.dloss_dp)};
}

LossValue evaluate(const LossSpec& spec, int y, int d, double p) {
  switch (spec.kind) {
    case LossKind::standard_ce: return h_star(y, p);
    case LossKind::weighted_ce: return weighted_ce(y, p, spec.c);
    case LossKind::cc: return cc_loss(y, p, spec.big_c);
    case LossKind::focal: return focal_loss(y, p, spec.k, spec.alpha);
    case LossKind::fbi: return fbi_loss(y, d, p, spec.k, spec.xi);
    case LossKind::peo: break;
  }
  throw InvalidArgument("peo is a batch-level loss; use peo_batch_loss");
}

namespace {
double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }
}  // namespace

PeoConstraint peo_constraint(std::span<const int> y, std::span<const int> z, std::span<const double> p) {
  const auto n = p.size();
  if (y.size() != n || z.size() != n) throw InvalidArgument("peo_constraint: y, z and p must have equal length");
  // cell index = 2 * y + z
  double sums[4] = {0, 0, 0, 0};
  std::size_t counts[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const int cell = 2 * y[i] + z[i];
    sums[cell] += y[i] == 0 ? p[i] : 1.0 - p[i];
    ++counts[cell];
  }
  PeoConstraint out;
  out.grad.assign(n, 0.0);
  for (auto c : counts)
    if (c == 0) return out;
  out.defined = true;
  const double fpr0 = sums[0] / double(counts[0]);
  const double fpr1 = sums[1] / double(counts[1]);
  const double fnr0 = sums[2] / double(counts[2]);
  const double fnr1 = sums[3] / double(counts[3]);
  out.fpr_gap = fpr0 - fpr1;
  out.fnr_gap = fnr0 - fnr1;
  out.value = std::abs(out.fpr_gap) + std::abs(out.fnr_gap);
  const double sf = sign(out.fpr_gap);
  const double sn = sign(out.fnr_gap);
  for (std::size_t i = 0; i < n; ++i) {
    const int cell = 2 * y[i] + z[i];
    const double inv = 1.0 / double(counts[cell]);
    switch (cell) {
      case 0: out.grad[i] = sf * inv; break;
      case 1: out.grad[i] = -sf * inv; break;
      case 2: out.grad[i] = -sn * inv; break;  // d(1 - p)/dp = -1
      case 3: out.grad[i] = sn * inv; break;
    }
  }
  return out;
}

BatchLoss peo_batch_loss(std::span<const int> y, std::span<const int> z, std::span<const double> p, double lambda,
                         double epsilon) {
  const auto n = p.size();
  if (n == 0) throw InvalidArgument("peo_batch_loss: empty batch");
  BatchLoss out;
  out.grad.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = h_star(y[i], p[i]);
    out.loss += v.loss;
    out.grad[i] = v.dloss_dp;
  }
  out.loss /= double(n);
  if (lambda == 0.0) return out;
  const auto constraint = peo_constraint(y, z, p);
  if (!constraint.defined) {
    out.constraint_skipped = true;
    return out;
  }
  const double excess = constraint.value - epsilon;
  if (excess > 0) {
    out.loss += lambda * excess;
    const double scale = lambda * double(n);
    for (std::size_t i = 0; i < n; ++i) out.grad[i] += scale * constraint.grad[i];
  }
  return out;
}

int decision_rule(double p, double c) { return p > c ? 1 : 0; }

double weighted_error(int y, double p, double c) {
  const int pred = decision_rule(p, c);
  if (y == 1) return pred == 0 ? 1.0 - c : 0.0;
  return pred == 1 ? c : 0.0;
}

double baseline_shift(double c, double pi, double pi_hat) {
  const double denom = pi_hat * (c - pi) - pi * (c - 1.0);
  if (denom == 0.0) throw InvalidArgument("baseline_shift: degenerate input, denominator is zero");
  return c * pi_hat * (1.0 - pi) / denom;
}

}  // namespace ulab::losses
