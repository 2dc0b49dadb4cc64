#include "ulab/train.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ulab/error.hpp"
#include "ulab/rng.hpp"
#include "ulab/synthdata.hpp"

namespace ulab::train {

void TrainConfig::validate() const {
  if (epochs < 0) throw InvalidArgument("epochs must be nonnegative");
  if (batch_size < 1) throw InvalidArgument("batch_size must be positive");
  if (loss.kind == losses::LossKind::peo && batch_size < 2)
    throw InvalidArgument("peo needs batch_size >= 2 for its batch statistics");
  if (!(optimizer.learning_rate > 0)) throw InvalidArgument("learning rate must be positive");
  if (early_stop && early_stop->patience < 1) throw InvalidArgument("early-stop patience must be positive");
  loss.validate();
}

void LfoConfig::validate() const {
  if (!(lr_model > 0)) throw InvalidArgument("LFO model learning rate must be positive");
  if (!(lr_lambda >= 0)) throw InvalidArgument("LFO multiplier learning rate must be nonnegative");
  if (!(epsilon >= 0)) throw InvalidArgument("LFO epsilon must be nonnegative");
  if (!(lambda_init >= 0)) throw InvalidArgument("LFO initial multiplier must be nonnegative");
}

void BrnnSpec::validate() const {
  if (input_width <= 0) throw InvalidArgument("BR-NN input width must be positive");
  if (trunk_widths.empty()) throw InvalidArgument("BR-NN trunk needs at least one layer");
  if (!(delta >= 0)) throw InvalidArgument("BR-NN delta must be nonnegative");
}

std::string history_csv(const History& history) {
  std::string out = "epoch,train_loss,lambda,r2,underg,overg\n";
  auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{:.9g}", *v) : std::string(); };
  for (const auto& e : history.epochs) {
    std::optional<double> under, over;
    if (e.validation) {
      under = e.validation->underg_metric;
      over = e.validation->overg_metric;
    }
    fmt::format_to(std::back_inserter(out), "{},{:.9g},{},{},{},{}\n", e.epoch, e.train_loss, opt(e.lambda),
                   opt(e.r2), opt(under), opt(over));
  }
  return out;
}

namespace {

// Epoch-wise shuffled mini-batches over a dataset.
class Batcher {
 public:
  Batcher(const Dataset& data, int batch_size, std::uint64_t seed)
      : data_(data), batch_size_(static_cast<std::size_t>(batch_size)), rng_(seed), order_(data.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }

  void shuffle() { rng_.shuffle(std::span(order_)); }
  std::size_t count() const { return (order_.size() + batch_size_ - 1) / batch_size_; }

  // Fills rows/x/y/z/d for batch b of the current epoch.
  void load(std::size_t b) {
    const auto begin = b * batch_size_;
    const auto end = std::min(order_.size(), begin + batch_size_);
    const auto n = end - begin;
    rows.assign(order_.begin() + long(begin), order_.begin() + long(end));
    x.resize(long(n), data_.x.cols());
    y.resize(n);
    d.resize(n);
    z.resize(data_.z ? n : 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = rows[i];
      x.row(long(i)) = data_.x.row(long(r));
      y[i] = data_.y[r];
      d[i] = data_.d[r];
      if (data_.z) z[i] = (*data_.z)[r];
    }
  }

  std::vector<std::size_t> rows;
  Eigen::MatrixXd x;
  std::vector<int> y, z, d;

 private:
  const Dataset& data_;
  std::size_t batch_size_;
  Rng rng_;
  std::vector<std::size_t> order_;
};

std::uint64_t shuffle_seed(std::uint64_t seed) { return synth::stream_seed(seed, "shuffle"); }

void check_data(const Dataset& data, bool needs_z, const char* who) {
  data.validate();
  if (data.size() == 0) throw DataError(std::string(who) + ": empty dataset");
  if (needs_z && !data.z) throw DataError(std::string(who) + ": dataset has no z column, which this method requires");
}

void check_finite(double loss, int epoch, std::size_t batch) {
  if (!std::isfinite(loss)) throw NumericError(fmt::format("non-finite loss at epoch {} batch {}", epoch, batch));
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Scores the monitor set and reports whether training should stop early.
class EpochMonitor {
 public:
  EpochMonitor(const Monitor* monitor, const std::optional<EarlyStop>& early) : monitor_(monitor), early_(early) {}

  template <typename Predict>
  bool record(EpochRecord& rec, Predict&& predict) {
    if (monitor_ == nullptr || monitor_->data == nullptr) return false;
    const auto p = to_vector(predict(monitor_->data->x));
    rec.validation = eval::evaluate(*monitor_->data, p, monitor_->mode, monitor_->minority_label);
    if (!early_) return false;
    const double score = std::min(rec.validation->underg_metric, rec.validation->overg_metric);
    if (score > best_) {
      best_ = score;
      stale_ = 0;
      return false;
    }
    return ++stale_ >= early_->patience;
  }

 private:
  const Monitor* monitor_;
  std::optional<EarlyStop> early_;
  double best_ = -1.0;
  int stale_ = 0;
};

}  // namespace

TrainResult train_standard(const LayerSpec& spec, const Dataset& data, const TrainConfig& config,
                           const Monitor* monitor) {
  return train_standard_from(init_params(spec, synth::stream_seed(config.seed, "init")), data, config, monitor);
}

TrainResult train_standard_from(NetworkParams params, const Dataset& data, const TrainConfig& config,
                                const Monitor* monitor) {
  config.validate();
  const bool is_peo = config.loss.kind == losses::LossKind::peo;
  check_data(data, is_peo, "train_standard");
  if (data.width() != static_cast<std::size_t>(params.input_width()))
    throw ShapeError("train_standard: feature count vs network input", params.input_width(), long(data.width()));

  TrainResult result;
  OptimizerState opt = config.optimizer;
  Batcher batches(data, config.batch_size, shuffle_seed(config.seed));
  EpochMonitor epoch_monitor(monitor, config.early_stop);
  std::vector<double> grad;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    batches.shuffle();
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches.count(); ++b) {
      batches.load(b);
      const auto trace = forward(params, batches.x);
      const auto p = to_vector(trace.probabilities());
      const auto n = p.size();
      double batch_loss = 0.0;
      if (is_peo) {
        auto bl = losses::peo_batch_loss(batches.y, batches.z, p, config.loss.lambda, config.loss.epsilon);
        result.history.skipped_constraint_batches += bl.constraint_skipped;
        batch_loss = bl.loss;
        grad = std::move(bl.grad);
      } else {
        grad.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          const auto v = losses::evaluate(config.loss, batches.y[i], batches.d[i], p[i]);
          batch_loss += v.loss;
          grad[i] = v.dloss_dp;
        }
        batch_loss /= double(n);
      }
      check_finite(batch_loss, epoch, b);
      step(params, backward(params, trace, grad), opt);
      loss_sum += batch_loss * double(n);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / double(data.size());
    const bool stop = epoch_monitor.record(rec, [&](const auto& x) { return predict(params, x); });
    result.history.epochs.push_back(std::move(rec));
    if (stop) break;
  }
  result.params = std::move(params);
  return result;
}

LfoResult train_lfo(const LayerSpec& spec, const Dataset& data, const TrainConfig& config, const LfoConfig& lfo,
                    const Monitor* monitor) {
  config.validate();
  lfo.validate();
  check_data(data, true, "train_lfo");
  if (config.batch_size < 2) throw InvalidArgument("LFO needs batch_size >= 2");

  LfoResult result;
  NetworkParams params = init_params(spec, synth::stream_seed(config.seed, "init"));
  OptimizerState opt = config.optimizer;
  opt.learning_rate = lfo.lr_model;
  double lambda = lfo.lambda_init;
  Batcher batches(data, config.batch_size, shuffle_seed(config.seed));
  EpochMonitor epoch_monitor(monitor, config.early_stop);
  std::vector<double> grad;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    batches.shuffle();
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches.count(); ++b) {
      batches.load(b);
      const auto trace = forward(params, batches.x);
      const auto p = to_vector(trace.probabilities());
      const auto n = p.size();
      grad.resize(n);
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = losses::h_star(batches.y[i], p[i]);
        batch_loss += v.loss;
        grad[i] = v.dloss_dp;
      }
      batch_loss /= double(n);
      const auto constraint = losses::peo_constraint(batches.y, batches.z, p);
      double slack = 0.0;
      if (constraint.defined) {
        slack = constraint.value - lfo.epsilon;
        batch_loss += lambda * slack;
        const double scale = lambda * double(n);
        for (std::size_t i = 0; i < n; ++i) grad[i] += scale * constraint.grad[i];
      } else {
        ++result.history.skipped_constraint_batches;
      }
      check_finite(batch_loss, epoch, b);
      step(params, backward(params, trace, grad), opt);
      if (constraint.defined) lambda = std::max(0.0, lambda + lfo.lr_lambda * slack);
      result.lambda_steps.push_back(lambda);
      loss_sum += batch_loss * double(n);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / double(data.size());
    rec.lambda = lambda;
    const bool stop = epoch_monitor.record(rec, [&](const auto& x) { return predict(params, x); });
    result.history.epochs.push_back(std::move(rec));
    if (stop) break;
  }
  result.params = std::move(params);
  result.lambda = lambda;
  return result;
}

BrnnParams init_brnn(const BrnnSpec& spec, std::uint64_t seed) {
  spec.validate();
  BrnnParams p;
  p.trunk = init_feature_extractor(spec.input_width, spec.trunk_widths, spec.activation,
                                   synth::stream_seed(seed, "init-trunk"));
  const int features = spec.trunk_widths.back();
  p.classifier = init_params(LayerSpec{features, spec.classifier_hidden, 1, spec.activation},
                             synth::stream_seed(seed, "init-classifier"));
  p.confounder = init_params(LayerSpec{features, spec.confounder_hidden, 1, spec.activation},
                             synth::stream_seed(seed, "init-confounder"));
  return p;
}

Eigen::VectorXd predict_brnn(const BrnnParams& params, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  const auto features = forward(params.trunk, x);
  return predict(params.classifier, features.output());
}

Correlation pearson_r2(std::span<const int> z, std::span<const double> zhat) {
  const auto n = zhat.size();
  if (z.size() != n) throw ShapeError("pearson_r2: z vs predictions", long(n), long(z.size()));
  Correlation out;
  out.grad.assign(n, 0.0);
  if (n < 2) return out;
  double mz = 0.0, mh = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mz += z[i];
    mh += zhat[i];
  }
  mz /= double(n);
  mh /= double(n);
  double szz = 0.0, shh = 0.0, szh = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = z[i] - mz;
    const double b = zhat[i] - mh;
    szz += a * a;
    shh += b * b;
    szh += a * b;
  }
  // Near-constant predictions make the ratio numerically meaningless.
  if (szz <= 0.0 || shh <= 1e-300) return out;
  out.r2 = szh * szh / (szz * shh);
  const double g1 = 2.0 * szh / (szz * shh);
  const double g2 = 2.0 * out.r2 / shh;
  for (std::size_t i = 0; i < n; ++i) out.grad[i] = g1 * (z[i] - mz) - g2 * (zhat[i] - mh);
  return out;
}

namespace {

Eigen::MatrixXd column(std::span<const double> v, double scale) {
  Eigen::MatrixXd m(long(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(long(i), 0) = scale * v[i];
  return m;
}

// dLoss/dfeatures of delta * r2 through the confounder head.
Eigen::MatrixXd adversarial_feature_grad(const NetworkParams& confounder, const Eigen::MatrixXd& features,
                                         std::span<const int> z, double delta, double* r2_out) {
  const auto trace = forward(confounder, features);
  const auto zhat = to_vector(trace.output().col(0));
  const auto corr = pearson_r2(z, zhat);
  if (r2_out) *r2_out = corr.r2;
  Eigen::MatrixXd input_grad;
  backward_from_output(confounder, trace, column(corr.grad, delta), &input_grad);
  return input_grad;
}

}  // namespace

AdversarialTerm brnn_adversarial_term(const BrnnParams& params, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                      std::span<const int> z, double delta) {
  const auto trunk_trace = forward(params.trunk, x);
  double r2 = 0.0;
  const auto dfeat = adversarial_feature_grad(params.confounder, trunk_trace.output(), z, delta, &r2);
  return {delta * r2, backward_from_output(params.trunk, trunk_trace, dfeat)};
}

BrnnResult train_brnn(const BrnnSpec& spec, const Dataset& data, const TrainConfig& config, const Monitor* monitor) {
  spec.validate();
  return train_brnn_from(init_brnn(spec, config.seed), spec.delta, data, config, monitor);
}

BrnnResult train_brnn_from(BrnnParams params, double delta, const Dataset& data, const TrainConfig& config,
                           const Monitor* monitor) {
  config.validate();
  check_data(data, true, "train_brnn");
  if (config.batch_size < 8) throw InvalidArgument("BR-NN needs batch_size >= 8 for stable correlations");
  if (!(delta >= 0)) throw InvalidArgument("BR-NN delta must be nonnegative");
  if (data.width() != static_cast<std::size_t>(params.trunk.input_width()))
    throw ShapeError("train_brnn: feature count vs trunk input", params.trunk.input_width(), long(data.width()));

  BrnnResult result;
  OptimizerState opt_trunk = config.optimizer;
  OptimizerState opt_cls = config.optimizer;
  OptimizerState opt_conf = config.optimizer;
  Batcher batches(data, config.batch_size, shuffle_seed(config.seed));
  EpochMonitor epoch_monitor(monitor, config.early_stop);
  std::vector<double> grad;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    batches.shuffle();
    double loss_sum = 0.0;
    double r2_sum = 0.0;
    for (std::size_t b = 0; b < batches.count(); ++b) {
      batches.load(b);
      const auto n = batches.rows.size();
      const auto trunk_trace = forward(params.trunk, batches.x);
      const Eigen::MatrixXd& features = trunk_trace.output();

      // (1) confounder head maximises r2 through its own parameters.
      {
        const auto trace = forward(params.confounder, features);
        const auto corr = pearson_r2(batches.z, to_vector(trace.output().col(0)));
        step(params.confounder, backward_from_output(params.confounder, trace, column(corr.grad, -1.0)), opt_conf);
      }

      // (2) classifier head minimises mean h_star.
      const auto cls_trace = forward(params.classifier, features);
      const auto p = to_vector(cls_trace.probabilities());
      grad.resize(n);
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = losses::h_star(batches.y[i], p[i]);
        batch_loss += v.loss;
        grad[i] = v.dloss_dp;
      }
      batch_loss /= double(n);
      check_finite(batch_loss, epoch, b);
      Eigen::MatrixXd dfeatures;
      const auto cls_grads =
          backward_from_output(params.classifier, cls_trace, column(grad, 1.0 / double(n)), &dfeatures);
      step(params.classifier, cls_grads, opt_cls);

      // (3) trunk minimises mean h_star + delta r2 through the updated confounder head.
      double r2 = 0.0;
      if (delta != 0.0) {
        dfeatures += adversarial_feature_grad(params.confounder, features, batches.z, delta, &r2);
      } else {
        r2 = pearson_r2(batches.z, to_vector(predict(params.confounder, features))).r2;
      }
      step(params.trunk, backward_from_output(params.trunk, trunk_trace, dfeatures), opt_trunk);

      loss_sum += (batch_loss + delta * r2) * double(n);
      r2_sum += r2 * double(n);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / double(data.size());
    rec.r2 = r2_sum / double(data.size());
    const bool stop = epoch_monitor.record(rec, [&](const auto& x) { return predict_brnn(params, x); });
    result.history.epochs.push_back(std::move(rec));
    if (stop) break;
  }
  result.params = std::move(params);
  return result;
}

}  // namespace ulab::train
