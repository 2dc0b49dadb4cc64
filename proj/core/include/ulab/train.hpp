#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ulab/dataset.hpp"
#include "ulab/eval.hpp"
#include "ulab/losses.hpp"
#include "ulab/net.hpp"

namespace ulab::train {

struct EarlyStop {
  /// Epochs without improvement of min(UnderG, OverG) on the monitor set.
  int patience = 5;
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 128;
  /// Template; each training run starts from a fresh copy.
  OptimizerState optimizer = OptimizerState::adam(1e-3);
  losses::LossSpec loss;
  std::uint64_t seed = 0;
  std::optional<EarlyStop> early_stop;

  void validate() const;
};

/// Optional held-out set scored at the end of every epoch.
struct Monitor {
  const Dataset* data = nullptr;
  Mode mode = Mode::CI;
  int minority_label = 1;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> lambda;
  std::optional<double> r2;
  std::optional<eval::GroupReport> validation;
};

struct History {
  std::vector<EpochRecord> epochs;
  /// Batches in which the fairness constraint was dropped because a (y, z) cell was empty.
  long skipped_constraint_batches = 0;
};

/// epoch,train_loss,lambda,r2,underg,overg; optional values are empty cells.
std::string history_csv(const History& history);

struct TrainResult {
  NetworkParams params;
  History history;
};

/// Mini-batch training of one loss. Shuffling and initialisation derive from
/// config.seed; returns the parameters after the last epoch.
TrainResult train_standard(const LayerSpec& spec, const Dataset& data, const TrainConfig& config,
                           const Monitor* monitor = nullptr);

/// Same loop starting from given parameters.
TrainResult train_standard_from(NetworkParams init, const Dataset& data, const TrainConfig& config,
                                const Monitor* monitor = nullptr);

struct LfoConfig {
  double lr_model = 1e-3;
  double lr_lambda = 1e-3;
  double epsilon = 0.05;
  double lambda_init = 0.0;

  void validate() const;
};

struct LfoResult {
  NetworkParams params;
  double lambda = 0.0;
  History history;
  /// Multiplier after every batch update.
  std::vector<double> lambda_steps;
};

/// Lagrangian two-player loop. Per batch the model descends
/// mean h_star + lambda (C_PEO - epsilon), then lambda ascends by
/// lr_lambda (C_PEO - epsilon) and is projected onto lambda >= 0.
LfoResult train_lfo(const LayerSpec& spec, const Dataset& data, const TrainConfig& config, const LfoConfig& lfo,
                    const Monitor* monitor = nullptr);

struct BrnnSpec {
  int input_width = 0;
  std::vector<int> trunk_widths{50};
  std::vector<int> classifier_hidden{10};
  std::vector<int> confounder_hidden{10};
  Activation activation = Activation::relu;
  double delta = 0.0;

  void validate() const;
};

struct BrnnParams {
  NetworkParams trunk;
  NetworkParams classifier;
  NetworkParams confounder;
};

BrnnParams init_brnn(const BrnnSpec& spec, std::uint64_t seed);

/// Class probabilities of classifier(trunk(x)).
Eigen::VectorXd predict_brnn(const BrnnParams& params, const Eigen::Ref<const Eigen::MatrixXd>& x);

/// Squared Pearson correlation and its gradient with respect to the predictions.
/// Zero variance in either argument yields r2 = 0 with a zero gradient.
struct Correlation {
  double r2 = 0.0;
  std::vector<double> grad;
};
Correlation pearson_r2(std::span<const int> z, std::span<const double> zhat);

/// Value of delta * r2(z, confounder(trunk(x))) and its gradient with
/// respect to the trunk parameters (the confounder head held fixed).
struct AdversarialTerm {
  double value = 0.0;
  Gradients trunk_grad;
};
AdversarialTerm brnn_adversarial_term(const BrnnParams& params, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                      std::span<const int> z, double delta);

struct BrnnResult {
  BrnnParams params;
  History history;
};

/// Adversarial loop. Per batch: (1) confounder head ascends r2(z, zhat);
/// (2) classifier head descends mean h_star; (3) trunk descends
/// mean h_star + delta r2 with r2 taken through the updated confounder head,
/// so the trunk works against the confounder head.
BrnnResult train_brnn(const BrnnSpec& spec, const Dataset& data, const TrainConfig& config,
                      const Monitor* monitor = nullptr);

/// Same loop from given parameters.
BrnnResult train_brnn_from(BrnnParams init, double delta, const Dataset& data, const TrainConfig& config,
                           const Monitor* monitor = nullptr);

}  // namespace ulab::train
