#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "ulab/dataset.hpp"
#include "ulab/rng.hpp"

namespace ulab::synth {

/// Synthetic benchmark parameters. Instances are n_features-dimensional
/// Uniform(-noise_bound, noise_bound) vectors; theta_y is added to the features
/// of the example's y-set and, in CBUC mode, theta_z to its z-set.
struct SynthConfig {
  int n_features = 100;
  double noise_bound = 5.0;
  double theta_y = 1.0;
  double theta_z = 3.0;
  int set_size = 4;
  int n_train = 100000;
  /// Fraction of over-represented instances in the training set.
  double unbalance = 0.5;
  Mode mode = Mode::CI;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Index ranges of the four disjoint feature blocks (contiguous, in the order y0, y1, z0, z1).
struct FeatureAssignment {
  std::vector<int> y0_set;
  std::vector<int> y1_set;
  std::vector<int> z0_set;
  std::vector<int> z1_set;
};

/// Throws InvalidArgument when 4 * set_size > n_features.
FeatureAssignment assign_feature_sets(const SynthConfig& config);

/// One instance drawn from `rng`: n_features uniform draws in index order,
/// then the class (and confounder) offsets.
struct Instance {
  std::vector<double> x;
  int y = 0;
  std::optional<int> z;
  int d = 0;
};

Instance generate_instance(const SynthConfig& config, const FeatureAssignment& assignment, int y,
                           std::optional<int> z, Rng& rng);

/// Stream seeds; "train" and "validation" never share a stream.
std::uint64_t stream_seed(std::uint64_t base, std::string_view purpose);

/// CI: round(unbalance * n_train) examples of class 0, the rest class 1.
/// CBUC: balanced y; within each class round(unbalance * n_train / 2) examples
/// have z = y. Throws DataError when a group would be empty.
Dataset generate_train(const SynthConfig& config);

/// Balanced set: classes equal (CI) or all four (y, z) cells equal (CBUC).
/// `purpose` selects the seed stream; the default is the final validation set.
Dataset generate_validation(const SynthConfig& config, int n_val, std::string_view purpose = "validation");

}  // namespace ulab::synth
