#include "ulab/synthdata.hpp"

#include <fmt/format.h>

#include <cmath>
#include <utility>

#include "ulab/error.hpp"

namespace ulab::synth {

void SynthConfig::validate() const {
  if (n_features <= 0) throw InvalidArgument("n_features must be positive");
  if (set_size <= 0) throw InvalidArgument("set_size must be positive");
  if (4 * set_size > n_features)
    throw InvalidArgument(fmt::format("four disjoint feature sets of size {} do not fit in {} features", set_size,
                                      n_features));
  if (!(noise_bound > 0)) throw InvalidArgument("noise_bound must be positive");
  if (!(theta_y >= 0)) throw InvalidArgument("theta_y must be nonnegative");
  if (!(theta_z >= 0)) throw InvalidArgument("theta_z must be nonnegative");
  if (n_train <= 0) throw InvalidArgument("n_train must be positive");
  if (!(unbalance >= 0.5 && unbalance < 1.0))
    throw InvalidArgument(fmt::format("unbalance must lie in [0.5, 1), got {}", unbalance));
}

FeatureAssignment assign_feature_sets(const SynthConfig& config) {
  if (config.set_size <= 0 || 4 * config.set_size > config.n_features)
    throw InvalidArgument(fmt::format("four disjoint feature sets of size {} do not fit in {} features",
                                      config.set_size, config.n_features));
  FeatureAssignment a;
  auto block = [&](int k) {
    std::vector<int> out(static_cast<std::size_t>(config.set_size));
    for (int i = 0; i < config.set_size; ++i) out[static_cast<std::size_t>(i)] = k * config.set_size + i;
    return out;
  };
  a.y0_set = block(0);
  a.y1_set = block(1);
  a.z0_set = block(2);
  a.z1_set = block(3);
  return a;
}

Instance generate_instance(const SynthConfig& config, const FeatureAssignment& assignment, int y,
                           std::optional<int> z, Rng& rng) {
  if ((config.mode == Mode::CBUC) != z.has_value())
    throw InvalidArgument("z must be given exactly when generating CB/UC data");
  Instance inst;
  inst.x.resize(static_cast<std::size_t>(config.n_features));
  for (auto& v : inst.x) v = rng.uniform(-config.noise_bound, config.noise_bound);
  for (int j : (y == 1 ? assignment.y1_set : assignment.y0_set)) inst.x[static_cast<std::size_t>(j)] += config.theta_y;
  inst.y = y;
  if (z) {
    for (int j : (*z == 1 ? assignment.z1_set : assignment.z0_set))
      inst.x[static_cast<std::size_t>(j)] += config.theta_z;
    inst.z = z;
    inst.d = u_value(y, *z);
  } else {
    // Class 0 is the majority by construction, so class 1 is the minority.
    inst.d = y;
  }
  return inst;
}

std::uint64_t stream_seed(std::uint64_t base, std::string_view purpose) {
  return SeedHasher(base).add(purpose).value();
}

namespace {

// Draws instances for a prepared (y, z) label list after shuffling it.
Dataset materialize(const SynthConfig& config, std::vector<std::pair<int, int>> labels, std::uint64_t seed) {
  const auto assignment = assign_feature_sets(config);
  Rng rng(seed);
  rng.shuffle(std::span(labels));
  Dataset data;
  const auto n = labels.size();
  data.x.resize(static_cast<Eigen::Index>(n), config.n_features);
  data.y.resize(n);
  data.d.resize(n);
  if (config.mode == Mode::CBUC) data.z.emplace(n);
  data.minority_label = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [y, z] = labels[i];
    const auto inst = generate_instance(config, assignment, y,
                                        config.mode == Mode::CBUC ? std::optional<int>(z) : std::nullopt, rng);
    for (int j = 0; j < config.n_features; ++j)
      data.x(static_cast<Eigen::Index>(i), j) = inst.x[static_cast<std::size_t>(j)];
    data.y[i] = y;
    data.d[i] = inst.d;
    if (data.z) (*data.z)[i] = z;
  }
  return data;
}

void append(std::vector<std::pair<int, int>>& labels, long count, int y, int z) {
  for (long i = 0; i < count; ++i) labels.emplace_back(y, z);
}

}  // namespace

Dataset generate_train(const SynthConfig& config) {
  config.validate();
  std::vector<std::pair<int, int>> labels;
  labels.reserve(static_cast<std::size_t>(config.n_train));
  if (config.mode == Mode::CI) {
    const long majority = std::lround(config.unbalance * config.n_train);
    const long minority = config.n_train - majority;
    if (minority <= 0)
      throw DataError(fmt::format("unbalance {} leaves no minority examples out of {}", config.unbalance,
                                  config.n_train));
    append(labels, majority, 0, -1);
    append(labels, minority, 1, -1);
  } else {
    if (config.n_train % 2 != 0) throw InvalidArgument("CB/UC training size must be even (balanced y)");
    const long per_class = config.n_train / 2;
    const long over = std::lround(config.unbalance * static_cast<double>(per_class));
    const long under = per_class - over;
    if (under <= 0)
      throw DataError(fmt::format("unbalance {} leaves no under-represented examples out of {}", config.unbalance,
                                  config.n_train));
    for (int y = 0; y < 2; ++y) {
      append(labels, over, y, y);
      append(labels, under, y, 1 - y);
    }
  }
  return materialize(config, std::move(labels), stream_seed(config.seed, "train"));
}

Dataset generate_validation(const SynthConfig& config, int n_val, std::string_view purpose) {
  config.validate();
  const int cells = config.mode == Mode::CI ? 2 : 4;
  if (n_val <= 0 || n_val % cells != 0)
    throw InvalidArgument(fmt::format("validation size {} must be a positive multiple of {}", n_val, cells));
  if (purpose == "train") throw InvalidArgument("validation stream may not reuse the training purpose");
  std::vector<std::pair<int, int>> labels;
  labels.reserve(static_cast<std::size_t>(n_val));
  const long per_cell = n_val / cells;
  if (config.mode == Mode::CI) {
    append(labels, per_cell, 0, -1);
    append(labels, per_cell, 1, -1);
  } else {
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) append(labels, per_cell, y, z);
  }
  return materialize(config, std::move(labels), stream_seed(config.seed, purpose));
}

}  // namespace ulab::synth
