#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ulab/dataset.hpp"
#include "ulab/ingest.hpp"
#include "ulab/net.hpp"
#include "ulab/synthdata.hpp"

namespace ulab::sweep {

enum class Problem { CI, CB, UC };

std::string to_string(Problem p);
Problem parse_problem(const std::string& text);
Mode mode_of(Problem p);

/// Method identifiers: h_star, weighted_ce, cc, focal, fbi, peo, lfo, brnn.
/// Hyperparameter names per method:
///   weighted_ce: c        cc: C          focal: alpha     fbi: xi
///   peo: lambda, epsilon  lfo: epsilon, lr_model, lr_lambda
///   brnn: delta
struct MethodSpec {
  std::string id;
  /// Ordered (name, candidate values). The grid is their Cartesian product.
  std::vector<std::pair<std::string, std::vector<double>>> grid;
};

/// One point of a method's grid, values in the grid's name order.
struct Candidate {
  std::vector<std::pair<std::string, double>> values;

  double get(const std::string& name, double fallback) const;
  std::string label() const;  // "xi=0.5;..." or "-" when empty
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

std::vector<Candidate> expand_grid(const MethodSpec& method);

/// Default Table-1-range grids for each method id.
MethodSpec default_method(const std::string& id);

struct RealSource {
  std::filesystem::path csv;
  std::filesystem::path schema;
};

struct TrainSettings {
  int epochs = 30;
  int batch_size = 128;
  double learning_rate = 1e-3;
  std::vector<int> hidden{50, 10};
  Activation activation = Activation::relu;
};

struct SweepPlan {
  Problem problem = Problem::CI;
  synth::SynthConfig synthetic;  // template; theta_y, unbalance, seed and mode are set per cell
  std::optional<RealSource> real;
  std::vector<double> unbalance_grid;
  std::vector<double> complexity_grid;  // theta_y values; ignored for real data
  std::vector<MethodSpec> methods;
  int runs_per_cell = 10;
  std::uint64_t base_seed = 0;
  int n_val = 20000;
  int n_select = 20000;
  TrainSettings train;

  void validate() const;
};

/// Parses the JSON plan document (see README for the schema). Relative data
/// paths resolve against base_dir.
SweepPlan parse_plan_json(const std::string& text, const std::filesystem::path& base_dir = {});
SweepPlan load_plan(const std::filesystem::path& path);

/// The reduced plan for problem p: N_T = 20000, 3 runs, coarse grids.
SweepPlan desk_plan(Problem p);

/// Grid point. theta_y is NaN for real-data plans.
struct Cell {
  double theta_y = 0.0;
  double unbalance = 0.5;
};

std::vector<Cell> cells_of(const SweepPlan& plan);

/// Stable per-(cell, run, purpose) seed.
std::uint64_t derive_seed(std::uint64_t base_seed, const Cell& cell, int run_index, std::string_view purpose);

/// Datasets shared by every method evaluated on one (cell, run).
struct CellData {
  Dataset train;
  Dataset selection;
  Dataset validation;
  double k = 1.0;              // k_factor of the training set
  double class_ratio = 1.0;    // count(y=0) / count(y=1) of the training set
  int minority_label = 1;
};

CellData prepare_cell_data(const SweepPlan& plan, const Cell& cell, int run_index);

struct RunRecord {
  std::string method;
  Cell cell;
  int run = 0;
  Candidate candidate;
  double k = 1.0;
  double select_under = 0.0;
  double select_over = 0.0;
  double val_under = 0.0;
  double val_over = 0.0;
  std::optional<double> fpr_gap;
  std::optional<double> fnr_gap;
};

RunRecord run_cell(const SweepPlan& plan, const MethodSpec& method, const Cell& cell, const Candidate& hyper,
                   int run_index, const CellData& data);
/// Convenience overload that prepares the data itself.
RunRecord run_cell(const SweepPlan& plan, const MethodSpec& method, const Cell& cell, const Candidate& hyper,
                   int run_index);

/// Chooses the candidate maximising min(mean UnderG, mean OverG) on the
/// selection set, then the larger mean of the two, then the lexicographically
/// smaller hyperparameter values. Records may come in any order.
Candidate select_best(const std::vector<RunRecord>& records);

struct MatrixCell {
  double under_mean = 0.0, under_std = 0.0;
  double over_mean = 0.0, over_std = 0.0;
  std::optional<double> fpr_gap_mean, fnr_gap_mean;
  Candidate chosen;
  double k = 1.0;  // mean k_factor over runs
  int runs = 0;
};

/// Mean and population standard deviation per (method, complexity, unbalance).
struct ResultMatrix {
  Problem problem = Problem::CI;
  std::vector<double> complexity;  // rows
  std::vector<double> unbalance;   // columns
  std::vector<std::string> methods;
  std::map<std::string, std::vector<std::vector<MatrixCell>>> cells;  // method -> [row][col]

  /// Per-row average of the standard deviations (UnderG, OverG).
  std::pair<double, double> average_std(const std::string& method, std::size_t row) const;
};

/// Throws DataError listing the missing (method, cell, run) combinations.
ResultMatrix assemble_matrix(const SweepPlan& plan, const std::vector<RunRecord>& records);

struct KxiRow {
  double unbalance = 0.0;
  double theta_y = 0.0;
  double k = 1.0;
  double xi = 0.0;
  double k_pow_xi = 1.0;
};

/// K^xi per cell from the fbi selections.
std::vector<KxiRow> kxi_trend(const ResultMatrix& matrix);

/// Record file format (one line per record).
std::string records_csv_header();
std::string to_csv_line(const RunRecord& r);
std::vector<RunRecord> parse_records_csv(const std::string& text);

struct SweepOptions {
  int workers = 0;  // 0 = hardware concurrency
  bool resume = false;
  bool force = false;
  std::function<void(const std::string&)> log;
};

struct SweepStats {
  int computed = 0;
  int resumed = 0;
};

/// Runs every (cell, run) task on a worker pool, writing one record file per
/// task under out_dir/records, then the matrices, the K^xi table and a summary.
/// Refuses to touch a directory with earlier output unless resume or force is set.
SweepStats run_sweep(const SweepPlan& plan, const std::filesystem::path& out_dir, const SweepOptions& options = {});

/// Writes matrix_<method>_<group>.csv, summary.csv, kxi_trend.csv and metadata.json.
void write_outputs(const ResultMatrix& matrix, const std::filesystem::path& out_dir);

}  // namespace ulab::sweep
