#include "ulab/sweep.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "csv_util.hpp"
#include "json.hpp"
#include "ulab/error.hpp"
#include "ulab/eval.hpp"
#include "ulab/rng.hpp"
#include "ulab/train.hpp"

namespace fs = std::filesystem;

namespace ulab::sweep {

std::string to_string(Problem p) {
  switch (p) {
    case Problem::CI: return "CI";
    case Problem::CB: return "CB";
    case Problem::UC: return "UC";
  }
  return "?";
}

Problem parse_problem(const std::string& text) {
  if (text == "CI" || text == "ci") return Problem::CI;
  if (text == "CB" || text == "cb") return Problem::CB;
  if (text == "UC" || text == "uc") return Problem::UC;
  throw InvalidArgument("unknown problem '" + text + "' (expected CI, CB or UC)");
}

Mode mode_of(Problem p) { return p == Problem::CI ? Mode::CI : Mode::CBUC; }

double Candidate::get(const std::string& name, double fallback) const {
  for (const auto& [n, v] : values)
    if (n == name) return v;
  return fallback;
}

std::string Candidate::label() const {
  if (values.empty()) return "-";
  std::string out;
  for (const auto& [n, v] : values) {
    if (!out.empty()) out += ';';
    out += fmt::format("{}={:.17g}", n, v);
  }
  return out;
}

namespace {

Candidate parse_candidate(const std::string& label) {
  Candidate c;
  if (label == "-" || label.empty()) return c;
  std::stringstream ss(label);
  std::string part;
  while (std::getline(ss, part, ';')) {
    const auto eq = part.find('=');
    double v = 0;
    if (eq == std::string::npos || !detail::parse_double(part.substr(eq + 1), v))
      throw DataError("record: malformed hyperparameter '" + part + "'");
    c.values.emplace_back(part.substr(0, eq), v);
  }
  return c;
}

const std::map<std::string, std::vector<std::string>>& method_hyper_names() {
  static const std::map<std::string, std::vector<std::string>> names{
      {"h_star", {}},
      {"weighted_ce", {"c"}},
      {"cc", {"C"}},
      {"focal", {"alpha"}},
      {"fbi", {"xi"}},
      {"peo", {"lambda", "epsilon"}},
      {"lfo", {"epsilon", "lr_model", "lr_lambda"}},
      {"brnn", {"delta"}},
  };
  return names;
}

bool needs_z(const std::string& id) { return id == "peo" || id == "lfo" || id == "brnn"; }

bool same_value(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }
bool same_cell(const Cell& a, const Cell& b) {
  return same_value(a.theta_y, b.theta_y) && same_value(a.unbalance, b.unbalance);
}

std::string fmt_theta(double t) { return std::isnan(t) ? std::string("data") : fmt::format("{:g}", t); }

}  // namespace

std::vector<Candidate> expand_grid(const MethodSpec& method) {
  std::vector<Candidate> out{Candidate{}};
  for (const auto& [name, values] : method.grid) {
    if (values.empty()) throw InvalidArgument("method " + method.id + ": empty grid for " + name);
    std::vector<Candidate> next;
    for (const auto& c : out) {
      for (double v : values) {
        Candidate e = c;
        e.values.emplace_back(name, v);
        next.push_back(std::move(e));
      }
    }
    out = std::move(next);
  }
  return out;
}

MethodSpec default_method(const std::string& id) {
  if (id == "h_star") return {id, {}};
  if (id == "weighted_ce") return {id, {{"c", {0.01, 0.05, 0.1, 0.2, 0.3, 0.5}}}};
  if (id == "cc") return {id, {{"C", {1, 3, 10, 30, 100, 300, 1000}}}};
  if (id == "focal") return {id, {{"alpha", {0, 0.5, 1, 2, 3, 4, 5}}}};
  if (id == "fbi") return {id, {{"xi", {0, 0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4, 5}}}};
  if (id == "peo") return {id, {{"lambda", {0.5, 1, 1.5, 2}}, {"epsilon", {0, 0.05, 0.1}}}};
  if (id == "lfo")
    return {id, {{"epsilon", {0, 0.05, 0.1}}, {"lr_model", {1e-4, 1e-3}}, {"lr_lambda", {1e-5, 1e-4, 1e-3}}}};
  if (id == "brnn") return {id, {{"delta", {0, 0.25, 0.5, 1, 1.5, 2}}}};
  throw InvalidArgument("unknown method '" + id + "'");
}

void SweepPlan::validate() const {
  if (unbalance_grid.empty()) throw InvalidArgument("plan: empty unbalance grid");
  for (double u : unbalance_grid)
    if (!(u >= 0.5 && u < 1.0)) throw InvalidArgument(fmt::format("plan: unbalance {} outside [0.5, 1)", u));
  if (!real && complexity_grid.empty()) throw InvalidArgument("plan: empty complexity grid");
  for (double t : complexity_grid)
    if (!(t >= 0)) throw InvalidArgument("plan: theta_y values must be nonnegative");
  if (methods.empty()) throw InvalidArgument("plan: no methods");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    const auto it = method_hyper_names().find(m.id);
    if (it == method_hyper_names().end()) throw InvalidArgument("plan: unknown method '" + m.id + "'");
    if (!seen.insert(m.id).second) throw InvalidArgument("plan: method '" + m.id + "' listed twice");
    if (needs_z(m.id) && problem == Problem::CI)
      throw InvalidArgument("plan: method '" + m.id + "' needs a confounder and cannot run on a CI problem");
    std::vector<std::string> names;
    for (const auto& [n, v] : m.grid) names.push_back(n);
    if (names != it->second)
      throw InvalidArgument(fmt::format("plan: method '{}' expects hyperparameters [{}]", m.id,
                                        fmt::join(it->second, ", ")));
    expand_grid(m);
  }
  if (runs_per_cell < 1) throw InvalidArgument("plan: runs_per_cell must be positive");
  if (n_val <= 0 || n_select <= 0) throw InvalidArgument("plan: validation sizes must be positive");
  if (train.epochs < 0 || train.batch_size < 8 || !(train.learning_rate > 0))
    throw InvalidArgument("plan: train needs epochs >= 0, batch_size >= 8 and a positive learning rate");
  if (!real) {
    auto probe = synthetic;
    probe.mode = mode_of(problem);
    probe.unbalance = unbalance_grid.front();
    probe.theta_y = complexity_grid.front();
    probe.validate();
  }
}

SweepPlan parse_plan_json(const std::string& text, const fs::path& base_dir) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("plan: ") + e.what());
  }
  try {
    SweepPlan plan;
    plan.problem = parse_problem(j.at("problem").get<std::string>());
    plan.unbalance_grid = j.at("unbalance_grid").get<std::vector<double>>();
    if (j.contains("complexity_grid")) plan.complexity_grid = j["complexity_grid"].get<std::vector<double>>();
    plan.runs_per_cell = j.value("runs_per_cell", 10);
    plan.base_seed = j.value("base_seed", std::uint64_t{0});
    plan.n_val = j.value("n_val", 20000);
    plan.n_select = j.value("n_select", plan.n_val);
    if (j.contains("synthetic")) {
      const auto& s = j["synthetic"];
      auto& c = plan.synthetic;
      c.n_features = s.value("n_features", c.n_features);
      c.noise_bound = s.value("noise_bound", c.noise_bound);
      c.theta_z = s.value("theta_z", c.theta_z);
      c.set_size = s.value("set_size", c.set_size);
      c.n_train = s.value("n_train", c.n_train);
    }
    if (j.contains("real")) {
      const auto& r = j["real"];
      auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
      plan.real = RealSource{resolve(r.at("csv").get<std::string>()), resolve(r.at("schema").get<std::string>())};
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      plan.train.epochs = t.value("epochs", plan.train.epochs);
      plan.train.batch_size = t.value("batch_size", plan.train.batch_size);
      plan.train.learning_rate = t.value("learning_rate", plan.train.learning_rate);
      if (t.contains("hidden")) plan.train.hidden = t["hidden"].get<std::vector<int>>();
      if (t.contains("activation")) plan.train.activation = parse_activation(t["activation"].get<std::string>());
    }
    for (const auto& m : j.at("methods")) {
      MethodSpec spec;
      if (m.is_string()) {
        spec = default_method(m.get<std::string>());
      } else {
        spec.id = m.at("id").get<std::string>();
        if (m.contains("grid")) {
          for (const auto& [name, values] : m["grid"].items())
            spec.grid.emplace_back(name, values.get<std::vector<double>>());
        } else {
          spec = default_method(spec.id);
        }
      }
      plan.methods.push_back(std::move(spec));
    }
    plan.validate();
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("plan: ") + e.what());
  }
}

SweepPlan load_plan(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open plan " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_plan_json(ss.str(), path.parent_path());
}

SweepPlan desk_plan(Problem p) {
  SweepPlan plan;
  plan.problem = p;
  plan.synthetic.n_train = 20000;
  plan.unbalance_grid = {0.5, 0.8, 0.95};
  plan.complexity_grid = {0, 1, 2, 4};
  plan.runs_per_cell = 3;
  plan.base_seed = 20210101;
  plan.n_val = 4000;
  plan.n_select = 4000;
  plan.train.epochs = 10;
  const MethodSpec fbi{"fbi", {{"xi", {0, 0.5, 1, 2, 3, 4}}}};
  switch (p) {
    case Problem::CI:
      plan.methods = {{"h_star", {}}, {"cc", {{"C", {1, 10, 100, 1000}}}}, {"focal", {{"alpha", {0, 1, 2, 5}}}}, fbi};
      break;
    case Problem::CB: plan.methods = {{"h_star", {}}, {"brnn", {{"delta", {0, 0.5, 1, 2}}}}, fbi}; break;
    case Problem::UC:
      plan.methods = {{"h_star", {}},
                      {"peo", {{"lambda", {0.5, 2}}, {"epsilon", {0, 0.1}}}},
                      {"lfo", {{"epsilon", {0, 0.1}}, {"lr_model", {1e-3}}, {"lr_lambda", {1e-4, 1e-3}}}},
                      fbi};
      break;
  }
  plan.validate();
  return plan;
}

std::vector<Cell> cells_of(const SweepPlan& plan) {
  std::vector<Cell> cells;
  const std::vector<double> rows =
      plan.real ? std::vector<double>{std::numeric_limits<double>::quiet_NaN()} : plan.complexity_grid;
  for (double t : rows)
    for (double u : plan.unbalance_grid) cells.push_back({t, u});
  return cells;
}

std::uint64_t derive_seed(std::uint64_t base_seed, const Cell& cell, int run_index, std::string_view purpose) {
  return SeedHasher(base_seed)
      .add(std::isnan(cell.theta_y) ? -1.0 : cell.theta_y)
      .add(cell.unbalance)
      .add(static_cast<std::uint64_t>(run_index))
      .add(purpose)
      .value();
}

namespace {

void fill_ratios(CellData& d, Mode mode) {
  d.k = k_factor(d.train, mode);
  const auto ones = std::count(d.train.y.begin(), d.train.y.end(), 1);
  const auto zeros = static_cast<long>(d.train.size()) - ones;
  d.class_ratio = ones > 0 ? double(zeros) / double(ones) : 1.0;
  d.minority_label = mode == Mode::CI ? d.train.minority_label : 1;
}

CellData prepare_real(const SweepPlan& plan, const Cell& cell, int run_index, const ingest::EncodedTable& table) {
  const Mode mode = mode_of(plan.problem);
  auto split = ingest::subsample_to_unbalance(table.data, cell.unbalance, mode,
                                              derive_seed(plan.base_seed, cell, run_index, "subsample"));
  // Alternate rows of each balanced group between selection and validation.
  std::vector<std::size_t> sel, val;
  std::map<int, int> seen;
  for (std::size_t i = 0; i < split.validation.size(); ++i) {
    const int g = mode == Mode::CI ? split.validation.y[i] : 2 * split.validation.y[i] + (*split.validation.z)[i];
    (seen[g]++ % 2 == 0 ? sel : val).push_back(i);
  }
  CellData d;
  d.train = std::move(split.train);
  d.selection = split.validation.subset(sel);
  d.validation = split.validation.subset(val);
  Dataset* parts[] = {&d.train, &d.selection, &d.validation};
  const Dataset reference = d.train;
  ingest::standardize(reference, table.numeric_features, parts);
  fill_ratios(d, mode);
  return d;
}

CellData prepare(const SweepPlan& plan, const Cell& cell, int run_index, const ingest::EncodedTable* table) {
  if (plan.real) {
    if (table) return prepare_real(plan, cell, run_index, *table);
    const auto schema = ingest::load_schema(plan.real->schema);
    const auto loaded =
        ingest::load_csv(plan.real->csv, schema, mode_of(plan.problem), ingest::LoadOptions{.standardize = false});
    return prepare_real(plan, cell, run_index, loaded);
  }
  auto config = plan.synthetic;
  config.mode = mode_of(plan.problem);
  config.theta_y = cell.theta_y;
  config.unbalance = cell.unbalance;
  config.seed = derive_seed(plan.base_seed, cell, run_index, "data");
  CellData d;
  d.train = synth::generate_train(config);
  d.selection = synth::generate_validation(config, plan.n_select, "selection");
  d.validation = synth::generate_validation(config, plan.n_val, "validation");
  fill_ratios(d, config.mode);
  return d;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

CellData prepare_cell_data(const SweepPlan& plan, const Cell& cell, int run_index) {
  return prepare(plan, cell, run_index, nullptr);
}

RunRecord run_cell(const SweepPlan& plan, const MethodSpec& method, const Cell& cell, const Candidate& hyper,
                   int run_index, const CellData& data) {
  const Mode mode = mode_of(plan.problem);
  const int width = static_cast<int>(data.train.width());
  train::TrainConfig config;
  config.epochs = plan.train.epochs;
  config.batch_size = plan.train.batch_size;
  config.optimizer = OptimizerState::adam(plan.train.learning_rate);
  config.seed = derive_seed(plan.base_seed, cell, run_index, "train");
  const LayerSpec spec{width, plan.train.hidden, 1, plan.train.activation};

  std::function<Eigen::VectorXd(const RowMatrix&)> predictor;
  using losses::LossKind;
  const auto& id = method.id;
  if (id == "lfo") {
    train::LfoConfig lfo;
    lfo.epsilon = hyper.get("epsilon", lfo.epsilon);
    lfo.lr_model = hyper.get("lr_model", lfo.lr_model);
    lfo.lr_lambda = hyper.get("lr_lambda", lfo.lr_lambda);
    auto result = train::train_lfo(spec, data.train, config, lfo);
    predictor = [p = std::move(result.params)](const RowMatrix& x) { return predict(p, x); };
  } else if (id == "brnn") {
    train::BrnnSpec b;
    b.input_width = width;
    b.activation = plan.train.activation;
    if (plan.train.hidden.size() >= 2) {
      b.trunk_widths.assign(plan.train.hidden.begin(), plan.train.hidden.end() - 1);
      b.classifier_hidden = {plan.train.hidden.back()};
    } else {
      b.trunk_widths = plan.train.hidden.empty() ? std::vector<int>{8} : plan.train.hidden;
      b.classifier_hidden = {};
    }
    b.confounder_hidden = b.classifier_hidden;
    b.delta = hyper.get("delta", 0.0);
    auto result = train::train_brnn(b, data.train, config);
    predictor = [p = std::move(result.params)](const RowMatrix& x) { return train::predict_brnn(p, x); };
  } else {
    auto& loss = config.loss;
    if (id == "h_star") {
      loss.kind = LossKind::standard_ce;
    } else if (id == "weighted_ce") {
      loss.kind = LossKind::weighted_ce;
      loss.c = hyper.get("c", 0.5);
    } else if (id == "cc") {
      loss.kind = LossKind::cc;
      loss.big_c = hyper.get("C", 1.0);
    } else if (id == "focal") {
      loss.kind = LossKind::focal;
      loss.k = data.class_ratio;
      loss.alpha = hyper.get("alpha", 0.0);
    } else if (id == "fbi") {
      loss.kind = LossKind::fbi;
      loss.k = data.k;
      loss.xi = hyper.get("xi", 0.0);
    } else if (id == "peo") {
      loss.kind = LossKind::peo;
      loss.lambda = hyper.get("lambda", 0.0);
      loss.epsilon = hyper.get("epsilon", 0.0);
    } else {
      throw InvalidArgument("unknown method '" + id + "'");
    }
    auto result = train::train_standard(spec, data.train, config);
    predictor = [p = std::move(result.params)](const RowMatrix& x) { return predict(p, x); };
  }

  RunRecord rec;
  rec.method = id;
  rec.cell = cell;
  rec.run = run_index;
  rec.candidate = hyper;
  rec.k = data.k;
  const auto sel = eval::evaluate(data.selection, to_vector(predictor(data.selection.x)), mode, data.minority_label);
  const auto val = eval::evaluate(data.validation, to_vector(predictor(data.validation.x)), mode, data.minority_label);
  rec.select_under = sel.underg_metric;
  rec.select_over = sel.overg_metric;
  rec.val_under = val.underg_metric;
  rec.val_over = val.overg_metric;
  rec.fpr_gap = val.fpr_gap;
  rec.fnr_gap = val.fnr_gap;
  return rec;
}

RunRecord run_cell(const SweepPlan& plan, const MethodSpec& method, const Cell& cell, const Candidate& hyper,
                   int run_index) {
  return run_cell(plan, method, cell, hyper, run_index, prepare_cell_data(plan, cell, run_index));
}

Candidate select_best(const std::vector<RunRecord>& records) {
  if (records.empty()) throw InvalidArgument("select_best: no candidates");
  struct Score {
    Candidate candidate;
    std::vector<std::pair<int, std::pair<double, double>>> runs;  // run -> (under, over)
  };
  std::vector<Score> scores;
  for (const auto& r : records) {
    auto it = std::find_if(scores.begin(), scores.end(), [&](const Score& s) { return s.candidate == r.candidate; });
    if (it == scores.end()) {
      scores.push_back({r.candidate, {}});
      it = scores.end() - 1;
    }
    it->runs.push_back({r.run, {r.select_under, r.select_over}});
  }
  struct Ranked {
    double min, mean;
    std::vector<double> values;
    const Candidate* candidate;
  };
  std::vector<Ranked> ranked;
  for (auto& s : scores) {
    // Sum in run order so the result does not depend on record order.
    std::sort(s.runs.begin(), s.runs.end());
    double under = 0, over = 0;
    for (const auto& [run, m] : s.runs) {
      under += m.first;
      over += m.second;
    }
    under /= double(s.runs.size());
    over /= double(s.runs.size());
    std::vector<double> values;
    for (const auto& [n, v] : s.candidate.values) values.push_back(v);
    ranked.push_back({std::min(under, over), 0.5 * (under + over), std::move(values), &s.candidate});
  }
  const auto best = std::min_element(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.min != b.min) return a.min > b.min;
    if (a.mean != b.mean) return a.mean > b.mean;
    return a.values < b.values;
  });
  return *best->candidate;
}

std::pair<double, double> ResultMatrix::average_std(const std::string& method, std::size_t row) const {
  const auto& r = cells.at(method).at(row);
  double u = 0, o = 0;
  for (const auto& c : r) {
    u += c.under_std;
    o += c.over_std;
  }
  return {u / double(r.size()), o / double(r.size())};
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double mean = 0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / double(v.size()))};
}

}  // namespace

ResultMatrix assemble_matrix(const SweepPlan& plan, const std::vector<RunRecord>& records) {
  ResultMatrix m;
  m.problem = plan.problem;
  m.unbalance = plan.unbalance_grid;
  m.complexity = plan.real ? std::vector<double>{std::numeric_limits<double>::quiet_NaN()} : plan.complexity_grid;
  std::vector<std::string> missing;
  for (const auto& method : plan.methods) {
    m.methods.push_back(method.id);
    const auto candidates = expand_grid(method);
    auto& grid = m.cells[method.id];
    grid.assign(m.complexity.size(), std::vector<MatrixCell>(m.unbalance.size()));
    for (std::size_t r = 0; r < m.complexity.size(); ++r) {
      for (std::size_t c = 0; c < m.unbalance.size(); ++c) {
        const Cell cell{m.complexity[r], m.unbalance[c]};
        std::vector<RunRecord> mine;
        for (const auto& rec : records)
          if (rec.method == method.id && same_cell(rec.cell, cell)) mine.push_back(rec);
        for (int run = 0; run < plan.runs_per_cell; ++run) {
          for (const auto& cand : candidates) {
            const bool found = std::any_of(mine.begin(), mine.end(), [&](const RunRecord& x) {
              return x.run == run && x.candidate == cand;
            });
            if (!found)
              missing.push_back(fmt::format("{} theta_y={} unbalance={} run={} [{}]", method.id, fmt_theta(cell.theta_y),
                                            cell.unbalance, run, cand.label()));
          }
        }
        if (!missing.empty()) continue;
        auto& out = grid[r][c];
        out.chosen = select_best(mine);
        std::vector<const RunRecord*> chosen;
        for (const auto& rec : mine)
          if (rec.candidate == out.chosen && rec.run < plan.runs_per_cell) chosen.push_back(&rec);
        std::sort(chosen.begin(), chosen.end(), [](auto* a, auto* b) { return a->run < b->run; });
        chosen.erase(std::unique(chosen.begin(), chosen.end(), [](auto* a, auto* b) { return a->run == b->run; }),
                     chosen.end());
        std::vector<double> under, over, fpr, fnr, ks;
        for (const auto* rec : chosen) {
          under.push_back(rec->val_under);
          over.push_back(rec->val_over);
          ks.push_back(rec->k);
          if (rec->fpr_gap) fpr.push_back(*rec->fpr_gap);
          if (rec->fnr_gap) fnr.push_back(*rec->fnr_gap);
        }
        std::tie(out.under_mean, out.under_std) = mean_std(under);
        std::tie(out.over_mean, out.over_std) = mean_std(over);
        out.k = mean_std(ks).first;
        if (fpr.size() == chosen.size()) out.fpr_gap_mean = mean_std(fpr).first;
        if (fnr.size() == chosen.size()) out.fnr_gap_mean = mean_std(fnr).first;
        out.runs = static_cast<int>(chosen.size());
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = fmt::format("incomplete sweep: {} missing records", missing.size());
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 20); ++i) msg += "\n  " + missing[i];
    throw DataError(msg);
  }
  return m;
}

std::vector<KxiRow> kxi_trend(const ResultMatrix& matrix) {
  std::vector<KxiRow> rows;
  const auto it = matrix.cells.find("fbi");
  if (it == matrix.cells.end()) return rows;
  for (std::size_t c = 0; c < matrix.unbalance.size(); ++c) {
    for (std::size_t r = 0; r < matrix.complexity.size(); ++r) {
      const auto& cell = it->second[r][c];
      KxiRow row;
      row.unbalance = matrix.unbalance[c];
      row.theta_y = matrix.complexity[r];
      row.k = cell.k;
      row.xi = cell.chosen.get("xi", 0.0);
      row.k_pow_xi = row.xi == 0.0 ? 1.0 : std::pow(row.k, row.xi);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string records_csv_header() {
  return "method,theta_y,unbalance,run,candidate,k,select_under,select_over,val_under,val_over,fpr_gap,fnr_gap";
}

std::string to_csv_line(const RunRecord& r) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{:.17g}", *v) : std::string(); };
  return fmt::format("{},{},{:.17g},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{}", r.method,
                     std::isnan(r.cell.theta_y) ? std::string("nan") : fmt::format("{:.17g}", r.cell.theta_y),
                     r.cell.unbalance, r.run, r.candidate.label(), r.k, r.select_under, r.select_over, r.val_under,
                     r.val_over, opt(r.fpr_gap), opt(r.fnr_gap));
}

std::vector<RunRecord> parse_records_csv(const std::string& text) {
  std::vector<RunRecord> out;
  std::stringstream ss(text);
  std::string line;
  bool header = true;
  while (std::getline(ss, line)) {
    if (detail::trim(line).empty()) continue;
    if (header) {
      if (detail::trim(line) != records_csv_header()) throw DataError("record file: unexpected header");
      header = false;
      continue;
    }
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 12) throw DataError("record file: expected 12 cells, got " + std::to_string(cells.size()));
    auto num = [&](std::size_t i) {
      double v = 0;
      if (cells[i] == "nan") return std::numeric_limits<double>::quiet_NaN();
      if (!detail::parse_double(cells[i], v)) throw DataError("record file: bad number '" + cells[i] + "'");
      return v;
    };
    auto opt = [&](std::size_t i) -> std::optional<double> {
      if (cells[i].empty()) return std::nullopt;
      return num(i);
    };
    RunRecord r;
    r.method = cells[0];
    r.cell = {num(1), num(2)};
    r.run = static_cast<int>(num(3));
    r.candidate = parse_candidate(cells[4]);
    r.k = num(5);
    r.select_under = num(6);
    r.select_over = num(7);
    r.val_under = num(8);
    r.val_over = num(9);
    r.fpr_gap = opt(10);
    r.fnr_gap = opt(11);
    out.push_back(std::move(r));
  }
  if (header) throw DataError("record file: empty");
  return out;
}

namespace {

std::string task_file_name(const Cell& cell, int run) {
  return fmt::format("t{}_u{:g}_r{}.csv", fmt_theta(cell.theta_y), cell.unbalance, run);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

SweepStats run_sweep(const SweepPlan& plan, const fs::path& out_dir, const SweepOptions& options) {
  plan.validate();
  const auto records_dir = out_dir / "records";
  const bool has_output = fs::exists(records_dir) || fs::exists(out_dir / "summary.csv");
  if (has_output && !options.resume && !options.force)
    throw Error("output directory " + out_dir.string() +
                " already holds sweep results; pass resume to continue or force to overwrite");
  if (options.force && !options.resume && fs::exists(records_dir)) fs::remove_all(records_dir);
  fs::create_directories(records_dir);

  std::mutex log_mutex;
  auto log = [&](const std::string& msg) {
    if (!options.log) return;
    std::lock_guard lock(log_mutex);
    options.log(msg);
  };

  std::optional<ingest::EncodedTable> table;
  if (plan.real) {
    table = ingest::load_csv(plan.real->csv, ingest::load_schema(plan.real->schema), mode_of(plan.problem),
                             ingest::LoadOptions{.standardize = false});
  }

  struct Task {
    Cell cell;
    int run;
  };
  std::vector<Task> tasks;
  for (const auto& cell : cells_of(plan))
    for (int run = 0; run < plan.runs_per_cell; ++run) tasks.push_back({cell, run});

  SweepStats stats;
  std::vector<Task> pending;
  for (const auto& t : tasks) {
    const auto path = records_dir / task_file_name(t.cell, t.run);
    if (options.resume && fs::exists(path)) {
      parse_records_csv(read_text(path));  // must parse cleanly to count as complete
      ++stats.resumed;
      log(fmt::format("resumed theta_y={} unbalance={} run={}", fmt_theta(t.cell.theta_y), t.cell.unbalance, t.run));
    } else {
      pending.push_back(t);
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<int> computed{0};
  std::exception_ptr failure;
  std::string failure_where;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= pending.size()) return;
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      const auto& t = pending[i];
      try {
        const auto data = prepare(plan, t.cell, t.run, table ? &*table : nullptr);
        std::string content = records_csv_header() + "\n";
        for (const auto& method : plan.methods)
          for (const auto& cand : expand_grid(method))
            content += to_csv_line(run_cell(plan, method, t.cell, cand, t.run, data)) + "\n";
        detail::write_file_atomic(records_dir / task_file_name(t.cell, t.run), content);
        ++computed;
        log(fmt::format("computed theta_y={} unbalance={} run={}", fmt_theta(t.cell.theta_y), t.cell.unbalance,
                        t.run));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
          failure_where = fmt::format("theta_y={} unbalance={} run={}", fmt_theta(t.cell.theta_y), t.cell.unbalance,
                                      t.run);
        }
      }
    }
  };
  unsigned workers = options.workers > 0 ? unsigned(options.workers) : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, std::max<std::size_t>(1, pending.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception& e) {
      throw Error("sweep cell " + failure_where + ": " + e.what());
    }
  }
  stats.computed = computed.load();

  std::vector<RunRecord> records;
  for (const auto& t : tasks) {
    auto part = parse_records_csv(read_text(records_dir / task_file_name(t.cell, t.run)));
    records.insert(records.end(), part.begin(), part.end());
  }
  write_outputs(assemble_matrix(plan, records), out_dir);
  return stats;
}

void write_outputs(const ResultMatrix& m, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  for (const auto& method : m.methods) {
    const auto& grid = m.cells.at(method);
    for (const bool under : {true, false}) {
      std::string out = "theta_y";
      for (double u : m.unbalance) out += fmt::format(",u={:g}", u);
      out += ",avg_std\n";
      for (std::size_t r = 0; r < m.complexity.size(); ++r) {
        out += fmt_theta(m.complexity[r]);
        for (const auto& c : grid[r]) out += fmt::format(",{:.6f}", under ? c.under_mean : c.over_mean);
        const auto avg = m.average_std(method, r);
        out += fmt::format(",{:.6f}\n", under ? avg.first : avg.second);
      }
      detail::write_file_atomic(out_dir / fmt::format("matrix_{}_{}.csv", method, under ? "underg" : "overg"), out);
    }
  }

  std::string summary =
      "method,theta_y,unbalance,chosen,k,under_mean,under_std,over_mean,over_std,fpr_gap,fnr_gap,runs\n";
  auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string(); };
  for (const auto& method : m.methods) {
    const auto& grid = m.cells.at(method);
    for (std::size_t r = 0; r < m.complexity.size(); ++r)
      for (std::size_t c = 0; c < m.unbalance.size(); ++c) {
        const auto& x = grid[r][c];
        fmt::format_to(std::back_inserter(summary), "{},{},{:g},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{},{},{}\n",
                       method, fmt_theta(m.complexity[r]), m.unbalance[c], x.chosen.label(), x.k, x.under_mean,
                       x.under_std, x.over_mean, x.over_std, opt(x.fpr_gap_mean), opt(x.fnr_gap_mean), x.runs);
      }
  }
  detail::write_file_atomic(out_dir / "summary.csv", summary);

  std::string trend = "unbalance,theta_y,k,xi,k_pow_xi\n";
  for (const auto& row : kxi_trend(m))
    fmt::format_to(std::back_inserter(trend), "{:g},{},{:.6f},{:g},{:.6f}\n", row.unbalance, fmt_theta(row.theta_y),
                   row.k, row.xi, row.k_pow_xi);
  detail::write_file_atomic(out_dir / "kxi_trend.csv", trend);

  nlohmann::ordered_json meta;
  meta["problem"] = to_string(m.problem);
  meta["metric"] = m.problem == Problem::CI ? "accuracy" : "auc";
  meta["std_convention"] = "population";
  meta["methods"] = m.methods;
  meta["unbalance"] = m.unbalance;
  std::vector<std::string> rows;
  for (double t : m.complexity) rows.push_back(fmt_theta(t));
  meta["theta_y"] = rows;
  meta["selection_rule"] = "max min(UnderG, OverG) on the selection set; then max mean; then smaller values";
  detail::write_file_atomic(out_dir / "metadata.json", meta.dump(2) + "\n");
}

}  // namespace ulab::sweep
