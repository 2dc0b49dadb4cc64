// ulab: generate, train, eval, sweep and report from the command line.

#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ulab/dataset.hpp"
#include "ulab/error.hpp"
#include "ulab/eval.hpp"
#include "ulab/report.hpp"
#include "ulab/sweep.hpp"
#include "ulab/synthdata.hpp"
#include "ulab/train.hpp"

namespace fs = std::filesystem;
using namespace ulab;

namespace {

constexpr const char* kSeedEnv = "UNBALANCE_LAB_SEED";

// Flag beats environment beats fallback.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv(kSeedEnv); env && *env) {
    std::uint64_t v = 0;
    const std::string text = env;
    std::size_t used = 0;
    try {
      v = std::stoull(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size() || text.front() == '-')
      throw InvalidArgument(fmt::format("{}='{}' is not an unsigned integer", kSeedEnv, text));
    return v;
  }
  return fallback;
}

void refuse_overwrite(const fs::path& p, bool force) {
  if (fs::exists(p) && !force)
    throw Error(fmt::format("{} already exists; pass --force to overwrite", p.string()));
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<int> parse_widths(const std::string& text) {
  std::vector<int> out;
  if (text.empty() || text == "none") return out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      out.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw InvalidArgument("--hidden expects comma-separated widths, got '" + text + "'");
    }
  }
  return out;
}

// ---- generate ------------------------------------------------------------

struct GenerateArgs {
  std::string config;
  std::string out;
  std::string mode;
  std::optional<double> theta_y, theta_z, unbalance, noise_bound;
  std::optional<int> n_train, n_features, set_size;
  std::optional<std::uint64_t> seed;
  std::string split = "train";
  int n_val = 20000;
  bool force = false;
};

synth::SynthConfig synth_config(const GenerateArgs& a) {
  synth::SynthConfig c;
  std::optional<std::uint64_t> seed = a.seed;
  if (!a.config.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text(a.config));
      if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
      c.n_features = j.value("n_features", c.n_features);
      c.noise_bound = j.value("noise_bound", c.noise_bound);
      c.theta_y = j.value("theta_y", c.theta_y);
      c.theta_z = j.value("theta_z", c.theta_z);
      c.set_size = j.value("set_size", c.set_size);
      c.n_train = j.value("n_train", c.n_train);
      c.unbalance = j.value("unbalance", c.unbalance);
      if (!seed && j.contains("seed")) seed = j["seed"].get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(a.config + ": " + e.what());
    }
  }
  if (!a.mode.empty()) c.mode = parse_mode(a.mode);
  if (a.theta_y) c.theta_y = *a.theta_y;
  if (a.theta_z) c.theta_z = *a.theta_z;
  if (a.unbalance) c.unbalance = *a.unbalance;
  if (a.noise_bound) c.noise_bound = *a.noise_bound;
  if (a.n_train) c.n_train = *a.n_train;
  if (a.n_features) c.n_features = *a.n_features;
  if (a.set_size) c.set_size = *a.set_size;
  c.seed = resolve_seed(seed, 0);
  c.validate();
  return c;
}

int cmd_generate(const GenerateArgs& a) {
  const auto config = synth_config(a);
  const Dataset data =
      a.split == "train" ? synth::generate_train(config) : synth::generate_validation(config, a.n_val, a.split);
  refuse_overwrite(a.out, a.force);
  write_dataset_csv(data, a.out);
  const auto ones = std::count(data.y.begin(), data.y.end(), 1);
  const auto under = std::count(data.d.begin(), data.d.end(), 1);
  fmt::print("wrote {} rows to {}\n", data.size(), a.out);
  fmt::print("mode {} seed {}\n", to_string(config.mode), config.seed);
  fmt::print("y=0: {}  y=1: {}\n", long(data.size()) - ones, ones);
  fmt::print("overg (d=0): {}  underg (d=1): {}\n", long(data.size()) - under, under);
  if (under > 0 && under < long(data.size()))
    fmt::print("K = {:.6f}\n", k_factor(data, config.mode));
  else
    fmt::print("K undefined (one group is empty)\n");
  return 0;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string data, validation, out, history, mode;
  std::string loss = "h_star";
  std::optional<double> c, big_c, k, alpha, xi, lambda, epsilon, delta;
  double lr = 1e-3, lr_lambda = 1e-3;
  int epochs = 30, batch_size = 128;
  std::string hidden = "50,10";
  std::string activation = "relu";
  std::optional<std::uint64_t> seed;
  bool force = false;
};

void write_model_mlp(const fs::path& p, const NetworkParams& params, Mode mode, int minority) {
  std::ostringstream out;
  out << "ulab-model mlp\nmode " << to_string(mode) << "\nminority_label " << minority << "\n";
  write_params(out, params);
  std::ofstream(p) << out.str();
}

void write_model_brnn(const fs::path& p, const train::BrnnParams& params, Mode mode, int minority) {
  std::ostringstream out;
  out << "ulab-model brnn\nmode " << to_string(mode) << "\nminority_label " << minority << "\n";
  write_params(out, params.trunk);
  write_params(out, params.classifier);
  write_params(out, params.confounder);
  std::ofstream(p) << out.str();
}

int cmd_train(const TrainArgs& a) {
  const std::optional<Mode> forced = a.mode.empty() ? std::nullopt : std::optional(parse_mode(a.mode));
  Dataset data = read_dataset_csv(a.data, forced);
  const Mode mode = forced.value_or(data.has_z() ? Mode::CBUC : Mode::CI);
  const bool z_method = a.loss == "peo" || a.loss == "lfo" || a.loss == "brnn";
  if (z_method && !data.has_z())
    throw DataError(fmt::format("method {} needs the confounder column 'z', which {} does not have", a.loss, a.data));

  std::optional<Dataset> val;
  train::Monitor monitor;
  if (!a.validation.empty()) {
    val = read_dataset_csv(a.validation, mode);
    monitor = {&*val, mode, data.minority_label};
  }
  const train::Monitor* mon = val ? &monitor : nullptr;

  train::TrainConfig config;
  config.epochs = a.epochs;
  config.batch_size = a.batch_size;
  config.optimizer = OptimizerState::adam(a.lr);
  config.seed = resolve_seed(a.seed, 0);
  const LayerSpec spec{static_cast<int>(data.width()), parse_widths(a.hidden), 1, parse_activation(a.activation)};

  refuse_overwrite(a.out, a.force);
  refuse_overwrite(a.history, a.force);
  const int minority = mode == Mode::CI ? data.minority_label : 1;
  train::History history;
  if (a.loss == "lfo") {
    train::LfoConfig lfo;
    lfo.lr_model = a.lr;
    lfo.lr_lambda = a.lr_lambda;
    lfo.epsilon = a.epsilon.value_or(lfo.epsilon);
    lfo.lambda_init = a.lambda.value_or(0.0);
    auto result = train::train_lfo(spec, data, config, lfo, mon);
    write_model_mlp(a.out, result.params, mode, minority);
    history = std::move(result.history);
    fmt::print("final lambda {:.6g}\n", result.lambda);
  } else if (a.loss == "brnn") {
    train::BrnnSpec b;
    b.input_width = spec.input_width;
    b.activation = spec.hidden_activation;
    const auto& h = spec.hidden_widths;
    if (h.size() >= 2) {
      b.trunk_widths.assign(h.begin(), h.end() - 1);
      b.classifier_hidden = {h.back()};
    } else {
      b.trunk_widths = h.empty() ? std::vector<int>{8} : h;
      b.classifier_hidden = {};
    }
    b.confounder_hidden = b.classifier_hidden;
    b.delta = a.delta.value_or(0.0);
    auto result = train::train_brnn(b, data, config, mon);
    write_model_brnn(a.out, result.params, mode, minority);
    history = std::move(result.history);
  } else {
    auto& loss = config.loss;
    loss.kind = losses::parse_loss_kind(a.loss);
    loss.c = a.c.value_or(loss.c);
    loss.big_c = a.big_c.value_or(loss.big_c);
    loss.alpha = a.alpha.value_or(loss.alpha);
    loss.xi = a.xi.value_or(loss.xi);
    loss.lambda = a.lambda.value_or(loss.lambda);
    loss.epsilon = a.epsilon.value_or(loss.epsilon);
    if (a.k) {
      loss.k = *a.k;
    } else if (loss.kind == losses::LossKind::fbi && loss.xi != 0.0) {
      loss.k = k_factor(data, mode);
    } else if (loss.kind == losses::LossKind::focal) {
      const auto ones = std::count(data.y.begin(), data.y.end(), 1);
      if (ones == 0) throw DataError("focal: no positive examples to set K");
      loss.k = double(long(data.size()) - ones) / double(ones);
    }
    auto result = train::train_standard(spec, data, config, mon);
    write_model_mlp(a.out, result.params, mode, minority);
    history = std::move(result.history);
    if (history.skipped_constraint_batches > 0)
      fmt::print("constraint skipped in {} batches with an empty (y, z) cell\n", history.skipped_constraint_batches);
  }
  std::ofstream(a.history) << train::history_csv(history);
  fmt::print("wrote {} and {}\n", a.out, a.history);
  return 0;
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
  std::string model, data, mode, out;
  double threshold = eval::kDefaultThreshold;
  std::optional<int> minority;
  bool force = false;
};

int cmd_eval(const EvalArgs& a) {
  std::ifstream in(a.model);
  if (!in) throw DataError("cannot open model " + a.model);
  std::string magic, kind, key, mode_text;
  int minority = 1;
  in >> magic >> kind >> key >> mode_text;
  if (magic != "ulab-model" || key != "mode") throw DataError(a.model + ": not a model file");
  in >> key >> minority;
  if (key != "minority_label") throw DataError(a.model + ": missing minority_label");
  const Mode mode = a.mode.empty() ? parse_mode(mode_text) : parse_mode(a.mode);
  const Dataset data = read_dataset_csv(a.data, mode);
  Eigen::VectorXd p;
  if (kind == "mlp") {
    p = predict(read_params(in), data.x);
  } else if (kind == "brnn") {
    train::BrnnParams b;
    b.trunk = read_params(in);
    b.classifier = read_params(in);
    b.confounder = read_params(in);
    p = train::predict_brnn(b, data.x);
  } else {
    throw DataError(a.model + ": unknown model kind '" + kind + "'");
  }
  const std::vector<double> probs(p.data(), p.data() + p.size());
  const auto report = eval::evaluate(data, probs, mode, a.minority.value_or(minority), a.threshold);
  const std::string text = eval::csv_header() + "\n" + eval::to_csv_row(report) + "\n";
  if (!a.out.empty()) {
    refuse_overwrite(a.out, a.force);
    std::ofstream(a.out) << text;
  }
  fmt::print("{}", text);
  return 0;
}

// ---- sweep / report ------------------------------------------------------

struct SweepArgs {
  std::string plan, desk, out;
  int workers = 0;
  bool resume = false, force = false, quiet = false;
  std::optional<std::uint64_t> seed;
};

int cmd_sweep(const SweepArgs& a) {
  if (a.plan.empty() == a.desk.empty()) throw InvalidArgument("give exactly one of --plan or --desk");
  auto plan = a.plan.empty() ? sweep::desk_plan(sweep::parse_problem(a.desk)) : sweep::load_plan(a.plan);
  plan.base_seed = resolve_seed(a.seed, plan.base_seed);
  sweep::SweepOptions options;
  options.workers = a.workers;
  options.resume = a.resume;
  options.force = a.force;
  if (!a.quiet) options.log = [](const std::string& msg) { fmt::print(stderr, "{}\n", msg); };
  const auto stats = sweep::run_sweep(plan, a.out, options);
  report::write_report(a.out);
  fmt::print("sweep done: {} tasks computed, {} resumed; results in {}\n", stats.computed, stats.resumed, a.out);
  return 0;
}

int cmd_report(const std::string& dir) {
  for (const auto& p : report::write_report(dir)) fmt::print("{}\n", p.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loss corrections for class imbalance, confounding bias and unfair classification"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic dataset CSV");
  g->add_option("--config", gen.config, "JSON file with synthetic parameters");
  g->add_option("-o,--out", gen.out, "Output CSV")->required();
  g->add_option("--mode", gen.mode, "CI or CBUC (CB, UC)");
  g->add_option("--theta-y", gen.theta_y, "Class signal amplitude");
  g->add_option("--theta-z", gen.theta_z, "Confounder signal amplitude");
  g->add_option("--unbalance", gen.unbalance, "Fraction of over-represented training examples");
  g->add_option("--noise-bound", gen.noise_bound, "Half-width of the uniform noise");
  g->add_option("--n-train", gen.n_train, "Training set size");
  g->add_option("--n-features", gen.n_features, "Feature count");
  g->add_option("--set-size", gen.set_size, "Features per signal set");
  g->add_option("--seed", gen.seed, "Seed (overrides UNBALANCE_LAB_SEED)");
  g->add_option("--split", gen.split, "train, validation or selection")
      ->check(CLI::IsMember({"train", "validation", "selection"}));
  g->add_option("--n-val", gen.n_val, "Rows of a validation or selection split");
  g->add_flag("--force", gen.force, "Overwrite the output");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model on a dataset CSV");
  t->add_option("--data", tr.data, "Training CSV")->required();
  t->add_option("--validation", tr.validation, "Monitor CSV scored after every epoch");
  t->add_option("-o,--out", tr.out, "Model file")->required();
  t->add_option("--history", tr.history, "History CSV")->required();
  t->add_option("--mode", tr.mode, "CI or CBUC; default from the z column");
  t->add_option("--loss,--method", tr.loss, "h_star, weighted_ce, cc, focal, fbi, peo, lfo or brnn")
      ->check(CLI::IsMember({"h_star", "weighted_ce", "cc", "focal", "fbi", "peo", "lfo", "brnn"}));
  t->add_option("--c", tr.c, "weighted_ce cost");
  t->add_option("--C", tr.big_c, "cc weight");
  t->add_option("--K", tr.k, "focal/fbi base; default from the training set");
  t->add_option("--alpha", tr.alpha, "focal exponent");
  t->add_option("--xi", tr.xi, "fbi exponent scale");
  t->add_option("--lambda", tr.lambda, "peo weight, or lfo initial multiplier");
  t->add_option("--epsilon", tr.epsilon, "peo/lfo slack");
  t->add_option("--delta", tr.delta, "brnn adversarial weight");
  t->add_option("--lr", tr.lr, "Model learning rate");
  t->add_option("--lr-lambda", tr.lr_lambda, "lfo multiplier learning rate");
  t->add_option("--epochs", tr.epochs, "Epochs");
  t->add_option("--batch-size", tr.batch_size, "Mini-batch size");
  t->add_option("--hidden", tr.hidden, "Hidden widths, e.g. 50,10 (or none)");
  t->add_option("--activation", tr.activation, "relu or tanh");
  t->add_option("--seed", tr.seed, "Seed (overrides UNBALANCE_LAB_SEED)");
  t->add_flag("--force", tr.force, "Overwrite outputs");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a model on a validation CSV");
  e->add_option("--model", ev.model, "Model file")->required();
  e->add_option("--data", ev.data, "Validation CSV")->required();
  e->add_option("--mode", ev.mode, "Override the model's mode");
  e->add_option("--threshold", ev.threshold, "Decision threshold for accuracy and rates");
  e->add_option("--minority-label", ev.minority, "CI UnderG class; default from the model");
  e->add_option("-o,--out", ev.out, "Also write the report row here");
  e->add_flag("--force", ev.force, "Overwrite the output");

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "Run a sweep plan");
  s->add_option("--plan", sw.plan, "Plan JSON");
  s->add_option("--desk", sw.desk, "Built-in reduced plan: CI, CB or UC");
  s->add_option("-o,--out", sw.out, "Results directory")->required();
  s->add_option("--workers", sw.workers, "Worker threads (default: all cores)");
  s->add_option("--seed", sw.seed, "Base seed (overrides UNBALANCE_LAB_SEED and the plan)");
  s->add_flag("--resume", sw.resume, "Keep finished tasks");
  s->add_flag("--force", sw.force, "Discard earlier results");
  s->add_flag("--quiet", sw.quiet, "No progress lines");

  std::string results;
  auto* r = app.add_subcommand("report", "Heatmaps and a text summary of a results directory");
  r->add_option("results", results, "Results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }
  try {
    if (*g) return cmd_generate(gen);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*s) return cmd_sweep(sw);
    if (*r) return cmd_report(results);
  } catch (const std::exception& ex) {
    fmt::print(stderr, "error: {}\n", ex.what());
    return 1;
  }
  return 1;
}
