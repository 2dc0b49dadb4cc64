// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <CLI11.hpp>
#include <fmt/core.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <string>
#include <vector>

#include "ulab/eval.hpp"
#include "ulab/losses.hpp"
#include "ulab/net.hpp"
#include "ulab/rng.hpp"
#include "ulab/sweep.hpp"
#include "ulab/train.hpp"

namespace fs = std::filesystem;
using namespace ulab;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2 * h);
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome gradients() {
  using namespace losses;
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const int y = int(rng.below(2)), d = int(rng.below(2));
    const double p = rng.uniform(0.01, 0.99);
    const double c = rng.uniform(0.05, 0.95), big_c = rng.uniform(0.1, 20);
    const double k = rng.uniform(0.5, 20), alpha = rng.uniform(0, 5), xi = rng.uniform(0, 5);
    auto check = [&](auto f) {
      worst = std::max(worst, rel_err(f(p).dloss_dp, central_diff([&](double q) { return f(q).loss; }, p)));
    };
    check([&](double q) { return h_star(y, q); });
    check([&](double q) { return weighted_ce(y, q, c); });
    check([&](double q) { return cc_loss(y, q, big_c); });
    check([&](double q) { return focal_loss(y, q, k, alpha); });
    check([&](double q) { return fbi_loss(y, d, q, k, xi); });
  }

  // PEO is batch-level: 100 random batches, every coordinate.
  int peo_points = 0;
  while (peo_points < 100) {
    const int n = 12;
    std::vector<int> y(n), z(n);
    std::vector<double> p(n);
    for (int i = 0; i < n; ++i) {
      y[i] = (i / 3) % 2;
      z[i] = i % 2;
      p[i] = rng.uniform(0.05, 0.95);
    }
    const double lambda = rng.uniform(0.1, 2), eps = rng.uniform(0, 0.1);
    if (std::abs(peo_constraint(y, z, p).value - eps) < 1e-3) continue;  // hinge kink
    const auto b = peo_batch_loss(y, z, p, lambda, eps);
    for (int i = 0; i < n; ++i) {
      auto f = [&](double v) {
        auto q = p;
        q[i] = v;
        return peo_batch_loss(y, z, q, lambda, eps).loss;
      };
      worst = std::max(worst, rel_err(b.grad[i] / n, central_diff(f, p[i])));
    }
    ++peo_points;
  }

  train::BrnnSpec spec;
  spec.input_width = 6;
  spec.trunk_widths = {5};
  spec.classifier_hidden = {3};
  spec.confounder_hidden = {3};
  spec.activation = Activation::tanh;
  const auto params = train::init_brnn(spec, 9);
  Eigen::MatrixXd x(16, 6);
  std::vector<int> z(16);
  for (int i = 0; i < 16; ++i) {
    z[i] = i % 2;
    for (int j = 0; j < 6; ++j) x(i, j) = rng.uniform(-2, 2) + (j == 0 ? z[i] : 0);
  }
  const double delta = 1.5;
  const auto term = train::brnn_adversarial_term(params, x, z, delta);
  double worst_adv = 0;
  for (std::size_t l = 0; l < params.trunk.layers.size(); ++l) {
    const auto& w = params.trunk.layers[l].weight;
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        auto f = [&](double v) {
          auto q = params;
          q.trunk.layers[l].weight(r, c) = v;
          return train::brnn_adversarial_term(q, x, z, delta).value;
        };
        const double fd = central_diff(f, w(r, c));
        worst_adv = std::max(worst_adv, std::abs(term.trunk_grad[l].weight(r, c) - fd) / std::max(1e-3, std::abs(fd)));
      }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && worst_adv < 1e-3 && secs < 60,
          fmt::format("max rel err losses {:.2e}, adversarial {:.2e}, {:.1f}s", worst, worst_adv, secs)};
}

Outcome reductions() {
  using namespace losses;
  Rng rng(202);
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const int y = int(rng.below(2));
    const double p = rng.uniform(kProbClamp, 1 - kProbClamp);
    const double k = rng.uniform(0.1, 50), xi = rng.uniform(0, 5), c = rng.uniform(0.01, 0.99);
    const double h = h_star(y, p).loss;
    auto close = [](double a, double b) { return std::abs(a - b) <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(b)); };
    bad += fbi_loss(y, 0, p, k, xi).loss != h;
    bad += fbi_loss(y, 1, p, k, 0.0).loss != h;
    bad += focal_loss(y, p, 1.0, 0.0).loss != h;
    bad += cc_loss(y, p, 1.0).loss != h;
    bad += !close(weighted_ce(y, p, 0.5).loss, 0.5 * h);
    bad += !close(weighted_ce(y, p, c).loss, c * cc_loss(y, p, (1 - c) / c).loss);
  }
  return {bad == 0, fmt::format("{} mismatches over 6x1000 checks", bad)};
}

Outcome baseline_shift_identity() {
  Rng rng(303);
  double worst = 0;
  for (int i = 0; i < 50; ++i) {
    const double pi_hat = rng.uniform(0.01, 0.99);
    worst = std::max(worst, std::abs(losses::baseline_shift(0.5, 0.5, pi_hat) - pi_hat));
  }
  return {worst <= 1e-12, fmt::format("max |c_hat - pi_hat| = {:.2e}", worst)};
}

Outcome auc_oracle() {
  Rng rng(404);
  int bad = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + int(rng.below(999));
    std::vector<int> y(n);
    std::vector<double> p(n);
    const int levels = 1 + int(rng.below(20));  // few levels force ties
    for (int i = 0; i < n; ++i) {
      y[i] = int(rng.below(2));
      p[i] = t % 2 ? double(rng.below(levels)) / levels : rng.uniform01();
    }
    y[0] = 0;
    y[1] = 1;
    bad += eval::auc_group(y, p) != eval::auc_pairwise(y, p);
  }
  return {bad == 0, fmt::format("{} of 100 datasets differ", bad)};
}

struct CellResult {
  double under = 0, over = 0;
  double fpr_gap = 0, fnr_gap = 0;
  std::string chosen;
};

// Selection and averaging exactly as the sweep does it, for a handful of methods on one cell.
std::map<std::string, CellResult> evaluate_cell(sweep::SweepPlan plan, const sweep::Cell& cell, int runs) {
  plan.runs_per_cell = runs;
  std::map<std::string, std::vector<sweep::RunRecord>> records;
  for (int run = 0; run < runs; ++run) {
    const auto data = sweep::prepare_cell_data(plan, cell, run);
    for (const auto& method : plan.methods)
      for (const auto& cand : sweep::expand_grid(method))
        records[method.id].push_back(sweep::run_cell(plan, method, cell, cand, run, data));
  }
  std::map<std::string, CellResult> out;
  for (const auto& [id, recs] : records) {
    const auto best = sweep::select_best(recs);
    CellResult r;
    r.chosen = best.label();
    int n = 0;
    for (const auto& rec : recs) {
      if (!(rec.candidate == best)) continue;
      r.under += rec.val_under;
      r.over += rec.val_over;
      r.fpr_gap += std::abs(rec.fpr_gap.value_or(0));
      r.fnr_gap += std::abs(rec.fnr_gap.value_or(0));
      ++n;
    }
    r.under /= n;
    r.over /= n;
    r.fpr_gap /= n;
    r.fnr_gap /= n;
    out[id] = r;
  }
  return out;
}

sweep::SweepPlan plan_with(sweep::Problem problem, std::vector<sweep::MethodSpec> methods) {
  auto plan = sweep::desk_plan(problem);
  plan.methods = std::move(methods);
  return plan;
}

Outcome balanced_sanity() {
  const auto t0 = Clock::now();
  const auto plan = plan_with(sweep::Problem::CI, {sweep::default_method("h_star")});
  const auto r = evaluate_cell(plan, {2.0, 0.5}, 5).at("h_star");
  const double secs = seconds_since(t0);
  const bool ok = std::abs(r.under - r.over) <= 0.05 && r.under >= 0.9 && r.over >= 0.9 && secs < 300;
  return {ok, fmt::format("UnderG {:.4f} OverG {:.4f}, {:.0f}s", r.under, r.over, secs)};
}

Outcome divergence() {
  const auto t0 = Clock::now();
  const auto plan = plan_with(sweep::Problem::CI, {sweep::default_method("h_star"), sweep::default_method("fbi")});
  const auto res = evaluate_cell(plan, {0.5, 0.95}, 5);
  const auto& h = res.at("h_star");
  const auto& f = res.at("fbi");
  const double secs = seconds_since(t0);
  const double hmin = std::min(h.under, h.over), fmin = std::min(f.under, f.over);
  const bool ok = h.under <= 0.5 && h.over >= 0.9 && fmin >= hmin + 0.15 && secs < 1200;
  return {ok, fmt::format("h_star U {:.4f} O {:.4f}; fbi [{}] U {:.4f} O {:.4f}; {:.0f}s", h.under, h.over, f.chosen,
                          f.under, f.over, secs)};
}

Outcome impossible_task() {
  const auto plan = plan_with(sweep::Problem::CB, {sweep::default_method("h_star"), sweep::default_method("fbi")});
  const auto res = evaluate_cell(plan, {0.0, 0.9}, 5);
  const auto& h = res.at("h_star");
  const auto& f = res.at("fbi");
  const bool ok = std::abs(f.under - 0.5) <= 0.1 && std::abs(f.over - 0.5) <= 0.1 && h.over - h.under > 0.2;
  return {ok, fmt::format("fbi [{}] AUC U {:.4f} O {:.4f}; h_star gap {:.4f}", f.chosen, f.under, f.over,
                          h.over - h.under)};
}

Outcome kxi_trend(const fs::path& sweep_dir) {
  std::ifstream in(sweep_dir / "kxi_trend.csv");
  if (!in) return {false, "no kxi_trend.csv"};
  std::string line;
  std::getline(in, line);
  std::map<double, std::vector<double>> by_theta;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string part; std::getline(ss, part, ',');) f.push_back(part);
    by_theta[std::stod(f[1])].push_back(std::stod(f[4]));
  }
  // Complexity rank runs opposite to theta_y.
  std::vector<double> theta, mean;
  for (const auto& [t, v] : by_theta) {
    theta.push_back(t);
    mean.push_back(std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()));
  }
  const std::size_t n = theta.size();
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) less += w < v[i], equal += w == v[i];
      r[i] = less + (equal + 1) / 2;
    }
    return r;
  };
  std::vector<double> complexity(n);
  for (std::size_t i = 0; i < n; ++i) complexity[i] = -theta[i];
  const auto rc = ranks(complexity), rk = ranks(mean);
  const double mc = std::accumulate(rc.begin(), rc.end(), 0.0) / n, mk = std::accumulate(rk.begin(), rk.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rc[i] - mc) * (rk[i] - mk);
    sxx += (rc[i] - mc) * (rc[i] - mc);
    syy += (rk[i] - mk) * (rk[i] - mk);
  }
  const double rho = (sxx > 0 && syy > 0) ? sxy / std::sqrt(sxx * syy) : 0.0;
  bool monotone = true;
  for (std::size_t i = 1; i < n; ++i) monotone = monotone && mean[i] <= mean[i - 1];
  std::string levels;
  for (std::size_t i = 0; i < n; ++i) levels += fmt::format(" {}:{:.1f}", theta[i], mean[i]);
  const bool ok = monotone && rho > 0 && mean.back() <= 1.5;
  return {ok, fmt::format("mean K^xi per theta_y{}; spearman {:.3f}", levels, rho)};
}

Outcome lfo_contract() {
  auto plan = sweep::desk_plan(sweep::Problem::UC);
  const sweep::Cell cell{2.0, 0.8};
  const auto data = sweep::prepare_cell_data(plan, cell, 0);
  train::TrainConfig config;
  // Full training at the trainer's default length; the desk sweeps cut epochs for time.
  config.epochs = train::TrainConfig{}.epochs;
  config.batch_size = plan.train.batch_size;
  config.seed = sweep::derive_seed(plan.base_seed, cell, 0, "train");
  train::LfoConfig lfo;
  lfo.epsilon = 0.05;
  lfo.lr_model = 1e-3;
  lfo.lr_lambda = 1e-3;
  const LayerSpec spec{int(data.train.width()), plan.train.hidden, 1, plan.train.activation};
  const auto result = train::train_lfo(spec, data.train, config, lfo);
  const double min_lambda = *std::min_element(result.lambda_steps.begin(), result.lambda_steps.end());
  const auto p = predict(result.params, data.train.x);
  const std::vector<double> pv(p.data(), p.data() + p.size());
  const auto c = losses::peo_constraint(data.train.y, *data.train.z, pv);
  const bool ok = min_lambda >= 0 && c.defined && c.value <= lfo.epsilon + 0.05;
  return {ok, fmt::format("min lambda {:.3g} over {} steps; full-set C_PEO {:.4f} (bound {:.2f})", min_lambda,
                          result.lambda_steps.size(), c.value, lfo.epsilon + 0.05)};
}

Outcome fairness_gaps() {
  const auto plan = plan_with(sweep::Problem::UC, {sweep::default_method("fbi"), sweep::default_method("peo"),
                                                   sweep::default_method("lfo")});
  const auto res = evaluate_cell(plan, {1.0, 0.9}, 5);
  const auto& f = res.at("fbi");
  const auto& p = res.at("peo");
  const auto& l = res.at("lfo");
  const double best_fpr = std::min(p.fpr_gap, l.fpr_gap), best_fnr = std::min(p.fnr_gap, l.fnr_gap);
  const bool ok = f.fpr_gap <= best_fpr + 0.1 && f.fnr_gap <= best_fnr + 0.1;
  return {ok, fmt::format("|FPR gap| fbi {:.4f} peo {:.4f} lfo {:.4f}; |FNR gap| fbi {:.4f} peo {:.4f} lfo {:.4f}",
                          f.fpr_gap, p.fpr_gap, l.fpr_gap, f.fnr_gap, p.fnr_gap, l.fnr_gap)};
}

std::map<std::string, std::string> csv_outputs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv")
      out[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  fs::path work = fs::temp_directory_path() / "ulab_acceptance";
  std::string desk = "CI";
  app.add_option("--work-dir", work, "scratch directory for sweep output");
  app.add_option("--desk", desk, "desk sweep used for the trend, determinism and timing checks")
      ->check(CLI::IsMember({"CI", "CB", "UC"}));
  std::vector<int> only;
  app.add_option("--only", only, "run just these criteria");
  CLI11_PARSE(app, argc, argv);
  auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };

  fs::remove_all(work);
  fs::create_directories(work);

  int failed = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    if (!wanted(id)) return;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    fmt::print("{} {:>2} {}: {}\n", o.pass ? "PASS" : "FAIL", id, name, o.detail);
    std::fflush(stdout);
  };

  report(1, "gradient suite", gradients);
  report(2, "reduction identities", reductions);
  report(3, "baseline shift identity", baseline_shift_identity);
  report(4, "auc oracle", auc_oracle);
  report(5, "balanced sanity", balanced_sanity);
  report(6, "divergence and fbi recovery", divergence);
  report(7, "impossible task guard", impossible_task);

  const auto problem = sweep::parse_problem(desk);
  const auto plan = sweep::desk_plan(problem);
  const fs::path first = work / "desk_a", second = work / "desk_b";
  double sweep_secs = -1;
  std::string sweep_error;
  if (wanted(8) || wanted(11) || wanted(12)) try {
    const auto t0 = Clock::now();
    sweep::run_sweep(plan, first);
    sweep_secs = seconds_since(t0);
  } catch (const std::exception& e) {
    sweep_error = e.what();
  }

  report(8, "K^xi trend", [&] { return sweep_error.empty() ? kxi_trend(first) : Outcome{false, sweep_error}; });
  report(9, "lfo contract", lfo_contract);
  report(10, "fairness gaps", fairness_gaps);
  report(11, "determinism", [&]() -> Outcome {
    if (!sweep_error.empty()) return {false, sweep_error};
    sweep::SweepOptions opts;
    opts.workers = 2;  // different schedule, same bytes
    sweep::run_sweep(plan, second, opts);
    const auto a = csv_outputs(first), b = csv_outputs(second);
    int differ = 0;
    for (const auto& [name, text] : a) differ += !b.contains(name) || b.at(name) != text;
    return {differ == 0 && a.size() == b.size() && !a.empty(),
            fmt::format("{} csv files compared, {} differ", a.size(), differ)};
  });
  report(12, "desk sweep time", [&]() -> Outcome {
    if (!sweep_error.empty()) return {false, sweep_error};
    return {sweep_secs < 1800, fmt::format("{} desk sweep took {:.0f}s on {} hardware thread(s)", desk, sweep_secs,
                                           std::thread::hardware_concurrency())};
  });

  fmt::print("{} criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
