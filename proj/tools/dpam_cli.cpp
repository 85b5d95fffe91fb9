// dpam: generate data, fit one model, run a (rho, lam) grid, or predict.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "dpam/backfit.hpp"
#include "dpam/csv_io.hpp"
#include "dpam/datagen.hpp"
#include "dpam/errors.hpp"
#include "dpam/experiment.hpp"
#include "dpam/model_io.hpp"

using namespace dpam;

namespace {

// Flags that map one-to-one onto experiment-config keys.
struct SettingFlags {
  std::vector<std::pair<std::string, std::string>> flag_keys;
  std::map<std::string, std::string> values;
  bool recovery = false, standardize = false;

  void add(CLI::App* app, const std::string& flag, const std::string& key,
           const std::string& help) {
    flag_keys.emplace_back(flag, key);
    app->add_option(flag, values[key], help);
  }

  void apply(CLI::App* app, ExperimentConfig& cfg) const {
    for (const auto& [flag, key] : flag_keys)
      if (app->count(flag)) apply_setting(cfg, key, values.at(key));
    if (recovery) cfg.train.recovery_enabled = true;
    if (standardize) cfg.standardize = true;
  }
};

void add_training_flags(CLI::App* app, SettingFlags& f, bool grid) {
  f.add(app, "--data", "csv", "training CSV (header row; response column, covariates)");
  f.add(app, "--valid-data", "valid_csv", "validation CSV with the same columns");
  f.add(app, "--response", "response", "response column name (default y)");
  f.add(app, "--family", "family", "synthetic family when no CSV: linear, logistic, phase");
  f.add(app, "--n", "n", "synthetic training size");
  f.add(app, "--p", "p", "synthetic covariate count");
  f.add(app, "--noise-sd", "noise_sd", "synthetic noise sd, or auto");
  f.add(app, "--data-seed", "data_seed", "synthetic data seed");
  f.add(app, "--n-valid", "n_valid", "synthetic validation size (default: training size)");
  f.add(app, "--model", "model", "linear, logistic or auto");
  f.add(app, "--solver", "solver",
        "cp, ama, stoc-cp, stoc-ama-sag, stoc-ama-saga, cc, stoc-cc, condat-vu, oracle");
  f.add(app, "--rho", "rho", grid ? "rho list, e.g. \"2^-16,2^-19\"" : "HTV penalty rho");
  f.add(app, "--lam", "lam",
        grid ? "lambda list, e.g. \"norm_y/2^6,norm_y/2^8\"" : "lambda, absolute or norm_y/2^k");
  f.add(app, "--knots", "knots", "marginal knots per covariate");
  f.add(app, "--order-m", "order_m", "differentiation order m (1 or 2)");
  f.add(app, "--interaction-K", "interaction_K", "highest interaction order K");
  f.add(app, "--epochs", "epochs", "epoch budget");
  f.add(app, "--batch-steps", "batch_steps", "batch steps (or scans) per block visit");
  f.add(app, "--tolerance", "tolerance", "objective change per cycle that declares convergence");
  f.add(app, "--tau", "tau", "primal step size (default: per-block solver default)");
  f.add(app, "--alpha", "alpha", "dual step ratio (needs --tau)");
  f.add(app, "--delta", "delta", "perturbation for the concave-conjugate solvers");
  f.add(app, "--cc-tau", "cc_tau", "inner step of stochastic CC");
  f.add(app, grid ? "--seeds" : "--seed", "seeds", grid ? "seed list, e.g. 1..10" : "solver seed");
  f.add(app, "--split", "split", "training fraction of a random CSV split");
  f.add(app, "--split-seed", "split_seed", "seed of the CSV split");
  app->add_flag("--recovery", f.recovery, "revert block updates that raise the training loss");
  app->add_flag("--standardize", f.standardize, "center and scale CSV covariates");
}

int cmd_generate(const std::string& family, long n, int p, const std::string& noise,
                 std::uint64_t seed, bool raw, const std::string& out) {
  SyntheticSpec spec;
  spec.family = parse_family(family);
  spec.n = n;
  spec.p = spec.family == Family::PhaseShift && p == 10 ? 4 : p;
  spec.seed = seed;
  if (noise != "auto") spec.noise_sd = parse_real(noise);
  const SyntheticData d = generate(spec);
  write_csv(out, raw && d.X_raw.size() ? d.X_raw : d.X, d.y);
  std::cout << "wrote " << d.X.rows() << " rows to " << out << " (noise_sd "
            << format_double(d.noise_sd) << ")\n";
  return 0;
}

void print_metrics(const ValidationMetrics& m) {
  if (m.mse) std::cout << "valid_mse " << format_double(*m.mse) << '\n';
  if (m.cross_entropy) std::cout << "valid_cross_entropy " << format_double(*m.cross_entropy) << '\n';
  if (m.misclassification)
    std::cout << "valid_misclassification " << format_double(*m.misclassification) << '\n';
}

int cmd_fit(ExperimentConfig cfg, const std::string& model_out, const std::string& trace_out) {
  if (cfg.rho.size() != 1 || cfg.lam.size() != 1 || cfg.seeds.size() != 1)
    throw ConfigError("fit takes a single --rho, --lam and --seed (use grid for lists)");
  cfg.validate();
  const Prepared data = prepare_data(cfg);
  const double lam = cfg.lam[0].resolve(centered_norm_n(data.y));
  TrainConfig tc = cfg.train_config();
  tc.seed = cfg.seeds[0];
  FitResult fr = cfg.is_logistic() ? fit_logistic(data.X, data.y, tc, cfg.basis, cfg.rho[0], lam)
                                   : fit_linear(data.X, data.y, tc, cfg.basis, cfg.rho[0], lam);
  const ValidationMetrics m = evaluate(fr.model, data.X_valid, data.y_valid);
  fr.model.input_center = data.input_center;
  fr.model.input_scale = data.input_scale;
  if (!model_out.empty()) save_model(fr.model, model_out);
  if (!trace_out.empty()) {
    std::ofstream out(trace_out, std::ios::binary);
    if (!out) throw Error("cannot open '" + trace_out + "' for writing");
    out << "epoch,training_loss,nonzero_blocks,nonzero_coefs\n";
    for (std::size_t t = 0; t < fr.trace.epoch_marks.size(); ++t)
      out << format_double(fr.trace.epoch_marks[t]) << ',' << format_double(fr.trace.objective[t])
          << ',' << fr.trace.nonzero_blocks[t] << ',' << fr.trace.nonzero_coefs[t] << '\n';
  }
  std::cout << "rho " << format_double(cfg.rho[0]) << "\nlam " << format_double(lam) << "\ncycles "
            << fr.trace.cycles << "\nconverged " << (fr.trace.converged ? "true" : "false")
            << "\nepochs " << format_double(fr.trace.epoch_marks.back()) << "\ntraining_loss "
            << format_double(fr.trace.objective.back()) << "\nnonzero_blocks "
            << fr.model.nonzero_blocks() << "\nnonzero_coefs " << fr.model.nonzero_coefs() << '\n';
  for (const auto& [cycle, id] : fr.trace.recoveries)
    std::cout << "recovery cycle " << cycle << " block " << block_label(id) << '\n';
  print_metrics(m);
  return 0;
}

int cmd_grid(ExperimentConfig cfg) {
  const ExperimentResult res = run_experiment(cfg);
  std::cout << "completed " << res.runs.size() << " runs; table at "
            << (cfg.out_dir / "table.csv").string() << '\n';
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& response, const std::string& out_path) {
  const DpamModel model = load_model(model_path);
  CsvOptions opts;
  opts.response = response;
  opts.require_response = false;
  const Dataset d = read_csv(data_path, opts);
  const Eigen::VectorXd pred = predict(model, d.X);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw Error("cannot open '" + out_path + "' for writing");
  out << "prediction\n";
  for (Eigen::Index i = 0; i < pred.size(); ++i) out << format_double(pred[i]) << '\n';
  std::cout << "wrote " << pred.size() << " predictions to " << out_path << '\n';
  if (d.y.size()) print_metrics(evaluate(model, d.X, d.y));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Doubly penalized ANOVA modeling: backfitting with primal-dual block solvers"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset as CSV");
  std::string family = "linear", noise = "auto", gen_out;
  long n = 1000;
  int p = 10;
  std::uint64_t seed = 1;
  bool raw = false;
  gen->add_option("--family", family, "linear, logistic or phase")->capture_default_str();
  gen->add_option("--n", n, "rows")->capture_default_str();
  gen->add_option("--p", p, "covariates (7 or 10; phase uses 4)")->capture_default_str();
  gen->add_option("--noise-sd", noise, "noise sd, or auto")->capture_default_str();
  gen->add_option("--seed", seed, "data seed")->capture_default_str();
  gen->add_flag("--raw-inputs", raw, "phase shift: write inputs on their physical ranges");
  gen->add_option("--out", gen_out, "output CSV")->required();

  auto* fit = app.add_subcommand("fit", "fit one model and save it as JSON");
  SettingFlags fit_flags;
  std::string fit_config, model_out, trace_out;
  fit->add_option("--config", fit_config, "experiment config file (flags override it)");
  add_training_flags(fit, fit_flags, false);
  fit->add_option("--out", model_out, "model JSON path");
  fit->add_option("--trace", trace_out, "training trace CSV path");

  auto* grid = app.add_subcommand("grid", "run a (rho, lam, seed) grid and write traces and tables");
  SettingFlags grid_flags;
  std::string grid_config, grid_out, threads;
  grid->add_option("--config", grid_config, "experiment config file")->required();
  add_training_flags(grid, grid_flags, true);
  grid->add_option("--out", grid_out, "output directory");
  grid->add_option("--threads", threads, "worker threads (0: all cores)");

  auto* pred = app.add_subcommand("predict", "predict from a saved model");
  std::string model_in, data_in, pred_out, response = "y";
  pred->add_option("--model", model_in, "model JSON")->required();
  pred->add_option("--data", data_in, "CSV of covariates (response column optional)")->required();
  pred->add_option("--response", response, "response column to ignore")->capture_default_str();
  pred->add_option("--out", pred_out, "predictions CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(family, n, p, noise, seed, raw, gen_out);
    if (fit->parsed()) {
      ExperimentConfig cfg = fit_config.empty() ? ExperimentConfig{} : load_experiment_config(fit_config);
      fit_flags.apply(fit, cfg);
      return cmd_fit(std::move(cfg), model_out, trace_out);
    }
    if (grid->parsed()) {
      ExperimentConfig cfg = load_experiment_config(grid_config);
      grid_flags.apply(grid, cfg);
      if (grid->count("--out")) apply_setting(cfg, "out", grid_out);
      if (grid->count("--threads")) apply_setting(cfg, "threads", threads);
      return cmd_grid(std::move(cfg));
    }
    if (pred->parsed()) return cmd_predict(model_in, data_in, response, pred_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
