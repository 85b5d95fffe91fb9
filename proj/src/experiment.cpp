#include "dpam/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "dpam/csv_io.hpp"
#include "dpam/errors.hpp"
#include "dpam/rng.hpp"

namespace dpam {

namespace {

constexpr std::uint64_t kValidStream = 0x56;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string v) {
  v = trim(v);
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

double parse_plain(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError("not a number: '" + s + "'");
  return v;
}

long long parse_int(const std::string& s) {
  long long v = 0;
  const auto t = trim(s);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError("not an integer: '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  const auto t = trim(s);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("not a boolean: '" + s + "'");
}

std::vector<std::uint64_t> parse_seeds(const std::string& v) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(v)) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      const long long s = parse_int(item);
      if (s < 0) throw ConfigError("seeds must be nonnegative");
      out.push_back(static_cast<std::uint64_t>(s));
      continue;
    }
    const long long a = parse_int(item.substr(0, dots)), b = parse_int(item.substr(dots + 2));
    if (a < 0 || b < a) throw ConfigError("bad seed range '" + item + "'");
    for (long long s = a; s <= b; ++s) out.push_back(static_cast<std::uint64_t>(s));
  }
  return out;
}

double stable_log_expit(double f) { return f >= 0 ? -std::log1p(std::exp(-f)) : f - std::log1p(std::exp(f)); }

std::string opt_field(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

void write_trace(const std::filesystem::path& path, const TrainTrace& tr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "epoch,training_loss,nonzero_blocks,nonzero_coefs\n";
  for (std::size_t t = 0; t < tr.epoch_marks.size(); ++t)
    out << format_double(tr.epoch_marks[t]) << ',' << format_double(tr.objective[t]) << ','
        << tr.nonzero_blocks[t] << ',' << tr.nonzero_coefs[t] << '\n';
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

void write_summary(const std::filesystem::path& path, const std::vector<const RunResult*>& runs) {
  std::map<double, std::vector<double>> by_epoch;
  for (const RunResult* r : runs)
    for (std::size_t t = 0; t < r->trace.epoch_marks.size(); ++t)
      by_epoch[r->trace.epoch_marks[t]].push_back(r->trace.objective[t]);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "epoch,runs,mean_loss,min_loss,max_loss\n";
  for (const auto& [epoch, vals] : by_epoch) {
    double sum = 0.0;
    for (double v : vals) sum += v;
    const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
    out << format_double(epoch) << ',' << vals.size() << ','
        << format_double(sum / static_cast<double>(vals.size())) << ',' << format_double(*lo)
        << ',' << format_double(*hi) << '\n';
  }
}

std::optional<double> mean_of(const std::vector<const RunResult*>& runs,
                              std::optional<double> ValidationMetrics::*field) {
  double s = 0.0;
  for (const RunResult* r : runs) {
    if (!(r->metrics.*field)) return std::nullopt;
    s += *(r->metrics.*field);
  }
  return runs.empty() ? std::nullopt : std::optional<double>(s / static_cast<double>(runs.size()));
}

}  // namespace

double parse_real(const std::string& text) {
  const std::string t = trim(text);
  const auto caret = t.find('^');
  if (caret == std::string::npos) return parse_plain(t);
  const double v = std::pow(parse_plain(trim(t.substr(0, caret))), parse_plain(trim(t.substr(caret + 1))));
  if (!std::isfinite(v)) throw ConfigError("power out of range: '" + text + "'");
  return v;
}

LamSpec parse_lam(const std::string& text) {
  LamSpec s;
  s.text = trim(text);
  const std::string key = "norm_y";
  if (s.text.compare(0, key.size(), key) == 0) {
    std::string rest = trim(s.text.substr(key.size()));
    s.relative = true;
    if (rest.empty()) {
      s.value = 1.0;
    } else {
      if (rest[0] != '/') throw ConfigError("expected 'norm_y / <divisor>' in '" + text + "'");
      s.value = parse_real(rest.substr(1));
      if (!(s.value > 0.0)) throw ConfigError("lambda divisor must be positive");
    }
  } else {
    s.value = parse_real(s.text);
    if (!(s.value >= 0.0)) throw ConfigError("lambda must be nonnegative");
  }
  return s;
}

bool ExperimentConfig::is_logistic() const {
  if (model == "logistic") return true;
  if (model == "linear") return false;
  return csv_path.empty() && data.family == Family::LogisticG;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t = train;
  if (tau) t.sizes = StepSizes{*tau, alpha.value_or(1.0)};
  return t;
}

void ExperimentConfig::validate() const {
  if (rho.empty()) throw ConfigError("config: 'rho' list is empty");
  if (lam.empty()) throw ConfigError("config: 'lam' list is empty");
  if (seeds.empty()) throw ConfigError("config: 'seeds' list is empty");
  for (double r : rho)
    if (!(r >= 0.0)) throw ConfigError("config: rho must be nonnegative");
  if (alpha && !tau) throw ConfigError("config: 'alpha' needs 'tau'");
  if (model != "auto" && model != "linear" && model != "logistic")
    throw ConfigError("config: model must be linear, logistic or auto");
  if (csv_path.empty()) {
    try {
      data.validate();
    } catch (const ContractViolation& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    if (n_valid < 0) throw ConfigError("config: n_valid must be >= 0");
  }
  if (split && !(*split > 0.0 && *split < 1.0))
    throw ConfigError("config: split must be a training fraction in (0, 1)");
  if (basis.num_knots < 2) throw ConfigError("config: knots must be >= 2");
  if (basis.m != 1 && basis.m != 2) throw ConfigError("config: order_m must be 1 or 2");
  if (basis.K < 1) throw ConfigError("config: interaction_K must be >= 1");
  if (threads < 0) throw ConfigError("config: threads must be >= 0");
  try {
    train_config().validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

void apply_setting(ExperimentConfig& c, const std::string& key_in, const std::string& value_in) {
  const std::string key = trim(key_in), v = trim(value_in);
  if (key == "family") {
    c.data.family = parse_family(v);
    if (c.data.family == Family::PhaseShift) c.data.p = 4;
  } else if (key == "n") {
    c.data.n = static_cast<long>(parse_int(v));
  } else if (key == "p") {
    c.data.p = static_cast<int>(parse_int(v));
  } else if (key == "noise_sd") {
    if (v == "auto") c.data.noise_sd.reset();
    else c.data.noise_sd = parse_real(v);
  } else if (key == "data_seed") {
    c.data.seed = static_cast<std::uint64_t>(parse_int(v));
  } else if (key == "n_valid") {
    c.n_valid = static_cast<long>(parse_int(v));
  } else if (key == "csv") {
    c.csv_path = v;
  } else if (key == "valid_csv") {
    c.valid_csv_path = v;
  } else if (key == "response") {
    c.response = v;
  } else if (key == "standardize") {
    c.standardize = parse_bool(v);
  } else if (key == "split") {
    if (v == "none") c.split.reset();
    else c.split = parse_real(v);
  } else if (key == "split_seed") {
    c.split_seed = static_cast<std::uint64_t>(parse_int(v));
  } else if (key == "model") {
    c.model = v;
  } else if (key == "knots") {
    c.basis.num_knots = static_cast<int>(parse_int(v));
  } else if (key == "order_m") {
    c.basis.m = static_cast<int>(parse_int(v));
  } else if (key == "interaction_K") {
    c.basis.K = static_cast<int>(parse_int(v));
  } else if (key == "rho") {
    c.rho.clear();
    for (const auto& item : split_list(v)) c.rho.push_back(parse_real(item));
  } else if (key == "lam") {
    c.lam.clear();
    for (const auto& item : split_list(v)) c.lam.push_back(parse_lam(item));
  } else if (key == "solver") {
    c.train.solver = parse_solver(v);
  } else if (key == "batch_steps") {
    c.train.batch_steps_per_block = static_cast<int>(parse_int(v));
  } else if (key == "epochs") {
    c.train.max_epochs = parse_real(v);
  } else if (key == "tolerance") {
    c.train.obj_tolerance = parse_real(v);
  } else if (key == "tau") {
    c.tau = parse_real(v);
  } else if (key == "alpha") {
    c.alpha = parse_real(v);
  } else if (key == "delta") {
    c.train.delta = parse_real(v);
  } else if (key == "cc_tau") {
    c.train.cc_tau = parse_real(v);
  } else if (key == "recovery") {
    c.train.recovery_enabled = parse_bool(v);
  } else if (key == "seeds") {
    c.seeds = parse_seeds(v);
  } else if (key == "out") {
    c.out_dir = v;
  } else if (key == "threads") {
    c.threads = static_cast<int>(parse_int(v));
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno);
    try {
      apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_experiment_config(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

ValidationMetrics evaluate(const DpamModel& model, const Eigen::MatrixXd& X,
                           const Eigen::VectorXd& y) {
  ValidationMetrics m;
  if (y.size() == 0) return m;
  if (y.size() != X.rows()) throw ContractViolation("evaluate: y length != rows of X");
  const Eigen::VectorXd f = predict_link(model, X);
  const double n = static_cast<double>(y.size());
  if (!model.logistic) {
    m.mse = (f - y).squaredNorm() / n;
    return m;
  }
  double ce = 0.0, wrong = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    ce -= y[i] * stable_log_expit(f[i]) + (1.0 - y[i]) * stable_log_expit(-f[i]);
    wrong += ((f[i] > 0.0) != (y[i] > 0.5)) ? 1.0 : 0.0;
  }
  m.cross_entropy = ce / n;
  m.misclassification = wrong / n;
  return m;
}

Prepared prepare_data(const ExperimentConfig& cfg) {
  Prepared d;
  if (cfg.csv_path.empty()) {
    const SyntheticData train = generate(cfg.data);
    SyntheticSpec vs = cfg.data;
    vs.n = cfg.n_valid > 0 ? cfg.n_valid : cfg.data.n;
    vs.seed = stream_key(cfg.data.seed, kValidStream);
    // The phase-shift noise level is fixed by the training signal.
    if (cfg.data.family == Family::PhaseShift) vs.noise_sd = train.noise_sd;
    const SyntheticData valid = generate(vs);
    d.X = train.X;
    d.y = train.y;
    d.X_valid = valid.X;
    d.y_valid = valid.y;
  } else {
    CsvOptions opts;
    opts.response = cfg.response;
    Dataset all = read_csv(cfg.csv_path, opts);
    if (cfg.standardize) {
      const Standardization s = standardize(all.X);
      d.input_center = s.center;
      d.input_scale = s.scale;
    }
    if (cfg.split) {
      const SplitIndices idx = split_indices(all.X.rows(), *cfg.split, cfg.split_seed);
      d.X = take_rows(all.X, idx.train);
      d.y = take_rows(all.y, idx.train);
      d.X_valid = take_rows(all.X, idx.valid);
      d.y_valid = take_rows(all.y, idx.valid);
    } else {
      d.X = std::move(all.X);
      d.y = std::move(all.y);
    }
    if (!cfg.valid_csv_path.empty()) {
      Dataset v = read_csv(cfg.valid_csv_path, opts);
      if (v.X.cols() != d.X.cols())
        throw ConfigError("validation CSV has " + std::to_string(v.X.cols()) +
                          " covariates, training has " + std::to_string(d.X.cols()));
      if (cfg.standardize) {
        v.X.rowwise() -= d.input_center;
        v.X.array().rowwise() /= d.input_scale.array();
      }
      d.X_valid = std::move(v.X);
      d.y_valid = std::move(v.y);
    }
  }
  return d;
}

std::string grid_point_dir(std::size_t rho_index, std::size_t lam_index) {
  return "rho" + std::to_string(rho_index) + "_lam" + std::to_string(lam_index);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const Prepared data = prepare_data(cfg);
  const bool logistic = cfg.is_logistic();
  const double norm_y = centered_norm_n(data.y);
  const TrainConfig base = cfg.train_config();

  ExperimentResult result;
  for (std::size_t i = 0; i < cfg.rho.size(); ++i)
    for (std::size_t j = 0; j < cfg.lam.size(); ++j) {
      std::filesystem::create_directories(cfg.out_dir / grid_point_dir(i, j));
      for (std::uint64_t seed : cfg.seeds) {
        RunResult r;
        r.rho_index = i;
        r.lam_index = j;
        r.seed = seed;
        r.rho = cfg.rho[i];
        r.lam = cfg.lam[j].resolve(norm_y);
        result.runs.push_back(std::move(r));
      }
    }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(result.runs.size());
  auto worker = [&] {
    for (std::size_t t = next++; t < result.runs.size(); t = next++) {
      RunResult& r = result.runs[t];
      try {
        TrainConfig tc = base;
        tc.seed = r.seed;
        const FitResult fr = logistic ? fit_logistic(data.X, data.y, tc, cfg.basis, r.rho, r.lam)
                                      : fit_linear(data.X, data.y, tc, cfg.basis, r.rho, r.lam);
        r.trace = fr.trace;
        r.nonzero_blocks = fr.model.nonzero_blocks();
        r.nonzero_coefs = fr.model.nonzero_coefs();
        r.metrics = evaluate(fr.model, data.X_valid, data.y_valid);
        write_trace(cfg.out_dir / grid_point_dir(r.rho_index, r.lam_index) /
                        ("trace_seed" + std::to_string(r.seed) + ".csv"),
                    r.trace);
      } catch (const std::exception& e) {
        errors[t] = std::make_exception_ptr(
            Error("run rho=" + format_double(r.rho) + " lam=" + cfg.lam[r.lam_index].text +
                  " seed=" + std::to_string(r.seed) + " failed: " + e.what()));
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t nthreads =
      std::min<std::size_t>(cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads) : hw,
                            result.runs.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < nthreads; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::ofstream table(cfg.out_dir / "table.csv", std::ios::binary);
  if (!table) throw Error("cannot write table.csv in '" + cfg.out_dir.string() + "'");
  table << "rho_index,lam_index,rho,lam,lam_spec,runs,converged_runs,mean_cycles,"
           "mean_final_loss,mean_nonzero_blocks,mean_nonzero_coefs,valid_mse,"
           "valid_cross_entropy,valid_misclassification\n";
  for (std::size_t i = 0; i < cfg.rho.size(); ++i)
    for (std::size_t j = 0; j < cfg.lam.size(); ++j) {
      std::vector<const RunResult*> runs;
      for (const auto& r : result.runs)
        if (r.rho_index == i && r.lam_index == j) runs.push_back(&r);
      write_summary(cfg.out_dir / grid_point_dir(i, j) / "summary.csv", runs);
      double cycles = 0, loss = 0, blocks = 0, coefs = 0;
      int converged = 0;
      for (const RunResult* r : runs) {
        cycles += r->trace.cycles;
        loss += r->trace.objective.back();
        blocks += r->nonzero_blocks;
        coefs += static_cast<double>(r->nonzero_coefs);
        converged += r->trace.converged ? 1 : 0;
      }
      const double k = static_cast<double>(runs.size());
      table << i << ',' << j << ',' << format_double(cfg.rho[i]) << ','
            << format_double(runs.front()->lam) << ',' << cfg.lam[j].text << ',' << runs.size()
            << ',' << converged << ',' << format_double(cycles / k) << ','
            << format_double(loss / k) << ',' << format_double(blocks / k) << ','
            << format_double(coefs / k) << ',' << opt_field(mean_of(runs, &ValidationMetrics::mse))
            << ',' << opt_field(mean_of(runs, &ValidationMetrics::cross_entropy)) << ','
            << opt_field(mean_of(runs, &ValidationMetrics::misclassification)) << '\n';
    }
  return result;
}

}  // namespace dpam
