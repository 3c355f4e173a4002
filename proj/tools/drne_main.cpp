// Copyright 2026 The DRNE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line driver: solve, certify, oracle, evaluate, sweep.
//
// Exit codes: 0 success, 1 uncertified, 2 config read, 3 validation, 4 solver,
// 5 missing constants, 6 I/O.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "drne/config.hpp"
#include "drne/drne.hpp"
#include "drne/io.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit : int {
  kOk = 0,
  kUncertified = 1,
  kConfigRead = 2,
  kValidation = 3,
  kSolver = 4,
  kMissingConstants = 5,
  kIo = 6,
};

struct ExitError {
  int code;
  std::string message;
};

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::size_t threads = drne::default_thread_count();
  std::string format = "csv";
  std::vector<std::string> overrides;
};

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw ExitError{kIo, "sha256 failed"};
  }
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[k]);
  return os.str();
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Loads the config, applies --set and --seed overrides (flags win over file values).
drne::config::Table load_resolved(const CommonOptions& opts, const char* seed_key) {
  drne::config::Table table;
  try {
    table = drne::config::load(opts.config_path);
    for (const auto& o : opts.overrides) drne::config::apply_override(table, o);
    if (opts.seed && seed_key) {
      const std::string key(seed_key);
      table[key.substr(0, key.find('.'))][key.substr(key.find('.') + 1)] = std::to_string(*opts.seed);
    }
  } catch (const drne::config::ConfigError& e) {
    throw ExitError{kConfigRead, e.what()};
  }
  return table;
}

template <typename Fn>
auto config_step(Fn&& fn) {
  try {
    return fn();
  } catch (const drne::config::ConfigError& e) {
    throw ExitError{kConfigRead, e.what()};
  }
}

void require_no_violations(const std::vector<std::string>& violations) {
  if (violations.empty()) return;
  std::string msg = "validation failed:";
  for (const auto& v : violations) msg += "\n  " + v;
  throw ExitError{kValidation, msg};
}

class OutputDir {
 public:
  explicit OutputDir(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw ExitError{kIo, "cannot create output directory '" + dir_ + "'"};
  }

  void write(const std::string& name, const std::string& content) {
    const auto path = (fs::path(dir_) / name).string();
    try {
      drne::io::write_file(path, content);
    } catch (const drne::io::IoError& e) {
      throw ExitError{kIo, e.what()};
    }
    files_.push_back(name);
  }

  const std::string& dir() const { return dir_; }
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::string dir_;
  std::vector<std::string> files_;
};

void write_manifest(OutputDir& out, const std::string& command, const CommonOptions& opts, const std::string& hash,
                    const std::string& seed, const std::string& started) {
  drne::io::KeyValueReport m;
  m.set("command", command);
  m.set("config_path", opts.config_path);
  m.set("seed", seed);
  m.set("output_dir", out.dir());
  m.set("library_version", drne::kVersion);
  m.set("config_sha256", hash);
  m.set("threads", opts.threads);
  m.set("started_at", started);
  m.set("finished_at", utc_now());
  std::string files;
  for (const auto& f : out.files()) files += (files.empty() ? "" : ",") + f;
  m.set("files", files + (files.empty() ? "" : ",") + "manifest.txt");
  out.write("manifest.txt", m.str());
}

drne::GameSpec load_game(const drne::config::Table& table) {
  auto spec = config_step([&] { return drne::config::build_game(table); });
  require_no_violations(drne::validate_game(spec));
  return spec;
}

// Reference equilibrium matching the sampling mode: the empirical game, or the
// quantile-discretized population game for online sampling.
drne::OracleResult reference_for(const drne::GameSpec& spec, const drne::SolverConfig& cfg,
                                 const std::optional<drne::TrueDistribution>& truth,
                                 const drne::OracleOptions& opts) {
  constexpr std::size_t kTruthGrid = 2000;
  if (cfg.sampling_mode == drne::SamplingMode::online && spec.decision_dim == 1) {
    return drne::reference_equilibrium(drne::with_data(spec, drne::discretize_truth(spec, *truth, kTruthGrid)), opts);
  }
  return drne::reference_equilibrium(spec, opts);
}

std::string seed_sweep_csv(const drne::SweepResult& sweep) {
  std::string out =
      "t,residual_mean,residual_median,residual_min,residual_max,avg_sq_error_mean,avg_sq_error_median,"
      "avg_sq_error_min,avg_sq_error_max\n";
  using drne::io::format_double;
  const auto& t = sweep.residual.t.empty() ? sweep.avg_sq_error.t : sweep.residual.t;
  for (std::size_t k = 0; k < t.size(); ++k) {
    out += std::to_string(t[k]);
    for (const auto* band : {&sweep.residual, &sweep.avg_sq_error}) {
      if (band->mean.empty()) {
        out += ",,,,";
      } else {
        out += "," + format_double(band->mean[k]) + "," + format_double(band->median[k]) + "," +
               format_double(band->min[k]) + "," + format_double(band->max[k]);
      }
    }
    out += "\n";
  }
  return out;
}

int cmd_solve(const CommonOptions& opts, std::size_t num_seeds_flag) {
  const auto started = utc_now();
  const auto table = load_resolved(opts, "solver.seed");
  const auto spec = load_game(table);
  const auto cfg = config_step([&] { return drne::config::build_solver(table); });
  const auto oracle_opts = config_step([&] { return drne::config::build_oracle(table); });
  const std::size_t num_seeds =
      num_seeds_flag ? num_seeds_flag
                     : config_step([&] { return drne::config::Reader(table).count("solver", "num_seeds", 1); });

  std::optional<drne::TrueDistribution> truth;
  if (cfg.sampling_mode == drne::SamplingMode::online) {
    truth = config_step([&] { return drne::config::build_truth(table, spec.num_agents); });
    require_no_violations(drne::validate_truth(*truth, spec.num_agents));
  }
  if (cfg.horizon < 1 || !(cfg.eta0 > 0.0) || cfg.record_every < 1 || !(cfg.inner.front().accuracy > 0.0) ||
      num_seeds < 1) {
    throw ExitError{kValidation, "validation failed: solver needs horizon >= 1, eta0 > 0, record_every >= 1, "
                                 "inner_accuracy > 0 and num_seeds >= 1"};
  }
  const drne::Sampling sampling = truth ? drne::Sampling(*truth) : drne::Sampling(std::monostate{});

  OutputDir out(opts.out_dir);
  try {
    const auto reference = reference_for(spec, cfg, truth, oracle_opts);
    const auto report = drne::run_algorithm1(spec, cfg, sampling, reference.equilibrium);
    out.write("trajectory.csv", drne::io::trajectory_csv(spec, report));
    out.write("metrics.csv", drne::io::metrics_csv(report));
    if (num_seeds > 1) {
      const auto sweep = drne::seed_sweep(spec, cfg, sampling, reference.equilibrium, num_seeds, opts.threads);
      if (sweep.failed > 0) {
        for (const auto& f : sweep.failures) {
          if (!f.empty()) throw ExitError{kSolver, "seed sweep: " + f};
        }
      }
      out.write("seed_sweep.csv", seed_sweep_csv(sweep));
    }

    drne::io::KeyValueReport meta;
    meta.set("seed", cfg.seed);
    meta.set("config_sha256", sha256_hex(drne::config::canonical_text(table)));
    meta.set("horizon", cfg.horizon);
    meta.set("num_seeds", num_seeds);
    meta.set("gradient_bound_U", report.constants.gradient_bound);
    meta.set("diameter_D", report.constants.diameter);
    meta.set("margin", report.constants.margin);
    meta.set("error_bound_applicable", report.constants.bound_applicable);
    meta.set("error_bound", report.constants.bound);
    meta.set("reference_method", drne::to_string(reference.method));
    meta.set("reference_residual", reference.residual_at_solution);
    std::vector<double> ref(reference.equilibrium.data(), reference.equilibrium.data() + reference.equilibrium.size());
    meta.set("reference_equilibrium", drne::io::join(ref));
    std::vector<double> fin(report.final_iterate.data(), report.final_iterate.data() + report.final_iterate.size());
    meta.set("final_iterate", drne::io::join(fin));
    out.write("run.meta", meta.str());
  } catch (const drne::SolverFailure& e) {
    throw ExitError{kSolver, std::string("solver failed: ") + e.what()};
  } catch (const drne::OracleFailure& e) {
    throw ExitError{kSolver, std::string("oracle failed: ") + e.what()};
  }
  write_manifest(out, "solve", opts, sha256_hex(drne::config::canonical_text(table)), std::to_string(cfg.seed),
                 started);
  return kOk;
}

int cmd_certify(const CommonOptions& opts, bool estimate) {
  const auto started = utc_now();
  const auto table = load_resolved(opts, "certify.estimate_seed");
  const auto spec = load_game(table);
  const drne::config::Reader reader(table);
  const auto samples = config_step([&] { return reader.count("certify", "estimate_samples", 10000); });
  const auto seed = config_step([&] { return reader.count("certify", "estimate_seed", 0); });

  drne::MonotonicityCertificate cert;
  std::optional<drne::ConstantEstimates> estimates;
  try {
    cert = drne::certify_monotonicity(spec);
  } catch (const drne::MissingConstants& e) {
    if (!estimate) throw ExitError{kMissingConstants, std::string(e.what()) + " (pass --estimate to sample them)"};
    try {
      estimates = drne::estimate_constants(spec, samples, seed);
    } catch (const std::invalid_argument& ie) {
      throw ExitError{kValidation, ie.what()};
    }
    cert = drne::certify_monotonicity(spec, *estimates);
  }
  OutputDir out(opts.out_dir);
  auto report = drne::io::certificate_report(cert);
  report.set("num_agents", spec.num_agents);
  report.set("penalties", drne::io::join(spec.penalties));
  if (estimates) {
    report.set("estimate_samples", estimates->samples);
    report.set("estimate_seed", seed);
  }
  out.write("certificate.txt", report.str());
  write_manifest(out, "certify", opts, sha256_hex(drne::config::canonical_text(table)), std::to_string(seed), started);
  std::cout << "margin = " << drne::io::format_double(cert.margin) << (cert.certified ? " (certified)" : " (not certified)")
            << "\n";
  return cert.certified ? kOk : kUncertified;
}

int cmd_oracle(const CommonOptions& opts, double grid_step_flag) {
  const auto started = utc_now();
  const auto table = load_resolved(opts, nullptr);
  const auto spec = load_game(table);
  const auto oracle_opts = config_step([&] { return drne::config::build_oracle(table); });
  const double grid_step =
      grid_step_flag > 0 ? grid_step_flag
                         : config_step([&] { return drne::config::Reader(table).number("oracle", "grid_step", 0.0); });

  OutputDir out(opts.out_dir);
  drne::OracleResult result;
  try {
    result = drne::reference_equilibrium(spec, oracle_opts);
  } catch (const drne::OracleFailure& e) {
    throw ExitError{kSolver, std::string("oracle failed: ") + e.what()};
  }
  auto report = drne::io::oracle_report(result);
  if (grid_step > 0.0) {
    report.set("best_response_grid_step", grid_step);
    report.set("best_response_gaps", drne::io::join(drne::best_response_check(spec, result.equilibrium, grid_step)));
  }
  out.write("oracle.txt", report.str());
  out.write("equilibrium.csv", drne::io::equilibrium_csv(result.equilibrium));
  write_manifest(out, "oracle", opts, sha256_hex(drne::config::canonical_text(table)), "n/a", started);
  return kOk;
}

int cmd_evaluate(const CommonOptions& opts, bool sweep) {
  const auto started = utc_now();
  const auto table = load_resolved(opts, "oos.macro_seed");
  const auto spec = load_game(table);
  auto base = config_step([&] { return drne::config::build_oos(table, spec.num_agents); });
  const auto oracle_opts = config_step([&] { return drne::config::build_oracle(table); });
  const auto repetitions =
      config_step([&] { return drne::config::Reader(table).count("oos", "repetitions", sweep ? 10 : 1); });
  auto scenarios = config_step([&] { return drne::config::build_scenarios(table); });
  if (!sweep) {
    if (base.rho.empty()) throw ExitError{kValidation, "validation failed: oos.rho is required for evaluate"};
    scenarios = {drne::Scenario{base.label, base.rho}};
  } else if (scenarios.size() < 2) {
    throw ExitError{kValidation, "validation failed: sweep needs at least two [scenario.j] sections"};
  }
  if (repetitions < 1) throw ExitError{kValidation, "validation failed: oos.repetitions must be at least 1"};
  for (const auto& s : scenarios) {
    auto check = base;
    check.rho = s.rho;
    require_no_violations(drne::validate_oos(check, spec.num_agents));
  }

  OutputDir out(opts.out_dir);
  std::vector<drne::OOSReport> single;
  std::optional<drne::ScenarioTable> table_out;
  try {
    if (sweep) {
      table_out = drne::scenario_sweep(scenarios, base, spec, repetitions, opts.threads, oracle_opts);
    } else {
      single.resize(repetitions);
      drne::parallel_for(repetitions, opts.threads, [&](std::size_t r) {
        auto cfg = base;
        cfg.rho = scenarios.front().rho;
        cfg.label = scenarios.front().label;
        cfg.macro_seed = base.macro_seed + r;
        single[r] = drne::run_oos_experiment(cfg, spec, oracle_opts);
      });
    }
  } catch (const drne::OracleFailure& e) {
    throw ExitError{kSolver, std::string("oracle failed: ") + e.what()};
  }

  std::vector<const drne::OOSReport*> all;
  if (table_out) {
    for (const auto& row : table_out->reports) {
      for (const auto& r : row) all.push_back(&r);
    }
  } else {
    for (const auto& r : single) all.push_back(&r);
  }
  bool unperturbed = true;
  for (std::size_t i = 0; i < spec.num_agents; ++i) {
    unperturbed = unperturbed && base.delta_mean[i] == 0.0 && base.delta_std[i] == 0.0;
  }
  out.write("oos_realizations.csv", drne::io::oos_realizations_csv(all));
  out.write("oos_summary.csv", drne::io::oos_summary_csv(all, unperturbed));
  std::string hist;
  for (const auto* r : all) {
    auto h = drne::io::histogram_csv(r->histogram, r->scenario + "," + std::to_string(r->seed));
    hist += hist.empty() ? h : h.substr(h.find('\n') + 1);
  }
  // Header of the multi-scenario histogram carries a seed column too.
  hist.replace(0, hist.find('\n'), "scenario,seed,bin_lo,bin_hi,count");
  out.write("histogram.csv", hist);
  if (table_out) {
    out.write("scenario_summary.csv", drne::io::scenario_summary_csv(*table_out));
    out.write("comparison.csv", drne::io::comparison_csv(*table_out));
  }
  write_manifest(out, sweep ? "sweep" : "evaluate", opts, sha256_hex(drne::config::canonical_text(table)),
                 std::to_string(base.macro_seed), started);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributionally robust Nash equilibrium solver"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(drne::kVersion));

  CommonOptions opts;
  const char* env_out = std::getenv("DRNE_OUT_DIR");
  opts.out_dir = env_out && *env_out ? env_out : "drne-out";
  std::uint64_t seed_value = 0;
  std::size_t num_seeds = 0;
  bool estimate = false;
  double grid_step = 0.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "Run configuration (INI)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed_value, "Override the command's seed");
    sub->add_option("--out", opts.out_dir, "Output directory (default $DRNE_OUT_DIR or ./drne-out)");
    sub->add_option("--threads", opts.threads, "Worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber);
    sub->add_option("--format", opts.format, "Output format")->check(CLI::IsMember({"csv"}));
    sub->add_option("--set", opts.overrides, "Override a config value: section.key=value (repeatable)");
  };
  auto* solve = app.add_subcommand("solve", "Run the stochastic equilibrium-seeking algorithm");
  add_common(solve);
  solve->add_option("--seeds", num_seeds, "Also run a sweep over this many consecutive seeds");
  auto* certify = app.add_subcommand("certify", "Certify strong monotonicity of the surrogate pseudo-gradient");
  add_common(certify);
  certify->add_flag("--estimate", estimate, "Estimate missing constants by sampling");
  auto* oracle = app.add_subcommand("oracle", "Compute a high-precision reference equilibrium");
  add_common(oracle);
  oracle->add_option("--grid-step", grid_step, "Also run the brute-force best-response check");
  auto* evaluate = app.add_subcommand("evaluate", "Out-of-sample evaluation of one scenario");
  add_common(evaluate);
  auto* sweep = app.add_subcommand("sweep", "Out-of-sample comparison across scenarios");
  add_common(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigRead;
  }
  for (auto* sub : {solve, certify, oracle, evaluate, sweep}) {
    if (sub->parsed() && sub->count("--seed")) opts.seed = seed_value;
  }

  try {
    if (solve->parsed()) return cmd_solve(opts, num_seeds);
    if (certify->parsed()) return cmd_certify(opts, estimate);
    if (oracle->parsed()) return cmd_oracle(opts, grid_step);
    if (evaluate->parsed()) return cmd_evaluate(opts, false);
    if (sweep->parsed()) return cmd_evaluate(opts, true);
  } catch (const ExitError& e) {
    std::cerr << "drne: " << e.message << "\n";
    return e.code;
  } catch (const drne::InnerSolveFailure& e) {
    std::cerr << "drne: " << e.what() << "\n";
    return kSolver;
  } catch (const std::invalid_argument& e) {
    std::cerr << "drne: validation failed: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "drne: " << e.what() << "\n";
    return kSolver;
  }
  return kOk;
}
