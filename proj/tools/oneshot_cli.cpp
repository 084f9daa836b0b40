// Command-line front end: train one-shot auctions, evaluate them against
// enumerated misreports, sweep the noise multiplier and render SVG reports.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "oneshot/oneshot.hpp"

namespace fs = std::filesystem;
using namespace oneshot;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitResourceCap = 3;
constexpr int kExitDivergence = 4;

std::vector<double> parse_double_list(const std::string& csv, const std::string& what) {
  std::vector<double> values;
  std::string current;
  std::stringstream stream(csv);
  while (std::getline(stream, current, ',')) {
    if (current.empty()) continue;
    values.push_back(parse_double(current, what));
  }
  if (values.empty()) throw ConfigError(what + ": empty list");
  return values;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  for (double v : parse_double_list(csv, "--seeds")) {
    seeds.push_back(static_cast<std::uint64_t>(v));
  }
  return seeds;
}

BidProfile training_profile(const RunConfig& cfg, int sample_id, std::uint64_t seed) {
  if (cfg.profile) return *cfg.profile;
  return sample_profile(cfg.eval.grid, cfg.network.bidders, cfg.network.items,
                        derive_seed(seed, StreamTag::kProfileSample,
                                    {static_cast<std::uint64_t>(sample_id)}));
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  bool no_dp = false;
  int jobs = static_cast<int>(std::thread::hardware_concurrency());
  int samples = -1;                 // -1: take from config
  std::string seeds_csv;
  double benchmark = -1.0;          // <0: take from config
};

RunConfig resolve_config(const CommonArgs& args, bool require_dp_fields) {
  RunConfig cfg = load_run_config(args.config_path, require_dp_fields && !args.no_dp);
  if (args.no_dp) cfg.train.dp.enabled = false;
  if (args.samples > 0) cfg.samples = args.samples;
  if (!args.seeds_csv.empty()) cfg.seeds = parse_seed_list(args.seeds_csv);
  if (args.benchmark > 0.0) cfg.eval.benchmark = args.benchmark;
  return cfg;
}

int run_train(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args, /*require_dp_fields=*/true);
  fs::create_directories(args.out_dir);

  RunManifest manifest;
  manifest.started_utc = utc_timestamp();
  manifest.config = cfg.to_json();
  manifest.seeds = {cfg.train.seed};

  const BidProfile profile = training_profile(cfg, 0, cfg.train.seed);
  TrainResult result = [&] {
    try {
      return train_one_shot(profile, cfg.network, cfg.train);
    } catch (const DivergenceError& e) {
      // keep the trace prefix around for diagnosis before propagating
      write_trace_csv((fs::path(args.out_dir) / "trace.csv").string(), e.trace_prefix);
      throw;
    }
  }();

  const fs::path params_path = fs::path(args.out_dir) / "params.json";
  const fs::path trace_path = fs::path(args.out_dir) / "trace.csv";
  const fs::path manifest_path = fs::path(args.out_dir) / "manifest.json";
  write_json_file(params_path, result.params.to_json());
  write_trace_csv(trace_path.string(), result.trace);

  manifest.accountant = accountant_report(result.ledger, cfg.target_delta);
  manifest.outputs = {params_path.string(), trace_path.string()};
  manifest.finished_utc = utc_timestamp();
  write_json_file(manifest_path, manifest.to_json());

  std::cout << "trained " << cfg.network.bidders << "x" << cfg.network.items << " auction in "
            << cfg.train.total_steps << " steps; params -> " << params_path.string() << "\n";
  return kExitOk;
}

int run_evaluate(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args, /*require_dp_fields=*/true);
  fs::create_directories(args.out_dir);

  RunManifest manifest;
  manifest.started_utc = utc_timestamp();
  manifest.config = cfg.to_json();
  manifest.seeds = cfg.seeds;

  struct Unit {
    std::uint64_t seed;
    int sample_id;
  };
  std::vector<Unit> units;
  for (std::uint64_t seed : cfg.seeds) {
    for (int s = 0; s < cfg.samples; ++s) units.push_back({seed, s});
  }
  std::vector<SampleReport> reports(units.size());
  parallel_for(units.size(), args.jobs, [&](std::size_t k) {
    const auto [seed, sample_id] = units[k];
    EvalConfig eval = cfg.eval;
    eval.master_seed = seed;
    const BidProfile valuation = cfg.profile
                                     ? *cfg.profile
                                     : sample_profile(cfg.eval.grid, cfg.network.bidders,
                                                      cfg.network.items,
                                                      derive_seed(seed, StreamTag::kProfileSample,
                                                                  {static_cast<std::uint64_t>(sample_id)}));
    reports[k] = evaluate_sample(valuation, cfg.network, cfg.train, eval, sample_id, 1);
  });

  int failed = 0;
  for (std::size_t k = 0; k < units.size();) {
    const std::uint64_t seed = units[k].seed;
    std::vector<SampleReport> seed_reports;
    while (k < units.size() && units[k].seed == seed) {
      if (reports[k].failed) ++failed;
      seed_reports.push_back(reports[k]);
      ++k;
    }
    const fs::path csv_path =
        fs::path(args.out_dir) / ("sample_reports_seed_" + std::to_string(seed) + ".csv");
    write_sample_reports_csv(csv_path.string(), seed_reports);
    manifest.outputs.push_back(csv_path.string());
  }

  PrivacyLedger per_run_ledger;
  per_run_ledger.sigma = cfg.train.dp.enabled ? cfg.train.dp.sigma : 0.0;
  per_run_ledger.mechanisms_per_step = cfg.network.bidders;
  per_run_ledger.dp_enabled = cfg.train.dp.enabled;
  per_run_ledger.releases = static_cast<std::uint64_t>(cfg.train.total_steps) *
                            static_cast<std::uint64_t>(cfg.network.bidders);
  manifest.accountant = accountant_report(per_run_ledger, cfg.target_delta);
  manifest.finished_utc = utc_timestamp();
  write_json_file(fs::path(args.out_dir) / "manifest.json", manifest.to_json());

  std::cout << "evaluated " << units.size() << " sample(s); " << failed
            << " failed; reports -> " << args.out_dir << "\n";
  return kExitOk;
}

int run_sweep(const CommonArgs& args, const std::string& sigmas_csv) {
  RunConfig cfg = resolve_config(args, /*require_dp_fields=*/false);
  if (!sigmas_csv.empty()) {
    cfg.sweep_sigmas.clear();
    for (double sigma : parse_double_list(sigmas_csv, "--sigmas")) {
      if (!(sigma >= 0.0)) throw ConfigError("--sigmas: values must be >= 0");
      cfg.sweep_sigmas.emplace_back(format_sigma_label(sigma), sigma);
    }
  }
  if (args.no_dp) cfg.sweep_include_no_dp = true;  // adds the baseline row
  if (cfg.sweep_sigmas.empty() && !cfg.sweep_include_no_dp) {
    throw ConfigError("sweep: no sigma values given (use --sigmas or config sweep.sigmas)");
  }
  fs::create_directories(args.out_dir);

  RunManifest manifest;
  manifest.started_utc = utc_timestamp();
  manifest.config = cfg.to_json();
  manifest.seeds = cfg.seeds;

  const SweepReport sweep = sweep_sigma(cfg.network, cfg.train, cfg.eval, cfg.sweep_sigmas,
                                        cfg.sweep_include_no_dp, cfg.samples, cfg.seeds,
                                        args.jobs);

  const fs::path summary_path = fs::path(args.out_dir) / "summary.csv";
  write_sweep_summary_csv(summary_path.string(), sweep);
  manifest.outputs.push_back(summary_path.string());

  // one sample-report CSV per (sigma, seed)
  std::map<std::pair<std::string, std::uint64_t>, std::vector<SampleReport>> grouped;
  for (const auto& run : sweep.runs) {
    grouped[{run.job.sigma_label, run.job.seed}].push_back(run.report);
  }
  for (const auto& [key, reports] : grouped) {
    const fs::path csv_path =
        fs::path(args.out_dir) / ("sample_reports_sigma_" + key.first + "_seed_" +
                                  std::to_string(key.second) + ".csv");
    write_sample_reports_csv(csv_path.string(), reports);
    manifest.outputs.push_back(csv_path.string());
  }

  nlohmann::json accountants = nlohmann::json::array();
  for (const auto& row : sweep.rows) {
    PrivacyLedger ledger;
    ledger.sigma = row.no_dp ? 0.0 : row.sigma;
    ledger.mechanisms_per_step = cfg.network.bidders;
    ledger.dp_enabled = !row.no_dp;
    ledger.releases = static_cast<std::uint64_t>(cfg.train.total_steps) *
                      static_cast<std::uint64_t>(cfg.network.bidders);
    nlohmann::json entry = accountant_report(ledger, cfg.target_delta);
    entry["sigma_label"] = row.sigma_label;
    accountants.push_back(entry);
  }
  manifest.accountant = accountants;
  manifest.finished_utc = utc_timestamp();
  write_json_file(fs::path(args.out_dir) / "manifest.json", manifest.to_json());

  std::cout << "sweep over " << sweep.rows.size() << " sigma value(s), " << sweep.runs.size()
            << " run(s); summary -> " << summary_path.string() << "\n";
  return kExitOk;
}

struct ExperimentData {
  // per (experiment, misreport j) regret lines and per experiment revenue lines
  std::map<std::pair<std::string, int>, std::vector<std::pair<double, double>>> regret_lines;
  std::map<std::string, std::vector<std::pair<double, double>>> revenue_lines;
};

void collect_report_file(const fs::path& path, ExperimentData& data) {
  const std::string name = path.filename().string();
  // expected name: sample_reports_sigma_<label>_seed_<seed>.csv
  const std::string prefix = "sample_reports_sigma_";
  if (name.rfind(prefix, 0) != 0) {
    throw ConfigError(name + ": expected file name sample_reports_sigma_<sigma>_seed_<seed>.csv");
  }
  const std::size_t seed_pos = name.rfind("_seed_");
  if (seed_pos == std::string::npos) {
    throw ConfigError(name + ": expected file name sample_reports_sigma_<sigma>_seed_<seed>.csv");
  }
  const std::string label = name.substr(prefix.size(), seed_pos - prefix.size());
  if (label == "no_dp") return;  // baseline rows have no position on the sigma axis
  const double sigma = parse_double(label, name + ": sigma");
  const std::string seed = name.substr(seed_pos + 6, name.size() - seed_pos - 6 - 4);

  const auto rows = read_sample_reports_csv(path.string());
  std::map<int, double> truthful;  // sample_id -> u1 of A_0
  for (const auto& row : rows) {
    if (row.j == 0 && row.ok) truthful[row.sample_id] = row.u1;
  }
  for (const auto& row : rows) {
    if (!row.ok) continue;
    const std::string experiment = "seed" + seed + "/sample" + std::to_string(row.sample_id);
    if (row.j > 0 && truthful.count(row.sample_id)) {
      data.regret_lines[{experiment, row.j}].push_back({sigma, row.u1 - truthful[row.sample_id]});
    }
    auto [it, inserted] = data.revenue_lines.emplace(
        experiment, std::vector<std::pair<double, double>>{});
    auto& line = it->second;
    auto point = std::find_if(line.begin(), line.end(),
                              [&](const auto& p) { return p.first == sigma; });
    if (point == line.end()) {
      line.push_back({sigma, row.revenue});
    } else {
      point->second = std::min(point->second, row.revenue);
    }
  }
}

int run_report(const std::string& in_dir, std::vector<std::string> csv_paths,
               const std::string& out_dir) {
  std::vector<fs::path> files;
  for (const auto& p : csv_paths) files.emplace_back(p);
  if (!in_dir.empty()) {
    for (const auto& entry : fs::directory_iterator(in_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("sample_reports_sigma_", 0) == 0 && entry.path().extension() == ".csv") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw ConfigError("report: no sample-report CSV files given");

  ExperimentData data;
  for (const auto& file : files) collect_report_file(file, data);

  std::vector<SvgSeries> regret_series;
  for (const auto& [key, points] : data.regret_lines) {
    regret_series.push_back(SvgSeries{key.first,
                                      key.first + "/misreport" + std::to_string(key.second),
                                      points});
  }
  std::vector<SvgSeries> revenue_series;
  for (const auto& [experiment, points] : data.revenue_lines) {
    revenue_series.push_back(SvgSeries{experiment, experiment, points});
  }
  if (regret_series.empty() && revenue_series.empty()) {
    throw ConfigError("report: no data rows in the given CSV files");
  }

  fs::create_directories(out_dir);
  const fs::path regret_path = fs::path(out_dir) / "regret.svg";
  const fs::path revenue_path = fs::path(out_dir) / "revenue.svg";
  {
    std::ofstream out(regret_path);
    out << render_line_chart(
        SvgChartSpec{"Per-misreport regret of the misreporting agent", "noise multiplier",
                     "utility gain over truthful report"},
        regret_series);
  }
  {
    std::ofstream out(revenue_path);
    out << render_line_chart(
        SvgChartSpec{"Minimum revenue per experiment", "noise multiplier", "revenue"},
        revenue_series);
  }
  std::cout << "charts -> " << regret_path.string() << ", " << revenue_path.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-shot auction learner with differentially private regret gradients"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, sweep_args;
  std::string sigmas_csv;
  std::string report_in, report_out;
  std::vector<std::string> report_csvs;

  auto add_common = [](CLI::App* cmd, CommonArgs& args, bool with_eval_flags) {
    cmd->add_option("--config", args.config_path, "run config JSON")->required();
    cmd->add_option("--out", args.out_dir, "output directory")->required();
    cmd->add_flag("--no-dp", args.no_dp, "disable the DP gradient pipeline");
    cmd->add_option("--jobs", args.jobs, "max parallel evaluation jobs");
    if (with_eval_flags) {
      cmd->add_option("--samples", args.samples, "valuation samples per seed");
      cmd->add_option("--seeds", args.seeds_csv, "comma-separated master seeds");
      cmd->add_option("--benchmark", args.benchmark, "revenue benchmark for beta");
    }
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train one auction on one bid profile");
  add_common(train_cmd, train_args, false);
  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "enumerate misreports and retrain one auction per report");
  add_common(eval_cmd, eval_args, true);
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "evaluate across noise multipliers");
  add_common(sweep_cmd, sweep_args, true);
  sweep_cmd->add_option("--sigmas", sigmas_csv, "comma-separated noise multipliers");

  CLI::App* report_cmd = app.add_subcommand("report", "render sweep CSVs to SVG line charts");
  report_cmd->add_option("csvs", report_csvs, "sample-report CSV files");
  report_cmd->add_option("--in", report_in, "sweep output directory");
  report_cmd->add_option("--out", report_out, "chart output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train_cmd->parsed()) return run_train(train_args);
    if (eval_cmd->parsed()) return run_evaluate(eval_args);
    if (sweep_cmd->parsed()) {
      if (sweep_cmd->count("--sigmas") > 0 && sigmas_csv.empty()) {
        throw ConfigError("--sigmas: empty list");
      }
      return run_sweep(sweep_args, sigmas_csv);
    }
    if (report_cmd->parsed()) return run_report(report_in, report_csvs, report_out);
  } catch (const MisreportCapError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitResourceCap;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
