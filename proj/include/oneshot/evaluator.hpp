#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "oneshot/errors.hpp"
#include "oneshot/net.hpp"
#include "oneshot/parallel.hpp"
#include "oneshot/rng.hpp"
#include "oneshot/trainer.hpp"
#include "oneshot/valuations.hpp"

namespace oneshot {

// Evaluation harness knobs. The first agent is always the designated
// misreporter; truthful_probe picks a second agent whose regret is measured
// under the same auction set (-1 disables, and it is skipped when n = 1).
struct EvalConfig {
  ValuationGrid grid;
  std::size_t misreport_cap = kDefaultMisreportCap;
  int truthful_probe = 1;
  double benchmark = 2.10;
  std::uint64_t master_seed = 0;
  bool share_training_seed = false;  // reuse A_0's training seed for every A_j

  void validate(int bidders) const {
    if (benchmark <= 0.0 || !std::isfinite(benchmark)) {
      throw ConfigError("eval.benchmark: must be finite and > 0");
    }
    if (bidders > 1 && truthful_probe >= bidders) {
      throw ConfigError("eval.truthful_probe: agent index out of range");
    }
  }
};

// One trained auction within a sample: j = 0 is the truthful auction A_0,
// j >= 1 the misreport auctions in enumeration order.
struct MisreportRecord {
  int j = 0;
  std::vector<double> report;  // agent 1's reported row for this auction
  double u1 = 0.0;             // agent 1's utility at its TRUE values under this auction
  double revenue = 0.0;        // revenue on the profile the auction was trained on
  double u_probe = 0.0;        // truthful probe agent's utility (NaN when disabled)
  bool failed = false;
  std::string failure;
};

struct SampleReport {
  int sample_id = 0;
  BidProfile valuation{1, 1};
  std::vector<MisreportRecord> records;
  double truthful_utility = 0.0;
  double regret = 0.0;           // max over misreport auctions of u1 - truthful_utility
  double truthful_regret = 0.0;  // same scan for the probe agent (NaN when disabled)
  double min_revenue = 0.0;      // over A_0 and every A_j
  double beta = 0.0;
  bool beta_infinite = false;
  int outperforming = 0;  // misreports with u1 strictly above the truthful utility
  bool failed = false;    // A_0 aborted; aggregates are meaningless then
  std::string failure;
};

// Regret of the designated agent: best misreport utility minus the truthful
// utility. Reported as-is; a negative value means every misreport hurt.
inline double agent1_regret(double truthful_utility,
                            std::span<const double> misreport_utilities) {
  if (misreport_utilities.empty()) {
    throw std::invalid_argument("agent1_regret: empty misreport utility list");
  }
  const double best = *std::max_element(misreport_utilities.begin(), misreport_utilities.end());
  return best - truthful_utility;
}

// Minimum revenue across all auctions of a sample, skipping failed records.
inline double min_revenue(const SampleReport& report) {
  double result = std::numeric_limits<double>::infinity();
  for (const auto& record : report.records) {
    if (!record.failed) result = std::min(result, record.revenue);
  }
  return result;
}

// beta such that performance >= benchmark / beta; beta >= 1 means the
// benchmark was not met. Nonpositive performance has no finite beta.
inline double beta_approximation(double performance, double benchmark, bool* infinite = nullptr) {
  if (!(benchmark > 0.0)) throw std::invalid_argument("beta_approximation: benchmark must be > 0");
  if (!(performance > 0.0)) {
    if (infinite) *infinite = true;
    return std::numeric_limits<double>::infinity();
  }
  if (infinite) *infinite = false;
  return benchmark / performance;
}

// Trains A_0 on the sampled valuations and one auction per enumerated
// misreport of the first agent, then assembles the per-sample record.
// Utilities are always computed at the agent's true valuation row. Training
// aborts mark the affected record failed; the rest of the sample survives.
inline SampleReport evaluate_sample(const BidProfile& valuation, const NetworkConfig& net_config,
                                    const TrainConfig& train_config, const EvalConfig& eval_config,
                                    int sample_id = 0, int jobs = 1) {
  eval_config.validate(valuation.bidders());
  const int n = valuation.bidders();
  const int m = valuation.items();
  const int probe = (eval_config.truthful_probe >= 0 && eval_config.truthful_probe != 0 && n > 1)
                        ? eval_config.truthful_probe
                        : -1;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  const auto misreports = enumerate_misreports(eval_config.grid, m, eval_config.misreport_cap);

  SampleReport report;
  report.sample_id = sample_id;
  report.valuation = valuation;
  report.records.resize(misreports.size() + 1);

  const std::vector<double> v1(valuation.row(0).begin(), valuation.row(0).end());

  auto run_one = [&](std::size_t j) {
    MisreportRecord& record = report.records[j];
    record.j = static_cast<int>(j);
    record.report = j == 0 ? v1 : misreports[j - 1];
    record.u_probe = nan;
    const BidProfile profile =
        j == 0 ? valuation : replace_bidder(valuation, 0, record.report);
    TrainConfig cfg = train_config;
    const std::uint64_t j_tag = eval_config.share_training_seed ? 0 : static_cast<std::uint64_t>(j);
    cfg.seed = derive_seed(eval_config.master_seed, StreamTag::kEvalTraining,
                           {static_cast<std::uint64_t>(sample_id), j_tag});
    try {
      const TrainResult trained = train_one_shot(profile, net_config, cfg);
      record.u1 = utility(trained.params, v1, profile, 0);
      record.revenue = revenue(trained.params, profile);
      if (probe >= 0) {
        record.u_probe = utility(trained.params, valuation.row(probe), profile, probe);
      }
    } catch (const DivergenceError& e) {
      record.failed = true;
      record.failure = e.what();
    }
  };
  parallel_for(report.records.size(), jobs, run_one);

  const MisreportRecord& truthful = report.records[0];
  report.failed = truthful.failed;
  report.failure = truthful.failure;
  report.truthful_utility = truthful.failed ? nan : truthful.u1;

  std::vector<double> u1s;
  std::vector<double> u_probes;
  for (std::size_t j = 1; j < report.records.size(); ++j) {
    const auto& record = report.records[j];
    if (record.failed) continue;
    u1s.push_back(record.u1);
    if (probe >= 0) u_probes.push_back(record.u_probe);
  }

  if (!report.failed && !u1s.empty()) {
    report.regret = agent1_regret(report.truthful_utility, u1s);
    report.truthful_regret =
        probe >= 0 ? agent1_regret(truthful.u_probe, u_probes) : nan;
    for (double u : u1s) {
      if (u > report.truthful_utility) ++report.outperforming;
    }
  } else {
    report.regret = nan;
    report.truthful_regret = nan;
    report.failed = true;
    if (report.failure.empty()) report.failure = "no successful misreport auction";
  }

  report.min_revenue = min_revenue(report);
  if (!std::isfinite(report.min_revenue)) {
    report.min_revenue = nan;
    report.beta = nan;
    report.beta_infinite = false;
  } else {
    report.beta = beta_approximation(report.min_revenue, eval_config.benchmark,
                                     &report.beta_infinite);
  }
  return report;
}

// One ready-to-run evaluation unit of a sweep.
struct SweepJob {
  std::string sigma_label;  // "no_dp" or the numeric sigma
  double sigma = 0.0;
  bool no_dp = false;
  std::uint64_t seed = 0;
  int sample_id = 0;
};

struct SweepRow {
  std::string sigma_label;
  double sigma = 0.0;
  bool no_dp = false;
  double max_regret_misreporter = 0.0;  // mean over runs of the per-sample regret
  double max_regret_truthful = 0.0;     // mean over runs of the probe-agent regret
  double min_revenue = 0.0;             // mean over runs of the per-sample minimum revenue
  double beta = 0.0;
  bool beta_infinite = false;
  long outperforming_count = 0;  // summed over runs
  int runs = 0;
  int failures = 0;
};

struct SweepRunResult {
  SweepJob job;
  SampleReport report;
};

struct SweepReport {
  std::vector<SweepRow> rows;         // one per sigma label, in request order
  std::vector<SweepRunResult> runs;   // every (sigma, seed, sample) evaluation
};

// Evaluates every (sigma, seed, sample) combination and aggregates one row
// per sigma. Valuation samples and per-auction training seeds depend only on
// (seed, sample), so each sigma row sees the same experiments and the same
// underlying noise draws, scaled by its own sigma.
inline SweepReport sweep_sigma(const NetworkConfig& net_config, const TrainConfig& base_train,
                               const EvalConfig& eval_config,
                               const std::vector<std::pair<std::string, double>>& sigmas,
                               bool include_no_dp, int samples,
                               const std::vector<std::uint64_t>& seeds, int jobs = 1) {
  if (sigmas.empty() && !include_no_dp) {
    throw ConfigError("sweep: sigma list must not be empty");
  }
  if (samples < 1) throw ConfigError("sweep: samples must be >= 1");
  if (seeds.empty()) throw ConfigError("sweep: seed list must not be empty");

  std::vector<SweepJob> jobs_list;
  auto push_jobs = [&](const std::string& label, double sigma, bool no_dp) {
    for (const std::uint64_t seed : seeds) {
      for (int s = 0; s < samples; ++s) {
        jobs_list.push_back(SweepJob{label, sigma, no_dp, seed, s});
      }
    }
  };
  if (include_no_dp) push_jobs("no_dp", 0.0, true);
  for (const auto& [label, sigma] : sigmas) push_jobs(label, sigma, false);

  std::vector<SweepRunResult> results(jobs_list.size());
  parallel_for(jobs_list.size(), jobs, [&](std::size_t k) {
    const SweepJob& job = jobs_list[k];
    const BidProfile valuation =
        sample_profile(eval_config.grid, net_config.bidders, net_config.items,
                       derive_seed(job.seed, StreamTag::kProfileSample,
                                   {static_cast<std::uint64_t>(job.sample_id)}));
    TrainConfig train = base_train;
    train.dp.enabled = !job.no_dp;
    train.dp.sigma = job.sigma;
    EvalConfig eval = eval_config;
    eval.master_seed = job.seed;
    results[k] = SweepRunResult{
        job, evaluate_sample(valuation, net_config, train, eval, job.sample_id, 1)};
  });

  SweepReport sweep;
  sweep.runs = std::move(results);

  std::vector<std::string> labels;
  if (include_no_dp) labels.push_back("no_dp");
  for (const auto& [label, sigma] : sigmas) labels.push_back(label);

  for (const auto& label : labels) {
    SweepRow row;
    row.sigma_label = label;
    double regret_sum = 0.0, truthful_sum = 0.0, revenue_sum = 0.0;
    int ok = 0, truthful_ok = 0;
    for (const auto& run : sweep.runs) {
      if (run.job.sigma_label != label) continue;
      row.sigma = run.job.sigma;
      row.no_dp = run.job.no_dp;
      ++row.runs;
      if (run.report.failed) {
        ++row.failures;
        continue;
      }
      ++ok;
      regret_sum += run.report.regret;
      revenue_sum += run.report.min_revenue;
      row.outperforming_count += run.report.outperforming;
      if (std::isfinite(run.report.truthful_regret)) {
        truthful_sum += run.report.truthful_regret;
        ++truthful_ok;
      }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.max_regret_misreporter = ok > 0 ? regret_sum / ok : nan;
    row.max_regret_truthful = truthful_ok > 0 ? truthful_sum / truthful_ok : nan;
    row.min_revenue = ok > 0 ? revenue_sum / ok : nan;
    row.beta = ok > 0 ? beta_approximation(row.min_revenue, eval_config.benchmark,
                                           &row.beta_infinite)
                      : nan;
    sweep.rows.push_back(std::move(row));
  }
  return sweep;
}

}  // namespace oneshot
