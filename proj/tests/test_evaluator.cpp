#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oneshot/evaluator.hpp"

using namespace oneshot;

namespace {

NetworkConfig tiny_net(int n, int m, double init_scale = 1.0) {
  NetworkConfig cfg;
  cfg.bidders = n;
  cfg.items = m;
  cfg.hidden_layers = 1;
  cfg.hidden_width = 4;
  cfg.init_scale = init_scale;
  return cfg;
}

TrainConfig tiny_train(int steps, double sigma) {
  TrainConfig cfg;
  cfg.total_steps = steps;
  cfg.gamma_steps = 2;
  cfg.lagrange_update_every = 2;
  cfg.dp.sigma = sigma;
  cfg.dp.clip_norm = 1.0;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("agent regret is the best-misreport margin") {
  REQUIRE(agent1_regret(0.5, std::vector<double>{0.2, 0.5}) == 0.0);
  REQUIRE_THAT(agent1_regret(0.4, std::vector<double>{0.1}),
               Catch::Matchers::WithinAbs(-0.3, 1e-15));
  REQUIRE_THROWS_AS(agent1_regret(0.0, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("beta approximation against the configured benchmark") {
  REQUIRE(beta_approximation(2.10, 2.10) == 1.0);
  REQUIRE_THAT(beta_approximation(1.71, 2.10), Catch::Matchers::WithinAbs(1.228, 1e-3));
  REQUIRE_THAT(beta_approximation(1.191, 2.10), Catch::Matchers::WithinAbs(1.763, 1e-3));

  bool infinite = false;
  REQUIRE(std::isinf(beta_approximation(0.0, 2.10, &infinite)));
  REQUIRE(infinite);
  REQUIRE_THROWS_AS(beta_approximation(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("evaluate_sample trains one auction per enumerated misreport") {
  const BidProfile v(2, 2, {1, 0, 0, 1});
  EvalConfig eval;
  eval.master_seed = 11;
  const SampleReport report =
      evaluate_sample(v, tiny_net(2, 2), tiny_train(2, 0.0), eval, /*sample_id=*/4);

  REQUIRE(report.sample_id == 4);
  REQUIRE(report.records.size() == 5);  // A_0 plus |{0,1}|^2 misreports
  REQUIRE(report.records[0].j == 0);
  REQUIRE(report.records[0].report == std::vector<double>{1, 0});
  REQUIRE(report.records[1].report == std::vector<double>{0, 0});
  REQUIRE(report.records[4].report == std::vector<double>{1, 1});
  REQUIRE_FALSE(report.failed);

  // aggregates are pure functions of the stored records
  double best = -1e18;
  double min_rev = 1e18;
  int outperforming = 0;
  for (const auto& record : report.records) {
    min_rev = std::min(min_rev, record.revenue);
    if (record.j == 0) continue;
    best = std::max(best, record.u1);
    if (record.u1 > report.truthful_utility) ++outperforming;
  }
  REQUIRE_THAT(report.regret,
               Catch::Matchers::WithinAbs(best - report.truthful_utility, 1e-12));
  REQUIRE_THAT(report.min_revenue, Catch::Matchers::WithinAbs(min_rev, 1e-12));
  REQUIRE(report.outperforming == outperforming);
  REQUIRE_THAT(report.beta,
               Catch::Matchers::WithinAbs(eval.benchmark / report.min_revenue, 1e-12));
  REQUIRE_THAT(min_revenue(report), Catch::Matchers::WithinAbs(report.min_revenue, 1e-12));

  // truthful probe agent gets the same scan
  REQUIRE(std::isfinite(report.truthful_regret));

  // deterministic given (configs, seed, sample)
  const SampleReport again =
      evaluate_sample(v, tiny_net(2, 2), tiny_train(2, 0.0), eval, 4);
  REQUIRE(again.regret == report.regret);
  REQUIRE(again.min_revenue == report.min_revenue);
  for (std::size_t j = 0; j < report.records.size(); ++j) {
    REQUIRE(again.records[j].u1 == report.records[j].u1);
    REQUIRE(again.records[j].revenue == report.records[j].revenue);
  }
}

TEST_CASE("identical auctions keep regret nonnegative by containment") {
  // sigma = 0, T = 0 and a shared seed force every A_j to equal A_0; the
  // truthful report is among the enumerated misreports, so regret >= 0
  const BidProfile v(2, 2, {1, 0, 0, 1});
  EvalConfig eval;
  eval.master_seed = 5;
  eval.share_training_seed = true;
  TrainConfig train = tiny_train(0, 0.0);
  const SampleReport report = evaluate_sample(v, tiny_net(2, 2), train, eval);
  REQUIRE(report.regret >= 0.0);

  // the record matching the truthful report evaluates identically to A_0
  for (const auto& record : report.records) {
    if (record.j > 0 && record.report == std::vector<double>{1, 0}) {
      REQUIRE_THAT(record.u1, Catch::Matchers::WithinAbs(report.truthful_utility, 1e-12));
    }
  }
}

TEST_CASE("frozen 1x1 net reproduces the closed-form regret") {
  // all-zero weights: u(v; r) = 0.5 v - 0.25 r, so regret is 0.25 v
  EvalConfig eval;
  eval.master_seed = 1;
  eval.share_training_seed = true;
  eval.truthful_probe = -1;
  TrainConfig train = tiny_train(0, 0.0);

  for (double v1 : {0.0, 1.0}) {
    const BidProfile v(1, 1, {v1});
    const SampleReport report = evaluate_sample(v, tiny_net(1, 1, 0.0), train, eval);
    REQUIRE(report.records.size() == 3);
    REQUIRE_THAT(report.regret, Catch::Matchers::WithinAbs(0.25 * v1, 1e-12));
    REQUIRE(std::isnan(report.truthful_regret));
  }
}

TEST_CASE("failed trainings are retained as failed records") {
  const BidProfile v(2, 2, {1, 1, 1, 1});
  TrainConfig explosive = tiny_train(3, 0.0);
  explosive.eta = 1e18;
  EvalConfig eval;
  eval.master_seed = 2;
  const SampleReport report = evaluate_sample(v, tiny_net(2, 2), explosive, eval);
  REQUIRE(report.failed);
  REQUIRE(report.records.size() == 5);
  for (const auto& record : report.records) {
    REQUIRE(record.failed);
    REQUIRE(record.failure.find("diverged") != std::string::npos);
  }
  REQUIRE(std::isnan(report.regret));
}

TEST_CASE("sigma sweep aggregates by sigma with shared experiments") {
  const std::vector<std::pair<std::string, double>> sigmas{{"0", 0.0}, {"0.05", 0.05}};
  const std::vector<std::uint64_t> seeds{21, 22};
  EvalConfig eval;
  const SweepReport sweep = sweep_sigma(tiny_net(2, 2), tiny_train(2, 0.0), eval, sigmas,
                                        /*include_no_dp=*/true, /*samples=*/2, seeds, /*jobs=*/2);

  REQUIRE(sweep.rows.size() == 3);
  REQUIRE(sweep.rows[0].sigma_label == "no_dp");
  REQUIRE(sweep.rows[0].no_dp);
  REQUIRE(sweep.rows[1].sigma_label == "0");
  REQUIRE(sweep.rows[2].sigma_label == "0.05");
  for (const auto& row : sweep.rows) {
    REQUIRE(row.runs == 4);  // 2 seeds x 2 samples
    REQUIRE(row.failures == 0);
    REQUIRE(std::isfinite(row.min_revenue));
  }
  REQUIRE(sweep.runs.size() == 12);

  // every sigma row evaluates the same sampled profiles
  const auto& runs = sweep.runs;
  for (std::size_t a = 0; a < runs.size(); ++a) {
    for (std::size_t b = a + 1; b < runs.size(); ++b) {
      if (runs[a].job.seed == runs[b].job.seed &&
          runs[a].job.sample_id == runs[b].job.sample_id) {
        REQUIRE(runs[a].report.valuation == runs[b].report.valuation);
      }
    }
  }

  // single sigma, single run: the row equals that sample's aggregates
  const SweepReport solo = sweep_sigma(tiny_net(2, 2), tiny_train(2, 0.0), eval,
                                       {{"0.05", 0.05}}, false, 1, {21}, 1);
  REQUIRE(solo.rows.size() == 1);
  REQUIRE(solo.runs.size() == 1);
  REQUIRE_THAT(solo.rows[0].max_regret_misreporter,
               Catch::Matchers::WithinAbs(solo.runs[0].report.regret, 1e-15));
  REQUIRE_THAT(solo.rows[0].min_revenue,
               Catch::Matchers::WithinAbs(solo.runs[0].report.min_revenue, 1e-15));
  REQUIRE(solo.rows[0].outperforming_count == solo.runs[0].report.outperforming);

  // reproducible end to end
  const SweepReport replay = sweep_sigma(tiny_net(2, 2), tiny_train(2, 0.0), eval, sigmas,
                                         true, 2, seeds, 1);
  for (std::size_t r = 0; r < sweep.rows.size(); ++r) {
    REQUIRE(replay.rows[r].min_revenue == sweep.rows[r].min_revenue);
    REQUIRE(replay.rows[r].max_regret_misreporter == sweep.rows[r].max_regret_misreporter);
    REQUIRE(replay.rows[r].outperforming_count == sweep.rows[r].outperforming_count);
  }

  REQUIRE_THROWS_AS(sweep_sigma(tiny_net(2, 2), tiny_train(2, 0.0), eval, {}, false, 1, {21}, 1),
                    ConfigError);
}

TEST_CASE("the 5x3 binary setting enumerates eight misreport auctions") {
  EvalConfig eval;
  eval.master_seed = 8;
  const BidProfile v = sample_profile(eval.grid, 5, 3, 99);
  const SampleReport report = evaluate_sample(v, tiny_net(5, 3), tiny_train(0, 0.0), eval);
  REQUIRE(report.records.size() == 9);  // A_0 + 2^3 misreports
  for (const auto& record : report.records) REQUIRE(record.report.size() == 3);
}

TEST_CASE("misreport cap violations surface from evaluation") {
  EvalConfig eval;
  eval.misreport_cap = 4;
  eval.truthful_probe = -1;
  const BidProfile v(1, 3, {1, 1, 1});
  REQUIRE_THROWS_AS(evaluate_sample(v, tiny_net(1, 3), tiny_train(1, 0.0), eval),
                    MisreportCapError);
}
