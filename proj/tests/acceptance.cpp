// Acceptance suite: one binary, one printed pass/fail line per criterion.
// Criterion 9 is a slow full-scale reproduction marked soft; run it with
// --slow. Its outcome is printed but does not affect the exit code.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <thread>
#include <cmath>

#include "oneshot/oneshot.hpp"

#include "fd_support.hpp"

using namespace oneshot;
namespace fs = std::filesystem;

namespace {

struct CheckFailure {
  std::string message;
};

void require(bool condition, const std::string& message) {
  if (!condition) throw CheckFailure{message};
}

std::string fmt(double v) { return format_double(v); }

NetworkConfig make_net(int n, int m, int width, int layers,
                       Activation act = Activation::kTanh, double init_scale = 1.0) {
  NetworkConfig cfg;
  cfg.bidders = n;
  cfg.items = m;
  cfg.hidden_width = width;
  cfg.hidden_layers = layers;
  cfg.activation = act;
  cfg.init_scale = init_scale;
  return cfg;
}

BidProfile random_profile(int n, int m, Rng& rng) {
  std::vector<double> values(static_cast<std::size_t>(n) * m);
  for (double& v : values) v = rng.uniform();
  return BidProfile(n, m, std::move(values));
}

using testing::fd_grad_misreport;
using testing::fd_grad_params;
using testing::relative_l2_error;

// 1. Feasibility and IR invariants over random parameters and profiles, plus
//    freshly trained auctions.
std::string criterion_feasibility_ir() {
  Rng rng(1001);
  auto check_outcome = [&](const AuctionParams& params, const BidProfile& bids) {
    const Outcome outcome = run_auction(params, bids);
    for (int j = 0; j < bids.items(); ++j) {
      require(outcome.allocation.column_sum(j) <= 1.0 + 1e-6,
              "column sum above 1+1e-6: " + fmt(outcome.allocation.column_sum(j)));
    }
    for (int i = 0; i < bids.bidders(); ++i) {
      const double reported = additive_value(bids.row(i), outcome.allocation.row(i));
      require(outcome.payments[static_cast<std::size_t>(i)] <= reported + 1e-9,
              "payment above reported allocation value");
      require(utility(params, bids.row(i), bids, i) >= -1e-9,
              "negative truthful utility");
    }
  };

  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + rng.uniform_index(4);
    const int m = 1 + rng.uniform_index(3);
    const AuctionParams params =
        AuctionParams::init(make_net(n, m, 8, 1 + rng.uniform_index(2)), rng.next_u64());
    check_outcome(params, random_profile(n, m, rng));
    ++checked;
  }

  // trained auctions obey the same invariants
  for (double sigma : {0.0, 0.05}) {
    TrainConfig train;
    train.total_steps = 25;
    train.gamma_steps = 5;
    train.dp.sigma = sigma;
    train.seed = 77;
    const BidProfile bids(2, 2, {1, 0, 0, 1});
    const TrainResult result = train_one_shot(bids, make_net(2, 2, 16, 2), train);
    check_outcome(result.params, bids);
    for (int trial = 0; trial < 50; ++trial) {
      check_outcome(result.params, random_profile(2, 2, rng));
    }
  }
  return std::to_string(checked) + " random pairs + 2 trained auctions";
}

// 2. Gradient correctness against central finite differences.
std::string criterion_gradients() {
  Rng rng(2002);
  double worst_params = 0.0, worst_misreport = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + rng.uniform_index(3);
    const int m = 1 + rng.uniform_index(3);
    const int width = 4 + 4 * rng.uniform_index(4);  // up to 16
    const int layers = 1 + rng.uniform_index(2);
    const Activation act = trial % 4 == 0 ? Activation::kRelu : Activation::kTanh;
    const NetworkConfig cfg = make_net(n, m, width, layers, act);
    // relu points are redrawn when a hidden unit sits within the finite
    // difference step of its kink; there the FD oracle itself is invalid
    AuctionParams params = AuctionParams::init(cfg, rng.next_u64());
    BidProfile bids = random_profile(n, m, rng);
    while (act == Activation::kRelu && testing::min_hidden_preactivation(params, bids) <= 1e-2) {
      params = AuctionParams::init(cfg, rng.next_u64());
      bids = random_profile(n, m, rng);
    }
    const int bidder = rng.uniform_index(n);
    std::vector<double> values(static_cast<std::size_t>(m));
    for (double& v : values) v = rng.uniform();

    ScalarObjective objective;
    if (trial % 2 == 0) {
      objective.push_back(revenue_term(1.0, bids));
    } else {
      objective.push_back(utility_term(1.0, values, bids, bidder));
      objective.push_back(revenue_term(0.5, bids));
    }
    const double err_params =
        relative_l2_error(grad_params(params, objective), fd_grad_params(params, objective));
    require(err_params <= 1e-4, "grad_params FD error " + fmt(err_params));
    worst_params = std::max(worst_params, err_params);

    const double err_mis = relative_l2_error(grad_misreport(params, values, bids, bidder),
                                             fd_grad_misreport(params, values, bids, bidder));
    require(err_mis <= 1e-4, "grad_misreport FD error " + fmt(err_mis));
    worst_misreport = std::max(worst_misreport, err_mis);
  }
  return "100 configs; worst rel err params " + fmt(worst_params) + ", misreport " +
         fmt(worst_misreport);
}

// 3. DP pipeline: clip properties, noise statistics, zero-sigma identity.
std::string criterion_dp_pipeline() {
  Rng rng(3003);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 1 + rng.uniform_index(50);
    const double clip = 0.2 + rng.uniform(0.0, 2.0);
    std::vector<double> g(static_cast<std::size_t>(d));
    for (double& v : g) v = rng.uniform(-5.0, 5.0);
    const auto clipped = clip_gradient(g, clip);
    require(l2_norm(clipped) <= clip + 1e-12, "clip norm bound violated");
    require(clip_gradient(clipped, clip) == clipped, "clip not idempotent");
    if (l2_norm(g) <= clip) require(clipped == g, "clip changed a short vector");
  }

  const double sigma = 0.9, clip = 1.1;
  std::vector<double> zero(100000, 0.0);
  Rng stream(42);
  const auto noised = noise_gradient(zero, sigma, clip, stream);
  double sum = 0.0, sq = 0.0;
  for (double v : noised) {
    sum += v;
    sq += v * v;
  }
  const double mean = sum / static_cast<double>(noised.size());
  const double stddev = std::sqrt(sq / static_cast<double>(noised.size()) - mean * mean);
  require(std::abs(stddev - sigma * clip) <= 0.02 * sigma * clip,
          "noise stddev " + fmt(stddev) + " vs " + fmt(sigma * clip));

  std::vector<double> g{0.5, -0.25, 0.1};
  Rng quiet(7);
  require(noise_gradient(g, 0.0, 1.0, quiet) == g, "sigma = 0 is not the identity");
  return "1000 clip vectors; stddev " + fmt(stddev) + " vs " + fmt(sigma * clip);
}

// 4. Accountant: RDP vs basic composition, closed-form delta, ledger count.
std::string criterion_accountant() {
  require(std::abs(single_step_delta(1.0, 1.0) - 0.8 * std::exp(-0.5)) <= 1e-12,
          "single_step_delta(1,1) mismatch");
  require(std::abs(single_step_delta(3.0, 0.25) - 0.8 * std::exp(-0.5 * 0.5625)) <= 1e-12,
          "single_step_delta(3,0.25) mismatch");

  for (double sigma : {0.5, 1.0, 2.0}) {
    for (std::uint64_t steps : {std::uint64_t{50}, std::uint64_t{200}, std::uint64_t{1000}}) {
      const double delta = 1e-5;
      const double rdp = compose_rdp(sigma, steps, delta).epsilon;
      const double per_step = compose_rdp(sigma, 1, delta / static_cast<double>(steps)).epsilon;
      const double basic = basic_compose(per_step, delta / static_cast<double>(steps), steps).epsilon;
      require(rdp <= basic, "rdp " + fmt(rdp) + " above basic " + fmt(basic));
    }
  }

  TrainConfig train;
  train.total_steps = 7;
  train.gamma_steps = 3;
  train.dp.sigma = 0.05;
  train.seed = 5;
  const BidProfile bids(3, 2, {1, 0, 0, 1, 1, 1});
  const TrainResult result = train_one_shot(bids, make_net(3, 2, 8, 1), train);
  require(result.ledger.releases == 3 * 7, "ledger count != n*T");
  require(result.ledger.mechanisms_per_step == 3, "mechanisms_per_step != n");
  return "grid ok; ledger 21 = 3*7";
}

// 5. Evaluator regret against exhaustive enumeration on the frozen 1x1 net.
std::string criterion_regret_oracle() {
  const NetworkConfig net = make_net(1, 1, 4, 1, Activation::kTanh, 0.0);
  TrainConfig train;
  train.total_steps = 0;
  train.dp.sigma = 0.0;
  train.seed = 9;
  EvalConfig eval;
  eval.master_seed = 9;
  eval.share_training_seed = true;
  eval.truthful_probe = -1;

  std::string detail;
  for (double v1 : {0.0, 1.0}) {
    const BidProfile valuation(1, 1, {v1});
    const SampleReport report = evaluate_sample(valuation, net, train, eval);

    // independent oracle: enumerate reports against the same frozen net
    const AuctionParams frozen = AuctionParams::init(net, 1);
    double best = -1e18;
    for (double level : {0.0, 1.0}) {
      const BidProfile deviated(1, 1, {level});
      best = std::max(best, utility(frozen, valuation.row(0), deviated, 0));
    }
    const double oracle = best - utility(frozen, valuation.row(0), valuation, 0);
    require(std::abs(report.regret - oracle) <= 1e-12,
            "regret " + fmt(report.regret) + " vs oracle " + fmt(oracle));
    require(std::abs(oracle - 0.25 * v1) <= 1e-12, "oracle differs from hand value 0.25*v");
    detail += "v=" + fmt(v1) + ":rgt=" + fmt(report.regret) + " ";
  }
  return detail;
}

std::string cli_path() {
  if (const char* env = std::getenv("ONESHOT_CLI")) return env;
  for (const char* candidate :
       {"tools/oneshot-auction", "../tools/oneshot-auction", "build/tools/oneshot-auction",
        "./oneshot-auction"}) {
    if (fs::exists(candidate)) return candidate;
  }
  throw CheckFailure{"oneshot-auction binary not found; set ONESHOT_CLI"};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// 6. CLI determinism: byte-identical parameter files for fixed seeds.
std::string criterion_determinism() {
  const std::string cli = cli_path();
  const fs::path dir = fs::temp_directory_path() / "oneshot_acceptance" / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);

  auto run = [&](const std::string& args) {
    const std::string command = cli + " " + args + " > /dev/null 2>&1";
    const int status = std::system(command.c_str());
    require(WIFEXITED(status) && WEXITSTATUS(status) == 0, "cli failed: " + command);
  };

  for (double sigma : {0.0, 0.05}) {
    nlohmann::json config{{"n", 2},
                          {"m", 2},
                          {"grid", {0.0, 1.0}},
                          {"seed", 11},
                          {"network", {{"hidden_layers", 1}, {"hidden_width", 8}}},
                          {"train", {{"total_steps", 10}, {"gamma_steps", 3}}},
                          {"dp", {{"sigma", sigma}, {"clip_norm", 1.0}}}};
    const fs::path config_path = dir / ("config_" + fmt(sigma) + ".json");
    std::ofstream(config_path) << config.dump(2);
    const fs::path out_a = dir / ("a_" + fmt(sigma));
    const fs::path out_b = dir / ("b_" + fmt(sigma));
    run("train --config " + config_path.string() + " --out " + out_a.string());
    run("train --config " + config_path.string() + " --out " + out_b.string());
    require(slurp(out_a / "params.json") == slurp(out_b / "params.json"),
            "params.json differs for sigma " + fmt(sigma));
    require(slurp(out_a / "trace.csv") == slurp(out_b / "trace.csv"),
            "trace.csv differs for sigma " + fmt(sigma));
  }
  return "byte-identical params and traces at sigma 0 and 0.05";
}

// 7. Desk-scale sigma sweep: seed-averaged minimum revenue nonincreasing in
//    sigma, outperforming misreports at the largest sigma no more common than
//    without noise.
std::string criterion_sweep_trend() {
  // aggressive multiplier schedule: lambda updates every step with rho = 2,
  // so the privatized regret gradients (clip bound 2) carry enough weight for
  // the noise to genuinely degrade the learned auction as sigma grows
  const NetworkConfig net = make_net(2, 2, 32, 2);
  TrainConfig train;
  train.eta = 0.02;
  train.gamma = 0.1;
  train.gamma_steps = 25;
  train.total_steps = 300;
  train.lagrange_update_every = 1;
  train.rho_init = 2.0;
  train.dp.clip_norm = 2.0;
  EvalConfig eval;
  eval.benchmark = 2.10;

  const std::vector<std::pair<std::string, double>> sigmas{
      {"0", 0.0}, {"0.03", 0.03}, {"0.05", 0.05}, {"0.09", 0.09}};
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const int jobs = std::max(2u, std::thread::hardware_concurrency());
  const SweepReport sweep =
      sweep_sigma(net, train, eval, sigmas, /*include_no_dp=*/false, /*samples=*/1, seeds, jobs);

  std::string means;
  for (std::size_t k = 0; k < sweep.rows.size(); ++k) {
    require(sweep.rows[k].failures == 0, "training failures in the sweep");
    means += fmt(sweep.rows[k].min_revenue) + (k + 1 < sweep.rows.size() ? " " : "");
    if (k > 0) {
      require(sweep.rows[k].min_revenue <= sweep.rows[k - 1].min_revenue + 1e-12,
              "mean min revenue not nonincreasing: " + means);
    }
  }
  const long outperform_quiet = sweep.rows.front().outperforming_count;
  const long outperform_noisy = sweep.rows.back().outperforming_count;
  require(outperform_noisy <= outperform_quiet,
          "outperforming misreports grew with noise: " + std::to_string(outperform_quiet) +
              " -> " + std::to_string(outperform_noisy));
  return "mean min revenue " + means + "; outperforming " + std::to_string(outperform_quiet) +
         " -> " + std::to_string(outperform_noisy);
}

// 8. Beta arithmetic against the published benchmark pair.
std::string criterion_beta() {
  const double beta = beta_approximation(1.71, 2.10);
  require(std::abs(beta - 1.228) <= 0.001, "beta " + fmt(beta));
  return "beta(1.71, 2.10) = " + fmt(beta);
}

// 9. (slow, soft) full-scale 5x3 run at sigma 0.05.
std::string criterion_full_scale() {
  const NetworkConfig net = make_net(5, 3, 64, 2);
  TrainConfig train;
  train.eta = 0.02;
  train.gamma = 0.1;
  train.gamma_steps = 25;
  train.total_steps = 1000;
  train.lagrange_update_every = 10;
  train.dp.sigma = 0.05;
  train.dp.clip_norm = 1.0;
  EvalConfig eval;
  eval.benchmark = 2.10;

  const int jobs = std::max(2u, std::thread::hardware_concurrency());
  int in_band = 0;
  std::string detail;
  std::vector<double> revenues(5, 0.0);
  parallel_for(5, jobs, [&](std::size_t k) {
    const std::uint64_t seed = k + 1;
    const BidProfile valuation = sample_profile(eval.grid, 5, 3,
                                                derive_seed(seed, StreamTag::kProfileSample, {0}));
    EvalConfig seeded = eval;
    seeded.master_seed = seed;
    const SampleReport report = evaluate_sample(valuation, net, train, seeded,
                                                static_cast<int>(k), 1);
    revenues[k] = report.min_revenue;
  });
  for (double r : revenues) {
    if (r >= 1.71 && r <= 2.57) ++in_band;
    detail += fmt(r) + " ";
  }
  require(in_band >= 3, "min revenue in [1.71, 2.57] on only " + std::to_string(in_band) +
                            "/5 seeds: " + detail);
  return "min revenue per seed: " + detail + "(" + std::to_string(in_band) + "/5 in band)";
}

struct Criterion {
  int id;
  std::string name;
  std::function<std::string()> run;
  bool soft = false;
};

}  // namespace

int main(int argc, char** argv) {
  bool slow = false;
  for (int k = 1; k < argc; ++k) {
    if (std::string(argv[k]) == "--slow") slow = true;
  }

  std::vector<Criterion> criteria{
      {1, "feasibility and IR invariants", criterion_feasibility_ir},
      {2, "gradient correctness vs finite differences", criterion_gradients},
      {3, "dp clip and noise pipeline", criterion_dp_pipeline},
      {4, "privacy accountant", criterion_accountant},
      {5, "brute-force regret oracle", criterion_regret_oracle},
      {6, "seeded determinism through the cli", criterion_determinism},
      {7, "sigma sweep trend at desk scale", criterion_sweep_trend},
      {8, "beta reporting arithmetic", criterion_beta},
      {9, "full 5x3 reproduction (soft)", criterion_full_scale, true},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    if (criterion.soft && !slow) {
      std::cout << "SKIP criterion " << criterion.id << ": " << criterion.name
                << " (run with --slow)\n";
      continue;
    }
    try {
      const std::string detail = criterion.run();
      std::cout << "PASS criterion " << criterion.id << ": " << criterion.name << " - " << detail
                << "\n";
    } catch (const CheckFailure& failure) {
      std::cout << "FAIL criterion " << criterion.id << ": " << criterion.name << " - "
                << failure.message << (criterion.soft ? " [soft]" : "") << "\n";
      if (!criterion.soft) ++failures;
    } catch (const std::exception& e) {
      std::cout << "FAIL criterion " << criterion.id << ": " << criterion.name << " - "
                << e.what() << (criterion.soft ? " [soft]" : "") << "\n";
      if (!criterion.soft) ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}
