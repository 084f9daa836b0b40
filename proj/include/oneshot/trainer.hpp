#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "oneshot/accountant.hpp"
#include "oneshot/dp.hpp"
#include "oneshot/errors.hpp"
#include "oneshot/net.hpp"
#include "oneshot/rng.hpp"
#include "oneshot/valuations.hpp"

namespace oneshot {

// Every hyperparameter of the one-shot training loop.
struct TrainConfig {
  double eta = 1e-3;              // auction learning rate
  double gamma = 0.1;             // misreport ascent learning rate
  int gamma_steps = 25;           // inner ascent steps per outer step
  int total_steps = 1000;         // outer steps T
  int lagrange_update_every = 10; // multiplier update period Q
  double rho_init = 1.0;          // penalty weight; grows by rho_increment per multiplier update
  double rho_increment = 0.0;
  double bid_upper = 1.0;         // upper edge of the valuation box; misreports are clamped to it
  bool combine_raw_gradients = false;  // parameter update consumes raw instead of privatized gradients
  DpConfig dp;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("train.eta: must be > 0");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("train.gamma: must be > 0");
    if (gamma_steps < 0) throw ConfigError("train.gamma_steps: must be >= 0");
    if (total_steps < 0) throw ConfigError("train.total_steps: must be >= 0");
    if (lagrange_update_every < 1) throw ConfigError("train.lagrange_update_every: must be >= 1");
    if (!std::isfinite(rho_init) || rho_init < 0.0) throw ConfigError("train.rho_init: must be >= 0");
    if (!std::isfinite(rho_increment) || rho_increment < 0.0) {
      throw ConfigError("train.rho_increment: must be >= 0");
    }
    if (!(bid_upper > 0.0) || !std::isfinite(bid_upper)) {
      throw ConfigError("train.bid_upper: must be > 0");
    }
    dp.validate();
  }

  nlohmann::json to_json() const {
    return {{"eta", eta},
            {"gamma", gamma},
            {"gamma_steps", gamma_steps},
            {"total_steps", total_steps},
            {"lagrange_update_every", lagrange_update_every},
            {"rho_init", rho_init},
            {"rho_increment", rho_increment},
            {"bid_upper", bid_upper},
            {"combine_raw_gradients", combine_raw_gradients},
            {"dp", dp.to_json()},
            {"seed", seed}};
  }
};

// Per-bidder multipliers and the current penalty weight.
struct LagrangeState {
  std::vector<double> lambda;
  double rho = 1.0;
};

struct StepRecord {
  int step = 0;
  std::vector<double> regrets;         // floored empirical regret per bidder at w^t
  double revenue = 0.0;                // revenue on the training profile at w^t
  std::vector<double> lambda;          // multipliers entering the step
  std::vector<double> grad_norm_pre;   // per-bidder regret gradient norm before clipping
  std::vector<double> grad_norm_post;  // after clipping (before noise)
};

using TrainingTrace = std::vector<StepRecord>;

// Training blow-up. Carries whatever trace prefix completed. CLI exit code 4.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& message, TrainingTrace prefix)
      : std::runtime_error(message), trace_prefix(std::move(prefix)) {}

  TrainingTrace trace_prefix;
};

struct TrainResult {
  AuctionParams params;
  TrainingTrace trace;
  PrivacyLedger ledger;
};

// Gradient ascent on bidder i's utility over its own report, others fixed.
// The initialization is uniform over the valuation box and each iterate is
// clamped back into the box. gamma_steps = 0 returns the initialization.
inline std::vector<double> optimize_misreport(const AuctionParams& params, const BidProfile& bids,
                                              int bidder, double gamma, int gamma_steps,
                                              double bid_upper, Rng& rng) {
  const int m = bids.items();
  std::vector<double> report(static_cast<std::size_t>(m));
  for (double& v : report) v = rng.uniform(0.0, bid_upper);

  const auto true_values = bids.row(bidder);
  for (int r = 0; r < gamma_steps; ++r) {
    const BidProfile deviated = replace_bidder(bids, bidder, report);
    const std::vector<double> grad = grad_misreport(params, true_values, deviated, bidder);
    for (int j = 0; j < m; ++j) {
      report[static_cast<std::size_t>(j)] =
          std::clamp(report[static_cast<std::size_t>(j)] + gamma * grad[static_cast<std::size_t>(j)],
                     0.0, bid_upper);
    }
  }
  return report;
}

namespace detail {

inline ScalarObjective regret_gap_objective(const BidProfile& bids, int bidder,
                                            std::span<const double> misreport) {
  const std::vector<double> true_values(bids.row(bidder).begin(), bids.row(bidder).end());
  ScalarObjective objective;
  objective.push_back(
      utility_term(1.0, true_values, replace_bidder(bids, bidder, misreport), bidder));
  objective.push_back(utility_term(-1.0, true_values, bids, bidder));
  return objective;
}

}  // namespace detail

// Parameter gradient of the utility gap u_i(b_i; (v'_i, b_-i)) - u_i(b_i; b).
inline std::vector<double> regret_gradient(const AuctionParams& params, const BidProfile& bids,
                                           int bidder, std::span<const double> misreport) {
  return grad_params(params, detail::regret_gap_objective(bids, bidder, misreport));
}

// Utility gap floored at zero; the constraint value the multipliers consume.
inline double empirical_regret(const AuctionParams& params, const BidProfile& bids, int bidder,
                               std::span<const double> misreport) {
  const double gap = objective_value(params, detail::regret_gap_objective(bids, bidder, misreport));
  return std::max(0.0, gap);
}

// Augmented-Lagrangian parameter gradient: negated revenue gradient plus
// sum_i (lambda_i + rho * regret_i) * bidder_grads_i.
inline std::vector<double> lagrangian_gradient(
    const AuctionParams& params, const BidProfile& bids, std::span<const double> lambda,
    double rho, const std::vector<std::vector<double>>& bidder_grads,
    std::span<const double> regrets) {
  const std::size_t n = static_cast<std::size_t>(bids.bidders());
  if (lambda.size() != n || bidder_grads.size() != n || regrets.size() != n) {
    throw std::invalid_argument("lagrangian_gradient: per-bidder inputs must have length n");
  }
  ScalarObjective revenue_objective;
  revenue_objective.push_back(revenue_term(1.0, bids));
  std::vector<double> grad = grad_params(params, revenue_objective);
  for (double& g : grad) g = -g;
  for (std::size_t i = 0; i < n; ++i) {
    if (bidder_grads[i].size() != grad.size()) {
      throw std::invalid_argument("lagrangian_gradient: bidder gradient has wrong dimension");
    }
    const double weight = lambda[i] + rho * regrets[i];
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += weight * bidder_grads[i][k];
  }
  return grad;
}

constexpr double kDivergenceNormLimit = 1e6;

// One-shot training: the same bid profile drives every outer step. Returns
// final parameters, the full per-step trace and the privacy ledger.
inline TrainResult train_one_shot(const BidProfile& bids, const NetworkConfig& net_config,
                                  const TrainConfig& train_config) {
  net_config.validate();
  train_config.validate();
  if (bids.bidders() != net_config.bidders || bids.items() != net_config.items) {
    throw std::invalid_argument("train_one_shot: profile dimensions do not match the network");
  }

  const int n = bids.bidders();
  AuctionParams params = AuctionParams::init(net_config, train_config.seed);
  LagrangeState lagrange{std::vector<double>(static_cast<std::size_t>(n), 0.0),
                         train_config.rho_init};
  PrivacyLedger ledger;
  ledger.sigma = train_config.dp.enabled ? train_config.dp.sigma : 0.0;
  ledger.mechanisms_per_step = n;
  ledger.dp_enabled = train_config.dp.enabled;

  TrainingTrace trace;
  trace.reserve(static_cast<std::size_t>(train_config.total_steps));

  std::vector<std::vector<double>> misreports(static_cast<std::size_t>(n));
  std::vector<std::vector<double>> update_grads(static_cast<std::size_t>(n));
  std::vector<double> regrets(static_cast<std::size_t>(n), 0.0);

  for (int t = 0; t < train_config.total_steps; ++t) {
    StepRecord record;
    record.step = t;
    record.lambda = lagrange.lambda;
    record.regrets.assign(static_cast<std::size_t>(n), 0.0);
    record.grad_norm_pre.assign(static_cast<std::size_t>(n), 0.0);
    record.grad_norm_post.assign(static_cast<std::size_t>(n), 0.0);

    for (int i = 0; i < n; ++i) {
      Rng stream(derive_seed(train_config.seed, StreamTag::kMisreportInit,
                             {static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i)}));
      misreports[static_cast<std::size_t>(i)] =
          optimize_misreport(params, bids, i, train_config.gamma, train_config.gamma_steps,
                             train_config.bid_upper, stream);
    }

    for (int i = 0; i < n; ++i) {
      const auto gap = objective_value_and_grad(
          params, detail::regret_gap_objective(bids, i, misreports[static_cast<std::size_t>(i)]));
      regrets[static_cast<std::size_t>(i)] = std::max(0.0, gap.value);
      record.regrets[static_cast<std::size_t>(i)] = regrets[static_cast<std::size_t>(i)];
      record.grad_norm_pre[static_cast<std::size_t>(i)] = l2_norm(gap.grad);

      std::vector<double> privatized;
      if (train_config.dp.enabled) {
        std::vector<double> clipped = clip_gradient(gap.grad, train_config.dp.clip_norm);
        record.grad_norm_post[static_cast<std::size_t>(i)] = l2_norm(clipped);
        Rng noise_stream(derive_seed(train_config.seed, StreamTag::kGradientNoise,
                                     {static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i)}));
        privatized = noise_gradient(clipped, train_config.dp.sigma, train_config.dp.clip_norm,
                                    noise_stream);
      } else {
        record.grad_norm_post[static_cast<std::size_t>(i)] =
            record.grad_norm_pre[static_cast<std::size_t>(i)];
        privatized = gap.grad;
      }
      ledger.record_release();
      update_grads[static_cast<std::size_t>(i)] =
          train_config.combine_raw_gradients ? gap.grad : std::move(privatized);
    }

    record.revenue = revenue(params, bids);
    trace.push_back(record);

    const std::vector<double> step_grad =
        lagrangian_gradient(params, bids, lagrange.lambda, lagrange.rho, update_grads, regrets);
    auto flat = params.mutable_flat();
    for (std::size_t k = 0; k < flat.size(); ++k) {
      flat[k] -= train_config.eta * step_grad[k];
    }

    const double norm = params.l2_norm();
    if (!std::isfinite(norm) || norm > kDivergenceNormLimit) {
      throw DivergenceError("training diverged at step " + std::to_string(t) +
                                " (parameter L2 norm " + std::to_string(norm) + ")",
                            std::move(trace));
    }

    if (t % train_config.lagrange_update_every == 0) {
      // multiplier update consumes the regret at the freshly updated
      // parameters, reusing this step's misreports
      for (int i = 0; i < n; ++i) {
        const double rgt =
            empirical_regret(params, bids, i, misreports[static_cast<std::size_t>(i)]);
        lagrange.lambda[static_cast<std::size_t>(i)] += lagrange.rho * rgt;
      }
      lagrange.rho += train_config.rho_increment;
    }
  }

  return TrainResult{std::move(params), std::move(trace), ledger};
}

}  // namespace oneshot
