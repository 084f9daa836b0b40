#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace oneshot {

// Bookkeeping for the gaussian mechanisms released during a training run:
// one noised per-bidder gradient per step.
struct PrivacyLedger {
  std::uint64_t releases = 0;   // noised gradient releases so far
  double sigma = 0.0;           // noise multiplier the releases used
  int mechanisms_per_step = 0;  // bidder count n
  bool dp_enabled = false;

  void record_release() { ++releases; }
};

// Tail bound of a single gaussian mechanism: delta(sigma, eps) =
// (4/5) * exp(-(sigma*eps)^2 / 2), the standard form valid for eps < 1.
inline double single_step_delta(double sigma, double epsilon) {
  if (!(sigma > 0.0)) throw std::domain_error("single_step_delta: sigma must be > 0");
  if (!(epsilon > 0.0)) throw std::domain_error("single_step_delta: epsilon must be > 0");
  const double se = sigma * epsilon;
  return 0.8 * std::exp(-0.5 * se * se);
}

// Discrete Renyi orders scanned when converting composed RDP to (eps, delta).
inline const std::vector<double>& rdp_alpha_grid() {
  static const std::vector<double> grid = [] {
    std::vector<double> g{1.5};
    for (int a = 2; a <= 256; ++a) g.push_back(static_cast<double>(a));
    return g;
  }();
  return grid;
}

struct RdpResult {
  double epsilon = 0.0;
  double alpha_star = 0.0;  // minimizing Renyi order
};

// (eps, delta) for `total_steps` compositions of the gaussian mechanism with
// sensitivity C and noise sigma*C. Per-step Renyi bound is alpha/(2 sigma^2);
// the minimum over the alpha grid upper-bounds the true epsilon.
inline RdpResult compose_rdp(double sigma, std::uint64_t total_steps, double target_delta) {
  if (!(sigma > 0.0)) throw std::domain_error("compose_rdp: sigma must be > 0");
  if (total_steps < 1) throw std::domain_error("compose_rdp: total_steps must be >= 1");
  if (!(target_delta > 0.0 && target_delta < 1.0)) {
    throw std::domain_error("compose_rdp: target_delta must lie in (0, 1)");
  }
  const double log_inv_delta = std::log(1.0 / target_delta);
  RdpResult best{std::numeric_limits<double>::infinity(), 0.0};
  for (double alpha : rdp_alpha_grid()) {
    const double rdp = static_cast<double>(total_steps) * alpha / (2.0 * sigma * sigma);
    const double eps = rdp + log_inv_delta / (alpha - 1.0);
    if (eps < best.epsilon) best = {eps, alpha};
  }
  return best;
}

struct EpsilonDelta {
  double epsilon = 0.0;
  double delta = 0.0;
};

// Naive composition baseline: T mechanisms at (eps, delta) compose to
// (T*eps, T*delta).
inline EpsilonDelta basic_compose(double per_step_epsilon, double per_step_delta,
                                  std::uint64_t total_steps) {
  if (!(per_step_epsilon > 0.0) || !(per_step_delta > 0.0) || total_steps < 1) {
    throw std::domain_error("basic_compose: inputs must be positive");
  }
  return {static_cast<double>(total_steps) * per_step_epsilon,
          static_cast<double>(total_steps) * per_step_delta};
}

// Post-hoc accountant block for run metadata. epsilon/alpha_star are null
// when no finite guarantee exists (sigma = 0 or DP disabled).
inline nlohmann::json accountant_report(const PrivacyLedger& ledger, double target_delta) {
  nlohmann::json report{{"sigma", ledger.sigma},
                        {"steps", ledger.releases},
                        {"delta", target_delta},
                        {"epsilon", nullptr},
                        {"alpha_star", nullptr}};
  if (ledger.dp_enabled && ledger.sigma > 0.0 && ledger.releases >= 1) {
    const RdpResult rdp = compose_rdp(ledger.sigma, ledger.releases, target_delta);
    report["epsilon"] = rdp.epsilon;
    report["alpha_star"] = rdp.alpha_star;
  }
  return report;
}

}  // namespace oneshot
