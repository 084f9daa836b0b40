#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "oneshot/errors.hpp"
#include "oneshot/rng.hpp"

namespace oneshot {

// Gradient privatization knobs. sigma = 0 is allowed and makes the noise
// step an exact identity.
struct DpConfig {
  bool enabled = true;
  double sigma = 0.0;      // noise multiplier
  double clip_norm = 1.0;  // L2 bound C applied per bidder gradient

  void validate() const {
    if (!std::isfinite(sigma) || sigma < 0.0) {
      throw ConfigError("dp.sigma: must be finite and >= 0");
    }
    if (!std::isfinite(clip_norm) || clip_norm <= 0.0) {
      throw ConfigError("dp.clip_norm: must be finite and > 0");
    }
  }

  nlohmann::json to_json() const {
    return {{"enabled", enabled}, {"sigma", sigma}, {"clip_norm", clip_norm}};
  }
};

inline double l2_norm(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

// g / max(1, |g|_2 / C): norm bounded by C, direction preserved. The relative
// guard absorbs the rounding of a previous clip so the operation is an exact
// projection (bitwise idempotent).
inline std::vector<double> clip_gradient(std::span<const double> g, double clip_norm) {
  if (!std::isfinite(clip_norm) || clip_norm <= 0.0) {
    throw std::invalid_argument("clip_gradient: clip norm must be positive");
  }
  double sq = 0.0;
  for (double x : g) {
    if (!std::isfinite(x)) throw std::invalid_argument("clip_gradient: non-finite input");
    sq += x * x;
  }
  std::vector<double> out(g.begin(), g.end());
  const double norm = std::sqrt(sq);
  if (norm <= clip_norm * (1.0 + 1e-9)) return out;
  const double scale = norm / clip_norm;
  for (double& x : out) x /= scale;
  return out;
}

// Adds iid gaussian noise with per-coordinate stddev sigma*C. Deterministic
// per rng state; sigma = 0 returns the input untouched.
inline std::vector<double> noise_gradient(std::span<const double> g_clipped, double sigma,
                                          double clip_norm, Rng& rng) {
  if (!std::isfinite(sigma) || sigma < 0.0) {
    throw std::invalid_argument("noise_gradient: sigma must be >= 0");
  }
  if (l2_norm(g_clipped) > clip_norm * (1.0 + 1e-9) + 1e-9) {
    throw std::invalid_argument("noise_gradient: input norm exceeds the clip bound");
  }
  std::vector<double> out(g_clipped.begin(), g_clipped.end());
  if (sigma == 0.0) return out;
  const double stddev = sigma * clip_norm;
  for (double& x : out) x += rng.gaussian(stddev);
  return out;
}

}  // namespace oneshot
