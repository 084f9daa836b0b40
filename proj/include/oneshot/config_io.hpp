#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "oneshot/accountant.hpp"
#include "oneshot/csv.hpp"
#include "oneshot/errors.hpp"
#include "oneshot/evaluator.hpp"
#include "oneshot/net.hpp"
#include "oneshot/trainer.hpp"
#include "oneshot/valuations.hpp"

namespace oneshot {

// Everything a run needs, resolved from one config JSON plus CLI overrides.
struct RunConfig {
  NetworkConfig network;
  TrainConfig train;
  EvalConfig eval;
  std::optional<BidProfile> profile;  // explicit training profile; sampled from the grid otherwise
  int samples = 1;
  std::vector<std::uint64_t> seeds;  // evaluation/sweep master seeds
  std::vector<std::pair<std::string, double>> sweep_sigmas;
  bool sweep_include_no_dp = false;
  double target_delta = 1e-5;

  nlohmann::json to_json() const {
    nlohmann::json j{{"n", network.bidders},
                     {"m", network.items},
                     {"grid", eval.grid.levels()},
                     {"seed", train.seed},
                     {"network", network.to_json()},
                     {"train", train.to_json()},
                     {"dp", train.dp.to_json()},
                     {"eval",
                      {{"samples", samples},
                       {"seeds", seeds},
                       {"benchmark", eval.benchmark},
                       {"misreport_cap", eval.misreport_cap},
                       {"truthful_probe", eval.truthful_probe},
                       {"share_training_seed", eval.share_training_seed}}},
                     {"target_delta", target_delta}};
    if (profile) j["profile"] = profile->to_json();
    if (!sweep_sigmas.empty() || sweep_include_no_dp) {
      std::vector<double> sigmas;
      for (const auto& [label, sigma] : sweep_sigmas) sigmas.push_back(sigma);
      j["sweep"] = {{"sigmas", sigmas}, {"include_no_dp", sweep_include_no_dp}};
    }
    j["train"].erase("dp");
    j["train"].erase("seed");
    return j;
  }
};

namespace detail {

template <typename T>
T get_field(const nlohmann::json& j, const std::string& path, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config field \"" + (path.empty() ? key : path + "." + key) +
                      "\": " + e.what());
  }
}

template <typename T>
void maybe_set(const nlohmann::json& j, const std::string& path, const std::string& key,
               T& target) {
  if (j.contains(key)) target = get_field<T>(j, path, key);
}

}  // namespace detail

inline std::string format_sigma_label(double sigma) { return format_double(sigma); }

// Parses and validates a run config. require_dp_fields is dropped when the
// CLI disables DP, in which case dp.sigma may be absent.
inline RunConfig parse_run_config(const nlohmann::json& j, bool require_dp_fields = true) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  RunConfig cfg;

  if (!j.contains("n")) throw ConfigError("config: missing required field \"n\"");
  if (!j.contains("m")) throw ConfigError("config: missing required field \"m\"");
  cfg.network.bidders = detail::get_field<int>(j, "", "n");
  cfg.network.items = detail::get_field<int>(j, "", "m");

  if (j.contains("grid")) {
    try {
      cfg.eval.grid = ValuationGrid(detail::get_field<std::vector<double>>(j, "", "grid"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config field \"grid\": ") + e.what());
    }
  }

  if (j.contains("network")) {
    const auto& net = j.at("network");
    detail::maybe_set(net, "network", "hidden_layers", cfg.network.hidden_layers);
    detail::maybe_set(net, "network", "hidden_width", cfg.network.hidden_width);
    detail::maybe_set(net, "network", "init_scale", cfg.network.init_scale);
    if (net.contains("activation")) {
      cfg.network.activation =
          activation_from_name(detail::get_field<std::string>(net, "network", "activation"));
    }
  }
  cfg.network.validate();

  if (j.contains("train")) {
    const auto& tr = j.at("train");
    detail::maybe_set(tr, "train", "eta", cfg.train.eta);
    detail::maybe_set(tr, "train", "gamma", cfg.train.gamma);
    detail::maybe_set(tr, "train", "gamma_steps", cfg.train.gamma_steps);
    detail::maybe_set(tr, "train", "total_steps", cfg.train.total_steps);
    detail::maybe_set(tr, "train", "lagrange_update_every", cfg.train.lagrange_update_every);
    detail::maybe_set(tr, "train", "rho_init", cfg.train.rho_init);
    detail::maybe_set(tr, "train", "rho_increment", cfg.train.rho_increment);
    detail::maybe_set(tr, "train", "bid_upper", cfg.train.bid_upper);
    detail::maybe_set(tr, "train", "combine_raw_gradients", cfg.train.combine_raw_gradients);
  }

  if (j.contains("dp")) {
    const auto& dp = j.at("dp");
    detail::maybe_set(dp, "dp", "enabled", cfg.train.dp.enabled);
    if (require_dp_fields && cfg.train.dp.enabled && !dp.contains("sigma")) {
      throw ConfigError("config: missing required field \"dp.sigma\"");
    }
    detail::maybe_set(dp, "dp", "sigma", cfg.train.dp.sigma);
    detail::maybe_set(dp, "dp", "clip_norm", cfg.train.dp.clip_norm);
    detail::maybe_set(dp, "dp", "target_delta", cfg.target_delta);
  } else if (require_dp_fields) {
    throw ConfigError("config: missing required field \"dp.sigma\"");
  }

  detail::maybe_set(j, "", "seed", cfg.train.seed);
  cfg.train.validate();

  if (j.contains("profile")) {
    try {
      cfg.profile = BidProfile::from_json(j.at("profile"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config field \"profile\": ") + e.what());
    }
    if (cfg.profile->bidders() != cfg.network.bidders ||
        cfg.profile->items() != cfg.network.items) {
      throw ConfigError("config field \"profile\": dimensions do not match n and m");
    }
  }

  if (j.contains("eval")) {
    const auto& ev = j.at("eval");
    detail::maybe_set(ev, "eval", "samples", cfg.samples);
    detail::maybe_set(ev, "eval", "seeds", cfg.seeds);
    detail::maybe_set(ev, "eval", "benchmark", cfg.eval.benchmark);
    detail::maybe_set(ev, "eval", "misreport_cap", cfg.eval.misreport_cap);
    detail::maybe_set(ev, "eval", "truthful_probe", cfg.eval.truthful_probe);
    detail::maybe_set(ev, "eval", "share_training_seed", cfg.eval.share_training_seed);
  }
  if (cfg.samples < 1) throw ConfigError("config field \"eval.samples\": must be >= 1");
  if (cfg.seeds.empty()) cfg.seeds.push_back(cfg.train.seed);
  cfg.eval.validate(cfg.network.bidders);

  if (j.contains("sweep")) {
    const auto& sw = j.at("sweep");
    if (sw.contains("sigmas")) {
      for (double sigma : detail::get_field<std::vector<double>>(sw, "sweep", "sigmas")) {
        if (!(sigma >= 0.0)) throw ConfigError("config field \"sweep.sigmas\": must be >= 0");
        cfg.sweep_sigmas.emplace_back(format_sigma_label(sigma), sigma);
      }
    }
    detail::maybe_set(sw, "sweep", "include_no_dp", cfg.sweep_include_no_dp);
  }
  if (!(cfg.target_delta > 0.0 && cfg.target_delta < 1.0)) {
    throw ConfigError("config field \"dp.target_delta\": must lie in (0, 1)");
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path, bool require_dp_fields = true) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return parse_run_config(j, require_dp_fields);
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Run metadata. Timestamps live here and only here so every other artifact
// stays byte-stable across reruns.
struct RunManifest {
  nlohmann::json config;
  std::vector<std::uint64_t> seeds;
  std::string started_utc;
  std::string finished_utc;
  std::vector<std::string> outputs;
  nlohmann::json accountant;  // object (train) or array (evaluate/sweep)

  nlohmann::json to_json() const {
    return {{"config", config},
            {"seeds", seeds},
            {"started_utc", started_utc},
            {"finished_utc", finished_utc},
            {"outputs", outputs},
            {"accountant", accountant}};
  }
};

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace oneshot
