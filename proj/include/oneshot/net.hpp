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

#include "oneshot/errors.hpp"
#include "oneshot/rng.hpp"
#include "oneshot/valuations.hpp"

namespace oneshot {

enum class Activation { kTanh, kRelu };

inline std::string activation_name(Activation a) {
  return a == Activation::kTanh ? "tanh" : "relu";
}

inline Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw ConfigError("network.activation: expected \"tanh\" or \"relu\", got \"" + name + "\"");
}

// Shape of the two feedforward heads. The allocation head emits (n+1)·m
// logits (one dummy "unsold" slot per item, softmax-normalized per item); the
// payment head emits n logits squashed to payment fractions.
struct NetworkConfig {
  int bidders = 0;
  int items = 0;
  int hidden_layers = 2;
  int hidden_width = 64;
  Activation activation = Activation::kTanh;
  double init_scale = 1.0;  // multiplier on the fan-in scaled init width; 0 gives all-zero nets

  void validate() const {
    if (bidders < 1) throw ConfigError("n: bidder count must be >= 1");
    if (items < 1) throw ConfigError("m: item count must be >= 1");
    if (hidden_layers < 1) throw ConfigError("network.hidden_layers: must be >= 1");
    if (hidden_width < 1) throw ConfigError("network.hidden_width: must be >= 1");
    if (!std::isfinite(init_scale) || init_scale < 0.0) {
      throw ConfigError("network.init_scale: must be finite and >= 0");
    }
  }

  int input_size() const { return bidders * items; }
  int allocation_outputs() const { return (bidders + 1) * items; }
  int payment_outputs() const { return bidders; }

  nlohmann::json to_json() const {
    return {{"n", bidders},
            {"m", items},
            {"hidden_layers", hidden_layers},
            {"hidden_width", hidden_width},
            {"activation", activation_name(activation)},
            {"init_scale", init_scale}};
  }

  static NetworkConfig from_json(const nlohmann::json& j) {
    NetworkConfig cfg;
    cfg.bidders = j.at("n").get<int>();
    cfg.items = j.at("m").get<int>();
    if (j.contains("hidden_layers")) cfg.hidden_layers = j.at("hidden_layers").get<int>();
    if (j.contains("hidden_width")) cfg.hidden_width = j.at("hidden_width").get<int>();
    if (j.contains("activation")) cfg.activation = activation_from_name(j.at("activation").get<std::string>());
    if (j.contains("init_scale")) cfg.init_scale = j.at("init_scale").get<double>();
    cfg.validate();
    return cfg;
  }

  bool operator==(const NetworkConfig&) const = default;
};

enum class Head { kAllocation = 0, kPayment = 1 };

namespace detail {

// Layer sizes of one head: {input, hidden..., output}.
inline std::vector<int> head_sizes(const NetworkConfig& cfg, Head head) {
  std::vector<int> sizes;
  sizes.reserve(static_cast<std::size_t>(cfg.hidden_layers) + 2);
  sizes.push_back(cfg.input_size());
  for (int k = 0; k < cfg.hidden_layers; ++k) sizes.push_back(cfg.hidden_width);
  sizes.push_back(head == Head::kAllocation ? cfg.allocation_outputs() : cfg.payment_outputs());
  return sizes;
}

inline std::size_t head_param_count(const std::vector<int>& sizes) {
  std::size_t total = 0;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    total += static_cast<std::size_t>(sizes[k]) * sizes[k + 1] + sizes[k + 1];
  }
  return total;
}

}  // namespace detail

// All trainable weights of both heads, stored as one flat vector with
// structured span views per layer. The flat view and the structured view
// alias the same storage, so the round trip is exact by construction.
class AuctionParams {
 public:
  AuctionParams(NetworkConfig config, std::vector<double> flat, std::uint64_t seed = 0)
      : config_(std::move(config)), flat_(std::move(flat)), seed_(seed) {
    config_.validate();
    build_layout();
    if (flat_.size() != dimension_) {
      throw std::invalid_argument("AuctionParams: flat vector has length " +
                                  std::to_string(flat_.size()) + ", expected " +
                                  std::to_string(dimension_));
    }
    for (double v : flat_) {
      if (!std::isfinite(v)) throw std::invalid_argument("AuctionParams: non-finite entry");
    }
  }

  // Fan-in scaled uniform weights, zero biases, deterministic per seed.
  static AuctionParams init(const NetworkConfig& config, std::uint64_t seed) {
    config.validate();
    AuctionParams params(config, seed, PrivateTag{});
    Rng rng(derive_seed(seed, StreamTag::kParamInit));
    for (Head head : {Head::kAllocation, Head::kPayment}) {
      const auto& sizes = params.sizes(head);
      for (std::size_t layer = 0; layer + 1 < sizes.size(); ++layer) {
        const double bound = config.init_scale / std::sqrt(static_cast<double>(sizes[layer]));
        auto w = params.mutable_weights(head, static_cast<int>(layer));
        for (double& v : w) v = rng.uniform(-bound, bound);
        // biases stay zero
      }
    }
    return params;
  }

  const NetworkConfig& config() const { return config_; }
  std::size_t dimension() const { return dimension_; }
  std::uint64_t seed() const { return seed_; }

  std::span<const double> flat() const { return flat_; }
  std::span<double> mutable_flat() { return flat_; }

  int layer_count(Head head) const { return static_cast<int>(sizes(head).size()) - 1; }
  const std::vector<int>& sizes(Head head) const {
    return head == Head::kAllocation ? alloc_sizes_ : pay_sizes_;
  }

  // Weight matrix of one layer, row-major (out × in).
  std::span<const double> weights(Head head, int layer) const {
    const auto& sizes_ = sizes(head);
    return {flat_.data() + weight_offset(head, layer),
            static_cast<std::size_t>(sizes_[layer]) * sizes_[layer + 1]};
  }

  std::span<const double> biases(Head head, int layer) const {
    const auto& sizes_ = sizes(head);
    return {flat_.data() + bias_offset(head, layer), static_cast<std::size_t>(sizes_[layer + 1])};
  }

  std::span<double> mutable_weights(Head head, int layer) {
    auto view = weights(head, layer);
    return {flat_.data() + (view.data() - flat_.data()), view.size()};
  }

  std::size_t weight_offset(Head head, int layer) const {
    return layer_offsets_[head == Head::kAllocation ? 0 : 1][static_cast<std::size_t>(layer)];
  }

  std::size_t bias_offset(Head head, int layer) const {
    const auto& sizes_ = sizes(head);
    return weight_offset(head, layer) + static_cast<std::size_t>(sizes_[layer]) * sizes_[layer + 1];
  }

  double l2_norm() const {
    double sq = 0.0;
    for (double v : flat_) sq += v * v;
    return std::sqrt(sq);
  }

  nlohmann::json to_json() const {
    return {{"config", config_.to_json()},
            {"flat_params", flat_},
            {"seed", seed_},
            {"format_version", 1}};
  }

  static AuctionParams from_json(const nlohmann::json& j) {
    if (!j.contains("format_version") || j.at("format_version").get<int>() != 1) {
      throw ConfigError("params: unsupported or missing format_version");
    }
    NetworkConfig cfg = NetworkConfig::from_json(j.at("config"));
    std::vector<double> flat = j.at("flat_params").get<std::vector<double>>();
    const std::uint64_t seed = j.contains("seed") ? j.at("seed").get<std::uint64_t>() : 0;
    return AuctionParams(cfg, std::move(flat), seed);
  }

 private:
  struct PrivateTag {};

  AuctionParams(const NetworkConfig& config, std::uint64_t seed, PrivateTag)
      : config_(config), seed_(seed) {
    build_layout();
    flat_.assign(dimension_, 0.0);
  }

  void build_layout() {
    alloc_sizes_ = detail::head_sizes(config_, Head::kAllocation);
    pay_sizes_ = detail::head_sizes(config_, Head::kPayment);
    std::size_t offset = 0;
    layer_offsets_[0].clear();
    layer_offsets_[1].clear();
    for (std::size_t h = 0; h < 2; ++h) {
      const auto& sizes_ = h == 0 ? alloc_sizes_ : pay_sizes_;
      for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) {
        layer_offsets_[h].push_back(offset);
        offset += static_cast<std::size_t>(sizes_[k]) * sizes_[k + 1] + sizes_[k + 1];
      }
    }
    dimension_ = offset;
  }

  NetworkConfig config_;
  std::vector<double> flat_;
  std::uint64_t seed_ = 0;
  std::vector<int> alloc_sizes_;
  std::vector<int> pay_sizes_;
  std::vector<std::size_t> layer_offsets_[2];
  std::size_t dimension_ = 0;
};

// n×m allocation probabilities; per item the column sum is <= 1 because one
// softmax slot per item is reserved for "unsold".
class AllocationMatrix {
 public:
  AllocationMatrix(int bidders, int items)
      : bidders_(bidders), items_(items),
        z_(static_cast<std::size_t>(bidders) * items, 0.0) {}

  int bidders() const { return bidders_; }
  int items() const { return items_; }
  double operator()(int i, int j) const { return z_[static_cast<std::size_t>(i) * items_ + j]; }
  double& at(int i, int j) { return z_[static_cast<std::size_t>(i) * items_ + j]; }
  std::span<const double> row(int i) const {
    return {z_.data() + static_cast<std::size_t>(i) * items_, static_cast<std::size_t>(items_)};
  }

  double column_sum(int j) const {
    double s = 0.0;
    for (int i = 0; i < bidders_; ++i) s += (*this)(i, j);
    return s;
  }

 private:
  int bidders_;
  int items_;
  std::vector<double> z_;
};

struct Outcome {
  AllocationMatrix allocation;
  std::vector<double> payments;
};

namespace detail {

struct HeadCache {
  // inputs[l] is the vector entering layer l (inputs[0] is the flattened
  // bids); pre[l] is W_l inputs[l] + b_l. The head output is pre.back().
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;
};

inline void head_forward(const AuctionParams& params, Head head,
                         std::span<const double> x, HeadCache& cache) {
  const auto& sizes = params.sizes(head);
  const int layers = static_cast<int>(sizes.size()) - 1;
  cache.inputs.resize(static_cast<std::size_t>(layers));
  cache.pre.resize(static_cast<std::size_t>(layers));
  const Activation act = params.config().activation;

  std::vector<double> current(x.begin(), x.end());
  for (int l = 0; l < layers; ++l) {
    cache.inputs[static_cast<std::size_t>(l)] = current;
    const int in = sizes[static_cast<std::size_t>(l)];
    const int out = sizes[static_cast<std::size_t>(l) + 1];
    const auto w = params.weights(head, l);
    const auto b = params.biases(head, l);
    std::vector<double> next(static_cast<std::size_t>(out));
    for (int r = 0; r < out; ++r) {
      double acc = b[static_cast<std::size_t>(r)];
      const double* wrow = w.data() + static_cast<std::size_t>(r) * in;
      for (int c = 0; c < in; ++c) acc += wrow[c] * current[static_cast<std::size_t>(c)];
      next[static_cast<std::size_t>(r)] = acc;
    }
    cache.pre[static_cast<std::size_t>(l)] = next;
    if (l + 1 < layers) {
      if (act == Activation::kTanh) {
        for (double& v : next) v = std::tanh(v);
      } else {
        for (double& v : next) v = v > 0.0 ? v : 0.0;
      }
    }
    current = std::move(next);
  }
}

// Backpropagates d_out (adjoint of the head output) through the head,
// accumulating parameter gradients into param_grad and returning the adjoint
// of the head input.
inline std::vector<double> head_backward(const AuctionParams& params, Head head,
                                         const HeadCache& cache,
                                         std::span<const double> d_out,
                                         std::span<double> param_grad) {
  const auto& sizes = params.sizes(head);
  const int layers = static_cast<int>(sizes.size()) - 1;
  const Activation act = params.config().activation;

  std::vector<double> delta(d_out.begin(), d_out.end());
  for (int l = layers - 1; l >= 0; --l) {
    const int in = sizes[static_cast<std::size_t>(l)];
    const int out = sizes[static_cast<std::size_t>(l) + 1];
    const auto& input = cache.inputs[static_cast<std::size_t>(l)];
    const auto w = params.weights(head, l);
    double* grad_w = param_grad.data() + params.weight_offset(head, l);
    double* grad_b = param_grad.data() + params.bias_offset(head, l);

    for (int r = 0; r < out; ++r) {
      const double d = delta[static_cast<std::size_t>(r)];
      grad_b[r] += d;
      double* grow = grad_w + static_cast<std::size_t>(r) * in;
      for (int c = 0; c < in; ++c) grow[c] += d * input[static_cast<std::size_t>(c)];
    }

    std::vector<double> prev(static_cast<std::size_t>(in), 0.0);
    for (int r = 0; r < out; ++r) {
      const double d = delta[static_cast<std::size_t>(r)];
      const double* wrow = w.data() + static_cast<std::size_t>(r) * in;
      for (int c = 0; c < in; ++c) prev[static_cast<std::size_t>(c)] += d * wrow[c];
    }
    if (l > 0) {
      // derivative of the activation applied to pre[l-1]
      const auto& pre_prev = cache.pre[static_cast<std::size_t>(l) - 1];
      if (act == Activation::kTanh) {
        for (int c = 0; c < in; ++c) {
          const double t = std::tanh(pre_prev[static_cast<std::size_t>(c)]);
          prev[static_cast<std::size_t>(c)] *= 1.0 - t * t;
        }
      } else {
        for (int c = 0; c < in; ++c) {
          if (pre_prev[static_cast<std::size_t>(c)] <= 0.0) prev[static_cast<std::size_t>(c)] = 0.0;
        }
      }
    }
    delta = std::move(prev);
  }
  return delta;  // adjoint of the head input
}

// Full forward state for one bid profile: softmax allocations (including the
// dummy slot row) and payment fractions.
struct ForwardCache {
  HeadCache alloc_head;
  HeadCache pay_head;
  std::vector<double> z;      // (n+1)×m, slot-major: z[s*m + j]
  std::vector<double> alpha;  // n payment fractions in (0, 1)
};

inline void check_finite(std::span<const double> values, const AuctionParams& params,
                         const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string(what) +
                               " produced a non-finite value (parameter L2 norm " +
                               std::to_string(params.l2_norm()) + ")");
    }
  }
}

inline ForwardCache forward(const AuctionParams& params, const BidProfile& bids) {
  const NetworkConfig& cfg = params.config();
  if (bids.bidders() != cfg.bidders || bids.items() != cfg.items) {
    throw std::invalid_argument("forward: profile dimensions do not match the network config");
  }
  ForwardCache cache;
  const std::span<const double> x(bids.values());
  head_forward(params, Head::kAllocation, x, cache.alloc_head);
  head_forward(params, Head::kPayment, x, cache.pay_head);

  const auto& logits = cache.alloc_head.pre.back();
  check_finite(logits, params, "allocation head");
  const int n = cfg.bidders;
  const int m = cfg.items;
  cache.z.assign(static_cast<std::size_t>(n + 1) * m, 0.0);
  for (int j = 0; j < m; ++j) {
    double max_logit = logits[static_cast<std::size_t>(j)];
    for (int s = 1; s <= n; ++s) {
      max_logit = std::max(max_logit, logits[static_cast<std::size_t>(s) * m + j]);
    }
    double denom = 0.0;
    for (int s = 0; s <= n; ++s) {
      denom += std::exp(logits[static_cast<std::size_t>(s) * m + j] - max_logit);
    }
    for (int s = 0; s <= n; ++s) {
      cache.z[static_cast<std::size_t>(s) * m + j] =
          std::exp(logits[static_cast<std::size_t>(s) * m + j] - max_logit) / denom;
    }
  }

  const auto& pay_logits = cache.pay_head.pre.back();
  check_finite(pay_logits, params, "payment head");
  cache.alpha.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    cache.alpha[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(-pay_logits[static_cast<std::size_t>(i)]));
  }
  return cache;
}

// Reported allocation value of bidder i: sum_j z_ij * b_ij.
inline double reported_value(const ForwardCache& cache, const BidProfile& bids, int i) {
  const int m = bids.items();
  double s = 0.0;
  for (int j = 0; j < m; ++j) s += cache.z[static_cast<std::size_t>(i) * m + j] * bids(i, j);
  return s;
}

struct BackwardResult {
  std::vector<double> param_grad;  // length d
  std::vector<double> input_grad;  // n·m, combined over both heads
};

// Seeds: d_alloc is the adjoint on the visible n×m allocation block (dummy
// row excluded), d_alpha the adjoint on payment fractions.
inline BackwardResult backward(const AuctionParams& params, const ForwardCache& cache,
                               std::span<const double> d_alloc,
                               std::span<const double> d_alpha) {
  const NetworkConfig& cfg = params.config();
  const int n = cfg.bidders;
  const int m = cfg.items;

  BackwardResult result;
  result.param_grad.assign(params.dimension(), 0.0);

  // softmax adjoint per item over the n+1 slots; the dummy slot carries no
  // direct objective dependence.
  std::vector<double> d_logits(static_cast<std::size_t>(n + 1) * m, 0.0);
  for (int j = 0; j < m; ++j) {
    double weighted = 0.0;
    for (int s = 0; s < n; ++s) {
      weighted += d_alloc[static_cast<std::size_t>(s) * m + j] *
                  cache.z[static_cast<std::size_t>(s) * m + j];
    }
    for (int s = 0; s <= n; ++s) {
      const double zs = cache.z[static_cast<std::size_t>(s) * m + j];
      const double ds = s < n ? d_alloc[static_cast<std::size_t>(s) * m + j] : 0.0;
      d_logits[static_cast<std::size_t>(s) * m + j] = zs * (ds - weighted);
    }
  }
  std::vector<double> input_grad =
      head_backward(params, Head::kAllocation, cache.alloc_head, d_logits, result.param_grad);

  std::vector<double> d_pay_logits(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    const double a = cache.alpha[static_cast<std::size_t>(i)];
    d_pay_logits[static_cast<std::size_t>(i)] = d_alpha[static_cast<std::size_t>(i)] * a * (1.0 - a);
  }
  std::vector<double> pay_input =
      head_backward(params, Head::kPayment, cache.pay_head, d_pay_logits, result.param_grad);
  for (std::size_t k = 0; k < input_grad.size(); ++k) input_grad[k] += pay_input[k];

  result.input_grad = std::move(input_grad);
  return result;
}

}  // namespace detail

// Feasible allocation for one report profile; column sums <= 1 by softmax
// construction.
inline AllocationMatrix allocate(const AuctionParams& params, const BidProfile& bids) {
  const auto cache = detail::forward(params, bids);
  const int n = bids.bidders();
  const int m = bids.items();
  AllocationMatrix alloc(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) alloc.at(i, j) = cache.z[static_cast<std::size_t>(i) * m + j];
  }
  return alloc;
}

// Payments for a profile given its allocation: a learned fraction of each
// bidder's reported allocation value, hence never above it.
inline std::vector<double> pay(const AuctionParams& params, const BidProfile& bids,
                               const AllocationMatrix& allocation) {
  const auto cache = detail::forward(params, bids);
  const int n = bids.bidders();
  std::vector<double> payments(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    payments[static_cast<std::size_t>(i)] =
        cache.alpha[static_cast<std::size_t>(i)] * additive_value(bids.row(i), allocation.row(i));
  }
  return payments;
}

inline Outcome run_auction(const AuctionParams& params, const BidProfile& bids) {
  const auto cache = detail::forward(params, bids);
  const int n = bids.bidders();
  const int m = bids.items();
  Outcome outcome{AllocationMatrix(n, m), std::vector<double>(static_cast<std::size_t>(n))};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      outcome.allocation.at(i, j) = cache.z[static_cast<std::size_t>(i) * m + j];
    }
    outcome.payments[static_cast<std::size_t>(i)] =
        cache.alpha[static_cast<std::size_t>(i)] * detail::reported_value(cache, bids, i);
  }
  return outcome;
}

// Utility of bidder i with true per-item values `true_values` when the
// profile `bids` is reported.
inline double utility(const AuctionParams& params, std::span<const double> true_values,
                      const BidProfile& bids, int bidder) {
  if (static_cast<int>(true_values.size()) != bids.items()) {
    throw std::invalid_argument("utility: valuation row length must equal item count");
  }
  if (bidder < 0 || bidder >= bids.bidders()) {
    throw std::out_of_range("utility: bidder index out of range");
  }
  const Outcome outcome = run_auction(params, bids);
  return additive_value(true_values, outcome.allocation.row(bidder)) -
         outcome.payments[static_cast<std::size_t>(bidder)];
}

inline double revenue(const AuctionParams& params, const BidProfile& bids) {
  const Outcome outcome = run_auction(params, bids);
  double total = 0.0;
  for (double p : outcome.payments) total += p;
  return total;
}

// Scalar objectives are weighted sums of the primitive auction quantities,
// each term evaluated on its own report profile. Gradient arithmetic over
// terms is exactly linear, which the tests rely on.
enum class ScalarKind { kRevenue, kPayment, kUtility };

struct ObjectiveTerm {
  ScalarKind kind;
  double weight = 1.0;
  BidProfile bids;
  int bidder = 0;                 // payment/utility terms
  std::vector<double> value_row;  // utility terms: the true per-item values
};

using ScalarObjective = std::vector<ObjectiveTerm>;

inline ObjectiveTerm revenue_term(double weight, BidProfile bids) {
  return ObjectiveTerm{ScalarKind::kRevenue, weight, std::move(bids), 0, {}};
}

inline ObjectiveTerm payment_term(double weight, BidProfile bids, int bidder) {
  return ObjectiveTerm{ScalarKind::kPayment, weight, std::move(bids), bidder, {}};
}

inline ObjectiveTerm utility_term(double weight, std::vector<double> true_values,
                                  BidProfile bids, int bidder) {
  return ObjectiveTerm{ScalarKind::kUtility, weight, std::move(bids), bidder,
                       std::move(true_values)};
}

namespace detail {

struct TermSeeds {
  std::vector<double> d_alloc;  // n×m
  std::vector<double> d_alpha;  // n
  double value = 0.0;
};

inline TermSeeds term_seeds(const ObjectiveTerm& term, const ForwardCache& cache) {
  const BidProfile& b = term.bids;
  const int n = b.bidders();
  const int m = b.items();
  TermSeeds seeds;
  seeds.d_alloc.assign(static_cast<std::size_t>(n) * m, 0.0);
  seeds.d_alpha.assign(static_cast<std::size_t>(n), 0.0);

  auto add_payment = [&](int i, double w) {
    const double reported = reported_value(cache, b, i);
    const double a = cache.alpha[static_cast<std::size_t>(i)];
    seeds.d_alpha[static_cast<std::size_t>(i)] += w * reported;
    for (int j = 0; j < m; ++j) {
      seeds.d_alloc[static_cast<std::size_t>(i) * m + j] += w * a * b(i, j);
    }
    return a * reported;
  };

  switch (term.kind) {
    case ScalarKind::kRevenue: {
      double total = 0.0;
      for (int i = 0; i < n; ++i) total += add_payment(i, term.weight);
      seeds.value = term.weight * total;
      break;
    }
    case ScalarKind::kPayment: {
      seeds.value = term.weight * add_payment(term.bidder, term.weight);
      break;
    }
    case ScalarKind::kUtility: {
      if (static_cast<int>(term.value_row.size()) != m) {
        throw std::invalid_argument("objective: utility term value_row length must equal m");
      }
      const int i = term.bidder;
      const double p = add_payment(i, -term.weight);
      double value = 0.0;
      for (int j = 0; j < m; ++j) {
        seeds.d_alloc[static_cast<std::size_t>(i) * m + j] +=
            term.weight * term.value_row[static_cast<std::size_t>(j)];
        value += term.value_row[static_cast<std::size_t>(j)] *
                 cache.z[static_cast<std::size_t>(i) * m + j];
      }
      seeds.value = term.weight * (value - p);
      break;
    }
  }
  return seeds;
}

}  // namespace detail

inline double objective_value(const AuctionParams& params, const ScalarObjective& objective) {
  double total = 0.0;
  for (const auto& term : objective) {
    const auto cache = detail::forward(params, term.bids);
    total += detail::term_seeds(term, cache).value;
  }
  return total;
}

struct ValueAndGrad {
  double value = 0.0;
  std::vector<double> grad;
};

// Exact gradient of the objective w.r.t. the flat parameter vector, with the
// objective value from the same forward passes.
inline ValueAndGrad objective_value_and_grad(const AuctionParams& params,
                                             const ScalarObjective& objective) {
  ValueAndGrad out;
  out.grad.assign(params.dimension(), 0.0);
  for (const auto& term : objective) {
    const auto cache = detail::forward(params, term.bids);
    const auto seeds = detail::term_seeds(term, cache);
    out.value += seeds.value;
    const auto grads = detail::backward(params, cache, seeds.d_alloc, seeds.d_alpha);
    for (std::size_t k = 0; k < out.grad.size(); ++k) out.grad[k] += grads.param_grad[k];
  }
  for (double g : out.grad) {
    if (!std::isfinite(g)) {
      throw std::runtime_error("grad_params: non-finite gradient (parameter L2 norm " +
                               std::to_string(params.l2_norm()) + ")");
    }
  }
  return out;
}

inline std::vector<double> grad_params(const AuctionParams& params,
                                       const ScalarObjective& objective) {
  return objective_value_and_grad(params, objective).grad;
}

// Gradient of bidder i's utility w.r.t. its own reported row of `bids`,
// holding the parameters and the other rows fixed. Includes both the path
// through the networks and the direct dependence of the payment on the
// report.
inline std::vector<double> grad_misreport(const AuctionParams& params,
                                          std::span<const double> true_values,
                                          const BidProfile& bids, int bidder) {
  if (static_cast<int>(true_values.size()) != bids.items()) {
    throw std::invalid_argument("grad_misreport: valuation row length must equal item count");
  }
  if (bidder < 0 || bidder >= bids.bidders()) {
    throw std::out_of_range("grad_misreport: bidder index out of range");
  }
  const int m = bids.items();
  const auto cache = detail::forward(params, bids);
  ObjectiveTerm term = utility_term(1.0, {true_values.begin(), true_values.end()}, bids, bidder);
  const auto seeds = detail::term_seeds(term, cache);
  const auto grads = detail::backward(params, cache, seeds.d_alloc, seeds.d_alpha);

  std::vector<double> grad(static_cast<std::size_t>(m));
  const double a = cache.alpha[static_cast<std::size_t>(bidder)];
  for (int j = 0; j < m; ++j) {
    // network path + direct payment dependence on the reported row
    grad[static_cast<std::size_t>(j)] =
        grads.input_grad[static_cast<std::size_t>(bidder) * m + j] -
        a * cache.z[static_cast<std::size_t>(bidder) * m + j];
  }
  for (double g : grad) {
    if (!std::isfinite(g)) {
      throw std::runtime_error("grad_misreport: non-finite gradient (parameter L2 norm " +
                               std::to_string(params.l2_norm()) + ")");
    }
  }
  return grad;
}

}  // namespace oneshot
