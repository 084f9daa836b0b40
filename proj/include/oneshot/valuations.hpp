#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <json.hpp>

#include "oneshot/errors.hpp"
#include "oneshot/rng.hpp"

namespace oneshot {

// n×m matrix of nonnegative reals, one row per bidder. Serves both as a
// valuation profile and as a report profile; the one-shot learner treats the
// two interchangeably. Immutable after construction.
class BidProfile {
 public:
  BidProfile(int bidders, int items)
      : bidders_(bidders), items_(items), values_(check_dims(bidders, items), 0.0) {}

  BidProfile(int bidders, int items, std::vector<double> values)
      : bidders_(bidders), items_(items), values_(std::move(values)) {
    if (values_.size() != check_dims(bidders, items)) {
      throw std::invalid_argument("BidProfile: value count does not match n*m");
    }
    for (double v : values_) {
      if (!std::isfinite(v) || v < 0.0) {
        throw std::invalid_argument("BidProfile: entries must be finite and nonnegative");
      }
    }
  }

  int bidders() const { return bidders_; }
  int items() const { return items_; }

  double operator()(int i, int j) const {
    return values_[static_cast<std::size_t>(i) * items_ + j];
  }

  std::span<const double> row(int i) const {
    return {values_.data() + static_cast<std::size_t>(i) * items_,
            static_cast<std::size_t>(items_)};
  }

  const std::vector<double>& values() const { return values_; }

  bool operator==(const BidProfile&) const = default;

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < bidders_; ++i) {
      nlohmann::json r = nlohmann::json::array();
      for (int j = 0; j < items_; ++j) r.push_back((*this)(i, j));
      rows.push_back(std::move(r));
    }
    return {{"n", bidders_}, {"m", items_}, {"values", std::move(rows)}};
  }

  static BidProfile from_json(const nlohmann::json& j) {
    if (!j.contains("n") || !j.contains("m") || !j.contains("values")) {
      throw ConfigError("profile: expected fields \"n\", \"m\", \"values\"");
    }
    const int n = j.at("n").get<int>();
    const int m = j.at("m").get<int>();
    const auto& rows = j.at("values");
    if (!rows.is_array() || static_cast<int>(rows.size()) != n) {
      throw ConfigError("profile.values: expected " + std::to_string(n) + " rows");
    }
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(n) * m);
    for (const auto& row : rows) {
      if (!row.is_array() || static_cast<int>(row.size()) != m) {
        throw ConfigError("profile.values: every row must have m entries");
      }
      for (const auto& v : row) values.push_back(v.get<double>());
    }
    return BidProfile(n, m, std::move(values));
  }

 private:
  static std::size_t check_dims(int bidders, int items) {
    if (bidders < 1 || items < 1) {
      throw std::invalid_argument("BidProfile: need at least one bidder and one item");
    }
    return static_cast<std::size_t>(bidders) * items;
  }

  int bidders_;
  int items_;
  std::vector<double> values_;
};

// Discrete per-item valuation levels used for profile sampling and misreport
// enumeration. Levels are strictly increasing and live in the unit interval.
class ValuationGrid {
 public:
  ValuationGrid() : levels_{0.0, 1.0} {}

  explicit ValuationGrid(std::vector<double> levels) : levels_(std::move(levels)) {
    if (levels_.empty()) throw std::invalid_argument("ValuationGrid: no levels");
    for (std::size_t k = 0; k < levels_.size(); ++k) {
      if (!std::isfinite(levels_[k]) || levels_[k] < 0.0 || levels_[k] > 1.0) {
        throw std::invalid_argument("ValuationGrid: levels must lie in [0, 1]");
      }
      if (k > 0 && levels_[k] <= levels_[k - 1]) {
        throw std::invalid_argument("ValuationGrid: levels must be strictly increasing");
      }
    }
  }

  const std::vector<double>& levels() const { return levels_; }
  std::size_t size() const { return levels_.size(); }

 private:
  std::vector<double> levels_;
};

// Dot product of a bid row with an allocation-probability row.
inline double additive_value(std::span<const double> bid_row,
                             std::span<const double> allocation_row) {
  if (bid_row.size() != allocation_row.size()) {
    throw std::invalid_argument("additive_value: dimension mismatch");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < bid_row.size(); ++j) total += bid_row[j] * allocation_row[j];
  return total;
}

constexpr std::size_t kDefaultMisreportCap = 4096;

// All |grid|^m report vectors in lexicographic order over grid indices
// (first coordinate most significant). The ordering is fixed so per-misreport
// CSV rows stay stable across runs.
inline std::vector<std::vector<double>> enumerate_misreports(
    const ValuationGrid& grid, int items, std::size_t cap = kDefaultMisreportCap) {
  if (items < 1) throw std::invalid_argument("enumerate_misreports: items must be >= 1");
  std::size_t count = 1;
  for (int j = 0; j < items; ++j) {
    count *= grid.size();
    if (count > cap) throw MisreportCapError(count, cap);
  }
  std::vector<std::vector<double>> out;
  out.reserve(count);
  std::vector<std::size_t> idx(static_cast<std::size_t>(items), 0);
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> report(static_cast<std::size_t>(items));
    for (int j = 0; j < items; ++j) report[j] = grid.levels()[idx[j]];
    out.push_back(std::move(report));
    for (int j = items - 1; j >= 0; --j) {
      if (++idx[j] < grid.size()) break;
      idx[j] = 0;
    }
  }
  return out;
}

// New profile equal to `profile` except bidder i's row.
inline BidProfile replace_bidder(const BidProfile& profile, int bidder,
                                 std::span<const double> bid) {
  if (bidder < 0 || bidder >= profile.bidders()) {
    throw std::out_of_range("replace_bidder: bidder index out of range");
  }
  if (static_cast<int>(bid.size()) != profile.items()) {
    throw std::invalid_argument("replace_bidder: bid length must equal item count");
  }
  std::vector<double> values = profile.values();
  std::copy(bid.begin(), bid.end(),
            values.begin() + static_cast<std::size_t>(bidder) * profile.items());
  return BidProfile(profile.bidders(), profile.items(), std::move(values));
}

// Profile with every entry drawn independently and uniformly from the grid
// levels. Reproducible from the seed.
inline BidProfile sample_profile(const ValuationGrid& grid, int bidders, int items,
                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> values(static_cast<std::size_t>(bidders) * items);
  for (double& v : values) {
    v = grid.levels()[static_cast<std::size_t>(rng.uniform_index(static_cast<int>(grid.size())))];
  }
  return BidProfile(bidders, items, std::move(values));
}

}  // namespace oneshot
