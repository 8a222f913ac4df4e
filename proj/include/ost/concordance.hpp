#pragma once

// Harrell's concordance index for right-censored outcomes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "ost/error.hpp"
#include "ost/survival_core.hpp"

namespace ost {

struct ConcordanceResult {
  double c_index = 0.5;
  std::uint64_t concordant = 0;
  std::uint64_t discordant = 0;
  std::uint64_t tied_predictions = 0;
  std::uint64_t permissible_pairs = 0;
};

// A pair is permissible when the times differ and the earlier one is an
// observed closure. Pairs are emitted (earlier, later).
inline std::vector<std::pair<std::size_t, std::size_t>> permissible_pairs(
    std::span<const CensoredObservation> obs) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    for (std::size_t j = i + 1; j < obs.size(); ++j) {
      if (obs[i].time < obs[j].time && obs[i].event) pairs.emplace_back(i, j);
      else if (obs[j].time < obs[i].time && obs[j].event) pairs.emplace_back(j, i);
    }
  }
  return pairs;
}

namespace detail {

class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}
  void add(std::size_t i) {
    for (++i; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
  }
  // Count of inserted ranks < i.
  std::uint64_t prefix(std::size_t i) const {
    std::uint64_t s = 0;
    for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<std::uint64_t> tree_;
};

}  // namespace detail

// O(n log n): sweep times in decreasing order, keeping the predictions of all
// strictly later subjects in a Fenwick tree over prediction ranks.
// Higher predicted survival is expected for the longer-lived subject.
inline ConcordanceResult harrell_c(std::span<const CensoredObservation> obs,
                                   std::span<const double> predicted_survival) {
  if (obs.size() != predicted_survival.size())
    throw ShapeError("harrell_c: " + std::to_string(obs.size()) + " observations but " +
                     std::to_string(predicted_survival.size()) + " predictions");
  for (double p : predicted_survival)
    if (!std::isfinite(p)) throw ShapeError("harrell_c: predictions must be finite");

  const std::size_t n = obs.size();
  std::vector<double> levels(predicted_survival.begin(), predicted_survival.end());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i)
    rank[i] = static_cast<std::size_t>(
        std::lower_bound(levels.begin(), levels.end(), predicted_survival[i]) - levels.begin());

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return obs[a].time > obs[b].time; });

  ConcordanceResult r;
  detail::Fenwick later(levels.size());
  std::uint64_t inserted = 0;
  std::size_t g = 0;
  while (g < n) {
    std::size_t end = g;
    while (end < n && obs[order[end]].time == obs[order[g]].time) ++end;
    for (std::size_t k = g; k < end; ++k) {
      const std::size_t i = order[k];
      if (!obs[i].event) continue;
      const std::uint64_t below = later.prefix(rank[i]);
      const std::uint64_t upto = later.prefix(rank[i] + 1);
      r.discordant += below;
      r.tied_predictions += upto - below;
      r.concordant += inserted - upto;
    }
    for (std::size_t k = g; k < end; ++k) {
      later.add(rank[order[k]]);
      ++inserted;
    }
    g = end;
  }
  r.permissible_pairs = r.concordant + r.discordant + r.tied_predictions;
  if (r.permissible_pairs == 0)
    throw UndefinedConcordance("no permissible pairs (no observed closure precedes another time)");
  r.c_index = (static_cast<double>(r.concordant) + 0.5 * static_cast<double>(r.tied_predictions)) /
              static_cast<double>(r.permissible_pairs);
  return r;
}

}  // namespace ost
