#pragma once

// Brute-force reference implementations. Each one recomputes from raw
// observations by direct scanning so it shares no code path with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "ost/survival_core.hpp"

namespace oracle {

using ost::CensoredObservation;

inline std::vector<double> event_times(std::span<const CensoredObservation> obs) {
  std::set<double> s;
  for (const auto& o : obs)
    if (o.event) s.insert(o.time);
  return {s.begin(), s.end()};
}

inline double deaths_at(std::span<const CensoredObservation> obs, double t) {
  double d = 0;
  for (const auto& o : obs)
    if (o.event && o.time == t) d += o.weight;
  return d;
}

inline double at_risk(std::span<const CensoredObservation> obs, double t) {
  double n = 0;
  for (const auto& o : obs)
    if (o.time >= t) n += o.weight;
  return n;
}

inline double km_at(std::span<const CensoredObservation> obs, double t) {
  double s = 1.0;
  for (double u : event_times(obs)) {
    if (u > t) break;
    s *= 1.0 - deaths_at(obs, u) / at_risk(obs, u);
  }
  return s;
}

inline double na_at(std::span<const CensoredObservation> obs, double t) {
  double h = 0.0;
  for (double u : event_times(obs)) {
    if (u > t) break;
    h += deaths_at(obs, u) / at_risk(obs, u);
  }
  return h;
}

// Integral of km_at over [0, horizon], piece by piece between event times.
inline double rmst(std::span<const CensoredObservation> obs, double horizon) {
  std::vector<double> cuts{0.0};
  for (double u : event_times(obs))
    if (u > 0 && u < horizon) cuts.push_back(u);
  cuts.push_back(horizon);
  double area = 0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) area += km_at(obs, cuts[k]) * (cuts[k + 1] - cuts[k]);
  return area;
}

struct PairCounts {
  std::uint64_t permissible = 0, concordant = 0, discordant = 0, tied = 0;
  double c() const { return (static_cast<double>(concordant) + 0.5 * static_cast<double>(tied)) / static_cast<double>(permissible); }
};

// Every ordered pair; higher prediction should belong to the longer survivor.
inline PairCounts harrell(std::span<const CensoredObservation> obs, std::span<const double> pred) {
  PairCounts c;
  for (std::size_t i = 0; i < obs.size(); ++i)
    for (std::size_t j = 0; j < obs.size(); ++j) {
      if (!(obs[i].time < obs[j].time) || !obs[i].event) continue;
      ++c.permissible;
      if (pred[i] < pred[j]) ++c.concordant;
      else if (pred[i] > pred[j]) ++c.discordant;
      else ++c.tied;
    }
  return c;
}

// Negative Poisson log-likelihood of one node as a function of theta.
inline double node_nll(std::span<const CensoredObservation> obs, std::span<const double> cumhaz, double theta) {
  double v = 0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double mu = theta * cumhaz[i];
    v += obs[i].weight * mu;
    if (obs[i].event) v -= obs[i].weight * std::log(mu);
  }
  return v;
}

inline double golden_min(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Random censored sample on a coarse time grid so ties are common.
inline std::vector<CensoredObservation> random_sample(std::mt19937_64& rng, std::size_t n, double censor_p,
                                                      bool weighted = false) {
  std::uniform_int_distribution<int> tick(0, 40);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<CensoredObservation> obs(n);
  for (auto& o : obs) {
    o.time = tick(rng) * 0.25;
    o.event = u(rng) >= censor_p;
    o.weight = weighted ? 0.5 + u(rng) : 1.0;
  }
  return obs;
}

}  // namespace oracle
