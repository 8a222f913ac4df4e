#pragma once

// Right-censored observations and the nonparametric estimators built on them:
// Kaplan-Meier, Nelson-Aalen and the restricted mean survival time.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ost/error.hpp"

namespace ost {

struct CensoredObservation {
  double time = 0.0;   // years of operation
  bool event = false;  // true when the closure was observed
  double weight = 1.0;
};

enum class CurveEstimator { kaplan_meier, nelson_aalen_derived };

inline const char* estimator_name(CurveEstimator e) {
  return e == CurveEstimator::kaplan_meier ? "kaplan-meier" : "nelson-aalen-derived";
}

// Right-continuous step function. Before the first jump the curve is 1.
struct SurvivalCurve {
  std::vector<double> jump_times;
  std::vector<double> values;
  CurveEstimator estimator = CurveEstimator::kaplan_meier;

  double operator()(double t) const {
    auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    if (it == jump_times.begin()) return 1.0;
    return values[static_cast<std::size_t>(it - jump_times.begin()) - 1];
  }
};

struct CumulativeHazard {
  std::vector<double> jump_times;
  std::vector<double> values;

  double operator()(double t) const {
    auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    if (it == jump_times.begin()) return 0.0;
    return values[static_cast<std::size_t>(it - jump_times.begin()) - 1];
  }
};

namespace detail {

// Distinct times in ascending order with the event weight observed at each and
// the weight still at risk (time >= t). Events precede censorings at a tie,
// so a subject censored at t is counted in the risk set at t.
struct RiskTable {
  std::vector<double> times;
  std::vector<double> events;
  std::vector<double> at_risk;
};

inline RiskTable risk_table(std::span<const CensoredObservation> obs) {
  std::vector<std::size_t> order(obs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return obs[a].time < obs[b].time; });

  RiskTable table;
  std::vector<double> group_weight;
  for (std::size_t idx : order) {
    const auto& o = obs[idx];
    if (table.times.empty() || table.times.back() != o.time) {
      table.times.push_back(o.time);
      table.events.push_back(0.0);
      group_weight.push_back(0.0);
    }
    group_weight.back() += o.weight;
    if (o.event) table.events.back() += o.weight;
  }
  // Suffix sums keep the at-risk weight exact for the last groups.
  table.at_risk.assign(table.times.size(), 0.0);
  double running = 0.0;
  for (std::size_t k = table.times.size(); k-- > 0;) {
    running += group_weight[k];
    table.at_risk[k] = running;
  }
  return table;
}

}  // namespace detail

inline SurvivalCurve kaplan_meier(std::span<const CensoredObservation> obs) {
  if (obs.empty()) throw EmptyInput("kaplan_meier needs at least one observation");
  const auto table = detail::risk_table(obs);
  SurvivalCurve curve;
  double s = 1.0;
  for (std::size_t k = 0; k < table.times.size(); ++k) {
    const double d = table.events[k];
    if (d <= 0.0) continue;
    const double n = table.at_risk[k];
    s = d >= n * (1.0 - 1e-12) ? 0.0 : s * (1.0 - d / n);
    curve.jump_times.push_back(table.times[k]);
    curve.values.push_back(s);
  }
  return curve;
}

inline CumulativeHazard nelson_aalen(std::span<const CensoredObservation> obs) {
  if (obs.empty()) throw EmptyInput("nelson_aalen needs at least one observation");
  const auto table = detail::risk_table(obs);
  CumulativeHazard hazard;
  double h = 0.0;
  for (std::size_t k = 0; k < table.times.size(); ++k) {
    const double d = table.events[k];
    if (d <= 0.0) continue;
    h += d / table.at_risk[k];
    hazard.jump_times.push_back(table.times[k]);
    hazard.values.push_back(h);
  }
  return hazard;
}

// Exact area under the step function over [0, horizon].
inline double restricted_mean_survival(const SurvivalCurve& curve, double horizon) {
  if (!(horizon > 0.0)) throw InvalidHorizon("horizon must be positive");
  double area = 0.0;
  double prev_t = 0.0;
  double level = 1.0;
  for (std::size_t k = 0; k < curve.jump_times.size(); ++k) {
    const double t = curve.jump_times[k];
    if (t >= horizon) break;
    if (t > prev_t) {
      area += level * (t - prev_t);
      prev_t = t;
    }
    level = curve.values[k];
  }
  area += level * (horizon - prev_t);
  return area;
}

}  // namespace ost
