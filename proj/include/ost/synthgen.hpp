#pragma once

// Synthetic provider rosters whose outcomes follow a planted survival tree.
// Covariate marginals follow the published descriptive table; each planted
// leaf draws exponential lifetimes calibrated so the restricted mean over the
// horizon equals the leaf's published expected survival.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ost/dataset.hpp"
#include "ost/error.hpp"
#include "ost/pipeline.hpp"
#include "ost/tree.hpp"

namespace ost {

// Restricted mean of an exponential lifetime: (1 - exp(-rate h)) / rate.
inline double exponential_rmst(double rate, double horizon) {
  if (rate <= 0.0) return horizon;
  return -std::expm1(-rate * horizon) / rate;
}

inline double calibrate_leaf_rate(double target_mean, double horizon = 10.0) {
  if (!(horizon > 0.0)) throw InvalidHorizon("horizon must be positive");
  if (!(target_mean > 0.0)) throw InvalidTarget("target mean must be positive");
  if (target_mean >= horizon) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (exponential_rmst(hi, horizon) > target_mean) hi *= 2.0;
  while (hi - lo > 1e-13 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (exponential_rmst(mid, horizon) > target_mean) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

enum class PlantedVariant {
  published,  // the published final tree, small-provider branch reconstructed
  depth3,   // the same tree cut to depth three
  flat,     // no covariate effects
};

struct PlantedModel {
  SurvivalTree tree;
  std::vector<double> leaf_rates;  // by node id; 0 for internal nodes
  double horizon = 10.0;
  StudyWindow window;
};

namespace detail {

class PlantedBuilder {
 public:
  PlantedBuilder(SurvivalTree& tree, std::vector<double>& rates) : tree_(tree), rates_(rates) {}

  std::int32_t leaf(double target) {
    const double rate = calibrate_leaf_rate(target, tree_.horizon);
    Leaf l;
    l.expected_survival = target;
    l.theta = rate;
    if (rate > 0.0)
      for (int year = 1; year <= static_cast<int>(tree_.horizon); ++year) {
        l.curve.jump_times.push_back(year);
        l.curve.values.push_back(std::exp(-rate * year));
      }
    tree_.nodes.push_back(TreeNode{std::move(l)});
    rates_.push_back(rate);
    return static_cast<std::int32_t>(tree_.nodes.size() - 1);
  }

  template <class L, class R>
  std::int32_t split(Split s, L&& left, R&& right) {
    tree_.nodes.push_back(TreeNode{std::move(s)});
    rates_.push_back(0.0);
    const auto k = tree_.nodes.size() - 1;
    const auto l = left();
    const auto r = right();
    tree_.nodes[k].left = l;
    tree_.nodes[k].right = r;
    return static_cast<std::int32_t>(k);
  }

 private:
  SurvivalTree& tree_;
  std::vector<double>& rates_;
};

inline Split numeric_split(std::size_t feature, double threshold) {
  Split s;
  s.feature = feature;
  s.kind = FeatureKind::numeric;
  s.threshold = threshold;
  s.missing = Branch::right;
  return s;
}

inline Split nominal_split(std::size_t feature, std::initializer_list<const char*> levels) {
  Split s;
  s.feature = feature;
  s.kind = FeatureKind::nominal;
  for (const char* l : levels) s.left_levels.push_back(level_index(provider_schema()[feature], l));
  std::sort(s.left_levels.begin(), s.left_levels.end());
  s.missing = Branch::right;
  return s;
}

}  // namespace detail

// Leaf targets in years. Small providers: capacity < 13.
inline PlantedModel planted_model(PlantedVariant variant = PlantedVariant::published) {
  PlantedModel m;
  m.tree.schema = provider_schema();
  m.tree.horizon = m.horizon;
  detail::PlantedBuilder b(m.tree, m.leaf_rates);
  using detail::nominal_split;
  using detail::numeric_split;
  namespace f = feature;

  auto large_branch = [&] {
    return b.split(nominal_split(f::vpk, {"Yes"}), [&] { return b.leaf(9.8); },
                   [&] {
                     return b.split(nominal_split(f::school_readiness_status, {"Active"}), [&] { return b.leaf(9.7); },
                                    [&] { return b.leaf(5.36); });
                   });
  };
  switch (variant) {
    case PlantedVariant::published:
      b.split(
          numeric_split(f::capacity, 13.0),
          [&] {
            return b.split(nominal_split(f::school_readiness_status, {"Active", "Applied"}), [&] { return b.leaf(9.8); },
                           [&] {
                             return b.split(nominal_split(f::license_status, {"Exempt"}), [&] { return b.leaf(5.2); },
                                            [&] {
                                              return b.split(numeric_split(f::origination_year, 2014.5),
                                                             [&] { return b.leaf(7.0); }, [&] { return b.leaf(4.4); });
                                            });
                           });
          },
          large_branch);
      break;
    case PlantedVariant::depth3:
      b.split(
          numeric_split(f::capacity, 13.0),
          [&] {
            return b.split(nominal_split(f::school_readiness_status, {"Active", "Applied"}), [&] { return b.leaf(9.8); },
                           [&] { return b.leaf(5.2); });
          },
          large_branch);
      break;
    case PlantedVariant::flat:
      b.leaf(7.0);
      break;
  }
  m.tree.fit = {m.tree.depth(), 0, 0.0, 0};
  return m;
}

struct SyntheticPopulation {
  std::vector<ProviderRecord> records;
  PlantedModel model;
  std::vector<double> latent_lifetimes;  // continuous, before censoring
  std::vector<std::size_t> planted_leaf;  // node id of each record's leaf
};

namespace detail {

template <class Rng>
std::size_t draw(Rng& rng, std::initializer_list<double> weights) {
  std::discrete_distribution<std::size_t> d(weights);
  return d(rng);
}

// Log-normal with the given mean and sd, truncated to [0, upper] and rounded.
template <class Rng>
int draw_capacity(Rng& rng, double mean, double sd, double upper) {
  const double sigma2 = std::log(1.0 + (sd * sd) / (mean * mean));
  std::lognormal_distribution<double> d(std::log(mean) - 0.5 * sigma2, std::sqrt(sigma2));
  for (;;) {
    const double v = d(rng);
    if (v <= upper) return static_cast<int>(std::lround(v));
  }
}

}  // namespace detail

// Covariates are independent draws from the published marginals, except that
// license-exempt providers are faith based. A provider closes in year
// origination + floor(lifetime) when that is no later than the collection year.
inline SyntheticPopulation sample_population(std::size_t n, std::uint64_t seed,
                                             PlantedVariant variant = PlantedVariant::published) {
  if (n < 1) throw ConfigError("population size must be >= 1");
  SyntheticPopulation pop;
  pop.model = planted_model(variant);
  const auto& schema = provider_schema();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5EEDu};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto& w = pop.model.window;

  for (std::size_t i = 0; i < n; ++i) {
    ProviderRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "SYN%07zu", i + 1);
    r.dcf_id = id;
    r.origination_year = w.first_year + static_cast<int>(detail::draw(rng, {12, 11, 11, 10, 10, 10, 9, 9, 9, 9}));
    r.program_type = schema[feature::program_type].levels[detail::draw(rng, {0.6966, 0.2639, 0.0395, 0.0})];
    r.license_status = schema[feature::license_status].levels[detail::draw(rng, {0.0972, 0.0, 0.8107, 0.0901, 0.0020})];
    r.faith_based = r.license_status == "Exempt";
    r.gold_seal_status = schema[feature::gold_seal_status].levels[detail::draw(rng, {0.0778, 0.0240, 0.0002, 0.8980})];
    r.school_readiness_status =
        schema[feature::school_readiness_status].levels[detail::draw(rng, {0.3653, 0.0051, 0.2312, 0.3984})];
    r.vpk = unif(rng) < 0.2359 ? "Yes" : "No";
    r.head_start = unif(rng) < 0.0379;
    r.urban_zoned = unif(rng) < 0.0034;
    r.school_aged_only = unif(rng) < 0.0468;
    r.capacity = detail::draw_capacity(rng, 64.7, 70.7, 758.0);
    r.is_public_school = false;

    const std::size_t leaf = route(pop.model.tree, encode_covariates(r));
    const double rate = pop.model.leaf_rates[leaf];
    const double u = unif(rng);
    const double lifetime = rate > 0.0 ? -std::log1p(-u) / rate : std::numeric_limits<double>::infinity();
    const double close_offset = std::floor(lifetime);
    if (close_offset <= static_cast<double>(w.collection_year - r.origination_year)) {
      r.status = ProviderStatus::closed;
      r.closure_year = r.origination_year + static_cast<int>(close_offset);
    } else {
      r.status = ProviderStatus::open;
    }
    pop.records.push_back(std::move(r));
    pop.latent_lifetimes.push_back(lifetime);
    pop.planted_leaf.push_back(leaf);
  }
  return pop;
}

inline Rosters split_rosters(const std::vector<ProviderRecord>& records) {
  Rosters r;
  for (const auto& rec : records) (rec.status == ProviderStatus::open ? r.open : r.closed).push_back(rec);
  return r;
}

// Encoded dataset straight from a population (same as running the pipeline on
// its rosters, which carry no duplicates and lie inside the window).
inline Dataset population_dataset(const SyntheticPopulation& pop, YearCount count = YearCount::exclusive) {
  return encode(pop.records, pop.model.window.collection_year, count);
}

}  // namespace ost
