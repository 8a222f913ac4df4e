#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ost/error.hpp"
#include "ost/survival_core.hpp"

namespace ost {

enum class FeatureKind { numeric, nominal };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  std::vector<std::string> levels;  // nominal only, in declaration order

  bool operator==(const FeatureSpec&) const = default;
};

struct FeatureSchema {
  std::vector<FeatureSpec> features;

  std::size_t size() const { return features.size(); }
  const FeatureSpec& operator[](std::size_t i) const { return features[i]; }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < features.size(); ++i)
      if (features[i].name == name) return i;
    return std::nullopt;
  }

  bool operator==(const FeatureSchema&) const = default;
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

inline bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto lower = [](char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; };
    if (lower(a[i]) != lower(b[i])) return false;
  }
  return true;
}

// Index of a nominal level, matched case-insensitively.
inline std::optional<std::size_t> find_level(const FeatureSpec& spec, std::string_view value) {
  for (std::size_t i = 0; i < spec.levels.size(); ++i)
    if (iequals(spec.levels[i], value)) return i;
  return std::nullopt;
}

inline std::size_t level_index(const FeatureSpec& spec, std::string_view value) {
  if (auto idx = find_level(spec, value)) return *idx;
  throw UnknownLevel("unknown level '" + std::string(value) + "' for " + spec.name);
}

// Column-typed table: nominal values are stored as level indices, missing
// values as NaN.
struct Dataset {
  FeatureSchema schema;
  std::vector<std::string> ids;
  std::vector<CensoredObservation> observations;
  std::vector<std::vector<double>> columns;  // columns[feature][row]

  std::size_t size() const { return observations.size(); }

  std::vector<double> row(std::size_t i) const {
    std::vector<double> r(columns.size());
    for (std::size_t f = 0; f < columns.size(); ++f) r[f] = columns[f][i];
    return r;
  }

  void push_back(std::string id, CensoredObservation obs, std::span<const double> covariates) {
    if (covariates.size() != schema.size())
      throw ShapeError("covariate vector has " + std::to_string(covariates.size()) +
                       " entries, schema has " + std::to_string(schema.size()));
    if (columns.size() != schema.size()) columns.resize(schema.size());
    ids.push_back(std::move(id));
    observations.push_back(obs);
    for (std::size_t f = 0; f < covariates.size(); ++f) columns[f].push_back(covariates[f]);
  }

  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.schema = schema;
    out.columns.resize(columns.size());
    for (std::size_t r : rows) {
      out.ids.push_back(ids.empty() ? std::string{} : ids[r]);
      out.observations.push_back(observations[r]);
      for (std::size_t f = 0; f < columns.size(); ++f) out.columns[f].push_back(columns[f][r]);
    }
    return out;
  }
};

}  // namespace ost
