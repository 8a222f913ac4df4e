#pragma once

// The fitted survival tree: split predicates, leaf summaries, routing,
// prediction and the canonical tree document.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "ost/dataset.hpp"
#include "ost/error.hpp"
#include "ost/survival_core.hpp"

namespace ost {

enum class Branch { left, right };

// Numeric splits send value < threshold left. Nominal splits send the listed
// levels left. Missing values follow `missing`.
struct Split {
  std::size_t feature = 0;
  FeatureKind kind = FeatureKind::numeric;
  double threshold = 0.0;
  std::vector<std::size_t> left_levels;  // sorted level indices
  Branch missing = Branch::left;

  bool goes_left(double value) const {
    if (is_missing(value)) return missing == Branch::left;
    if (kind == FeatureKind::numeric) return value < threshold;
    return std::binary_search(left_levels.begin(), left_levels.end(),
                              static_cast<std::size_t>(value));
  }
};

struct Leaf {
  SurvivalCurve curve;
  double expected_survival = 0.0;
  std::size_t n_train = 0;
  double theta = 0.0;
};

struct TreeNode {
  std::variant<Leaf, Split> body;
  std::int32_t left = -1;
  std::int32_t right = -1;

  bool is_leaf() const { return std::holds_alternative<Leaf>(body); }
  const Leaf& leaf() const { return std::get<Leaf>(body); }
  const Split& split() const { return std::get<Split>(body); }
};

// Hyperparameters the tree was fitted with, after defaults were resolved.
struct FitParams {
  int max_depth = 0;
  std::size_t min_bucket = 1;
  double alpha = 0.0;
  std::uint64_t seed = 0;
};

struct SurvivalTree {
  FeatureSchema schema;
  std::vector<TreeNode> nodes;  // preorder, root at 0
  FitParams fit;
  double horizon = 10.0;

  int depth() const { return nodes.empty() ? 0 : depth_below(0); }

  std::size_t split_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
  }
  std::size_t leaf_count() const { return nodes.size() - split_count(); }

  // Distinct feature indices used by any split, ascending.
  std::vector<std::size_t> split_features() const {
    std::set<std::size_t> used;
    for (const auto& n : nodes)
      if (!n.is_leaf()) used.insert(n.split().feature);
    return {used.begin(), used.end()};
  }

 private:
  int depth_below(std::size_t k) const {
    const auto& n = nodes[k];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_below(static_cast<std::size_t>(n.left)),
                        depth_below(static_cast<std::size_t>(n.right)));
  }
};

inline void check_covariates(const SurvivalTree& tree, std::span<const double> covariates) {
  if (covariates.size() != tree.schema.size())
    throw ShapeError("expected " + std::to_string(tree.schema.size()) + " covariates, got " +
                     std::to_string(covariates.size()));
}

// Index of the leaf node the subject falls into.
inline std::size_t route(const SurvivalTree& tree, std::span<const double> covariates) {
  check_covariates(tree, covariates);
  std::size_t k = 0;
  while (!tree.nodes[k].is_leaf()) {
    const auto& split = tree.nodes[k].split();
    const double v = covariates[split.feature];
    if (split.kind == FeatureKind::nominal && !is_missing(v)) {
      const auto& spec = tree.schema[split.feature];
      if (v < 0 || v != std::floor(v) || v >= static_cast<double>(spec.levels.size()))
        throw UnknownLevel("level index " + std::to_string(v) + " outside " + spec.name);
    }
    k = static_cast<std::size_t>(split.goes_left(v) ? tree.nodes[k].left : tree.nodes[k].right);
  }
  return k;
}

inline double predict_expected_survival(const SurvivalTree& tree, std::span<const double> covariates) {
  return tree.nodes[route(tree, covariates)].leaf().expected_survival;
}

inline std::vector<double> predict_expected_survival(const SurvivalTree& tree, const Dataset& data) {
  std::vector<double> out(data.size());
  std::vector<double> row(data.columns.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t f = 0; f < row.size(); ++f) row[f] = data.columns[f][i];
    out[i] = predict_expected_survival(tree, row);
  }
  return out;
}

// Dataset rows grouped by the node id of the leaf they route to.
inline std::vector<std::vector<std::size_t>> leaf_members(const SurvivalTree& tree, const Dataset& data) {
  std::vector<std::vector<std::size_t>> members(tree.nodes.size());
  std::vector<double> row(data.columns.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t f = 0; f < row.size(); ++f) row[f] = data.columns[f][i];
    members[route(tree, row)].push_back(i);
  }
  return members;
}

inline bool structurally_equal(const SurvivalTree& a, const SurvivalTree& b, double tol = 1e-12) {
  auto close = [tol](double x, double y) { return std::abs(x - y) <= tol * std::max(1.0, std::abs(x)); };
  if (!(a.schema == b.schema) || a.nodes.size() != b.nodes.size()) return false;
  if (a.fit.max_depth != b.fit.max_depth || a.fit.min_bucket != b.fit.min_bucket ||
      a.fit.seed != b.fit.seed || !close(a.fit.alpha, b.fit.alpha) || !close(a.horizon, b.horizon))
    return false;
  for (std::size_t k = 0; k < a.nodes.size(); ++k) {
    const auto& x = a.nodes[k];
    const auto& y = b.nodes[k];
    if (x.left != y.left || x.right != y.right || x.is_leaf() != y.is_leaf()) return false;
    if (x.is_leaf()) {
      const auto& lx = x.leaf();
      const auto& ly = y.leaf();
      if (lx.n_train != ly.n_train || !close(lx.expected_survival, ly.expected_survival) ||
          !close(lx.theta, ly.theta) || lx.curve.estimator != ly.curve.estimator ||
          lx.curve.jump_times.size() != ly.curve.jump_times.size())
        return false;
      for (std::size_t j = 0; j < lx.curve.jump_times.size(); ++j)
        if (!close(lx.curve.jump_times[j], ly.curve.jump_times[j]) ||
            !close(lx.curve.values[j], ly.curve.values[j]))
          return false;
    } else {
      const auto& sx = x.split();
      const auto& sy = y.split();
      if (sx.feature != sy.feature || sx.kind != sy.kind || sx.left_levels != sy.left_levels ||
          sx.missing != sy.missing || !close(sx.threshold, sy.threshold))
        return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Tree document

inline constexpr const char* kTreeFormat = "ost-survival-tree";
inline constexpr int kTreeFormatVersion = 1;

// Rounds to 12 significant digits so documents are stable and diffable.
inline double round_sig12(double v) {
  if (!std::isfinite(v)) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

inline nlohmann::json schema_to_json(const FeatureSchema& schema) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : schema.features) {
    nlohmann::json j{{"name", f.name}, {"kind", f.kind == FeatureKind::numeric ? "numeric" : "nominal"}};
    if (f.kind == FeatureKind::nominal) j["levels"] = f.levels;
    features.push_back(std::move(j));
  }
  return features;
}

// `provenance`, when given, is stored verbatim and ignored on read.
inline std::string serialize(const SurvivalTree& tree, const nlohmann::json& provenance = nullptr) {
  using nlohmann::json;
  json doc;
  if (!provenance.is_null()) doc["provenance"] = provenance;
  doc["format"] = kTreeFormat;
  doc["version"] = kTreeFormatVersion;
  doc["horizon"] = round_sig12(tree.horizon);
  doc["fit_config"] = {{"max_depth", tree.fit.max_depth},
                       {"min_bucket", tree.fit.min_bucket},
                       {"alpha", round_sig12(tree.fit.alpha)},
                       {"seed", tree.fit.seed}};
  doc["features"] = schema_to_json(tree.schema);
  json nodes = json::array();
  for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
    const auto& n = tree.nodes[k];
    json j{{"id", k}};
    if (n.is_leaf()) {
      const auto& leaf = n.leaf();
      std::vector<double> times, values;
      for (double t : leaf.curve.jump_times) times.push_back(round_sig12(t));
      for (double v : leaf.curve.values) values.push_back(round_sig12(v));
      j["leaf"] = {{"expected_survival", round_sig12(leaf.expected_survival)},
                   {"n_train", leaf.n_train},
                   {"theta", round_sig12(leaf.theta)},
                   {"curve", {{"estimator", estimator_name(leaf.curve.estimator)},
                              {"times", times},
                              {"values", values}}}};
    } else {
      const auto& s = n.split();
      const auto& spec = tree.schema[s.feature];
      json js{{"feature", spec.name}, {"missing", s.missing == Branch::left ? "left" : "right"}};
      if (s.kind == FeatureKind::numeric) {
        js["kind"] = "numeric";
        js["threshold"] = round_sig12(s.threshold);
      } else {
        js["kind"] = "nominal";
        std::vector<std::string> names;
        for (std::size_t l : s.left_levels) names.push_back(spec.levels[l]);
        js["left_levels"] = names;
      }
      j["split"] = std::move(js);
      j["left"] = n.left;
      j["right"] = n.right;
    }
    nodes.push_back(std::move(j));
  }
  doc["nodes"] = std::move(nodes);
  return doc.dump(2) + "\n";
}

namespace detail {

class DocReader {
 public:
  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ParseError(path + ": " + what);
  }

  static const nlohmann::json& field(const nlohmann::json& obj, const std::string& key,
                                     const std::string& path) {
    if (!obj.is_object()) fail(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(path + "." + key, "missing field");
    return *it;
  }

  static double number(const nlohmann::json& obj, const std::string& key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    return v.get<double>();
  }

  static std::uint64_t count(const nlohmann::json& obj, const std::string& key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      fail(path + "." + key, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  static std::string text(const nlohmann::json& obj, const std::string& key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_string()) fail(path + "." + key, "expected a string");
    return v.get<std::string>();
  }

  static std::vector<double> numbers(const nlohmann::json& obj, const std::string& key,
                                     const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_array()) fail(path + "." + key, "expected an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(path + "." + key + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }
};

inline FeatureSchema schema_from_json(const nlohmann::json& features, const std::string& path) {
  using R = DocReader;
  if (!features.is_array()) R::fail(path, "expected an array");
  FeatureSchema schema;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    FeatureSpec spec;
    spec.name = R::text(features[i], "name", p);
    const std::string kind = R::text(features[i], "kind", p);
    if (kind == "numeric") {
      spec.kind = FeatureKind::numeric;
    } else if (kind == "nominal") {
      spec.kind = FeatureKind::nominal;
      const auto& levels = R::field(features[i], "levels", p);
      if (!levels.is_array() || levels.empty()) R::fail(p + ".levels", "expected a non-empty array");
      for (const auto& l : levels) {
        if (!l.is_string()) R::fail(p + ".levels", "levels must be strings");
        spec.levels.push_back(l.get<std::string>());
      }
    } else {
      R::fail(p + ".kind", "unknown feature kind '" + kind + "'");
    }
    if (schema.index_of(spec.name)) R::fail(p + ".name", "duplicate feature '" + spec.name + "'");
    schema.features.push_back(std::move(spec));
  }
  return schema;
}

}  // namespace detail

inline SurvivalTree deserialize(std::string_view text) {
  using R = detail::DocReader;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("document: ") + e.what());
  }
  if (R::text(doc, "format", "document") != kTreeFormat) R::fail("document.format", "not a tree document");
  if (R::count(doc, "version", "document") != static_cast<std::uint64_t>(kTreeFormatVersion))
    R::fail("document.version", "unsupported version");

  SurvivalTree tree;
  tree.horizon = R::number(doc, "horizon", "document");
  if (!(tree.horizon > 0)) R::fail("document.horizon", "must be positive");
  const auto& cfg = R::field(doc, "fit_config", "document");
  tree.fit.max_depth = static_cast<int>(R::count(cfg, "max_depth", "fit_config"));
  tree.fit.min_bucket = R::count(cfg, "min_bucket", "fit_config");
  tree.fit.alpha = R::number(cfg, "alpha", "fit_config");
  tree.fit.seed = R::count(cfg, "seed", "fit_config");
  tree.schema = detail::schema_from_json(R::field(doc, "features", "document"), "features");

  const auto& nodes = R::field(doc, "nodes", "document");
  if (!nodes.is_array() || nodes.empty()) R::fail("nodes", "expected a non-empty array");
  std::vector<int> parents(nodes.size(), 0);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const std::string p = "nodes[" + std::to_string(k) + "]";
    const auto& jn = nodes[k];
    if (R::count(jn, "id", p) != k) R::fail(p + ".id", "ids must equal array positions");
    TreeNode node;
    const bool has_leaf = jn.contains("leaf");
    const bool has_split = jn.contains("split");
    if (has_leaf == has_split) R::fail(p, "node must have exactly one of 'leaf' or 'split'");
    if (has_leaf) {
      const std::string lp = p + ".leaf";
      const auto& jl = jn["leaf"];
      Leaf leaf;
      leaf.expected_survival = R::number(jl, "expected_survival", lp);
      leaf.n_train = R::count(jl, "n_train", lp);
      leaf.theta = R::number(jl, "theta", lp);
      if (leaf.theta < 0) R::fail(lp + ".theta", "must be non-negative");
      const auto& jc = R::field(jl, "curve", lp);
      const std::string est = R::text(jc, "estimator", lp + ".curve");
      if (est == "kaplan-meier") leaf.curve.estimator = CurveEstimator::kaplan_meier;
      else if (est == "nelson-aalen-derived") leaf.curve.estimator = CurveEstimator::nelson_aalen_derived;
      else R::fail(lp + ".curve.estimator", "unknown estimator '" + est + "'");
      leaf.curve.jump_times = R::numbers(jc, "times", lp + ".curve");
      leaf.curve.values = R::numbers(jc, "values", lp + ".curve");
      if (leaf.curve.jump_times.size() != leaf.curve.values.size())
        R::fail(lp + ".curve", "times and values differ in length");
      for (std::size_t j = 0; j < leaf.curve.values.size(); ++j) {
        const double v = leaf.curve.values[j];
        if (v < 0 || v > 1 || (j > 0 && v > leaf.curve.values[j - 1]))
          R::fail(lp + ".curve.values[" + std::to_string(j) + "]", "not a survival probability sequence");
        if (j > 0 && leaf.curve.jump_times[j] <= leaf.curve.jump_times[j - 1])
          R::fail(lp + ".curve.times[" + std::to_string(j) + "]", "times must be strictly increasing");
      }
      node.body = std::move(leaf);
    } else {
      const std::string sp = p + ".split";
      const auto& js = jn["split"];
      Split split;
      const std::string fname = R::text(js, "feature", sp);
      auto fidx = tree.schema.index_of(fname);
      if (!fidx) R::fail(sp + ".feature", "unknown feature '" + fname + "'");
      split.feature = *fidx;
      const auto& spec = tree.schema[split.feature];
      const std::string kind = R::text(js, "kind", sp);
      const std::string missing = R::text(js, "missing", sp);
      if (missing == "left") split.missing = Branch::left;
      else if (missing == "right") split.missing = Branch::right;
      else R::fail(sp + ".missing", "expected 'left' or 'right'");
      if (spec.kind == FeatureKind::nominal && js.contains("threshold"))
        R::fail(sp + ".threshold", "threshold on nominal feature '" + fname + "'");
      if (spec.kind == FeatureKind::numeric && js.contains("left_levels"))
        R::fail(sp + ".left_levels", "level subset on numeric feature '" + fname + "'");
      if ((kind == "numeric") != (spec.kind == FeatureKind::numeric) || (kind != "numeric" && kind != "nominal"))
        R::fail(sp + ".kind", "kind '" + kind + "' does not match feature '" + fname + "'");
      split.kind = spec.kind;
      if (spec.kind == FeatureKind::numeric) {
        split.threshold = R::number(js, "threshold", sp);
      } else {
        const auto& jl = R::field(js, "left_levels", sp);
        if (!jl.is_array()) R::fail(sp + ".left_levels", "expected an array");
        for (const auto& l : jl) {
          if (!l.is_string()) R::fail(sp + ".left_levels", "levels must be strings");
          auto li = find_level(spec, l.get<std::string>());
          if (!li) R::fail(sp + ".left_levels", "unknown level '" + l.get<std::string>() + "'");
          split.left_levels.push_back(*li);
        }
        std::sort(split.left_levels.begin(), split.left_levels.end());
        split.left_levels.erase(std::unique(split.left_levels.begin(), split.left_levels.end()),
                                split.left_levels.end());
        if (split.left_levels.empty() || split.left_levels.size() >= spec.levels.size())
          R::fail(sp + ".left_levels", "must be a non-empty proper subset of the levels");
      }
      const std::uint64_t left = R::count(jn, "left", p);
      const std::uint64_t right = R::count(jn, "right", p);
      for (std::uint64_t child : {left, right}) {
        if (child <= k || child >= nodes.size()) R::fail(p, "child index out of preorder range");
        ++parents[child];
      }
      node.left = static_cast<std::int32_t>(left);
      node.right = static_cast<std::int32_t>(right);
      node.body = std::move(split);
    }
    tree.nodes.push_back(std::move(node));
  }
  for (std::size_t k = 1; k < parents.size(); ++k)
    if (parents[k] != 1) R::fail("nodes[" + std::to_string(k) + "]", "node must have exactly one parent");
  return tree;
}

}  // namespace ost
