#pragma once

// Survival-tree learning: the likelihood-deficit loss, greedy growth,
// local-search refinement with random restarts, weakest-link pruning with
// cross-validated complexity, the depth-tuning harness and the reseed check.
//
// Loss. A node with members i carries a relative risk theta against the
// training Nelson-Aalen baseline L(t). Its deficit is
//   sum_i w_i [theta L(t_i) - d_i - d_i log(theta L(t_i) / d_i)]
// minimised at theta = D / S with D = sum w_i d_i and S = sum w_i L(t_i),
// which leaves D log(S / D) - sum_i w_i d_i log L(t_i). The last sum does
// not depend on the partition, so split search only tracks (D, S) per leaf.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ost/concordance.hpp"
#include "ost/dataset.hpp"
#include "ost/error.hpp"
#include "ost/survival_core.hpp"
#include "ost/tree.hpp"

namespace ost {

struct FitConfig {
  int max_depth = 5;
  std::optional<std::size_t> min_bucket;  // unset: 1% of the training rows
  std::optional<double> alpha;            // unset: tuned by cross-validation
  std::uint64_t seed = 1;
  double train_fraction = 0.75;
  bool local_search = true;
  int restarts = 10;
  double horizon = 10.0;
  int cv_folds = 5;

  void validate() const {
    if (max_depth < 0) throw ConfigError("max_depth must be >= 0");
    if (min_bucket && *min_bucket < 1) throw ConfigError("min_bucket must be >= 1");
    if (alpha && !(*alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
    if (restarts < 0) throw ConfigError("restarts must be >= 0");
    if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
    if (cv_folds < 2) throw ConfigError("cv_folds must be >= 2");
  }
};

inline std::size_t resolve_min_bucket(const FitConfig& config, std::size_t n_train) {
  if (config.min_bucket) return *config.min_bucket;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.01 * static_cast<double>(n_train))));
}

struct NodeLoss {
  double theta_hat = 0.0;
  double loglik_deficit = 0.0;
  std::size_t n = 0;
  double events = 0.0;
};

namespace detail {

inline constexpr double kHazardFloor = 1e-12;

inline double partial_loss(double d, double s) {
  if (d <= 0.0) return 0.0;
  return d * std::log(std::max(s, kHazardFloor) / d);
}

}  // namespace detail

// Evaluated term by term against an externally fitted baseline.
inline NodeLoss node_theta_and_loss(std::span<const CensoredObservation> members,
                                    const CumulativeHazard& baseline) {
  if (members.empty()) throw EmptyNode("node_theta_and_loss: node has no members");
  NodeLoss out;
  out.n = members.size();
  double exposure = 0.0;
  for (const auto& o : members) {
    exposure += o.weight * baseline(o.time);
    if (o.event) out.events += o.weight;
  }
  out.theta_hat = exposure > 0.0 ? out.events / exposure : 0.0;
  for (const auto& o : members) {
    const double mu = out.theta_hat * baseline(o.time);
    if (o.event) out.loglik_deficit += o.weight * (mu - 1.0 - std::log(std::max(mu, detail::kHazardFloor)));
    else out.loglik_deficit += o.weight * mu;
  }
  return out;
}

// Training rows with the quantities the loss needs, precomputed once.
class TrainingSet {
 public:
  TrainingSet(const Dataset& data, std::vector<std::size_t> rows) : data_(&data), rows_(std::move(rows)) {
    if (rows_.empty()) throw EmptyInput("training set is empty");
    for (const auto& spec : data.schema.features)
      if (spec.kind == FeatureKind::nominal && spec.levels.size() > 64)
        throw ConfigError("nominal feature '" + spec.name + "' has more than 64 levels");
    const std::size_t n = rows_.size();
    obs_.reserve(n);
    for (std::size_t r : rows_) obs_.push_back(data.observations[r]);
    baseline_ = nelson_aalen(obs_);
    event_w_.resize(n);
    hazard_w_.resize(n);
    log_term_ = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double h = baseline_(obs_[i].time);
      event_w_[i] = obs_[i].event ? obs_[i].weight : 0.0;
      hazard_w_[i] = obs_[i].weight * h;
      if (obs_[i].event) log_term_ += obs_[i].weight * std::log(std::max(h, detail::kHazardFloor));
    }
    x_.resize(data.schema.size());
    sorted_.resize(data.schema.size());
    for (std::size_t f = 0; f < x_.size(); ++f) {
      x_[f].resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double v = data.columns[f][rows_[i]];
        if (is_missing(v))
          throw ConfigError("training row '" + (data.ids.empty() ? std::to_string(rows_[i]) : data.ids[rows_[i]]) +
                            "' has a missing " + data.schema[f].name);
        x_[f][i] = v;
      }
      auto& order = sorted_[f];
      order.resize(n);
      std::iota(order.begin(), order.end(), std::uint32_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::uint32_t a, std::uint32_t b) { return x_[f][a] < x_[f][b]; });
    }
  }

  explicit TrainingSet(const Dataset& data) : TrainingSet(data, all_rows(data.size())) {}

  std::size_t size() const { return rows_.size(); }
  const Dataset& data() const { return *data_; }
  const FeatureSchema& schema() const { return data_->schema; }
  std::span<const std::size_t> source_rows() const { return rows_; }
  const std::vector<CensoredObservation>& observations() const { return obs_; }
  const CumulativeHazard& baseline() const { return baseline_; }

  double value(std::size_t feature, std::size_t i) const { return x_[feature][i]; }
  double event_weight(std::size_t i) const { return event_w_[i]; }
  double hazard_weight(std::size_t i) const { return hazard_w_[i]; }
  // sum over events of w log L(t_i); constant across partitions.
  double log_term() const { return log_term_; }
  const std::vector<std::uint32_t>& sorted_by(std::size_t feature) const { return sorted_[feature]; }

 private:
  static std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> r(n);
    std::iota(r.begin(), r.end(), std::size_t{0});
    return r;
  }

  const Dataset* data_;
  std::vector<std::size_t> rows_;
  std::vector<CensoredObservation> obs_;
  CumulativeHazard baseline_;
  std::vector<double> event_w_, hazard_w_;
  double log_term_ = 0.0;
  std::vector<std::vector<double>> x_;
  std::vector<std::vector<std::uint32_t>> sorted_;
};

struct SplitCandidate {
  Split split;
  double decrease = 0.0;
};

namespace detail {

struct Stat {
  double d = 0.0;
  double s = 0.0;
  std::uint32_t n = 0;
};

inline Stat node_stat(const TrainingSet& ts, std::span<const std::uint32_t> rows) {
  Stat st;
  for (std::uint32_t i : rows) {
    st.d += ts.event_weight(i);
    st.s += ts.hazard_weight(i);
    ++st.n;
  }
  return st;
}

// Rows of one node arranged into groups that move together across a split
// boundary: distinct values (numeric) or levels ordered by theta (nominal).
struct Sweep {
  std::vector<std::uint32_t> order;      // positions into the node's row list
  std::vector<std::uint32_t> group_end;  // exclusive end of each group in `order`
  std::vector<double> group_value;       // value or level index per group
};

class SweepBuilder {
 public:
  explicit SweepBuilder(const TrainingSet& ts) : ts_(ts), pos_(ts.size(), -1) {}

  void build(std::size_t feature, std::span<const std::uint32_t> rows, Sweep& out) {
    out.order.clear();
    out.group_end.clear();
    out.group_value.clear();
    if (rows.empty()) return;
    if (ts_.schema()[feature].kind == FeatureKind::numeric) build_numeric(feature, rows, out);
    else build_nominal(feature, rows, out);
  }

 private:
  void build_numeric(std::size_t f, std::span<const std::uint32_t> rows, Sweep& out) {
    const std::size_t n = ts_.size();
    if (rows.size() * 16 < n) {
      out.order.resize(rows.size());
      std::iota(out.order.begin(), out.order.end(), std::uint32_t{0});
      std::sort(out.order.begin(), out.order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const double va = ts_.value(f, rows[a]), vb = ts_.value(f, rows[b]);
        return va < vb || (va == vb && rows[a] < rows[b]);
      });
    } else {
      for (std::size_t p = 0; p < rows.size(); ++p) pos_[rows[p]] = static_cast<std::int32_t>(p);
      out.order.reserve(rows.size());
      for (std::uint32_t i : ts_.sorted_by(f))
        if (pos_[i] >= 0) out.order.push_back(static_cast<std::uint32_t>(pos_[i]));
      for (std::uint32_t i : rows) pos_[i] = -1;
    }
    for (std::size_t k = 0; k < out.order.size(); ++k) {
      const double v = ts_.value(f, rows[out.order[k]]);
      if (k > 0 && v != out.group_value.back()) out.group_end.push_back(static_cast<std::uint32_t>(k));
      if (k == 0 || v != out.group_value.back()) out.group_value.push_back(v);
    }
    out.group_end.push_back(static_cast<std::uint32_t>(out.order.size()));
  }

  void build_nominal(std::size_t f, std::span<const std::uint32_t> rows, Sweep& out) {
    const std::size_t levels = ts_.schema()[f].levels.size();
    std::vector<Stat> per(levels);
    for (std::uint32_t i : rows) {
      auto& st = per[static_cast<std::size_t>(ts_.value(f, i))];
      st.d += ts_.event_weight(i);
      st.s += ts_.hazard_weight(i);
      ++st.n;
    }
    std::vector<std::size_t> present;
    for (std::size_t l = 0; l < levels; ++l)
      if (per[l].n > 0) present.push_back(l);
    auto theta = [&](std::size_t l) { return per[l].s > 0.0 ? per[l].d / per[l].s : 0.0; };
    std::stable_sort(present.begin(), present.end(),
                     [&](std::size_t a, std::size_t b) { return theta(a) < theta(b); });
    std::vector<std::int32_t> rank(levels, -1);
    for (std::size_t r = 0; r < present.size(); ++r) rank[present[r]] = static_cast<std::int32_t>(r);
    std::vector<std::uint32_t> start(present.size() + 1, 0);
    for (std::size_t l : present) start[static_cast<std::size_t>(rank[l]) + 1] = per[l].n;
    for (std::size_t r = 1; r < start.size(); ++r) start[r] += start[r - 1];
    out.order.assign(rows.size(), 0);
    std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
    for (std::size_t p = 0; p < rows.size(); ++p) {
      const auto l = static_cast<std::size_t>(ts_.value(f, rows[p]));
      out.order[fill[static_cast<std::size_t>(rank[l])]++] = static_cast<std::uint32_t>(p);
    }
    for (std::size_t r = 0; r < present.size(); ++r) {
      out.group_end.push_back(start[r + 1]);
      out.group_value.push_back(static_cast<double>(present[r]));
    }
  }

  const TrainingSet& ts_;
  std::vector<std::int32_t> pos_;
};

inline Split make_split(const TrainingSet& ts, std::size_t feature, const Sweep& sw, std::size_t boundary) {
  Split s;
  s.feature = feature;
  s.kind = ts.schema()[feature].kind;
  if (s.kind == FeatureKind::numeric) {
    s.threshold = 0.5 * (sw.group_value[boundary] + sw.group_value[boundary + 1]);
  } else {
    for (std::size_t g = 0; g <= boundary; ++g) s.left_levels.push_back(static_cast<std::size_t>(sw.group_value[g]));
    std::sort(s.left_levels.begin(), s.left_levels.end());
  }
  return s;
}

inline double improvement_tolerance(double scale) { return 1e-12 * (1.0 + std::abs(scale)); }

inline std::optional<SplitCandidate> best_split(const TrainingSet& ts, std::span<const std::uint32_t> rows,
                                                std::size_t min_bucket, std::span<const std::size_t> features,
                                                SweepBuilder& builder) {
  if (rows.size() < 2 * min_bucket) return std::nullopt;
  const Stat parent = node_stat(ts, rows);
  const double parent_loss = partial_loss(parent.d, parent.s);
  std::optional<SplitCandidate> best;
  double best_decrease = improvement_tolerance(parent_loss);
  Sweep sw;
  for (std::size_t f : features) {
    builder.build(f, rows, sw);
    if (sw.group_end.size() < 2) continue;
    Stat left;
    std::size_t k = 0;
    for (std::size_t g = 0; g + 1 < sw.group_end.size(); ++g) {
      for (; k < sw.group_end[g]; ++k) {
        const std::uint32_t i = rows[sw.order[k]];
        left.d += ts.event_weight(i);
        left.s += ts.hazard_weight(i);
        ++left.n;
      }
      const std::size_t nr = rows.size() - left.n;
      if (left.n < min_bucket) continue;
      if (nr < min_bucket) break;
      const double dec = parent_loss - partial_loss(left.d, left.s) -
                         partial_loss(parent.d - left.d, parent.s - left.s);
      if (dec > best_decrease) {
        best_decrease = dec;
        best = SplitCandidate{make_split(ts, f, sw, g), dec};
      }
    }
  }
  return best;
}

inline std::vector<std::size_t> all_features(const TrainingSet& ts) {
  std::vector<std::size_t> f(ts.schema().size());
  std::iota(f.begin(), f.end(), std::size_t{0});
  return f;
}

// ---------------------------------------------------------------------------
// Mutable tree used during search. Node 0 is the root; detached nodes may
// linger in the arena until compact().

struct WorkNode {
  bool leaf = true;
  bool nominal = false;
  std::uint32_t feature = 0;
  double threshold = 0.0;
  std::uint64_t left_mask = 0;
  std::int32_t left = -1;
  std::int32_t right = -1;

  bool goes_left(double v) const {
    if (nominal) return (left_mask >> static_cast<unsigned>(v)) & 1u;
    return v < threshold;
  }

  void set_split(const Split& s) {
    leaf = false;
    feature = static_cast<std::uint32_t>(s.feature);
    nominal = s.kind == FeatureKind::nominal;
    threshold = s.threshold;
    left_mask = 0;
    for (std::size_t l : s.left_levels) left_mask |= std::uint64_t{1} << l;
  }
};

struct WorkTree {
  std::vector<WorkNode> nodes{WorkNode{}};
};

inline int descend(const WorkTree& t, int k, const TrainingSet& ts, std::uint32_t i) {
  while (!t.nodes[static_cast<std::size_t>(k)].leaf) {
    const auto& n = t.nodes[static_cast<std::size_t>(k)];
    k = n.goes_left(ts.value(n.feature, i)) ? n.left : n.right;
  }
  return k;
}

inline void preorder(const WorkTree& t, int k, std::vector<int>& out) {
  out.push_back(k);
  const auto& n = t.nodes[static_cast<std::size_t>(k)];
  if (!n.leaf) {
    preorder(t, n.left, out);
    preorder(t, n.right, out);
  }
}

inline WorkTree compact(const WorkTree& t) {
  std::vector<int> order;
  preorder(t, 0, order);
  std::vector<std::int32_t> remap(t.nodes.size(), -1);
  for (std::size_t p = 0; p < order.size(); ++p) remap[static_cast<std::size_t>(order[p])] = static_cast<std::int32_t>(p);
  WorkTree out;
  out.nodes.clear();
  for (int k : order) {
    WorkNode n = t.nodes[static_cast<std::size_t>(k)];
    if (!n.leaf) {
      n.left = remap[static_cast<std::size_t>(n.left)];
      n.right = remap[static_cast<std::size_t>(n.right)];
    } else {
      n.left = n.right = -1;
    }
    out.nodes.push_back(n);
  }
  return out;
}

// Rows reaching every reachable node; unreachable nodes get an empty list.
inline void assign_members(const WorkTree& t, const TrainingSet& ts, int k, std::vector<std::uint32_t> rows,
                           std::vector<std::vector<std::uint32_t>>& members, std::vector<int>& depth, int d) {
  const auto& n = t.nodes[static_cast<std::size_t>(k)];
  depth[static_cast<std::size_t>(k)] = d;
  if (!n.leaf) {
    std::vector<std::uint32_t> l, r;
    for (std::uint32_t i : rows) (n.goes_left(ts.value(n.feature, i)) ? l : r).push_back(i);
    assign_members(t, ts, n.left, std::move(l), members, depth, d + 1);
    assign_members(t, ts, n.right, std::move(r), members, depth, d + 1);
  }
  members[static_cast<std::size_t>(k)] = std::move(rows);
}

struct Membership {
  std::vector<std::vector<std::uint32_t>> rows;
  std::vector<int> depth;  // -1 for unreachable nodes
};

inline Membership membership(const WorkTree& t, const TrainingSet& ts) {
  Membership m;
  m.rows.resize(t.nodes.size());
  m.depth.assign(t.nodes.size(), -1);
  std::vector<std::uint32_t> all(ts.size());
  std::iota(all.begin(), all.end(), std::uint32_t{0});
  assign_members(t, ts, 0, std::move(all), m.rows, m.depth, 0);
  return m;
}

struct SubtreeCost {
  double partial = 0.0;
  std::size_t splits = 0;
  bool feasible = true;  // every leaf holds at least min_bucket rows
};

inline SubtreeCost subtree_cost(const WorkTree& t, int k, const TrainingSet& ts,
                                std::span<const std::uint32_t> rows, std::size_t min_bucket) {
  std::vector<int> nodes;
  preorder(t, k, nodes);
  std::vector<Stat> stats(t.nodes.size());
  for (std::uint32_t i : rows) {
    auto& st = stats[static_cast<std::size_t>(descend(t, k, ts, i))];
    st.d += ts.event_weight(i);
    st.s += ts.hazard_weight(i);
    ++st.n;
  }
  SubtreeCost c;
  for (int node : nodes) {
    const auto& n = t.nodes[static_cast<std::size_t>(node)];
    if (!n.leaf) {
      ++c.splits;
      continue;
    }
    const auto& st = stats[static_cast<std::size_t>(node)];
    if (st.n < min_bucket) c.feasible = false;
    c.partial += partial_loss(st.d, st.s);
  }
  return c;
}

// Penalised objective up to the partition-independent constant.
inline double partial_objective(const WorkTree& t, const TrainingSet& ts, double alpha) {
  std::vector<std::uint32_t> all(ts.size());
  std::iota(all.begin(), all.end(), std::uint32_t{0});
  const auto c = subtree_cost(t, 0, ts, all, 1);
  return c.partial + alpha * static_cast<double>(c.splits);
}

struct SearchParams {
  int max_depth = 5;
  std::size_t min_bucket = 1;
  double alpha = 0.0;
  int restarts = 10;
  bool local_search = true;
};

inline void grow_node(WorkTree& t, int k, const TrainingSet& ts, std::vector<std::uint32_t> rows, int depth,
                      const SearchParams& p, std::span<const std::size_t> features, SweepBuilder& builder) {
  if (depth >= p.max_depth) return;
  auto cand = best_split(ts, rows, p.min_bucket, features, builder);
  if (!cand || cand->decrease <= p.alpha + improvement_tolerance(p.alpha)) return;
  std::vector<std::uint32_t> l, r;
  for (std::uint32_t i : rows) (cand->split.goes_left(ts.value(cand->split.feature, i)) ? l : r).push_back(i);
  const auto left = static_cast<std::int32_t>(t.nodes.size());
  t.nodes.push_back(WorkNode{});
  t.nodes.push_back(WorkNode{});
  auto& n = t.nodes[static_cast<std::size_t>(k)];
  n.set_split(cand->split);
  n.left = left;
  n.right = left + 1;
  rows.clear();
  rows.shrink_to_fit();
  grow_node(t, left, ts, std::move(l), depth + 1, p, features, builder);
  grow_node(t, left + 1, ts, std::move(r), depth + 1, p, features, builder);
}

inline WorkTree greedy_tree(const TrainingSet& ts, const SearchParams& p) {
  WorkTree t;
  SweepBuilder builder(ts);
  const auto features = all_features(ts);
  std::vector<std::uint32_t> all(ts.size());
  std::iota(all.begin(), all.end(), std::uint32_t{0});
  grow_node(t, 0, ts, std::move(all), 0, p, features, builder);
  return compact(t);
}

// Random feasible tree: the root always splits, deeper nodes with
// probability 1/2.
inline void random_node(WorkTree& t, int k, const TrainingSet& ts, const std::vector<std::uint32_t>& rows, int depth,
                        const SearchParams& p, std::mt19937_64& rng, SweepBuilder& builder) {
  if (depth >= p.max_depth || rows.size() < 2 * p.min_bucket) return;
  if (depth > 0 && std::bernoulli_distribution(0.5)(rng) == false) return;
  std::vector<std::size_t> features = all_features(ts);
  std::shuffle(features.begin(), features.end(), rng);
  Sweep sw;
  for (std::size_t f : features) {
    builder.build(f, rows, sw);
    std::vector<std::size_t> feasible;
    std::size_t count = 0;
    for (std::size_t g = 0; g + 1 < sw.group_end.size(); ++g) {
      count = sw.group_end[g];
      if (count >= p.min_bucket && rows.size() - count >= p.min_bucket) feasible.push_back(g);
    }
    if (feasible.empty()) continue;
    // Nominal groups arrive in theta order; a random boundary over that order
    // is enough to seed the search.
    const std::size_t g = feasible[std::uniform_int_distribution<std::size_t>(0, feasible.size() - 1)(rng)];
    const Split s = make_split(ts, f, sw, g);
    std::vector<std::uint32_t> l, r;
    for (std::uint32_t i : rows) (s.goes_left(ts.value(f, i)) ? l : r).push_back(i);
    const auto left = static_cast<std::int32_t>(t.nodes.size());
    t.nodes.push_back(WorkNode{});
    t.nodes.push_back(WorkNode{});
    auto& n = t.nodes[static_cast<std::size_t>(k)];
    n.set_split(s);
    n.left = left;
    n.right = left + 1;
    random_node(t, left, ts, l, depth + 1, p, rng, builder);
    random_node(t, left + 1, ts, r, depth + 1, p, rng, builder);
    return;
  }
}

inline WorkTree random_tree(const TrainingSet& ts, const SearchParams& p, std::mt19937_64& rng) {
  WorkTree t;
  SweepBuilder builder(ts);
  std::vector<std::uint32_t> all(ts.size());
  std::iota(all.begin(), all.end(), std::uint32_t{0});
  random_node(t, 0, ts, all, 0, p, rng, builder);
  return compact(t);
}

// Per-leaf (D, S, n) accumulator for a fixed subtree while rows migrate into
// or out of it. Loss terms are refreshed lazily by commit().
class LeafAccumulator {
 public:
  void reset(std::size_t leaves, std::size_t min_bucket) {
    d_.assign(leaves, 0.0);
    s_.assign(leaves, 0.0);
    n_.assign(leaves, 0);
    term_.assign(leaves, 0.0);
    dirty_flag_.assign(leaves, 0);
    ok_.assign(leaves, min_bucket == 0);
    dirty_.clear();
    partial_ = 0.0;
    min_bucket_ = min_bucket;
    short_ = min_bucket > 0 ? leaves : 0;
  }

  void add(std::size_t slot, double d, double s) {
    d_[slot] += d;
    s_[slot] += s;
    ++n_[slot];
    touch(slot);
  }

  void remove(std::size_t slot, double d, double s) {
    d_[slot] -= d;
    s_[slot] -= s;
    --n_[slot];
    if (n_[slot] == 0) d_[slot] = s_[slot] = 0.0;
    touch(slot);
  }

  void commit() {
    for (std::size_t slot : dirty_) {
      dirty_flag_[slot] = 0;
      partial_ -= term_[slot];
      term_[slot] = partial_loss(d_[slot], s_[slot]);
      partial_ += term_[slot];
      const bool ok = n_[slot] >= min_bucket_;
      if (ok != ok_[slot]) {
        ok_[slot] = ok;
        if (ok) --short_;
        else ++short_;
      }
    }
    dirty_.clear();
  }

  double partial() const { return partial_; }
  bool feasible() const { return short_ == 0; }

 private:
  void touch(std::size_t slot) {
    if (dirty_flag_[slot]) return;
    dirty_flag_[slot] = 1;
    dirty_.push_back(slot);
  }

  std::vector<double> d_, s_, term_;
  std::vector<std::uint32_t> n_;
  std::vector<char> dirty_flag_;
  std::vector<bool> ok_;
  std::vector<std::size_t> dirty_;
  double partial_ = 0.0;
  std::size_t min_bucket_ = 1;
  std::size_t short_ = 0;
};

enum class MoveKind { none, collapse, lift_left, lift_right, resplit, grow };

struct Move {
  MoveKind kind = MoveKind::none;
  double cost = std::numeric_limits<double>::infinity();
  Split split;
  bool swap_children = false;
};

class LocalSearch {
 public:
  LocalSearch(const TrainingSet& ts, const SearchParams& p)
      : ts_(ts), p_(p), builder_(ts), features_(all_features(ts)) {}

  // Runs passes over the nodes in shuffled order until one makes no change.
  // `trace` receives the partial objective after every accepted move.
  WorkTree run(WorkTree tree, std::mt19937_64& rng, std::vector<double>* trace) {
    double current = partial_objective(tree, ts_, p_.alpha);
    if (trace) trace->push_back(current);
    constexpr int kMaxPasses = 200;
    for (int pass = 0; pass < kMaxPasses; ++pass) {
      auto m = membership(tree, ts_);
      std::vector<int> order;
      preorder(tree, 0, order);
      std::shuffle(order.begin(), order.end(), rng);
      bool changed = false;
      for (int k : order) {
        if (m.depth[static_cast<std::size_t>(k)] < 0) continue;
        const Move mv = best_move(tree, k, m.rows[static_cast<std::size_t>(k)], m.depth[static_cast<std::size_t>(k)]);
        if (mv.kind == MoveKind::none) continue;
        WorkTree candidate = tree;
        apply(candidate, k, mv);
        const double next = partial_objective(candidate, ts_, p_.alpha);
        if (!(next < current - improvement_tolerance(current))) continue;
        tree = std::move(candidate);
        current = next;
        if (trace) trace->push_back(current);
        changed = true;
        m = membership(tree, ts_);
      }
      tree = compact(tree);
      if (!changed) break;
    }
    return tree;
  }

 private:
  Move best_move(const WorkTree& t, int k, const std::vector<std::uint32_t>& rows, int depth) {
    Move best;
    const auto& node = t.nodes[static_cast<std::size_t>(k)];
    auto offer_below = [&best](double threshold) {
      return [&best, threshold](Move m) {
        if (m.cost < threshold && m.cost < best.cost) best = std::move(m);
      };
    };
    if (node.leaf) {
      if (depth >= p_.max_depth) return best;
      const Stat all = node_stat(ts_, rows);
      const double current = partial_loss(all.d, all.s);
      auto offer = offer_below(current - 1e-9 * (1.0 + std::abs(current)));
      if (auto cand = best_split(ts_, rows, p_.min_bucket, features_, builder_)) {
        Move m;
        m.kind = MoveKind::grow;
        m.cost = current - cand->decrease + p_.alpha;
        m.split = cand->split;
        offer(std::move(m));
      }
      return best;
    }
    scan_internal(t, k, rows, offer_below);
    return best;
  }

  // Collapse, lift either child, or replace the split at k while keeping both
  // child subtrees (either orientation, every feature and boundary).
  template <class OfferBelow>
  void scan_internal(const WorkTree& t, int k, const std::vector<std::uint32_t>& rows, OfferBelow& offer_below) {
    const auto& node = t.nodes[static_cast<std::size_t>(k)];
    const int child[2] = {node.left, node.right};
    std::vector<std::int32_t> slot_of(t.nodes.size(), -1);
    std::size_t leaves[2] = {0, 0};
    std::size_t child_splits[2] = {0, 0};
    for (int c = 0; c < 2; ++c) {
      std::vector<int> sub;
      preorder(t, child[c], sub);
      for (int s : sub) {
        if (t.nodes[static_cast<std::size_t>(s)].leaf) slot_of[static_cast<std::size_t>(s)] = static_cast<std::int32_t>(leaves[c]++);
        else ++child_splits[c];
      }
    }
    const std::size_t n = rows.size();
    std::vector<std::uint32_t> slot[2] = {std::vector<std::uint32_t>(n), std::vector<std::uint32_t>(n)};
    LeafAccumulator full[2], empty[2], now[2];
    for (int c = 0; c < 2; ++c) {
      full[c].reset(leaves[c], p_.min_bucket);
      empty[c].reset(leaves[c], p_.min_bucket);
    }
    now[0] = empty[0];
    now[1] = empty[1];
    Stat all;
    for (std::size_t p = 0; p < n; ++p) {
      const std::uint32_t i = rows[p];
      const double d = ts_.event_weight(i), s = ts_.hazard_weight(i);
      all.d += d;
      all.s += s;
      for (int c = 0; c < 2; ++c) {
        slot[c][p] = static_cast<std::uint32_t>(slot_of[static_cast<std::size_t>(descend(t, child[c], ts_, i))]);
        full[c].add(slot[c][p], d, s);
      }
      const int side = node.goes_left(ts_.value(node.feature, i)) ? 0 : 1;
      now[side].add(slot[side][p], d, s);
    }
    for (int c = 0; c < 2; ++c) {
      full[c].commit();
      now[c].commit();
    }
    const std::size_t splits = 1 + child_splits[0] + child_splits[1];
    const double penalty = p_.alpha * static_cast<double>(splits);
    const double current = now[0].partial() + now[1].partial() + penalty;
    auto offer = offer_below(current - 1e-9 * (1.0 + std::abs(current)));

    offer(Move{MoveKind::collapse, partial_loss(all.d, all.s), {}, false});
    const MoveKind lift[2] = {MoveKind::lift_left, MoveKind::lift_right};
    for (int c = 0; c < 2; ++c)
      if (full[c].feasible())
        offer(Move{lift[c], full[c].partial() + p_.alpha * static_cast<double>(child_splits[c]), {}, false});

    Sweep sw;
    LeafAccumulator acc[2];
    for (std::size_t f : features_) {
      builder_.build(f, rows, sw);
      if (sw.group_end.size() < 2) continue;
      for (int orient = 0; orient < 2; ++orient) {
        // Rows with goes_left() true land in subtree `to`; the rest in `from`.
        const int to = orient == 0 ? 0 : 1;
        const int from = 1 - to;
        acc[to] = empty[to];
        acc[from] = full[from];
        std::size_t q = 0;
        for (std::size_t g = 0; g + 1 < sw.group_end.size(); ++g) {
          for (; q < sw.group_end[g]; ++q) {
            const std::uint32_t p = sw.order[q];
            const double d = ts_.event_weight(rows[p]), s = ts_.hazard_weight(rows[p]);
            acc[from].remove(slot[from][p], d, s);
            acc[to].add(slot[to][p], d, s);
          }
          acc[0].commit();
          acc[1].commit();
          if (!acc[0].feasible() || !acc[1].feasible()) continue;
          Move m;
          m.kind = MoveKind::resplit;
          m.cost = acc[0].partial() + acc[1].partial() + penalty;
          m.split = make_split(ts_, f, sw, g);
          m.swap_children = orient == 1;
          offer(std::move(m));
        }
      }
    }
  }

  void apply(WorkTree& t, int k, const Move& mv) {
    auto& node = t.nodes[static_cast<std::size_t>(k)];
    switch (mv.kind) {
      case MoveKind::collapse:
        node.leaf = true;
        node.left = node.right = -1;
        break;
      case MoveKind::lift_left:
      case MoveKind::lift_right: {
        const int child = mv.kind == MoveKind::lift_left ? node.left : node.right;
        t.nodes[static_cast<std::size_t>(k)] = t.nodes[static_cast<std::size_t>(child)];
        break;
      }
      case MoveKind::resplit: {
        const auto l = node.left, r = node.right;
        node.set_split(mv.split);
        node.left = mv.swap_children ? r : l;
        node.right = mv.swap_children ? l : r;
        break;
      }
      case MoveKind::grow: {
        const auto left = static_cast<std::int32_t>(t.nodes.size());
        t.nodes.push_back(WorkNode{});
        t.nodes.push_back(WorkNode{});
        auto& n = t.nodes[static_cast<std::size_t>(k)];
        n.set_split(mv.split);
        n.left = left;
        n.right = left + 1;
        break;
      }
      case MoveKind::none:
        break;
    }
  }

  const TrainingSet& ts_;
  SearchParams p_;
  SweepBuilder builder_;
  std::vector<std::size_t> features_;
};

inline std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

struct RefineOutcome {
  WorkTree tree;
  std::vector<double> trace;  // of the start that won
  int winning_start = 0;      // 0 = the given tree, r + 1 = restart r
};

inline RefineOutcome refine(const WorkTree& start, const TrainingSet& ts, const SearchParams& p, std::uint64_t seed) {
  LocalSearch search(ts, p);
  RefineOutcome out;
  auto rng = derived_rng(seed, 100);
  out.tree = search.run(start, rng, &out.trace);
  double best = partial_objective(out.tree, ts, p.alpha);
  for (int r = 0; r < p.restarts; ++r) {
    auto rr = derived_rng(seed, 200, static_cast<std::uint64_t>(r));
    std::vector<double> trace;
    WorkTree t = search.run(random_tree(ts, p, rr), rr, &trace);
    const double obj = partial_objective(t, ts, p.alpha);
    if (obj < best - improvement_tolerance(best)) {
      best = obj;
      out.tree = std::move(t);
      out.trace = std::move(trace);
      out.winning_start = r + 1;
    }
  }
  return out;
}

inline WorkTree build_tree(const TrainingSet& ts, const SearchParams& p, std::uint64_t seed) {
  WorkTree greedy = greedy_tree(ts, p);
  if (!p.local_search) return greedy;
  return refine(greedy, ts, p, seed).tree;
}

// Weakest-link pruning over fixed node ids: each step lists which nodes are
// leaves. Step 0 is the full tree at alpha 0.
struct PruneStep {
  double alpha = 0.0;
  std::vector<char> leaf;
};

inline void reachable_preorder(const WorkTree& t, const std::vector<char>& leaf, int k, std::vector<int>& out) {
  out.push_back(k);
  if (leaf[static_cast<std::size_t>(k)]) return;
  reachable_preorder(t, leaf, t.nodes[static_cast<std::size_t>(k)].left, out);
  reachable_preorder(t, leaf, t.nodes[static_cast<std::size_t>(k)].right, out);
}

inline std::vector<PruneStep> prune_sequence(const WorkTree& t, const std::vector<Stat>& stats) {
  std::vector<PruneStep> steps;
  PruneStep cur;
  cur.leaf.resize(t.nodes.size());
  for (std::size_t k = 0; k < t.nodes.size(); ++k) cur.leaf[k] = t.nodes[k].leaf;
  steps.push_back(cur);
  std::vector<double> sub(t.nodes.size());
  std::vector<std::size_t> splits(t.nodes.size());
  std::vector<double> g(t.nodes.size());
  while (!cur.leaf[0]) {
    std::vector<int> order;
    reachable_preorder(t, cur.leaf, 0, order);
    // Children follow parents in preorder, so a reverse sweep is bottom-up.
    double gmin = std::numeric_limits<double>::infinity();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const auto k = static_cast<std::size_t>(*it);
      const double own = partial_loss(stats[k].d, stats[k].s);
      if (cur.leaf[k]) {
        sub[k] = own;
        splits[k] = 0;
        continue;
      }
      const auto l = static_cast<std::size_t>(t.nodes[k].left), r = static_cast<std::size_t>(t.nodes[k].right);
      sub[k] = sub[l] + sub[r];
      splits[k] = 1 + splits[l] + splits[r];
      g[k] = (own - sub[k]) / static_cast<double>(splits[k]);
      gmin = std::min(gmin, g[k]);
    }
    const double tol = 1e-12 * (1.0 + std::abs(gmin));
    std::vector<char> hidden(t.nodes.size(), 0);
    for (int node : order) {
      const auto k = static_cast<std::size_t>(node);
      if (cur.leaf[k]) continue;
      const auto l = static_cast<std::size_t>(t.nodes[k].left), r = static_cast<std::size_t>(t.nodes[k].right);
      if (hidden[k]) {
        hidden[l] = hidden[r] = 1;
        continue;
      }
      if (g[k] <= gmin + tol) {
        cur.leaf[k] = 1;
        hidden[l] = hidden[r] = 1;
      }
    }
    // Descendants of a collapsed node keep their flags; they are unreachable.
    cur.alpha = std::max(steps.back().alpha, gmin);
    if (cur.alpha == steps.back().alpha && steps.size() > 1) steps.back() = cur;
    else steps.push_back(cur);
  }
  return steps;
}

inline std::size_t step_for_alpha(const std::vector<PruneStep>& steps, double alpha) {
  std::size_t idx = 0;
  for (std::size_t s = 0; s < steps.size(); ++s)
    if (steps[s].alpha <= alpha) idx = s;
  return idx;
}

inline WorkTree apply_step(const WorkTree& t, const PruneStep& step) {
  WorkTree out = t;
  for (std::size_t k = 0; k < t.nodes.size(); ++k)
    if (step.leaf[k] && !out.nodes[k].leaf) {
      out.nodes[k].leaf = true;
      out.nodes[k].left = out.nodes[k].right = -1;
    }
  return compact(out);
}

inline std::vector<Stat> node_stats(const WorkTree& t, const Membership& m, const TrainingSet& ts) {
  std::vector<Stat> stats(t.nodes.size());
  for (std::size_t k = 0; k < t.nodes.size(); ++k) stats[k] = node_stat(ts, m.rows[k]);
  return stats;
}

inline Leaf summarize_leaf(const TrainingSet& ts, std::span<const std::uint32_t> rows, double horizon) {
  Leaf leaf;
  std::vector<CensoredObservation> obs;
  obs.reserve(rows.size());
  double d = 0.0, s = 0.0;
  for (std::uint32_t i : rows) {
    obs.push_back(ts.observations()[i]);
    d += ts.event_weight(i);
    s += ts.hazard_weight(i);
  }
  leaf.n_train = rows.size();
  leaf.theta = s > 0.0 ? d / s : 0.0;
  if (!obs.empty()) {
    leaf.curve = kaplan_meier(obs);
    leaf.expected_survival = restricted_mean_survival(leaf.curve, horizon);
  } else {
    leaf.expected_survival = horizon;
  }
  return leaf;
}

inline SurvivalTree finalize(const WorkTree& work, const TrainingSet& ts, const FitParams& params, double horizon) {
  const WorkTree t = compact(work);
  const auto m = membership(t, ts);
  SurvivalTree out;
  out.schema = ts.schema();
  out.fit = params;
  out.horizon = horizon;
  for (std::size_t k = 0; k < t.nodes.size(); ++k) {
    const auto& n = t.nodes[k];
    TreeNode node;
    if (n.leaf) {
      node.body = summarize_leaf(ts, m.rows[k], horizon);
    } else {
      Split s;
      s.feature = n.feature;
      s.kind = n.nominal ? FeatureKind::nominal : FeatureKind::numeric;
      s.threshold = n.nominal ? 0.0 : n.threshold;
      if (n.nominal)
        for (std::size_t l = 0; l < 64; ++l)
          if ((n.left_mask >> l) & 1u) s.left_levels.push_back(l);
      const auto nl = m.rows[static_cast<std::size_t>(n.left)].size();
      const auto nr = m.rows[static_cast<std::size_t>(n.right)].size();
      s.missing = nl >= nr ? Branch::left : Branch::right;
      node.body = std::move(s);
      node.left = n.left;
      node.right = n.right;
    }
    out.nodes.push_back(std::move(node));
  }
  return out;
}

inline WorkTree to_work(const SurvivalTree& tree) {
  WorkTree t;
  t.nodes.clear();
  for (const auto& n : tree.nodes) {
    WorkNode w;
    if (!n.is_leaf()) {
      w.set_split(n.split());
      w.left = n.left;
      w.right = n.right;
    }
    t.nodes.push_back(w);
  }
  return t;
}

inline SearchParams search_params(const FitConfig& config, std::size_t n_train, double alpha) {
  SearchParams p;
  p.max_depth = config.max_depth;
  p.min_bucket = resolve_min_bucket(config, n_train);
  p.alpha = alpha;
  p.restarts = config.restarts;
  p.local_search = config.local_search;
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public learning operations

inline std::optional<SplitCandidate> best_split(const TrainingSet& ts, std::span<const std::uint32_t> members,
                                                std::size_t min_bucket, std::span<const std::size_t> features = {}) {
  detail::SweepBuilder builder(ts);
  // Scanning in ascending index order makes ties go to the lower feature.
  std::vector<std::size_t> order = features.empty() ? detail::all_features(ts)
                                                    : std::vector<std::size_t>(features.begin(), features.end());
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());
  return detail::best_split(ts, members, min_bucket, order, builder);
}

// Deficits of every leaf plus alpha per split, on the training rows.
inline double penalized_loss(const SurvivalTree& tree, const TrainingSet& ts, double alpha) {
  return detail::partial_objective(detail::to_work(tree), ts, alpha) - ts.log_term();
}

inline SurvivalTree grow_greedy(const TrainingSet& ts, const FitConfig& config) {
  config.validate();
  const std::size_t mb = resolve_min_bucket(config, ts.size());
  if (ts.size() < mb)
    throw ConfigError("training set of " + std::to_string(ts.size()) + " rows is smaller than min_bucket " +
                      std::to_string(mb));
  const auto p = detail::search_params(config, ts.size(), config.alpha.value_or(0.0));
  return detail::finalize(detail::greedy_tree(ts, p), ts, {config.max_depth, mb, p.alpha, config.seed},
                          config.horizon);
}

struct RefineResult {
  SurvivalTree tree;
  std::vector<double> objective_trace;  // penalized loss after each accepted move
  int winning_start = 0;                // 0 = the given tree, r + 1 = random restart r
};

// Local search from `tree`, then from config.restarts random trees; the best
// penalised loss wins, ties going to the given tree.
inline RefineResult local_search_refine(const SurvivalTree& tree, const TrainingSet& ts, const FitConfig& config) {
  config.validate();
  const double alpha = config.alpha.value_or(tree.fit.alpha);
  const auto p = detail::search_params(config, ts.size(), alpha);
  auto outcome = detail::refine(detail::to_work(tree), ts, p, config.seed);
  RefineResult r;
  r.tree = detail::finalize(outcome.tree, ts, {config.max_depth, p.min_bucket, alpha, config.seed}, config.horizon);
  for (double v : outcome.trace) r.objective_trace.push_back(v - ts.log_term());
  r.winning_start = outcome.winning_start;
  return r;
}

struct PrunedSubtree {
  double alpha_low = 0.0;  // subtree is optimal for alpha in [alpha_low, alpha_high)
  double alpha_high = std::numeric_limits<double>::infinity();
  SurvivalTree tree;
};

inline std::vector<PrunedSubtree> prune_path(const SurvivalTree& tree, const TrainingSet& ts) {
  const auto work = detail::to_work(tree);
  const auto m = detail::membership(work, ts);
  const auto steps = detail::prune_sequence(work, detail::node_stats(work, m, ts));
  std::vector<PrunedSubtree> out;
  for (std::size_t s = 0; s < steps.size(); ++s) {
    PrunedSubtree p;
    p.alpha_low = steps[s].alpha;
    if (s + 1 < steps.size()) p.alpha_high = steps[s + 1].alpha;
    FitParams params = tree.fit;
    params.alpha = steps[s].alpha;
    p.tree = detail::finalize(detail::apply_step(work, steps[s]), ts, params, tree.horizon);
    out.push_back(std::move(p));
  }
  return out;
}

struct FitReportRow {
  int max_depth = 0;
  double tuned_alpha = 0.0;
  std::optional<double> c_train;
  std::optional<double> c_test;
  std::string c_test_error;  // set when the test split has no permissible pairs
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t min_bucket = 0;
  std::size_t splits = 0;
  std::size_t leaves = 0;
};

struct FitResult {
  SurvivalTree tree;
  FitReportRow row;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

inline std::optional<double> try_harrell_c(std::span<const CensoredObservation> obs, std::span<const double> pred,
                                           std::string* error = nullptr) {
  try {
    return harrell_c(obs, pred).c_index;
  } catch (const UndefinedConcordance& e) {
    if (error) *error = e.what();
    return std::nullopt;
  }
}

namespace detail {

// Mean validation Harrell's C per candidate alpha over K folds of the training
// rows; returns the best alpha, ties going to the larger one.
inline double cross_validate_alpha(const Dataset& data, std::span<const std::size_t> train_rows,
                                   const FitConfig& config, std::size_t min_bucket,
                                   const std::vector<double>& candidates) {
  if (candidates.size() <= 1) return candidates.empty() ? 0.0 : candidates.front();
  const std::size_t k_folds = static_cast<std::size_t>(config.cv_folds);
  std::vector<std::size_t> shuffled(train_rows.begin(), train_rows.end());
  auto rng = derived_rng(config.seed, 2);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::vector<double> sum(candidates.size(), 0.0);
  std::vector<int> defined(candidates.size(), 0);
  for (std::size_t fold = 0; fold < k_folds; ++fold) {
    std::vector<std::size_t> fit_rows, val_rows;
    for (std::size_t p = 0; p < shuffled.size(); ++p) (p % k_folds == fold ? val_rows : fit_rows).push_back(shuffled[p]);
    std::sort(fit_rows.begin(), fit_rows.end());
    std::sort(val_rows.begin(), val_rows.end());
    if (fit_rows.size() < min_bucket || val_rows.empty()) continue;
    TrainingSet fts(data, fit_rows);
    SearchParams p;
    p.max_depth = config.max_depth;
    p.min_bucket = min_bucket;
    p.alpha = 0.0;
    p.restarts = config.restarts;
    p.local_search = config.local_search;
    const WorkTree tree = build_tree(fts, p, config.seed + 7919 * (fold + 1));
    // The deficit grows with sample size; shrink alpha to the fold's scale.
    const double scale = static_cast<double>(fit_rows.size()) / static_cast<double>(train_rows.size());
    const auto m = membership(tree, fts);
    const auto steps = prune_sequence(tree, node_stats(tree, m, fts));
    std::vector<double> node_value(tree.nodes.size(), config.horizon);
    for (std::size_t k = 0; k < tree.nodes.size(); ++k)
      if (!m.rows[k].empty()) node_value[k] = summarize_leaf(fts, m.rows[k], config.horizon).expected_survival;

    std::vector<CensoredObservation> val_obs;
    for (std::size_t r : val_rows) val_obs.push_back(data.observations[r]);
    std::vector<double> pred(val_rows.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const auto& step = steps[step_for_alpha(steps, candidates[c] * scale)];
      for (std::size_t v = 0; v < val_rows.size(); ++v) {
        int k = 0;
        while (!step.leaf[static_cast<std::size_t>(k)]) {
          const auto& n = tree.nodes[static_cast<std::size_t>(k)];
          k = n.goes_left(data.columns[n.feature][val_rows[v]]) ? n.left : n.right;
        }
        pred[v] = node_value[static_cast<std::size_t>(k)];
      }
      if (auto cval = try_harrell_c(val_obs, pred)) {
        sum[c] += *cval;
        ++defined[c];
      }
    }
  }
  double best_alpha = candidates.front();
  double best_c = -1.0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const double mean = defined[c] > 0 ? sum[c] / defined[c] : 0.5;
    if (mean >= best_c) {
      best_c = mean;
      best_alpha = candidates[c];
    }
  }
  return best_alpha;
}

}  // namespace detail

// Seeded split into train/test, fit on train, score both sides.
inline FitResult fit(const Dataset& data, const FitConfig& config) {
  config.validate();
  const std::size_t n = data.size();
  if (n < 2) throw ConfigError("dataset needs at least two rows");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto rng = detail::derived_rng(config.seed, 1);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(config.train_fraction * static_cast<double>(n))), 1, n - 1);
  FitResult result;
  result.train_rows.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  result.test_rows.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(result.train_rows.begin(), result.train_rows.end());
  std::sort(result.test_rows.begin(), result.test_rows.end());

  const std::size_t mb = resolve_min_bucket(config, n_train);
  if (n_train < mb)
    throw ConfigError("training split of " + std::to_string(n_train) + " rows is smaller than min_bucket " +
                      std::to_string(mb));
  TrainingSet ts(data, result.train_rows);

  double alpha = config.alpha.value_or(0.0);
  const auto params = detail::search_params(config, n_train, alpha);
  const detail::WorkTree full = detail::build_tree(ts, params, config.seed);
  const auto m = detail::membership(full, ts);
  const auto steps = detail::prune_sequence(full, detail::node_stats(full, m, ts));
  if (!config.alpha) {
    // One representative per interval: the geometric midpoint, 0 for the
    // first and infinity for the unbounded last, so folds prune to their root.
    std::vector<double> candidates;
    for (std::size_t k = 0; k < steps.size(); ++k)
      candidates.push_back(k == 0 ? 0.0
                           : k + 1 == steps.size() ? std::numeric_limits<double>::infinity()
                                                   : std::sqrt(steps[k].alpha * steps[k + 1].alpha));
    alpha = detail::cross_validate_alpha(data, result.train_rows, config, mb, candidates);
    if (std::isinf(alpha)) alpha = steps.back().alpha;
  }
  const auto pruned = detail::apply_step(full, steps[detail::step_for_alpha(steps, alpha)]);
  result.tree = detail::finalize(pruned, ts, {config.max_depth, mb, alpha, config.seed}, config.horizon);

  auto score = [&](const std::vector<std::size_t>& rows, std::string* err) {
    const Dataset part = data.subset(rows);
    return try_harrell_c(part.observations, predict_expected_survival(result.tree, part), err);
  };
  auto& row = result.row;
  row.max_depth = config.max_depth;
  row.tuned_alpha = alpha;
  row.c_train = score(result.train_rows, nullptr);
  row.c_test = score(result.test_rows, &row.c_test_error);
  row.n_train = result.train_rows.size();
  row.n_test = result.test_rows.size();
  row.min_bucket = mb;
  row.splits = result.tree.split_count();
  row.leaves = result.tree.leaf_count();
  return result;
}

struct ReseedDiff {
  std::uint64_t seed_a = 0, seed_b = 0;
  std::vector<std::size_t> features_a, features_b;
  std::vector<std::size_t> shared, only_a, only_b;
  std::optional<double> c_test_a, c_test_b;
  std::optional<double> c_test_abs_diff;
  FitResult fit_a, fit_b;

  bool empty() const { return only_a.empty() && only_b.empty(); }
};

struct FitReport {
  std::vector<FitReportRow> per_depth;
  int chosen_depth = 0;
  SurvivalTree chosen_tree;
  std::uint64_t seed = 0;
  std::optional<ReseedDiff> reseed_comparison;
  std::vector<std::size_t> train_rows, test_rows;  // shared by every depth
};

// The depth ending the largest consecutive rise in test C; the first grid
// point is measured against 0.5. Ties go to the smaller depth.
inline int choose_depth(const std::vector<FitReportRow>& rows) {
  int chosen = rows.front().max_depth;
  double best_jump = -std::numeric_limits<double>::infinity();
  double prev = 0.5;
  for (const auto& r : rows) {
    const double c = r.c_test.value_or(0.5);
    const double jump = c - prev;
    if (jump > best_jump + 1e-12) {
      best_jump = jump;
      chosen = r.max_depth;
    }
    prev = c;
  }
  return chosen;
}

inline FitReport tune_max_depth(const Dataset& data, std::span<const int> depths, const FitConfig& config) {
  if (depths.empty()) throw ConfigError("depth grid is empty");
  for (std::size_t i = 1; i < depths.size(); ++i)
    if (depths[i] <= depths[i - 1]) throw ConfigError("depth grid must be strictly increasing");
  FitReport report;
  report.seed = config.seed;
  std::vector<SurvivalTree> trees;
  for (int d : depths) {
    FitConfig c = config;
    c.max_depth = d;
    auto r = fit(data, c);
    if (report.train_rows.empty()) {
      report.train_rows = r.train_rows;
      report.test_rows = r.test_rows;
    }
    report.per_depth.push_back(r.row);
    trees.push_back(std::move(r.tree));
  }
  report.chosen_depth = choose_depth(report.per_depth);
  for (std::size_t i = 0; i < depths.size(); ++i)
    if (depths[i] == report.chosen_depth) report.chosen_tree = trees[i];
  return report;
}

inline ReseedDiff reseed_check(const Dataset& data, const FitConfig& config, std::uint64_t seed_a,
                               std::uint64_t seed_b) {
  ReseedDiff diff;
  diff.seed_a = seed_a;
  diff.seed_b = seed_b;
  FitConfig ca = config, cb = config;
  ca.seed = seed_a;
  cb.seed = seed_b;
  diff.fit_a = fit(data, ca);
  diff.fit_b = seed_a == seed_b ? diff.fit_a : fit(data, cb);
  diff.features_a = diff.fit_a.tree.split_features();
  diff.features_b = diff.fit_b.tree.split_features();
  std::set_intersection(diff.features_a.begin(), diff.features_a.end(), diff.features_b.begin(),
                        diff.features_b.end(), std::back_inserter(diff.shared));
  std::set_difference(diff.features_a.begin(), diff.features_a.end(), diff.features_b.begin(),
                      diff.features_b.end(), std::back_inserter(diff.only_a));
  std::set_difference(diff.features_b.begin(), diff.features_b.end(), diff.features_a.begin(),
                      diff.features_a.end(), std::back_inserter(diff.only_b));
  diff.c_test_a = diff.fit_a.row.c_test;
  diff.c_test_b = diff.fit_b.row.c_test;
  if (diff.c_test_a && diff.c_test_b) diff.c_test_abs_diff = std::abs(*diff.c_test_a - *diff.c_test_b);
  return diff;
}

}  // namespace ost
