#pragma once

// Command-line front end. run_cli() is the whole program; main() only
// forwards argv so tests can drive every subcommand in process.
//
// Exit codes: 0 success, 1 usage or configuration, 2 data, 3 internal.

#include <openssl/evp.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ost/error.hpp"
#include "ost/learner.hpp"
#include "ost/pipeline.hpp"
#include "ost/plot.hpp"
#include "ost/synthgen.hpp"
#include "ost/tree.hpp"

namespace ost::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

inline int exit_code_for(Errc code) {
  switch (code) {
    case Errc::config_error:
      return kExitUsage;
    case Errc::invariant_violation:
      return kExitInternal;
    default:
      return kExitData;
  }
}

// ---------------------------------------------------------------------------
// Files and digests

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw InvariantViolation("SHA-256 digest failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

inline std::string format_c(const std::optional<double>& c) {
  if (!c) return "NA";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.4f", *c);
  return buf;
}

inline nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(round_sig12(*v)) : nlohmann::json(nullptr);
}

// ---------------------------------------------------------------------------
// Shared option sets

struct FitOptions {
  int max_depth = 5;
  std::uint64_t seed = 1;
  std::string alpha = "auto";
  std::optional<std::size_t> min_bucket;
  double train_fraction = 0.75;
  double horizon = 10.0;
  int restarts = 10;
  int cv_folds = 5;
  bool no_local_search = false;

  void attach(CLI::App& app, bool with_depth) {
    if (with_depth) app.add_option("--max-depth", max_depth, "Maximum tree depth")->capture_default_str();
    app.add_option("--seed", seed, "Random seed for the split, folds and search")->capture_default_str();
    app.add_option("--alpha", alpha, "Complexity penalty per split, or 'auto'")->capture_default_str();
    app.add_option("--min-bucket", min_bucket, "Minimum leaf size (default 1% of the training rows)");
    app.add_option("--train-frac", train_fraction, "Training fraction")->capture_default_str();
    app.add_option("--horizon", horizon, "Restricted-mean horizon in years")->capture_default_str();
    app.add_option("--restarts", restarts, "Random restarts for local search")->capture_default_str();
    app.add_option("--cv-folds", cv_folds, "Folds for alpha tuning")->capture_default_str();
    app.add_flag("--no-local-search", no_local_search, "Greedy growth only");
  }

  FitConfig config() const {
    FitConfig c;
    c.max_depth = max_depth;
    c.seed = seed;
    c.min_bucket = min_bucket;
    c.train_fraction = train_fraction;
    c.horizon = horizon;
    c.restarts = restarts;
    c.cv_folds = cv_folds;
    c.local_search = !no_local_search;
    if (alpha != "auto") {
      std::size_t used = 0;
      double a = 0;
      try {
        a = std::stod(alpha, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != alpha.size()) throw ConfigError("--alpha must be a number or 'auto', got '" + alpha + "'");
      c.alpha = a;
    }
    c.validate();
    return c;
  }
};

inline nlohmann::json config_json(const FitConfig& c, bool with_depth = true) {
  nlohmann::json j;
  if (with_depth) j["max_depth"] = c.max_depth;
  j["seed"] = c.seed;
  j["alpha"] = c.alpha ? nlohmann::json(round_sig12(*c.alpha)) : nlohmann::json("auto");
  j["min_bucket"] = c.min_bucket ? nlohmann::json(*c.min_bucket) : nlohmann::json("1% of training rows");
  j["train_fraction"] = round_sig12(c.train_fraction);
  j["horizon"] = round_sig12(c.horizon);
  j["restarts"] = c.restarts;
  j["cv_folds"] = c.cv_folds;
  j["local_search"] = c.local_search;
  return j;
}

inline nlohmann::json row_json(const FitReportRow& r) {
  nlohmann::json j{{"max_depth", r.max_depth},   {"tuned_alpha", round_sig12(r.tuned_alpha)},
                   {"c_train", optional_number(r.c_train)}, {"c_test", optional_number(r.c_test)},
                   {"n_train", r.n_train},       {"n_test", r.n_test},
                   {"min_bucket", r.min_bucket}, {"splits", r.splits},
                   {"leaves", r.leaves}};
  if (!r.c_test_error.empty()) j["c_test_error"] = r.c_test_error;
  return j;
}

inline std::vector<std::string> feature_names(const FeatureSchema& schema, const std::vector<std::size_t>& idx) {
  std::vector<std::string> out;
  for (std::size_t i : idx) out.push_back(schema[i].name);
  return out;
}

// Leaf survival curves of a tree as CSV rows and an SVG step chart.
inline std::string curves_csv(const SurvivalTree& tree, const std::string& comment) {
  std::ostringstream o;
  o << "# " << comment << "\n";
  o << "leaf_id,time,survival\n";
  for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
    if (!tree.nodes[k].is_leaf()) continue;
    const auto& c = tree.nodes[k].leaf().curve;
    o << k << ",0,1\n";
    for (std::size_t i = 0; i < c.jump_times.size(); ++i)
      o << k << ',' << format_number(round_sig12(c.jump_times[i])) << ',' << format_number(round_sig12(c.values[i]))
        << '\n';
  }
  return o.str();
}

inline std::string curves_svg(const SurvivalTree& tree, const std::string& comment) {
  plot::Chart chart;
  chart.title = "Leaf survival curves";
  chart.x_label = "Years of operation";
  chart.y_label = "Survival probability";
  chart.x_max = tree.horizon;
  chart.x_ticks = plot::nice_ticks(0, tree.horizon);
  chart.y_ticks = plot::nice_ticks(0, 1, 5);
  chart.metadata = comment;
  for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
    if (!tree.nodes[k].is_leaf()) continue;
    const auto& leaf = tree.nodes[k].leaf();
    char label[64];
    std::snprintf(label, sizeof label, "leaf %zu (%.1f y)", k, leaf.expected_survival);
    plot::Series s{label, {0.0}, {1.0}, true};
    for (std::size_t i = 0; i < leaf.curve.jump_times.size(); ++i) {
      s.x.push_back(leaf.curve.jump_times[i]);
      s.y.push_back(leaf.curve.values[i]);
    }
    s.x.push_back(tree.horizon);
    s.y.push_back(s.y.back());
    chart.series.push_back(std::move(s));
  }
  return plot::render_svg(chart);
}

inline std::string depth_csv(const FitReport& rep, const std::string& comment) {
  std::ostringstream o;
  o << "# " << comment << "\n";
  o << "max_depth,tuned_alpha,c_train,c_test,chosen\n";
  for (const auto& r : rep.per_depth)
    o << r.max_depth << ',' << format_number(round_sig12(r.tuned_alpha)) << ','
      << (r.c_train ? format_number(round_sig12(*r.c_train)) : "") << ','
      << (r.c_test ? format_number(round_sig12(*r.c_test)) : "") << ',' << (r.max_depth == rep.chosen_depth ? 1 : 0)
      << '\n';
  return o.str();
}

inline std::string depth_svg(const FitReport& rep, const std::string& comment) {
  plot::Chart chart;
  chart.title = "Harrell's C by maximum depth";
  chart.x_label = "Maximum depth";
  chart.y_label = "Harrell's C";
  chart.metadata = comment;
  plot::Series train{"train", {}, {}, false}, test{"test", {}, {}, false};
  double lo = 1.0, hi = 0.5;
  for (const auto& r : rep.per_depth) {
    for (auto [series, c] : {std::pair{&train, r.c_train}, std::pair{&test, r.c_test}}) {
      if (!c) continue;
      series->x.push_back(r.max_depth);
      series->y.push_back(*c);
      lo = std::min(lo, *c);
      hi = std::max(hi, *c);
    }
  }
  chart.x_min = rep.per_depth.front().max_depth - 0.5;
  chart.x_max = rep.per_depth.back().max_depth + 0.5;
  for (const auto& r : rep.per_depth) chart.x_ticks.push_back(r.max_depth);
  chart.y_min = std::floor(std::min(lo, hi) * 50.0 - 1.0) / 50.0;
  chart.y_max = std::ceil(hi * 50.0 + 1.0) / 50.0;
  chart.y_ticks = plot::nice_ticks(chart.y_min, chart.y_max, 5);
  chart.marker_x.push_back(rep.chosen_depth);
  chart.series = {train, test};
  return plot::render_svg(chart);
}

inline std::string provenance_line(const std::string& command, const std::string& digest, const FitConfig& c) {
  return "ost " + command + "; input_sha256=" + digest + "; config=" + config_json(c).dump();
}

// ---------------------------------------------------------------------------
// Subcommands

struct PrepareArgs {
  std::string open, closed, out, year_count = "exclusive";
  int first_year = 2012, last_year = 2021, collection_year = 2021;
};

inline YearCount parse_year_count(const std::string& s) {
  if (s == "exclusive") return YearCount::exclusive;
  if (s == "inclusive") return YearCount::inclusive;
  throw ConfigError("--year-count must be 'exclusive' or 'inclusive', got '" + s + "'");
}

inline int cmd_prepare(const PrepareArgs& a, std::ostream& out) {
  const StudyWindow window{a.first_year, a.last_year, a.collection_year};
  if (window.first_year > window.last_year) throw ConfigError("--first-year is after --last-year");
  const YearCount count = parse_year_count(a.year_count);
  const std::string open_bytes = read_file(a.open), closed_bytes = read_file(a.closed);
  Rosters rosters;
  auto load = [](const std::string& bytes, const std::string& path, ProviderStatus status) {
    std::istringstream in(bytes);
    try {
      return load_roster(in, status);
    } catch (const RowError& e) {
      throw RowError(e.row(), e.detail(), path);
    } catch (const SchemaError& e) {
      throw SchemaError(path + ": " + std::string(e.what()).substr(std::string("SchemaError: ").size()));
    }
  };
  rosters.open = load(open_bytes, a.open, ProviderStatus::open);
  rosters.closed = load(closed_bytes, a.closed, ProviderStatus::closed);
  const PreparedData prepared = prepare(rosters, window, count);
  std::ostringstream ds;
  write_dataset(ds, prepared.dataset);
  write_file(a.out, ds.str());

  const auto& p = prepared.provenance;
  std::size_t events = 0;
  for (const auto& o : prepared.dataset.observations) events += o.event ? 1 : 0;
  nlohmann::json j;
  j["command"] = "prepare";
  j["inputs"] = {{"open_sha256", sha256_hex(open_bytes)}, {"closed_sha256", sha256_hex(closed_bytes)}};
  j["config"] = {{"first_year", window.first_year},
                 {"last_year", window.last_year},
                 {"collection_year", window.collection_year},
                 {"year_count", a.year_count}};
  j["records_read"] = {{"open", p.input_open}, {"closed", p.input_closed}};
  j["deduplication"] = {{"within_open_duplicates", p.dedup.within_open_dups},
                        {"within_closed_duplicates", p.dedup.within_closed_dups},
                        {"overlapping_ids_removed", p.dedup.overlaps_removed},
                        {"overlap_records_removed", p.dedup.overlap_records_removed}};
  auto delim = [](const DelimitProvenance& d) {
    return nlohmann::json{{"before_window", d.before_window},
                          {"after_window", d.after_window},
                          {"public_school", d.public_school}};
  };
  j["delimitation"] = {{"open", delim(p.delimit_open)}, {"closed", delim(p.delimit_closed)}};
  j["output"] = {{"open", p.output_open},
                 {"closed", p.output_closed},
                 {"rows", prepared.dataset.size()},
                 {"events", events},
                 {"features", schema_to_json(prepared.dataset.schema)},
                 {"sha256", sha256_hex(ds.str())}};
  write_file(a.out + ".provenance.json", j.dump(2) + "\n");

  std::ostringstream txt;
  txt << "records read: open " << p.input_open << ", closed " << p.input_closed << "\n"
      << "within-roster duplicates removed: open " << p.dedup.within_open_dups << ", closed "
      << p.dedup.within_closed_dups << "\n"
      << "IDs in both rosters removed: " << p.dedup.overlaps_removed << " (" << p.dedup.overlap_records_removed
      << " records)\n"
      << "outside " << window.first_year << "-" << window.last_year << ": "
      << p.delimit_open.before_window + p.delimit_closed.before_window << " before, "
      << p.delimit_open.after_window + p.delimit_closed.after_window << " after\n"
      << "public schools removed: " << p.delimit_open.public_school + p.delimit_closed.public_school << "\n"
      << "dataset: " << prepared.dataset.size() << " rows, " << events << " closures, "
      << prepared.dataset.schema.size() << " features\n";
  write_file(a.out + ".provenance.txt", txt.str());
  out << txt.str();
  return kExitOk;
}

struct SynthArgs {
  std::size_t n = 5540;
  std::uint64_t seed = 1;
  std::string variant = "published", out_open, out_closed, tree;
};

inline PlantedVariant parse_variant(const std::string& s) {
  if (s == "published") return PlantedVariant::published;
  if (s == "depth3") return PlantedVariant::depth3;
  if (s == "flat") return PlantedVariant::flat;
  throw ConfigError("--variant must be published, depth3 or flat, got '" + s + "'");
}

inline int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto pop = sample_population(a.n, a.seed, parse_variant(a.variant));
  const auto rosters = split_rosters(pop.records);
  std::ostringstream o, c;
  write_roster(o, rosters.open, ProviderStatus::open);
  write_roster(c, rosters.closed, ProviderStatus::closed);
  write_file(a.out_open, o.str());
  write_file(a.out_closed, c.str());
  if (!a.tree.empty())
    write_file(a.tree, serialize(pop.model.tree, {{"command", "synth"},
                                                  {"variant", a.variant},
                                                  {"n", a.n},
                                                  {"seed", a.seed}}));
  out << "synthetic population: " << pop.records.size() << " providers (" << rosters.open.size() << " open, "
      << rosters.closed.size() << " closed), variant " << a.variant << ", seed " << a.seed << "\n";
  return kExitOk;
}

struct DataArgs {
  std::string data;
};

inline std::pair<Dataset, std::string> load_dataset(const std::string& path) {
  const std::string bytes = read_file(path);
  std::istringstream in(bytes);
  try {
    return {read_dataset(in), sha256_hex(bytes)};
  } catch (const RowError& e) {
    throw RowError(e.row(), e.detail(), path);
  }
}

inline void print_tree(std::ostream& out, const SurvivalTree& tree, std::size_t k = 0, int indent = 0) {
  const auto& n = tree.nodes[k];
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  if (n.is_leaf()) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "leaf %zu: expected survival %.2f y, n=%zu\n", k, n.leaf().expected_survival,
                  n.leaf().n_train);
    out << pad << buf;
    return;
  }
  const auto& s = n.split();
  const auto& spec = tree.schema[s.feature];
  std::string cond;
  if (s.kind == FeatureKind::numeric) {
    cond = spec.name + " < " + format_number(s.threshold);
  } else {
    cond = spec.name + " in {";
    for (std::size_t i = 0; i < s.left_levels.size(); ++i) cond += (i ? ", " : "") + spec.levels[s.left_levels[i]];
    cond += "}";
  }
  out << pad << "node " << k << ": " << cond << "\n";
  print_tree(out, tree, static_cast<std::size_t>(n.left), indent + 1);
  out << pad << "node " << k << ": else\n";
  print_tree(out, tree, static_cast<std::size_t>(n.right), indent + 1);
}

struct FitArgs {
  std::string data, out_tree, report, plot_dir;
  FitOptions opts;
};

inline int cmd_fit(const FitArgs& a, std::ostream& out) {
  const FitConfig cfg = a.opts.config();
  auto [data, digest] = load_dataset(a.data);
  const FitResult r = fit(data, cfg);
  const nlohmann::json prov{{"command", "fit"}, {"input_sha256", digest}, {"config", config_json(cfg)}};
  if (!a.out_tree.empty()) write_file(a.out_tree, serialize(r.tree, prov));
  if (!a.report.empty()) {
    nlohmann::json j = prov;
    j["result"] = row_json(r.row);
    j["split_features"] = feature_names(r.tree.schema, r.tree.split_features());
    write_file(a.report, j.dump(2) + "\n");
  }
  if (!a.plot_dir.empty()) {
    const auto line = provenance_line("fit", digest, cfg);
    write_file(a.plot_dir + "/curves.csv", curves_csv(r.tree, line));
    write_file(a.plot_dir + "/curves.svg", curves_svg(r.tree, line));
  }
  out << "max_depth " << r.row.max_depth << ", alpha " << format_number(round_sig12(r.row.tuned_alpha))
      << ", min_bucket " << r.row.min_bucket << ", C train " << format_c(r.row.c_train) << ", C test "
      << format_c(r.row.c_test) << "\n";
  if (!r.row.c_test_error.empty()) out << "test C undefined: " << r.row.c_test_error << "\n";
  print_tree(out, r.tree);
  return kExitOk;
}

struct TuneArgs {
  std::string data, depths = "4..10", out_dir;
  std::optional<std::uint64_t> reseed;
  FitOptions opts;
};

inline std::vector<int> parse_depths(const std::string& s) {
  std::vector<int> out;
  auto to_int = [&](const std::string& t) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size() || t.empty()) throw ConfigError("bad depth '" + t + "' in --depths '" + s + "'");
    return v;
  };
  if (const auto dots = s.find(".."); dots != std::string::npos) {
    const int lo = to_int(s.substr(0, dots)), hi = to_int(s.substr(dots + 2));
    if (lo > hi) throw ConfigError("--depths range is empty: " + s);
    for (int d = lo; d <= hi; ++d) out.push_back(d);
    return out;
  }
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(to_int(tok));
  return out;
}

inline nlohmann::json reseed_json(const ReseedDiff& d, const FeatureSchema& schema) {
  return {{"seed_a", d.seed_a},
          {"seed_b", d.seed_b},
          {"features_a", feature_names(schema, d.features_a)},
          {"features_b", feature_names(schema, d.features_b)},
          {"shared", feature_names(schema, d.shared)},
          {"only_a", feature_names(schema, d.only_a)},
          {"only_b", feature_names(schema, d.only_b)},
          {"c_test_a", optional_number(d.c_test_a)},
          {"c_test_b", optional_number(d.c_test_b)},
          {"c_test_abs_diff", optional_number(d.c_test_abs_diff)},
          {"identical_feature_sets", d.empty()}};
}

inline int cmd_tune(const TuneArgs& a, std::ostream& out) {
  const FitConfig cfg = a.opts.config();
  const auto depths = parse_depths(a.depths);
  auto [data, digest] = load_dataset(a.data);
  FitReport rep = tune_max_depth(data, depths, cfg);
  if (a.reseed) {
    FitConfig c = cfg;
    c.max_depth = rep.chosen_depth;
    rep.reseed_comparison = reseed_check(data, c, cfg.seed, *a.reseed);
  }

  nlohmann::json cj = config_json(cfg, false);
  cj["depths"] = depths;
  const nlohmann::json prov{{"command", "tune"}, {"input_sha256", digest}, {"config", cj}};
  nlohmann::json j = prov;
  j["per_depth"] = nlohmann::json::array();
  for (const auto& r : rep.per_depth) j["per_depth"].push_back(row_json(r));
  j["chosen_depth"] = rep.chosen_depth;
  j["seed"] = rep.seed;
  j["chosen_split_features"] = feature_names(rep.chosen_tree.schema, rep.chosen_tree.split_features());
  if (rep.reseed_comparison) j["reseed_comparison"] = reseed_json(*rep.reseed_comparison, data.schema);

  const std::string line = "ost tune; input_sha256=" + digest + "; config=" + cj.dump();
  write_file(a.out_dir + "/report.json", j.dump(2) + "\n");
  write_file(a.out_dir + "/tree.json", serialize(rep.chosen_tree, prov));
  write_file(a.out_dir + "/depth_c.csv", depth_csv(rep, line));
  write_file(a.out_dir + "/depth_c.svg", depth_svg(rep, line));
  write_file(a.out_dir + "/curves.csv", curves_csv(rep.chosen_tree, line));
  write_file(a.out_dir + "/curves.svg", curves_svg(rep.chosen_tree, line));

  out << "max_depth  alpha         C_train  C_test  leaves\n";
  for (const auto& r : rep.per_depth) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-10d %-13.6g %-8s %-7s %zu%s\n", r.max_depth, r.tuned_alpha,
                  format_c(r.c_train).c_str(), format_c(r.c_test).c_str(), r.leaves,
                  r.max_depth == rep.chosen_depth ? "  <- chosen" : "");
    out << buf;
  }
  print_tree(out, rep.chosen_tree);
  return kExitOk;
}

struct ReseedArgs {
  std::string data, out;
  std::uint64_t seed_a = 1, seed_b = 352;
  FitOptions opts;
};

inline int cmd_reseed(const ReseedArgs& a, std::ostream& out, std::ostream& err) {
  const FitConfig cfg = a.opts.config();
  if (a.seed_a == a.seed_b) err << "warning: --seed-a equals --seed-b; the comparison is trivially empty\n";
  auto [data, digest] = load_dataset(a.data);
  const ReseedDiff d = reseed_check(data, cfg, a.seed_a, a.seed_b);
  auto names = [&](const std::vector<std::size_t>& idx) {
    std::string s;
    for (const auto& n : feature_names(data.schema, idx)) s += (s.empty() ? "" : ", ") + n;
    return s.empty() ? std::string("(none)") : s;
  };
  out << "seed " << d.seed_a << ": " << names(d.features_a) << "; C test " << format_c(d.c_test_a) << "\n"
      << "seed " << d.seed_b << ": " << names(d.features_b) << "; C test " << format_c(d.c_test_b) << "\n"
      << "shared: " << names(d.shared) << "\n"
      << "only seed " << d.seed_a << ": " << names(d.only_a) << "\n"
      << "only seed " << d.seed_b << ": " << names(d.only_b) << "\n"
      << "|C test difference|: " << format_c(d.c_test_abs_diff) << "\n"
      << (d.empty() ? "split-feature sets identical\n" : "split-feature sets differ\n");
  if (!a.out.empty()) {
    nlohmann::json j{{"command", "reseed"}, {"input_sha256", digest}, {"config", config_json(cfg)}};
    j["comparison"] = reseed_json(d, data.schema);
    write_file(a.out, j.dump(2) + "\n");
  }
  return kExitOk;
}

struct PredictArgs {
  std::string tree, input, out;
};

inline int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const SurvivalTree tree = deserialize(read_file(a.tree));
  const std::string bytes = read_file(a.input);
  std::istringstream in(bytes);
  const CovariateRows rows = read_covariates(in, tree.schema);
  std::ostringstream o;
  csv::write_record(o, {"dcf_id", "leaf_id", "expected_survival"});
  for (std::size_t r = 0; r < rows.rows.size(); ++r) {
    std::size_t leaf = 0;
    try {
      leaf = route(tree, rows.rows[r]);
    } catch (const Error& e) {
      throw RowError(r + 1, e.what());
    }
    csv::write_record(o, {rows.ids[r], std::to_string(leaf),
                          format_number(round_sig12(tree.nodes[leaf].leaf().expected_survival))});
  }
  if (a.out.empty()) out << o.str();
  else write_file(a.out, o.str());
  return kExitOk;
}

struct ScoreArgs {
  std::string tree, data, report;
};

inline int cmd_score(const ScoreArgs& a, std::ostream& out) {
  const std::string tree_bytes = read_file(a.tree);
  const SurvivalTree tree = deserialize(tree_bytes);
  auto [data, digest] = load_dataset(a.data);
  const auto c = harrell_c(data.observations, predict_expected_survival(tree, data));
  out << "Harrell's C " << format_c(c.c_index) << " over " << c.permissible_pairs << " permissible pairs ("
      << c.concordant << " concordant, " << c.discordant << " discordant, " << c.tied_predictions
      << " tied predictions)\n";
  if (!a.report.empty()) {
    nlohmann::json j{{"command", "score"},
                     {"input_sha256", digest},
                     {"tree_sha256", sha256_hex(tree_bytes)},
                     {"c_index", round_sig12(c.c_index)},
                     {"permissible_pairs", c.permissible_pairs},
                     {"concordant", c.concordant},
                     {"discordant", c.discordant},
                     {"tied_predictions", c.tied_predictions}};
    write_file(a.report, j.dump(2) + "\n");
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Survival trees for provider rosters"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  PrepareArgs prep;
  auto* sp = app.add_subcommand("prepare", "Build the censored dataset from open and closed rosters");
  sp->add_option("--open", prep.open, "Open-provider roster CSV")->required();
  sp->add_option("--closed", prep.closed, "Closed-provider roster CSV")->required();
  sp->add_option("--out", prep.out, "Dataset CSV to write")->required();
  sp->add_option("--year-count", prep.year_count, "exclusive or inclusive")->capture_default_str();
  sp->add_option("--first-year", prep.first_year)->capture_default_str();
  sp->add_option("--last-year", prep.last_year)->capture_default_str();
  sp->add_option("--collection-year", prep.collection_year)->capture_default_str();

  SynthArgs syn;
  auto* ss = app.add_subcommand("synth", "Write synthetic rosters drawn from a planted tree");
  ss->add_option("--n", syn.n, "Number of providers")->capture_default_str();
  ss->add_option("--seed", syn.seed)->capture_default_str();
  ss->add_option("--variant", syn.variant, "published, depth3 or flat")->capture_default_str();
  ss->add_option("--out-open", syn.out_open)->required();
  ss->add_option("--out-closed", syn.out_closed)->required();
  ss->add_option("--tree", syn.tree, "Also write the planted tree document");

  FitArgs fa;
  auto* sf = app.add_subcommand("fit", "Fit one tree");
  sf->add_option("--data", fa.data, "Dataset CSV")->required();
  sf->add_option("--out-tree", fa.out_tree, "Tree document to write");
  sf->add_option("--report", fa.report, "JSON report to write");
  sf->add_option("--plot-dir", fa.plot_dir, "Directory for leaf curve CSV/SVG");
  fa.opts.attach(*sf, true);

  TuneArgs ta;
  auto* st = app.add_subcommand("tune", "Fit over a depth grid and pick a depth");
  st->add_option("--data", ta.data, "Dataset CSV")->required();
  st->add_option("--depths", ta.depths, "Range lo..hi or comma list")->capture_default_str();
  st->add_option("--out-dir", ta.out_dir, "Directory for report, tree and plots")->required();
  st->add_option("--reseed", ta.reseed, "Also refit the chosen depth under this seed and compare");
  ta.opts.attach(*st, false);

  ReseedArgs ra;
  auto* sr = app.add_subcommand("reseed", "Refit under two seeds and compare");
  sr->add_option("--data", ra.data, "Dataset CSV")->required();
  sr->add_option("--seed-a", ra.seed_a)->capture_default_str();
  sr->add_option("--seed-b", ra.seed_b)->capture_default_str();
  sr->add_option("--out", ra.out, "JSON report to write");
  ra.opts.attach(*sr, true);
  sr->remove_option(sr->get_option("--seed"));

  PredictArgs pa;
  auto* sq = app.add_subcommand("predict", "Expected survival for each covariate row");
  sq->add_option("--tree", pa.tree, "Tree document")->required();
  sq->add_option("--input", pa.input, "Covariate CSV")->required();
  sq->add_option("--out", pa.out, "Predictions CSV (default stdout)");

  ScoreArgs sa;
  auto* sc = app.add_subcommand("score", "Harrell's C of a tree on a dataset");
  sc->add_option("--tree", sa.tree, "Tree document")->required();
  sc->add_option("--data", sa.data, "Dataset CSV")->required();
  sc->add_option("--report", sa.report, "JSON report to write");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*sp) return cmd_prepare(prep, out);
    if (*ss) return cmd_synth(syn, out);
    if (*sf) return cmd_fit(fa, out);
    if (*st) return cmd_tune(ta, out);
    if (*sr) return cmd_reseed(ra, out, err);
    if (*sq) return cmd_predict(pa, out);
    if (*sc) return cmd_score(sa, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: IoError: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace ost::cli
