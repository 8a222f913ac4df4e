#pragma once

// Provider roster ingestion: parse the open and closed rosters, remove
// duplicates and cross-listed providers, restrict to the study window, derive
// the censored outcome and encode the eleven covariates.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ost/csv.hpp"
#include "ost/dataset.hpp"
#include "ost/error.hpp"
#include "ost/survival_core.hpp"

namespace ost {

enum class ProviderStatus { open, closed };

struct ProviderRecord {
  std::string dcf_id;
  ProviderStatus status = ProviderStatus::open;
  int origination_year = 0;
  std::optional<int> closure_year;
  std::string program_type;
  std::string license_status;
  std::string gold_seal_status;
  std::string school_readiness_status;
  std::string vpk;
  bool faith_based = false;
  bool urban_zoned = false;
  bool school_aged_only = false;
  bool head_start = false;
  int capacity = 0;
  bool is_public_school = false;
  std::size_t source_row = 0;  // 1-based data row in its file, 0 if generated
};

// Column positions in the provider feature schema.
namespace feature {
inline constexpr std::size_t origination_year = 0;
inline constexpr std::size_t program_type = 1;
inline constexpr std::size_t license_status = 2;
inline constexpr std::size_t gold_seal_status = 3;
inline constexpr std::size_t school_readiness_status = 4;
inline constexpr std::size_t vpk = 5;
inline constexpr std::size_t head_start = 6;
inline constexpr std::size_t capacity = 7;
inline constexpr std::size_t faith_based = 8;
inline constexpr std::size_t urban_zoned = 9;
inline constexpr std::size_t school_aged_only = 10;
inline constexpr std::size_t count = 11;
}  // namespace feature

inline const FeatureSchema& provider_schema() {
  static const FeatureSchema schema{{
      {"origination_year", FeatureKind::numeric, {}},
      {"program_type", FeatureKind::nominal,
       {"Child Care Facility", "Family Day Care Home", "Large Family Child Care Home", "Informal"}},
      {"license_status", FeatureKind::nominal, {"Exempt", "Illegal", "Licensed", "Registered", "Substantial Compliance"}},
      {"gold_seal_status", FeatureKind::nominal, {"Active", "Inactive", "Terminated", "No"}},
      {"school_readiness_status", FeatureKind::nominal, {"Active", "Applied", "Terminated", "No"}},
      {"vpk", FeatureKind::nominal, {"No", "Yes"}},
      {"head_start", FeatureKind::nominal, {"No", "Yes"}},
      {"capacity", FeatureKind::numeric, {}},
      {"faith_based", FeatureKind::nominal, {"No", "Yes"}},
      {"urban_zoned", FeatureKind::nominal, {"No", "Yes"}},
      {"school_aged_only", FeatureKind::nominal, {"No", "Yes"}},
  }};
  return schema;
}

struct StudyWindow {
  int first_year = 2012;
  int last_year = 2021;
  int collection_year = 2021;
};

// exclusive: time = end year - origination year (0..9 for a 2012 start);
// inclusive counts both endpoint years (1..10).
enum class YearCount { exclusive, inclusive };

namespace detail {

inline std::optional<long> parse_int(std::string_view s) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::optional<bool> parse_flag(std::string_view s) {
  for (auto yes : {"yes", "y", "true", "1"})
    if (iequals(s, yes)) return true;
  for (auto no : {"no", "n", "false", "0"})
    if (iequals(s, no)) return false;
  return std::nullopt;
}

inline const char* flag_text(bool b) { return b ? "Yes" : "No"; }

inline const std::vector<std::string>& roster_columns() {
  static const std::vector<std::string> cols{
      "dcf_id",      "origination_year",        "closure_year",      "program_type",
      "license_status", "gold_seal_status",     "school_readiness_status", "vpk",
      "faith_based", "urban_zoned",             "school_aged_only",  "head_start",
      "capacity",    "is_public_school"};
  return cols;
}

}  // namespace detail

inline std::vector<ProviderRecord> load_roster(std::istream& in, ProviderStatus status) {
  const csv::Table table = csv::read(in);
  std::map<std::string, std::size_t> col;
  for (const auto& name : detail::roster_columns()) {
    if (name == "closure_year" && status == ProviderStatus::open) {
      if (auto c = table.column(name)) col[name] = *c;
      continue;
    }
    auto c = table.column(name);
    if (!c) throw SchemaError("missing required column '" + name + "'");
    col[name] = *c;
  }
  std::vector<ProviderRecord> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t row_no = r + 1;
    auto get = [&](const char* name) -> const std::string& { return row[col.at(name)]; };
    auto year = [&](const char* name) {
      auto v = detail::parse_int(get(name));
      if (!v) throw RowError(row_no, std::string(name) + " '" + get(name) + "' is not a year");
      return static_cast<int>(*v);
    };
    auto flag = [&](const char* name) {
      auto v = detail::parse_flag(get(name));
      if (!v) throw RowError(row_no, std::string(name) + " '" + get(name) + "' is not Yes/No");
      return *v;
    };
    ProviderRecord rec;
    rec.source_row = row_no;
    rec.status = status;
    rec.dcf_id = get("dcf_id");
    if (rec.dcf_id.empty()) throw RowError(row_no, "dcf_id is empty");
    rec.origination_year = year("origination_year");
    if (status == ProviderStatus::closed) rec.closure_year = year("closure_year");
    rec.program_type = get("program_type");
    rec.license_status = get("license_status");
    rec.gold_seal_status = get("gold_seal_status");
    rec.school_readiness_status = get("school_readiness_status");
    rec.vpk = get("vpk");
    rec.faith_based = flag("faith_based");
    rec.urban_zoned = flag("urban_zoned");
    rec.school_aged_only = flag("school_aged_only");
    rec.head_start = flag("head_start");
    rec.is_public_school = flag("is_public_school");
    auto cap = detail::parse_int(get("capacity"));
    if (!cap) throw RowError(row_no, "capacity '" + get("capacity") + "' is not an integer");
    if (*cap < 0 || *cap > 999) throw RowError(row_no, "capacity " + std::to_string(*cap) + " outside 0-999");
    rec.capacity = static_cast<int>(*cap);
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::vector<ProviderRecord> load_roster(const std::string& path, ProviderStatus status) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return load_roster(in, status);
}

struct Rosters {
  std::vector<ProviderRecord> open;
  std::vector<ProviderRecord> closed;
};

inline Rosters load_rosters(const std::string& open_path, const std::string& closed_path) {
  return {load_roster(open_path, ProviderStatus::open), load_roster(closed_path, ProviderStatus::closed)};
}

inline void write_roster(std::ostream& out, const std::vector<ProviderRecord>& records, ProviderStatus status) {
  std::vector<std::string> header;
  for (const auto& c : detail::roster_columns())
    if (c != "closure_year" || status == ProviderStatus::closed) header.push_back(c);
  csv::write_record(out, header);
  for (const auto& r : records) {
    std::vector<std::string> f{r.dcf_id, std::to_string(r.origination_year)};
    if (status == ProviderStatus::closed) f.push_back(r.closure_year ? std::to_string(*r.closure_year) : "");
    f.insert(f.end(), {r.program_type, r.license_status, r.gold_seal_status, r.school_readiness_status, r.vpk,
                       detail::flag_text(r.faith_based), detail::flag_text(r.urban_zoned),
                       detail::flag_text(r.school_aged_only), detail::flag_text(r.head_start),
                       std::to_string(r.capacity), detail::flag_text(r.is_public_school)});
    csv::write_record(out, f);
  }
}

struct DedupProvenance {
  std::size_t within_open_dups = 0;
  std::size_t within_closed_dups = 0;
  std::size_t overlaps_removed = 0;         // IDs listed in both rosters
  std::size_t overlap_records_removed = 0;  // records dropped for those IDs
};

struct DedupResult {
  std::vector<ProviderRecord> open;
  std::vector<ProviderRecord> closed;
  DedupProvenance provenance;
};

// Within each roster the first occurrence of an ID is kept; IDs present in
// both rosters are then dropped from both.
inline DedupResult deduplicate(const std::vector<ProviderRecord>& open, const std::vector<ProviderRecord>& closed) {
  DedupResult out;
  auto unique_by_id = [](const std::vector<ProviderRecord>& in, std::size_t& dups) {
    std::vector<ProviderRecord> kept;
    std::set<std::string> seen;
    for (const auto& r : in) {
      if (seen.insert(r.dcf_id).second) kept.push_back(r);
      else ++dups;
    }
    return kept;
  };
  auto o = unique_by_id(open, out.provenance.within_open_dups);
  auto c = unique_by_id(closed, out.provenance.within_closed_dups);
  std::set<std::string> open_ids, both;
  for (const auto& r : o) open_ids.insert(r.dcf_id);
  for (const auto& r : c)
    if (open_ids.count(r.dcf_id)) both.insert(r.dcf_id);
  out.provenance.overlaps_removed = both.size();
  for (auto* src : {&o, &c}) {
    auto& dst = src == &o ? out.open : out.closed;
    for (auto& r : *src) {
      if (both.count(r.dcf_id)) ++out.provenance.overlap_records_removed;
      else dst.push_back(std::move(r));
    }
  }
  return out;
}

struct DelimitProvenance {
  std::size_t before_window = 0;
  std::size_t after_window = 0;
  std::size_t public_school = 0;

  std::size_t total() const { return before_window + after_window + public_school; }
};

struct DelimitResult {
  std::vector<ProviderRecord> records;
  DelimitProvenance provenance;
};

inline DelimitResult delimit(const std::vector<ProviderRecord>& records, const StudyWindow& window = {}) {
  DelimitResult out;
  for (const auto& r : records) {
    if (r.origination_year < window.first_year) ++out.provenance.before_window;
    else if (r.origination_year > window.last_year) ++out.provenance.after_window;
    else if (r.is_public_school) ++out.provenance.public_school;
    else out.records.push_back(r);
  }
  return out;
}

inline CensoredObservation derive_outcome(const ProviderRecord& r, int collection_year = 2021,
                                          YearCount count = YearCount::exclusive) {
  CensoredObservation obs;
  int end;
  if (r.status == ProviderStatus::closed) {
    if (!r.closure_year) throw RowError(r.source_row, "closed provider " + r.dcf_id + " has no closure year");
    end = *r.closure_year;
    if (end < r.origination_year)
      throw RowError(r.source_row, "provider " + r.dcf_id + " closed (" + std::to_string(end) +
                                       ") before it originated (" + std::to_string(r.origination_year) + ")");
    if (end > collection_year)
      throw RowError(r.source_row, "provider " + r.dcf_id + " closed (" + std::to_string(end) +
                                       ") after data collection (" + std::to_string(collection_year) + ")");
    obs.event = true;
  } else {
    end = collection_year;
    if (end < r.origination_year)
      throw RowError(r.source_row, "provider " + r.dcf_id + " originated after data collection");
    obs.event = false;
  }
  obs.time = end - r.origination_year + (count == YearCount::inclusive ? 1 : 0);
  return obs;
}

namespace detail {

inline std::string canonical_program_type(std::string_view v) {
  if (iequals(v, "Large Family Day Care Home")) return "Large Family Child Care Home";
  return std::string(v);
}

}  // namespace detail

// Covariate vector in provider_schema() order. Throws UnknownLevel.
inline std::vector<double> encode_covariates(const ProviderRecord& r) {
  const auto& s = provider_schema();
  std::vector<double> x(feature::count);
  auto level = [&](std::size_t f, std::string_view v) { return static_cast<double>(level_index(s[f], v)); };
  x[feature::origination_year] = r.origination_year;
  x[feature::program_type] = level(feature::program_type, detail::canonical_program_type(r.program_type));
  x[feature::license_status] = level(feature::license_status, r.license_status);
  x[feature::gold_seal_status] = level(feature::gold_seal_status, r.gold_seal_status);
  x[feature::school_readiness_status] = level(feature::school_readiness_status, r.school_readiness_status);
  x[feature::vpk] = level(feature::vpk, r.vpk);
  x[feature::head_start] = r.head_start ? 1.0 : 0.0;
  x[feature::capacity] = r.capacity;
  x[feature::faith_based] = r.faith_based ? 1.0 : 0.0;
  x[feature::urban_zoned] = r.urban_zoned ? 1.0 : 0.0;
  x[feature::school_aged_only] = r.school_aged_only ? 1.0 : 0.0;
  return x;
}

// Rows come out ordered by dcf_id.
inline Dataset encode(const std::vector<ProviderRecord>& records, int collection_year = 2021,
                      YearCount count = YearCount::exclusive) {
  std::vector<const ProviderRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ProviderRecord* a, const ProviderRecord* b) { return a->dcf_id < b->dcf_id; });
  Dataset ds;
  ds.schema = provider_schema();
  ds.columns.resize(ds.schema.size());
  for (const auto* r : sorted) {
    std::vector<double> x;
    try {
      x = encode_covariates(*r);
    } catch (const UnknownLevel& e) {
      throw RowError(r->source_row, "provider " + r->dcf_id + ": " + e.what());
    }
    ds.push_back(r->dcf_id, derive_outcome(*r, collection_year, count), x);
  }
  return ds;
}

struct PipelineProvenance {
  std::size_t input_open = 0;
  std::size_t input_closed = 0;
  DedupProvenance dedup;
  DelimitProvenance delimit_open;
  DelimitProvenance delimit_closed;
  std::size_t output_open = 0;
  std::size_t output_closed = 0;
};

struct PreparedData {
  Dataset dataset;
  PipelineProvenance provenance;
};

inline PreparedData prepare(const Rosters& rosters, const StudyWindow& window = {},
                            YearCount count = YearCount::exclusive) {
  PreparedData out;
  auto& p = out.provenance;
  p.input_open = rosters.open.size();
  p.input_closed = rosters.closed.size();
  auto dd = deduplicate(rosters.open, rosters.closed);
  p.dedup = dd.provenance;
  auto dopen = delimit(dd.open, window);
  auto dclosed = delimit(dd.closed, window);
  p.delimit_open = dopen.provenance;
  p.delimit_closed = dclosed.provenance;
  p.output_open = dopen.records.size();
  p.output_closed = dclosed.records.size();
  std::vector<ProviderRecord> all = std::move(dopen.records);
  all.insert(all.end(), dclosed.records.begin(), dclosed.records.end());
  out.dataset = encode(all, window.collection_year, count);
  return out;
}

// ---------------------------------------------------------------------------
// Dataset and covariate files

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string format_value(const FeatureSpec& spec, double v) {
  if (is_missing(v)) return "";
  if (spec.kind == FeatureKind::nominal) return spec.levels.at(static_cast<std::size_t>(v));
  return format_number(v);
}

inline void write_dataset(std::ostream& out, const Dataset& ds) {
  std::vector<std::string> header{"dcf_id", "time", "event"};
  for (const auto& f : ds.schema.features) header.push_back(f.name);
  csv::write_record(out, header);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::vector<std::string> f{ds.ids.empty() ? std::to_string(i) : ds.ids[i], format_number(ds.observations[i].time),
                               ds.observations[i].event ? "1" : "0"};
    for (std::size_t c = 0; c < ds.schema.size(); ++c) f.push_back(format_value(ds.schema[c], ds.columns[c][i]));
    csv::write_record(out, f);
  }
}

inline double parse_feature_value(const FeatureSpec& spec, const std::string& cell, std::size_t row) {
  if (cell.empty()) return kMissing;
  if (spec.kind == FeatureKind::nominal) {
    auto idx = find_level(spec, spec.name == "program_type" ? detail::canonical_program_type(cell) : cell);
    if (!idx) {
      std::string allowed;
      for (const auto& l : spec.levels) allowed += (allowed.empty() ? "" : ", ") + l;
      throw RowError(row, "unknown level '" + cell + "' for " + spec.name + " (expected one of: " + allowed + ")");
    }
    return static_cast<double>(*idx);
  }
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size()) throw RowError(row, spec.name + " '" + cell + "' is not a number");
  return v;
}

inline Dataset read_dataset(std::istream& in, const FeatureSchema& schema = provider_schema()) {
  const csv::Table table = csv::read(in);
  std::vector<std::size_t> cols;
  for (const char* name : {"time", "event"})
    if (!table.column(name)) throw SchemaError(std::string("missing required column '") + name + "'");
  for (const auto& f : schema.features) {
    auto c = table.column(f.name);
    if (!c) throw SchemaError("missing required column '" + f.name + "'");
    cols.push_back(*c);
  }
  const auto id_col = table.column("dcf_id");
  const auto time_col = *table.column("time");
  const auto event_col = *table.column("event");
  Dataset ds;
  ds.schema = schema;
  ds.columns.resize(schema.size());
  std::vector<double> x(schema.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    CensoredObservation obs;
    char* end = nullptr;
    obs.time = std::strtod(row[time_col].c_str(), &end);
    if (row[time_col].empty() || end != row[time_col].c_str() + row[time_col].size() || obs.time < 0)
      throw RowError(r + 1, "time '" + row[time_col] + "' is not a non-negative number");
    auto ev = detail::parse_flag(row[event_col]);
    if (!ev) throw RowError(r + 1, "event '" + row[event_col] + "' is not 0/1");
    obs.event = *ev;
    for (std::size_t f = 0; f < schema.size(); ++f) x[f] = parse_feature_value(schema[f], row[cols[f]], r + 1);
    ds.push_back(id_col ? row[*id_col] : std::to_string(r + 1), obs, x);
  }
  return ds;
}

inline Dataset read_dataset(const std::string& path, const FeatureSchema& schema = provider_schema()) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_dataset(in, schema);
}

struct CovariateRows {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
};

// Covariate columns are matched to the schema by name; an id column
// (dcf_id) is optional and other columns are ignored. Empty cells are missing.
inline CovariateRows read_covariates(std::istream& in, const FeatureSchema& schema) {
  const csv::Table table = csv::read(in);
  std::vector<std::size_t> cols;
  for (const auto& f : schema.features) {
    auto c = table.column(f.name);
    if (!c) throw SchemaError("missing required column '" + f.name + "'");
    cols.push_back(*c);
  }
  const auto id_col = table.column("dcf_id");
  CovariateRows out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::vector<double> x(schema.size());
    for (std::size_t f = 0; f < schema.size(); ++f)
      x[f] = parse_feature_value(schema[f], table.rows[r][cols[f]], r + 1);
    out.ids.push_back(id_col ? table.rows[r][*id_col] : std::to_string(r + 1));
    out.rows.push_back(std::move(x));
  }
  return out;
}

}  // namespace ost
