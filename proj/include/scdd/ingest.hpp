#pragma once

// Loaders for the normalized input tables: structural business statistics,
// inter-country input-output flows, HS-coded trade, code concordances and
// human-rights violation lists.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "scdd/codes.hpp"
#include "scdd/csv.hpp"
#include "scdd/diagnostics.hpp"
#include "scdd/error.hpp"

namespace scdd {

// ---------------------------------------------------------------------------
// Structural business statistics

struct SbsCell {
  Code country;
  Code sector;
  BandIndex band = 0;
  std::int64_t n_firms = 0;
  std::optional<double> avg_employees;
  std::optional<double> turnover_per_employee;

  friend bool operator==(const SbsCell&, const SbsCell&) = default;
};

struct SbsTable {
  std::vector<SbsCell> cells;

  friend bool operator==(const SbsTable&, const SbsTable&) = default;
};

inline const std::vector<std::string>& sbs_header() {
  static const std::vector<std::string> h{"country", "sector", "band", "n_firms", "avg_employees",
                                          "turnover_per_employee"};
  return h;
}

namespace detail {

inline void require_country(const std::string& value, const std::string& where) {
  if (!is_country_code(value)) throw Error(ErrorKind::schema, where + ": invalid country code '" + value + "'");
}

inline void require_sector(const std::string& value, const std::string& where) {
  if (!is_sector_code(value)) throw Error(ErrorKind::schema, where + ": invalid NACE sector code '" + value + "'");
}

inline void require_nonnegative(double v, const std::string& what, const std::string& where) {
  if (v < 0.0) throw Error(ErrorKind::validation, where + ": negative " + what);
}

/// Like csv::read_table but a completely empty file yields no rows.
inline std::vector<csv::Row> read_table_allow_empty(const std::string& path,
                                                    const std::vector<std::string>& header,
                                                    Diagnostics* diag) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw Error(ErrorKind::io, "cannot open '" + path + "'");
  std::string line;
  bool any = false;
  while (std::getline(probe, line)) {
    if (!csv::trim(line).empty()) {
      any = true;
      break;
    }
  }
  if (!any) {
    warn(diag, path + ": empty file");
    return {};
  }
  auto rows = csv::read_table(path, header);
  if (rows.empty()) warn(diag, path + ": no data rows");
  return rows;
}

}  // namespace detail

/// Rows with an empty n_firms are dropped and counted under
/// "sbs.dropped_missing_n_firms".
inline SbsTable load_sbs(const std::string& path, Diagnostics* diag = nullptr) {
  const auto rows = csv::read_table(path, sbs_header());
  SbsTable table;
  std::set<std::tuple<Code, Code, BandIndex>> seen;
  std::size_t dropped = 0;
  for (const auto& row : rows) {
    const auto where = csv::location(path, row);
    detail::require_country(row[0], where);
    detail::require_sector(row[1], where);
    const auto band = band_from_label(row[2]);
    if (!band) throw Error(ErrorKind::schema, where + ": unknown size band '" + row[2] + "'");

    const auto n_firms = csv::parse_optional_int<std::int64_t>(row[3], where);
    const auto avg = csv::parse_optional_double(row[4], where);
    const auto tpe = csv::parse_optional_double(row[5], where);
    if (!n_firms) {
      ++dropped;
      continue;
    }
    if (*n_firms < 0) throw Error(ErrorKind::validation, where + ": negative n_firms");
    if (avg) {
      detail::require_nonnegative(*avg, "avg_employees", where);
      if (!band_at(*band).contains(*avg)) {
        throw Error(ErrorKind::validation, where + ": avg_employees " + row[4] + " outside band " + row[2]);
      }
    }
    if (tpe) detail::require_nonnegative(*tpe, "turnover_per_employee", where);

    SbsCell cell{Code(row[0]), Code(row[1]), *band, *n_firms, avg, tpe};
    if (!seen.emplace(cell.country, cell.sector, cell.band).second) {
      throw Error(ErrorKind::duplicate_key, where + ": duplicate key (" + row[0] + ", " + row[1] + ", " + row[2] + ")");
    }
    table.cells.push_back(cell);
  }
  if (dropped > 0) {
    warn(diag, path + ": dropped " + std::to_string(dropped) + " rows with missing n_firms");
  }
  bump(diag, "sbs.rows", table.cells.size());
  bump(diag, "sbs.dropped_missing_n_firms", dropped);
  return table;
}

inline void write_sbs(const SbsTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");
  out << csv::join(sbs_header()) << '\n';
  for (const auto& c : table.cells) {
    out << c.country << ',' << c.sector << ',' << band_label(c.band) << ',' << c.n_firms << ','
        << csv::format_optional(c.avg_employees) << ',' << csv::format_optional(c.turnover_per_employee)
        << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "failed writing '" + path + "'");
}

struct ImputationStats {
  std::size_t avg_employees_imputed = 0;
  std::size_t turnover_imputed = 0;
  std::size_t turnover_unresolved = 0;
};

/// Fills missing optional fields: band midpoint for avg_employees, median
/// across all cells of the same sector for turnover_per_employee. Sectors
/// with no reported turnover at all stay unset.
inline ImputationStats impute_sbs(SbsTable& table, Diagnostics* diag = nullptr) {
  ImputationStats stats;
  std::map<Code, std::vector<double>> by_sector;
  for (const auto& c : table.cells) {
    if (c.turnover_per_employee) by_sector[c.sector].push_back(*c.turnover_per_employee);
  }
  std::map<Code, double> median;
  for (auto& [sector, values] : by_sector) {
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    median[sector] = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  }
  for (auto& c : table.cells) {
    if (!c.avg_employees) {
      c.avg_employees = band_at(c.band).midpoint();
      ++stats.avg_employees_imputed;
    }
    if (!c.turnover_per_employee) {
      if (auto it = median.find(c.sector); it != median.end()) {
        c.turnover_per_employee = it->second;
        ++stats.turnover_imputed;
      } else {
        ++stats.turnover_unresolved;
      }
    }
  }
  if (stats.avg_employees_imputed) {
    warn(diag, "imputed band midpoint for " + std::to_string(stats.avg_employees_imputed) + " SBS cells");
  }
  if (stats.turnover_imputed) {
    warn(diag, "imputed sector median turnover for " + std::to_string(stats.turnover_imputed) + " SBS cells");
  }
  if (stats.turnover_unresolved) {
    warn(diag, std::to_string(stats.turnover_unresolved) + " SBS cells have no turnover data in their sector");
  }
  bump(diag, "sbs.imputed_avg_employees", stats.avg_employees_imputed);
  bump(diag, "sbs.imputed_turnover", stats.turnover_imputed);
  return stats;
}

// ---------------------------------------------------------------------------
// Input-output table

struct IoTable {
  using Key = std::pair<CountrySector, CountrySector>;  // (origin, destination)
  std::map<Key, double> flows;
  Code row_marker{kRowMarker};

  double flow(const CountrySector& origin, const CountrySector& dest) const {
    auto it = flows.find({origin, dest});
    return it == flows.end() ? 0.0 : it->second;
  }

  friend bool operator==(const IoTable&, const IoTable&) = default;
};

inline const std::vector<std::string>& iot_header() {
  static const std::vector<std::string> h{"origin_country", "origin_sector", "dest_country", "dest_sector",
                                          "value"};
  return h;
}

/// Rows whose origin or destination sector is not a NACE division (final
/// demand, value added, taxes) are skipped and counted under
/// "iot.ignored_non_intermediate".
inline IoTable load_iot(const std::string& path, Diagnostics* diag = nullptr,
                        std::string_view row_marker = kRowMarker) {
  const auto rows = csv::read_table(path, iot_header());
  IoTable table;
  table.row_marker = Code(row_marker);
  std::size_t ignored = 0;
  for (const auto& row : rows) {
    const auto where = csv::location(path, row);
    if (!is_sector_code(row[1]) || !is_sector_code(row[3])) {
      ++ignored;
      continue;
    }
    if (row[0] != row_marker) detail::require_country(row[0], where);
    if (row[2] != row_marker) detail::require_country(row[2], where);
    const double value = csv::parse_double(row[4], where);
    detail::require_nonnegative(value, "flow", where);
    IoTable::Key key{{Code(row[0]), Code(row[1])}, {Code(row[2]), Code(row[3])}};
    if (!table.flows.emplace(key, value).second) {
      throw Error(ErrorKind::duplicate_key, where + ": duplicate flow " + key.first.str() + " -> " + key.second.str());
    }
  }
  bump(diag, "iot.rows", table.flows.size());
  bump(diag, "iot.ignored_non_intermediate", ignored);
  return table;
}

inline void write_iot(const IoTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");
  out << csv::join(iot_header()) << '\n';
  for (const auto& [key, value] : table.flows) {
    out << key.first.country << ',' << key.first.sector << ',' << key.second.country << ','
        << key.second.sector << ',' << csv::format_double(value) << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "failed writing '" + path + "'");
}

/// Warns for every SBS (country, sector) that is missing as an IOT origin or
/// destination. Returns the number of uncovered pairs.
inline std::size_t check_iot_coverage(const IoTable& iot, const SbsTable& sbs, Diagnostics* diag = nullptr) {
  std::set<CountrySector> origins, dests;
  for (const auto& [key, value] : iot.flows) {
    origins.insert(key.first);
    dests.insert(key.second);
  }
  std::set<CountrySector> missing;
  for (const auto& c : sbs.cells) {
    CountrySector cs{c.country, c.sector};
    if (!origins.count(cs) || !dests.count(cs)) missing.insert(cs);
  }
  for (const auto& cs : missing) warn(diag, "IOT coverage: " + cs.str() + " missing as origin or destination");
  return missing.size();
}

// ---------------------------------------------------------------------------
// Concordance

enum class CodeSystem { hs, isic3, isic4, nace2 };

inline std::string_view to_string(CodeSystem s) {
  switch (s) {
    case CodeSystem::hs: return "HS";
    case CodeSystem::isic3: return "ISIC3";
    case CodeSystem::isic4: return "ISIC4";
    case CodeSystem::nace2: return "NACE2";
  }
  return "";
}

inline std::optional<CodeSystem> code_system_from(std::string_view s) {
  for (auto sys : {CodeSystem::hs, CodeSystem::isic3, CodeSystem::isic4, CodeSystem::nace2}) {
    if (to_string(sys) == s) return sys;
  }
  return std::nullopt;
}

struct ConcordanceRow {
  CodeSystem source_system;
  std::string source_code;
  CodeSystem target_system;
  std::string target_code;
  double weight;

  friend bool operator==(const ConcordanceRow&, const ConcordanceRow&) = default;
};

class Concordance {
 public:
  using Targets = std::vector<std::pair<std::string, double>>;

  Concordance() = default;

  /// Validates weights in (0, 1] and that each source code's weights toward
  /// a target system sum to 1 within 1e-9.
  explicit Concordance(std::vector<ConcordanceRow> rows) : rows_(std::move(rows)) {
    std::set<std::tuple<CodeSystem, std::string, CodeSystem, std::string>> seen;
    for (const auto& r : rows_) {
      if (!(r.weight > 0.0 && r.weight <= 1.0)) {
        throw Error(ErrorKind::validation, "concordance weight for " + std::string(to_string(r.source_system)) + " " +
                                               r.source_code + " not in (0,1]");
      }
      if (!seen.emplace(r.source_system, r.source_code, r.target_system, r.target_code).second) {
        throw Error(ErrorKind::duplicate_key, "concordance row " + std::string(to_string(r.source_system)) + " " +
                                                  r.source_code + " -> " + r.target_code + " repeated");
      }
      index_[{r.source_system, r.source_code, r.target_system}].emplace_back(r.target_code, r.weight);
    }
    for (auto& [key, targets] : index_) {
      std::sort(targets.begin(), targets.end());
      double sum = 0.0;
      for (const auto& t : targets) sum += t.second;
      if (std::abs(sum - 1.0) > 1e-9) {
        throw Error(ErrorKind::validation, "concordance weights for " + std::string(to_string(std::get<0>(key))) +
                                               " " + std::get<1>(key) + " sum to " + csv::format_double(sum));
      }
    }
  }

  const std::vector<ConcordanceRow>& rows() const { return rows_; }

  const Targets* lookup(CodeSystem from, const std::string& code, CodeSystem to) const {
    auto it = index_.find({from, code, to});
    return it == index_.end() ? nullptr : &it->second;
  }

 private:
  std::vector<ConcordanceRow> rows_;
  std::map<std::tuple<CodeSystem, std::string, CodeSystem>, Targets> index_;
};

inline const std::vector<std::string>& concordance_header() {
  static const std::vector<std::string> h{"source_system", "source_code", "target_system", "target_code",
                                          "weight"};
  return h;
}

inline Concordance load_concordance(const std::string& path, Diagnostics* diag = nullptr) {
  const auto rows = csv::read_table(path, concordance_header());
  std::vector<ConcordanceRow> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    const auto where = csv::location(path, row);
    const auto src = code_system_from(row[0]);
    const auto dst = code_system_from(row[2]);
    if (!src || !dst) throw Error(ErrorKind::schema, where + ": unknown code system");
    if (row[1].empty() || row[3].empty()) throw Error(ErrorKind::parse, where + ": empty code");
    out.push_back({*src, row[1], *dst, row[3], csv::parse_double(row[4], where)});
  }
  bump(diag, "concordance.rows", out.size());
  return Concordance(std::move(out));
}

inline void write_concordance(const Concordance& conc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");
  out << csv::join(concordance_header()) << '\n';
  for (const auto& r : conc.rows()) {
    out << to_string(r.source_system) << ',' << r.source_code << ',' << to_string(r.target_system) << ','
        << r.target_code << ',' << csv::format_double(r.weight) << '\n';
  }
}

inline const std::vector<CodeSystem>& hs_to_nace_chain() {
  static const std::vector<CodeSystem> chain{CodeSystem::hs, CodeSystem::isic3, CodeSystem::isic4,
                                             CodeSystem::nace2};
  return chain;
}

/// Maps `code` through consecutive systems of `chain`, multiplying weights
/// along each path and merging paths that reach the same final code.
/// Result is sorted by target code.
inline Concordance::Targets apply_concordance(const std::string& code, const std::vector<CodeSystem>& chain,
                                              const Concordance& conc) {
  if (chain.size() < 2) throw Error(ErrorKind::config, "concordance chain needs at least two systems");
  std::map<std::string, double> current{{code, 1.0}};
  for (std::size_t step = 0; step + 1 < chain.size(); ++step) {
    std::map<std::string, double> next;
    for (const auto& [c, w] : current) {
      const auto* targets = conc.lookup(chain[step], c, chain[step + 1]);
      if (!targets) {
        throw Error(ErrorKind::unmapped_code, std::string(to_string(chain[step])) + " code '" + c +
                                                  "' has no mapping to " + std::string(to_string(chain[step + 1])) +
                                                  (step ? " (reached from '" + code + "')" : ""));
      }
      for (const auto& [t, tw] : *targets) next[t] += w * tw;
    }
    current = std::move(next);
  }
  return {current.begin(), current.end()};
}

// ---------------------------------------------------------------------------
// Imports by origin, sector and EU destination

struct ImportKey {
  Code origin;
  Code sector;
  Code dest;

  friend bool operator==(const ImportKey&, const ImportKey&) = default;
  friend auto operator<=>(const ImportKey&, const ImportKey&) = default;
};

struct ImportTable {
  std::map<ImportKey, double> values;

  bool empty() const { return values.empty(); }
  friend bool operator==(const ImportTable&, const ImportTable&) = default;
};

inline const std::vector<std::string>& trade_header() {
  static const std::vector<std::string> h{"origin_country", "hs_code", "dest_country", "value_eur"};
  return h;
}

inline const std::vector<std::string>& import_table_header() {
  static const std::vector<std::string> h{"origin_country", "sector", "dest_country", "value_eur"};
  return h;
}

struct ImportOptions {
  CountrySet eu = make_country_set(default_eu_countries());
  bool skip_unmapped = false;  // log and skip HS codes without a mapping
  std::vector<CodeSystem> chain = hs_to_nace_chain();
};

/// Reads HS-coded trade rows and converts them to NACE sectors, splitting
/// each value by concordance weight and summing per (origin, sector, dest).
inline ImportTable load_imports(const std::string& path, const Concordance& conc, const ImportOptions& opts = {},
                                Diagnostics* diag = nullptr) {
  const auto rows = detail::read_table_allow_empty(path, trade_header(), diag);
  ImportTable table;
  std::map<std::string, Concordance::Targets> cache;
  std::size_t skipped = 0;
  for (const auto& row : rows) {
    const auto where = csv::location(path, row);
    detail::require_country(row[0], where);
    detail::require_country(row[2], where);
    if (!opts.eu.count(Code(row[2]))) {
      throw Error(ErrorKind::schema, where + ": destination '" + row[2] + "' is not a configured EU country");
    }
    const double value = csv::parse_double(row[3], where);
    detail::require_nonnegative(value, "import value", where);

    auto it = cache.find(row[1]);
    if (it == cache.end()) {
      try {
        it = cache.emplace(row[1], apply_concordance(row[1], opts.chain, conc)).first;
      } catch (const Error& e) {
        if (!opts.skip_unmapped || e.kind() != ErrorKind::unmapped_code) {
          throw Error(e.kind(), where + ": HS code '" + row[1] + "' unmapped");
        }
        warn(diag, where + ": skipping unmapped HS code '" + row[1] + "'");
        ++skipped;
        continue;
      }
    }
    for (const auto& [sector, weight] : it->second) {
      detail::require_sector(sector, where + " (concordance target)");
      table.values[{Code(row[0]), Code(sector), Code(row[2])}] += value * weight;
    }
  }
  bump(diag, "trade.rows", rows.size());
  bump(diag, "trade.skipped_unmapped", skipped);
  bump(diag, "imports.rows", table.values.size());
  return table;
}

inline void write_import_table(const ImportTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");
  out << csv::join(import_table_header()) << '\n';
  for (const auto& [k, v] : table.values) {
    out << k.origin << ',' << k.sector << ',' << k.dest << ',' << csv::format_double(v) << '\n';
  }
}

/// Reads an already sector-coded import table written by write_import_table.
inline ImportTable load_import_table(const std::string& path, Diagnostics* diag = nullptr) {
  const auto rows = detail::read_table_allow_empty(path, import_table_header(), diag);
  ImportTable table;
  for (const auto& row : rows) {
    const auto where = csv::location(path, row);
    detail::require_country(row[0], where);
    detail::require_sector(row[1], where);
    detail::require_country(row[2], where);
    const double value = csv::parse_double(row[3], where);
    detail::require_nonnegative(value, "import value", where);
    if (!table.values.emplace(ImportKey{Code(row[0]), Code(row[1]), Code(row[2])}, value).second) {
      throw Error(ErrorKind::duplicate_key, where + ": duplicate import row");
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Violation lists

enum class ViolationKind { child_forced_labor, lawsuits };

inline std::string_view to_string(ViolationKind k) {
  return k == ViolationKind::child_forced_labor ? "child_forced_labor" : "lawsuits";
}

struct ViolationList {
  ViolationKind kind = ViolationKind::child_forced_labor;
  std::set<CountrySector> entries;

  bool contains(const CountrySector& cs) const { return entries.count(cs) > 0; }
  friend bool operator==(const ViolationList&, const ViolationList&) = default;
};

inline const std::vector<std::string>& violations_header() {
  static const std::vector<std::string> h{"country", "sector"};
  return h;
}

/// Duplicate rows collapse; rows naming an EU country are excluded with a
/// warning since EU firms are never treated as violators.
inline ViolationList load_violations(const std::string& path, ViolationKind kind,
                                     const CountrySet& eu = make_country_set(default_eu_countries()),
                                     Diagnostics* diag = nullptr) {
  const auto rows = detail::read_table_allow_empty(path, violations_header(), diag);
  ViolationList list;
  list.kind = kind;
  std::size_t excluded = 0;
  for (const auto& row : rows) {
    const auto where = csv::location(path, row);
    detail::require_country(row[0], where);
    detail::require_sector(row[1], where);
    if (eu.count(Code(row[0]))) {
      warn(diag, where + ": EU country " + row[0] + " excluded from violation list");
      ++excluded;
      continue;
    }
    list.entries.insert({Code(row[0]), Code(row[1])});
  }
  bump(diag, "violations." + std::string(to_string(kind)) + ".entries", list.entries.size());
  bump(diag, "violations." + std::string(to_string(kind)) + ".excluded_eu", excluded);
  return list;
}

inline void write_violations(const ViolationList& list, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");
  out << csv::join(violations_header()) << '\n';
  for (const auto& cs : list.entries) out << cs.country << ',' << cs.sector << '\n';
}

}  // namespace scdd
