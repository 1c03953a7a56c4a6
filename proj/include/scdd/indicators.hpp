#pragma once

// Supply-chain due-diligence indicators on a reconstructed network: tiered
// risk flags, exposure counts, directive coverage groups and monitoring
// workload statistics.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "scdd/codes.hpp"
#include "scdd/csv.hpp"
#include "scdd/diagnostics.hpp"
#include "scdd/error.hpp"
#include "scdd/ingest.hpp"
#include "scdd/network.hpp"
#include "scdd/sampler.hpp"

namespace scdd {

/// One byte per node; 1 = flagged.
using Flags = std::vector<std::uint8_t>;

/// v[i] = 1 iff firm i is a ROW dummy whose (origin, sector) is listed.
inline Flags mark_violators(const FirmList& firms, const ViolationList& viol) {
  Flags v(firms.size(), 0);
  for (const auto& f : firms) {
    if (!f.is_row_dummy) continue;
    if (f.country.empty()) {
      throw Error(ErrorKind::unassigned_origin, "ROW dummy " + std::to_string(f.id) + " has no origin country");
    }
    v[f.id] = viol.contains({f.country, f.sector}) ? 1 : 0;
  }
  return v;
}

enum class Semantics { exact, cumulative };

inline std::string_view to_string(Semantics s) { return s == Semantics::exact ? "exact" : "cumulative"; }

struct TierRisk {
  Semantics kind = Semantics::exact;
  int k = 0;
  Flags flags;
};

enum class Direction {
  upstream,    // gather over suppliers: walks from a buyer toward its suppliers
  downstream,  // gather over buyers
};

namespace detail {

template <typename Fn>
void parallel_ranges(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, threads);
  if (threads == 1 || n < 4096) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t b = t * chunk, e = std::min(n, b + chunk);
    if (b < e) pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Exact-walk flags for tiers 1..max_k: w_0 = seed and
/// w_{t+1}[i] = OR over neighbours j of i of w_t[j], where neighbours are the
/// suppliers (upstream) or buyers (downstream) of i. O(max_k * L).
inline std::vector<Flags> propagate_tiers(const SupplyNetwork& net, const Flags& seed, int max_k,
                                          Direction dir = Direction::upstream, unsigned threads = 1) {
  if (seed.size() != net.n_nodes()) throw Error(ErrorKind::integrity, "flag vector does not match network size");
  std::vector<Flags> tiers;
  tiers.reserve(static_cast<std::size_t>(std::max(0, max_k)));
  const Flags* prev = &seed;
  for (int t = 1; t <= max_k; ++t) {
    Flags next(net.n_nodes(), 0);
    detail::parallel_ranges(net.n_nodes(), threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const auto nb = dir == Direction::upstream ? net.suppliers(static_cast<NodeId>(i))
                                                   : net.buyers(static_cast<NodeId>(i));
        for (NodeId j : nb) {
          if ((*prev)[j]) {
            next[i] = 1;
            break;
          }
        }
      }
    });
    tiers.push_back(std::move(next));
    prev = &tiers.back();
  }
  return tiers;
}

/// Flags firms with a supply walk of exactly k links down to a violator.
/// k = 0 returns v.
inline TierRisk risk_exact(const SupplyNetwork& net, const Flags& v, int k, unsigned threads = 1) {
  if (k < 0) throw Error(ErrorKind::validation, "tier must be >= 0");
  if (k == 0) return {Semantics::exact, 0, v};
  auto tiers = propagate_tiers(net, v, k, Direction::upstream, threads);
  return {Semantics::exact, k, std::move(tiers.back())};
}

/// Flags firms with a supply walk of 1..k links down to a violator.
inline TierRisk risk_cumulative(const SupplyNetwork& net, const Flags& v, int k, unsigned threads = 1) {
  if (k < 1) throw Error(ErrorKind::validation, "cumulative tier must be >= 1");
  const auto tiers = propagate_tiers(net, v, k, Direction::upstream, threads);
  Flags acc(net.n_nodes(), 0);
  for (const auto& t : tiers) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] |= t[i];
  }
  return {Semantics::cumulative, k, std::move(acc)};
}

/// Exact and cumulative flags for every tier 1..max_k from a single pass.
inline std::vector<TierRisk> risk_all_tiers(const SupplyNetwork& net, const Flags& v, int max_k,
                                            unsigned threads = 1) {
  const auto tiers = propagate_tiers(net, v, max_k, Direction::upstream, threads);
  std::vector<TierRisk> out;
  Flags acc(net.n_nodes(), 0);
  for (int k = 1; k <= max_k; ++k) {
    const auto& t = tiers[static_cast<std::size_t>(k - 1)];
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] |= t[i];
    out.push_back({Semantics::exact, k, t});
    out.push_back({Semantics::cumulative, k, acc});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation

struct GroupBy {
  bool country = false;
  bool sector = false;
  bool band = false;

  std::string name() const {
    std::string n;
    if (country) n += "country";
    if (sector) n += std::string(n.empty() ? "" : "_") + "sector";
    if (band) n += std::string(n.empty() ? "" : "_") + "band";
    return n.empty() ? "eu" : n;
  }
};

/// Group key of an EU firm, e.g. "country:AT|sector:C29"; "EU" when no
/// dimension is selected.
inline std::string group_key(const Firm& f, const GroupBy& g) {
  std::string key;
  auto add = [&](std::string_view dim, std::string_view value) {
    if (!key.empty()) key += '|';
    key += dim;
    key += ':';
    key += value;
  };
  if (g.country) add("country", f.country.view());
  if (g.sector) add("sector", f.sector.view());
  if (g.band) add("band", band_label(f.band));
  return key.empty() ? "EU" : key;
}

struct RiskRow {
  std::string group_key;
  int tier = 0;
  Semantics semantics = Semantics::exact;
  double fraction = 0.0;
  std::uint64_t n_firms = 0;
  std::uint64_t n_flagged = 0;
};

/// Fraction of flagged firms per group over non-dummy firms only. Groups are
/// those present among the firms, in key order. `expected_groups`, when
/// given, names groups that must appear; missing ones are warned about and
/// omitted.
inline std::vector<RiskRow> aggregate_risk(const TierRisk& risk, const FirmList& firms, const GroupBy& g,
                                           Diagnostics* diag = nullptr,
                                           const std::vector<std::string>& expected_groups = {}) {
  if (risk.flags.size() != firms.size()) throw Error(ErrorKind::integrity, "risk flags do not match firm list");
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> acc;  // key -> (n, flagged)
  for (const auto& f : firms) {
    if (f.is_row_dummy) continue;
    auto& a = acc[group_key(f, g)];
    ++a.first;
    a.second += risk.flags[f.id] ? 1 : 0;
  }
  for (const auto& key : expected_groups) {
    if (!acc.count(key)) warn(diag, "risk group '" + key + "' has no firms; row omitted");
  }
  std::vector<RiskRow> rows;
  for (const auto& [key, a] : acc) {
    rows.push_back({key, risk.k, risk.kind, static_cast<double>(a.second) / static_cast<double>(a.first), a.first,
                    a.second});
  }
  return rows;
}

inline const std::vector<std::string>& risk_header() {
  static const std::vector<std::string> h{"group_key", "tier", "semantics", "fraction", "n_firms"};
  return h;
}

inline void write_risk_report(const std::vector<RiskRow>& rows, std::ostream& out) {
  out << csv::join(risk_header()) << '\n';
  for (const auto& r : rows) {
    out << r.group_key << ',' << r.tier << ',' << to_string(r.semantics) << ',' << csv::format_double(r.fraction)
        << ',' << r.n_firms << '\n';
  }
}

// ---------------------------------------------------------------------------
// Exposure

struct ExposureRow {
  Code eu_country;
  Code eu_sector;
  BandIndex band = kNoBand;  // kNoBand when not split by band
  Code viol_country;
  Code viol_sector;
  std::uint64_t links = 0;
  double share = 0.0;  // links / all violator links of the EU group
};

struct ExposureTarget {
  Code country;
  Code sector;
  std::optional<BandIndex> band;
};

namespace detail {

inline std::vector<ExposureRow> exposure_rows(const SupplyNetwork& net, const FirmList& firms,
                                              const ViolationList& viol, bool by_band,
                                              const std::optional<ExposureTarget>& only) {
  if (firms.size() != net.n_nodes()) throw Error(ErrorKind::integrity, "firm list does not match network size");
  using GroupKey = std::tuple<Code, Code, BandIndex>;
  std::map<GroupKey, std::map<CountrySector, std::uint64_t>> counts;
  for (const auto& f : firms) {
    if (f.is_row_dummy) continue;
    if (only && (f.country != only->country || f.sector != only->sector || (only->band && f.band != *only->band))) {
      continue;
    }
    const GroupKey key{f.country, f.sector, by_band ? f.band : kNoBand};
    for (NodeId s : net.suppliers(f.id)) {
      const auto& sup = firms[s];
      if (!sup.is_row_dummy) continue;
      if (sup.country.empty()) {
        throw Error(ErrorKind::unassigned_origin, "ROW dummy " + std::to_string(sup.id) + " has no origin country");
      }
      const CountrySector cs{sup.country, sup.sector};
      if (viol.contains(cs)) ++counts[key][cs];
    }
  }
  std::vector<ExposureRow> rows;
  for (const auto& [key, cells] : counts) {
    std::uint64_t total = 0;
    for (const auto& [cs, n] : cells) total += n;
    for (const auto& [cs, n] : cells) {
      rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), cs.country, cs.sector, n,
                      static_cast<double>(n) / static_cast<double>(total)});
    }
  }
  return rows;
}

}  // namespace detail

/// Links from violator dummies into one EU group, keyed by the dummies'
/// (origin, sector). Empty when the group has no such supplier.
inline std::vector<ExposureRow> exposure(const SupplyNetwork& net, const FirmList& firms, const ViolationList& viol,
                                         const ExposureTarget& target) {
  return detail::exposure_rows(net, firms, viol, target.band.has_value(), target);
}

/// Exposure rows for every EU (country, sector[, band]) group with any
/// violator supplier.
inline std::vector<ExposureRow> exposure_matrix(const SupplyNetwork& net, const FirmList& firms,
                                                const ViolationList& viol, bool by_band = false) {
  return detail::exposure_rows(net, firms, viol, by_band, std::nullopt);
}

inline const std::vector<std::string>& exposure_header() {
  static const std::vector<std::string> h{"eu_country", "eu_sector", "band", "viol_country", "viol_sector",
                                          "links", "share"};
  return h;
}

inline void write_exposure(const std::vector<ExposureRow>& rows, std::ostream& out) {
  out << csv::join(exposure_header()) << '\n';
  for (const auto& r : rows) {
    out << r.eu_country << ',' << r.eu_sector << ',' << (r.band == kNoBand ? "all" : band_label(r.band)) << ','
        << r.viol_country << ',' << r.viol_sector << ',' << r.links << ',' << csv::format_double(r.share) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Directive coverage

inline std::set<Code> default_high_impact_sectors() {
  // Agriculture, forestry, fishing; mining; food and beverages; textiles,
  // apparel, leather; non-metallic minerals; basic and fabricated metals;
  // wholesale trade.
  std::set<Code> s;
  for (const char* c : {"A01", "A02", "A03", "B05", "B06", "B07", "B08", "B09", "C10", "C11", "C13", "C14", "C15",
                        "C23", "C24", "C25", "G46"}) {
    s.insert(Code(c));
  }
  return s;
}

struct CsdddThresholds {
  std::int64_t g1_employees = 500;
  double g1_turnover = 150e6;
  std::int64_t g2_employees = 250;
  double g2_turnover = 40e6;
  std::set<Code> high_impact_sectors = default_high_impact_sectors();
};

enum class CsdddGroup : std::uint8_t { none, group1, group2 };

inline std::string_view to_string(CsdddGroup g) {
  switch (g) {
    case CsdddGroup::group1: return "group1";
    case CsdddGroup::group2: return "group2";
    default: return "none";
  }
}

/// Strict thresholds: group1 needs employees > g1 and turnover > g1; group2
/// the same against g2 in a high-impact sector. ROW dummies are never
/// covered.
inline std::vector<CsdddGroup> classify_csddd(const FirmList& firms, const CsdddThresholds& thr) {
  if (thr.g1_employees < thr.g2_employees || thr.g1_turnover < thr.g2_turnover) {
    throw Error(ErrorKind::config, "group-1 thresholds must not be below group-2 thresholds");
  }
  std::vector<CsdddGroup> out(firms.size(), CsdddGroup::none);
  for (const auto& f : firms) {
    if (f.is_row_dummy) continue;
    if (f.employees > thr.g1_employees && f.turnover > thr.g1_turnover) {
      out[f.id] = CsdddGroup::group1;
    } else if (thr.high_impact_sectors.count(f.sector) && f.employees > thr.g2_employees &&
               f.turnover > thr.g2_turnover) {
      out[f.id] = CsdddGroup::group2;
    }
  }
  return out;
}

struct SectorMonitoring {
  Code sector;
  std::uint64_t n_firms = 0;
  std::uint64_t n_covered = 0;
  double covered_fraction = 0.0;
  std::uint64_t n_tier1_suppliers = 0;  // firms of this sector supplying a covered firm
  double tier1_supplier_fraction = 0.0;
  double links_per_covered_firm = 0.0;  // mean in-degree of covered firms in this sector
  std::uint64_t links_total = 0;        // in-links of covered firms in this sector
};

struct MonitoringReport {
  std::vector<SectorMonitoring> sectors;
  std::uint64_t n_group1 = 0;
  std::uint64_t n_group2 = 0;
  std::uint64_t n_covered = 0;
  std::uint64_t distinct_suppliers = 0;  // direct suppliers of covered firms, ROW dummies included
  std::uint64_t supply_links = 0;        // in-links of covered firms
  std::uint64_t row_links = 0;           // in-links of covered firms from ROW dummies
  std::uint64_t tier3_links = 0;         // links into covered firms and their tier-1/tier-2 suppliers
  std::uint64_t tier3_nodes = 0;         // distinct firms at supply tiers 1..3 of covered firms
  double node_link_ratio = 0.0;          // tier3_links / tier3_nodes
};

/// Monitoring workload of the covered (group 1 or 2) firms. Tiers follow
/// walk semantics: tier t holds every firm reachable from a covered firm by
/// t supplier steps.
inline MonitoringReport monitoring_stats(const SupplyNetwork& net, const FirmList& firms,
                                         const std::vector<CsdddGroup>& labels, Diagnostics* diag = nullptr,
                                         unsigned threads = 1) {
  if (firms.size() != net.n_nodes() || labels.size() != firms.size()) {
    throw Error(ErrorKind::integrity, "firm list, labels and network sizes differ");
  }
  MonitoringReport rep;
  Flags covered(firms.size(), 0);
  for (const auto& f : firms) {
    if (labels[f.id] == CsdddGroup::group1) ++rep.n_group1;
    if (labels[f.id] == CsdddGroup::group2) ++rep.n_group2;
    covered[f.id] = labels[f.id] != CsdddGroup::none ? 1 : 0;
  }
  rep.n_covered = rep.n_group1 + rep.n_group2;

  // tiers[t-1][j] = 1 iff j is a supplier at tier t of some covered firm.
  const auto tiers = propagate_tiers(net, covered, 3, Direction::downstream, threads);
  const Flags& tier1 = tiers[0];

  std::map<Code, SectorMonitoring> by_sector;
  for (const auto& f : firms) {
    if (f.is_row_dummy) continue;
    auto& s = by_sector[f.sector];
    s.sector = f.sector;
    ++s.n_firms;
    if (covered[f.id]) {
      ++s.n_covered;
      s.links_total += net.in_degree(f.id);
    }
    if (tier1[f.id]) ++s.n_tier1_suppliers;
  }
  for (auto& [code, s] : by_sector) {
    s.covered_fraction = static_cast<double>(s.n_covered) / static_cast<double>(s.n_firms);
    s.tier1_supplier_fraction = static_cast<double>(s.n_tier1_suppliers) / static_cast<double>(s.n_firms);
    s.links_per_covered_firm = s.n_covered ? static_cast<double>(s.links_total) / static_cast<double>(s.n_covered) : 0.0;
    rep.sectors.push_back(s);
  }

  for (std::size_t j = 0; j < firms.size(); ++j) {
    if (tier1[j]) ++rep.distinct_suppliers;
    if (tier1[j] || tiers[1][j] || tiers[2][j]) ++rep.tier3_nodes;
    if (covered[j] || tier1[j] || tiers[1][j]) rep.tier3_links += net.in_degree(static_cast<NodeId>(j));
    if (covered[j]) {
      rep.supply_links += net.in_degree(static_cast<NodeId>(j));
      for (NodeId s : net.suppliers(static_cast<NodeId>(j))) rep.row_links += firms[s].is_row_dummy ? 1 : 0;
    }
  }
  rep.node_link_ratio = rep.tier3_nodes ? static_cast<double>(rep.tier3_links) / static_cast<double>(rep.tier3_nodes)
                                        : 0.0;
  if (rep.n_covered == 0) warn(diag, "no firm meets the directive thresholds; monitoring report is all zero");
  return rep;
}

}  // namespace scdd
