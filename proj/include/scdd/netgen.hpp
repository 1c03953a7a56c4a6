#pragma once

// Network reconstruction: IOT-weighted pair sampling with degree-weighted
// endpoint draws, import-origin assignment for ROW dummies, and validation
// statistics for the realized network.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "scdd/alias_table.hpp"
#include "scdd/codes.hpp"
#include "scdd/diagnostics.hpp"
#include "scdd/error.hpp"
#include "scdd/ingest.hpp"
#include "scdd/network.hpp"
#include "scdd/random.hpp"
#include "scdd/sampler.hpp"
#include "scdd/stats.hpp"
#include "scdd/weighted_pool.hpp"

namespace scdd {

struct BuildProgress {
  std::uint64_t accepted = 0;
  std::uint64_t attempts = 0;
  std::uint64_t target = 0;
  double rejection_rate = 0.0;
};

struct BuildConfig {
  double stop_avg_links = 29.0;
  std::uint64_t max_attempts_factor = 50;
  std::uint64_t pool_empty_retries = 1000;
  std::uint64_t seed = 0;
  std::function<void(const BuildProgress&)> progress;  // called at most once per progress_interval
  double progress_interval_s = 1.0;
};

enum class StopReason { density_reached, attempts_exhausted, pools_exhausted };

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::density_reached: return "density_reached";
    case StopReason::attempts_exhausted: return "attempts_exhausted";
    case StopReason::pools_exhausted: return "pools_exhausted";
  }
  return "";
}

struct BuildStats {
  std::uint64_t accepted = 0;
  std::uint64_t attempts = 0;
  std::uint64_t rejected_self_loop = 0;
  std::uint64_t rejected_duplicate = 0;
  std::uint64_t masked_pair_draws = 0;
  std::uint64_t pruned_dummies = 0;
  std::uint64_t samplable_pairs = 0;
  StopReason stop = StopReason::density_reached;
};

struct BuildResult {
  SupplyNetwork network;
  BuildStats stats;
};

/// Block key used for wiring: (country, sector) for EU firms and
/// (row_marker, sector) for ROW dummies regardless of assigned origin.
inline CountrySector wiring_block(const Firm& f, const Code& row_marker) {
  return {f.is_row_dummy ? row_marker : f.country, f.sector};
}

namespace detail {

/// Per-buyer supplier lists in one flat array. Buyer b owns the slice
/// [offset[b], offset[b] + capacity) where capacity is its in-degree target;
/// the slice holds a sorted run followed by a short unsorted tail that is
/// merged into the run once it grows past kTailLimit.
class BuyerEdgeStore {
 public:
  static constexpr std::uint32_t kTailLimit = 16;

  explicit BuyerEdgeStore(const FirmList& firms) : offset_(firms.size() + 1, 0), count_(firms.size(), 0),
                                                   sorted_(firms.size(), 0) {
    for (std::size_t i = 0; i < firms.size(); ++i) offset_[i + 1] = offset_[i] + firms[i].k_in;
    store_.resize(offset_.back());
  }

  bool contains(NodeId buyer, NodeId supplier) const {
    const auto* base = store_.data() + offset_[buyer];
    if (std::binary_search(base, base + sorted_[buyer], supplier)) return true;
    return std::find(base + sorted_[buyer], base + count_[buyer], supplier) != base + count_[buyer];
  }

  void insert(NodeId buyer, NodeId supplier) {
    auto* base = store_.data() + offset_[buyer];
    base[count_[buyer]++] = supplier;
    if (count_[buyer] - sorted_[buyer] >= kTailLimit) merge(buyer);
  }

  void merge(NodeId buyer) {
    auto* base = store_.data() + offset_[buyer];
    std::sort(base + sorted_[buyer], base + count_[buyer]);
    std::inplace_merge(base, base + sorted_[buyer], base + count_[buyer]);
    sorted_[buyer] = count_[buyer];
  }

  std::span<NodeId> slice(NodeId buyer) { return {store_.data() + offset_[buyer], count_[buyer]}; }

 private:
  std::vector<std::uint64_t> offset_;
  std::vector<std::uint32_t> count_;
  std::vector<std::uint32_t> sorted_;
  std::vector<NodeId> store_;
};

}  // namespace detail

/// Wires the network. Repeatedly draws an (origin block, destination block)
/// pair proportional to IOT flow, a supplier from the origin block
/// proportional to residual k_out and a buyer from the destination block
/// proportional to residual k_in; self-loops and existing edges are
/// rejected, accepted edges decrement both residuals. Exhausted nodes leave
/// their pool and pairs touching an empty pool are masked.
///
/// Stops once links >= stop_avg_links * (EU firms + wired dummies), or after
/// max_attempts_factor * stop_avg_links * firms.size() attempts, or when no
/// pair remains. ROW dummies that never received their link are then removed
/// from `firms` (ids of the remaining dummies are compacted).
inline BuildResult build_network(FirmList& firms, const IoTable& iot, const BuildConfig& cfg,
                                 Diagnostics* diag = nullptr) {
  if (!(cfg.stop_avg_links > 0.0)) throw Error(ErrorKind::config, "stop_avg_links must be positive");
  for (std::size_t i = 0; i < firms.size(); ++i) {
    if (firms[i].id != i) throw Error(ErrorKind::integrity, "firm ids must be 0..n-1 in order");
  }

  // Blocks and their member pools.
  std::map<CountrySector, std::uint32_t> block_of;
  std::vector<std::vector<NodeId>> members;
  for (const auto& f : firms) {
    const auto key = wiring_block(f, iot.row_marker);
    auto [it, fresh] = block_of.emplace(key, static_cast<std::uint32_t>(members.size()));
    if (fresh) members.emplace_back();
    members[it->second].push_back(f.id);
  }
  std::vector<WeightedPool> out_pool, in_pool;
  for (const auto& m : members) {
    std::vector<std::uint32_t> wo(m.size()), wi(m.size());
    for (std::size_t k = 0; k < m.size(); ++k) {
      wo[k] = firms[m[k]].k_out;
      wi[k] = firms[m[k]].k_in;
    }
    out_pool.emplace_back(wo);
    in_pool.emplace_back(wi);
  }

  // Samplable block pairs.
  struct Pair {
    std::uint32_t origin, dest;
    double weight;
  };
  std::vector<Pair> pairs;
  for (const auto& [key, value] : iot.flows) {
    if (!(value > 0.0)) continue;
    auto o = block_of.find(key.first);
    auto d = block_of.find(key.second);
    if (o == block_of.end() || d == block_of.end()) continue;
    if (out_pool[o->second].total() == 0 || in_pool[d->second].total() == 0) continue;
    pairs.push_back({o->second, d->second, value});
  }
  std::vector<std::vector<std::uint32_t>> pairs_by_origin(members.size()), pairs_by_dest(members.size());
  for (std::uint32_t p = 0; p < pairs.size(); ++p) {
    pairs_by_origin[pairs[p].origin].push_back(p);
    pairs_by_dest[pairs[p].dest].push_back(p);
  }

  BuildStats stats;
  stats.samplable_pairs = pairs.size();
  std::size_t n_eu = 0, n_dummies = 0;
  for (const auto& f : firms) (f.is_row_dummy ? n_dummies : n_eu)++;
  const auto attempt_cap = static_cast<std::uint64_t>(
      std::ceil(static_cast<double>(cfg.max_attempts_factor) * cfg.stop_avg_links * static_cast<double>(firms.size())));

  std::vector<char> masked(pairs.size(), 0);
  std::vector<std::uint32_t> table_pairs;
  AliasTable table;
  double table_weight = 0.0, active_weight = 0.0;
  auto rebuild_table = [&]() {
    table_pairs.clear();
    std::vector<double> w;
    for (std::uint32_t p = 0; p < pairs.size(); ++p) {
      if (!masked[p]) {
        table_pairs.push_back(p);
        w.push_back(pairs[p].weight);
      }
    }
    table_weight = active_weight = 0.0;
    for (double x : w) table_weight += x;
    active_weight = table_weight;
    table = table_pairs.empty() ? AliasTable() : AliasTable(w);
  };
  auto mask = [&](const std::vector<std::uint32_t>& list) {
    for (auto p : list) {
      if (!masked[p]) {
        masked[p] = 1;
        active_weight -= pairs[p].weight;
      }
    }
  };
  rebuild_table();

  detail::BuyerEdgeStore store(firms);
  Rng rng = substream(cfg.seed, streams::build);
  std::uint64_t wired_dummies = 0;
  std::uint64_t consecutive_masked = 0;
  auto last_report = std::chrono::steady_clock::now();
  auto density_reached = [&]() {
    return static_cast<double>(stats.accepted) >=
           cfg.stop_avg_links * static_cast<double>(n_eu + wired_dummies);
  };

  if (pairs.empty()) {
    stats.stop = StopReason::pools_exhausted;
    warn(diag, "no IOT flow connects two populated blocks; network is empty");
  }
  while (!pairs.empty() && !density_reached()) {
    if (stats.attempts >= attempt_cap) {
      stats.stop = StopReason::attempts_exhausted;
      break;
    }
    if (table_pairs.empty() || active_weight <= 1e-12 * table_weight) {
      rebuild_table();
      if (table_pairs.empty()) {
        stats.stop = StopReason::pools_exhausted;
        break;
      }
    }
    const std::uint32_t p = table_pairs[table.sample(rng)];
    if (masked[p]) {
      ++stats.masked_pair_draws;
      if (++consecutive_masked > cfg.pool_empty_retries) {
        throw Error(ErrorKind::exhaustion, "no non-empty pool found after " +
                                               std::to_string(cfg.pool_empty_retries) + " consecutive pair draws");
      }
      if (active_weight <= 0.5 * table_weight) rebuild_table();
      continue;
    }
    consecutive_masked = 0;
    ++stats.attempts;

    const auto& pr = pairs[p];
    const std::size_t s_slot = out_pool[pr.origin].sample(rng);
    const std::size_t b_slot = in_pool[pr.dest].sample(rng);
    const NodeId supplier = members[pr.origin][s_slot];
    const NodeId buyer = members[pr.dest][b_slot];
    if (supplier == buyer) {
      ++stats.rejected_self_loop;
    } else if (store.contains(buyer, supplier)) {
      ++stats.rejected_duplicate;
    } else {
      store.insert(buyer, supplier);
      ++stats.accepted;
      if (firms[supplier].is_row_dummy) ++wired_dummies;
      out_pool[pr.origin].decrement(s_slot);
      in_pool[pr.dest].decrement(b_slot);
      if (out_pool[pr.origin].total() == 0) mask(pairs_by_origin[pr.origin]);
      if (in_pool[pr.dest].total() == 0) mask(pairs_by_dest[pr.dest]);
    }

    if (cfg.progress && (stats.attempts & 0xFFFF) == 0) {
      const auto now = std::chrono::steady_clock::now();
      if (std::chrono::duration<double>(now - last_report).count() >= cfg.progress_interval_s) {
        last_report = now;
        const auto target = static_cast<std::uint64_t>(cfg.stop_avg_links * static_cast<double>(n_eu + wired_dummies));
        cfg.progress({stats.accepted, stats.attempts, target,
                      1.0 - static_cast<double>(stats.accepted) / static_cast<double>(stats.attempts)});
      }
    }
  }

  if (stats.stop != StopReason::density_reached) {
    warn(diag, "network build stopped early (" + std::string(to_string(stats.stop)) + ") at " +
                   std::to_string(stats.accepted) + " links, average " +
                   csv::format_double(static_cast<double>(stats.accepted) /
                                      static_cast<double>(std::max<std::uint64_t>(1, n_eu + wired_dummies))) +
                   " links per firm");
  }

  // Drop unwired dummies; dummies never buy, so only supplier ids move.
  std::vector<NodeId> remap(firms.size());
  std::vector<char> wired(firms.size(), 0);
  for (std::size_t b = 0; b < firms.size(); ++b) {
    for (NodeId s : store.slice(static_cast<NodeId>(b))) wired[s] = 1;
  }
  FirmList kept;
  kept.reserve(n_eu + wired_dummies);
  for (auto& f : firms) {
    if (f.is_row_dummy && !wired[f.id]) {
      ++stats.pruned_dummies;
      continue;
    }
    remap[f.id] = static_cast<NodeId>(kept.size());
    kept.push_back(f);
    kept.back().id = remap[f.id];
  }

  std::vector<Edge> edges;
  edges.reserve(stats.accepted);
  for (std::size_t b = 0; b < firms.size(); ++b) {
    if (firms[b].is_row_dummy) continue;
    const auto buyer = static_cast<NodeId>(b);
    store.merge(buyer);
    for (NodeId s : store.slice(buyer)) edges.push_back({remap[s], remap[buyer]});
  }
  if (stats.pruned_dummies) {
    warn(diag, "removed " + std::to_string(stats.pruned_dummies) + " ROW dummies that received no link");
  }
  firms = std::move(kept);

  BuildResult result;
  result.network = SupplyNetwork::from_sorted_by_buyer(firms.size(), edges);
  result.stats = stats;
  bump(diag, "network.edges", stats.accepted);
  return result;
}

// ---------------------------------------------------------------------------
// Import origins

struct OriginAssignmentStats {
  std::size_t direct = 0;
  std::size_t sector_fallback = 0;
  std::size_t uniform_fallback = 0;
};

/// Gives every ROW dummy an origin country drawn proportional to import
/// value for (dummy sector, buyer country). Without rows for that pair the
/// sector's imports over all destinations are used, then a uniform draw
/// over all origins in the table.
inline OriginAssignmentStats assign_import_origins(const SupplyNetwork& net, FirmList& firms,
                                                   const ImportTable& imports, std::uint64_t seed,
                                                   Diagnostics* diag = nullptr) {
  OriginAssignmentStats stats;
  bool any_dummy = std::any_of(firms.begin(), firms.end(), [](const Firm& f) { return f.is_row_dummy; });
  if (!any_dummy) return stats;
  if (imports.empty()) throw Error(ErrorKind::assignment, "import table is empty; cannot assign ROW origins");

  struct Choice {
    std::vector<Code> origins;
    AliasTable table;
  };
  auto make_choice = [](const std::map<Code, double>& weights) {
    Choice c;
    std::vector<double> w;
    for (const auto& [origin, value] : weights) {
      if (value > 0.0) {
        c.origins.push_back(origin);
        w.push_back(value);
      }
    }
    if (!w.empty()) c.table = AliasTable(w);
    return c;
  };

  std::map<std::pair<Code, Code>, std::map<Code, double>> by_pair;  // (sector, dest)
  std::map<Code, std::map<Code, double>> by_sector;
  std::map<Code, double> uniform;
  for (const auto& [key, value] : imports.values) {
    by_pair[{key.sector, key.dest}][key.origin] += value;
    by_sector[key.sector][key.origin] += value;
    uniform[key.origin] = 1.0;
  }
  std::map<std::pair<Code, Code>, Choice> pair_choice;
  std::map<Code, Choice> sector_choice;
  const Choice uniform_choice = make_choice(uniform);
  if (uniform_choice.origins.empty()) throw Error(ErrorKind::assignment, "import table has no origins");

  Rng rng = substream(seed, streams::origins);
  std::set<std::string> logged;
  for (auto& f : firms) {
    if (!f.is_row_dummy) continue;
    const auto buyers = net.buyers(f.id);
    const Choice* choice = nullptr;
    if (!buyers.empty()) {
      const auto key = std::make_pair(f.sector, firms[buyers.front()].country);
      auto it = pair_choice.find(key);
      if (it == pair_choice.end()) {
        auto src = by_pair.find(key);
        it = pair_choice.emplace(key, src == by_pair.end() ? Choice{} : make_choice(src->second)).first;
      }
      if (!it->second.origins.empty()) {
        choice = &it->second;
        ++stats.direct;
      } else if (logged.insert(key.first.str() + "|" + key.second.str()).second) {
        warn(diag, "no imports for sector " + key.first.str() + " into " + key.second.str() +
                       "; using fallback origin distribution");
      }
    }
    if (!choice) {
      auto it = sector_choice.find(f.sector);
      if (it == sector_choice.end()) {
        auto src = by_sector.find(f.sector);
        it = sector_choice.emplace(f.sector, src == by_sector.end() ? Choice{} : make_choice(src->second)).first;
      }
      if (!it->second.origins.empty()) {
        choice = &it->second;
        ++stats.sector_fallback;
      } else {
        if (logged.insert("sector|" + f.sector.str()).second) {
          warn(diag, "no imports at all for sector " + f.sector.str() + "; drawing origin uniformly");
        }
        choice = &uniform_choice;
        ++stats.uniform_fallback;
      }
    }
    f.country = choice->origins[choice->table.sample(rng)];
  }
  bump(diag, "origins.direct", stats.direct);
  bump(diag, "origins.sector_fallback", stats.sector_fallback);
  bump(diag, "origins.uniform_fallback", stats.uniform_fallback);
  return stats;
}

// ---------------------------------------------------------------------------
// Validation

struct CcdfPoint {
  std::uint64_t degree;
  double ccdf;  // fraction of nodes with degree >= `degree`
};

struct ValidationReport {
  std::optional<double> pair_flow_correlation;  // Spearman, empty when undefined
  std::size_t pair_count = 0;
  std::vector<CcdfPoint> in_degree_ccdf;
  std::vector<CcdfPoint> out_degree_ccdf;
  std::optional<double> mean_path_length_estimate;
  std::size_t path_samples = 0;
  double realized_avg_degree = 0.0;
  std::optional<double> target_out_degree_correlation;  // Spearman(realized, k_out) over EU firms
  std::size_t n_nodes = 0;
  std::size_t n_edges = 0;
};

namespace detail {

inline std::vector<CcdfPoint> degree_ccdf(std::vector<std::uint64_t> degrees, std::size_t max_points = 64) {
  std::vector<CcdfPoint> out;
  if (degrees.empty()) return out;
  std::sort(degrees.begin(), degrees.end());
  const double n = static_cast<double>(degrees.size());
  std::vector<CcdfPoint> all;
  for (std::size_t i = 0; i < degrees.size();) {
    std::size_t j = i;
    while (j < degrees.size() && degrees[j] == degrees[i]) ++j;
    all.push_back({degrees[i], static_cast<double>(degrees.size() - i) / n});
    i = j;
  }
  if (all.size() <= max_points) return all;
  // Log-spaced picks over the distinct values, always keeping the last.
  std::size_t last = static_cast<std::size_t>(-1);
  for (std::size_t k = 0; k < max_points; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(max_points - 1);
    auto idx = static_cast<std::size_t>(std::round(std::expm1(t * std::log1p(static_cast<double>(all.size() - 1)))));
    idx = std::min(idx, all.size() - 1);
    if (idx != last) out.push_back(all[idx]);
    last = idx;
  }
  return out;
}

/// Unweighted single-source distances along supplier -> buyer edges; -1 for
/// unreachable nodes.
inline std::vector<std::int32_t> bfs_forward(const SupplyNetwork& net, NodeId source) {
  std::vector<std::int32_t> dist(net.n_nodes(), -1);
  std::vector<NodeId> frontier{source}, next;
  dist[source] = 0;
  for (std::int32_t d = 1; !frontier.empty(); ++d) {
    next.clear();
    for (NodeId u : frontier) {
      for (NodeId v : net.buyers(u)) {
        if (dist[v] < 0) {
          dist[v] = d;
          next.push_back(v);
        }
      }
    }
    frontier.swap(next);
  }
  return dist;
}

}  // namespace detail

/// Spearman correlation of IOT flow against realized links per block pair,
/// degree CCDFs, and a sampled characteristic path length: BFS from up to 32
/// random sources, averaging the distance to random reachable targets until
/// `sample_pairs` pairs are collected.
inline ValidationReport validate_network(const SupplyNetwork& net, const FirmList& firms, const IoTable& iot,
                                         std::size_t sample_pairs, std::uint64_t seed) {
  if (firms.size() != net.n_nodes()) throw Error(ErrorKind::integrity, "firm list does not match network size");
  ValidationReport rep;
  rep.n_nodes = net.n_nodes();
  rep.n_edges = net.n_edges();
  rep.realized_avg_degree = net.n_nodes() ? static_cast<double>(net.n_edges()) / static_cast<double>(net.n_nodes()) : 0.0;

  std::map<CountrySector, std::uint32_t> block_of;
  std::vector<std::uint32_t> node_block(firms.size());
  for (const auto& f : firms) {
    node_block[f.id] = block_of.emplace(wiring_block(f, iot.row_marker), static_cast<std::uint32_t>(block_of.size()))
                           .first->second;
  }
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> links;
  for (NodeId b = 0; b < net.n_nodes(); ++b) {
    for (NodeId s : net.suppliers(b)) ++links[{node_block[s], node_block[b]}];
  }
  std::vector<double> flow, count;
  for (const auto& [key, value] : iot.flows) {
    if (!(value > 0.0)) continue;
    auto o = block_of.find(key.first);
    auto d = block_of.find(key.second);
    if (o == block_of.end() || d == block_of.end()) continue;
    flow.push_back(value);
    auto it = links.find({o->second, d->second});
    count.push_back(it == links.end() ? 0.0 : static_cast<double>(it->second));
  }
  rep.pair_count = flow.size();
  rep.pair_flow_correlation = stats::spearman(flow, count);

  std::vector<std::uint64_t> din(net.n_nodes()), dout(net.n_nodes());
  for (NodeId i = 0; i < net.n_nodes(); ++i) {
    din[i] = net.in_degree(i);
    dout[i] = net.out_degree(i);
  }
  rep.in_degree_ccdf = detail::degree_ccdf(din);
  rep.out_degree_ccdf = detail::degree_ccdf(dout);

  std::vector<double> realized, target;
  for (const auto& f : firms) {
    if (f.is_row_dummy) continue;
    realized.push_back(static_cast<double>(dout[f.id]));
    target.push_back(static_cast<double>(f.k_out));
  }
  rep.target_out_degree_correlation = stats::spearman(realized, target);

  // Characteristic path length over reachable ordered pairs. Sources are
  // drawn uniformly; each source's mean distance (exact when it reaches few
  // nodes, subsampled otherwise) is weighted by how many nodes it reaches.
  if (net.n_edges() > 0 && sample_pairs > 0) {
    Rng rng = substream(seed, streams::validation);
    const std::size_t n_sources = std::min<std::size_t>(32, sample_pairs);
    const std::size_t per_source = (sample_pairs + n_sources - 1) / n_sources;
    double weighted = 0.0, reach_total = 0.0;
    for (std::size_t k = 0; k < n_sources; ++k) {
      const auto src = static_cast<NodeId>(uniform_below(rng, net.n_nodes()));
      const auto dist = detail::bfs_forward(net, src);
      std::vector<NodeId> reached;
      for (NodeId v = 0; v < dist.size(); ++v) {
        if (dist[v] > 0) reached.push_back(v);
      }
      if (reached.empty()) continue;
      double sum = 0.0;
      std::size_t taken = 0;
      if (reached.size() <= per_source) {
        for (NodeId v : reached) sum += dist[v];
        taken = reached.size();
      } else {
        for (; taken < per_source; ++taken) sum += dist[reached[uniform_below(rng, reached.size())]];
      }
      rep.path_samples += taken;
      weighted += static_cast<double>(reached.size()) * sum / static_cast<double>(taken);
      reach_total += static_cast<double>(reached.size());
    }
    if (reach_total > 0.0) rep.mean_path_length_estimate = weighted / reach_total;
  }
  return rep;
}

}  // namespace scdd
