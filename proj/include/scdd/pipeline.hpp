#pragma once

// Pipeline stages behind the command-line tool: ingest, sample, build,
// risk, exposure, validate and the end-to-end run. Every stage writes its
// files through an OutputSet, which stages them as "<name>.partial" and
// renames them once complete, recording a checksum per file.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "scdd/checksum.hpp"
#include "scdd/config.hpp"
#include "scdd/diagnostics.hpp"
#include "scdd/error.hpp"
#include "scdd/indicators.hpp"
#include "scdd/ingest.hpp"
#include "scdd/netgen.hpp"
#include "scdd/network.hpp"
#include "scdd/sampler.hpp"
#include "scdd/version.hpp"

namespace scdd::pipeline {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct OutputFile {
  std::string name;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create output directory '" + dir_.string() + "': " + ec.message());
  }

  const fs::path& dir() const { return dir_; }
  fs::path path(const std::string& name) const { return dir_ / name; }

  /// Writes `name` via `fill`. On an exception the "<name>.partial" file is
  /// left behind.
  const OutputFile& write(const std::string& name, const std::function<void(std::ostream&)>& fill) {
    const auto final_path = path(name);
    const auto partial = fs::path(final_path.string() + ".partial");
    {
      std::ofstream out(partial, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorKind::io, "cannot write '" + partial.string() + "'");
      fill(out);
      out.flush();
      if (!out) throw Error(ErrorKind::io, "failed writing '" + partial.string() + "'");
    }
    fs::rename(partial, final_path);
    files_.push_back({name, sha256_file(final_path.string()), fs::file_size(final_path)});
    return files_.back();
  }

  const std::vector<OutputFile>& files() const { return files_; }

  json files_json() const {
    json j = json::object();
    for (const auto& f : files_) j[f.name] = {{"sha256", f.sha256}, {"bytes", f.bytes}};
    return j;
  }

 private:
  fs::path dir_;
  std::vector<OutputFile> files_;
};

class StageTimer {
 public:
  void start(const std::string& stage) {
    stage_ = stage;
    t0_ = std::chrono::steady_clock::now();
  }
  void stop() {
    timings_[stage_] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }
  json to_json() const {
    json j = json::object();
    for (const auto& [k, v] : timings_) j[k] = v;
    return j;
  }

 private:
  std::string stage_;
  std::chrono::steady_clock::time_point t0_;
  std::map<std::string, double> timings_;
};

// ---------------------------------------------------------------------------

struct Tables {
  SbsTable sbs;
  IoTable iot;
  Concordance concordance;
  ImportTable imports;
  ViolationList child_forced_labor;
  ViolationList lawsuits;
};

namespace detail {

inline void require_input(const std::string& path, const std::string& key) {
  if (path.empty()) throw Error(ErrorKind::config, "inputs." + key + " is not set");
  if (!fs::exists(path)) throw Error(ErrorKind::io, "input file not found: " + path);
}

inline json counters_json(const Diagnostics& diag) {
  json j = json::object();
  for (const auto& [k, v] : diag.counters) j[k] = v;
  return j;
}

inline json warnings_json(const Diagnostics& diag) { return json(diag.warnings); }

inline void write_json(OutputSet& out, const std::string& name, const json& j) {
  out.write(name, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

}  // namespace detail

inline ViolationList load_violation_input(const PipelineConfig& cfg, ViolationKind kind, Diagnostics& diag) {
  const auto& path =
      kind == ViolationKind::child_forced_labor ? cfg.violations_child_forced_labor : cfg.violations_lawsuits;
  detail::require_input(path, "violations_" + std::string(to_string(kind)));
  return load_violations(path, kind, make_country_set(cfg.eu_countries), &diag);
}

inline Tables load_tables(const PipelineConfig& cfg, Diagnostics& diag) {
  detail::require_input(cfg.sbs, "sbs");
  detail::require_input(cfg.iot, "iot");
  detail::require_input(cfg.trade, "trade");
  detail::require_input(cfg.concordance, "concordance");
  Tables t;
  t.sbs = load_sbs(cfg.sbs, &diag);
  t.iot = load_iot(cfg.iot, &diag, cfg.row_marker);
  check_iot_coverage(t.iot, t.sbs, &diag);
  t.concordance = load_concordance(cfg.concordance, &diag);
  ImportOptions opts;
  opts.eu = make_country_set(cfg.eu_countries);
  opts.skip_unmapped = cfg.skip_unmapped;
  t.imports = load_imports(cfg.trade, t.concordance, opts, &diag);
  t.child_forced_labor = load_violation_input(cfg, ViolationKind::child_forced_labor, diag);
  t.lawsuits = load_violation_input(cfg, ViolationKind::lawsuits, diag);
  return t;
}

inline json base_manifest(const PipelineConfig& cfg, const std::string& command) {
  const auto ini = to_ini(cfg);
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["network_format_version"] = kNetworkFormatVersion;
  m["seed"] = cfg.seed;
  m["config_sha256"] = sha256_hex(ini);
  m["config"] = ini;
  return m;
}

// ---------------------------------------------------------------------------
// ingest

inline json cmd_ingest(const PipelineConfig& cfg, Diagnostics& diag) {
  Tables t = load_tables(cfg, diag);
  OutputSet tables(fs::path(cfg.output_dir) / "ingest");
  // The table writers take a path, so stage through a scratch file.
  auto copy_into = [&](const std::string& name, const std::function<void(const std::string&)>& writer) {
    const auto tmp = tables.path(name + ".tmp").string();
    writer(tmp);
    tables.write(name, [&](std::ostream& os) {
      std::ifstream in(tmp, std::ios::binary);
      os << in.rdbuf();
    });
    fs::remove(tmp);
  };
  copy_into("sbs.csv", [&](const std::string& p) { write_sbs(t.sbs, p); });
  copy_into("iot.csv", [&](const std::string& p) { write_iot(t.iot, p); });
  copy_into("concordance.csv", [&](const std::string& p) { write_concordance(t.concordance, p); });
  copy_into("imports.csv", [&](const std::string& p) { write_import_table(t.imports, p); });
  copy_into("violations_child_forced_labor.csv", [&](const std::string& p) { write_violations(t.child_forced_labor, p); });
  copy_into("violations_lawsuits.csv", [&](const std::string& p) { write_violations(t.lawsuits, p); });

  json m = base_manifest(cfg, "ingest");
  m["row_counts"] = {{"sbs", t.sbs.cells.size()},
                     {"iot", t.iot.flows.size()},
                     {"concordance", t.concordance.rows().size()},
                     {"imports", t.imports.values.size()},
                     {"violations_child_forced_labor", t.child_forced_labor.entries.size()},
                     {"violations_lawsuits", t.lawsuits.entries.size()}};
  m["drop_counts"] = {{"sbs_missing_n_firms", diag.count("sbs.dropped_missing_n_firms")},
                      {"iot_non_intermediate", diag.count("iot.ignored_non_intermediate")},
                      {"trade_unmapped", diag.count("trade.skipped_unmapped")},
                      {"violations_eu_excluded", diag.count("violations.child_forced_labor.excluded_eu") +
                                                     diag.count("violations.lawsuits.excluded_eu")}};
  m["counters"] = detail::counters_json(diag);
  m["warnings"] = detail::warnings_json(diag);
  m["outputs"] = tables.files_json();
  detail::write_json(tables, "ingest_manifest.json", m);
  return m;
}

// ---------------------------------------------------------------------------
// sample

struct SampleResult {
  FirmList firms;
  DegreeCalibration calibration;
  std::size_t row_dummies = 0;
};

inline SampleResult run_sampling(const PipelineConfig& cfg, Tables& t, Diagnostics& diag) {
  impute_sbs(t.sbs, &diag);
  const auto fits = fit_sbs(t.sbs, cfg.grid);
  SampleResult r;
  r.firms = sample_firms(t.sbs, fits, cfg.scale_factor, cfg.seed, cfg.threads);
  r.calibration = assign_degrees(r.firms, cfg.scaling, cfg.seed, &diag);
  r.row_dummies = make_row_dummies(r.firms, t.iot, cfg.degenerate_row_ratio, &diag);
  return r;
}

inline json calibration_json(const SampleResult& s) {
  return {{"firms", s.firms.size() - s.row_dummies},
          {"row_dummies", s.row_dummies},
          {"exp_beta_out", s.calibration.exp_beta_out},
          {"exp_beta_in", s.calibration.exp_beta_in},
          {"mean_k_out", s.calibration.mean_k_out},
          {"mean_k_in", s.calibration.mean_k_in},
          {"zero_turnover_firms", s.calibration.zero_turnover}};
}

inline json cmd_sample(const PipelineConfig& cfg, Diagnostics& diag) {
  StageTimer timer;
  Tables t = load_tables(cfg, diag);
  timer.start("sample");
  auto s = run_sampling(cfg, t, diag);
  timer.stop();
  OutputSet out(cfg.output_dir);
  out.write("firms.csv", [&](std::ostream& os) { write_firms(s.firms, os); });
  json m = base_manifest(cfg, "sample");
  m["sampling"] = calibration_json(s);
  m["wall_clock_s"] = timer.to_json();
  m["warnings"] = detail::warnings_json(diag);
  m["outputs"] = out.files_json();
  detail::write_json(out, "sample_manifest.json", m);
  return m;
}

// ---------------------------------------------------------------------------
// build

inline json validation_json(const ValidationReport& v) {
  auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
  auto ccdf = [](const std::vector<CcdfPoint>& pts) {
    json a = json::array();
    for (const auto& p : pts) a.push_back({p.degree, p.ccdf});
    return a;
  };
  return {{"n_nodes", v.n_nodes},
          {"n_edges", v.n_edges},
          {"realized_avg_degree", v.realized_avg_degree},
          {"pair_flow_correlation", opt(v.pair_flow_correlation)},
          {"pair_count", v.pair_count},
          {"mean_path_length_estimate", opt(v.mean_path_length_estimate)},
          {"path_samples", v.path_samples},
          {"target_out_degree_correlation", opt(v.target_out_degree_correlation)},
          {"in_degree_ccdf", ccdf(v.in_degree_ccdf)},
          {"out_degree_ccdf", ccdf(v.out_degree_ccdf)}};
}

inline json build_stats_json(const BuildStats& s) {
  return {{"accepted_links", s.accepted},
          {"attempts", s.attempts},
          {"rejected_self_loop", s.rejected_self_loop},
          {"rejected_duplicate", s.rejected_duplicate},
          {"masked_pair_draws", s.masked_pair_draws},
          {"pruned_row_dummies", s.pruned_dummies},
          {"samplable_pairs", s.samplable_pairs},
          {"stop_reason", std::string(to_string(s.stop))}};
}

struct BuiltNetwork {
  SampleResult sample;
  BuildResult build;
  OriginAssignmentStats origins;
  ValidationReport validation;
};

inline BuiltNetwork run_build(const PipelineConfig& cfg, Tables& t, Diagnostics& diag, StageTimer& timer) {
  BuiltNetwork b;
  timer.start("sample");
  b.sample = run_sampling(cfg, t, diag);
  timer.stop();

  timer.start("build");
  BuildConfig bc = cfg.build;
  bc.seed = cfg.seed;
  if (cfg.progress) {
    bc.progress = [](const BuildProgress& p) {
      std::cerr << "build: " << p.accepted << " / " << p.target << " links, rejection rate "
                << csv::format_double(std::round(p.rejection_rate * 1e4) / 1e4) << '\n';
    };
  }
  b.build = build_network(b.sample.firms, t.iot, bc, &diag);
  b.sample.row_dummies -= b.build.stats.pruned_dummies;
  timer.stop();

  timer.start("origins");
  b.origins = assign_import_origins(b.build.network, b.sample.firms, t.imports, cfg.seed, &diag);
  timer.stop();

  timer.start("validate");
  b.validation = validate_network(b.build.network, b.sample.firms, t.iot, cfg.validation_pairs, cfg.seed);
  timer.stop();
  return b;
}

inline json network_manifest(const OutputFile& network, const OutputFile& nodes, const SupplyNetwork& net) {
  return {{"network", network.name},
          {"network_sha256", network.sha256},
          {"nodes", nodes.name},
          {"nodes_sha256", nodes.sha256},
          {"n_nodes", net.n_nodes()},
          {"n_edges", net.n_edges()},
          {"format_version", kNetworkFormatVersion}};
}

inline void write_network_outputs(OutputSet& out, const BuiltNetwork& b) {
  const auto network = out.write("network.scdn", [&](std::ostream& os) { write_network(b.build.network, os); });
  const auto nodes = out.write("nodes.csv", [&](std::ostream& os) { write_firms(b.sample.firms, os); });
  detail::write_json(out, "network.manifest.json", network_manifest(network, nodes, b.build.network));
  detail::write_json(out, "validation.json", validation_json(b.validation));
}

inline json cmd_build(const PipelineConfig& cfg, Diagnostics& diag) {
  StageTimer timer;
  timer.start("ingest");
  Tables t = load_tables(cfg, diag);
  timer.stop();
  auto b = run_build(cfg, t, diag, timer);
  OutputSet out(cfg.output_dir);
  write_network_outputs(out, b);
  json m = base_manifest(cfg, "build");
  m["sampling"] = calibration_json(b.sample);
  m["build"] = build_stats_json(b.build.stats);
  m["wall_clock_s"] = timer.to_json();
  m["warnings"] = detail::warnings_json(diag);
  m["outputs"] = out.files_json();
  detail::write_json(out, "build_manifest.json", m);
  return m;
}

// ---------------------------------------------------------------------------
// Loading an existing network

struct LoadedNetwork {
  SupplyNetwork network;
  FirmList firms;
  std::string network_sha256;
  std::string nodes_sha256;
};

/// Reads a network file and its sidecar "nodes.csv" from the same
/// directory. When "network.manifest.json" is present the checksums of both
/// files must match it.
inline LoadedNetwork load_network_with_nodes(const std::string& network_path) {
  const fs::path np(network_path);
  if (!fs::exists(np)) throw Error(ErrorKind::io, "network file not found: " + network_path);
  const fs::path nodes_path = np.parent_path() / "nodes.csv";
  if (!fs::exists(nodes_path)) throw Error(ErrorKind::io, "node metadata not found: " + nodes_path.string());

  LoadedNetwork ln;
  ln.network_sha256 = sha256_file(np.string());
  ln.nodes_sha256 = sha256_file(nodes_path.string());
  const fs::path manifest_path = np.parent_path() / "network.manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    json m;
    try {
      m = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::integrity, manifest_path.string() + ": unreadable manifest");
    }
    if (m.value("network_sha256", "") != ln.network_sha256) {
      throw Error(ErrorKind::integrity, "network file checksum does not match " + manifest_path.string());
    }
    if (m.value("nodes_sha256", "") != ln.nodes_sha256) {
      throw Error(ErrorKind::integrity, "node metadata checksum does not match " + manifest_path.string());
    }
  }
  ln.network = read_network(np.string());
  try {
    ln.firms = load_firms(nodes_path.string());
  } catch (const Error& e) {
    throw Error(ErrorKind::integrity, std::string("node metadata unreadable: ") + e.what());
  }
  if (ln.firms.size() != ln.network.n_nodes()) {
    throw Error(ErrorKind::integrity, "node metadata has " + std::to_string(ln.firms.size()) +
                                          " rows but the network has " + std::to_string(ln.network.n_nodes()) +
                                          " nodes");
  }
  return ln;
}

// ---------------------------------------------------------------------------
// risk / exposure / monitoring reports

inline std::vector<GroupBy> report_groupings() {
  return {GroupBy{}, GroupBy{true, false, false}, GroupBy{false, true, false}, GroupBy{false, false, true},
          GroupBy{true, true, false}};
}

inline std::vector<RiskRow> risk_rows(const PipelineConfig& cfg, const SupplyNetwork& net, const FirmList& firms,
                                      const ViolationList& viol, Diagnostics& diag) {
  const auto v = mark_violators(firms, viol);
  const auto all = risk_all_tiers(net, v, cfg.max_tier(), cfg.threads);
  std::vector<RiskRow> rows;
  for (const auto& g : report_groupings()) {
    for (int tier : cfg.tiers) {
      for (auto sem : {Semantics::exact, Semantics::cumulative}) {
        if (cfg.semantics == SemanticsChoice::exact && sem != Semantics::exact) continue;
        if (cfg.semantics == SemanticsChoice::cumulative && sem != Semantics::cumulative) continue;
        const auto& risk = all[static_cast<std::size_t>(2 * (tier - 1) + (sem == Semantics::cumulative ? 1 : 0))];
        auto part = aggregate_risk(risk, firms, g, &diag);
        rows.insert(rows.end(), part.begin(), part.end());
      }
    }
  }
  return rows;
}

inline void write_risk_outputs(OutputSet& out, const PipelineConfig& cfg, const SupplyNetwork& net,
                               const FirmList& firms, const ViolationList& cfl, const ViolationList& lawsuits,
                               Diagnostics& diag) {
  for (const auto* viol : {&cfl, &lawsuits}) {
    const auto rows = risk_rows(cfg, net, firms, *viol, diag);
    out.write("risk_" + std::string(to_string(viol->kind)) + ".csv",
              [&](std::ostream& os) { write_risk_report(rows, os); });
  }
}

inline void write_exposure_outputs(OutputSet& out, const SupplyNetwork& net, const FirmList& firms,
                                   const ViolationList& cfl, const ViolationList& lawsuits) {
  for (const auto* viol : {&cfl, &lawsuits}) {
    const std::string kind(to_string(viol->kind));
    const auto rows = exposure_matrix(net, firms, *viol, false);
    out.write("exposure_" + kind + ".csv", [&](std::ostream& os) { write_exposure(rows, os); });
    const auto by_band = exposure_matrix(net, firms, *viol, true);
    out.write("exposure_" + kind + "_by_band.csv", [&](std::ostream& os) { write_exposure(by_band, os); });
  }
}

inline json monitoring_json(const MonitoringReport& r) {
  json sectors = json::array();
  for (const auto& s : r.sectors) {
    sectors.push_back({{"sector", s.sector.str()},
                       {"n_firms", s.n_firms},
                       {"n_covered", s.n_covered},
                       {"covered_fraction", s.covered_fraction},
                       {"n_tier1_suppliers", s.n_tier1_suppliers},
                       {"tier1_supplier_fraction", s.tier1_supplier_fraction},
                       {"links_per_covered_firm", s.links_per_covered_firm},
                       {"links_total", s.links_total}});
  }
  return {{"n_group1", r.n_group1},
          {"n_group2", r.n_group2},
          {"n_covered", r.n_covered},
          {"distinct_suppliers", r.distinct_suppliers},
          {"supply_links", r.supply_links},
          {"row_links", r.row_links},
          {"tier3_links", r.tier3_links},
          {"tier3_nodes", r.tier3_nodes},
          {"node_link_ratio", r.node_link_ratio},
          {"sectors", sectors}};
}

inline json indicator_manifest(const PipelineConfig& cfg, const std::string& command, const LoadedNetwork& ln) {
  json m = base_manifest(cfg, command);
  m["source_network"] = {{"network_sha256", ln.network_sha256}, {"nodes_sha256", ln.nodes_sha256}};
  return m;
}

inline json cmd_risk(const PipelineConfig& cfg, const std::string& network_path, Diagnostics& diag) {
  const auto ln = load_network_with_nodes(network_path);
  const auto cfl = load_violation_input(cfg, ViolationKind::child_forced_labor, diag);
  const auto lawsuits = load_violation_input(cfg, ViolationKind::lawsuits, diag);
  OutputSet out(cfg.output_dir);
  write_risk_outputs(out, cfg, ln.network, ln.firms, cfl, lawsuits, diag);
  json m = indicator_manifest(cfg, "risk", ln);
  m["warnings"] = detail::warnings_json(diag);
  m["outputs"] = out.files_json();
  detail::write_json(out, "risk_manifest.json", m);
  return m;
}

inline json cmd_exposure(const PipelineConfig& cfg, const std::string& network_path, Diagnostics& diag) {
  const auto ln = load_network_with_nodes(network_path);
  const auto cfl = load_violation_input(cfg, ViolationKind::child_forced_labor, diag);
  const auto lawsuits = load_violation_input(cfg, ViolationKind::lawsuits, diag);
  OutputSet out(cfg.output_dir);
  write_exposure_outputs(out, ln.network, ln.firms, cfl, lawsuits);
  json m = indicator_manifest(cfg, "exposure", ln);
  m["warnings"] = detail::warnings_json(diag);
  m["outputs"] = out.files_json();
  detail::write_json(out, "exposure_manifest.json", m);
  return m;
}

inline json cmd_validate(const PipelineConfig& cfg, const std::string& network_path, Diagnostics& diag) {
  const auto ln = load_network_with_nodes(network_path);
  detail::require_input(cfg.iot, "iot");
  const auto iot = load_iot(cfg.iot, &diag, cfg.row_marker);
  const auto rep = validate_network(ln.network, ln.firms, iot, cfg.validation_pairs, cfg.seed);
  OutputSet out(cfg.output_dir);
  detail::write_json(out, "validation.json", validation_json(rep));
  json m = indicator_manifest(cfg, "validate", ln);
  m["warnings"] = detail::warnings_json(diag);
  m["outputs"] = out.files_json();
  detail::write_json(out, "validate_manifest.json", m);
  return m;
}

// ---------------------------------------------------------------------------
// run

inline json cmd_run(const PipelineConfig& cfg, Diagnostics& diag) {
  StageTimer timer;
  timer.start("ingest");
  Tables t = load_tables(cfg, diag);
  timer.stop();
  auto b = run_build(cfg, t, diag, timer);

  OutputSet out(cfg.output_dir);
  out.write("firms.csv", [&](std::ostream& os) { write_firms(b.sample.firms, os); });
  write_network_outputs(out, b);

  timer.start("indicators");
  const auto& net = b.build.network;
  const auto& firms = b.sample.firms;
  write_risk_outputs(out, cfg, net, firms, t.child_forced_labor, t.lawsuits, diag);
  write_exposure_outputs(out, net, firms, t.child_forced_labor, t.lawsuits);
  const auto labels = classify_csddd(firms, cfg.csddd);
  const auto mon = monitoring_stats(net, firms, labels, &diag, cfg.threads);
  detail::write_json(out, "monitoring.json", monitoring_json(mon));
  timer.stop();

  json m = base_manifest(cfg, "run");
  m["sampling"] = calibration_json(b.sample);
  m["build"] = build_stats_json(b.build.stats);
  m["origins"] = {{"direct", b.origins.direct},
                  {"sector_fallback", b.origins.sector_fallback},
                  {"uniform_fallback", b.origins.uniform_fallback}};
  m["wall_clock_s"] = timer.to_json();
  m["counters"] = detail::counters_json(diag);
  m["warnings"] = detail::warnings_json(diag);
  m["outputs"] = out.files_json();
  detail::write_json(out, "run_manifest.json", m);
  return m;
}

}  // namespace scdd::pipeline
