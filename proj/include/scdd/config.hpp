#pragma once

// Pipeline configuration: an INI-style file with [section] headers and
// key = value lines. Every key has a default; unknown keys are rejected.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "scdd/csv.hpp"
#include "scdd/error.hpp"
#include "scdd/indicators.hpp"
#include "scdd/netgen.hpp"
#include "scdd/pareto.hpp"
#include "scdd/sampler.hpp"

namespace scdd {

enum class SemanticsChoice { exact, cumulative, both };

struct PipelineConfig {
  // [inputs]
  std::string sbs, iot, trade, concordance, violations_child_forced_labor, violations_lawsuits;
  // [run]
  std::uint64_t seed = 1;
  double scale_factor = 1.0;
  unsigned threads = 1;
  std::string output_dir = "out";
  std::vector<int> tiers{1, 2, 3, 4};
  SemanticsChoice semantics = SemanticsChoice::both;
  std::size_t validation_pairs = 2000;
  bool progress = true;
  // [ingest]
  std::string row_marker{kRowMarker};
  bool skip_unmapped = false;
  std::vector<std::string> eu_countries = default_eu_countries();
  DegeneratePolicy degenerate_row_ratio = DegeneratePolicy::error;
  // [grid] [scaling] [build] [csddd]
  GridSpec grid;
  ScalingConfig scaling;
  BuildConfig build;
  CsdddThresholds csddd;

  void validate() const {
    if (!(scale_factor > 0.0 && scale_factor <= 1.0)) throw Error(ErrorKind::config, "scale_factor must lie in (0, 1]");
    if (tiers.empty()) throw Error(ErrorKind::config, "tiers must not be empty");
    for (int t : tiers) {
      if (t < 1) throw Error(ErrorKind::config, "tiers must be >= 1");
    }
    if (!(build.stop_avg_links > 0.0)) throw Error(ErrorKind::config, "stop_avg_links must be positive");
    if (threads == 0) throw Error(ErrorKind::config, "threads must be >= 1");
  }

  int max_tier() const { return *std::max_element(tiers.begin(), tiers.end()); }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto part : csv::split(s)) {
    auto t = csv::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline std::string join_list(const std::vector<std::string>& v) { return csv::join(v); }

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorKind::config, key + ": expected a boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& v, const std::string& key) {
  try {
    if constexpr (std::is_floating_point_v<T>) {
      return static_cast<T>(csv::parse_double(v, key));
    } else {
      auto r = csv::parse_optional_int<T>(v, key);
      if (!r) throw Error(ErrorKind::config, key + ": missing value");
      return *r;
    }
  } catch (const Error& e) {
    throw Error(ErrorKind::config, e.what());
  }
}

/// Table of (section.key) -> (getter, setter) over a PipelineConfig.
struct Field {
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

inline const std::vector<std::pair<std::string, Field>>& config_fields() {
  using C = PipelineConfig;
  auto str = [](std::string C::*m) {
    return Field{[m](const C& c) { return c.*m; }, [m](C& c, const std::string& v) { c.*m = v; }};
  };
  auto num = [](auto getter_ref) {
    using T = std::remove_reference_t<decltype(getter_ref(std::declval<C&>()))>;
    return Field{[getter_ref](const C& c) {
                   auto& v = getter_ref(const_cast<C&>(c));
                   if constexpr (std::is_floating_point_v<T>) {
                     return csv::format_double(static_cast<double>(v));
                   } else {
                     return std::to_string(v);
                   }
                 },
                 [getter_ref](C& c, const std::string& v) { getter_ref(c) = parse_number<T>(v, "config"); }};
  };
  auto flag = [](auto getter_ref) {
    return Field{[getter_ref](const C& c) { return std::string(getter_ref(const_cast<C&>(c)) ? "true" : "false"); },
                 [getter_ref](C& c, const std::string& v) { getter_ref(c) = parse_bool(v, "config"); }};
  };

  static const std::vector<std::pair<std::string, Field>> fields{
      {"inputs.sbs", str(&C::sbs)},
      {"inputs.iot", str(&C::iot)},
      {"inputs.trade", str(&C::trade)},
      {"inputs.concordance", str(&C::concordance)},
      {"inputs.violations_child_forced_labor", str(&C::violations_child_forced_labor)},
      {"inputs.violations_lawsuits", str(&C::violations_lawsuits)},
      {"run.seed", num([](C& c) -> auto& { return c.seed; })},
      {"run.scale_factor", num([](C& c) -> auto& { return c.scale_factor; })},
      {"run.threads", num([](C& c) -> auto& { return c.threads; })},
      {"run.output_dir", str(&C::output_dir)},
      {"run.tiers",
       Field{[](const C& c) {
               std::vector<std::string> v;
               for (int t : c.tiers) v.push_back(std::to_string(t));
               return join_list(v);
             },
             [](C& c, const std::string& v) {
               c.tiers.clear();
               for (const auto& t : split_list(v)) c.tiers.push_back(parse_number<int>(t, "run.tiers"));
             }}},
      {"run.semantics",
       Field{[](const C& c) {
               return std::string(c.semantics == SemanticsChoice::exact        ? "exact"
                                  : c.semantics == SemanticsChoice::cumulative ? "cumulative"
                                                                               : "both");
             },
             [](C& c, const std::string& v) {
               if (v == "exact") c.semantics = SemanticsChoice::exact;
               else if (v == "cumulative") c.semantics = SemanticsChoice::cumulative;
               else if (v == "both") c.semantics = SemanticsChoice::both;
               else throw Error(ErrorKind::config, "run.semantics must be exact, cumulative or both");
             }}},
      {"run.validation_pairs", num([](C& c) -> auto& { return c.validation_pairs; })},
      {"run.progress", flag([](C& c) -> auto& { return c.progress; })},
      {"ingest.row_marker", str(&C::row_marker)},
      {"ingest.skip_unmapped", flag([](C& c) -> auto& { return c.skip_unmapped; })},
      {"ingest.eu_countries",
       Field{[](const C& c) { return join_list(c.eu_countries); },
             [](C& c, const std::string& v) { c.eu_countries = split_list(v); }}},
      {"ingest.degenerate_row_ratio",
       Field{[](const C& c) { return std::string(c.degenerate_row_ratio == DegeneratePolicy::skip ? "skip" : "error"); },
             [](C& c, const std::string& v) {
               if (v == "skip") c.degenerate_row_ratio = DegeneratePolicy::skip;
               else if (v == "error") c.degenerate_row_ratio = DegeneratePolicy::error;
               else throw Error(ErrorKind::config, "ingest.degenerate_row_ratio must be error or skip");
             }}},
      {"grid.shape_min", num([](C& c) -> auto& { return c.grid.shape_min; })},
      {"grid.shape_max", num([](C& c) -> auto& { return c.grid.shape_max; })},
      {"grid.shape_step", num([](C& c) -> auto& { return c.grid.shape_step; })},
      {"grid.scale_min", num([](C& c) -> auto& { return c.grid.scale_min; })},
      {"grid.scale_max", num([](C& c) -> auto& { return c.grid.scale_max; })},
      {"grid.scale_points", num([](C& c) -> auto& { return c.grid.scale_points; })},
      {"scaling.alpha_out_mean", num([](C& c) -> auto& { return c.scaling.alpha_out_mean; })},
      {"scaling.alpha_out_sd", num([](C& c) -> auto& { return c.scaling.alpha_out_sd; })},
      {"scaling.alpha_out_min", num([](C& c) -> auto& { return c.scaling.alpha_out_min; })},
      {"scaling.alpha_out_max", num([](C& c) -> auto& { return c.scaling.alpha_out_max; })},
      {"scaling.alpha_in_mean", num([](C& c) -> auto& { return c.scaling.alpha_in_mean; })},
      {"scaling.alpha_in_sd", num([](C& c) -> auto& { return c.scaling.alpha_in_sd; })},
      {"scaling.alpha_in_min", num([](C& c) -> auto& { return c.scaling.alpha_in_min; })},
      {"scaling.alpha_in_max", num([](C& c) -> auto& { return c.scaling.alpha_in_max; })},
      {"scaling.kbar_out", num([](C& c) -> auto& { return c.scaling.kbar_out; })},
      {"scaling.kbar_in", num([](C& c) -> auto& { return c.scaling.kbar_in; })},
      {"build.stop_avg_links", num([](C& c) -> auto& { return c.build.stop_avg_links; })},
      {"build.max_attempts_factor", num([](C& c) -> auto& { return c.build.max_attempts_factor; })},
      {"build.pool_empty_retries", num([](C& c) -> auto& { return c.build.pool_empty_retries; })},
      {"csddd.g1_employees", num([](C& c) -> auto& { return c.csddd.g1_employees; })},
      {"csddd.g1_turnover", num([](C& c) -> auto& { return c.csddd.g1_turnover; })},
      {"csddd.g2_employees", num([](C& c) -> auto& { return c.csddd.g2_employees; })},
      {"csddd.g2_turnover", num([](C& c) -> auto& { return c.csddd.g2_turnover; })},
      {"csddd.high_impact_sectors",
       Field{[](const C& c) {
               std::vector<std::string> v;
               for (const auto& s : c.csddd.high_impact_sectors) v.push_back(s.str());
               return join_list(v);
             },
             [](C& c, const std::string& v) {
               c.csddd.high_impact_sectors.clear();
               for (const auto& s : split_list(v)) c.csddd.high_impact_sectors.insert(Code(s));
             }}},
  };
  return fields;
}

}  // namespace detail

/// Sets one "section.key" value; unknown keys are a config error.
inline void set_config_value(PipelineConfig& cfg, const std::string& dotted_key, const std::string& value) {
  for (const auto& [key, field] : detail::config_fields()) {
    if (key == dotted_key) {
      try {
        field.set(cfg, value);
      } catch (const Error& e) {
        throw Error(ErrorKind::config, dotted_key + ": " + e.what());
      }
      return;
    }
  }
  throw Error(ErrorKind::config, "unknown config key '" + dotted_key + "'");
}

/// Parses INI text. Relative input paths and output_dir are resolved against
/// `base_dir`.
inline PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorKind::config, std::string("malformed config: ") + e.what());
  }
  PipelineConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw Error(ErrorKind::config, "key '" + section + "' outside a [section]");
    for (const auto& [key, value] : body) set_config_value(cfg, section + "." + key, value.data());
  }
  if (!base_dir.empty()) {
    for (auto* p : {&cfg.sbs, &cfg.iot, &cfg.trade, &cfg.concordance, &cfg.violations_child_forced_labor,
                    &cfg.violations_lawsuits, &cfg.output_dir}) {
      if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base_dir / *p).lexically_normal().string();
    }
  }
  cfg.validate();
  return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::absolute(path).parent_path());
}

/// Fully resolved config as INI text; parse_config(to_ini(c)) == c.
inline std::string to_ini(const PipelineConfig& cfg) {
  std::ostringstream out;
  std::string current;
  for (const auto& [key, field] : detail::config_fields()) {
    const auto dot = key.find('.');
    const auto section = key.substr(0, dot);
    if (section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << section << "]\n";
      current = section;
    }
    out << key.substr(dot + 1) << " = " << field.get(cfg) << '\n';
  }
  return out.str();
}

}  // namespace scdd
