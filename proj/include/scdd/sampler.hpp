#pragma once

// Synthetic firm population: per-cell Pareto fits, employee and turnover
// draws, degree targets from the strength/degree scaling laws, and
// rest-of-world import dummies.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "scdd/codes.hpp"
#include "scdd/csv.hpp"
#include "scdd/diagnostics.hpp"
#include "scdd/error.hpp"
#include "scdd/ingest.hpp"
#include "scdd/pareto.hpp"
#include "scdd/random.hpp"

namespace scdd {

using NodeId = std::uint32_t;

struct Firm {
  NodeId id = 0;
  Code country;  // empty for a ROW dummy until its import origin is assigned
  Code sector;
  BandIndex band = kNoBand;
  std::int64_t employees = 0;
  double turnover = 0.0;  // EUR/year, used as out-strength
  std::uint32_t k_out = 0;
  std::uint32_t k_in = 0;
  bool is_row_dummy = false;

  friend bool operator==(const Firm&, const Firm&) = default;
};

using FirmList = std::vector<Firm>;

struct ScalingConfig {
  double alpha_out_mean = 0.335;
  double alpha_out_sd = 0.025;
  double alpha_out_min = 0.31;
  double alpha_out_max = 0.36;
  double alpha_in_mean = 0.7;
  double alpha_in_sd = 0.1;
  double alpha_in_min = 0.6;
  double alpha_in_max = 0.8;
  double kbar_out = 50.0;
  double kbar_in = 56.0;
  double tolerance = 0.005;  // relative error allowed on the calibrated means
};

// ---------------------------------------------------------------------------
// Fitting and sampling

/// One fit per SBS cell (same order as sbs.cells). Cells without an average
/// (only possible before imputation) or without firms get default params.
/// Identical (band, target) pairs are fitted once.
inline std::vector<ParetoParams> fit_sbs(const SbsTable& sbs, const GridSpec& grid = {}) {
  std::map<std::pair<BandIndex, double>, ParetoParams> memo;
  std::vector<ParetoParams> fits(sbs.cells.size());
  for (std::size_t i = 0; i < sbs.cells.size(); ++i) {
    const auto& c = sbs.cells[i];
    if (c.n_firms == 0 || !c.avg_employees) continue;
    const auto key = std::make_pair(c.band, *c.avg_employees);
    auto it = memo.find(key);
    if (it == memo.end()) {
      try {
        it = memo.emplace(key, fit_pareto_band(*c.avg_employees, band_at(c.band), grid)).first;
      } catch (const Error& e) {
        throw Error(e.kind(), "cell (" + c.country.str() + ", " + c.sector.str() + ", " +
                                  std::string(band_label(c.band)) + "): " + e.what());
      }
    }
    fits[i] = it->second;
  }
  return fits;
}

inline std::int64_t scaled_count(std::int64_t n_firms, double scale_factor) {
  return std::llround(static_cast<double>(n_firms) * scale_factor);
}

/// Draws round(n_firms * scale_factor) firms per cell. Each cell uses its own
/// substream of `seed`, so the output does not depend on `threads`. Firm ids
/// follow cell order. Degree targets are left at zero.
inline FirmList sample_firms(const SbsTable& sbs, const std::vector<ParetoParams>& fits, double scale_factor,
                             std::uint64_t seed, unsigned threads = 1) {
  if (!(scale_factor > 0.0 && scale_factor <= 1.0)) {
    throw Error(ErrorKind::config, "scale_factor must lie in (0, 1]");
  }
  if (fits.size() != sbs.cells.size()) throw Error(ErrorKind::internal, "fit count does not match SBS cells");

  const std::size_t n_cells = sbs.cells.size();
  std::vector<FirmList> per_cell(n_cells);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& cell = sbs.cells[i];
      const auto count = scaled_count(cell.n_firms, scale_factor);
      if (count <= 0) continue;
      const auto& band = band_at(cell.band);
      const double tpe = cell.turnover_per_employee.value_or(0.0);
      Rng rng = substream(seed, streams::sample_cells + i);
      auto& out = per_cell[i];
      out.reserve(static_cast<std::size_t>(count));
      for (std::int64_t k = 0; k < count; ++k) {
        Firm f;
        f.country = cell.country;
        f.sector = cell.sector;
        f.band = cell.band;
        f.employees = sample_employees(fits[i], band, rng);
        f.turnover = static_cast<double>(f.employees) * tpe;
        out.push_back(f);
      }
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n_cells, 1))));
  if (threads == 1) {
    work(0, n_cells);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_cells + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(n_cells, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }

  FirmList firms;
  std::size_t total = 0;
  for (const auto& v : per_cell) total += v.size();
  firms.reserve(total);
  for (auto& v : per_cell) {
    for (auto& f : v) {
      f.id = static_cast<NodeId>(firms.size());
      firms.push_back(f);
    }
  }
  return firms;
}

// ---------------------------------------------------------------------------
// Degree targets

namespace detail {

/// Normal draw restricted to [lo, hi]: redraw up to 100 times, then clamp.
inline double truncated_normal(Rng& rng, double mean, double sd, double lo, double hi) {
  std::normal_distribution<double> dist(mean, sd);
  double x = mean;
  for (int attempt = 0; attempt < 100; ++attempt) {
    x = dist(rng);
    if (x >= lo && x <= hi) return x;
  }
  return std::clamp(x, lo, hi);
}

inline std::uint32_t round_degree(double x) {
  const double r = std::round(x);  // half away from zero
  if (!(r >= 1.0)) return 1;
  if (r >= 4e9) return 4'000'000'000u;
  return static_cast<std::uint32_t>(r);
}

/// Finds c such that mean(max(1, round(c * raw[i]))) over the `raw` entries plus
/// `fixed_ones` entries pinned at 1 is within tolerance of `target`.
/// Starts from the exact-in-expectation rescaling and repeats it on the
/// rounded degrees until the rounded mean settles.
inline double calibrate_rescale(const std::vector<double>& raw, std::size_t fixed_ones, double target,
                                double tolerance, bool& converged) {
  const double n = static_cast<double>(raw.size() + fixed_ones);
  const double fixed = static_cast<double>(fixed_ones);
  double raw_sum = 0.0;
  for (double r : raw) raw_sum += r;
  converged = false;
  if (!(raw_sum > 0.0)) return 1.0;

  double c = (target * n - fixed) / raw_sum;
  double best_c = c, best_err = std::numeric_limits<double>::infinity();
  for (int pass = 0; pass < 60; ++pass) {
    double sum = fixed;
    for (double r : raw) sum += round_degree(c * r);
    const double err = std::abs(sum / n - target);
    if (err < best_err) {
      best_err = err;
      best_c = c;
    }
    if (err <= 0.1 * tolerance * target || sum <= fixed) break;
    c *= (target * n - fixed) / (sum - fixed);
  }
  converged = best_err <= tolerance * target;
  return best_c;
}

}  // namespace detail

struct DegreeCalibration {
  double exp_beta_out = 0.0;
  double exp_beta_in = 0.0;
  double mean_k_out = 0.0;
  double mean_k_in = 0.0;
  std::size_t zero_turnover = 0;
};

/// Sets k_out and k_in for every non-dummy firm from its turnover:
///   k_out = e^beta_out * s^alpha_out,  k_in = e^beta_in * k_out^alpha_in
/// with per-firm exponents drawn from truncated normals and the two
/// prefactors calibrated on the rounded degrees so the population means hit
/// kbar_out and kbar_in. Firms without positive turnover get 1/1.
inline DegreeCalibration assign_degrees(FirmList& firms, const ScalingConfig& cfg, std::uint64_t seed,
                                        Diagnostics* diag = nullptr) {
  std::vector<std::size_t> idx;
  idx.reserve(firms.size());
  for (std::size_t i = 0; i < firms.size(); ++i) {
    if (!firms[i].is_row_dummy) idx.push_back(i);
  }
  if (idx.empty()) throw Error(ErrorKind::empty_input, "no firms to assign degrees to");

  Rng rng = substream(seed, streams::degrees);
  std::vector<double> alpha_out(idx.size()), alpha_in(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    alpha_out[j] = detail::truncated_normal(rng, cfg.alpha_out_mean, cfg.alpha_out_sd, cfg.alpha_out_min,
                                            cfg.alpha_out_max);
    alpha_in[j] = detail::truncated_normal(rng, cfg.alpha_in_mean, cfg.alpha_in_sd, cfg.alpha_in_min,
                                           cfg.alpha_in_max);
  }

  DegreeCalibration cal;
  std::vector<std::size_t> active;  // positions in idx with usable turnover
  std::vector<double> raw;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const double s = firms[idx[j]].turnover;
    if (s > 0.0 && std::isfinite(s)) {
      active.push_back(j);
      raw.push_back(std::exp(alpha_out[j] * std::log(s)));
    } else {
      ++cal.zero_turnover;
    }
  }
  if (cal.zero_turnover) {
    warn(diag, std::to_string(cal.zero_turnover) + " firms without positive turnover get degrees 1/1");
  }

  bool ok_out = false, ok_in = false;
  cal.exp_beta_out = detail::calibrate_rescale(raw, cal.zero_turnover, cfg.kbar_out, cfg.tolerance, ok_out);
  for (std::size_t a = 0; a < active.size(); ++a) {
    firms[idx[active[a]]].k_out = detail::round_degree(cal.exp_beta_out * raw[a]);
  }
  for (std::size_t a = 0; a < active.size(); ++a) {
    raw[a] = std::exp(alpha_in[active[a]] * std::log(static_cast<double>(firms[idx[active[a]]].k_out)));
  }
  cal.exp_beta_in = detail::calibrate_rescale(raw, cal.zero_turnover, cfg.kbar_in, cfg.tolerance, ok_in);
  for (std::size_t a = 0; a < active.size(); ++a) {
    firms[idx[active[a]]].k_in = detail::round_degree(cal.exp_beta_in * raw[a]);
  }

  double sum_out = 0.0, sum_in = 0.0;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    auto& f = firms[idx[j]];
    if (!(f.turnover > 0.0 && std::isfinite(f.turnover))) {
      f.k_out = 1;
      f.k_in = 1;
    }
    sum_out += f.k_out;
    sum_in += f.k_in;
  }
  cal.mean_k_out = sum_out / static_cast<double>(idx.size());
  cal.mean_k_in = sum_in / static_cast<double>(idx.size());
  if (!ok_out || !ok_in) {
    warn(diag, "degree calibration outside tolerance: mean k_out " + csv::format_double(cal.mean_k_out) +
                   ", mean k_in " + csv::format_double(cal.mean_k_in));
  }
  return cal;
}

// ---------------------------------------------------------------------------
// Rest-of-world dummies

enum class DegeneratePolicy { error, skip };

struct RowDummyCount {
  Code sector;
  double sum_k_in = 0.0;
  double row_inflow = 0.0;
  double domestic_inflow = 0.0;  // all non-ROW origins
  std::int64_t dummies = 0;
};

/// Number of ROW dummies per sector s:
///   round( sum of k_in over EU firms in s * ROW inflow(s) / non-ROW inflow(s) )
/// where inflows sum IOT flows into sector s of the countries present in
/// `firms`.
inline std::vector<RowDummyCount> row_dummy_counts(const FirmList& firms, const IoTable& iot,
                                                   DegeneratePolicy policy = DegeneratePolicy::error,
                                                   Diagnostics* diag = nullptr) {
  std::set<Code> countries;
  std::map<Code, RowDummyCount> by_sector;
  for (const auto& f : firms) {
    if (f.is_row_dummy) continue;
    countries.insert(f.country);
    auto& row = by_sector[f.sector];
    row.sector = f.sector;
    row.sum_k_in += f.k_in;
  }
  for (const auto& [key, value] : iot.flows) {
    const auto& [origin, dest] = key;
    if (!countries.count(dest.country)) continue;
    auto it = by_sector.find(dest.sector);
    if (it == by_sector.end()) continue;
    if (origin.country == iot.row_marker) {
      it->second.row_inflow += value;
    } else {
      it->second.domestic_inflow += value;
    }
  }
  std::vector<RowDummyCount> out;
  for (auto& [sector, row] : by_sector) {
    if (row.row_inflow > 0.0) {
      if (row.domestic_inflow <= 0.0) {
        if (policy == DegeneratePolicy::error) {
          throw Error(ErrorKind::degenerate_ratio,
                      "sector " + sector.str() + " has ROW inflow but no non-ROW inflow");
        }
        warn(diag, "sector " + sector.str() + ": no non-ROW inflow, ROW dummies skipped");
      } else {
        row.dummies = std::llround(row.sum_k_in * row.row_inflow / row.domestic_inflow);
      }
    }
    out.push_back(row);
  }
  return out;
}

/// Appends the ROW dummies (k_out = 1, k_in = 0, no country yet) after the
/// existing firms, sector by sector in code order.
inline std::size_t make_row_dummies(FirmList& firms, const IoTable& iot,
                                    DegeneratePolicy policy = DegeneratePolicy::error,
                                    Diagnostics* diag = nullptr) {
  const auto counts = row_dummy_counts(firms, iot, policy, diag);
  std::size_t added = 0;
  for (const auto& c : counts) {
    for (std::int64_t k = 0; k < c.dummies; ++k) {
      Firm d;
      d.id = static_cast<NodeId>(firms.size());
      d.sector = c.sector;
      d.k_out = 1;
      d.k_in = 0;
      d.is_row_dummy = true;
      firms.push_back(d);
      ++added;
    }
  }
  bump(diag, "firms.row_dummies", added);
  return added;
}

// ---------------------------------------------------------------------------
// Serialization

inline const std::vector<std::string>& firm_header() {
  static const std::vector<std::string> h{"id",       "country", "sector", "band",        "employees",
                                          "turnover", "k_out",   "k_in",   "is_row_dummy"};
  return h;
}

inline void write_firms(const FirmList& firms, std::ostream& out) {
  out << csv::join(firm_header()) << '\n';
  for (const auto& f : firms) {
    out << f.id << ',' << f.country << ',' << f.sector << ',';
    if (f.is_row_dummy) {
      out << ",,,";
    } else {
      out << band_label(f.band) << ',' << f.employees << ',' << csv::format_double(f.turnover) << ',';
    }
    out << f.k_out << ',' << f.k_in << ',' << (f.is_row_dummy ? 1 : 0) << '\n';
  }
}

inline void write_firms(const FirmList& firms, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");
  write_firms(firms, out);
  if (!out) throw Error(ErrorKind::io, "failed writing '" + path + "'");
}

inline FirmList load_firms(const std::string& path) {
  const auto rows = csv::read_table(path, firm_header());
  FirmList firms;
  firms.reserve(rows.size());
  for (const auto& row : rows) {
    const auto where = csv::location(path, row);
    Firm f;
    f.id = *csv::parse_optional_int<NodeId>(row[0], where);
    if (f.id != firms.size()) throw Error(ErrorKind::integrity, where + ": firm ids must be 0..n-1 in order");
    if (row[8] != "0" && row[8] != "1") throw Error(ErrorKind::parse, where + ": is_row_dummy must be 0 or 1");
    f.is_row_dummy = row[8] == "1";
    if (!row[1].empty()) {
      if (!is_country_code(row[1])) throw Error(ErrorKind::schema, where + ": invalid country '" + row[1] + "'");
      f.country = Code(row[1]);
    }
    if (!is_sector_code(row[2])) throw Error(ErrorKind::schema, where + ": invalid sector '" + row[2] + "'");
    f.sector = Code(row[2]);
    if (!f.is_row_dummy) {
      const auto band = band_from_label(row[3]);
      if (!band) throw Error(ErrorKind::schema, where + ": unknown band '" + row[3] + "'");
      f.band = *band;
      f.employees = csv::parse_optional_int<std::int64_t>(row[4], where).value_or(0);
      f.turnover = csv::parse_double(row[5], where);
      if (f.country.empty()) throw Error(ErrorKind::schema, where + ": firm without country");
    }
    const auto k_out = csv::parse_optional_int<std::uint32_t>(row[6], where);
    const auto k_in = csv::parse_optional_int<std::uint32_t>(row[7], where);
    if (!k_out || !k_in) throw Error(ErrorKind::parse, where + ": missing degree target");
    f.k_out = *k_out;
    f.k_in = *k_in;
    firms.push_back(f);
  }
  return firms;
}

}  // namespace scdd
