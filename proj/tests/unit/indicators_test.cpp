#include <algorithm>
#include <deque>
#include <sstream>

#include <gtest/gtest.h>

#include "scdd/indicators.hpp"
#include "scdd/random.hpp"

using namespace scdd;

namespace {

Firm eu(NodeId id, const char* country = "AT", const char* sector = "C10", BandIndex band = 0) {
  Firm f;
  f.id = id;
  f.country = Code(country);
  f.sector = Code(sector);
  f.band = band;
  f.employees = 5;
  f.turnover = 1e5;
  f.k_out = f.k_in = 1;
  return f;
}

Firm dummy(NodeId id, const char* origin, const char* sector) {
  Firm f;
  f.id = id;
  f.country = Code(origin);
  f.sector = Code(sector);
  f.k_out = 1;
  f.is_row_dummy = true;
  return f;
}

using Dense = std::vector<std::vector<std::uint8_t>>;

// a[i][j] = 1 iff j supplies i.
Dense adjacency(const SupplyNetwork& net) {
  Dense a(net.n_nodes(), std::vector<std::uint8_t>(net.n_nodes(), 0));
  for (const auto& e : net.edges()) a[e.buyer][e.supplier] = 1;
  return a;
}

Dense bool_product(const Dense& x, const Dense& y) {
  const std::size_t n = x.size();
  Dense z(n, std::vector<std::uint8_t>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      if (x[i][k])
        for (std::size_t j = 0; j < n; ++j) z[i][j] |= y[k][j];
  return z;
}

Flags dense_apply(const Dense& m, const Flags& v) {
  Flags out(m.size(), 0);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j)
      if (m[i][j] && v[j]) out[i] = 1;
  return out;
}

// Distance from each node to the nearest violator along supplier links.
std::vector<int> bfs_to_violators(const SupplyNetwork& net, const Flags& v) {
  std::vector<int> dist(net.n_nodes(), -1);
  std::deque<NodeId> q;
  for (NodeId i = 0; i < net.n_nodes(); ++i) {
    if (v[i]) {
      dist[i] = 0;
      q.push_back(i);
    }
  }
  while (!q.empty()) {
    const NodeId u = q.front();
    q.pop_front();
    for (NodeId b : net.buyers(u)) {
      if (dist[b] < 0) {
        dist[b] = dist[u] + 1;
        q.push_back(b);
      }
    }
  }
  return dist;
}

}  // namespace

TEST(MarkViolators, Membership) {
  FirmList firms{eu(0, "DE", "C13"), dummy(1, "CN", "C13"), dummy(2, "TR", "C13")};
  ViolationList viol;
  EXPECT_EQ(mark_violators(firms, viol), (Flags{0, 0, 0}));
  viol.entries.insert({Code("CN"), Code("C13")});
  viol.entries.insert({Code("DE"), Code("C13")});  // never flags EU firms
  EXPECT_EQ(mark_violators(firms, viol), (Flags{0, 1, 0}));
  firms[2].country = Code();
  try {
    mark_violators(firms, viol);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unassigned_origin);
  }
}

TEST(RiskExact, ChainPathLength) {
  // violator 0 -> m 1 -> b 2
  const auto net = SupplyNetwork::from_edges(3, {{0, 1}, {1, 2}});
  const Flags v{1, 0, 0};
  EXPECT_TRUE(risk_exact(net, v, 2).flags[2]);
  EXPECT_FALSE(risk_exact(net, v, 1).flags[2]);
  EXPECT_EQ(risk_exact(net, v, 0).flags, v);
  const Flags none(3, 0);
  for (int k = 1; k <= 4; ++k) EXPECT_EQ(risk_exact(net, none, k).flags, none);
}

TEST(RiskCumulative, ChainReachability) {
  // 0 -> 1 -> 2 -> 3
  const auto net = SupplyNetwork::from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
  const Flags v{1, 0, 0, 0};
  EXPECT_FALSE(risk_cumulative(net, v, 2).flags[3]);
  EXPECT_TRUE(risk_cumulative(net, v, 3).flags[3]);
  EXPECT_TRUE(risk_cumulative(net, v, 4).flags[3]);
  EXPECT_FALSE(risk_exact(net, v, 4).flags[3]);
  EXPECT_THROW(risk_cumulative(net, v, 0), Error);
}

TEST(RiskIndicators, MatchOraclesOnRandomGraphs) {
  Rng rng = substream(2024, 0);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 5 + uniform_below(rng, 96);
    const double avg = 1.0 + uniform01(rng) * 10.0;
    std::vector<Edge> edges;
    const auto m = static_cast<std::size_t>(avg * n);
    for (std::size_t i = 0; i < m; ++i) {
      edges.push_back({static_cast<NodeId>(uniform_below(rng, n)), static_cast<NodeId>(uniform_below(rng, n))});
    }
    const auto net = SupplyNetwork::from_edges(n, edges);
    Flags v(n, 0);
    for (auto& x : v) x = uniform01(rng) < 0.05 ? 1 : 0;

    const auto a = adjacency(net);
    auto power = a;
    const auto dist = bfs_to_violators(net, v);
    Flags prev_cum(n, 0);
    const auto all = risk_all_tiers(net, v, 4, 2);
    for (int k = 1; k <= 4; ++k) {
      if (k > 1) power = bool_product(power, a);
      const auto exact = risk_exact(net, v, k);
      EXPECT_EQ(exact.flags, dense_apply(power, v)) << "trial " << trial << " k " << k;
      // Cumulative: some walk of length 1..k. A node that is itself a
      // violator needs a walk of positive length, so measure from its
      // suppliers.
      Flags expect(n, 0);
      for (NodeId i = 0; i < n; ++i) {
        for (NodeId s : net.suppliers(i)) {
          if (dist[s] >= 0 && dist[s] + 1 <= k) expect[i] = 1;
        }
      }
      const auto cum = risk_cumulative(net, v, k);
      EXPECT_EQ(cum.flags, expect) << "trial " << trial << " k " << k;
      for (NodeId i = 0; i < n; ++i) {
        EXPECT_GE(cum.flags[i], prev_cum[i]);
        EXPECT_GE(cum.flags[i], exact.flags[i]);
      }
      prev_cum = cum.flags;
      EXPECT_EQ(all[2 * (k - 1)].flags, exact.flags);
      EXPECT_EQ(all[2 * (k - 1) + 1].flags, cum.flags);
    }
  }
}

TEST(RiskIndicators, ThreadCountDoesNotMatter) {
  Rng rng = substream(5, 0);
  const std::size_t n = 20000;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < 5 * n; ++i) {
    edges.push_back({static_cast<NodeId>(uniform_below(rng, n)), static_cast<NodeId>(uniform_below(rng, n))});
  }
  const auto net = SupplyNetwork::from_edges(n, edges);
  Flags v(n, 0);
  for (std::size_t i = 0; i < n; i += 997) v[i] = 1;
  EXPECT_EQ(risk_all_tiers(net, v, 3, 1)[5].flags, risk_all_tiers(net, v, 3, 4)[5].flags);
}

TEST(AggregateRisk, FractionsAndGroups) {
  FirmList firms{eu(0, "AT", "C10", 0), eu(1, "AT", "C10", 1), eu(2, "AT", "C10", 1), eu(3, "AT", "C10", 2),
                 eu(4, "DE", "C29", 0), dummy(5, "CN", "C13")};
  TierRisk r{Semantics::cumulative, 2, Flags{0, 1, 0, 0, 0, 1}};
  const auto eu_rows = aggregate_risk(r, firms, GroupBy{});
  ASSERT_EQ(eu_rows.size(), 1u);
  EXPECT_EQ(eu_rows[0].group_key, "EU");
  EXPECT_EQ(eu_rows[0].n_firms, 5u);  // dummy excluded
  EXPECT_DOUBLE_EQ(eu_rows[0].fraction, 0.2);

  const auto by_cs = aggregate_risk(r, firms, GroupBy{true, true, false});
  ASSERT_EQ(by_cs.size(), 2u);
  EXPECT_EQ(by_cs[0].group_key, "country:AT|sector:C10");
  EXPECT_DOUBLE_EQ(by_cs[0].fraction, 0.25);
  EXPECT_EQ(by_cs[1].group_key, "country:DE|sector:C29");
  EXPECT_DOUBLE_EQ(by_cs[1].fraction, 0.0);

  const auto by_band = aggregate_risk(r, firms, GroupBy{false, false, true});
  ASSERT_EQ(by_band.size(), 3u);
  EXPECT_EQ(by_band[1].group_key, "band:10-19");
  EXPECT_DOUBLE_EQ(by_band[1].fraction, 0.5);

  Diagnostics diag;
  const auto with_missing = aggregate_risk(r, firms, GroupBy{true, false, false}, &diag, {"country:FR"});
  EXPECT_EQ(with_missing.size(), 2u);
  EXPECT_EQ(diag.warnings.size(), 1u);

  std::ostringstream out;
  write_risk_report(by_cs, out);
  EXPECT_EQ(out.str(),
            "group_key,tier,semantics,fraction,n_firms\n"
            "country:AT|sector:C10,2,cumulative,0.25,4\n"
            "country:DE|sector:C29,2,cumulative,0,1\n");
}

TEST(AggregateRisk, InvariantUnderRelabeling) {
  Rng rng = substream(77, 0);
  const std::size_t n = 60;
  FirmList firms;
  const char* countries[] = {"AT", "DE", "FR"};
  for (NodeId i = 0; i < n; ++i) firms.push_back(eu(i, countries[i % 3], i % 2 ? "C10" : "C29", static_cast<BandIndex>(i % 4)));
  Flags flags(n);
  for (auto& f : flags) f = uniform01(rng) < 0.4;
  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  FirmList shuffled(n);
  Flags sflags(n);
  for (NodeId i = 0; i < n; ++i) {
    shuffled[perm[i]] = firms[i];
    shuffled[perm[i]].id = perm[i];
    sflags[perm[i]] = flags[i];
  }
  for (const auto& g : {GroupBy{}, GroupBy{true, false, false}, GroupBy{true, true, true}}) {
    const auto a = aggregate_risk({Semantics::exact, 1, flags}, firms, g);
    const auto b = aggregate_risk({Semantics::exact, 1, sflags}, shuffled, g);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].group_key, b[i].group_key);
      EXPECT_EQ(a[i].fraction, b[i].fraction);
    }
  }
}

TEST(Exposure, CountsAndShares) {
  FirmList firms{eu(0, "DE", "C29"), dummy(1, "CN", "C20"), dummy(2, "CN", "C20"), dummy(3, "CN", "C20"),
                 dummy(4, "TR", "C13"), dummy(5, "US", "C20"), eu(6, "DE", "C29"), eu(7, "FR", "C10")};
  const auto net = SupplyNetwork::from_edges(8, {{1, 0}, {2, 0}, {3, 6}, {4, 6}, {5, 0}, {6, 7}});
  ViolationList viol;
  viol.entries = {{Code("CN"), Code("C20")}, {Code("TR"), Code("C13")}};
  const auto row = exposure(net, firms, viol, {Code("DE"), Code("C29"), std::nullopt});
  ASSERT_EQ(row.size(), 2u);
  EXPECT_EQ(row[0].viol_country, Code("CN"));
  EXPECT_EQ(row[0].links, 3u);
  EXPECT_DOUBLE_EQ(row[0].share, 0.75);
  EXPECT_EQ(row[1].viol_country, Code("TR"));
  EXPECT_EQ(row[1].links, 1u);
  EXPECT_DOUBLE_EQ(row[1].share, 0.25);
  EXPECT_TRUE(exposure(net, firms, viol, {Code("FR"), Code("C10"), std::nullopt}).empty());

  // Row totals equal the number of violator -> group edges.
  std::uint64_t total = 0;
  for (const auto& r : exposure_matrix(net, firms, viol)) total += r.links;
  EXPECT_EQ(total, 4u);
  const auto by_band = exposure_matrix(net, firms, viol, true);
  ASSERT_FALSE(by_band.empty());
  EXPECT_EQ(by_band[0].band, 0);
  std::ostringstream out;
  write_exposure(exposure_matrix(net, firms, viol), out);
  EXPECT_EQ(out.str(),
            "eu_country,eu_sector,band,viol_country,viol_sector,links,share\n"
            "DE,C29,all,CN,C20,3,0.75\n"
            "DE,C29,all,TR,C13,1,0.25\n");
}

TEST(Csddd, Classification) {
  FirmList firms{eu(0, "DE", "C29"), eu(1, "DE", "C13"), eu(2, "DE", "C29"), eu(3, "DE", "C13"), dummy(4, "CN", "C13")};
  firms[0].employees = 600;
  firms[0].turnover = 200e6;
  firms[1].employees = 300;
  firms[1].turnover = 50e6;
  firms[2].employees = 300;
  firms[2].turnover = 50e6;
  firms[3].employees = 500;  // not strictly above
  firms[3].turnover = 150e6;
  const auto labels = classify_csddd(firms, CsdddThresholds{});
  EXPECT_EQ(labels[0], CsdddGroup::group1);
  EXPECT_EQ(labels[1], CsdddGroup::group2);
  EXPECT_EQ(labels[2], CsdddGroup::none);
  EXPECT_EQ(labels[3], CsdddGroup::group2);
  EXPECT_EQ(labels[4], CsdddGroup::none);
}

TEST(Monitoring, SingleCoveredFirmRatioOne) {
  FirmList firms;
  for (NodeId i = 0; i < 6; ++i) firms.push_back(eu(i));
  std::vector<Edge> edges;
  for (NodeId s = 1; s <= 5; ++s) edges.push_back({s, 0});
  const auto net = SupplyNetwork::from_edges(6, edges);
  std::vector<CsdddGroup> labels(6, CsdddGroup::none);
  labels[0] = CsdddGroup::group1;
  const auto rep = monitoring_stats(net, firms, labels);
  EXPECT_EQ(rep.distinct_suppliers, 5u);
  EXPECT_EQ(rep.supply_links, 5u);
  EXPECT_DOUBLE_EQ(rep.node_link_ratio, 1.0);
}

TEST(Monitoring, SharedSuppliersAndRowLinks) {
  FirmList firms{eu(0), eu(1), eu(2), eu(3), dummy(4, "CN", "C10")};
  const auto net = SupplyNetwork::from_edges(5, {{2, 0}, {3, 0}, {2, 1}, {3, 1}, {4, 1}});
  std::vector<CsdddGroup> labels{CsdddGroup::group1, CsdddGroup::group2, CsdddGroup::none, CsdddGroup::none,
                                 CsdddGroup::none};
  const auto rep = monitoring_stats(net, firms, labels);
  EXPECT_EQ(rep.n_covered, 2u);
  EXPECT_EQ(rep.distinct_suppliers, 3u);
  EXPECT_EQ(rep.supply_links, 5u);
  EXPECT_LT(rep.distinct_suppliers, rep.supply_links);
  EXPECT_EQ(rep.row_links, 1u);
  ASSERT_EQ(rep.sectors.size(), 1u);
  EXPECT_DOUBLE_EQ(rep.sectors[0].covered_fraction, 0.5);
  EXPECT_DOUBLE_EQ(rep.sectors[0].tier1_supplier_fraction, 0.5);
  EXPECT_DOUBLE_EQ(rep.sectors[0].links_per_covered_firm, 2.5);
}

TEST(Monitoring, NoCoveredFirmsWarns) {
  FirmList firms{eu(0), eu(1)};
  const auto net = SupplyNetwork::from_edges(2, {{1, 0}});
  Diagnostics diag;
  const auto rep = monitoring_stats(net, firms, {CsdddGroup::none, CsdddGroup::none}, &diag);
  EXPECT_EQ(rep.n_covered, 0u);
  EXPECT_EQ(rep.supply_links, 0u);
  EXPECT_DOUBLE_EQ(rep.node_link_ratio, 0.0);
  EXPECT_EQ(diag.warnings.size(), 1u);
}
