#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "scdd/checksum.hpp"
#include "scdd/sampler.hpp"
#include "test_helpers.hpp"

using scdd::testing::slurp;
using scdd::testing::TempDir;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string err;
};

Result run_cli(const TempDir& dir, const std::string& args) {
  const auto err_path = dir.file("stderr.txt");
  const std::string cmd = std::string(SCDD_CLI) + " " + args + " > /dev/null 2> " + err_path;
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err_path);
  return r;
}

std::string desk_config() { return std::string(SCDD_DESK) + "/desk.ini"; }

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

}  // namespace

TEST(Cli, Version) {
  TempDir dir;
  const std::string cmd = std::string(SCDD_CLI) + " --version > " + dir.file("v.txt");
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  const auto text = slurp(dir.file("v.txt"));
  EXPECT_NE(text.find("0.1.0"), std::string::npos);
  EXPECT_NE(text.find("network format 1"), std::string::npos);
}

TEST(Cli, IngestManifest) {
  TempDir dir;
  const auto out = dir.file("out");
  const auto r = run_cli(dir, "--config " + desk_config() + " --out " + out + " ingest");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = read_json(fs::path(out) / "ingest" / "ingest_manifest.json");
  EXPECT_EQ(m["row_counts"]["sbs"], 6);
  EXPECT_GT(m["row_counts"]["iot"].get<int>(), 0);
  EXPECT_EQ(m["drop_counts"]["sbs_missing_n_firms"], 1);
  EXPECT_EQ(m["drop_counts"]["iot_non_intermediate"], 1);
  for (const auto& [name, entry] : m["outputs"].items()) {
    EXPECT_EQ(entry["sha256"], scdd::sha256_file((fs::path(out) / "ingest" / name).string())) << name;
  }
}

TEST(Cli, MissingInputFile) {
  TempDir dir;
  auto ini = slurp(desk_config());
  const std::string base = std::string(SCDD_DESK) + "/";
  ini.replace(ini.find("sbs = sbs.csv"), 13, "sbs = " + base + "missing_sbs.csv");
  ini.replace(ini.find("iot = iot.csv"), 13, "iot = " + base + "iot.csv");
  ini.replace(ini.find("trade = trade.csv"), 17, "trade = " + base + "trade.csv");
  ini.replace(ini.find("concordance = concordance.csv"), 29, "concordance = " + base + "concordance.csv");
  ini.replace(ini.find("= violations_child"), 2, "= " + base);
  ini.replace(ini.find("= violations_lawsuits"), 2, "= " + base);
  dir.write("bad.ini", ini);
  const auto r = run_cli(dir, "--config " + dir.file("bad.ini") + " --out " + dir.file("out") + " ingest");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing_sbs.csv"), std::string::npos) << r.err;
}

TEST(Cli, UnknownFlagIsInputError) {
  TempDir dir;
  EXPECT_EQ(run_cli(dir, "--bogus run").code, 2);
  EXPECT_EQ(run_cli(dir, "run").code, 2);  // no config
}

TEST(Cli, RunWritesEveryReportWithChecksums) {
  TempDir dir;
  const auto out = fs::path(dir.file("out"));
  const auto r = run_cli(dir, "--config " + desk_config() + " --out " + out.string() + " --quiet run");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* name : {"firms.csv", "network.scdn", "nodes.csv", "validation.json", "network.manifest.json",
                           "risk_child_forced_labor.csv", "risk_lawsuits.csv", "exposure_child_forced_labor.csv",
                           "exposure_child_forced_labor_by_band.csv", "exposure_lawsuits.csv",
                           "exposure_lawsuits_by_band.csv", "monitoring.json", "run_manifest.json"}) {
    EXPECT_TRUE(fs::exists(out / name)) << name;
  }
  for (const auto& entry : fs::directory_iterator(out)) {
    EXPECT_NE(entry.path().extension(), ".partial") << entry.path();
  }
  const auto m = read_json(out / "run_manifest.json");
  EXPECT_EQ(m["seed"], 7);
  EXPECT_EQ(m["config_sha256"], scdd::sha256_hex(m["config"].get<std::string>()));
  for (const char* stage : {"ingest", "sample", "build", "origins", "validate", "indicators"}) {
    EXPECT_TRUE(m["wall_clock_s"].contains(stage)) << stage;
  }
  std::size_t listed = 0;
  for (const auto& [name, entry] : m["outputs"].items()) {
    ++listed;
    EXPECT_EQ(entry["sha256"], scdd::sha256_file((out / name).string())) << name;
  }
  EXPECT_EQ(listed, 12u);  // everything except the run manifest itself

  // Empty violation list: every lawsuit risk fraction is zero.
  std::ifstream risk(out / "risk_lawsuits.csv");
  std::string line;
  std::getline(risk, line);
  EXPECT_EQ(line, "group_key,tier,semantics,fraction,n_firms");
  std::size_t rows = 0;
  while (std::getline(risk, line)) {
    ++rows;
    const auto parts = scdd::csv::split(line);
    EXPECT_EQ(parts[3], "0") << line;
  }
  EXPECT_GT(rows, 0u);
}

TEST(Cli, EmbeddedConfigReproducesRun) {
  TempDir dir;
  const auto out = fs::path(dir.file("a"));
  ASSERT_EQ(run_cli(dir, "--config " + desk_config() + " --out " + out.string() + " --quiet run").code, 0);
  const auto m = read_json(out / "run_manifest.json");
  auto ini = m["config"].get<std::string>();
  const auto od = ini.find("output_dir = ");
  ini.replace(od, ini.find('\n', od) - od, "output_dir = " + dir.file("b"));
  dir.write("resolved.ini", ini);
  ASSERT_EQ(run_cli(dir, "--config " + dir.file("resolved.ini") + " --quiet run").code, 0);
  for (const char* name : {"network.scdn", "nodes.csv", "risk_child_forced_labor.csv", "monitoring.json"}) {
    EXPECT_EQ(slurp((out / name).string()), slurp(dir.file(std::string("b/") + name))) << name;
  }
}

TEST(Cli, RiskOnExistingNetwork) {
  TempDir dir;
  const auto out = fs::path(dir.file("net"));
  ASSERT_EQ(run_cli(dir, "--config " + desk_config() + " --out " + out.string() + " --quiet build").code, 0);
  const auto net_path = (out / "network.scdn").string();
  const auto net_bytes = slurp(net_path);

  // Same network, different violator list: only the indicator reports change.
  auto ini = slurp(desk_config());
  const std::string base = std::string(SCDD_DESK) + "/";
  for (const char* key : {"sbs = ", "iot = ", "trade = ", "concordance = ", "violations_lawsuits = "}) {
    const auto pos = ini.find(key);
    ini.insert(pos + std::string(key).size(), base);
  }
  const auto pos = ini.find("violations_child_forced_labor = ");
  ini.replace(pos, ini.find('\n', pos) - pos, "violations_child_forced_labor = " + dir.file("viol.csv"));
  dir.write("swap.ini", ini);
  dir.write("viol.csv", "country,sector\nIN,C29\nCN,A01\n");
  const auto r1 = run_cli(dir, "--config " + dir.file("swap.ini") + " --out " + dir.file("r1") + " risk --network " + net_path);
  ASSERT_EQ(r1.code, 0) << r1.err;
  dir.write("viol.csv", "country,sector\nCN,C29\n");
  const auto r2 = run_cli(dir, "--config " + dir.file("swap.ini") + " --out " + dir.file("r2") + " risk --network " + net_path);
  ASSERT_EQ(r2.code, 0) << r2.err;
  EXPECT_EQ(slurp(net_path), net_bytes);
  const auto m = read_json(dir.file("r2/risk_manifest.json"));
  EXPECT_EQ(m["source_network"]["network_sha256"], scdd::sha256_file(net_path));
  EXPECT_TRUE(fs::exists(dir.file("r2/risk_child_forced_labor.csv")));
  EXPECT_FALSE(fs::exists(dir.file("r2/network.scdn")));

  const auto e = run_cli(dir, "--config " + dir.file("swap.ini") + " --out " + dir.file("e") + " exposure --network " + net_path);
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_TRUE(fs::exists(dir.file("e/exposure_child_forced_labor_by_band.csv")));
  const auto v = run_cli(dir, "--config " + dir.file("swap.ini") + " --out " + dir.file("v") + " validate --network " + net_path);
  ASSERT_EQ(v.code, 0) << v.err;
  EXPECT_TRUE(fs::exists(dir.file("v/validation.json")));
}

TEST(Cli, IntegrityFailures) {
  TempDir dir;
  const auto out = fs::path(dir.file("net"));
  ASSERT_EQ(run_cli(dir, "--config " + desk_config() + " --out " + out.string() + " --quiet build").code, 0);
  const auto good = slurp((out / "network.scdn").string());

  // Corrupted header with the manifest removed: caught by the reader.
  fs::remove(out / "network.manifest.json");
  auto bad = good;
  bad[1] = '?';
  dir.write("net/network.scdn", bad);
  auto r = run_cli(dir, "--config " + desk_config() + " --out " + dir.file("r") + " risk --network " + (out / "network.scdn").string());
  EXPECT_EQ(r.code, 3) << r.err;

  // Node metadata that no longer matches the network size.
  dir.write("net/network.scdn", good);
  auto nodes = slurp((out / "nodes.csv").string());
  nodes = nodes.substr(0, nodes.rfind('\n', nodes.size() - 2) + 1);
  dir.write("net/nodes.csv", nodes);
  r = run_cli(dir, "--config " + desk_config() + " --out " + dir.file("r") + " risk --network " + (out / "network.scdn").string());
  EXPECT_EQ(r.code, 3) << r.err;
}

TEST(Cli, ChecksumMismatchWithManifest) {
  TempDir dir;
  const auto out = fs::path(dir.file("net"));
  ASSERT_EQ(run_cli(dir, "--config " + desk_config() + " --out " + out.string() + " --quiet build").code, 0);
  auto nodes = slurp((out / "nodes.csv").string());
  nodes[nodes.find(",AT,") + 1] = 'B';  // still parses, checksum differs
  dir.write("net/nodes.csv", nodes);
  const auto r = run_cli(dir, "--config " + desk_config() + " --out " + dir.file("r") + " risk --network " + (out / "network.scdn").string());
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.err.find("checksum"), std::string::npos) << r.err;
}

TEST(Cli, HalvedScaleHalvesFirms) {
  TempDir dir;
  // A larger variant of the desk SBS so rounding is negligible.
  auto sbs = slurp(std::string(SCDD_DESK) + "/sbs.csv");
  std::string big = "country,sector,band,n_firms,avg_employees,turnover_per_employee\n";
  std::istringstream in(sbs);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    auto parts = scdd::csv::split(line);
    if (parts[3].empty()) continue;
    big += std::string(parts[0]) + "," + std::string(parts[1]) + "," + std::string(parts[2]) + "," +
           std::to_string(std::stoi(std::string(parts[3])) * 501) + "," + std::string(parts[4]) + "," +
           std::string(parts[5]) + "\n";
  }
  dir.write("sbs.csv", big);
  auto ini = slurp(desk_config());
  const std::string base = std::string(SCDD_DESK) + "/";
  for (const char* key : {"iot = ", "trade = ", "concordance = ", "violations_child_forced_labor = ", "violations_lawsuits = "}) {
    ini.insert(ini.find(key) + std::string(key).size(), base);
  }
  ini.replace(ini.find("sbs = sbs.csv"), 13, "sbs = " + dir.file("sbs.csv"));
  dir.write("big.ini", ini);
  ASSERT_EQ(run_cli(dir, "--config " + dir.file("big.ini") + " --out " + dir.file("full") + " sample").code, 0);
  ASSERT_EQ(run_cli(dir, "--config " + dir.file("big.ini") + " --out " + dir.file("half") + " --scale 0.5 sample").code, 0);
  auto count_eu = [](const std::string& path) {
    std::size_t n = 0;
    for (const auto& f : scdd::load_firms(path)) n += f.is_row_dummy ? 0 : 1;
    return n;
  };
  const auto full = count_eu(dir.file("full/firms.csv"));
  const auto half = count_eu(dir.file("half/firms.csv"));
  EXPECT_EQ(full, 11u * 501u);
  EXPECT_LE(std::abs(static_cast<double>(full) / 2.0 - static_cast<double>(half)), 6 * 0.5);
}
