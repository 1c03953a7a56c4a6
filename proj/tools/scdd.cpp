// scdd: command-line driver for the synthetic supply-network pipeline.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "scdd/config.hpp"
#include "scdd/error.hpp"
#include "scdd/network.hpp"
#include "scdd/pipeline.hpp"
#include "scdd/version.hpp"

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> scale;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
  std::string network;
  bool quiet = false;
};

scdd::PipelineConfig resolve(const GlobalFlags& g) {
  if (g.config.empty()) throw scdd::Error(scdd::ErrorKind::config, "--config is required");
  auto cfg = scdd::load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.scale) cfg.scale_factor = *g.scale;
  if (g.threads) cfg.threads = *g.threads;
  if (g.out) cfg.output_dir = *g.out;
  if (g.quiet) cfg.progress = false;
  cfg.validate();
  return cfg;
}

std::string network_path(const GlobalFlags& g, const scdd::PipelineConfig& cfg) {
  if (!g.network.empty()) return g.network;
  return (std::filesystem::path(cfg.output_dir) / "network.scdn").string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic firm-level supply network and due-diligence risk indicators"};
  app.require_subcommand(0, 1);
  GlobalFlags g;
  bool show_version = false;
  app.add_flag("--version", show_version, "Print version and network file format version");
  app.add_option("--config", g.config, "Pipeline config file");
  app.add_option("--seed", g.seed, "Random seed (overrides config)");
  app.add_option("--scale", g.scale, "Scale factor in (0, 1] (overrides config)");
  app.add_option("--threads", g.threads, "Worker threads (overrides config)");
  app.add_option("--out", g.out, "Output directory (overrides config)");
  app.add_flag("--quiet", g.quiet, "No build progress on stderr");

  auto* ingest = app.add_subcommand("ingest", "Validate and normalize input tables");
  auto* sample = app.add_subcommand("sample", "Sample firms and assign degrees");
  auto* build = app.add_subcommand("build", "Sample firms and wire the network");
  auto* risk = app.add_subcommand("risk", "Recompute risk indicators on an existing network");
  auto* exposure = app.add_subcommand("exposure", "Recompute exposure matrices on an existing network");
  auto* run = app.add_subcommand("run", "Full pipeline");
  auto* validate = app.add_subcommand("validate", "Validation statistics for an existing network");
  for (auto* sub : {risk, exposure, validate}) {
    sub->add_option("--network", g.network, "Network file (default: <out>/network.scdn)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (show_version) {
    std::cout << "scdd " << scdd::kVersion << " (network format " << scdd::kNetworkFormatVersion << ")\n";
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 2;
  }

  scdd::Diagnostics diag;
  diag.echo = true;
  try {
    const auto cfg = resolve(g);
    if (ingest->parsed()) {
      scdd::pipeline::cmd_ingest(cfg, diag);
    } else if (sample->parsed()) {
      scdd::pipeline::cmd_sample(cfg, diag);
    } else if (build->parsed()) {
      scdd::pipeline::cmd_build(cfg, diag);
    } else if (risk->parsed()) {
      scdd::pipeline::cmd_risk(cfg, network_path(g, cfg), diag);
    } else if (exposure->parsed()) {
      scdd::pipeline::cmd_exposure(cfg, network_path(g, cfg), diag);
    } else if (run->parsed()) {
      scdd::pipeline::cmd_run(cfg, diag);
    } else if (validate->parsed()) {
      scdd::pipeline::cmd_validate(cfg, network_path(g, cfg), diag);
    }
  } catch (const scdd::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return scdd::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
