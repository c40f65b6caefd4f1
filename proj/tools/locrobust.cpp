#include "locrobust/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <optional>
#include <thread>

namespace pl = locrobust::pipeline;

namespace {

struct Common {
  std::string manifest;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
};

void add_common(CLI::App* cmd, Common& c, bool needs_manifest = true) {
  auto* opt = cmd->add_option("--manifest,-m", c.manifest, "Run manifest (JSON)");
  if (needs_manifest) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override the manifest seed");
  cmd->add_option("--threads,-j", c.threads, "Worker threads (0 = hardware concurrency)");
}

pl::RunManifest load(const Common& c) {
  auto m = pl::load_manifest(c.manifest);
  if (c.seed) m.seed = *c.seed;
  return m;
}

pl::Options options(const Common& c) {
  pl::Options o;
  o.threads = c.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : c.threads;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localisation robustness metrics: simulate, localise, evaluate"};
  app.set_version_flag("--version", std::string(locrobust::kVersion));
  app.require_subcommand(1);

  Common sim, loc, met, rep, ver;
  auto* c_sim = app.add_subcommand("simulate", "Generate the world map and a sensor dataset");
  add_common(c_sim, sim);
  auto* c_loc = app.add_subcommand("localise", "Run the localisation strategies over the dataset");
  add_common(c_loc, loc);
  auto* c_met = app.add_subcommand("metrics", "PAU curves, VPT profile, robustness margin and plots");
  add_common(c_met, met);
  auto* c_rep = app.add_subcommand("report", "simulate + localise + metrics, then write report.txt");
  add_common(c_rep, rep);
  auto* c_ver = app.add_subcommand("verify", "Compare the optimised paths against brute-force oracles");
  add_common(c_ver, ver, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_ver->parsed()) {
      std::uint64_t seed = ver.seed.value_or(1);
      if (!ver.manifest.empty()) seed = ver.seed.value_or(load(ver).seed);
      return pl::cmd_verify(seed, options(ver), std::cout) == 0 ? 0 : 1;
    }
    if (c_sim->parsed()) {
      pl::cmd_simulate(load(sim), options(sim), std::cout);
      return 0;
    }
    if (c_loc->parsed()) {
      const auto out = pl::cmd_localise(load(loc), options(loc), std::cout);
      for (const auto& o : out) {
        if (!o.run) return 1;
      }
      return 0;
    }
    if (c_met->parsed()) return pl::cmd_metrics(load(met), options(met), std::cout).complete ? 0 : 1;
    if (c_rep->parsed()) return pl::cmd_report(load(rep), options(rep), std::cout);
  } catch (const std::exception& e) {
    std::cerr << "locrobust: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
