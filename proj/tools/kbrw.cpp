// kbrw command-line front end.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "kbrw/commands.hpp"
#include "kbrw/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Killed branching random walks: constants, survival oracles and corridor experiments"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_path;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::size_t escape_cap = 0;
  bool timing = false;
  long long max_runtime_ms = 0;

  auto* config_opt = app.add_option("--config", config_path, "experiment config (JSON)")->required();
  auto* seed_opt = app.add_option("--seed", seed, "base seed, overrides the config");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads (0 = hardware parallelism)");
  app.add_option("--out", out_path, "write CSV here instead of stdout");
  auto* cap_opt = app.add_option("--escape-cap", escape_cap, "population counted as escape");
  app.add_flag("--timing", timing, "fill runtime_ms (output is then no longer byte-stable)");
  app.add_option("--max-runtime-ms", max_runtime_ms, "abort with exit code 4 past this budget");
  (void)config_opt;

  for (const char* name : {"analyze", "survival", "pemantle", "mogulskii", "escape-sweep", "spine-check", "gw-embed"})
    app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kbrw::exit_code::validation;
  }

  kbrw::ExperimentConfig cfg;
  try {
    cfg = kbrw::load_config(config_path);
  } catch (const kbrw::ValidationError& e) {
    std::cerr << "validation failure: " << e.what() << '\n';
    return kbrw::exit_code::validation;
  }

  kbrw::RunFlags flags;
  if (*seed_opt) flags.seed = seed;
  if (*threads_opt) flags.threads = threads;
  if (*cap_opt) flags.escape_cap = escape_cap;
  flags.timing = timing;
  flags.max_runtime_ms = max_runtime_ms;
  if (out_path.empty()) out_path = cfg.out;

  kbrw::CommandOutput out;
  std::string errors;
  const int rc = kbrw::run_command(app.get_subcommands().front()->get_name(), cfg, flags, out, errors);
  for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
  if (rc != kbrw::exit_code::ok) {
    std::cerr << errors << '\n';
    return rc;
  }
  if (out_path.empty()) {
    std::cout << out.csv;
  } else {
    std::ofstream f(out_path, std::ios::binary);
    f << out.csv;
    if (!f) {
      std::cerr << "cannot write " << out_path << '\n';
      return kbrw::exit_code::validation;
    }
  }
  return kbrw::exit_code::ok;
}
