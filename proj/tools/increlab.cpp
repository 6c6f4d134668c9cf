#include "increlab/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"increlab: incremental dissipativity toolkit"};
  app.require_subcommand(1);

  increlab::cli::Invocation inv;
  std::string config;
  std::string out;
  std::int64_t seed = 0;

  for (const char* name : {"simulate", "falsify", "check", "replay"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "JSON run configuration (replay: certificate file)")->required();
    sub->add_option("--out", out, "output path (default: stdout)");
    sub->add_option("--seed", seed, "override the configured seed");
    sub->callback([&inv, name] { inv.command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : increlab::cli::kConfigError;
  }

  inv.config = config;
  if (!out.empty()) inv.out = out;
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed") > 0) inv.seed = seed;
  }
  return increlab::cli::run(inv, std::cout, std::cerr);
}
