#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "rcm/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Random conductance model numerical lab"};
  app.set_version_flag("--version", rcm::cli::kVersion);
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "YAML config file (or a previous rcm output)");
    sub->add_option("--seed", seed, "Master seed (overrides the config)");
    sub->add_option("--out", out, "Output path, - for stdout (overrides the config)");
    sub->add_option("--format", format, "Output format (overrides the config)")->check(CLI::IsMember({"csv", "json"}));
  };
  for (const auto& name : rcm::subcommands()) add_common(app.add_subcommand(name, "Run the " + name + " experiment"));
  auto* validate = app.add_subcommand("validate", "Check a config and list findings");
  validate->add_option("--config", config_path, "YAML config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return rcm::cli::usage;
  }

  const CLI::App* sub = app.get_subcommands().front();
  rcm::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = rcm::load_config(config_path);
  } catch (const rcm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return rcm::cli::usage;
  }

  if (sub->get_name() == "validate") {
    const auto findings = rcm::validate(cfg);
    for (const auto& f : findings) std::cout << f.path << ": " << f.message << "\n";
    return findings.empty() ? rcm::cli::ok : rcm::cli::usage;
  }

  if (!cfg.command.empty() && cfg.command != sub->get_name()) {
    std::cerr << "config error: command: config is for '" << cfg.command << "', not '" << sub->get_name() << "'\n";
    return rcm::cli::usage;
  }
  cfg.command = sub->get_name();
  if (seed) cfg.seed = *seed;
  if (out) cfg.output.path = *out;
  if (format) cfg.output.format = *format;
  return rcm::cli::run(cfg);
}
