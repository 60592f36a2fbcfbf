// qotto: command-line front end for the adiabatic-perturbation Otto cycle
// experiments. Exit codes: 0 success, 2 configuration error, 3 numerical
// convergence or self-check failure, 1 anything else.
#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qotto/cli/commands.hpp"
#include "qotto/errors.hpp"
#include "qotto/otto.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Flags {
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> threads;
  std::vector<std::string> assignments;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config_path, "key=value configuration file")->check(CLI::ExistingFile);
  sub->add_option("--out", f.out, "output path (default <command>.<format>)");
  sub->add_option("--format", f.format, "csv or jsonl");
  sub->add_option("--seed", f.seed, "64-bit seed");
  sub->add_option("--threads", f.threads, "worker threads");
  sub->add_option("--set", f.assignments, "override one config key, key=value (repeatable)");
}

// File first, then --set, then the dedicated flags.
qotto::cli::Config resolve(const Flags& f) {
  qotto::cli::Config c;
  if (!f.config_path.empty()) c = qotto::cli::Config::load(f.config_path);
  for (const auto& a : f.assignments) c.set_assignment(a);
  if (f.out) c.set("out", *f.out, "--out");
  if (f.format) c.set("format", *f.format, "--format");
  if (f.seed) c.set("seed", std::to_string(*f.seed), "--seed");
  if (f.threads) c.set("threads", std::to_string(*f.threads), "--threads");
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-time quantum Otto cycle experiments"};
  app.set_version_flag("--version", std::string(qotto::cli::kLibraryVersion));
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"scaling", "extra work of a piston stroke against stroke time"},
      {"emp-curves", "efficiency-at-maximum-power bounds against Carnot efficiency"},
      {"piston-emp", "piston efficiency at maximum power against compression ratio"},
      {"cloud", "random (tau1, tau3) samples of power and efficiency"}};
  std::vector<Flags> flags(commands.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    subs.push_back(app.add_subcommand(commands[i].first, commands[i].second));
    add_flags(subs.back(), flags[i]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  std::size_t which = 0;
  while (!subs[which]->parsed()) ++which;
  const std::string name = commands[which].first;

  try {
    const auto config = resolve(flags[which]);
    const auto result = qotto::cli::run_command(name, config);
    qotto::cli::write_outputs(result);
    std::cerr << name << ": wrote " << result.data.rows.size() << " rows to " << result.run.output_path() << "\n";
    if (!result.checks_passed) {
      std::cerr << name << ": self-check failed: " << result.failure << "\n";
      return kExitNumerical;
    }
    return 0;
  } catch (const qotto::cli::config_error& e) {
    std::cerr << name << ": configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const qotto::otto::regime_error& e) {
    std::cerr << name << ": configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const qotto::numerical_error& e) {
    std::cerr << name << ": numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << name << ": configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << name << ": error: " << e.what() << "\n";
    return 1;
  }
}
