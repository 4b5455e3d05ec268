#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "defglm/errors.hpp"
#include "defglm_cli/commands.hpp"
#include "defglm_cli/config.hpp"
#include "defglm_cli/csv.hpp"

namespace {

constexpr const char* kTrafficSchema = R"(Input CSV schema (header row required, extra columns ignored):
  sensor     sensor id (text)
  direction  inbound | outbound
  date       YYYY-MM-DD
  hour       0..23 (24 is accepted and wrapped to 0)
  count      nonnegative integer
Malformed rows are rejected and counted; repeated (sensor, direction, date, hour)
rows keep the first occurrence.)";

struct Options {
  std::map<std::string, std::string> values;
  std::string config_path;

  // Registers --name bound to values[key]; empty means unset.
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& key,
                   const std::string& help) {
    return app->add_option(flag, values[key], help);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extended GLMs with dropout regularisation in mean and dispersion"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  Options opt;
  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opt.config_path, "JSON config (see `defglm defaults`)");
    opt.add(sub, "-s,--seed", "seed", "Base seed; overrides the config's seed");
    opt.add(sub, "-o,--out", "out", "Output location")->required();
  };

  auto* simulate = app.add_subcommand("simulate", "Generate one simulated data set as x,y CSV");
  common(simulate);
  opt.add(simulate, "--replicate", "replicate", "Replicate index (default 1)");

  auto* scenario = app.add_subcommand(
      "scenario", "Run a simulation scenario: CV on replicate 1, fit replicates 2..R+1");
  common(scenario);
  opt.add(scenario, "-m,--methods", "methods", "Comma list of bernoulli,gaussian,pmle");

  auto* cv = app.add_subcommand("cv", "Random-search k-fold cross-validation for one method");
  common(cv);
  opt.add(cv, "-d,--data", "data", "x,y CSV; default: replicate 1 generated from the config");
  opt.add(cv, "-m,--method", "method", "bernoulli | gaussian | pmle");

  auto* fit = app.add_subcommand("fit", "Single fit at fixed hyperparameters");
  common(fit);
  opt.add(fit, "-d,--data", "data", "x,y CSV with x in [0,1]; default: generated replicate 1");
  opt.add(fit, "-m,--method", "method", "bernoulli | gaussian | pmle");
  opt.add(fit, "--param1", "param1", "Mean-side hyperparameter (default 0)");
  opt.add(fit, "--param2", "param2", "Dispersion-side hyperparameter (default 0)");

  auto* traffic = app.add_subcommand("traffic", "Double Poisson model of hourly traffic counts");
  traffic->footer(kTrafficSchema);
  common(traffic);
  opt.add(traffic, "-i,--input", "input", "Traffic CSV")->required();
  opt.add(traffic, "--sensor", "sensor", "Sensor id")->required();
  opt.add(traffic, "--direction", "direction", "inbound | outbound")->required();
  opt.add(traffic, "--noise", "noise", "bernoulli (default) | gaussian");
  opt.add(traffic, "--samples", "samples", "CV samples (default 5000)");
  opt.add(traffic, "--mean-knots", "mean_knots", "Cyclic knots for the mean (default 12)");
  opt.add(traffic, "--disp-knots", "disp_knots", "Cyclic knots for the dispersion (default 8)");
  opt.add(traffic, "--date-from", "date_from", "Keep dates >= YYYY-MM-DD");
  opt.add(traffic, "--date-to", "date_to", "Keep dates <= YYYY-MM-DD");

  auto* rerun = app.add_subcommand("rerun", "Repeat the run recorded in a manifest");
  std::string manifest_path;
  std::string rerun_out;
  bool verify = false;
  rerun->add_option("--manifest", manifest_path, "manifest.json")->required();
  rerun->add_option("-o,--out", rerun_out, "Write outputs here instead of the recorded location");
  rerun->add_flag("--verify", verify, "Fail (exit 4) unless every output is byte-identical");

  app.add_subcommand("defaults", "Print the default config as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  auto logger = spdlog::stderr_color_mt("defglm");
  spdlog::set_default_logger(logger);
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "defaults") {
      std::cout << defglm::cli::default_config_text();
      return 0;
    }
    if (name == "rerun") {
      const auto report = defglm::cli::rerun(
          manifest_path, rerun_out.empty() ? std::nullopt : std::optional<std::string>(rerun_out), verify);
      std::cout << report.manifest_path << "\n";
      return 0;
    }
    defglm::cli::Invocation inv;
    inv.command = name;
    for (const auto& [key, value] : opt.values) {
      if (!value.empty()) inv.options[key] = value;
    }
    if (!opt.config_path.empty()) {
      try {
        inv.config_text = defglm::cli::read_text_file(opt.config_path);
      } catch (const defglm::DataError& e) {
        throw defglm::ConfigError(e.what());
      }
      inv.config_source = opt.config_path;
    }
    const auto report = defglm::cli::execute(inv);
    for (const auto& p : report.outputs) std::cout << p << "\n";
    std::cout << report.manifest_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return defglm::cli::exit_code_for(e);
  }
}
