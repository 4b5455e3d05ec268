#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "defglm/simlab.hpp"
#include "defglm/tuning.hpp"

namespace defglm::cli {

/// Everything a JSON config file can set. Keys mirror ScenarioConfig, with
/// the optimiser settings nested under "optim"; unknown keys are rejected.
struct RunConfig {
  ScenarioConfig scenario;
  std::optional<std::uint64_t> seed;
  std::vector<Method> methods;  ///< empty: command default
  bool truncate_disp = true;
};

/// Parses a config document. `source` names the file in error messages, which
/// carry the line of the offending key. Throws ConfigError.
RunConfig parse_config(std::string_view text, std::string_view source);

/// Defaults as a JSON document (used when no --config is given, and by --help).
std::string default_config_text();

/// "bernoulli,pmle" -> {bernoulli, pmle}.
std::vector<Method> parse_method_list(std::string_view list);

}  // namespace defglm::cli
