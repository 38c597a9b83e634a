#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "collapse/core.hpp"

namespace collapse::cli {

inline constexpr int kSchemaVersion = 1;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitCheckFailed = 3;

/// Thrown for anything wrong with the user's configuration.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// The built-in configuration every file and flag is layered on top of.
nlohmann::json default_config();

/// Applies one "--key=value" override. `key` may be dotted
/// ("sweep.n_list"); `value` is parsed as JSON when possible and kept as a
/// string otherwise.
void apply_override(nlohmann::json& config, const std::string& key, const std::string& value);

/// SimParams from the top-level keys of a merged config.
SimParams sim_params_from(const nlohmann::json& config);

/// Full round-trip decimal form (17 significant digits).
std::string format_number(double x);

/// Runs one invocation, e.g. {"sweep", "--config=run.json", "--out=results"}.
/// Returns the process exit code; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace collapse::cli
