#pragma once

// Command implementations behind the `increlab` executable. Every command
// takes a JSON run configuration; defaults are filled in and the resolved
// configuration is embedded in the command's output.
//
// Exit codes: 0 success / PASS, 1 configuration error, 2 runtime or
// simulation error, 3 negative result (no violation found, check FAIL).

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

namespace increlab::cli {

enum ExitCode : int { kSuccess = 0, kConfigError = 1, kRuntimeError = 2, kNegative = 3 };

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Invocation {
  std::string command;  // simulate | falsify | check | replay
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;  // stdout when empty
  std::optional<std::int64_t> seed;
};

/// Validates `raw` for `command`, rejecting unknown keys, and returns it with
/// every default filled in. Throws ConfigError.
nlohmann::json resolve_config(const std::string& command, const nlohmann::json& raw,
                              std::optional<std::int64_t> seed_override = std::nullopt);

/// Runs one command. Output goes to `inv.out` when set, otherwise to `out`;
/// diagnostics go to `err`.
int run(const Invocation& inv, std::ostream& out, std::ostream& err);

}  // namespace increlab::cli
