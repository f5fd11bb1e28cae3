#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbrw/config.hpp"

namespace kbrw {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int validation = 2;
inline constexpr int no_critical_point = 3;
inline constexpr int budget = 4;
}  // namespace exit_code

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Command-line overrides applied on top of the config file.
struct RunFlags {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::size_t> escape_cap;
  bool timing = false;            // fill runtime_ms; off keeps output byte-stable
  long long max_runtime_ms = 0;   // 0 = unlimited
};

struct CommandOutput {
  std::string csv;
  std::vector<std::string> warnings;
};

CommandOutput cmd_analyze(const ExperimentConfig& cfg, const RunFlags& flags);
CommandOutput cmd_survival(const ExperimentConfig& cfg, const RunFlags& flags);
CommandOutput cmd_pemantle(const ExperimentConfig& cfg, const RunFlags& flags);
CommandOutput cmd_mogulskii(const ExperimentConfig& cfg, const RunFlags& flags);
CommandOutput cmd_escape_sweep(const ExperimentConfig& cfg, const RunFlags& flags);
CommandOutput cmd_spine_check(const ExperimentConfig& cfg, const RunFlags& flags);
CommandOutput cmd_gw_embed(const ExperimentConfig& cfg, const RunFlags& flags);

/// Runs the named command and maps failures to exit codes: validation
/// errors 2, missing critical point 3, budget 4. Messages go to `errors`.
int run_command(const std::string& name, const ExperimentConfig& cfg, const RunFlags& flags, CommandOutput& out,
                std::string& errors);

/// Shortest round-trip-safe decimal with 17 significant digits.
std::string format_number(double x);

}  // namespace kbrw
