#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mmrx/config.hpp"
#include "mmrx/types.hpp"

namespace mmrx::cli {

struct CommandOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<PrecisionMode> precision;
  std::optional<std::string> out_dir;
  bool quiet = false;
};

// Exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O error.
int cmd_gen(const CommandOptions& opts);
int cmd_matched(const CommandOptions& opts);
int cmd_calibrate(const CommandOptions& opts);
int cmd_precision_study(const CommandOptions& opts);
int cmd_noise_sweep(const CommandOptions& opts);
int cmd_curves(const CommandOptions& opts);

}  // namespace mmrx::cli
