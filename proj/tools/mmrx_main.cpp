#include <CLI11.hpp>

#include <cstdint>
#include <functional>
#include <string>

#include "mmrx/commands.hpp"
#include "mmrx/version.hpp"

namespace {

struct RawOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string precision;
  std::string out_dir;
  bool quiet = false;
};

void add_common(CLI::App* cmd, RawOptions& raw) {
  cmd->add_option("--config", raw.config_path, "experiment config file")->required();
  cmd->add_option("--seed", raw.seed, "override system.seed")->each([&raw](const std::string&) {
    raw.seed_set = true;
  });
  cmd->add_option("--precision", raw.precision, "single or double")
      ->check(CLI::IsMember({"single", "double"}));
  cmd->add_option("--out", raw.out_dir, "override outputs.directory");
  cmd->add_flag("--quiet", raw.quiet, "suppress progress output");
}

mmrx::cli::CommandOptions to_options(const RawOptions& raw) {
  mmrx::cli::CommandOptions opts;
  opts.config_path = raw.config_path;
  if (raw.seed_set) opts.seed = raw.seed;
  if (!raw.precision.empty()) opts.precision = mmrx::parse_precision(raw.precision);
  if (!raw.out_dir.empty()) opts.out_dir = raw.out_dir;
  opts.quiet = raw.quiet;
  return opts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"measurement-matrix recovery experiments"};
  app.set_version_flag("--version", std::string("mmrx ") + mmrx::kVersion);
  app.require_subcommand(1);

  struct Entry {
    const char* name;
    const char* help;
    std::function<int(const mmrx::cli::CommandOptions&)> run;
  };
  const Entry entries[] = {
      {"gen", "generate and store a simulated measurement system", mmrx::cli::cmd_gen},
      {"matched", "matched solve of one measurement plus reconstruction", mmrx::cli::cmd_matched},
      {"calibrate", "calibration solve and multi-target reconstruction", mmrx::cli::cmd_calibrate},
      {"precision-study", "lambda-vector study across algorithms and precisions",
       mmrx::cli::cmd_precision_study},
      {"noise-sweep", "solver quality across a noise-level sweep", mmrx::cli::cmd_noise_sweep},
      {"curves", "damping curve family table", mmrx::cli::cmd_curves},
  };

  std::vector<std::shared_ptr<RawOptions>> raws;
  int exit_code = 0;
  for (const auto& entry : entries) {
    auto raw = std::make_shared<RawOptions>();
    raws.push_back(raw);
    CLI::App* cmd = app.add_subcommand(entry.name, entry.help);
    add_common(cmd, *raw);
    cmd->callback([&exit_code, raw, run = entry.run] { exit_code = run(to_options(*raw)); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems are configuration errors
  }
  return exit_code;
}
