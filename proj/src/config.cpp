#include "mmrx/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "mmrx/io.hpp"

namespace mmrx::cli {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what) {
  throw ValidationError(origin + ":" + std::to_string(line) + ": " + what);
}

struct Context {
  const std::string& origin;
  int line;
};

double parse_double(const Context& ctx, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail(ctx.origin, ctx.line, "expected a number, got '" + v + "'");
  }
}

long long parse_int(const Context& ctx, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    fail(ctx.origin, ctx.line, "expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const Context& ctx, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    fail(ctx.origin, ctx.line, "expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const Context& ctx, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ctx.origin, ctx.line, "expected a boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  const bool has_files = !system.matrix_file.empty() || !system.true_matrix_file.empty();
  if (has_files && (system.matrix_file.empty() || system.true_matrix_file.empty())) {
    throw ValidationError("system.matrix_file and system.true_matrix_file must be set together");
  }
  if (!has_files) {
    if (system.m < 1 || system.n < 1) throw ValidationError("system dimensions must be positive");
    if (system.m >= system.n) {
      throw ValidationError("system.M=" + std::to_string(system.m) +
                            " must be smaller than system.N=" + std::to_string(system.n));
    }
  }
  if (!(system.noise_sigma >= 0)) throw ValidationError("system.noise_sigma must be >= 0");
  if (solver.kind != "algo1" && solver.kind != "algo2" && solver.kind != "algo3") {
    throw ValidationError("solver.kind must be one of algo1, algo2, algo3");
  }
  if (solver.epochs < 1) throw ValidationError("solver.epochs must be >= 1");
  if (solver.target_sparsity < 1) throw ValidationError("solver.target_sparsity must be >= 1");
  if (reconstruct.lambda_reg < 0) throw ValidationError("reconstruct.lambda_reg must be >= 0");
  if (reconstruct.max_iters < 1) throw ValidationError("reconstruct.max_iters must be >= 1");
  if (outputs.directory.empty()) throw ValidationError("outputs.directory must not be empty");
  if (noise_sweep.sigmas.empty()) throw ValidationError("noise_sweep.sigmas must not be empty");
  for (double s : noise_sweep.sigmas) {
    if (!(s >= 0)) throw ValidationError("noise_sweep.sigmas entries must be >= 0");
  }
  if (noise_sweep.trials < 1) throw ValidationError("noise_sweep.trials must be >= 1");
  if (calibrate.num_targets < 1) throw ValidationError("calibrate.num_targets must be >= 1");
  if (curves.i_values.empty()) throw ValidationError("curves.i_values must not be empty");
  for (int i : curves.i_values) {
    if (i < 0) throw ValidationError("curves.i_values entries must be >= 0");
  }
  if (!(curves.grid_step > 0 && curves.grid_step < 1)) {
    throw ValidationError("curves.grid_step must be in (0, 1)");
  }
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string raw;
  std::string section;
  int line_no = 0;

  while (std::getline(ss, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const Context ctx{origin, line_no};

    if (line.front() == '[') {
      if (line.back() != ']') fail(origin, line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "system" && section != "solver" && section != "reconstruct" &&
          section != "outputs" && section != "noise_sweep" && section != "calibrate" &&
          section != "curves") {
        fail(origin, line_no, "unknown section [" + section + "]");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(origin, line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) fail(origin, line_no, "key '" + key + "' outside of any section");

    if (section == "system") {
      if (key == "M") cfg.system.m = static_cast<Index>(parse_int(ctx, value));
      else if (key == "N") cfg.system.n = static_cast<Index>(parse_int(ctx, value));
      else if (key == "seed") cfg.system.seed = parse_u64(ctx, value);
      else if (key == "noise_sigma") cfg.system.noise_sigma = parse_double(ctx, value);
      else if (key == "precision") {
        const auto mode = parse_precision(value);
        if (!mode) fail(origin, line_no, "precision must be 'single' or 'double'");
        cfg.system.precision = *mode;
      } else if (key == "matrix_file") cfg.system.matrix_file = value;
      else if (key == "true_matrix_file") cfg.system.true_matrix_file = value;
      else fail(origin, line_no, "unknown key 'system." + key + "'");
    } else if (section == "solver") {
      if (key == "kind") cfg.solver.kind = value;
      else if (key == "epochs") cfg.solver.epochs = static_cast<int>(parse_int(ctx, value));
      else if (key == "pm_image") cfg.solver.pm_image = value;
      else if (key == "target_image") cfg.solver.target_image = value;
      else if (key == "target_sparsity") cfg.solver.target_sparsity = static_cast<Index>(parse_int(ctx, value));
      else fail(origin, line_no, "unknown key 'solver." + key + "'");
    } else if (section == "reconstruct") {
      if (key == "lambda_reg") {
        cfg.reconstruct.lambda_reg = value == "auto" ? 0.0 : parse_double(ctx, value);
      } else if (key == "max_iters") cfg.reconstruct.max_iters = static_cast<int>(parse_int(ctx, value));
      else if (key == "nonneg") cfg.reconstruct.nonneg = parse_bool(ctx, value);
      else fail(origin, line_no, "unknown key 'reconstruct." + key + "'");
    } else if (section == "outputs") {
      if (key == "directory") cfg.outputs.directory = value;
      else if (key == "emit_svg") cfg.outputs.emit_svg = parse_bool(ctx, value);
      else fail(origin, line_no, "unknown key 'outputs." + key + "'");
    } else if (section == "noise_sweep") {
      if (key == "sigmas") {
        cfg.noise_sweep.sigmas.clear();
        for (const auto& item : split_list(value)) {
          cfg.noise_sweep.sigmas.push_back(parse_double(ctx, item));
        }
      } else if (key == "trials") cfg.noise_sweep.trials = static_cast<int>(parse_int(ctx, value));
      else fail(origin, line_no, "unknown key 'noise_sweep." + key + "'");
    } else if (section == "calibrate") {
      if (key == "substitute_targets") cfg.calibrate.substitute_targets = parse_bool(ctx, value);
      else if (key == "num_targets") cfg.calibrate.num_targets = static_cast<int>(parse_int(ctx, value));
      else fail(origin, line_no, "unknown key 'calibrate." + key + "'");
    } else if (section == "curves") {
      if (key == "i_values") {
        cfg.curves.i_values.clear();
        for (const auto& item : split_list(value)) {
          cfg.curves.i_values.push_back(static_cast<int>(parse_int(ctx, item)));
        }
      } else if (key == "grid_step") cfg.curves.grid_step = parse_double(ctx, value);
      else fail(origin, line_no, "unknown key 'curves." + key + "'");
    }
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.string());
}

std::string render_config(const ExperimentConfig& cfg) {
  std::string out;
  out += "[system]\n";
  out += "M = " + std::to_string(cfg.system.m) + "\n";
  out += "N = " + std::to_string(cfg.system.n) + "\n";
  out += "seed = " + std::to_string(cfg.system.seed) + "\n";
  out += "noise_sigma = " + io::csv_field(cfg.system.noise_sigma) + "\n";
  out += "precision = " + std::string(to_string(cfg.system.precision)) + "\n";
  if (!cfg.system.matrix_file.empty()) {
    out += "matrix_file = " + cfg.system.matrix_file + "\n";
    out += "true_matrix_file = " + cfg.system.true_matrix_file + "\n";
  }
  out += "\n[solver]\n";
  out += "kind = " + cfg.solver.kind + "\n";
  out += "epochs = " + std::to_string(cfg.solver.epochs) + "\n";
  out += "pm_image = " + cfg.solver.pm_image + "\n";
  out += "target_image = " + cfg.solver.target_image + "\n";
  out += "target_sparsity = " + std::to_string(cfg.solver.target_sparsity) + "\n";
  out += "\n[reconstruct]\n";
  out += "lambda_reg = " +
         (cfg.reconstruct.lambda_reg == 0.0 ? std::string("auto")
                                            : io::csv_field(cfg.reconstruct.lambda_reg)) +
         "\n";
  out += "max_iters = " + std::to_string(cfg.reconstruct.max_iters) + "\n";
  out += std::string("nonneg = ") + (cfg.reconstruct.nonneg ? "true" : "false") + "\n";
  out += "\n[outputs]\n";
  out += "directory = " + cfg.outputs.directory + "\n";
  out += std::string("emit_svg = ") + (cfg.outputs.emit_svg ? "true" : "false") + "\n";
  out += "\n[noise_sweep]\n";
  out += "sigmas = ";
  for (std::size_t i = 0; i < cfg.noise_sweep.sigmas.size(); ++i) {
    if (i) out += ", ";
    out += io::csv_field(cfg.noise_sweep.sigmas[i]);
  }
  out += "\n";
  out += "trials = " + std::to_string(cfg.noise_sweep.trials) + "\n";
  out += "\n[calibrate]\n";
  out += std::string("substitute_targets = ") + (cfg.calibrate.substitute_targets ? "true" : "false") + "\n";
  out += "num_targets = " + std::to_string(cfg.calibrate.num_targets) + "\n";
  out += "\n[curves]\n";
  out += "i_values = ";
  for (std::size_t i = 0; i < cfg.curves.i_values.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(cfg.curves.i_values[i]);
  }
  out += "\n";
  out += "grid_step = " + io::csv_field(cfg.curves.grid_step) + "\n";
  return out;
}

}  // namespace mmrx::cli
