#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmrx/types.hpp"

namespace mmrx::cli {

struct SystemConfig {
  Index m = 64;
  Index n = 256;
  std::uint64_t seed = 1;
  double noise_sigma = 0.0;
  PrecisionMode precision = PrecisionMode::Double;
  // Optional hooks for externally captured systems (MMRX files). When set,
  // both must be given and M/N are taken from the files.
  std::string matrix_file;
  std::string true_matrix_file;
};

struct SolverConfig {
  std::string kind = "algo2";  // algo1 | algo2 | algo3
  int epochs = 20;
  std::string pm_image = "flat_gray";  // builtin name or path to a PGM
  std::string target_image = "sparse";
  Index target_sparsity = 8;
};

struct ReconstructSection {
  double lambda_reg = 0.0;  // 0 = auto scaling from the data
  int max_iters = 2000;
  bool nonneg = true;
};

struct OutputConfig {
  std::string directory = "out";
  bool emit_svg = false;
};

struct SweepConfig {
  std::vector<double> sigmas{0.0, 0.5, 1.0, 1.5, 2.0, 5.0};
  int trials = 20;
};

struct CalibrateSection {
  bool substitute_targets = true;
  int num_targets = 3;
};

struct CurvesSection {
  std::vector<int> i_values{0, 1, 2, 4, 8, 16};
  double grid_step = 0.005;
};

struct ExperimentConfig {
  SystemConfig system;
  SolverConfig solver;
  ReconstructSection reconstruct;
  OutputConfig outputs;
  SweepConfig noise_sweep;
  CalibrateSection calibrate;
  CurvesSection curves;

  void validate() const;
};

// Strict INI-style parser: unknown sections or keys are rejected, values are
// type-checked with line numbers in the error message.
ExperimentConfig parse_config(const std::string& text, const std::string& origin);
ExperimentConfig load_config(const std::filesystem::path& path);

// Fully resolved copy written next to every run's outputs.
std::string render_config(const ExperimentConfig& cfg);

}  // namespace mmrx::cli
