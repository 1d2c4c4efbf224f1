#include "mmrx/commands.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <limits>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include "mmrx/calibration.hpp"
#include "mmrx/diagnostics.hpp"
#include "mmrx/image.hpp"
#include "mmrx/io.hpp"
#include "mmrx/matched.hpp"
#include "mmrx/mismatch.hpp"
#include "mmrx/reconstruct.hpp"
#include "mmrx/sim.hpp"
#include "mmrx/version.hpp"

namespace mmrx::cli {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kStreamTarget = kStreamImages;
constexpr std::uint64_t kStreamPm = 4;
constexpr std::uint64_t kStreamSweep = 5;
constexpr std::uint64_t kStreamMatchErr = 6;
constexpr std::uint64_t kStreamCalTarget = 7;
constexpr std::uint64_t kStreamStudyProbe = 8;
constexpr int kMatchErrorTrials = 32;

struct Resolved {
  ExperimentConfig cfg;
  fs::path out;
};

Resolved prepare(const CommandOptions& opts) {
  ExperimentConfig cfg = load_config(opts.config_path);
  if (opts.seed) cfg.system.seed = *opts.seed;
  if (opts.precision) cfg.system.precision = *opts.precision;
  if (opts.out_dir) cfg.outputs.directory = *opts.out_dir;
  cfg.validate();

  fs::path out(cfg.outputs.directory);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory '" + out.string() + "': " + ec.message());
  io::write_text_file(out / "resolved.cfg", render_config(cfg));
  io::write_text_file(out / "version.txt", std::string("mmrx ") + kVersion + "\n");
  return {std::move(cfg), std::move(out)};
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int thread_cap() {
  const char* env = std::getenv("MMRX_THREADS");
  if (!env) return 1;
  const int v = std::atoi(env);
  return v < 1 ? 1 : v;
}

// Index-based work distribution with deterministic result collection; the
// callable must only write to its own slot.
void parallel_for(int count, const std::function<void(int)>& fn) {
  const int threads = std::min(thread_cap(), count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

template <class T>
struct SystemBundle {
  Mat<T> A;
  MeasurementOracle<T> oracle;
};

template <class T>
SystemBundle<T> build_system(const ExperimentConfig& cfg) {
  if (!cfg.system.matrix_file.empty()) {
    Mat<T> A = checked_measurement_matrix<T>(io::load_matrix<T>(cfg.system.matrix_file));
    Mat<T> hidden = io::load_matrix<T>(cfg.system.true_matrix_file);
    if (hidden.rows() != A.rows() || hidden.cols() != A.cols()) {
      throw ValidationError("loaded matrices disagree on dimensions");
    }
    return {std::move(A), MeasurementOracle<T>(std::move(hidden), cfg.system.noise_sigma,
                                               derive_seed(cfg.system.seed, kStreamNoise))};
  }
  SystemSpec spec;
  spec.m = cfg.system.m;
  spec.n = cfg.system.n;
  spec.seed = cfg.system.seed;
  spec.noise_sigma = cfg.system.noise_sigma;
  auto [A, oracle] = generate_system<T>(spec);
  return {std::move(A), std::move(oracle)};
}

template <class T>
Image<T> make_named_image(const std::string& name, Index n, std::uint64_t seed, Index sparsity) {
  if (name == "flat_gray" || name == "random" || name == "sparse" || name == "smooth") {
    return builtin_image<T>(name, n, seed, sparsity);
  }
  Image<T> img = io::load_pgm<T>(name);
  if (img.size() != n) {
    throw ValidationError("image '" + name + "' has " + std::to_string(img.size()) +
                          " pixels, system expects " + std::to_string(n));
  }
  return img;
}

template <class T>
MatchedSolveConfig<T> solver_config(const ExperimentConfig& cfg, Index n) {
  MatchedSolveConfig<T> sc;
  sc.pm_image = make_named_image<T>(cfg.solver.pm_image, n, derive_seed(cfg.system.seed, kStreamPm),
                                    cfg.solver.target_sparsity);
  sc.epochs = cfg.solver.epochs;
  return sc;
}

// Commands stop a matched solve once the residual is at accumulation
// round-off for the working precision; a pre-measure image matching the
// target then yields a one-step trace.
template <class T>
void set_roundoff_stop(MatchedSolveConfig<T>& sc, const Vec<T>& y) {
  sc.stop_tol = std::numeric_limits<T>::epsilon() * T(100) *
                y.template lpNorm<Eigen::Infinity>();
}

template <class T>
struct ReconMetrics {
  Image<T> image{Vec<T>(), 0, 0};
  double psnr_db = 0;
  double f1 = 0;
  double rel_error = 0;
  bool success = false;
  T lambda_used = T(0);
};

template <class T, class Op>
ReconMetrics<T> run_reconstruction(const Vec<T>& y, const Op& op, const Image<T>& truth,
                                   const ExperimentConfig& cfg) {
  ReconstructConfig<T> rc;
  rc.lambda_reg = cfg.reconstruct.lambda_reg > 0 ? T(cfg.reconstruct.lambda_reg)
                                                 : auto_lambda<T>(op, y);
  rc.max_iters = cfg.reconstruct.max_iters;
  rc.nonneg = cfg.reconstruct.nonneg;
  auto [x_hat, report] = reconstruct(y, op, rc);

  ReconMetrics<T> out;
  const double peak = std::max(1.0, double(truth.pixels.template lpNorm<Eigen::Infinity>()));
  out.psnr_db = psnr(truth.pixels, x_hat, peak);
  out.f1 = support_f1(x_hat, truth.pixels);
  const double truth_norm = truth.pixels.norm();
  out.rel_error = truth_norm > 0 ? double((x_hat - truth.pixels).norm()) / truth_norm : 0.0;
  out.success = out.f1 == 1.0 && out.rel_error <= 1e-3;
  out.lambda_used = report.lambda_used;
  out.image = Image<T>{std::move(x_hat), truth.width, truth.height};
  return out;
}

template <class T>
void write_trace_csv(const fs::path& path, const ErrorTrace<T>& trace) {
  io::CsvWriter csv(path);
  csv.row("iteration", "error_2", "error_inf", "oracle_calls");
  for (const auto& s : trace.steps) csv.row(s.iteration, s.err2, s.err_inf, s.oracle_calls);
}

template <class T>
void write_error_svg(const fs::path& path, const ErrorTrace<T>& trace) {
  io::SvgSeries series;
  series.name = "error_2";
  for (const auto& s : trace.steps) {
    series.points.emplace_back(double(s.iteration), std::max(double(s.err2), 1e-300));
  }
  io::save_svg_curves(path, {series}, "error iteration", "iteration", "error", true);
}

// ---------------------------------------------------------------- gen ----

template <class T>
int run_gen(const Resolved& r, bool quiet) {
  auto system = build_system<T>(r.cfg);
  io::save_matrix<T>(r.out / "A.mmrx", system.A);
  // The hidden matrix is written for test/diagnostic use only; a real
  // acquisition would never have it.
  io::save_matrix<T>(r.out / "A_u.mmrx", system.oracle.true_matrix_for_tests());
  if (!quiet) {
    std::cout << "gen: wrote " << r.cfg.system.m << "x" << r.cfg.system.n << " system to "
              << r.out.string() << "\n";
  }
  return 0;
}

// ------------------------------------------------------------- matched ----

template <class T>
int run_matched(const Resolved& r, bool quiet) {
  const ExperimentConfig& cfg = r.cfg;
  if (cfg.solver.kind != "algo1" && cfg.solver.kind != "algo2") {
    throw ValidationError("matched command requires solver.kind = algo1 or algo2");
  }
  auto system = build_system<T>(cfg);
  const Index n = system.A.cols();

  const Image<T> target = make_named_image<T>(cfg.solver.target_image, n,
                                              derive_seed(cfg.system.seed, kStreamTarget),
                                              cfg.solver.target_sparsity);
  system.oracle.pin_target(target);
  const Vec<T> y = system.oracle.speckle_measure(target);  // the imaging event

  MatchedSolveConfig<T> sc = solver_config<T>(cfg, n);
  set_roundoff_stop(sc, y);
  auto [recv, trace] = cfg.solver.kind == "algo1"
                           ? error_iteration(system.oracle, y, system.A, sc)
                           : matched_solution(system.oracle, y, system.A, sc);

  // Simulation-side diagnostics; these rely on knowing the generated truth.
  const Vec<T> y0 = system.A * sc.pm_image.pixels;
  const Mat<T> sigma = default_sigma(system.A);
  const T k_eps_exact = convergence_factor(y0, sigma, system.A, target);
  const Vec<T> y_clean = system.oracle.true_matrix_for_tests() * target.pixels;
  const T final_match_error =
      match_error(y_clean, recv, target, kMatchErrorTrials, cfg.system.noise_sigma,
                  derive_seed(cfg.system.seed, kStreamMatchErr));

  const ReconMetrics<T> recon = run_reconstruction(y, recv, target, cfg);

  write_trace_csv(r.out / "trace.csv", trace);
  io::save_pgm(r.out / "target.pgm", target);
  io::save_pgm(r.out / "recon.pgm", recon.image);
  {
    io::CsvWriter csv(r.out / "metrics.csv");
    csv.row("k_epsilon", "k_epsilon_estimate", "final_error_2", "final_error_inf", "match_error",
            "psnr", "support_f1", "rel_error", "reconstruction_success", "lambda_used",
            "oracle_calls", "precision");
    const auto& last = trace.steps.back();
    csv.row(k_eps_exact, trace.convergence_factor_estimate, last.err2, last.err_inf,
            final_match_error, recon.psnr_db, recon.f1, recon.rel_error,
            recon.success ? 1 : 0, recon.lambda_used, last.oracle_calls,
            to_string(precision_of<T>()));
  }
  if (cfg.outputs.emit_svg) write_error_svg(r.out / "error_curve.svg", trace);

  if (!quiet) {
    std::cout << "matched(" << cfg.solver.kind << "): k_eps=" << double(k_eps_exact)
              << " final_error=" << double(trace.steps.back().err2)
              << " support_f1=" << recon.f1 << " -> " << r.out.string() << "\n";
  }
  return 0;
}

// ----------------------------------------------------------- calibrate ----

template <class T>
int run_calibrate(const Resolved& r, bool quiet) {
  const ExperimentConfig& cfg = r.cfg;
  auto system = build_system<T>(cfg);
  const Index n = system.A.cols();

  std::vector<Image<T>> targets;
  const std::uint64_t base = derive_seed(cfg.system.seed, kStreamCalTarget);
  for (int i = 0; i < cfg.calibrate.num_targets; ++i) {
    targets.push_back(make_named_image<T>(cfg.solver.target_image, n,
                                          derive_seed(base, static_cast<std::uint64_t>(i)),
                                          cfg.solver.target_sparsity));
  }

  CalibrationConfig<T> cc;
  if (cfg.calibrate.substitute_targets) cc.substitute_images = targets;
  auto [recv, report] = calibrate(system.oracle, system.A, cc);

  io::save_factored(r.out / "arecv_left.mmrx", r.out / "arecv_right.mmrx", recv);
  {
    io::CsvWriter csv(r.out / "report.csv");
    csv.row("orthonormality_residual", "cond_Y", "max_offdiag_k", "oracle_calls",
            "substituted_columns", "precision");
    csv.row(report.orthonormality_residual, report.cond_Y, report.max_offdiag_k,
            report.oracle_calls, report.substituted_columns, to_string(precision_of<T>()));
  }

  io::CsvWriter csv(r.out / "targets.csv");
  csv.row("target", "psnr", "support_f1", "rel_error", "reconstruction_success");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Vec<T> y = system.oracle.speckle_measure(targets[i]);
    const ReconMetrics<T> recon = run_reconstruction(y, recv, targets[i], cfg);
    csv.row(static_cast<long long>(i), recon.psnr_db, recon.f1, recon.rel_error,
            recon.success ? 1 : 0);
    io::save_pgm(r.out / ("target_" + std::to_string(i) + ".pgm"), targets[i]);
    io::save_pgm(r.out / ("recon_" + std::to_string(i) + ".pgm"), recon.image);
  }

  if (!quiet) {
    std::cout << "calibrate: basis_residual=" << double(report.orthonormality_residual)
              << " cond_Y=" << double(report.cond_Y) << " calls=" << report.oracle_calls << " -> "
              << r.out.string() << "\n";
  }
  return 0;
}

// ------------------------------------------------------ precision study ----

template <class T>
void run_study_precision(const Resolved& r, io::CsvWriter& verdicts) {
  const ExperimentConfig& cfg = r.cfg;

  auto run_one = [&](const std::string& algo) {
    auto system = build_system<T>(cfg);
    const Index n = system.A.cols();
    const Image<T> x = make_named_image<T>(cfg.solver.target_image, n,
                                           derive_seed(cfg.system.seed, kStreamTarget),
                                           cfg.solver.target_sparsity);
    const Image<T> x_probe =
        builtin_image<T>("smooth", n, derive_seed(cfg.system.seed, kStreamStudyProbe));
    system.oracle.pin_target(x);
    const Vec<T> y = system.oracle.speckle_measure(x);

    FactoredRecvMatrix<T> recv(system.A.rows(), system.A.cols());
    if (algo == "algo3") {
      CalibrationConfig<T> cc;
      cc.substitute_images = {x};
      recv = calibrate(system.oracle, system.A, cc).first;
    } else {
      MatchedSolveConfig<T> sc = solver_config<T>(cfg, n);
      set_roundoff_stop(sc, y);
      recv = algo == "algo1" ? error_iteration(system.oracle, y, system.A, sc).first
                             : matched_solution(system.oracle, y, system.A, sc).first;
    }

    const LambdaReport<T> lam = lambda_vector(recv, x, x_probe);
    {
      io::CsvWriter csv(r.out / ("lambda_" + algo + "_" + to_string(precision_of<T>()) + ".csv"));
      csv.row("component", "lambda");
      for (Index i = 0; i < lam.lambda.size(); ++i) csv.row(i, lam.lambda[i]);
    }
    const ReconMetrics<T> recon = run_reconstruction(y, recv, x, cfg);
    verdicts.row(algo, to_string(precision_of<T>()), lam.coefficient_of_variation,
                 lam.fluctuating ? "fluctuating" : "constant-like", lam.excluded,
                 recon.success ? 1 : 0, recon.psnr_db, recon.rel_error);
  };

  run_one("algo1");
  run_one("algo2");
  run_one("algo3");
}

// ---------------------------------------------------------- noise sweep ----

template <class T>
int run_noise_sweep(const Resolved& r, bool quiet) {
  const ExperimentConfig& cfg = r.cfg;
  auto base_system = build_system<T>(cfg);
  const Index n = base_system.A.cols();
  const Mat<T> A = base_system.A;
  const Mat<T> hidden = base_system.oracle.true_matrix_for_tests();

  const Image<T> target = make_named_image<T>(cfg.solver.target_image, n,
                                              derive_seed(cfg.system.seed, kStreamTarget),
                                              cfg.solver.target_sparsity);
  const MatchedSolveConfig<T> sc = solver_config<T>(cfg, n);
  const Vec<T> y_clean = hidden * target.pixels;

  const auto& sigmas = cfg.noise_sweep.sigmas;
  const int trials = cfg.noise_sweep.trials;
  const int jobs = static_cast<int>(sigmas.size()) * trials;

  struct Row {
    double sigma = 0, final_error = 0, psnr_db = 0, f1 = 0;
    int trial = 0;
  };
  std::vector<Row> rows(static_cast<std::size_t>(jobs));
  const std::uint64_t sweep_base = derive_seed(cfg.system.seed, kStreamSweep);

  parallel_for(jobs, [&](int j) {
    const int si = j / trials;
    const int trial = j % trials;
    const double sigma = sigmas[static_cast<std::size_t>(si)];

    MeasurementOracle<T> oracle(hidden, sigma, derive_seed(sweep_base, static_cast<std::uint64_t>(j)));
    oracle.pin_target(target);
    const Vec<T> y = oracle.speckle_measure(target);

    try {
      FactoredRecvMatrix<T> recv(A.rows(), A.cols());
      if (cfg.solver.kind == "algo3") {
        CalibrationConfig<T> cc;
        if (cfg.calibrate.substitute_targets) cc.substitute_images = {target};
        recv = calibrate(oracle, A, cc).first;
      } else {
        MatchedSolveConfig<T> trial_sc = sc;
        set_roundoff_stop(trial_sc, y);
        recv = cfg.solver.kind == "algo1" ? error_iteration(oracle, y, A, trial_sc).first
                                          : matched_solution(oracle, y, A, trial_sc).first;
      }

      const T err = match_error(y_clean, recv, target, kMatchErrorTrials, sigma,
                                derive_seed(sweep_base, 900000 + static_cast<std::uint64_t>(j)));
      const ReconMetrics<T> recon = run_reconstruction(y, recv, target, cfg);
      rows[static_cast<std::size_t>(j)] =
          Row{sigma, double(err), recon.psnr_db, recon.f1, trial};
    } catch (const NumericalError&) {
      // A diverged or degenerate trial is a data point, not a crash: the
      // noise level defeated the solver.
      rows[static_cast<std::size_t>(j)] =
          Row{sigma, std::numeric_limits<double>::infinity(), 0.0, 0.0, trial};
    }
  });

  {
    io::CsvWriter csv(r.out / "sweep.csv");
    csv.row("sigma", "trial", "final_error", "psnr", "support_f1");
    for (const auto& row : rows) csv.row(row.sigma, row.trial, row.final_error, row.psnr_db, row.f1);
  }
  {
    io::CsvWriter csv(r.out / "summary.csv");
    csv.row("sigma", "mean_final_error", "mean_psnr", "mean_support_f1", "trials");
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
      double err = 0, ps = 0, f1 = 0;
      for (int t = 0; t < trials; ++t) {
        const auto& row = rows[si * static_cast<std::size_t>(trials) + static_cast<std::size_t>(t)];
        err += row.final_error;
        ps += row.psnr_db;
        f1 += row.f1;
      }
      csv.row(sigmas[si], err / trials, ps / trials, f1 / trials, trials);
    }
  }
  if (cfg.outputs.emit_svg) {
    io::SvgSeries series;
    series.name = "mean final error";
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
      double err = 0;
      for (int t = 0; t < trials; ++t) {
        err += rows[si * static_cast<std::size_t>(trials) + static_cast<std::size_t>(t)].final_error;
      }
      series.points.emplace_back(sigmas[si], std::max(err / trials, 1e-300));
    }
    io::save_svg_curves(r.out / "sweep.svg", {series}, "noise sweep", "sigma", "mean final error",
                        true);
  }

  if (!quiet) {
    std::cout << "noise-sweep(" << cfg.solver.kind << "): " << sigmas.size() << " sigmas x "
              << trials << " trials -> " << r.out.string() << "\n";
  }
  return 0;
}

// --------------------------------------------------------------- curves ----

int run_curves(const Resolved& r, bool quiet) {
  const ExperimentConfig& cfg = r.cfg;
  std::vector<double> grid;
  for (double x = -1.0 + cfg.curves.grid_step; x < 1.0 - cfg.curves.grid_step / 2;
       x += cfg.curves.grid_step) {
    grid.push_back(x);
  }
  const auto table = curve_family(cfg.curves.i_values, grid);

  io::CsvWriter csv(r.out / "curves.csv");
  csv.row("i", "x", "value");
  for (const auto& p : table) csv.row(p.i, p.x, p.value);

  if (cfg.outputs.emit_svg) {
    std::vector<io::SvgSeries> series;
    for (int i : cfg.curves.i_values) {
      io::SvgSeries s;
      s.name = "i=" + std::to_string(i);
      for (const auto& p : table) {
        if (p.i == i) s.points.emplace_back(p.x, p.value);
      }
      series.push_back(std::move(s));
    }
    io::save_svg_curves(r.out / "curves.svg", series, "damping curve family", "x", "(1-x)x^i",
                        false);
  }
  if (!quiet) {
    std::cout << "curves: " << table.size() << " rows -> " << r.out.string() << "\n";
  }
  return 0;
}

}  // namespace

int cmd_gen(const CommandOptions& opts) {
  return guarded([&] {
    const Resolved r = prepare(opts);
    if (r.cfg.system.precision == PrecisionMode::Single) return run_gen<float>(r, opts.quiet);
    return run_gen<double>(r, opts.quiet);
  });
}

int cmd_matched(const CommandOptions& opts) {
  return guarded([&] {
    const Resolved r = prepare(opts);
    if (r.cfg.system.precision == PrecisionMode::Single) return run_matched<float>(r, opts.quiet);
    return run_matched<double>(r, opts.quiet);
  });
}

int cmd_calibrate(const CommandOptions& opts) {
  return guarded([&] {
    const Resolved r = prepare(opts);
    if (r.cfg.system.precision == PrecisionMode::Single) return run_calibrate<float>(r, opts.quiet);
    return run_calibrate<double>(r, opts.quiet);
  });
}

int cmd_precision_study(const CommandOptions& opts) {
  return guarded([&] {
    const Resolved r = prepare(opts);
    // Both modes always run here; the configured precision is irrelevant.
    io::CsvWriter verdicts(r.out / "verdicts.csv");
    verdicts.row("algorithm", "precision", "lambda_cv", "verdict", "excluded_components",
                 "reconstruction_success", "psnr", "rel_error");
    run_study_precision<double>(r, verdicts);
    run_study_precision<float>(r, verdicts);
    if (!opts.quiet) {
      std::cout << "precision-study: algo1/algo2/algo3 under double and single -> "
                << r.out.string() << "\n";
    }
    return 0;
  });
}

int cmd_noise_sweep(const CommandOptions& opts) {
  return guarded([&] {
    const Resolved r = prepare(opts);
    if (r.cfg.system.precision == PrecisionMode::Single) {
      return run_noise_sweep<float>(r, opts.quiet);
    }
    return run_noise_sweep<double>(r, opts.quiet);
  });
}

int cmd_curves(const CommandOptions& opts) {
  return guarded([&] {
    const Resolved r = prepare(opts);
    return run_curves(r, opts.quiet);
  });
}

}  // namespace mmrx::cli
