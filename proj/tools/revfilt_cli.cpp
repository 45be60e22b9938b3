// revfilt: reverse a black-box image filter from its output.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "revfilt/harness.hpp"

namespace fs = std::filesystem;
using namespace revfilt;

namespace {

struct RunArgs {
  std::string image;
  std::string truth;
  std::string filter;
  std::string method = "t";
  std::string accel = "none";
  int iters = 100;
  std::string trace;
  std::string out;
  std::optional<double> lambda;
  std::optional<double> alpha;
  double residual_tol = 0.0;
  bool no_timing = false;
};

int cmd_run(const RunArgs& a) {
  const FilterSpec spec = parse_filter_spec(a.filter);
  MethodKind mk{parse_method(a.method)};
  if (a.lambda) mk.lambda = *a.lambda;
  if (a.alpha) mk.alpha = *a.alpha;
  mk.validate();
  const AccelSpec accel = parse_accel_spec(a.accel);
  if (a.iters < 1) throw ConfigError("--iters must be >= 1");

  BlackBoxFilter g = make_filter(spec);
  Image input = load_image(a.image);
  std::optional<Image> truth;
  Image b;
  if (a.truth.empty()) {
    // The input is the clean image; synthesise the observation ourselves.
    truth = input;
    b = g.apply(input);
    g.reset_count();
  } else {
    truth = load_image(a.truth);
    b = std::move(input);
  }

  BoundProblem prob(g, b, mk);
  RunOptions opts;
  opts.record_timing = !a.no_timing;
  opts.residual_tol = a.residual_tol;
  RunResult r = run_reversal(prob, accel, b, a.iters, truth, opts);

  const fs::path trace_path = a.trace.empty() ? fs::path("trace.csv") : fs::path(a.trace);
  write_trace_csv(r.trace, trace_path);
  if (!a.out.empty()) save_image(r.final_iterate, a.out);

  const auto& last = r.trace.records.back();
  std::cout << "method " << to_string(mk.tag) << ", accel " << accel.label() << ", filter "
            << spec.label() << "\n";
  std::cout << "iterations " << last.k << ", filter calls " << last.filter_calls << "\n";
  if (truth) {
    std::printf("PSNR %.3f dB -> %.3f dB (best %.3f dB at k=%d)\n", *r.trace.initial_psnr(),
                *r.trace.final_psnr(), psnr(*truth, r.best_iterate), r.best_k);
  }
  for (const auto& f : r.trace.flag_list()) std::cout << "flag " << f << "\n";
  if (r.trace.diverged) std::cout << "run did not converge\n";
  std::cout << "trace written to " << trace_path.string() << "\n";
  if (!a.out.empty()) std::cout << "restored image written to " << a.out << "\n";
  return 0;
}

int cmd_bench(const std::string& config, const std::string& out, std::optional<int> jobs) {
  RunConfig cfg = load_run_config(config);
  if (!out.empty()) cfg.out_dir = out;
  if (jobs) cfg.jobs = *jobs;
  if (const auto env = jobs_from_env()) cfg.jobs = *env;
  const ExperimentResult res = run_experiment(cfg);

  std::size_t errors = 0;
  for (const auto& c : res.cells) {
    if (c.trace.error) {
      ++errors;
      std::cerr << "cell " << c.filter_name << "/" << to_string(c.method.tag) << "/"
                << c.accel.label() << "/" << c.image_id << " failed: " << *c.trace.error << "\n";
    }
  }
  std::cout << summary_text(cfg, res);
  std::cout << "\n" << res.cells.size() << " runs, " << errors << " failed; results in "
            << cfg.out_dir.string() << "\n";
  return errors == 0 ? 0 : 3;
}

int cmd_doctor(const std::string& filter, const std::string& image) {
  BlackBoxFilter g = make_filter(parse_filter_spec(filter));
  const Image probe = image.empty() ? doctor_probe_image() : load_image(image);
  const DoctorReport rep = doctor_filter(g, probe);
  std::cout << "filter:            " << g.label() << "\n";
  std::cout << "shape preserved:   " << (rep.shape_preserved ? "yes" : "no") << "\n";
  std::cout << "deterministic:     " << (rep.deterministic ? "yes" : "no") << "\n";
  std::cout << "max |g(x)-g(x)'|:  " << rep.max_abs_diff << "\n";
  std::cout << (rep.ok() ? "OK: " : "FAIL: ") << rep.message << "\n";
  return rep.ok() ? 0 : 4;
}

int cmd_plot(const std::vector<std::string>& traces, const std::string& out_dir) {
  if (!out_dir.empty()) fs::create_directories(out_dir);
  for (const auto& t : traces) {
    const IterationTrace trace = read_trace_csv(t);
    fs::path dest = fs::path(t).replace_extension(".dat");
    if (!out_dir.empty()) dest = fs::path(out_dir) / dest.filename();
    std::ofstream os(dest, std::ios::binary);
    if (!os) throw Error("cannot open '" + dest.string() + "' for writing");
    write_plot_data(trace, os);
    std::cout << dest.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reverse a black-box image filter from its output"};
  app.require_subcommand(1);

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Reverse one image");
  run->add_option("--image", ra.image, "Input image (PGM or PNG)")->required()->check(CLI::ExistingFile);
  run->add_option("--truth", ra.truth,
                  "Ground truth; when given, --image is taken as the filtered observation")
      ->check(CLI::ExistingFile);
  run->add_option("--filter", ra.filter, "Filter spec, e.g. gaussian:sigma=1.5")->required();
  run->add_option("--method", ra.method, "t, r, tda, P or p")->capture_default_str();
  run->add_option("--accel", ra.accel, "Acceleration, e.g. anderson:m=5")->capture_default_str();
  run->add_option("--iters", ra.iters, "Iteration budget")->capture_default_str();
  run->add_option("--trace", ra.trace, "Trace CSV path (default trace.csv)");
  run->add_option("--out", ra.out, "Write the final iterate here");
  run->add_option("--lambda", ra.lambda, "Method step size");
  run->add_option("--alpha", ra.alpha, "R-method damping in (0, 1]");
  run->add_option("--residual-tol", ra.residual_tol, "Stop once ||e||/||b|| falls below this");
  run->add_flag("--no-timing", ra.no_timing, "Leave elapsed_ms empty for reproducible traces");

  std::string config, bench_out;
  std::optional<int> jobs;
  auto* bench = app.add_subcommand("bench", "Sweep images x filters x methods x accelerations");
  bench->add_option("--config", config, "Experiment config file")->required();
  bench->add_option("--out", bench_out, "Output directory (overrides the config)");
  bench->add_option("--jobs", jobs, "Parallel runs (REVFILT_JOBS overrides)")->check(CLI::PositiveNumber);

  std::string doctor_filter_spec, doctor_image;
  auto* doctor = app.add_subcommand("doctor", "Check a filter is deterministic and keeps dimensions");
  doctor->add_option("--filter", doctor_filter_spec, "Filter spec, e.g. extern:cmd=\"mytool\"")->required();
  doctor->add_option("--image", doctor_image, "Probe image (default: built-in 64x64 pattern)")
      ->check(CLI::ExistingFile);

  std::vector<std::string> plot_traces;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "Write two-column k/PSNR data files from trace CSVs");
  plot->add_option("traces", plot_traces, "Trace CSV files")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out, "Directory for .dat files (default: next to each trace)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(ra);
    if (*bench) return cmd_bench(config, bench_out, jobs);
    if (*doctor) return cmd_doctor(doctor_filter_spec, doctor_image);
    if (*plot) return cmd_plot(plot_traces, plot_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
