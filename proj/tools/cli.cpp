#include "cli.hpp"

#include "flucsr/errors.hpp"
#include "flucsr/statistics.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <ostream>

namespace flucsr::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path sidecar(const fs::path& output) {
  const auto dir = output.parent_path();
  return (dir.empty() ? fs::path(".") : dir) / "run.meta";
}

void write_meta(const fs::path& output, const std::string& command, std::map<std::string, std::string> entries) {
  entries["command"] = command;
  io::write_text(sidecar(output), io::format_key_values(entries));
}

Measure ground_truth(const RunConfig& rc) {
  if (rc.ground_truth) return io::read_spikes(*rc.ground_truth);
  const auto dom = rc.psf().domain();
  try {
    if (rc.layout == "filaments") return crossing_filaments(dom, rc.emitters, rc.margin, rc.layout_seed);
    return random_emitters(dom, rc.emitters, rc.margin, rc.layout_seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("key 'sim.margin': ") + e.what());
  }
}

}  // namespace

void cmd_simulate(const RunConfig& rc, const fs::path& stack, const fs::path& truth, std::ostream& out) {
  SimulationConfig sc;
  sc.ground_truth = ground_truth(rc);
  sc.psf = rc.psf();
  sc.photo = rc.photo;
  sc.noise = rc.noise;
  sc.frames = rc.frames;
  sc.frame_rate = rc.frame_rate;
  sc.rng_seed = rc.seed;
  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("simulation: ") + e.what());
  }
  const auto sim = simulate_detailed(sc);
  io::write_stack(stack, sim.stack);
  io::write_spikes(truth, sc.ground_truth);

  auto meta = rc.echo();
  meta["output.stack"] = stack.string();
  meta["output.truth"] = truth.string();
  meta["sim.emitter_count"] = std::to_string(sc.ground_truth.size());
  meta["sim.gaussian_sigma"] = fmt(sim.gaussian_sigma);
  meta["sim.snr_db"] = fmt(overall_snr_db(sim, sc.noise.background_photons));
  write_meta(stack, "simulate", meta);
  out << io::format_key_values(meta);
}

void cmd_stats(const fs::path& stack, const fs::path& mean, const fs::path& cov, std::ostream& out) {
  const ImageStack s = io::read_stack(stack);
  if (s.frame_count() < 2) throw IoError(stack.string() + ": covariance requires at least 2 frames");
  ImageStack m(1, s.height, s.width);
  m.frames.row(0) = empirical_mean(s).transpose();
  io::write_stack(mean, m, io::SampleType::F64);
  io::write_covariance(cov, empirical_covariance(s), s.height, s.width);
  const std::map<std::string, std::string> meta = {{"input.stack", stack.string()},
                                                   {"output.mean", mean.string()},
                                                   {"output.covariance", cov.string()},
                                                   {"stack.frames", std::to_string(s.frame_count())},
                                                   {"stack.height", std::to_string(s.height)},
                                                   {"stack.width", std::to_string(s.width)}};
  write_meta(mean, "stats", meta);
  out << io::format_key_values(meta);
}

ProblemInstance load_problem(const RunConfig& rc, const fs::path& data) {
  const std::string magic = io::read_magic(data);
  const Psf psf = rc.psf();
  auto check_grid = [&](Eigen::Index h, Eigen::Index w) {
    if (h != rc.height || w != rc.width) {
      throw ConfigError("data grid " + std::to_string(h) + "x" + std::to_string(w) + " does not match config grid " +
                        std::to_string(rc.height) + "x" + std::to_string(rc.width));
    }
  };
  ProblemInstance inst;
  if (rc.kind == ProblemKind::MeanBlasso) {
    if (magic != "FLSTK1") throw ConfigError("problem.kind = mean needs an FLSTK1 image or stack, got " + data.string());
    const ImageStack s = io::read_stack(data);
    check_grid(s.height, s.width);
    inst = ProblemInstance::mean(empirical_mean(s), psf, 1.0, rc.nonnegative);
  } else if (magic == "FLCOV1") {
    auto f = io::read_covariance(data);
    check_grid(f.height, f.width);
    inst = ProblemInstance::covariance_data(std::move(f.cov), psf, 1.0, rc.nonnegative);
  } else if (magic == "FLSTK1") {
    const ImageStack s = io::read_stack(data);
    check_grid(s.height, s.width);
    if (s.frame_count() < 2) throw IoError(data.string() + ": covariance requires at least 2 frames");
    inst = ProblemInstance::covariance_data(empirical_covariance(s), psf, 1.0, rc.nonnegative);
  } else {
    throw FormatError(data.string(), "bad magic, expected FLSTK1 or FLCOV1", 0, false);
  }
  if (rc.lambda) {
    inst.lambda = *rc.lambda;
  } else {
    const double lmax = lambda_max(inst, rc.solver.insertion_grid_factor);
    // all-zero data: every positive λ yields the empty measure
    inst.lambda = lmax > 0 ? *rc.lambda_fraction * lmax : 1.0;
  }
  return inst;
}

SolverReport cmd_solve(const RunConfig& rc, const fs::path& data, const fs::path& recon, const fs::path& log,
                       std::ostream& out) {
  const ProblemInstance inst = load_problem(rc, data);
  auto [m, report] = solve(inst, rc.solver);
  io::write_spikes(recon, m);
  io::write_text(log, report.to_log(rc.log_timings));
  auto meta = rc.echo();
  meta["input.data"] = data.string();
  meta["output.spikes"] = recon.string();
  meta["output.log"] = log.string();
  meta["solve.lambda"] = fmt(inst.lambda);
  meta["solve.spikes"] = std::to_string(m.size());
  meta["solve.termination"] = to_string(report.termination);
  meta["solve.iterations"] = std::to_string(report.iterations.size());
  write_meta(recon, "solve", meta);
  out << "termination=" << to_string(report.termination) << "\nspikes=" << m.size() << "\nlambda=" << fmt(inst.lambda)
      << '\n';
  return report;
}

std::map<std::string, std::string> evaluation_metrics(const Measure& truth, const Measure& recon, double radius) {
  const auto match = match_spikes(truth, recon, radius);
  std::map<std::string, std::string> metrics;
  metrics["jaccard"] = fmt(jaccard_index(match));
  metrics["rmse"] = match.pairs.empty() ? "none" : fmt(localization_rmse(match));
  metrics["tp"] = std::to_string(match.true_positives());
  metrics["fp"] = std::to_string(match.false_positives());
  metrics["fn"] = std::to_string(match.false_negatives());
  metrics["radius"] = fmt(radius);
  metrics["amplitude_error"] = fmt(matched_amplitude_error(match, truth, recon));
  return metrics;
}

std::map<std::string, std::string> cmd_evaluate(const fs::path& truth, const fs::path& recon, double radius,
                                                const fs::path& report, std::ostream& out) {
  const auto metrics = evaluation_metrics(io::read_spikes(truth), io::read_spikes(recon), radius);
  io::write_text(report, io::format_key_values(metrics));
  out << io::format_key_values(metrics);
  return metrics;
}

io::PgmScaling cmd_render(const RunConfig& rc, const fs::path& spikes, const fs::path& image, std::ostream& out) {
  const Measure m = io::read_spikes(spikes);
  const Psf psf = rc.psf();
  const Image img = render_measure(m, psf, rc.render_upscale, rc.render_sigma);
  const auto scaling =
      io::write_pgm(image, img, psf.height * rc.render_upscale, psf.width * rc.render_upscale);
  auto meta = rc.echo();
  meta["input.spikes"] = spikes.string();
  meta["output.image"] = image.string();
  meta["render.min"] = fmt(scaling.min);
  meta["render.max"] = fmt(scaling.max);
  write_meta(image, "render", meta);
  out << "render.min=" << fmt(scaling.min) << "\nrender.max=" << fmt(scaling.max) << '\n';
  return scaling;
}

void cmd_pipeline(const RunConfig& rc, const fs::path& dir, std::ostream& out) {
  fs::create_directories(dir);
  const auto stack = dir / "stack.flstk";
  const auto truth = dir / "truth.csv";
  const auto mean = dir / "mean.flstk";
  const auto cov = dir / "cov.flcov";
  const auto recon = dir / "recon.csv";
  const auto log = dir / "solve.log";
  const auto metrics_path = dir / "metrics.txt";
  cmd_simulate(rc, stack, truth, out);
  cmd_stats(stack, mean, cov, out);
  const auto report = cmd_solve(rc, rc.kind == ProblemKind::MeanBlasso ? mean : cov, recon, log, out);
  auto metrics = evaluation_metrics(io::read_spikes(truth), io::read_spikes(recon), rc.radius());
  const auto truth_scale = cmd_render(rc, truth, dir / "truth.pgm", out);
  const auto recon_scale = cmd_render(rc, recon, dir / "recon.pgm", out);
  metrics["render.truth.min"] = fmt(truth_scale.min);
  metrics["render.truth.max"] = fmt(truth_scale.max);
  metrics["render.recon.min"] = fmt(recon_scale.min);
  metrics["render.recon.max"] = fmt(recon_scale.max);
  metrics["termination"] = to_string(report.termination);
  io::write_text(metrics_path, io::format_key_values(metrics));

  auto meta = rc.echo();
  meta["output.dir"] = dir.string();
  write_meta(metrics_path, "pipeline", meta);
  out << io::format_key_values(metrics);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gridless super-resolution of fluorescence fluctuation stacks", "flucsr"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("-c,--config", config_path, "key = value configuration file");
    if (required) opt->required();
    sub->add_option("--set", overrides, "override a configuration key (key=value)");
  };
  auto load_config = [&]() {
    Config cfg = config_path.empty() ? Config{} : Config::load(config_path);
    for (const auto& o : overrides) cfg.set(o);
    return RunConfig::from(cfg);
  };

  std::string stack, truth, mean, cov, data, recon, log, report, image, spikes, dir;
  std::optional<double> radius;

  auto* sim = app.add_subcommand("simulate", "simulate a blinking-emitter stack");
  add_config(sim, true);
  sim->add_option("--stack", stack, "output FLSTK1 stack")->required();
  sim->add_option("--truth", truth, "output ground-truth CSV")->required();

  auto* stats = app.add_subcommand("stats", "temporal mean and covariance of a stack");
  stats->add_option("--stack", stack, "input FLSTK1 stack")->required();
  stats->add_option("--mean", mean, "output mean image (FLSTK1, T=1)")->required();
  stats->add_option("--cov", cov, "output covariance (FLCOV1)")->required();

  auto* sol = app.add_subcommand("solve", "sliding Frank-Wolfe reconstruction");
  add_config(sol, true);
  sol->add_option("--data", data, "FLSTK1 mean/stack or FLCOV1 covariance")->required();
  sol->add_option("--out", recon, "output spike CSV")->required();
  sol->add_option("--log", log, "output iteration log")->required();

  auto* ev = app.add_subcommand("evaluate", "match a reconstruction against ground truth");
  add_config(ev, false);
  ev->add_option("--truth", truth, "ground-truth CSV")->required();
  ev->add_option("--recon", recon, "reconstruction CSV")->required();
  ev->add_option("--radius", radius, "match radius in pixels (default 0.5 sigma)");
  ev->add_option("--out", report, "output key=value report")->required();

  auto* ren = app.add_subcommand("render", "render spikes as a 16-bit PGM");
  add_config(ren, true);
  ren->add_option("--spikes", spikes, "spike CSV")->required();
  ren->add_option("--out", image, "output PGM")->required();

  auto* pipe = app.add_subcommand("pipeline", "simulate, stats, solve, evaluate and render");
  add_config(pipe, true);
  pipe->add_option("--out-dir", dir, "output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (sim->parsed()) {
      cmd_simulate(load_config(), stack, truth, out);
    } else if (stats->parsed()) {
      cmd_stats(stack, mean, cov, out);
    } else if (sol->parsed()) {
      const auto rc = load_config();
      cmd_solve(rc, data, recon, log, out);
    } else if (ev->parsed()) {
      const double r = radius ? *radius : load_config().radius();
      if (!(r > 0)) throw ConfigError("--radius must be positive");
      cmd_evaluate(truth, recon, r, report, out);
    } else if (ren->parsed()) {
      cmd_render(load_config(), spikes, image, out);
    } else if (pipe->parsed()) {
      cmd_pipeline(load_config(), dir, out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << '\n';
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  }
  return kOk;
}

}  // namespace flucsr::cli
