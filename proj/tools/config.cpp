#include "config.hpp"

#include "flucsr/errors.hpp"
#include "flucsr/io.hpp"

#include <cstdio>
#include <set>
#include <sstream>

namespace flucsr::cli {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "pixel_size_nm", "psf_fwhm_nm", "grid.height", "grid.width",
      "problem.kind", "problem.lambda_fraction", "problem.lambda", "problem.nonnegative",
      "solver.max_iterations", "solver.certificate_tolerance", "solver.insertion_grid_factor",
      "solver.lasso_tolerance", "solver.slide_max_evals", "solver.amplitude_prune_threshold",
      "solver.log_timings",
      "sim.frames", "sim.frame_rate", "sim.seed", "sim.tau_on", "sim.tau_off", "sim.tau_bleach",
      "sim.photons_on", "sim.layout", "sim.ground_truth", "sim.emitters", "sim.margin", "sim.layout_seed",
      "noise.background", "noise.gaussian_snr_db", "noise.poisson",
      "render.upscale", "render.sigma", "eval.radius"};
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!known_keys().count(key)) throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  Config cfg = parse(text, path.string());
  cfg.base_dir_ = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  return cfg;
}

void Config::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = trim(assignment.substr(0, eq));
  if (!known_keys().count(key)) throw ConfigError("unknown key '" + key + "'");
  values_[key] = trim(assignment.substr(eq + 1));
}

std::optional<std::string> Config::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

double Config::get_double(const std::string& key, std::optional<double> fallback) const {
  const auto v = raw(key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError("missing required key '" + key + "'");
  }
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': invalid number '" + *v + "'");
  }
}

long long Config::get_int(const std::string& key, std::optional<long long> fallback) const {
  const auto v = raw(key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError("missing required key '" + key + "'");
  }
  try {
    std::size_t used = 0;
    const long long i = std::stoll(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': invalid integer '" + *v + "'");
  }
}

bool Config::get_bool(const std::string& key, std::optional<bool> fallback) const {
  const auto v = raw(key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError("missing required key '" + key + "'");
  }
  if (*v == "true" || *v == "on" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "off" || *v == "0" || *v == "no") return false;
  throw ConfigError("key '" + key + "': invalid boolean '" + *v + "'");
}

std::string Config::get_string(const std::string& key, std::optional<std::string> fallback) const {
  const auto v = raw(key);
  if (!v) {
    if (fallback) return *fallback;
    throw ConfigError("missing required key '" + key + "'");
  }
  return *v;
}

RunConfig RunConfig::from(const Config& cfg) {
  RunConfig rc;
  auto positive = [](const std::string& key, double v) {
    if (!(v > 0)) throw ConfigError("key '" + key + "': must be positive");
    return v;
  };
  // no default: the pixel pitch of a dataset is never implied
  rc.pixel_size_nm = positive("pixel_size_nm", cfg.get_double("pixel_size_nm"));
  rc.psf_fwhm_nm = positive("psf_fwhm_nm", cfg.get_double("psf_fwhm_nm", rc.psf_fwhm_nm));
  rc.height = cfg.get_int("grid.height", rc.height);
  rc.width = cfg.get_int("grid.width", rc.width);
  if (rc.height <= 0) throw ConfigError("key 'grid.height': must be positive");
  if (rc.width <= 0) throw ConfigError("key 'grid.width': must be positive");
  if (rc.height * rc.width > 16384) throw ConfigError("key 'grid.height': grids are limited to 16384 pixels");

  const std::string kind = cfg.get_string("problem.kind", "covariance");
  if (kind == "mean") {
    rc.kind = ProblemKind::MeanBlasso;
  } else if (kind == "covariance") {
    rc.kind = ProblemKind::CovarianceBlasso;
  } else {
    throw ConfigError("key 'problem.kind': expected 'mean' or 'covariance', got '" + kind + "'");
  }
  if (cfg.has("problem.lambda_fraction")) rc.lambda_fraction = cfg.get_double("problem.lambda_fraction");
  if (cfg.has("problem.lambda")) rc.lambda = cfg.get_double("problem.lambda");
  if (rc.lambda_fraction && rc.lambda) {
    throw ConfigError("key 'problem.lambda': set only one of problem.lambda and problem.lambda_fraction");
  }
  if (!rc.lambda_fraction && !rc.lambda) rc.lambda_fraction = 0.1;
  if (rc.lambda_fraction && !(*rc.lambda_fraction > 0 && *rc.lambda_fraction <= 1)) {
    throw ConfigError("key 'problem.lambda_fraction': must lie in (0, 1]");
  }
  if (rc.lambda) positive("problem.lambda", *rc.lambda);
  if (cfg.has("problem.nonnegative")) rc.nonnegative = cfg.get_bool("problem.nonnegative");

  auto& s = rc.solver;
  s.max_iterations = static_cast<int>(cfg.get_int("solver.max_iterations", s.max_iterations));
  s.certificate_tolerance = cfg.get_double("solver.certificate_tolerance", s.certificate_tolerance);
  s.insertion_grid_factor = static_cast<int>(cfg.get_int("solver.insertion_grid_factor", s.insertion_grid_factor));
  s.lasso_tolerance = cfg.get_double("solver.lasso_tolerance", s.lasso_tolerance);
  s.slide_max_evals = static_cast<int>(cfg.get_int("solver.slide_max_evals", s.slide_max_evals));
  s.amplitude_prune_threshold = cfg.get_double("solver.amplitude_prune_threshold", s.amplitude_prune_threshold);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("key 'solver.") + e.what());
  }
  rc.log_timings = cfg.get_bool("solver.log_timings", rc.log_timings);

  rc.frames = cfg.get_int("sim.frames", rc.frames);
  if (rc.frames < 1) throw ConfigError("key 'sim.frames': must be at least 1");
  rc.frame_rate = positive("sim.frame_rate", cfg.get_double("sim.frame_rate", rc.frame_rate));
  const long long seed = cfg.get_int("sim.seed", static_cast<long long>(rc.seed));
  if (seed < 0) throw ConfigError("key 'sim.seed': must be nonnegative");
  rc.seed = static_cast<std::uint64_t>(seed);
  rc.photo.tau_on = positive("sim.tau_on", cfg.get_double("sim.tau_on", rc.photo.tau_on));
  rc.photo.tau_off = positive("sim.tau_off", cfg.get_double("sim.tau_off", rc.photo.tau_off));
  rc.photo.tau_bleach = positive("sim.tau_bleach", cfg.get_double("sim.tau_bleach", rc.photo.tau_bleach));
  rc.photo.photons_on = positive("sim.photons_on", cfg.get_double("sim.photons_on", rc.photo.photons_on));
  rc.noise.background_photons = cfg.get_double("noise.background", 0.0);
  if (!(rc.noise.background_photons >= 0)) throw ConfigError("key 'noise.background': must be nonnegative");
  const std::string snr = cfg.get_string("noise.gaussian_snr_db", "off");
  if (snr != "off") rc.noise.gaussian_snr_db = cfg.get_double("noise.gaussian_snr_db");
  rc.noise.poisson_enabled = cfg.get_bool("noise.poisson", false);

  rc.layout = cfg.get_string("sim.layout", rc.layout);
  if (rc.layout != "random" && rc.layout != "filaments") {
    throw ConfigError("key 'sim.layout': expected 'random' or 'filaments', got '" + rc.layout + "'");
  }
  if (cfg.has("sim.ground_truth")) {
    std::filesystem::path p = cfg.get_string("sim.ground_truth");
    rc.ground_truth = p.is_relative() ? cfg.base_dir() / p : p;
  }
  rc.emitters = cfg.get_int("sim.emitters", rc.emitters);
  if (rc.emitters < 0) throw ConfigError("key 'sim.emitters': must be nonnegative");
  rc.margin = cfg.get_double("sim.margin", rc.margin);
  const long long lseed = cfg.get_int("sim.layout_seed", static_cast<long long>(rc.seed));
  if (lseed < 0) throw ConfigError("key 'sim.layout_seed': must be nonnegative");
  rc.layout_seed = static_cast<std::uint64_t>(lseed);

  rc.render_upscale = static_cast<int>(cfg.get_int("render.upscale", rc.render_upscale));
  if (rc.render_upscale < 1) throw ConfigError("key 'render.upscale': must be at least 1");
  rc.render_sigma = positive("render.sigma", cfg.get_double("render.sigma", rc.render_sigma));
  if (cfg.has("eval.radius")) rc.eval_radius = positive("eval.radius", cfg.get_double("eval.radius"));
  return rc;
}

std::map<std::string, std::string> RunConfig::echo() const {
  std::map<std::string, std::string> e;
  e["pixel_size_nm"] = fmt(pixel_size_nm);
  e["psf_fwhm_nm"] = fmt(psf_fwhm_nm);
  e["psf_sigma_px"] = fmt(sigma_px());
  e["grid.height"] = std::to_string(height);
  e["grid.width"] = std::to_string(width);
  e["problem.kind"] = kind == ProblemKind::MeanBlasso ? "mean" : "covariance";
  if (lambda_fraction) e["problem.lambda_fraction"] = fmt(*lambda_fraction);
  if (lambda) e["problem.lambda"] = fmt(*lambda);
  e["problem.nonnegative"] =
      nonnegative ? (*nonnegative ? "true" : "false") : (kind == ProblemKind::MeanBlasso ? "false" : "true");
  e["solver.max_iterations"] = std::to_string(solver.max_iterations);
  e["solver.certificate_tolerance"] = fmt(solver.certificate_tolerance);
  e["solver.insertion_grid_factor"] = std::to_string(solver.insertion_grid_factor);
  e["solver.lasso_tolerance"] = fmt(solver.lasso_tolerance);
  e["solver.slide_max_evals"] = std::to_string(solver.slide_max_evals);
  e["solver.amplitude_prune_threshold"] = fmt(solver.amplitude_prune_threshold);
  e["solver.log_timings"] = log_timings ? "true" : "false";
  e["sim.frames"] = std::to_string(frames);
  e["sim.frame_rate"] = fmt(frame_rate);
  e["sim.seed"] = std::to_string(seed);
  e["sim.tau_on"] = fmt(photo.tau_on);
  e["sim.tau_off"] = fmt(photo.tau_off);
  e["sim.tau_bleach"] = fmt(photo.tau_bleach);
  e["sim.photons_on"] = fmt(photo.photons_on);
  e["sim.layout"] = ground_truth ? "file" : layout;
  if (ground_truth) e["sim.ground_truth"] = ground_truth->string();
  e["sim.emitters"] = std::to_string(emitters);
  e["sim.margin"] = fmt(margin);
  e["sim.layout_seed"] = std::to_string(layout_seed);
  e["noise.background"] = fmt(noise.background_photons);
  e["noise.gaussian_snr_db"] = noise.gaussian_snr_db ? fmt(*noise.gaussian_snr_db) : "off";
  e["noise.poisson"] = noise.poisson_enabled ? "true" : "false";
  e["render.upscale"] = std::to_string(render_upscale);
  e["render.sigma"] = fmt(render_sigma);
  e["eval.radius"] = fmt(radius());
  return e;
}

}  // namespace flucsr::cli
