#pragma once

// Flat `key = value` run configuration with `#` comments and dotted
// section keys, e.g. `solver.max_iterations = 50`.

#include "flucsr/simulator.hpp"
#include "flucsr/solver.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace flucsr::cli {

class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<config>");
  static Config load(const std::filesystem::path& path);

  /// `key=value` override, as given on the command line.
  void set(const std::string& assignment);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> raw(const std::string& key) const;

  double get_double(const std::string& key, std::optional<double> fallback = {}) const;
  long long get_int(const std::string& key, std::optional<long long> fallback = {}) const;
  bool get_bool(const std::string& key, std::optional<bool> fallback = {}) const;
  std::string get_string(const std::string& key, std::optional<std::string> fallback = {}) const;

  /// Directory relative paths in the file are resolved against.
  const std::filesystem::path& base_dir() const { return base_dir_; }

 private:
  std::map<std::string, std::string> values_;
  std::filesystem::path base_dir_ = ".";
};

struct RunConfig {
  double pixel_size_nm = 100.0;
  double psf_fwhm_nm = 229.0;
  Eigen::Index height = 16;
  Eigen::Index width = 16;

  ProblemKind kind = ProblemKind::CovarianceBlasso;
  std::optional<double> lambda_fraction;
  std::optional<double> lambda;
  std::optional<bool> nonnegative;
  SolverOptions solver;
  bool log_timings = false;

  // simulation
  Eigen::Index frames = 100;
  double frame_rate = 100.0;
  std::uint64_t seed = 1;
  PhotoPhysics photo;
  NoiseModel noise;
  std::string layout = "random";
  std::optional<std::filesystem::path> ground_truth;
  Eigen::Index emitters = 10;
  double margin = 2.0;
  std::uint64_t layout_seed = 1;

  int render_upscale = 4;
  double render_sigma = 1.0;
  std::optional<double> eval_radius;

  double sigma_px() const { return PsfModel<double>::sigma_from_fwhm(psf_fwhm_nm / pixel_size_nm); }
  Psf psf() const { return Psf(sigma_px(), height, width); }
  double radius() const { return eval_radius.value_or(0.5 * sigma_px()); }

  static RunConfig from(const Config& cfg);
  /// Effective parameters as sorted key=value lines.
  std::map<std::string, std::string> echo() const;
};

}  // namespace flucsr::cli
