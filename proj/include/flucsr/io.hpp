#pragma once

// File formats:
//   FLSTK1  image stacks (f32 payload; f64 accepted for lossless dumps)
//   FLCOV1  P x P covariance, f64 payload
//   CSV     spike lists, header `x,y,amplitude`
//   PGM     16-bit binary graymap (P5, maxval 65535)

#include "flucsr/errors.hpp"
#include "flucsr/measure.hpp"
#include "flucsr/operators.hpp"
#include "flucsr/statistics.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace flucsr::io {

enum class SampleType { F32, F64 };

void write_stack(const std::filesystem::path& path, const ImageStack& stack, SampleType dtype = SampleType::F32);
ImageStack read_stack(const std::filesystem::path& path);

void write_covariance(const std::filesystem::path& path, const Covariance& cov, Eigen::Index height,
                      Eigen::Index width);

struct CovarianceFile {
  Covariance cov;
  Eigen::Index height;
  Eigen::Index width;
};
CovarianceFile read_covariance(const std::filesystem::path& path);

/// Reads the magic line only ("FLSTK1" or "FLCOV1").
std::string read_magic(const std::filesystem::path& path);

std::string format_spikes(const Measure& m);
void write_spikes(const std::filesystem::path& path, const Measure& m);
Measure read_spikes(const std::filesystem::path& path);

struct PgmScaling {
  double min;
  double max;
};
/// Min-max scales `image` (H x W, row-major) to 0..65535. A constant image
/// maps to all zeros.
PgmScaling write_pgm(const std::filesystem::path& path, const Image& image, Eigen::Index height, Eigen::Index width);

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

/// `key=value` lines, keys in sorted order.
std::string format_key_values(const std::map<std::string, std::string>& entries);

}  // namespace flucsr::io
