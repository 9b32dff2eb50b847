#include "flucsr/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace flucsr::io {

namespace {

constexpr const char* kStackMagic = "FLSTK1";
constexpr const char* kCovMagic = "FLCOV1";

template <typename T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Cursor over a binary buffer that reports byte offsets on failure.
struct Reader {
  const std::filesystem::path& path;
  const std::vector<char>& buf;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const { throw FormatError(path.string(), what, pos, false); }

  std::string line() {
    const auto start = pos;
    while (pos < buf.size() && buf[pos] != '\n') ++pos;
    if (pos == buf.size()) {
      pos = start;
      fail("missing line terminator");
    }
    std::string s(buf.begin() + static_cast<std::ptrdiff_t>(start), buf.begin() + static_cast<std::ptrdiff_t>(pos));
    ++pos;
    return s;
  }
};

struct Header {
  std::map<std::string, std::string> fields;
};

Header parse_header(Reader& rd, const std::vector<std::string>& keys) {
  const auto start = rd.pos;
  const std::string text = rd.line();
  std::istringstream ss(text);
  Header h;
  std::string token;
  std::vector<std::string> seen;
  while (ss >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) {
      rd.pos = start;
      rd.fail("malformed header token '" + token + "'");
    }
    seen.push_back(token.substr(0, eq));
    h.fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  if (seen != keys) {
    rd.pos = start;
    rd.fail("unexpected header '" + text + "'");
  }
  return h;
}

Eigen::Index parse_dim(Reader& rd, std::size_t header_start, const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size() || v <= 0) throw std::invalid_argument(value);
    return static_cast<Eigen::Index>(v);
  } catch (const std::exception&) {
    rd.pos = header_start;
    rd.fail("invalid " + key + " '" + value + "'");
  }
}

template <typename T>
void put(std::ofstream& out, T v) {
  v = to_little_endian(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(Reader& rd) {
  T v;
  std::memcpy(&v, rd.buf.data() + rd.pos, sizeof(T));
  rd.pos += sizeof(T);
  return to_little_endian(v);
}

void check_payload(Reader& rd, std::size_t bytes) {
  const std::size_t remaining = rd.buf.size() - rd.pos;
  if (remaining < bytes) rd.fail("payload truncated: expected " + std::to_string(bytes) + " bytes");
  if (remaining > bytes) {
    rd.pos += bytes;
    rd.fail("trailing bytes after payload");
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_stack(const std::filesystem::path& path, const ImageStack& stack, SampleType dtype) {
  auto out = open_out(path);
  out << kStackMagic << '\n'
      << "T=" << stack.frame_count() << " H=" << stack.height << " W=" << stack.width
      << " dtype=" << (dtype == SampleType::F32 ? "f32" : "f64") << " endian=LE\n";
  for (Eigen::Index t = 0; t < stack.frame_count(); ++t) {
    for (Eigen::Index j = 0; j < stack.pixel_count(); ++j) {
      if (dtype == SampleType::F32) {
        put(out, static_cast<float>(stack.frames(t, j)));
      } else {
        put(out, stack.frames(t, j));
      }
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

ImageStack read_stack(const std::filesystem::path& path) {
  const auto buf = slurp(path);
  Reader rd{path, buf};
  if (rd.line() != kStackMagic) {
    rd.pos = 0;
    rd.fail("bad magic, expected FLSTK1");
  }
  const auto hstart = rd.pos;
  const auto h = parse_header(rd, {"T", "H", "W", "dtype", "endian"});
  const auto t = parse_dim(rd, hstart, "T", h.fields.at("T"));
  const auto height = parse_dim(rd, hstart, "H", h.fields.at("H"));
  const auto width = parse_dim(rd, hstart, "W", h.fields.at("W"));
  const auto& dtype = h.fields.at("dtype");
  if (dtype != "f32" && dtype != "f64") {
    rd.pos = hstart;
    rd.fail("unsupported dtype '" + dtype + "'");
  }
  if (h.fields.at("endian") != "LE") {
    rd.pos = hstart;
    rd.fail("unsupported endianness '" + h.fields.at("endian") + "'");
  }
  const std::size_t sample = dtype == "f32" ? 4 : 8;
  const auto count = static_cast<std::size_t>(t * height * width);
  check_payload(rd, count * sample);

  ImageStack stack(t, height, width);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j < height * width; ++j) {
      const auto at = rd.pos;
      const double v = sample == 4 ? double(get<float>(rd)) : get<double>(rd);
      if (!std::isfinite(v)) {
        rd.pos = at;
        rd.fail("non-finite sample");
      }
      stack.frames(i, j) = v;
    }
  }
  return stack;
}

void write_covariance(const std::filesystem::path& path, const Covariance& cov, Eigen::Index height,
                      Eigen::Index width) {
  if (cov.rows() != height * width || cov.cols() != cov.rows()) {
    throw std::invalid_argument("covariance size does not match H*W");
  }
  auto out = open_out(path);
  out << kCovMagic << '\n' << "P=" << cov.rows() << " H=" << height << " W=" << width << " dtype=f64 endian=LE\n";
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    for (Eigen::Index j = 0; j < cov.cols(); ++j) put(out, cov(i, j));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

CovarianceFile read_covariance(const std::filesystem::path& path) {
  const auto buf = slurp(path);
  Reader rd{path, buf};
  if (rd.line() != kCovMagic) {
    rd.pos = 0;
    rd.fail("bad magic, expected FLCOV1");
  }
  const auto hstart = rd.pos;
  const auto h = parse_header(rd, {"P", "H", "W", "dtype", "endian"});
  const auto p = parse_dim(rd, hstart, "P", h.fields.at("P"));
  const auto height = parse_dim(rd, hstart, "H", h.fields.at("H"));
  const auto width = parse_dim(rd, hstart, "W", h.fields.at("W"));
  if (p != height * width || h.fields.at("dtype") != "f64" || h.fields.at("endian") != "LE") {
    rd.pos = hstart;
    rd.fail("inconsistent covariance header");
  }
  check_payload(rd, static_cast<std::size_t>(p * p) * 8);
  CovarianceFile f{Covariance(p, p), height, width};
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) f.cov(i, j) = get<double>(rd);
  }
  if (f.cov != f.cov.transpose()) {
    rd.pos = hstart;
    rd.fail("covariance payload is not symmetric");
  }
  return f;
}

std::string read_magic(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::string magic;
  std::getline(in, magic);
  return magic;
}

std::string format_spikes(const Measure& m) {
  std::string out = "x,y,amplitude\n";
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    out += format_double(m.position(i).x()) + ',' + format_double(m.position(i).y()) + ',' +
           format_double(m.amplitude(i)) + '\n';
  }
  return out;
}

void write_spikes(const std::filesystem::path& path, const Measure& m) { write_text(path, format_spikes(m)); }

Measure read_spikes(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  std::string line;
  std::uint64_t line_no = 0;
  std::vector<double> values;
  auto strip_cr = [](std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  };
  if (!std::getline(in, line)) throw FormatError(path.string(), "missing header", 1, true);
  ++line_no;
  strip_cr(line);
  if (line != "x,y,amplitude") throw FormatError(path.string(), "expected header 'x,y,amplitude'", 1, true);
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    int fields = 0;
    while (std::getline(row, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
        values.push_back(v);
      } catch (const std::exception&) {
        throw FormatError(path.string(), "invalid number '" + cell + "'", line_no, true);
      }
      ++fields;
    }
    if (fields != 3) throw FormatError(path.string(), "expected 3 fields", line_no, true);
  }
  const auto n = static_cast<Eigen::Index>(values.size() / 3);
  Eigen::VectorXd a(n);
  Positions<double> p(2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p(0, i) = values[static_cast<std::size_t>(3 * i)];
    p(1, i) = values[static_cast<std::size_t>(3 * i + 1)];
    a[i] = values[static_cast<std::size_t>(3 * i + 2)];
  }
  return Measure(a, p);
}

PgmScaling write_pgm(const std::filesystem::path& path, const Image& image, Eigen::Index height, Eigen::Index width) {
  if (image.size() != height * width) throw std::invalid_argument("image size does not match H*W");
  const double lo = image.size() ? image.minCoeff() : 0.0;
  const double hi = image.size() ? image.maxCoeff() : 0.0;
  auto out = open_out(path);
  out << "P5\n" << width << ' ' << height << "\n65535\n";
  for (Eigen::Index i = 0; i < image.size(); ++i) {
    const double scaled = hi > lo ? (image[i] - lo) / (hi - lo) * 65535.0 : 0.0;
    const auto v = static_cast<std::uint16_t>(std::lround(std::clamp(scaled, 0.0, 65535.0)));
    const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    out.write(bytes, 2);
  }
  if (!out) throw IoError("failed writing " + path.string());
  return {lo, hi};
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  auto out = open_out(path);
  out << content;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  const auto buf = slurp(path);
  return {buf.begin(), buf.end()};
}

std::string format_key_values(const std::map<std::string, std::string>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + '=' + v + '\n';
  return out;
}

}  // namespace flucsr::io
