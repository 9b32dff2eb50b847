#include <doctest.h>

#include "flucsr/io.hpp"

#include <filesystem>
#include <fstream>

#include <unistd.h>

using namespace flucsr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("flucsr_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string bytes_of(const fs::path& p) { return io::read_text(p); }

void write_raw(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

}  // namespace

TEST_CASE("stack round trip with f32 and f64 payloads") {
  TempDir dir;
  ImageStack s(3, 2, 4);
  for (Eigen::Index i = 0; i < s.frames.size(); ++i) s.frames.reshaped()[i] = 0.1 * double(i) + 1.0 / 3.0;
  io::write_stack(dir.path / "a.flstk", s);
  const ImageStack f = io::read_stack(dir.path / "a.flstk");
  CHECK(f.frame_count() == 3);
  CHECK(f.height == 2);
  CHECK(f.width == 4);
  CHECK(f.frames == s.frames.cast<float>().cast<double>());

  io::write_stack(dir.path / "b.flstk", s, io::SampleType::F64);
  CHECK(io::read_stack(dir.path / "b.flstk").frames == s.frames);
  CHECK(io::read_magic(dir.path / "b.flstk") == "FLSTK1");
}

TEST_CASE("stack layout is header lines then little-endian samples") {
  TempDir dir;
  ImageStack s(1, 1, 2);
  s.frames << 1.0, -2.0;
  io::write_stack(dir.path / "s.flstk", s);
  const std::string b = bytes_of(dir.path / "s.flstk");
  const std::string header = "FLSTK1\nT=1 H=1 W=2 dtype=f32 endian=LE\n";
  REQUIRE(b.size() == header.size() + 8);
  CHECK(b.substr(0, header.size()) == header);
  // 1.0f = 0x3f800000, -2.0f = 0xc0000000
  CHECK(b.substr(header.size()) == std::string("\x00\x00\x80\x3f\x00\x00\x00\xc0", 8));
}

TEST_CASE("malformed stacks report byte offsets") {
  TempDir dir;
  const auto p = dir.path / "bad.flstk";
  write_raw(p, "FLSTK2\n");
  try {
    io::read_stack(p);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.where() == 0);
  }
  const std::string header = "FLSTK1\nT=1 H=1 W=2 dtype=f32 endian=LE\n";
  write_raw(p, header + std::string(7, '\0'));
  try {
    io::read_stack(p);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.where() == header.size());
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }
  write_raw(p, "FLSTK1\nT=1 H=1 W=2 dtype=f16 endian=LE\n");
  try {
    io::read_stack(p);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.where() == 7);
  }
  write_raw(p, header + std::string("\x00\x00\xc0\x7f\x00\x00\x00\x00", 8));  // NaN
  CHECK_THROWS_AS(io::read_stack(p), FormatError);
  CHECK_THROWS_AS(io::read_stack(dir.path / "missing.flstk"), IoError);
}

TEST_CASE("covariance round trip and validation") {
  TempDir dir;
  Covariance c(4, 4);
  c << 4, 1, 0, 2, 1, 3, 0.5, 0, 0, 0.5, 2, 0, 2, 0, 0, 5;
  io::write_covariance(dir.path / "c.flcov", c, 2, 2);
  const auto f = io::read_covariance(dir.path / "c.flcov");
  CHECK(f.cov == c);
  CHECK(f.height == 2);
  CHECK(f.width == 2);
  CHECK(bytes_of(dir.path / "c.flcov").rfind("FLCOV1\nP=4 H=2 W=2 dtype=f64 endian=LE\n", 0) == 0);
  CHECK_THROWS_AS(io::write_covariance(dir.path / "d.flcov", c, 3, 2), std::invalid_argument);

  Covariance asym = c;
  asym(0, 1) = 7;
  io::write_covariance(dir.path / "e.flcov", asym, 2, 2);
  CHECK_THROWS_AS(io::read_covariance(dir.path / "e.flcov"), FormatError);
}

TEST_CASE("spike csv round trip is exact") {
  TempDir dir;
  Positions<double> p(2, 2);
  p << 0.1, 15.999999999999998, 1.0 / 3.0, 2.5;
  Eigen::VectorXd a(2);
  a << 1e-300, -12345.678901234567;
  const Measure m(a, p);
  io::write_spikes(dir.path / "s.csv", m);
  const Measure back = io::read_spikes(dir.path / "s.csv");
  CHECK(back.amplitudes() == m.amplitudes());
  CHECK(back.positions() == m.positions());
  CHECK(io::format_spikes(Measure()) == "x,y,amplitude\n");
}

TEST_CASE("spike csv errors report line numbers") {
  TempDir dir;
  const auto p = dir.path / "s.csv";
  write_raw(p, "x,y,amplitude\r\n1,2,3\r\n\r\n4,5\n");
  try {
    io::read_spikes(p);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.where() == 4);
  }
  write_raw(p, "x,y,amp\n");
  CHECK_THROWS_AS(io::read_spikes(p), FormatError);
  write_raw(p, "x,y,amplitude\n1,2,abc\n");
  try {
    io::read_spikes(p);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.where() == 2);
  }
  write_raw(p, "x,y,amplitude\r\n1,2,3\r\n");
  CHECK(io::read_spikes(p).size() == 1);
}

TEST_CASE("pgm is 16-bit big-endian and min-max scaled") {
  TempDir dir;
  Image img(3);
  img << -1.0, 0.0, 1.0;
  const auto scaling = io::write_pgm(dir.path / "i.pgm", img, 1, 3);
  CHECK(scaling.min == -1.0);
  CHECK(scaling.max == 1.0);
  const std::string b = bytes_of(dir.path / "i.pgm");
  const std::string header = "P5\n3 1\n65535\n";
  REQUIRE(b.size() == header.size() + 6);
  CHECK(b.substr(0, header.size()) == header);
  CHECK(b.substr(header.size()) == std::string("\x00\x00\x80\x00\xff\xff", 6));

  io::write_pgm(dir.path / "z.pgm", Image::Constant(2, 5.0), 1, 2);
  CHECK(bytes_of(dir.path / "z.pgm").substr(header.size() - 1) == std::string("\n\x00\x00\x00\x00", 5));
}

TEST_CASE("key value formatting is sorted") {
  CHECK(io::format_key_values({{"b", "2"}, {"a", "1"}}) == "a=1\nb=2\n");
}
