#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "n2i/array.hpp"
#include "n2i/errors.hpp"
#include "n2i/pad.hpp"
#include "n2i/rng.hpp"
#include "n2i/volume_io.hpp"

using namespace n2i;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "n2i_test_core";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("volume round trip of a 2x2 image") {
  const Image img(2, 2, std::vector<double>{1, 2, 3, 4});
  const auto path = temp_file("small.n2v");
  write_volume(to_volume(img, "y,x", 0.5), path);

  std::ifstream in(path, std::ios::binary);
  char magic[8];
  std::uint64_t header_len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&header_len), 8);
  const auto size = fs::file_size(path);
  CHECK(size - 16 - header_len == 16);

  const Volume back = read_volume(path);
  CHECK(back.shape == std::vector<std::size_t>{2, 2});
  CHECK(image_from_volume(back) == img);
  CHECK(back.pixel_pitch == 0.5);
  CHECK(back.axes == "y,x");
}

TEST_CASE("degenerate and non-finite volumes are rejected") {
  Volume v;
  v.shape = {};
  CHECK_THROWS_WITH_AS(write_volume(v, temp_file("empty.n2v")), doctest::Contains("degenerate shape"), Error);
  v.shape = {2, 0};
  CHECK_THROWS_WITH_AS(write_volume(v, temp_file("empty.n2v")), doctest::Contains("degenerate shape"), Error);
  v.shape = {2};
  v.values = {1.0, std::nan("")};
  CHECK_THROWS_AS(write_volume(v, temp_file("nan.n2v")), Error);
}

TEST_CASE("3D stack header records shape and axes") {
  Stack s(4, 3, 2);
  for (std::size_t i = 0; i < s.size(); ++i) s.values()[i] = static_cast<double>(i) * 0.25;
  const auto path = temp_file("stack.n2v");
  write_volume(to_volume(s, "phi,b,a", 1e-4), path);
  const Volume back = read_volume(path);
  CHECK(back.shape == std::vector<std::size_t>{4, 3, 2});
  CHECK(back.axes == "phi,b,a");
  CHECK(stack_from_volume(back) == s);
}

TEST_CASE("round trip is bit exact after float32 rounding") {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd;
  Image img(17, 9);
  for (double& v : img.values()) v = nd(gen);
  const auto path = temp_file("rand.n2v");
  write_volume(to_volume(img, "y,x", 1.0), path);
  const Volume back = read_volume(path);
  CHECK(back.values == round_to_float32(img.values()));
}

TEST_CASE("truncated payload is detected") {
  const auto path = temp_file("trunc.n2v");
  write_volume(to_volume(Image(2, 2, 1.0), "y,x", 1.0), path);
  fs::resize_file(path, fs::file_size(path) - 1);
  CHECK_THROWS_WITH_AS(read_volume(path), doctest::Contains("truncated payload"), Error);
}

TEST_CASE("pad_replicate examples") {
  const Image row(1, 2, std::vector<double>{1, 2});
  CHECK(pad_replicate(row, 0, 2, 0, 0) == Image(1, 4, std::vector<double>{1, 2, 2, 2}));
  CHECK(pad_replicate(row, 0, 0, 0, 0) == row);
  const Image col(2, 1, std::vector<double>{1, 3});
  CHECK(pad_replicate(col, 0, 0, 0, 1) == Image(3, 1, std::vector<double>{1, 3, 3}));
}

TEST_CASE("pad then crop is the identity and the adjoint matches") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> ud(-1, 1);
  Image x(5, 7), y(5 + 3 + 4, 7 + 2 + 1);
  for (double& v : x.values()) v = ud(gen);
  for (double& v : y.values()) v = ud(gen);
  const Image px = pad_replicate(x, 2, 1, 3, 4);
  CHECK(crop(px, 3, 2, 5, 7) == x);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < px.size(); ++i) lhs += px.values()[i] * y.values()[i];
  const Image aty = pad_replicate_adjoint(y, 2, 1, 3, 4);
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x.values()[i] * aty.values()[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("rng streams are reproducible and uncorrelated") {
  const RngSeed a{42, 1}, b{42, 2};
  CounterRng r1(a), r2(a), r3(b);
  std::vector<double> x(1000000), y(1000000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = r1.uniform_at(i);
    y[i] = r3.uniform_at(i);
  }
  for (std::size_t i = 0; i < 100; ++i) CHECK(r2() == r1.at(i));
  CHECK(std::abs(correlation(x, y)) < 0.01);
  CHECK(a.derive(3) == a.derive(3));
  CHECK_FALSE(a.derive(3) == a.derive(4));
}
