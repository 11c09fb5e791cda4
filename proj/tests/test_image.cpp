#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pups/image.hpp"

#include <fstream>
#include <string>

using namespace pups;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/pups_image_") + name;
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("read_ppm scales bytes to [0,1]") {
  const std::string path = temp_path("tiny.ppm");
  write_bytes(path, std::string("P6\n2 1\n255\n") + std::string("\xff\x00\x00\x00\x00\xff", 6));
  const RgbImage img = read_ppm(path);
  CHECK(img.width() == 2);
  CHECK(img.height() == 1);
  CHECK(img.r(0, 0) == 1.0);
  CHECK(img.r(0, 1) == 0.0);
  CHECK(img.b(0, 0) == 0.0);
  CHECK(img.b(0, 1) == 1.0);
}

TEST_CASE("read_ppm reports distinct errors") {
  const std::string truncated = temp_path("trunc.ppm");
  write_bytes(truncated, std::string("P6\n2 2\n255\n") + std::string(9, '\0'));  // 4 px declared, 3 present
  try {
    read_ppm(truncated);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTruncatedPayload);
  }

  const std::string bad_magic = temp_path("magic.ppm");
  write_bytes(bad_magic, "P5\n2 2\n255\n");
  try {
    read_ppm(bad_magic);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMalformedHeader);
  }

  const std::string high_maxval = temp_path("maxval.ppm");
  write_bytes(high_maxval, std::string("P6\n1 1\n65535\n") + std::string(6, '\0'));
  try {
    read_ppm(high_maxval);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnsupportedMaxval);
  }

  CHECK_THROWS_AS(read_ppm(temp_path("missing.ppm")), Error);
}

TEST_CASE("all-zero image reads as zeros") {
  const std::string path = temp_path("zero.ppm");
  write_bytes(path, std::string("P6\n8 8\n255\n") + std::string(8 * 8 * 3, '\0'));
  const RgbImage img = read_ppm(path);
  CHECK(img.r.abs().maxCoeff() == 0.0);
  CHECK(img.g.abs().maxCoeff() == 0.0);
  CHECK(img.b.abs().maxCoeff() == 0.0);
}

TEST_CASE("write_ppm quantization: rounding and clamping") {
  RgbImage img = make_image(2, 1);
  img.r(0, 0) = 0.5;   // -> 128 (half away from zero)
  img.g(0, 0) = 1.7;   // -> 255 (clamp)
  img.b(0, 0) = -0.3;  // -> 0
  img.r(0, 1) = 0.25;  // -> 64
  const std::string path = temp_path("quant.ppm");
  write_ppm(img, path);
  std::ifstream f(path, std::ios::binary);
  const std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  REQUIRE(data.size() == 11 + 6);  // "P6\n2 1\n255\n" + 2 pixels
  const unsigned char* px = reinterpret_cast<const unsigned char*>(data.data()) + 11;
  CHECK(px[0] == 128);
  CHECK(px[1] == 255);
  CHECK(px[2] == 0);
  CHECK(px[3] == 64);
}

TEST_CASE("write/read round trip is lossless on the 8-bit lattice") {
  // Exhaustive byte sweep: every 8-bit value appears and must survive.
  RgbImage img = make_image(16, 16);
  int v = 0;
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x, ++v) {
      img.r(y, x) = v / 255.0;
      img.g(y, x) = (255 - v) / 255.0;
      img.b(y, x) = ((v * 7) % 256) / 255.0;
    }
  }
  const std::string path = temp_path("sweep.ppm");
  write_ppm(img, path);
  const RgbImage back = read_ppm(path);
  CHECK(mse(img, back) == 0.0);

  write_ppm(back, path);
  const RgbImage again = read_ppm(path);
  CHECK(mse(back, again) == 0.0);
}

TEST_CASE("write_ppm fails cleanly on unwritable paths") {
  CHECK_THROWS_AS(write_ppm(make_image(1, 1), "/tmp"), Error);
}

TEST_CASE("psnr basics") {
  RgbImage a = make_image(4, 4);
  CHECK(psnr(a, a) == kPsnrCapDb);

  RgbImage b = make_image(4, 4);
  b.r.setConstant(0.1);
  b.g.setConstant(0.1);
  b.b.setConstant(0.1);
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));  // MSE 0.01

  CHECK_THROWS_AS(psnr(a, make_image(3, 4)), Error);
}

TEST_CASE("psnr matches a naive double-loop MSE and is symmetric") {
  oracles::Rng rng(11);
  RgbImage a = make_image(9, 5);
  RgbImage b = make_image(9, 5);
  a.r = oracles::random_plane(rng, 5, 9, 0.0, 1.0);
  a.g = oracles::random_plane(rng, 5, 9, 0.0, 1.0);
  a.b = oracles::random_plane(rng, 5, 9, 0.0, 1.0);
  b.r = oracles::random_plane(rng, 5, 9, 0.0, 1.0);
  b.g = oracles::random_plane(rng, 5, 9, 0.0, 1.0);
  b.b = oracles::random_plane(rng, 5, 9, 0.0, 1.0);

  double sum = 0.0;
  const Plane* pa[3] = {&a.r, &a.g, &a.b};
  const Plane* pb[3] = {&b.r, &b.g, &b.b};
  for (int ch = 0; ch < 3; ++ch) {
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 9; ++x) {
        const double d = (*pa[ch])(y, x) - (*pb[ch])(y, x);
        sum += d * d;
      }
    }
  }
  CHECK(mse(a, b) == doctest::Approx(sum / (3.0 * 45.0)).epsilon(1e-12));
  CHECK(psnr(a, b) == psnr(b, a));
}
