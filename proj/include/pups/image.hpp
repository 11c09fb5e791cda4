#pragma once

#include "pups/common.hpp"

#include <string>

namespace pups {

// Three equally sized planes with samples nominally in [0, 1].
// Quantization to bytes happens only at the PPM boundary.
struct RgbImage {
  Plane r, g, b;

  RgbImage() = default;
  RgbImage(Plane red, Plane green, Plane blue);

  int width() const { return static_cast<int>(r.cols()); }
  int height() const { return static_cast<int>(r.rows()); }
};

RgbImage make_image(int width, int height);

// Binary PPM (P6), 8-bit, maxval 255. Samples are scaled to [0,1] by /255.
RgbImage read_ppm(const std::string& path);

// Samples are written as round(255 * clamp(s, 0, 1)), half away from zero.
void write_ppm(const RgbImage& img, const std::string& path);

// Mean squared error over all channels and pixels on the [0,1] scale.
double mse(const RgbImage& a, const RgbImage& b);

// 10*log10(1/MSE), capped at 999 dB (the cap is returned when MSE == 0).
double psnr(const RgbImage& a, const RgbImage& b);

constexpr double kPsnrCapDb = 999.0;

}  // namespace pups
