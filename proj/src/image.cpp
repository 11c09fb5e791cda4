#include "pups/image.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pups {

RgbImage::RgbImage(Plane red, Plane green, Plane blue)
    : r(std::move(red)), g(std::move(green)), b(std::move(blue)) {
  require(r.rows() == g.rows() && r.rows() == b.rows() && r.cols() == g.cols() && r.cols() == b.cols(),
          ErrorCode::kDimensionMismatch, "RgbImage planes must share dimensions");
  require(r.rows() >= 1 && r.cols() >= 1, ErrorCode::kInvalidArgument, "RgbImage must be at least 1x1");
}

RgbImage make_image(int width, int height) {
  require(width >= 1 && height >= 1, ErrorCode::kInvalidArgument, "image dimensions must be positive");
  return RgbImage(Plane::Zero(height, width), Plane::Zero(height, width), Plane::Zero(height, width));
}

namespace {

// Reads the next ASCII token, skipping whitespace and '#' comment lines.
bool next_token(const std::string& data, size_t& pos, std::string& tok) {
  while (pos < data.size()) {
    unsigned char c = data[pos];
    if (c == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
    } else if (std::isspace(c)) {
      ++pos;
    } else {
      break;
    }
  }
  tok.clear();
  while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) {
    tok.push_back(data[pos++]);
  }
  return !tok.empty();
}

int parse_positive_int(const std::string& tok) {
  if (tok.empty() || tok.size() > 9) return -1;
  int v = 0;
  for (char c : tok) {
    if (c < '0' || c > '9') return -1;
    v = v * 10 + (c - '0');
  }
  return v;
}

}  // namespace

RgbImage read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::kIoError, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string data = ss.str();

  size_t pos = 0;
  std::string tok;
  require(next_token(data, pos, tok) && tok == "P6", ErrorCode::kMalformedHeader,
          path + ": not a binary PPM (P6)");
  require(next_token(data, pos, tok), ErrorCode::kMalformedHeader, path + ": missing width");
  const int w = parse_positive_int(tok);
  require(next_token(data, pos, tok), ErrorCode::kMalformedHeader, path + ": missing height");
  const int h = parse_positive_int(tok);
  require(w >= 1 && h >= 1, ErrorCode::kMalformedHeader, path + ": bad dimensions");
  require(next_token(data, pos, tok), ErrorCode::kMalformedHeader, path + ": missing maxval");
  const int maxval = parse_positive_int(tok);
  require(maxval > 0, ErrorCode::kMalformedHeader, path + ": bad maxval");
  require(maxval == 255, ErrorCode::kUnsupportedMaxval, path + ": only maxval 255 is supported");
  // Exactly one whitespace byte separates the maxval from the payload.
  require(pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos])),
          ErrorCode::kMalformedHeader, path + ": missing separator after maxval");
  ++pos;

  const size_t need = static_cast<size_t>(w) * static_cast<size_t>(h) * 3;
  require(data.size() - pos >= need, ErrorCode::kTruncatedPayload, path + ": truncated pixel payload");

  RgbImage img = make_image(w, h);
  const unsigned char* p = reinterpret_cast<const unsigned char*>(data.data()) + pos;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.r(y, x) = *p++ / 255.0;
      img.g(y, x) = *p++ / 255.0;
      img.b(y, x) = *p++ / 255.0;
    }
  }
  return img;
}

namespace {

inline unsigned char to_byte(double s) {
  const double c = s < 0.0 ? 0.0 : (s > 1.0 ? 1.0 : s);
  return static_cast<unsigned char>(std::lround(255.0 * c));
}

}  // namespace

void write_ppm(const RgbImage& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::kIoError, "cannot write " + path);
  f << "P6\n" << img.width() << " " << img.height() << "\n255\n";
  std::string payload;
  payload.reserve(static_cast<size_t>(img.width()) * img.height() * 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      payload.push_back(static_cast<char>(to_byte(img.r(y, x))));
      payload.push_back(static_cast<char>(to_byte(img.g(y, x))));
      payload.push_back(static_cast<char>(to_byte(img.b(y, x))));
    }
  }
  f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  require(f.good(), ErrorCode::kIoError, "write failed for " + path);
}

double mse(const RgbImage& a, const RgbImage& b) {
  require(a.width() == b.width() && a.height() == b.height(), ErrorCode::kDimensionMismatch,
          "mse: image dimensions differ");
  const double n = 3.0 * a.width() * a.height();
  const double s = (a.r - b.r).square().sum() + (a.g - b.g).square().sum() + (a.b - b.b).square().sum();
  return s / n;
}

double psnr(const RgbImage& a, const RgbImage& b) {
  const double m = mse(a, b);
  if (m == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / m));
}

}  // namespace pups
