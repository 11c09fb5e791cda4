#include "pups/bitstream.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace pups {

// --- fixed point -------------------------------------------------------------

std::int16_t tap_to_q412(double value) {
  require(std::isfinite(value), ErrorCode::kNonFinite, "non-finite tap value");
  require(std::abs(value) < 8.0, ErrorCode::kOutOfRange, "tap value outside Q4.12 range");
  const long code = std::lround(value * 4096.0);
  return static_cast<std::int16_t>(std::min(32767l, std::max(-32768l, code)));
}

std::uint16_t scale_to_q412(double scale) {
  require(std::isfinite(scale) && scale > 0.0, ErrorCode::kNonFinite, "bad Laplace scale");
  const long code = std::lround(scale * 4096.0);
  return static_cast<std::uint16_t>(std::min(65535l, std::max(1l, code)));
}

QuantizedTensor quantize_tensor_q88(const double* values, std::size_t count) {
  double max_abs = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    require(std::isfinite(values[i]), ErrorCode::kNonFinite, "non-finite parameter");
    max_abs = std::max(max_abs, std::abs(values[i]));
  }
  require(max_abs < 256.0, ErrorCode::kOutOfRange, "weight outside Q8.8 scaled range");
  QuantizedTensor q;
  q.scale_q88 = static_cast<std::uint16_t>(std::min(65535.0, std::max(1.0, std::ceil(max_abs * 256.0))));
  q.codes.resize(count);
  const double inv_step = 65536.0 / q.scale_q88;
  for (std::size_t i = 0; i < count; ++i) {
    q.codes[i] = static_cast<std::int16_t>(std::lround(values[i] * inv_step));
  }
  return q;
}

void quantize_model_parameters(DecoderModel& model) {
  auto snap_kernel = [](SymmetricKernel1D& k) {
    for (Eigen::Index i = 0; i < k.half_taps.size(); ++i) {
      k.half_taps[i] = tap_from_q412(tap_to_q412(k.half_taps[i]));
    }
  };
  if (model.kind == UpsamplerKind::kSeparable) {
    for (auto& k : model.upsampler.l_kernels) snap_kernel(k);
    for (auto& k : model.upsampler.h_kernels) snap_kernel(k);
  } else {
    Eigen::MatrixXd& taps = model.legacy_kernel.taps;
    for (Eigen::Index i = 0; i < taps.size(); ++i) {
      taps.data()[i] = tap_from_q412(tap_to_q412(taps.data()[i]));
    }
  }
  auto snap_tensor = [](double* data, std::size_t count) {
    const QuantizedTensor q = quantize_tensor_q88(data, count);
    for (std::size_t i = 0; i < count; ++i) data[i] = weight_from_q88(q.codes[i], q.scale_q88);
  };
  for (auto& w : model.synthesis.weights) snap_tensor(w.data(), w.size());
  for (auto& b : model.synthesis.biases) snap_tensor(b.data(), b.size());
  for (Eigen::Index n = 0; n < model.rate.log_scale.size(); ++n) {
    model.rate.log_scale[n] = std::log(scale_from_q412(scale_to_q412(model.rate.scale(static_cast<int>(n)))));
  }
}

// --- range coder -------------------------------------------------------------

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const std::uint8_t carry = static_cast<std::uint8_t>(low_ >> 32);
    bytes_.push_back(static_cast<std::uint8_t>(cache_ + carry));
    while (pending_ > 0) {
      bytes_.push_back(static_cast<std::uint8_t>(0xFF + carry));
      --pending_;
    }
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  } else {
    ++pending_;
  }
  // The window keeps 32 bits; the byte shifted out lives in cache_/pending_.
  low_ = static_cast<std::uint32_t>(static_cast<std::uint32_t>(low_) << 8);
}

void RangeEncoder::encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total) {
  require(freq > 0 && total > 0 && total <= (1u << 16) && cum + freq <= total,
          ErrorCode::kInvalidArgument, "bad range-coder interval");
  const std::uint32_t r = range_ / total;
  low_ += static_cast<std::uint64_t>(r) * cum;
  range_ = r * freq;
  while (range_ < kTop) {
    shift_low();
    range_ <<= 8;
  }
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  // Round low up to a multiple of 2^24; the result stays inside
  // [low, low+range) because range >= 2^24 after normalization, so the
  // stream can end after the top byte (decoders pad with zeros).
  const std::uint64_t frac = low_ & 0xFFFFFFu;
  if (frac != 0) low_ += (1u << 24) - frac;
  shift_low();
  shift_low();
  // The first emitted byte is the initial zero cache.
  std::vector<std::uint8_t> out = std::move(bytes_);
  out.erase(out.begin());
  return out;
}

RangeDecoder::RangeDecoder(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint32_t RangeDecoder::decode_target(std::uint32_t total) {
  last_div_ = range_ / total;
  const std::uint32_t t = code_ / last_div_;
  return t < total ? t : total - 1;
}

void RangeDecoder::decode_update(std::uint32_t cum, std::uint32_t freq) {
  code_ -= cum * last_div_;
  range_ = last_div_ * freq;
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

// --- Laplace symbol tables -----------------------------------------------------

SymbolTable build_symbol_table(double scale) {
  SymbolTable table;
  table.amax = static_cast<int>(std::min(16384.0, std::max(1.0, std::ceil(64.0 * scale))));
  const int nsym = table.symbol_count();
  std::vector<std::uint32_t> counts(nsym, 0);
  std::uint64_t total = 0;
  for (int q = -table.amax; q <= table.amax; ++q) {
    const double p = laplace_mass(q, scale);
    const std::uint32_t c = static_cast<std::uint32_t>(std::llround(p * 65536.0));
    counts[q + table.amax] = c;
    total += c;
  }
  // Trim rounding overshoot from the largest counts so the escape keeps at
  // least one slot of the 16-bit total.
  while (total > 65535) {
    const auto it = std::max_element(counts.begin(), counts.end() - 1);
    const std::uint64_t excess = total - 65535;
    const std::uint32_t take = static_cast<std::uint32_t>(std::min<std::uint64_t>(excess, *it - 1));
    *it -= take;
    total -= take;
  }
  counts[nsym - 1] = static_cast<std::uint32_t>(65536 - total);
  table.cum.resize(nsym + 1);
  table.cum[0] = 0;
  for (int i = 0; i < nsym; ++i) table.cum[i + 1] = table.cum[i] + counts[i];
  return table;
}

// --- latent payload -------------------------------------------------------------

std::vector<std::uint8_t> encode_latents(const LatentPyramid& pyramid, const RateModel& rate) {
  require(pyramid.level_count() >= 1, ErrorCode::kInvalidArgument,
          "cannot encode an empty pyramid");
  require(rate.log_scale.size() == pyramid.level_count(), ErrorCode::kDimensionMismatch,
          "rate model level count mismatch");
  RangeEncoder enc;
  for (int n = 0; n < pyramid.level_count(); ++n) {
    const SymbolTable table = build_symbol_table(rate.scale(n));
    const Plane& plane = pyramid.levels[n];
    for (Eigen::Index i = 0; i < plane.size(); ++i) {
      const double v = plane.data()[i];
      require(v == std::round(v), ErrorCode::kInvalidArgument, "latents must be integers");
      require(v >= -32768.0 && v <= 32767.0, ErrorCode::kOutOfRange, "latent outside 16-bit range");
      const int q = static_cast<int>(v);
      const int idx = q + table.amax;
      if (q >= -table.amax && q <= table.amax && table.count(idx) > 0) {
        enc.encode(table.cum[idx], table.count(idx), 65536);
      } else {
        const int esc = table.escape_index();
        enc.encode(table.cum[esc], table.count(esc), 65536);
        const std::uint32_t raw = static_cast<std::uint32_t>(q + 32768);
        enc.encode((raw >> 8) & 0xFF, 1, 256);
        enc.encode(raw & 0xFF, 1, 256);
      }
    }
  }
  return enc.finish();
}

LatentPyramid decode_latents(const std::vector<std::uint8_t>& payload, int width, int height,
                             int levels, const RateModel& rate) {
  LatentPyramid pyramid = zero_pyramid(width, height, levels);
  RangeDecoder dec(payload.data(), payload.size());
  for (int n = 0; n < levels; ++n) {
    const SymbolTable table = build_symbol_table(rate.scale(n));
    Plane& plane = pyramid.levels[n];
    for (Eigen::Index i = 0; i < plane.size(); ++i) {
      const std::uint32_t target = dec.decode_target(65536);
      const auto it = std::upper_bound(table.cum.begin(), table.cum.end(), target);
      const int idx = static_cast<int>(it - table.cum.begin()) - 1;
      dec.decode_update(table.cum[idx], table.count(idx));
      int q;
      if (idx == table.escape_index()) {
        const std::uint32_t hi = dec.decode_target(256);
        dec.decode_update(hi, 1);
        const std::uint32_t lo = dec.decode_target(256);
        dec.decode_update(lo, 1);
        q = static_cast<int>((hi << 8) | lo) - 32768;
      } else {
        q = idx - table.amax;
      }
      plane.data()[i] = q;
    }
  }
  return pyramid;
}

// --- parameter payload ------------------------------------------------------------

namespace {

void put_u8(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
}
void put_u16(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_i16(std::vector<std::uint8_t>& out, std::int16_t v) {
  put_u16(out, static_cast<std::uint16_t>(v));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  put_u16(out, v & 0xFFFF);
  put_u16(out, v >> 16);
}

class Cursor {
 public:
  Cursor(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  std::size_t remaining() const { return size_ - pos_; }
  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::int16_t i16() { return static_cast<std::int16_t>(u16()); }
  std::uint32_t u32() {
    const std::uint32_t lo = u16();
    return lo | (static_cast<std::uint32_t>(u16()) << 16);
  }

 private:
  void need(std::size_t n) {
    require(pos_ + n <= size_, ErrorCode::kTruncatedPayload, "bitstream ends unexpectedly");
  }
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

void encode_synthesis_tensor(std::vector<std::uint8_t>& out, const double* data, std::size_t count) {
  const QuantizedTensor q = quantize_tensor_q88(data, count);
  put_u16(out, q.scale_q88);
  for (std::int16_t code : q.codes) put_i16(out, code);
}

void decode_synthesis_tensor(Cursor& cur, double* data, std::size_t count) {
  const std::uint16_t scale = cur.u16();
  require(scale >= 1, ErrorCode::kCorruptBitstream, "zero tensor scale");
  for (std::size_t i = 0; i < count; ++i) data[i] = weight_from_q88(cur.i16(), scale);
}

}  // namespace

std::vector<std::uint8_t> encode_parameters(const DecoderModel& model) {
  std::vector<std::uint8_t> out;
  if (model.kind == UpsamplerKind::kSeparable) {
    for (const auto& k : model.upsampler.l_kernels) {
      for (Eigen::Index i = 0; i < k.half_taps.size(); ++i) put_i16(out, tap_to_q412(k.half_taps[i]));
    }
    for (const auto& k : model.upsampler.h_kernels) {
      for (Eigen::Index i = 0; i < k.half_taps.size(); ++i) put_i16(out, tap_to_q412(k.half_taps[i]));
    }
  } else {
    const Eigen::MatrixXd& taps = model.legacy_kernel.taps;
    for (Eigen::Index i = 0; i < taps.rows(); ++i) {
      for (Eigen::Index j = 0; j < taps.cols(); ++j) put_i16(out, tap_to_q412(taps(i, j)));
    }
  }
  for (std::size_t li = 0; li < model.synthesis.weights.size(); ++li) {
    const Eigen::MatrixXd& w = model.synthesis.weights[li];
    std::vector<double> row_major(w.size());
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) row_major[k++] = w(i, j);
    }
    encode_synthesis_tensor(out, row_major.data(), row_major.size());
    encode_synthesis_tensor(out, model.synthesis.biases[li].data(), model.synthesis.biases[li].size());
  }
  return out;
}

void decode_parameters(const std::vector<std::uint8_t>& payload, DecoderModel& model) {
  Cursor cur(payload.data(), payload.size());
  if (model.kind == UpsamplerKind::kSeparable) {
    for (auto& k : model.upsampler.l_kernels) {
      for (Eigen::Index i = 0; i < k.half_taps.size(); ++i) k.half_taps[i] = tap_from_q412(cur.i16());
    }
    for (auto& k : model.upsampler.h_kernels) {
      for (Eigen::Index i = 0; i < k.half_taps.size(); ++i) k.half_taps[i] = tap_from_q412(cur.i16());
    }
  } else {
    Eigen::MatrixXd& taps = model.legacy_kernel.taps;
    for (Eigen::Index i = 0; i < taps.rows(); ++i) {
      for (Eigen::Index j = 0; j < taps.cols(); ++j) taps(i, j) = tap_from_q412(cur.i16());
    }
  }
  for (std::size_t li = 0; li < model.synthesis.weights.size(); ++li) {
    Eigen::MatrixXd& w = model.synthesis.weights[li];
    std::vector<double> row_major(w.size());
    decode_synthesis_tensor(cur, row_major.data(), row_major.size());
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = row_major[k++];
    }
    decode_synthesis_tensor(cur, model.synthesis.biases[li].data(),
                            model.synthesis.biases[li].size());
  }
  require(cur.remaining() == 0, ErrorCode::kCorruptBitstream, "parameter payload length mismatch");
}

// --- container ---------------------------------------------------------------------

std::vector<std::uint8_t> serialize_bitstream(DecoderModel& model, BitstreamReport* report) {
  validate_model(model);
  quantize_model_parameters(model);

  const std::vector<std::uint8_t> params = encode_parameters(model);
  const std::vector<std::uint8_t> latents = encode_latents(model.pyramid, model.rate);

  std::vector<std::uint8_t> out;
  out.insert(out.end(), kBitstreamMagic, kBitstreamMagic + 4);
  put_u8(out, kBitstreamVersion);
  put_u32(out, static_cast<std::uint32_t>(model.width));
  put_u32(out, static_cast<std::uint32_t>(model.height));
  put_u8(out, static_cast<std::uint32_t>(model.levels()));
  if (model.kind == UpsamplerKind::kSeparable) {
    put_u8(out, static_cast<std::uint32_t>(model.upsampler.l_kernels.size()));
    put_u8(out, static_cast<std::uint32_t>(model.upsampler.l_kernels.front().length));
    put_u8(out, static_cast<std::uint32_t>(model.upsampler.h_kernels.size()));
    put_u8(out, model.upsampler.has_prefilter()
                    ? static_cast<std::uint32_t>(model.upsampler.h_kernels.front().length)
                    : 0u);
  } else {
    put_u8(out, 0);  // n_L = 0 marks the legacy kernel
    put_u8(out, static_cast<std::uint32_t>(model.legacy_kernel.size()));
    put_u8(out, 0);
    put_u8(out, 0);
  }
  const std::vector<int> hidden = model.synthesis.hidden_widths();
  put_u8(out, static_cast<std::uint32_t>(hidden.size()));
  for (int w : hidden) put_u16(out, static_cast<std::uint32_t>(w));
  for (int n = 0; n < model.levels(); ++n) put_u16(out, scale_to_q412(model.rate.scale(n)));
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  put_u32(out, static_cast<std::uint32_t>(latents.size()));
  const std::size_t header_bytes = out.size();
  out.insert(out.end(), params.begin(), params.end());
  out.insert(out.end(), latents.begin(), latents.end());

  if (report != nullptr) {
    report->total_bytes = out.size();
    report->header_bytes = header_bytes;
    report->param_bytes = params.size();
    report->latent_bytes = latents.size();
    report->bpp = 8.0 * out.size() / (static_cast<double>(model.width) * model.height);
  }
  return out;
}

DecoderModel parse_bitstream(const std::vector<std::uint8_t>& bytes) {
  Cursor cur(bytes.data(), bytes.size());
  char magic[4];
  for (char& c : magic) c = static_cast<char>(cur.u8());
  require(std::equal(magic, magic + 4, kBitstreamMagic), ErrorCode::kCorruptBitstream,
          "bad bitstream magic");
  const std::uint8_t version = cur.u8();
  require(version == kBitstreamVersion, ErrorCode::kVersionMismatch, "unknown bitstream version");

  BitstreamHeader h;
  h.width = static_cast<int>(cur.u32());
  h.height = static_cast<int>(cur.u32());
  require(h.width >= 1 && h.height >= 1, ErrorCode::kCorruptBitstream, "bad image dimensions");
  h.levels = cur.u8();
  require(h.levels >= 1 && h.levels <= kMaxPyramidLevels, ErrorCode::kCorruptBitstream,
          "bad level count");
  h.n_l = cur.u8();
  h.k_l = cur.u8();
  h.n_h = cur.u8();
  h.k_h = cur.u8();
  require(h.n_l <= h.levels && h.n_h <= h.levels, ErrorCode::kCorruptBitstream,
          "kernel counts exceed level count");
  require(h.k_l >= 2 && h.k_l % 2 == 0, ErrorCode::kCorruptBitstream, "bad upsampler kernel size");
  if (h.n_l == 0) {
    require(h.n_h == 0 && h.k_h == 0, ErrorCode::kCorruptBitstream,
            "legacy stream cannot carry pre-filters");
  } else if (h.n_h > 0) {
    require(h.k_h >= 1 && h.k_h % 2 == 1, ErrorCode::kCorruptBitstream, "bad pre-filter size");
  }
  const int hidden_count = cur.u8();
  require(hidden_count <= 15, ErrorCode::kCorruptBitstream, "too many hidden layers");
  for (int i = 0; i < hidden_count; ++i) {
    const int w = cur.u16();
    require(w >= 1 && w <= 4096, ErrorCode::kCorruptBitstream, "bad hidden width");
    h.hidden_widths.push_back(w);
  }
  for (int n = 0; n < h.levels; ++n) {
    const std::uint16_t code = cur.u16();
    require(code >= 1, ErrorCode::kCorruptBitstream, "zero Laplace scale");
    h.scale_codes.push_back(code);
  }
  h.param_bytes = cur.u32();
  h.latent_bytes = cur.u32();
  require(cur.remaining() == static_cast<std::size_t>(h.param_bytes) + h.latent_bytes,
          ErrorCode::kTruncatedPayload, "payload length mismatch");

  DecoderModel model;
  model.width = h.width;
  model.height = h.height;
  if (h.n_l == 0) {
    model.kind = UpsamplerKind::kLegacy;
    model.legacy_kernel.taps = Eigen::MatrixXd::Zero(h.k_l, h.k_l);
  } else {
    model.kind = UpsamplerKind::kSeparable;
    for (int i = 0; i < h.n_l; ++i) {
      model.upsampler.l_kernels.push_back(
          make_symmetric_kernel(h.k_l, Eigen::VectorXd::Zero(half_tap_count(h.k_l))));
    }
    for (int i = 0; i < h.n_h; ++i) {
      model.upsampler.h_kernels.push_back(
          make_symmetric_kernel(h.k_h, Eigen::VectorXd::Zero(half_tap_count(h.k_h))));
    }
    model.upsampler.l_assign.resize(h.levels);
    for (int n = 0; n < h.levels; ++n) model.upsampler.l_assign[n] = std::min(n, h.n_l - 1);
    if (h.n_h > 0) {
      model.upsampler.h_assign.resize(h.levels);
      for (int n = 0; n < h.levels; ++n) model.upsampler.h_assign[n] = std::min(n, h.n_h - 1);
    }
  }
  SynthesisNet net;
  int fan_in = h.levels;
  std::vector<int> outs(h.hidden_widths);
  outs.push_back(3);
  for (int fan_out : outs) {
    net.weights.push_back(Eigen::MatrixXd::Zero(fan_out, fan_in));
    net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    fan_in = fan_out;
  }
  model.synthesis = std::move(net);
  model.rate.log_scale.resize(h.levels);
  for (int n = 0; n < h.levels; ++n) {
    model.rate.log_scale[n] = std::log(scale_from_q412(h.scale_codes[n]));
  }

  const std::size_t header_bytes = bytes.size() - h.param_bytes - h.latent_bytes;
  const std::vector<std::uint8_t> params(bytes.begin() + header_bytes,
                                         bytes.begin() + header_bytes + h.param_bytes);
  const std::vector<std::uint8_t> latents(bytes.begin() + header_bytes + h.param_bytes, bytes.end());
  decode_parameters(params, model);
  model.pyramid = decode_latents(latents, h.width, h.height, h.levels, model.rate);
  validate_model(model);
  return model;
}

BitstreamReport write_bitstream(DecoderModel& model, const std::string& path) {
  BitstreamReport report;
  const std::vector<std::uint8_t> bytes = serialize_bitstream(model, &report);
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::kIoError, "cannot write " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(f.good(), ErrorCode::kIoError, "write failed for " + path);
  return report;
}

DecoderModel read_bitstream(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorCode::kIoError, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return parse_bitstream(bytes);
}

}  // namespace pups
