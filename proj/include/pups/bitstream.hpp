#pragma once

#include "pups/common.hpp"
#include "pups/decoder.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pups {

// --- fixed-point formats ---------------------------------------------------
// Kernel taps and Laplace scales use Q4.12 (the bilinear/Dirac inits are
// exactly representable); synthesis weights use Q8.8 of value/scale with a
// per-tensor scale rounded up to the Q8.8 grid.

std::int16_t tap_to_q412(double value);
inline double tap_from_q412(std::int16_t code) { return code / 4096.0; }

std::uint16_t scale_to_q412(double scale);
inline double scale_from_q412(std::uint16_t code) { return code / 4096.0; }

struct QuantizedTensor {
  std::uint16_t scale_q88 = 1;
  std::vector<std::int16_t> codes;
};

QuantizedTensor quantize_tensor_q88(const double* values, std::size_t count);
inline double weight_from_q88(std::int16_t code, std::uint16_t scale_q88) {
  return code * static_cast<double>(scale_q88) / 65536.0;
}

// Snaps every serialized parameter (kernel taps, synthesis weights, Laplace
// scales) onto the bitstream's fixed-point grid, in place. Running this before
// evaluation makes the encoder-side reconstruction bit-identical to what a
// decoder reproduces from the stream.
void quantize_model_parameters(DecoderModel& model);

// --- byte-wise range coder ---------------------------------------------------
// 64-bit low accumulator with carry propagation through a cached byte; range
// renormalizes one byte at a time. encode/decode are exact inverses for any
// CDF table with total <= 2^16.

class RangeEncoder {
 public:
  // Symbol occupies [cum, cum+freq) of [0, total); freq must be positive.
  void encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total);
  std::vector<std::uint8_t> finish();

 private:
  static constexpr std::uint32_t kTop = 1u << 24;
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t pending_ = 0;
  bool cache_primed_ = true;  // the initial zero cache byte is dropped at finish
  std::vector<std::uint8_t> bytes_;
};

class RangeDecoder {
 public:
  RangeDecoder(const std::uint8_t* data, std::size_t size);

  // Returns a target in [0, total); caller finds the owning symbol and
  // confirms with decode_update.
  std::uint32_t decode_target(std::uint32_t total);
  void decode_update(std::uint32_t cum, std::uint32_t freq);

 private:
  static constexpr std::uint32_t kTop = 1u << 24;
  std::uint8_t next_byte() { return pos_ < size_ ? data_[pos_++] : 0; }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t last_div_ = 1;
};

// --- Laplace symbol tables ---------------------------------------------------
// Integer symbols in [-amax, amax] plus a final escape slot; counts sum to
// 2^16. Symbols whose rounded probability is zero are routed through the
// escape (escape symbol + raw 16-bit value), as is anything out of range.

struct SymbolTable {
  int amax = 0;
  std::vector<std::uint32_t> cum;  // size symbol_count()+1, cum.back() == 65536

  int symbol_count() const { return 2 * amax + 2; }
  int escape_index() const { return 2 * amax + 1; }
  std::uint32_t count(int index) const { return cum[index + 1] - cum[index]; }
};

SymbolTable build_symbol_table(double scale);

// --- payload coders ----------------------------------------------------------

// Latents must be integers in [-2^15, 2^15-1]. Pass the quantized-scale rate
// model (the scales stored in the header) so both sides build identical tables.
std::vector<std::uint8_t> encode_latents(const LatentPyramid& pyramid, const RateModel& rate);
LatentPyramid decode_latents(const std::vector<std::uint8_t>& payload, int width, int height,
                             int levels, const RateModel& rate);

std::vector<std::uint8_t> encode_parameters(const DecoderModel& model);
void decode_parameters(const std::vector<std::uint8_t>& payload, DecoderModel& model);

// --- container ---------------------------------------------------------------

struct BitstreamHeader {
  int width = 0;
  int height = 0;
  int levels = 0;
  int n_l = 0;  // 0 marks the legacy non-separable kernel
  int k_l = 0;
  int n_h = 0;
  int k_h = 0;
  std::vector<int> hidden_widths;
  std::vector<std::uint16_t> scale_codes;  // per level, Q4.12
  std::uint32_t param_bytes = 0;
  std::uint32_t latent_bytes = 0;
};

constexpr char kBitstreamMagic[4] = {'P', 'U', 'P', 'S'};
constexpr std::uint8_t kBitstreamVersion = 1;

struct BitstreamReport {
  std::size_t total_bytes = 0;
  std::size_t header_bytes = 0;
  std::size_t param_bytes = 0;
  std::size_t latent_bytes = 0;
  double bpp = 0.0;
};

// Quantizes the model parameters in place (see quantize_model_parameters),
// then serializes header + parameter payload + latent payload.
std::vector<std::uint8_t> serialize_bitstream(DecoderModel& model, BitstreamReport* report = nullptr);
DecoderModel parse_bitstream(const std::vector<std::uint8_t>& bytes);

BitstreamReport write_bitstream(DecoderModel& model, const std::string& path);
DecoderModel read_bitstream(const std::string& path);

}  // namespace pups
