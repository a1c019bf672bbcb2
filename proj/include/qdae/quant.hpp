#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "qdae/error.hpp"
#include "qdae/tensor.hpp"

namespace qdae {

// Min-max quantization of a tensor onto a 2^n-point lattice:
//   norm   = (v - beta) / alpha            alpha = max - min, beta = min
//   code   = round(norm * (2^n - 1))       round half away from zero
//   value  = alpha * code / (2^n - 1) + beta
// Rounding is fixed so results are bit-reproducible.

enum class RangePolicy {
  DynamicPerTensor,  // range recomputed from the tensor at each use
  StaticStored,      // range frozen earlier; out-of-range inputs clamped
  FixedKnownBounds,  // known activation bounds ([0,1] or [-1,1]); clamped
};

struct QuantSpec {
  int bits = 8;  // CLI accepts {4,8,16}; the core supports 1..16
  RangePolicy policy = RangePolicy::DynamicPerTensor;

  bool clamps() const { return policy != RangePolicy::DynamicPerTensor; }
};

struct QuantRange {
  float alpha = 0.0f;  // scale = max - min, never negative
  float beta = 0.0f;   // offset = min

  bool finite() const { return std::isfinite(alpha) && std::isfinite(beta); }
};

inline constexpr QuantRange kUnitRange{1.0f, 0.0f};      // sigmoid outputs
inline constexpr QuantRange kSymmetricRange{2.0f, -1.0f};  // tanh outputs

inline QuantRange compute_range(const Tensor& v) {
  if (v.empty()) throw ArgumentError("compute_range: empty tensor");
  if (!all_finite(v)) throw ArgumentError("compute_range: non-finite values");
  float lo = min_value(v), hi = max_value(v);
  return QuantRange{hi - lo, lo};
}

inline std::int64_t lattice_steps(int bits) {
  if (bits < 1 || bits > 16) throw ArgumentError("bits out of range [1,16]");
  return (std::int64_t{1} << bits) - 1;
}

// Lattice point for a code; pack/unpack and fake_quantize share this so the
// dequantized tensor is bit-identical either way.
inline float dequant_code(std::uint32_t code, int bits, QuantRange range) {
  const double steps = static_cast<double>(lattice_steps(bits));
  return static_cast<float>(static_cast<double>(range.alpha) *
                                (static_cast<double>(code) / steps) +
                            static_cast<double>(range.beta));
}

inline std::uint32_t quantize_value(float v, int bits, QuantRange range,
                                    bool clamp) {
  const std::int64_t steps = lattice_steps(bits);
  double x = v;
  const double lo = range.beta;
  const double hi = static_cast<double>(range.beta) + static_cast<double>(range.alpha);
  if (clamp) x = x < lo ? lo : (x > hi ? hi : x);
  double norm = (x - lo) / static_cast<double>(range.alpha);
  std::int64_t k = std::llround(norm * static_cast<double>(steps));
  if (k < 0) k = 0;
  if (k > steps) k = steps;
  return static_cast<std::uint32_t>(k);
}

inline std::vector<std::uint32_t> quantize_codes(const Tensor& v, int bits,
                                                 QuantRange range, bool clamp) {
  if (!range.finite()) throw ArgumentError("quantize: non-finite range");
  std::vector<std::uint32_t> codes(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    codes[i] = quantize_value(v[i], bits, range, clamp);
  return codes;
}

// Forward pass of the quantization node. With alpha == 0 the tensor is
// constant and already exactly representable, so it passes through.
inline Tensor fake_quantize(const Tensor& v, int bits, QuantRange range,
                            bool clamp) {
  if (!range.finite()) throw ArgumentError("fake_quantize: non-finite range");
  if (range.alpha == 0.0f) return v;
  Tensor out = v;
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = dequant_code(quantize_value(v[i], bits, range, clamp), bits, range);
  return out;
}

inline Tensor fake_quantize(const Tensor& v, const QuantSpec& spec,
                            QuantRange range) {
  return fake_quantize(v, spec.bits, range, spec.clamps());
}

// Straight-through estimator: the quantization node passes the upstream
// gradient through unchanged; alpha and beta receive no gradient.
inline Tensor ste_backward(const Tensor& upstream_grad) { return upstream_grad; }

// n-bit codes densely packed for storage, little-endian bit order within
// bytes, zero-padded to a byte boundary.
struct PackedIntTensor {
  int rank = 1;
  std::array<std::size_t, 2> dims{0, 1};
  int bits = 8;
  QuantRange range;
  std::vector<std::uint8_t> payload;

  std::size_t count() const {
    return rank == 2 ? dims[0] * dims[1] : dims[0];
  }
};

inline PackedIntTensor pack(const std::vector<std::uint32_t>& codes, int bits,
                            int rank, std::array<std::size_t, 2> dims,
                            QuantRange range) {
  const std::uint32_t max_code =
      static_cast<std::uint32_t>(lattice_steps(bits));
  PackedIntTensor p;
  p.rank = rank;
  p.dims = dims;
  p.bits = bits;
  p.range = range;
  const std::size_t nbits = codes.size() * static_cast<std::size_t>(bits);
  p.payload.assign((nbits + 7) / 8, 0);
  std::size_t bit = 0;
  for (std::uint32_t code : codes) {
    if (code > max_code) throw ArgumentError("pack: code out of range");
    for (int b = 0; b < bits; ++b, ++bit)
      if ((code >> b) & 1u) p.payload[bit >> 3] |= std::uint8_t(1u << (bit & 7));
  }
  return p;
}

inline PackedIntTensor pack_tensor(const Tensor& t, int bits, QuantRange range,
                                   bool clamp) {
  std::array<std::size_t, 2> dims{t.rows(), t.cols()};
  return pack(quantize_codes(t, bits, range, clamp), bits, t.rank(), dims, range);
}

inline std::vector<std::uint32_t> unpack_codes(const PackedIntTensor& p) {
  std::vector<std::uint32_t> codes(p.count(), 0);
  std::size_t bit = 0;
  for (std::size_t i = 0; i < codes.size(); ++i)
    for (int b = 0; b < p.bits; ++b, ++bit)
      if (p.payload[bit >> 3] & (1u << (bit & 7))) codes[i] |= 1u << b;
  return codes;
}

// Dequantize back to float32; exactly equals fake_quantize output under the
// same (bits, range).
inline Tensor unpack(const PackedIntTensor& p) {
  std::vector<std::uint32_t> codes = unpack_codes(p);
  Tensor t = p.rank == 2 ? Tensor::mat(p.dims[0], p.dims[1]) : Tensor::vec(p.dims[0]);
  for (std::size_t i = 0; i < codes.size(); ++i)
    t[i] = p.range.alpha == 0.0f ? p.range.beta
                                 : dequant_code(codes[i], p.bits, p.range);
  return t;
}

// --- byte layout (inside checkpoints) ---------------------------------------
// header: n (1 byte), rank (1 byte), dims (8-byte LE each), alpha (4-byte LE
// IEEE-754), beta (same), then the payload bits.

inline void append_u8(std::vector<std::uint8_t>& out, std::uint8_t v) {
  out.push_back(v);
}

inline void append_u16le(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(std::uint8_t(v & 0xff));
  out.push_back(std::uint8_t(v >> 8));
}

inline void append_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t((v >> (8 * i)) & 0xff));
}

inline void append_u64le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t((v >> (8 * i)) & 0xff));
}

inline void append_f32le(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  append_u32le(out, u);
}

// Reader over a byte span; throws TruncationError past the end.
class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size)
      : data_(data), size_(size) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16le() {
    const std::uint8_t* p = take(2);
    return std::uint16_t(p[0] | (std::uint16_t(p[1]) << 8));
  }
  std::uint32_t u32le() {
    const std::uint8_t* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64le() {
    const std::uint8_t* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    return v;
  }
  float f32le() {
    std::uint32_t u = u32le();
    float f;
    std::memcpy(&f, &u, 4);
    return f;
  }
  const std::uint8_t* take(std::size_t n) {
    if (pos_ + n > size_) throw TruncationError("unexpected end of data");
    const std::uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  std::size_t remaining() const { return size_ - pos_; }
  std::size_t pos() const { return pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

inline void serialize_packed(const PackedIntTensor& p,
                             std::vector<std::uint8_t>& out) {
  append_u8(out, std::uint8_t(p.bits));
  append_u8(out, std::uint8_t(p.rank));
  for (int d = 0; d < p.rank; ++d) append_u64le(out, p.dims[d]);
  append_f32le(out, p.range.alpha);
  append_f32le(out, p.range.beta);
  out.insert(out.end(), p.payload.begin(), p.payload.end());
}

inline PackedIntTensor deserialize_packed(ByteReader& r) {
  PackedIntTensor p;
  p.bits = r.u8();
  p.rank = r.u8();
  if (p.rank < 1 || p.rank > 2) throw FormatError("packed tensor: bad rank");
  p.dims = {1, 1};
  for (int d = 0; d < p.rank; ++d) p.dims[d] = r.u64le();
  p.range.alpha = r.f32le();
  p.range.beta = r.f32le();
  const std::size_t nbytes = (p.count() * std::size_t(p.bits) + 7) / 8;
  const std::uint8_t* payload = r.take(nbytes);
  p.payload.assign(payload, payload + nbytes);
  return p;
}

}  // namespace qdae
