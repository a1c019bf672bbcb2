#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <string>
#include <vector>

#include "qdae/error.hpp"
#include "qdae/rng.hpp"

namespace qdae {

// Dense rank-1 or rank-2 float32 array, row-major.
class Tensor {
 public:
  Tensor() = default;

  static Tensor vec(std::size_t n, float fill = 0.0f) {
    Tensor t;
    t.rank_ = 1;
    t.dims_ = {n, 1};
    t.data_.assign(n, fill);
    return t;
  }

  static Tensor mat(std::size_t rows, std::size_t cols, float fill = 0.0f) {
    Tensor t;
    t.rank_ = 2;
    t.dims_ = {rows, cols};
    t.data_.assign(rows * cols, fill);
    return t;
  }

  static Tensor from(std::initializer_list<float> vals) {
    Tensor t = vec(vals.size());
    std::size_t i = 0;
    for (float v : vals) t.data_[i++] = v;
    return t;
  }

  static Tensor from_rows(std::initializer_list<std::initializer_list<float>> rows) {
    std::size_t r = rows.size();
    std::size_t c = r ? rows.begin()->size() : 0;
    Tensor t = mat(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("ragged initializer rows");
      for (float v : row) t.data_[i++] = v;
    }
    return t;
  }

  int rank() const { return rank_; }
  std::size_t rows() const { return dims_[0]; }
  std::size_t cols() const { return rank_ == 2 ? dims_[1] : 1; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float operator[](std::size_t i) const { return data_[i]; }
  float& operator[](std::size_t i) { return data_[i]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * dims_[1] + c]; }
  float& at(std::size_t r, std::size_t c) { return data_[r * dims_[1] + c]; }

  const float* ptr() const { return data_.data(); }
  float* ptr() { return data_.data(); }
  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  bool same_shape(const Tensor& o) const {
    return rank_ == o.rank_ && dims_[0] == o.dims_[0] &&
           (rank_ == 1 || dims_[1] == o.dims_[1]);
  }

  std::string shape_str() const {
    if (rank_ == 1) return "[" + std::to_string(dims_[0]) + "]";
    return "[" + std::to_string(dims_[0]) + "x" + std::to_string(dims_[1]) + "]";
  }

 private:
  int rank_ = 1;
  std::array<std::size_t, 2> dims_{0, 1};
  std::vector<float> data_;
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
}

// sigmoid/tanh are evaluated in double and pinned strictly inside their open
// ranges in float, so saturated inputs never collapse to an endpoint.
inline float sigmoid_scalar(float x) {
  double p = 1.0 / (1.0 + std::exp(-static_cast<double>(x)));
  float f = static_cast<float>(p);
  if (f <= 0.0f) return std::numeric_limits<float>::denorm_min();
  if (f >= 1.0f) return 1.0f - 0x1.0p-24f;
  return f;
}

inline float tanh_scalar(float x) {
  float f = static_cast<float>(std::tanh(static_cast<double>(x)));
  const float lim = 1.0f - 0x1.0p-24f;
  if (f >= 1.0f) return lim;
  if (f <= -1.0f) return -lim;
  return f;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

// Hadamard product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

inline Tensor sigmoid(const Tensor& a) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(out[i]);
  return out;
}

inline Tensor tanh(const Tensor& a) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = tanh_scalar(out[i]);
  return out;
}

// Accumulation is strictly left-to-right over k so results are reproducible.
inline float dot_lr(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t k = 0; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
    throw ShapeError("matmul: " + a.shape_str() + " x " + b.shape_str());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::mat(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      float acc = 0.0f;
      for (std::size_t p = 0; p < k; ++p) acc += a.at(i, p) * b.at(p, j);
      out.at(i, j) = acc;
    }
  }
  return out;
}

inline Tensor matvec(const Tensor& a, const Tensor& x) {
  if (a.rank() != 2 || x.rank() != 1 || a.cols() != x.rows())
    throw ShapeError("matvec: " + a.shape_str() + " x " + x.shape_str());
  const std::size_t m = a.rows(), k = a.cols();
  Tensor out = Tensor::vec(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = dot_lr(a.ptr() + i * k, x.ptr(), k);
  return out;
}

inline Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1) throw ShapeError("concat: rank-1 only");
  Tensor out = Tensor::vec(a.size() + b.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[a.size() + i] = b[i];
  return out;
}

inline float min_value(const Tensor& t) {
  if (t.empty()) throw ArgumentError("min of empty tensor");
  float m = t[0];
  for (std::size_t i = 1; i < t.size(); ++i) m = t[i] < m ? t[i] : m;
  return m;
}

inline float max_value(const Tensor& t) {
  if (t.empty()) throw ArgumentError("max of empty tensor");
  float m = t[0];
  for (std::size_t i = 1; i < t.size(); ++i) m = t[i] > m ? t[i] : m;
  return m;
}

inline bool all_finite(const Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i)
    if (!std::isfinite(t[i])) return false;
  return true;
}

inline Tensor random_vec(std::size_t n, SeededRng& rng, float lo, float hi) {
  Tensor t = Tensor::vec(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = rng.uniform_float(lo, hi);
  return t;
}

inline Tensor random_mat(std::size_t r, std::size_t c, SeededRng& rng, float lo,
                         float hi) {
  Tensor t = Tensor::mat(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform_float(lo, hi);
  return t;
}

}  // namespace qdae
