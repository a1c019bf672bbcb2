#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qdae/quant.hpp"
#include "qdae/rng.hpp"
#include "qdae/tensor.hpp"

namespace qdae {

// One LSTM layer:
//   f = sigmoid(W_f [h,x] + b_f)      i = sigmoid(W_i [h,x] + b_i)
//   c~ = tanh(W_c [h,x] + b_c)        o = sigmoid(W_o [h,x] + b_o)
//   C  = f * C_prev + i * c~          h = o * tanh(C)
struct LstmParams {
  std::size_t hidden = 0;  // H
  std::size_t input = 0;   // D
  Tensor W_f, W_i, W_c, W_o;  // [H x (H+D)]
  Tensor b_f, b_i, b_c, b_o;  // [H]
};

struct LstmState {
  Tensor h;
  Tensor c;
};

inline LstmState zero_state(std::size_t hidden) {
  return LstmState{Tensor::vec(hidden), Tensor::vec(hidden)};
}

// Last-timestep linear prediction head; per-class score = sigmoid(logit).
struct ClassifierHead {
  std::size_t classes = 0;
  Tensor W;  // [C x H]
  Tensor b;  // [C]
};

// Frozen per-tensor weight ranges, present on quantized exports. Absent ->
// ranges are recomputed from the current weight values on each forward pass.
struct StaticWeightRanges {
  struct Layer {
    QuantRange f, i, c, o;
  };
  std::vector<Layer> layers;
  QuantRange head;
};

struct StudentModel {
  std::vector<LstmParams> layers;
  ClassifierHead head;
  std::optional<StaticWeightRanges> static_ranges;

  std::size_t hidden() const { return layers.front().hidden; }
  std::size_t input_dim() const { return layers.front().input; }
  std::size_t classes() const { return head.classes; }
};

// Quantized-operator configuration for a forward/backward pass.
//   bits == 0          -> full-precision path
//   passthrough == true -> quantized wiring with every Q node the identity
// The cell state always uses cell_bits (16 by default) instead of bits.
struct QuantConfig {
  int bits = 0;
  int cell_bits = 16;
  bool passthrough = false;

  bool active() const { return bits > 0 && !passthrough; }

  static QuantConfig fp() { return QuantConfig{}; }
  static QuantConfig quantized(int n) { return QuantConfig{n, 16, false}; }
};

inline Tensor uniform_init(std::size_t r, std::size_t c, SeededRng& rng,
                           float scale) {
  return random_mat(r, c, rng, -scale, scale);
}

// Seeded uniform init scaled by 1/sqrt(fan-in); forget-gate bias starts at 1
// to stabilize long-sequence training.
inline StudentModel init_student(std::size_t hidden, std::size_t input_dim,
                                 std::size_t classes, std::size_t num_layers,
                                 std::uint64_t seed) {
  SeededRng rng(seed, rng_stream::kModelInit);
  StudentModel m;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::size_t d = l == 0 ? input_dim : hidden;
    const float s = 1.0f / std::sqrt(static_cast<float>(hidden + d));
    LstmParams p;
    p.hidden = hidden;
    p.input = d;
    p.W_f = uniform_init(hidden, hidden + d, rng, s);
    p.W_i = uniform_init(hidden, hidden + d, rng, s);
    p.W_c = uniform_init(hidden, hidden + d, rng, s);
    p.W_o = uniform_init(hidden, hidden + d, rng, s);
    p.b_f = Tensor::vec(hidden, 1.0f);
    p.b_i = Tensor::vec(hidden);
    p.b_c = Tensor::vec(hidden);
    p.b_o = Tensor::vec(hidden);
    m.layers.push_back(std::move(p));
  }
  const float hs = 1.0f / std::sqrt(static_cast<float>(hidden));
  m.head.classes = classes;
  m.head.W = uniform_init(classes, hidden, rng, hs);
  m.head.b = Tensor::vec(classes);
  return m;
}

namespace detail {

// Activation quantizer: dynamic per-tensor range, no clamp needed.
inline Tensor q_dynamic(const Tensor& v, int bits) {
  return fake_quantize(v, bits, compute_range(v), false);
}

inline Tensor q_fixed(const Tensor& v, int bits, QuantRange bounds) {
  return fake_quantize(v, bits, bounds, true);
}

inline void add_inplace(Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

// M += outer(u, v); fixed row-major order.
inline void add_outer(Tensor& m, const Tensor& u, const Tensor& v) {
  for (std::size_t i = 0; i < u.size(); ++i) {
    float* row = m.ptr() + i * v.size();
    const float ui = u[i];
    for (std::size_t j = 0; j < v.size(); ++j) row[j] += ui * v[j];
  }
}

// out += M^T u; fixed row-major order.
inline void add_tmatvec(Tensor& out, const Tensor& m, const Tensor& u) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const float* row = m.ptr() + i * m.cols();
    const float ui = u[i];
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += ui * row[j];
  }
}

}  // namespace detail

// Per-step values retained for backpropagation. The *_used tensors are the
// operands that actually entered each product (quantized in quant mode), so
// one backward routine covers both paths under the straight-through rule.
struct StepCache {
  Tensor z;           // matmul input [h,x] as used
  Tensor sf, si, so;  // raw sigmoid outputs (derivative factors)
  Tensor tpre;        // raw tanh(pre_c)
  Tensor fq, iq, cq, oq;  // gate values as used in products
  Tensor c_prev;          // cell-state operand (already on its lattice)
  Tensor tanh_c_raw;      // raw tanh(C_t)
  Tensor tanh_c;          // tanh(C_t) as used in the h product
  QuantRange c_range;     // range used to quantize C_t this step
};

struct LayerCache {
  std::vector<StepCache> steps;
  LstmParams weights_used;  // weights as multiplied (quantized in quant mode)
};

struct SequenceCache {
  std::vector<LayerCache> layers;
  Tensor head_w_used;
  Tensor h_last_used;  // head input as used
  QuantConfig qcfg;
};

struct ForwardResult {
  Tensor logits;  // [C]
  std::optional<SequenceCache> cache;
};

// Weights quantized per the linear-op rule: W is quantized, bias is left
// untouched. Range comes from the stored static range when present, else
// from the current weight values.
inline LstmParams quantize_layer_weights(const LstmParams& p, int bits,
                                         const StaticWeightRanges::Layer* st) {
  LstmParams q = p;
  if (st) {
    q.W_f = fake_quantize(p.W_f, bits, st->f, true);
    q.W_i = fake_quantize(p.W_i, bits, st->i, true);
    q.W_c = fake_quantize(p.W_c, bits, st->c, true);
    q.W_o = fake_quantize(p.W_o, bits, st->o, true);
  } else {
    q.W_f = detail::q_dynamic(p.W_f, bits);
    q.W_i = detail::q_dynamic(p.W_i, bits);
    q.W_c = detail::q_dynamic(p.W_c, bits);
    q.W_o = detail::q_dynamic(p.W_o, bits);
  }
  return q;
}

namespace detail {

// One timestep. `weights` must already be the as-used (possibly quantized)
// weights; `x` and `h_prev` are quantized here when quantization is active.
inline LstmState lstm_step_impl(const LstmParams& weights, const Tensor& x,
                                const LstmState& state, const QuantConfig& q,
                                StepCache* cache) {
  if (x.size() != weights.input)
    throw ShapeError("lstm step: input size " + x.shape_str());
  if (state.h.size() != weights.hidden || state.c.size() != weights.hidden)
    throw ShapeError("lstm step: state size " + state.h.shape_str());

  const bool qa = q.active();
  Tensor zh = qa ? q_dynamic(state.h, q.bits) : state.h;
  Tensor zx = qa ? q_dynamic(x, q.bits) : x;
  Tensor z = concat(zh, zx);

  Tensor pre_f = matvec(weights.W_f, z);
  add_inplace(pre_f, weights.b_f);
  Tensor pre_i = matvec(weights.W_i, z);
  add_inplace(pre_i, weights.b_i);
  Tensor pre_c = matvec(weights.W_c, z);
  add_inplace(pre_c, weights.b_c);
  Tensor pre_o = matvec(weights.W_o, z);
  add_inplace(pre_o, weights.b_o);

  Tensor sf = sigmoid(pre_f);
  Tensor si = sigmoid(pre_i);
  Tensor tpre = qdae::tanh(pre_c);
  Tensor so = sigmoid(pre_o);

  Tensor fq = qa ? q_fixed(sf, q.bits, kUnitRange) : sf;
  Tensor iq = qa ? q_fixed(si, q.bits, kUnitRange) : si;
  Tensor cq = qa ? q_fixed(tpre, q.bits, kSymmetricRange) : tpre;
  Tensor oq = qa ? q_fixed(so, q.bits, kUnitRange) : so;

  Tensor c_raw = add(mul(fq, state.c), mul(iq, cq));
  QuantRange c_range{0.0f, 0.0f};
  Tensor c_t = c_raw;
  if (qa) {
    c_range = compute_range(c_raw);
    c_t = fake_quantize(c_raw, q.cell_bits, c_range, false);
  }

  Tensor tanh_c_raw = qdae::tanh(c_t);
  Tensor tanh_c = qa ? q_fixed(tanh_c_raw, q.bits, kSymmetricRange) : tanh_c_raw;
  Tensor h_t = mul(oq, tanh_c);

  if (cache) {
    cache->z = std::move(z);
    cache->sf = std::move(sf);
    cache->si = std::move(si);
    cache->so = std::move(so);
    cache->tpre = std::move(tpre);
    cache->fq = std::move(fq);
    cache->iq = std::move(iq);
    cache->cq = std::move(cq);
    cache->oq = std::move(oq);
    cache->c_prev = state.c;
    cache->tanh_c_raw = std::move(tanh_c_raw);
    cache->tanh_c = tanh_c;
    cache->c_range = c_range;
  }
  return LstmState{std::move(h_t), std::move(c_t)};
}

}  // namespace detail

inline LstmState lstm_step_fp(const LstmParams& params, const Tensor& x,
                              const LstmState& state) {
  return detail::lstm_step_impl(params, x, state, QuantConfig::fp(), nullptr);
}

// Single quantized step; quantizes the weights itself (dynamic range).
inline LstmState lstm_step_quant(const LstmParams& params, const Tensor& x,
                                 const LstmState& state, int bits,
                                 int cell_bits = 16) {
  QuantConfig q;
  q.bits = bits;
  q.cell_bits = cell_bits;
  LstmParams wq = quantize_layer_weights(params, bits, nullptr);
  return detail::lstm_step_impl(wq, x, state, q, nullptr);
}

// Runs the stacked LSTM over a [T x D] feature matrix from a zero initial
// state and applies the last-timestep head. With `want_cache` the returned
// cache supports backward_sequence.
inline ForwardResult forward_sequence(const StudentModel& model, const Tensor& x,
                                      const QuantConfig& qcfg,
                                      bool want_cache = false) {
  if (x.rank() != 2 || x.cols() != model.input_dim())
    throw ShapeError("forward_sequence: features " + x.shape_str());
  if (x.rows() < 1) throw ArgumentError("forward_sequence: empty sequence");

  const std::size_t t_len = x.rows();
  const bool qa = qcfg.active();

  ForwardResult res;
  SequenceCache cache;
  cache.qcfg = qcfg;

  std::vector<Tensor> inputs(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    Tensor row = Tensor::vec(x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) row[j] = x.at(t, j);
    inputs[t] = std::move(row);
  }

  Tensor h_last;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const StaticWeightRanges::Layer* st =
        model.static_ranges && l < model.static_ranges->layers.size()
            ? &model.static_ranges->layers[l]
            : nullptr;
    LstmParams wq = qa ? quantize_layer_weights(model.layers[l], qcfg.bits, st)
                       : model.layers[l];

    LayerCache lc;
    if (want_cache) lc.steps.resize(t_len);
    LstmState state = zero_state(model.layers[l].hidden);
    for (std::size_t t = 0; t < t_len; ++t) {
      StepCache* sc = want_cache ? &lc.steps[t] : nullptr;
      state = detail::lstm_step_impl(wq, inputs[t], state, qcfg, sc);
      if (l + 1 < model.layers.size()) inputs[t] = state.h;
    }
    h_last = state.h;
    if (want_cache) {
      lc.weights_used = std::move(wq);
      cache.layers.push_back(std::move(lc));
    }
  }

  Tensor head_w = model.head.W;
  Tensor head_in = h_last;
  if (qa) {
    head_w = model.static_ranges
                 ? fake_quantize(model.head.W, qcfg.bits,
                                 model.static_ranges->head, true)
                 : detail::q_dynamic(model.head.W, qcfg.bits);
    head_in = detail::q_dynamic(h_last, qcfg.bits);
  }
  res.logits = matvec(head_w, head_in);
  detail::add_inplace(res.logits, model.head.b);

  if (want_cache) {
    cache.head_w_used = std::move(head_w);
    cache.h_last_used = std::move(head_in);
    res.cache = std::move(cache);
  }
  return res;
}

// Gradient containers mirror the parameter shapes.
struct Gradients {
  std::vector<LstmParams> layers;
  ClassifierHead head;
};

inline Gradients zero_gradients(const StudentModel& m) {
  Gradients g;
  for (const LstmParams& p : m.layers) {
    LstmParams z;
    z.hidden = p.hidden;
    z.input = p.input;
    z.W_f = Tensor::mat(p.hidden, p.hidden + p.input);
    z.W_i = Tensor::mat(p.hidden, p.hidden + p.input);
    z.W_c = Tensor::mat(p.hidden, p.hidden + p.input);
    z.W_o = Tensor::mat(p.hidden, p.hidden + p.input);
    z.b_f = Tensor::vec(p.hidden);
    z.b_i = Tensor::vec(p.hidden);
    z.b_c = Tensor::vec(p.hidden);
    z.b_o = Tensor::vec(p.hidden);
    g.layers.push_back(std::move(z));
  }
  g.head.classes = m.head.classes;
  g.head.W = Tensor::mat(m.head.classes, m.hidden());
  g.head.b = Tensor::vec(m.head.classes);
  return g;
}

// Exact backpropagation through time over a cached forward pass. Quantization
// nodes backpropagate as the identity; every other derivative is exact, so in
// full precision this is plain BPTT.
inline Gradients backward_sequence(const StudentModel& model,
                                   const SequenceCache& cache,
                                   const Tensor& dlogits) {
  if (cache.layers.empty()) throw StateError("backward: cache missing");
  if (dlogits.size() != model.classes())
    throw ShapeError("backward: dlogits " + dlogits.shape_str());

  Gradients g = zero_gradients(model);
  const std::size_t t_len = cache.layers.front().steps.size();
  const std::size_t num_layers = cache.layers.size();

  detail::add_outer(g.head.W, dlogits, cache.h_last_used);
  detail::add_inplace(g.head.b, dlogits);

  // External per-step h gradients for the layer being processed; the top
  // layer starts with the head contribution at the last step.
  std::vector<Tensor> ext_dh(t_len);
  const std::size_t top_hidden = model.hidden();
  for (std::size_t t = 0; t < t_len; ++t) ext_dh[t] = Tensor::vec(top_hidden);
  detail::add_tmatvec(ext_dh[t_len - 1], cache.head_w_used, dlogits);

  for (std::size_t li = num_layers; li-- > 0;) {
    const LayerCache& lc = cache.layers[li];
    const LstmParams& w = lc.weights_used;
    const std::size_t hidden = w.hidden;
    const std::size_t d_in = w.input;
    LstmParams& gl = g.layers[li];

    std::vector<Tensor> dinput(t_len);
    Tensor dh_rec = Tensor::vec(hidden);
    Tensor dc_carry = Tensor::vec(hidden);

    for (std::size_t t = t_len; t-- > 0;) {
      const StepCache& s = lc.steps[t];

      Tensor dh = ext_dh[t];
      detail::add_inplace(dh, dh_rec);

      Tensor dpre_f = Tensor::vec(hidden);
      Tensor dpre_i = Tensor::vec(hidden);
      Tensor dpre_c = Tensor::vec(hidden);
      Tensor dpre_o = Tensor::vec(hidden);
      Tensor dc_prev = Tensor::vec(hidden);

      for (std::size_t j = 0; j < hidden; ++j) {
        const float do_q = dh[j] * s.tanh_c[j];
        const float dtanh_c = dh[j] * s.oq[j];
        const float tr = s.tanh_c_raw[j];
        // STE through the tanh-output and cell-state quantizers.
        const float dc = dtanh_c * (1.0f - tr * tr) + dc_carry[j];
        const float df = dc * s.c_prev[j];
        const float di = dc * s.cq[j];
        const float dcq = dc * s.iq[j];
        dc_prev[j] = dc * s.fq[j];
        dpre_f[j] = df * s.sf[j] * (1.0f - s.sf[j]);
        dpre_i[j] = di * s.si[j] * (1.0f - s.si[j]);
        dpre_c[j] = dcq * (1.0f - s.tpre[j] * s.tpre[j]);
        dpre_o[j] = do_q * s.so[j] * (1.0f - s.so[j]);
      }

      detail::add_outer(gl.W_f, dpre_f, s.z);
      detail::add_outer(gl.W_i, dpre_i, s.z);
      detail::add_outer(gl.W_c, dpre_c, s.z);
      detail::add_outer(gl.W_o, dpre_o, s.z);
      detail::add_inplace(gl.b_f, dpre_f);
      detail::add_inplace(gl.b_i, dpre_i);
      detail::add_inplace(gl.b_c, dpre_c);
      detail::add_inplace(gl.b_o, dpre_o);

      Tensor dz = Tensor::vec(hidden + d_in);
      detail::add_tmatvec(dz, w.W_f, dpre_f);
      detail::add_tmatvec(dz, w.W_i, dpre_i);
      detail::add_tmatvec(dz, w.W_c, dpre_c);
      detail::add_tmatvec(dz, w.W_o, dpre_o);

      for (std::size_t j = 0; j < hidden; ++j) dh_rec[j] = dz[j];
      Tensor dx = Tensor::vec(d_in);
      for (std::size_t j = 0; j < d_in; ++j) dx[j] = dz[hidden + j];
      dinput[t] = std::move(dx);
      dc_carry = std::move(dc_prev);
    }

    // Input gradients of this layer feed the h outputs of the layer below.
    if (li > 0) ext_dh = std::move(dinput);
  }
  return g;
}

// --- parameter / size / FLOPs accounting ------------------------------------
// Convention: one multiply-accumulate counts as one operation; bias adds,
// elementwise multiplies/adds, and each activation evaluation count one each.
// Quantization overhead counts 3 ops per quantized value (scale, round,
// recover) plus 2 ops per value of range search for dynamic ranges.
struct ModelMetrics {
  std::uint64_t param_count = 0;
  std::uint64_t param_bytes = 0;
  std::uint64_t flops = 0;
  std::uint64_t quant_overhead_flops = 0;
};

inline ModelMetrics account(const StudentModel& m, std::size_t t_len,
                            const QuantConfig& qcfg) {
  ModelMetrics mm;
  const std::uint64_t classes = m.classes();
  const std::uint64_t hidden = m.hidden();

  std::uint64_t weight_values = 0;
  std::uint64_t bias_values = 0;
  std::uint64_t step_flops = 0;
  std::uint64_t step_quant_dynamic = 0;
  std::uint64_t step_quant_fixed = 0;
  for (const LstmParams& p : m.layers) {
    const std::uint64_t h = p.hidden, d = p.input;
    weight_values += 4 * h * (h + d);
    bias_values += 4 * h;
    // 4 gate matvecs + 4 bias adds + cell/h elementwise (4H) + 5 activations
    step_flops += 4 * h * (h + d) + 13 * h;
    step_quant_dynamic += 2 * h + d;  // h and x inputs, cell state
    step_quant_fixed += 5 * h;        // f, i, c~, o, tanh(C)
  }
  weight_values += classes * hidden;
  bias_values += classes;

  mm.param_count = weight_values + bias_values;

  if (qcfg.bits > 0) {
    // Packed n-bit weights (per-tensor byte padding) + float32 biases.
    std::uint64_t bytes = bias_values * 4;
    for (const LstmParams& p : m.layers) {
      const std::uint64_t per_w = p.hidden * (p.hidden + p.input);
      bytes += 4 * ((per_w * qcfg.bits + 7) / 8 + 8);  // + alpha/beta
    }
    bytes += (classes * hidden * qcfg.bits + 7) / 8 + 8;
    mm.param_bytes = bytes;
  } else {
    mm.param_bytes = mm.param_count * 4;
  }

  mm.flops = static_cast<std::uint64_t>(t_len) * step_flops +
             classes * hidden + 2 * classes;

  if (qcfg.bits > 0) {
    mm.quant_overhead_flops =
        weight_values * 3 +
        static_cast<std::uint64_t>(t_len) *
            (step_quant_dynamic * 5 + step_quant_fixed * 3) +
        hidden * 5;  // head input
  }
  return mm;
}

}  // namespace qdae
