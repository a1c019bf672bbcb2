#pragma once

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "qdae/error.hpp"
#include "qdae/tensor.hpp"

namespace qdae {

// Hyperparameters of the distillation objective:
//   L = alpha_kd * T^2 * l(p, y_teacher) + (1 - alpha_kd) * l(p, y)
// where l is the class-weighted multi-label cross entropy below and the
// teacher targets are sigmoid(teacher_logits / T).
struct DistillConfig {
  double temperature = 2.0;
  double alpha_kd = 0.5;
  std::vector<float> class_weights;  // w_c, positive-term penalty per class

  void validate(std::size_t classes) const {
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
    if (alpha_kd < 0.0 || alpha_kd > 1.0)
      throw ConfigError("alpha_kd must be in [0,1]");
    if (class_weights.size() != classes)
      throw ConfigError("class_weights size mismatch");
    for (float w : class_weights)
      if (!(w > 0.0f)) throw ConfigError("class weights must be positive");
  }
};

inline constexpr double kProbEps = 1e-7;

inline double clamp_prob(double p) {
  if (p < kProbEps) return kProbEps;
  if (p > 1.0 - kProbEps) return 1.0 - kProbEps;
  return p;
}

// Class-weighted multi-label cross entropy for one example. Targets may be
// soft (teacher probabilities); w_c multiplies only the positive term.
inline double weighted_bce(const Tensor& probs, const Tensor& targets,
                           const std::vector<float>& w) {
  if (probs.size() != targets.size() || probs.size() != w.size())
    throw ShapeError("weighted_bce: length mismatch");
  double loss = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    const double p = clamp_prob(probs[c]);
    const double t = targets[c];
    loss -= w[c] * t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return loss;
}

// d(weighted_bce)/d(logit_c) with p = sigmoid(logit); the clamp is inactive
// away from the saturated tails.
inline Tensor bce_grad_logits(const Tensor& probs, const Tensor& targets,
                              const std::vector<float>& w) {
  if (probs.size() != targets.size() || probs.size() != w.size())
    throw ShapeError("bce_grad_logits: length mismatch");
  Tensor g = Tensor::vec(probs.size());
  for (std::size_t c = 0; c < probs.size(); ++c) {
    const double p = probs[c];
    const double t = targets[c];
    g[c] = static_cast<float>((1.0 - t) * p - w[c] * t * (1.0 - p));
  }
  return g;
}

// Teacher probabilities: sigmoid of logits softened by T. Only the teacher
// logits are divided by T; student probabilities stay at temperature 1.
inline Tensor soft_targets(const Tensor& teacher_logits, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  Tensor out = Tensor::vec(teacher_logits.size());
  for (std::size_t c = 0; c < teacher_logits.size(); ++c)
    out[c] = sigmoid_scalar(
        static_cast<float>(teacher_logits[c] / temperature));
  return out;
}

inline double distill_loss(const Tensor& student_probs, const Tensor& y,
                           const Tensor& y_teacher, const DistillConfig& cfg) {
  if (student_probs.size() != y.size() || y.size() != y_teacher.size())
    throw ShapeError("distill_loss: length mismatch");
  const double t2 = cfg.temperature * cfg.temperature;
  return cfg.alpha_kd * t2 * weighted_bce(student_probs, y_teacher, cfg.class_weights) +
         (1.0 - cfg.alpha_kd) * weighted_bce(student_probs, y, cfg.class_weights);
}

inline Tensor distill_grad_logits(const Tensor& student_probs, const Tensor& y,
                                  const Tensor& y_teacher,
                                  const DistillConfig& cfg) {
  Tensor gs = bce_grad_logits(student_probs, y_teacher, cfg.class_weights);
  Tensor gh = bce_grad_logits(student_probs, y, cfg.class_weights);
  const double t2 = cfg.temperature * cfg.temperature;
  Tensor g = Tensor::vec(gs.size());
  for (std::size_t c = 0; c < g.size(); ++c)
    g[c] = static_cast<float>(cfg.alpha_kd * t2 * gs[c] +
                              (1.0 - cfg.alpha_kd) * gh[c]);
  return g;
}

// In-memory teacher logits, keyed by clip id. `order` preserves first-seen
// order so re-serialization is deterministic.
struct TeacherLogits {
  std::size_t classes = 0;
  std::vector<std::string> order;
  std::unordered_map<std::string, Tensor> logits;

  const Tensor& require(const std::string& clip_id) const {
    auto it = logits.find(clip_id);
    if (it == logits.end())
      throw DataError("teacher logits missing clip id: " + clip_id);
    return it->second;
  }

  void add(const std::string& clip_id, Tensor t) {
    if (logits.emplace(clip_id, std::move(t)).second) order.push_back(clip_id);
  }
};

// File format: one record per line, "clip-id<TAB>l1,l2,...,lC", UTF-8.
inline void save_teacher_logits(const std::string& path,
                                const TeacherLogits& tl) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  char buf[64];
  for (const std::string& id : tl.order) {
    const Tensor& v = tl.logits.at(id);
    out << id << '\t';
    for (std::size_t c = 0; c < v.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v[c]));
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

inline TeacherLogits load_teacher_logits(const std::string& path,
                                         std::size_t expected_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  TeacherLogits tl;
  tl.classes = expected_classes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("teacher logits: missing tab at line " +
                      std::to_string(lineno));
    std::string id = line.substr(0, tab);
    std::vector<float> vals;
    std::size_t pos = tab + 1;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      std::string tok = line.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos);
      char* end = nullptr;
      float v = std::strtof(tok.c_str(), &end);
      if (end == tok.c_str() || !std::isfinite(v))
        throw DataError("teacher logits: bad value '" + tok + "' at line " +
                        std::to_string(lineno));
      vals.push_back(v);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (vals.size() != expected_classes)
      throw ConfigError("teacher logits: clip " + id + " has " +
                        std::to_string(vals.size()) + " classes, expected " +
                        std::to_string(expected_classes));
    Tensor t = Tensor::vec(vals.size());
    for (std::size_t c = 0; c < vals.size(); ++c) t[c] = vals[c];
    tl.add(id, std::move(t));
  }
  return tl;
}

}  // namespace qdae
