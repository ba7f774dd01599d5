#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "threer/errors.hpp"
#include "threer/hash.hpp"

namespace threer {

/// Fixed-length real vector. Construction rejects empty, non-finite, and
/// zero-norm inputs, so downstream cosine math never divides by zero.
class EmbeddingVector {
 public:
  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw ValidationError("embedding vector must be non-empty");
    double sq = 0.0;
    for (double v : values_) {
      if (!std::isfinite(v)) throw ValidationError("embedding vector contains a non-finite value");
      sq += v * v;
    }
    norm_ = std::sqrt(sq);
    if (norm_ <= 0.0) throw ValidationError("embedding vector has zero norm");
  }

  std::size_t dim() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  double norm() const { return norm_; }

  json to_json() const { return json(values_); }

  static EmbeddingVector from_json(const json& j) {
    if (!j.is_array()) throw ValidationError("embedding must be a JSON array of numbers");
    std::vector<double> vals;
    vals.reserve(j.size());
    for (const auto& v : j) {
      if (!v.is_number()) throw ValidationError("embedding must be a JSON array of numbers");
      vals.push_back(v.get<double>());
    }
    return EmbeddingVector(std::move(vals));
  }

 private:
  std::vector<double> values_;
  double norm_ = 0.0;
};

/// dot(a,b) / (|a|·|b|), clamped to [-1, 1] to absorb floating-point drift.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch(a.dim(), b.dim());
  double dot = 0.0;
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) dot += av[i] * bv[i];
  return std::clamp(dot / (a.norm() * b.norm()), -1.0, 1.0);
}

}  // namespace threer
