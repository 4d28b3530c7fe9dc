#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tagrec {

/// Fixed-length vector of finite 32-bit floats. Non-empty by construction.
class EmbeddingVector {
 public:
  explicit EmbeddingVector(std::vector<float> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const float> values() const noexcept { return values_; }

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<float> values_;
};

// Squared L2 norm accumulated in double, in coordinate order.
double squared_norm(std::span<const float> v);
double dot(std::span<const float> a, std::span<const float> b);

// dot(a, b) / (|a| |b|). Throws std::invalid_argument on dimension mismatch or
// a zero-norm operand.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace tagrec
