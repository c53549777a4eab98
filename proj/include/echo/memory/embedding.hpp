#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace echo {

// A fixed-dimension feature vector. Construction rejects empty input and
// non-finite coordinates, so every Embedding in the system is usable as-is.
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(std::vector<float> values);

  std::size_t dim() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::span<const float> values() const { return values_; }
  float operator[](std::size_t i) const { return values_[i]; }

  // L2 norm, accumulated in double.
  double norm() const;
  // Unit-length copy. Throws kZeroNormVector for the zero vector.
  Embedding normalized() const;

  friend bool operator==(const Embedding& a, const Embedding& b) = default;

 private:
  std::vector<float> values_;
};

// Cosine similarity accumulated in double precision. Throws kDimensionMismatch
// or kZeroNormVector on invalid input.
double cosine_similarity(std::span<const float> a, std::span<const float> b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);
inline double cosine_similarity(const Embedding& a, const Embedding& b) {
  return cosine_similarity(a.values(), b.values());
}

}  // namespace echo
