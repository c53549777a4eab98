#include "echo/memory/embedding.hpp"

#include <cmath>
#include <string>

#include "echo/error.hpp"

namespace echo {

Embedding::Embedding(std::vector<float> values) : values_(std::move(values)) {
  if (values_.empty()) throw Error(ErrorCode::kInvalidArgument, "embedding must have at least one coordinate");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw Error(ErrorCode::kNonFiniteValue, "coordinate " + std::to_string(i) + " is not finite");
    }
  }
}

double Embedding::norm() const {
  double sum = 0.0;
  for (float v : values_) sum += double(v) * double(v);
  return std::sqrt(sum);
}

Embedding Embedding::normalized() const {
  const double n = norm();
  if (n == 0.0) throw Error(ErrorCode::kZeroNormVector, "cannot normalize the zero vector");
  std::vector<float> out(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) out[i] = static_cast<float>(double(values_[i]) / n);
  return Embedding(std::move(out));
}

namespace {

template <typename T>
double cosine_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "cosine over dims " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::kZeroNormVector, "cosine of a zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

double cosine_similarity(std::span<const float> a, std::span<const float> b) { return cosine_impl(a, b); }
double cosine_similarity(std::span<const double> a, std::span<const double> b) { return cosine_impl(a, b); }

}  // namespace echo
