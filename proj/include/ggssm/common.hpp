#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ggssm/errors.hpp"

namespace ggssm {

// Dense row-major matrix. Deliberately minimal: the kernels in this library
// want flat contiguous storage and nothing else.
template <class T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(uint32_t rows, uint32_t cols, T fill = T{})
      : rows_(rows), cols_(cols), v_(static_cast<size_t>(rows) * cols, fill) {}

  uint32_t rows() const { return rows_; }
  uint32_t cols() const { return cols_; }
  size_t size() const { return v_.size(); }

  T& operator()(uint32_t i, uint32_t j) { return v_[static_cast<size_t>(i) * cols_ + j]; }
  const T& operator()(uint32_t i, uint32_t j) const {
    return v_[static_cast<size_t>(i) * cols_ + j];
  }

  T* data() { return v_.data(); }
  const T* data() const { return v_.data(); }
  T* row(uint32_t i) { return v_.data() + static_cast<size_t>(i) * cols_; }
  const T* row(uint32_t i) const { return v_.data() + static_cast<size_t>(i) * cols_; }

  std::vector<T>& storage() { return v_; }
  const std::vector<T>& storage() const { return v_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (const T& x : v_)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

 private:
  uint32_t rows_ = 0;
  uint32_t cols_ = 0;
  std::vector<T> v_;
};

using Matrixd = Matrix<double>;
using Matrixf = Matrix<float>;

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

// All library randomness flows through seeded mt19937_64 instances so runs
// are reproducible bit-for-bit from a single seed.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(eng_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(eng_);
  }
  uint64_t integer(uint64_t lo, uint64_t hi) {  // inclusive bounds
    return std::uniform_int_distribution<uint64_t>(lo, hi)(eng_);
  }
  std::mt19937_64& engine() { return eng_; }

  Matrixd matrix_normal(uint32_t rows, uint32_t cols, double stddev = 1.0) {
    Matrixd m(rows, cols);
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] = normal(0.0, stddev);
    return m;
  }
  Matrixd matrix_uniform(uint32_t rows, uint32_t cols, double lo, double hi) {
    Matrixd m(rows, cols);
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] = uniform(lo, hi);
    return m;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace ggssm
