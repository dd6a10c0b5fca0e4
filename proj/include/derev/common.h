#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace derev {

inline constexpr double kPi = 3.14159265358979323846;

// Degenerate numerical input (all-zero band, silent signal, ...) as opposed
// to a caller contract violation, which throws std::invalid_argument.
class DegenerateInput : public std::runtime_error {
 public:
  explicit DegenerateInput(const std::string& what)
      : std::runtime_error("degenerate-input: " + what) {}
};

// Dense row-major matrix. Rows are contiguous so per-row spans can be handed
// to the DSP kernels directly.
template <class T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
    if (rows <= 0 || cols <= 0)
      throw std::invalid_argument("invalid-argument: matrix dims must be positive");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }

  T& at(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  const T& at(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  T* row_ptr(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
  const T* row_ptr(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }

  std::span<T> row(int r) { return {row_ptr(r), static_cast<size_t>(cols_)}; }
  std::span<const T> row(int r) const { return {row_ptr(r), static_cast<size_t>(cols_)}; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  void fill(T v) { data_.assign(data_.size(), v); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

// Mono audio at a fixed sample rate. All pipeline entry points require 16 kHz
// and reject anything else instead of resampling.
struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = 16000;
};

}  // namespace derev
