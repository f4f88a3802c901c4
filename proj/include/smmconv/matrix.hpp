#pragma once

#include <cmath>
#include <cstddef>
#include <type_traits>

namespace smmconv {

/// Row-major matrix view with an explicit row stride (in elements).
template <class T>
struct BasicMatrixView {
  T* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t row_stride = 0;

  T* row(std::size_t r) const { return data + r * row_stride; }
  T& operator()(std::size_t r, std::size_t c) const {
    return data[r * row_stride + c];
  }
  bool contiguous() const { return row_stride == cols || rows <= 1; }
  bool same_shape(const auto& other) const {
    return rows == other.rows && cols == other.cols;
  }

  operator BasicMatrixView<const T>() const
    requires(!std::is_const_v<T>)
  {
    return {data, rows, cols, row_stride};
  }
};

using MatrixView = BasicMatrixView<float>;
using ConstMatrixView = BasicMatrixView<const float>;

inline MatrixView dense_view(float* data, std::size_t rows, std::size_t cols) {
  return {data, rows, cols, cols};
}
inline ConstMatrixView dense_view(const float* data, std::size_t rows,
                                  std::size_t cols) {
  return {data, rows, cols, cols};
}

#if defined(__FMA__) || defined(__ARM_FEATURE_FMA)
inline constexpr bool kFusedMultiplyAdd = true;
#else
inline constexpr bool kFusedMultiplyAdd = false;
#endif

/// a*b + c, as a single rounding when the target has FMA hardware.
inline float madd(float a, float b, float c) {
  if constexpr (kFusedMultiplyAdd) {
    return std::fma(a, b, c);
  } else {
    return a * b + c;
  }
}

}  // namespace smmconv
