#pragma once

// Core data types for channels-first (NCHW) single-image convolution: layer
// geometry, dense float tensors, deterministic fill and numeric comparison.

#include <array>
#include <cstddef>
#include <cstdint>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace smmconv {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Geometry or extents that violate an invariant or disagree with each other.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A backend that cannot run the requested (valid) geometry.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Shape, stride and padding parameters of one convolution layer.
///
/// Field names follow the usual notation: c_i/c_o are input/output channels,
/// h/w the input plane, k_h/k_w the kernel, s_* strides and p_* symmetric
/// zero padding. Output extents are derived, never stored.
struct ConvGeometry {
  int c_i = 1;
  int c_o = 1;
  int h = 1;
  int w = 1;
  int k_h = 1;
  int k_w = 1;
  int s_h = 1;
  int s_w = 1;
  int p_h = 0;
  int p_w = 0;

  int padded_h() const { return h + 2 * p_h; }
  int padded_w() const { return w + 2 * p_w; }
  int out_h() const { return (padded_h() - k_h) / s_h + 1; }
  int out_w() const { return (padded_w() - k_w) / s_w + 1; }

  /// Throws ShapeError naming the first violated invariant.
  void validate() const;

  std::size_t input_elements() const;
  std::size_t output_elements() const;
  std::size_t weight_elements() const;

  bool operator==(const ConvGeometry&) const = default;
};

std::string to_string(const ConvGeometry& geom);

struct OutputShape {
  int h = 0;
  int w = 0;
  bool operator==(const OutputShape&) const = default;
};

/// floor((h + 2p - k) / s) + 1 per axis; rejects invalid geometry.
OutputShape output_shape(const ConvGeometry& geom);

namespace detail {

template <class T, std::size_t Alignment>
struct AlignedAllocator {
  using value_type = T;

  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U, Alignment>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(
        ::operator new(n * sizeof(T), std::align_val_t{Alignment}));
  }
  void deallocate(T* p, std::size_t) noexcept {
    ::operator delete(p, std::align_val_t{Alignment});
  }

  template <class U>
  struct rebind {
    using other = AlignedAllocator<U, Alignment>;
  };

  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) {
    return true;
  }
};

}  // namespace detail

inline constexpr std::size_t kTensorAlignment = 64;

using AlignedFloats =
    std::vector<float, detail::AlignedAllocator<float, kTensorAlignment>>;

/// Dense row-major float tensor of fixed rank. `Tag` keeps tensors with
/// different roles (input, output, weights in either layout) from being
/// passed in place of each other.
template <std::size_t Rank, class Tag>
class DenseTensor {
 public:
  using Extents = std::array<std::size_t, Rank>;

  DenseTensor() = default;
  explicit DenseTensor(const Extents& extents)
      : extents_(extents), values_(count(extents), 0.0f) {}

  const Extents& extents() const { return extents_; }
  std::size_t extent(std::size_t axis) const { return extents_[axis]; }
  std::size_t size() const { return values_.size(); }

  float* data() { return values_.data(); }
  const float* data() const { return values_.data(); }
  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }

  template <class... I>
    requires(sizeof...(I) == Rank)
  std::size_t index(I... idx) const {
    const std::array<std::size_t, Rank> coords{static_cast<std::size_t>(idx)...};
    std::size_t flat = 0;
    for (std::size_t a = 0; a < Rank; ++a) flat = flat * extents_[a] + coords[a];
    return flat;
  }

  Extents unravel(std::size_t flat) const {
    Extents coords{};
    for (std::size_t a = Rank; a-- > 0;) {
      coords[a] = flat % extents_[a];
      flat /= extents_[a];
    }
    return coords;
  }

  template <class... I>
    requires(sizeof...(I) == Rank)
  float& operator()(I... idx) {
    return values_[index(idx...)];
  }
  template <class... I>
    requires(sizeof...(I) == Rank)
  float operator()(I... idx) const {
    return values_[index(idx...)];
  }

  bool operator==(const DenseTensor& other) const {
    return extents_ == other.extents_ && values_ == other.values_;
  }

 private:
  static std::size_t count(const Extents& e) {
    std::size_t n = 1;
    for (auto v : e) n *= v;
    return n;
  }

  Extents extents_{};
  AlignedFloats values_;
};

/// c_i x h x w
using InputTensor = DenseTensor<3, struct InputTag>;
/// c_o x h' x w'
using OutputTensor = DenseTensor<3, struct OutputTag>;
/// c_o x c_i x k_h x k_w
using WeightsStandard = DenseTensor<4, struct WeightsStandardTag>;

InputTensor make_input(const ConvGeometry& geom);
OutputTensor make_output(const ConvGeometry& geom);
WeightsStandard make_weights(const ConvGeometry& geom);

/// Throws ShapeError unless the tensors' extents match `geom`.
void check_input(const InputTensor& input, const ConvGeometry& geom);
void check_weights(const WeightsStandard& weights, const ConvGeometry& geom);

/// Fills `values` from a splitmix64 stream started at `seed`. Element i takes
/// the top 24 bits of the (i+1)-th output scaled by 2^-24, so every value is
/// an exactly representable float in [0, 1).
void fill_deterministic(std::span<float> values, std::uint64_t seed);

template <std::size_t Rank, class Tag>
DenseTensor<Rank, Tag>& fill_deterministic(DenseTensor<Rank, Tag>& tensor,
                                           std::uint64_t seed) {
  fill_deterministic(tensor.values(), seed);
  return tensor;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, 1e-12), evaluated in double.
double max_rel_diff(std::span<const float> a, std::span<const float> b);

template <std::size_t Rank, class Tag>
double max_rel_diff(const DenseTensor<Rank, Tag>& a,
                    const DenseTensor<Rank, Tag>& b) {
  if (a.extents() != b.extents())
    throw ShapeError("max_rel_diff: tensor extents differ");
  return max_rel_diff(a.values(), b.values());
}

}  // namespace smmconv
