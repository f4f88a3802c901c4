#pragma once

// Scalar-matrix-multiplication convolution.
//
// For every input channel c and kernel column j, the columns of the padded
// input plane reachable from j (every s_w-th column starting at j, w' of
// them) are copied once into a slice buffer of (h + 2*p_h) x w' floats. Each
// kernel row k then selects a shifted h' x w' window of that buffer (rows
// k, k + s_h, ...) by pointer offset alone, and every output channel m
// accumulates W[c, j, k, m] * window into its plane. The buffer is reused for
// all (c, j), so scratch stays at one slice per worker regardless of c_i.
//
// Accumulation order for every output element is (c, j, k). The parallel
// driver keeps that order, so its result is bitwise identical to the
// single-threaded one for any worker count.

#include <cstddef>

#include "smmconv/matrix.hpp"
#include "smmconv/tensor.hpp"
#include "smmconv/workspace.hpp"

namespace smmconv {

class WorkerPool;

/// c_i x k_w x k_h x c_o, the order in which the convolution loop reads it.
using WeightsSMM = DenseTensor<4, struct WeightsSmmTag>;

WeightsSMM repack_weights(const WeightsStandard& weights,
                          const ConvGeometry& geom);
/// Inverse of repack_weights.
WeightsStandard unpack_weights(const WeightsSMM& weights,
                               const ConvGeometry& geom);

class SliceBuffer {
 public:
  explicit SliceBuffer(const ConvGeometry& geom);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  float* data() { return values_.data(); }
  const float* data() const { return values_.data(); }
  float operator()(std::size_t r, std::size_t t) const {
    return values_.data()[r * cols_ + t];
  }
  ConstMatrixView view() const { return {values_.data(), rows_, cols_, cols_}; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  workspace::ScratchBuffer values_;
};

/// buf[r, t] = I_pad[c, r, j + t*s_w] for r < h + 2*p_h, t < w'; zero where
/// the padded coordinate lies outside the input.
void extract_slice(const InputTensor& input, const ConvGeometry& geom,
                   int channel, int kernel_col, SliceBuffer& buf);

/// The h' x w' window of `buf` used by kernel row k: rows k, k + s_h, ...,
/// k + (h'-1)*s_h. A view; nothing is copied.
ConstMatrixView shifted_view(const SliceBuffer& buf, const ConvGeometry& geom,
                             int kernel_row);

/// dst[r, t] += alpha * src[r, t], one multiply-add per element.
void scalar_matrix_fma(float alpha, ConstMatrixView src, MatrixView dst);

OutputTensor smm_conv_single(const InputTensor& input,
                             const WeightsSMM& weights,
                             const ConvGeometry& geom);

/// Two-phase parallel driver with `workers` slice buffers. The (c, j) pairs
/// are taken in groups of `workers`: each worker extracts one slice, all meet
/// at a barrier, then each worker applies every populated slice of the group
/// (in pair order) to its own contiguous range of output channels, and a
/// second barrier releases the buffers for the next group.
OutputTensor smm_conv_parallel(const InputTensor& input,
                               const WeightsSMM& weights,
                               const ConvGeometry& geom, std::size_t workers);
OutputTensor smm_conv_parallel(const InputTensor& input,
                               const WeightsSMM& weights,
                               const ConvGeometry& geom, WorkerPool& pool);

/// workers * (h + 2*p_h) * w'
std::size_t smm_workspace_elements(const ConvGeometry& geom,
                                   std::size_t workers = 1);

}  // namespace smmconv
