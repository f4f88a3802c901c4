#pragma once

#include <cstddef>

#include "smmconv/matrix.hpp"
#include "smmconv/tensor.hpp"
#include "smmconv/workspace.hpp"

namespace smmconv {

class WorkerPool;

/// im2col lowering: (c_i*k_h*k_w) rows by (h'*w') columns, row-major.
/// Row (c, k, j) matches the WeightsStandard flattening; column t = r*w' + x
/// is the receptive field of output pixel (r, x).
struct LoweredMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  workspace::ScratchBuffer values;

  ConstMatrixView view() const { return {values.data(), rows, cols, cols}; }
  float operator()(std::size_t row, std::size_t col) const {
    return values.data()[row * cols + col];
  }
};

LoweredMatrix im2col_pack(const InputTensor& input, const ConvGeometry& geom,
                          WorkerPool* pool = nullptr);

/// GEMM of the (c_o x c_i*k_h*k_w) weight matrix with the lowered input. The
/// output tensor is the GEMM result in place, no reshape copy.
OutputTensor conv_im2col(const InputTensor& input,
                         const WeightsStandard& weights,
                         const ConvGeometry& geom, WorkerPool* pool = nullptr);

/// c_i*k_h*k_w*h'*w'
std::size_t im2col_workspace_elements(const ConvGeometry& geom);

}  // namespace smmconv
