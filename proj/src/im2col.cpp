#include "smmconv/im2col.hpp"

#include <algorithm>

#include "smmconv/gemm.hpp"
#include "smmconv/worker_pool.hpp"

namespace smmconv {

namespace {

// Fills lowered rows [row_begin, row_end).
void pack_rows(const InputTensor& input, const ConvGeometry& g,
               std::size_t row_begin, std::size_t row_end, float* dst) {
  const int out_h = g.out_h();
  const int out_w = g.out_w();
  const std::size_t cols = std::size_t(out_h) * std::size_t(out_w);
  for (std::size_t row = row_begin; row < row_end; ++row) {
    const int j = int(row % std::size_t(g.k_w));
    const int k = int((row / std::size_t(g.k_w)) % std::size_t(g.k_h));
    const int c = int(row / (std::size_t(g.k_w) * std::size_t(g.k_h)));
    const float* plane = input.data() + std::size_t(c) * g.h * g.w;
    float* out = dst + row * cols;
    for (int r = 0; r < out_h; ++r) {
      const int in_r = r * g.s_h + k - g.p_h;
      float* out_row = out + std::size_t(r) * out_w;
      if (in_r < 0 || in_r >= g.h) {
        std::fill(out_row, out_row + out_w, 0.0f);
        continue;
      }
      const float* in_row = plane + std::size_t(in_r) * g.w;
      for (int x = 0; x < out_w; ++x) {
        const int in_c = x * g.s_w + j - g.p_w;
        out_row[x] = (in_c < 0 || in_c >= g.w) ? 0.0f : in_row[in_c];
      }
    }
  }
}

}  // namespace

std::size_t im2col_workspace_elements(const ConvGeometry& geom) {
  geom.validate();
  return std::size_t(geom.c_i) * geom.k_h * geom.k_w *
         std::size_t(geom.out_h()) * std::size_t(geom.out_w());
}

LoweredMatrix im2col_pack(const InputTensor& input, const ConvGeometry& geom,
                          WorkerPool* pool) {
  check_input(input, geom);
  LoweredMatrix lowered;
  lowered.rows = std::size_t(geom.c_i) * geom.k_h * geom.k_w;
  lowered.cols = std::size_t(geom.out_h()) * std::size_t(geom.out_w());
  lowered.values = workspace::ScratchBuffer(lowered.rows * lowered.cols);
  float* dst = lowered.values.data();
  if (pool != nullptr && pool->size() > 1) {
    pool->parallel_for(lowered.rows, [&](std::size_t b, std::size_t e) {
      pack_rows(input, geom, b, e, dst);
    });
  } else {
    pack_rows(input, geom, 0, lowered.rows, dst);
  }
  workspace::record_copy(lowered.rows * lowered.cols);
  return lowered;
}

OutputTensor conv_im2col(const InputTensor& input,
                         const WeightsStandard& weights,
                         const ConvGeometry& geom, WorkerPool* pool) {
  check_weights(weights, geom);
  const LoweredMatrix lowered = im2col_pack(input, geom, pool);
  OutputTensor out = make_output(geom);
  const ConstMatrixView w_mat =
      dense_view(weights.data(), std::size_t(geom.c_o), lowered.rows);
  const MatrixView o_mat =
      dense_view(out.data(), std::size_t(geom.c_o), lowered.cols);
  gemm_backend()(w_mat, lowered.view(), o_mat, pool);
  return out;
}

}  // namespace smmconv
