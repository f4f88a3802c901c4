#pragma once

// Memory-efficient convolution (MEC) comparator.
//
// Lowering runs along the width axis, one input channel at a time: slab t
// (t in [0, w')) is the k_w-column strip I_pad[c, :, t : t + k_w] stored
// row-major, so the k_h x k_w receptive field of output pixel (r, t) is the
// contiguous run of k_h*k_w values starting at offset r*k_w inside slab t.
// Overlapping windows share storage instead of being copied per window.
//
// Each output row r is then one small GEMM per channel:
//   O[:, r, :] += W[:, c, :, :] (c_o x k_h*k_w) * V_r (k_h*k_w x w'),
// where V_r is the strided view of all slabs at offset r*k_w. Channels are
// accumulated in order, and the lowered buffer is reused across channels.
//
// Stride 1 only; other strides raise UnsupportedError. Padding is written as
// zeros into the strips.

#include <cstddef>

#include "smmconv/tensor.hpp"
#include "smmconv/workspace.hpp"

namespace smmconv {

class WorkerPool;

struct MecLowered {
  std::size_t slabs = 0;      // w'
  std::size_t slab_rows = 0;  // h + 2*p_h
  std::size_t slab_cols = 0;  // k_w
  workspace::ScratchBuffer values;

  std::size_t slab_size() const { return slab_rows * slab_cols; }
  const float* slab(std::size_t t) const {
    return values.data() + t * slab_size();
  }
  float operator()(std::size_t t, std::size_t r, std::size_t q) const {
    return slab(t)[r * slab_cols + q];
  }
};

/// Throws UnsupportedError when this backend cannot run `geom`.
void mec_check_supported(const ConvGeometry& geom);
bool mec_supported(const ConvGeometry& geom);

MecLowered mec_pack(const InputTensor& input, const ConvGeometry& geom,
                    int channel);

OutputTensor conv_mec(const InputTensor& input, const WeightsStandard& weights,
                      const ConvGeometry& geom, WorkerPool* pool = nullptr);

/// w' * (h + 2*p_h) * k_w: one channel's lowered strips.
std::size_t mec_workspace_elements(const ConvGeometry& geom);

}  // namespace smmconv
