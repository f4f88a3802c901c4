#include "smmconv/mec.hpp"

#include <algorithm>
#include <string>

#include "smmconv/matrix.hpp"
#include "smmconv/worker_pool.hpp"

namespace smmconv {

namespace {

void pack_channel(const InputTensor& input, const ConvGeometry& g, int c,
                  float* dst) {
  const std::size_t out_w = std::size_t(g.out_w());
  const std::size_t rows = std::size_t(g.padded_h());
  const std::size_t kw = std::size_t(g.k_w);
  const float* plane = input.data() + std::size_t(c) * g.h * g.w;
  for (std::size_t t = 0; t < out_w; ++t) {
    float* slab = dst + t * rows * kw;
    for (std::size_t r = 0; r < rows; ++r) {
      const int in_r = int(r) - g.p_h;
      float* out = slab + r * kw;
      if (in_r < 0 || in_r >= g.h) {
        std::fill(out, out + kw, 0.0f);
        continue;
      }
      const float* in_row = plane + std::size_t(in_r) * g.w;
      for (std::size_t q = 0; q < kw; ++q) {
        const int in_c = int(t + q) - g.p_w;
        out[q] = (in_c < 0 || in_c >= g.w) ? 0.0f : in_row[in_c];
      }
    }
  }
  workspace::record_copy(out_w * rows * kw);
}

// O[:, r, :] += W_c * V_r for output rows [row_begin, row_end).
void multiply_rows(const WeightsStandard& weights, const ConvGeometry& g,
                   int c, const float* lowered, OutputTensor& out,
                   std::size_t row_begin, std::size_t row_end) {
  const std::size_t out_h = std::size_t(g.out_h());
  const std::size_t out_w = std::size_t(g.out_w());
  const std::size_t taps = std::size_t(g.k_h) * g.k_w;
  const std::size_t slab = std::size_t(g.padded_h()) * g.k_w;
  for (std::size_t r = row_begin; r < row_end; ++r) {
    const float* window0 = lowered + r * std::size_t(g.k_w);
    for (int m = 0; m < g.c_o; ++m) {
      const float* wrow = weights.data() + weights.index(m, c, 0, 0);
      float* orow = out.data() + (std::size_t(m) * out_h + r) * out_w;
      for (std::size_t t = 0; t < out_w; ++t) {
        const float* window = window0 + t * slab;
        float acc = orow[t];
        for (std::size_t p = 0; p < taps; ++p) acc = madd(wrow[p], window[p], acc);
        orow[t] = acc;
      }
    }
  }
}

}  // namespace

bool mec_supported(const ConvGeometry& geom) {
  return geom.s_h == 1 && geom.s_w == 1;
}

void mec_check_supported(const ConvGeometry& geom) {
  geom.validate();
  if (!mec_supported(geom))
    throw UnsupportedError("mec backend supports stride 1 only (got sh=" +
                           std::to_string(geom.s_h) +
                           " sw=" + std::to_string(geom.s_w) + ")");
}

std::size_t mec_workspace_elements(const ConvGeometry& geom) {
  geom.validate();
  return std::size_t(geom.out_w()) * std::size_t(geom.padded_h()) *
         std::size_t(geom.k_w);
}

MecLowered mec_pack(const InputTensor& input, const ConvGeometry& geom,
                    int channel) {
  check_input(input, geom);
  mec_check_supported(geom);
  if (channel < 0 || channel >= geom.c_i)
    throw ShapeError("mec_pack: channel index out of range");
  MecLowered lowered;
  lowered.slabs = std::size_t(geom.out_w());
  lowered.slab_rows = std::size_t(geom.padded_h());
  lowered.slab_cols = std::size_t(geom.k_w);
  lowered.values = workspace::ScratchBuffer(mec_workspace_elements(geom));
  pack_channel(input, geom, channel, lowered.values.data());
  return lowered;
}

OutputTensor conv_mec(const InputTensor& input, const WeightsStandard& weights,
                      const ConvGeometry& geom, WorkerPool* pool) {
  check_input(input, geom);
  check_weights(weights, geom);
  mec_check_supported(geom);
  OutputTensor out = make_output(geom);
  workspace::ScratchBuffer lowered(mec_workspace_elements(geom));
  const std::size_t out_h = std::size_t(geom.out_h());
  for (int c = 0; c < geom.c_i; ++c) {
    pack_channel(input, geom, c, lowered.data());
    if (pool != nullptr && pool->size() > 1) {
      pool->parallel_for(out_h, [&](std::size_t b, std::size_t e) {
        multiply_rows(weights, geom, c, lowered.data(), out, b, e);
      });
    } else {
      multiply_rows(weights, geom, c, lowered.data(), out, 0, out_h);
    }
  }
  return out;
}

}  // namespace smmconv
