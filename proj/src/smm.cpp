#include "smmconv/smm.hpp"

#include <algorithm>
#include <vector>

#include "smmconv/worker_pool.hpp"

namespace smmconv {

namespace {

void check_smm_weights(const WeightsSMM& weights, const ConvGeometry& geom) {
  const WeightsSMM::Extents expected{std::size_t(geom.c_i),
                                     std::size_t(geom.k_w),
                                     std::size_t(geom.k_h),
                                     std::size_t(geom.c_o)};
  if (weights.extents() != expected)
    throw ShapeError("smm weight extents do not match geometry (" +
                     to_string(geom) + ")");
}

MatrixView output_plane(OutputTensor& out, const ConvGeometry& geom, int m) {
  const std::size_t plane = std::size_t(geom.out_h()) * geom.out_w();
  return dense_view(out.data() + std::size_t(m) * plane,
                    std::size_t(geom.out_h()), std::size_t(geom.out_w()));
}

// All k_h shifted windows of one slice, applied to output channels
// [m_begin, m_end).
void accumulate_slice(const SliceBuffer& buf, const WeightsSMM& weights,
                      const ConvGeometry& geom, int c, int j, int m_begin,
                      int m_end, OutputTensor& out) {
  for (int k = 0; k < geom.k_h; ++k) {
    const ConstMatrixView window = shifted_view(buf, geom, k);
    const float* taps = weights.data() + weights.index(c, j, k, 0);
    for (int m = m_begin; m < m_end; ++m)
      scalar_matrix_fma(taps[m], window, output_plane(out, geom, m));
  }
}

}  // namespace

WeightsSMM repack_weights(const WeightsStandard& weights,
                          const ConvGeometry& geom) {
  check_weights(weights, geom);
  WeightsSMM out({std::size_t(geom.c_i), std::size_t(geom.k_w),
                  std::size_t(geom.k_h), std::size_t(geom.c_o)});
  for (int m = 0; m < geom.c_o; ++m)
    for (int c = 0; c < geom.c_i; ++c)
      for (int k = 0; k < geom.k_h; ++k)
        for (int j = 0; j < geom.k_w; ++j) out(c, j, k, m) = weights(m, c, k, j);
  return out;
}

WeightsStandard unpack_weights(const WeightsSMM& weights,
                               const ConvGeometry& geom) {
  geom.validate();
  check_smm_weights(weights, geom);
  WeightsStandard out = make_weights(geom);
  for (int c = 0; c < geom.c_i; ++c)
    for (int j = 0; j < geom.k_w; ++j)
      for (int k = 0; k < geom.k_h; ++k)
        for (int m = 0; m < geom.c_o; ++m) out(m, c, k, j) = weights(c, j, k, m);
  return out;
}

namespace {

const ConvGeometry& validated(const ConvGeometry& geom) {
  geom.validate();
  return geom;
}

}  // namespace

SliceBuffer::SliceBuffer(const ConvGeometry& geom)
    : rows_(std::size_t(validated(geom).padded_h())),
      cols_(std::size_t(geom.out_w())),
      values_(rows_ * cols_) {}

void extract_slice(const InputTensor& input, const ConvGeometry& geom,
                   int channel, int kernel_col, SliceBuffer& buf) {
  if (channel < 0 || channel >= geom.c_i)
    throw ShapeError("extract_slice: channel index out of range");
  if (kernel_col < 0 || kernel_col >= geom.k_w)
    throw ShapeError("extract_slice: kernel column out of range");
  if (buf.rows() != std::size_t(geom.padded_h()) ||
      buf.cols() != std::size_t(geom.out_w()))
    throw ShapeError("extract_slice: buffer does not match geometry");

  const std::size_t cols = buf.cols();
  const float* plane = input.data() + std::size_t(channel) * geom.h * geom.w;
  float* dst = buf.data();
  // Output columns whose source column lies inside the input: [t0, t1).
  const int first = kernel_col - geom.p_w;
  int t0 = 0;
  while (t0 < int(cols) && first + t0 * geom.s_w < 0) ++t0;
  int t1 = int(cols);
  while (t1 > t0 && first + (t1 - 1) * geom.s_w >= geom.w) --t1;

  for (std::size_t r = 0; r < buf.rows(); ++r) {
    float* out = dst + r * cols;
    const int in_r = int(r) - geom.p_h;
    if (in_r < 0 || in_r >= geom.h) {
      std::fill(out, out + cols, 0.0f);
      continue;
    }
    const float* in_row = plane + std::size_t(in_r) * geom.w;
    std::fill(out, out + t0, 0.0f);
    if (geom.s_w == 1) {
      std::copy(in_row + (first + t0), in_row + (first + t1), out + t0);
    } else {
      for (int t = t0; t < t1; ++t) out[t] = in_row[first + t * geom.s_w];
    }
    std::fill(out + t1, out + cols, 0.0f);
  }
  workspace::record_copy(buf.rows() * cols);
}

ConstMatrixView shifted_view(const SliceBuffer& buf, const ConvGeometry& geom,
                             int kernel_row) {
  if (kernel_row < 0 || kernel_row >= geom.k_h)
    throw ShapeError("shifted_view: kernel row out of range");
  return {buf.data() + std::size_t(kernel_row) * buf.cols(),
          std::size_t(geom.out_h()), buf.cols(),
          std::size_t(geom.s_h) * buf.cols()};
}

void scalar_matrix_fma(float alpha, ConstMatrixView src, MatrixView dst) {
  if (!src.same_shape(dst))
    throw ShapeError("scalar_matrix_fma: view shapes differ");
  if (src.contiguous() && dst.contiguous()) {
    const std::size_t n = src.rows * src.cols;
    const float* __restrict s = src.data;
    float* __restrict d = dst.data;
    for (std::size_t i = 0; i < n; ++i) d[i] = madd(alpha, s[i], d[i]);
    return;
  }
  for (std::size_t r = 0; r < src.rows; ++r) {
    const float* __restrict s = src.row(r);
    float* __restrict d = dst.row(r);
    for (std::size_t t = 0; t < src.cols; ++t) d[t] = madd(alpha, s[t], d[t]);
  }
}

OutputTensor smm_conv_single(const InputTensor& input,
                             const WeightsSMM& weights,
                             const ConvGeometry& geom) {
  check_input(input, geom);
  check_smm_weights(weights, geom);
  OutputTensor out = make_output(geom);
  SliceBuffer buf(geom);
  for (int c = 0; c < geom.c_i; ++c) {
    for (int j = 0; j < geom.k_w; ++j) {
      extract_slice(input, geom, c, j, buf);
      accumulate_slice(buf, weights, geom, c, j, 0, geom.c_o, out);
    }
  }
  return out;
}

OutputTensor smm_conv_parallel(const InputTensor& input,
                               const WeightsSMM& weights,
                               const ConvGeometry& geom, WorkerPool& pool) {
  check_input(input, geom);
  check_smm_weights(weights, geom);
  const std::size_t workers = pool.size();
  OutputTensor out = make_output(geom);

  std::vector<SliceBuffer> buffers;
  buffers.reserve(workers);
  for (std::size_t n = 0; n < workers; ++n) buffers.emplace_back(geom);

  const std::size_t pairs = std::size_t(geom.c_i) * geom.k_w;
  const std::size_t groups = (pairs + workers - 1) / workers;

  pool.run([&](std::size_t worker, PhaseBarrier& barrier) {
    const Partition channels = partition(std::size_t(geom.c_o), workers, worker);
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t base = g * workers;
      const std::size_t populated = std::min(workers, pairs - base);
      if (worker < populated) {
        const std::size_t pair = base + worker;
        extract_slice(input, geom, int(pair / geom.k_w), int(pair % geom.k_w),
                      buffers[worker]);
      }
      barrier.arrive_and_wait();
      for (std::size_t mu = 0; mu < populated; ++mu) {
        const std::size_t pair = base + mu;
        accumulate_slice(buffers[mu], weights, geom, int(pair / geom.k_w),
                         int(pair % geom.k_w), int(channels.begin),
                         int(channels.end), out);
      }
      barrier.arrive_and_wait();
    }
  });
  return out;
}

OutputTensor smm_conv_parallel(const InputTensor& input,
                               const WeightsSMM& weights,
                               const ConvGeometry& geom, std::size_t workers) {
  if (workers < 1) throw ShapeError("smm_conv_parallel: workers must be >= 1");
  WorkerPool pool(workers);
  return smm_conv_parallel(input, weights, geom, pool);
}

std::size_t smm_workspace_elements(const ConvGeometry& geom,
                                   std::size_t workers) {
  geom.validate();
  return workers * std::size_t(geom.padded_h()) * std::size_t(geom.out_w());
}

}  // namespace smmconv
