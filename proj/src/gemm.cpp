#include "smmconv/gemm.hpp"

#include <algorithm>
#include <array>
#include <utility>

#if defined(__AVX2__) || defined(__AVX512F__)
#include <immintrin.h>
#endif
#include <atomic>

#include "smmconv/tensor.hpp"
#include "smmconv/worker_pool.hpp"

namespace smmconv {

namespace {

#if defined(__AVX512F__)
struct Vec {
  static constexpr std::size_t kWidth = 16;
  __m512 v;
  static Vec zero() { return {_mm512_setzero_ps()}; }
  static Vec load(const float* p) { return {_mm512_loadu_ps(p)}; }
  static Vec broadcast(float x) { return {_mm512_set1_ps(x)}; }
  void store(float* p) const { _mm512_storeu_ps(p, v); }
  // this = a * b + this, fused
  void fma(Vec a, Vec b) { v = _mm512_fmadd_ps(a.v, b.v, v); }
};
constexpr std::size_t kMr = 8;
#elif defined(__AVX2__) && defined(__FMA__)
struct Vec {
  static constexpr std::size_t kWidth = 8;
  __m256 v;
  static Vec zero() { return {_mm256_setzero_ps()}; }
  static Vec load(const float* p) { return {_mm256_loadu_ps(p)}; }
  static Vec broadcast(float x) { return {_mm256_set1_ps(x)}; }
  void store(float* p) const { _mm256_storeu_ps(p, v); }
  void fma(Vec a, Vec b) { v = _mm256_fmadd_ps(a.v, b.v, v); }
};
constexpr std::size_t kMr = 6;
#else
struct Vec {
  static constexpr std::size_t kWidth = 4;
  float v[4];
  static Vec zero() { return {{0.0f, 0.0f, 0.0f, 0.0f}}; }
  static Vec load(const float* p) { return {{p[0], p[1], p[2], p[3]}}; }
  static Vec broadcast(float x) { return {{x, x, x, x}}; }
  void store(float* p) const {
    for (std::size_t i = 0; i < 4; ++i) p[i] = v[i];
  }
  void fma(Vec a, Vec b) {
    for (std::size_t i = 0; i < 4; ++i) v[i] = madd(a.v[i], b.v[i], v[i]);
  }
};
constexpr std::size_t kMr = 4;
#endif

constexpr std::size_t kVecPerRow = 2;
constexpr std::size_t kNr = kVecPerRow * Vec::kWidth;
constexpr std::size_t kKc = 256;
constexpr std::size_t kNc = 1024;

// C[0:Rows, 0:kNr] (+)= A[0:Rows, 0:kc] * B[0:kc, 0:kNr].
template <std::size_t Rows>
void micro_tile(std::size_t kc, const float* a, std::size_t lda,
                const float* b, std::size_t ldb, float* c, std::size_t ldc,
                bool accumulate) {
  Vec acc[Rows][kVecPerRow];
  for (std::size_t i = 0; i < Rows; ++i)
    for (std::size_t v = 0; v < kVecPerRow; ++v)
      acc[i][v] = accumulate ? Vec::load(c + i * ldc + v * Vec::kWidth)
                             : Vec::zero();
  for (std::size_t p = 0; p < kc; ++p) {
    Vec bv[kVecPerRow];
    for (std::size_t v = 0; v < kVecPerRow; ++v)
      bv[v] = Vec::load(b + p * ldb + v * Vec::kWidth);
    for (std::size_t i = 0; i < Rows; ++i) {
      const Vec av = Vec::broadcast(a[i * lda + p]);
      for (std::size_t v = 0; v < kVecPerRow; ++v) acc[i][v].fma(av, bv[v]);
    }
  }
  for (std::size_t i = 0; i < Rows; ++i)
    for (std::size_t v = 0; v < kVecPerRow; ++v)
      acc[i][v].store(c + i * ldc + v * Vec::kWidth);
}

using TileFn = void (*)(std::size_t, const float*, std::size_t, const float*,
                        std::size_t, float*, std::size_t, bool);

template <std::size_t... R>
constexpr std::array<TileFn, sizeof...(R)> make_tiles(
    std::index_sequence<R...>) {
  return {&micro_tile<R + 1>...};
}

// Indexed by row count - 1.
constexpr auto kTiles = make_tiles(std::make_index_sequence<kMr>());

// Columns on the N fringe, fewer than kNr of them.
void edge_tile(std::size_t mr, std::size_t nr, std::size_t kc, const float* a,
               std::size_t lda, const float* b, std::size_t ldb, float* c,
               std::size_t ldc, bool accumulate) {
  float acc[kMr][kNr] = {};
  if (accumulate) {
    for (std::size_t i = 0; i < mr; ++i)
      for (std::size_t j = 0; j < nr; ++j) acc[i][j] = c[i * ldc + j];
  }
  for (std::size_t p = 0; p < kc; ++p) {
    const float* brow = b + p * ldb;
    for (std::size_t i = 0; i < mr; ++i) {
      const float av = a[i * lda + p];
      for (std::size_t j = 0; j < nr; ++j)
        acc[i][j] = madd(av, brow[j], acc[i][j]);
    }
  }
  for (std::size_t i = 0; i < mr; ++i)
    for (std::size_t j = 0; j < nr; ++j) c[i * ldc + j] = acc[i][j];
}

void gemm_columns(ConstMatrixView a, ConstMatrixView b, MatrixView c,
                  std::size_t col_begin, std::size_t col_end) {
  const std::size_t m = a.rows;
  const std::size_t k = a.cols;
  if (k == 0) {
    for (std::size_t i = 0; i < m; ++i)
      std::fill(c.row(i) + col_begin, c.row(i) + col_end, 0.0f);
    return;
  }
  for (std::size_t jc = col_begin; jc < col_end; jc += kNc) {
    const std::size_t nc = std::min(kNc, col_end - jc);
    for (std::size_t pc = 0; pc < k; pc += kKc) {
      const std::size_t kc = std::min(kKc, k - pc);
      const bool accumulate = pc > 0;
      for (std::size_t ic = 0; ic < m; ic += kMr) {
        const std::size_t mr = std::min(kMr, m - ic);
        const float* ablk = a.data + ic * a.row_stride + pc;
        for (std::size_t jr = 0; jr < nc; jr += kNr) {
          const std::size_t nr = std::min(kNr, nc - jr);
          const float* bblk = b.data + pc * b.row_stride + jc + jr;
          float* cblk = c.data + ic * c.row_stride + jc + jr;
          if (nr == kNr)
            kTiles[mr - 1](kc, ablk, a.row_stride, bblk, b.row_stride, cblk,
                           c.row_stride, accumulate);
          else
            edge_tile(mr, nr, kc, ablk, a.row_stride, bblk, b.row_stride, cblk,
                      c.row_stride, accumulate);
        }
      }
    }
  }
}

std::atomic<GemmFn> g_backend{nullptr};

}  // namespace

void gemm(ConstMatrixView a, ConstMatrixView b, MatrixView c,
          WorkerPool* pool) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols)
    throw ShapeError("gemm: inner or outer dimensions disagree");
  const std::size_t n = b.cols;
  if (pool == nullptr || pool->size() == 1 || n <= kNr) {
    gemm_columns(a, b, c, 0, n);
    return;
  }
  // Hand out whole register tiles so workers never share a cache line of C.
  const std::size_t tiles = (n + kNr - 1) / kNr;
  pool->parallel_for(tiles, [&](std::size_t t0, std::size_t t1) {
    gemm_columns(a, b, c, t0 * kNr, std::min(n, t1 * kNr));
  });
}

void set_gemm_backend(GemmFn fn) { g_backend.store(fn); }

GemmFn gemm_backend() {
  GemmFn fn = g_backend.load();
  return fn ? fn : &gemm;
}

}  // namespace smmconv
