#pragma once

#include "smmconv/matrix.hpp"

namespace smmconv {

class WorkerPool;

/// C = A * B for row-major views (A is M x K, B is K x N, C is M x N).
///
/// Cache-blocked over K and N with a register tile of 8x32 (AVX-512), 6x16
/// (AVX2+FMA) or 4x8 (portable fallback). B is read in place
/// (no packing), so the routine allocates nothing. With a pool, column blocks
/// of C are split across workers; each element is still produced by a single
/// worker in the same order, so results do not depend on the worker count.
void gemm(ConstMatrixView a, ConstMatrixView b, MatrixView c,
          WorkerPool* pool = nullptr);

/// Signature of a replacement GEMM (for instance a platform BLAS wrapper).
using GemmFn = void (*)(ConstMatrixView a, ConstMatrixView b, MatrixView c,
                        WorkerPool* pool);

/// Routine used by conv_im2col; defaults to gemm(). Passing nullptr restores
/// the default.
void set_gemm_backend(GemmFn fn);
GemmFn gemm_backend();

}  // namespace smmconv
