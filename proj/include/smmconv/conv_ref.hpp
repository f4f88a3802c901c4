#pragma once

#include "smmconv/tensor.hpp"

namespace smmconv {

/// Direct six-loop cross-correlation, the oracle for every other backend.
///
/// O[m,r,x] = sum over c, then k, then j of W[m,c,k,j] * I_pad[c, r*s_h + k,
/// x*s_w + j], with a float accumulator in exactly that order. Padding taps
/// are skipped, which equals adding zeros.
OutputTensor conv_ref(const InputTensor& input, const WeightsStandard& weights,
                      const ConvGeometry& geom);

}  // namespace smmconv
