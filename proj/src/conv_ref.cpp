#include "smmconv/conv_ref.hpp"

namespace smmconv {

OutputTensor conv_ref(const InputTensor& input, const WeightsStandard& weights,
                      const ConvGeometry& geom) {
  check_input(input, geom);
  check_weights(weights, geom);
  OutputTensor out = make_output(geom);
  const int out_h = geom.out_h();
  const int out_w = geom.out_w();

  for (int m = 0; m < geom.c_o; ++m) {
    for (int r = 0; r < out_h; ++r) {
      for (int x = 0; x < out_w; ++x) {
        float acc = 0.0f;
        for (int c = 0; c < geom.c_i; ++c) {
          for (int k = 0; k < geom.k_h; ++k) {
            const int row = r * geom.s_h + k - geom.p_h;
            if (row < 0 || row >= geom.h) continue;
            for (int j = 0; j < geom.k_w; ++j) {
              const int col = x * geom.s_w + j - geom.p_w;
              if (col < 0 || col >= geom.w) continue;
              acc += weights(m, c, k, j) * input(c, row, col);
            }
          }
        }
        out(m, r, x) = acc;
      }
    }
  }
  return out;
}

}  // namespace smmconv
