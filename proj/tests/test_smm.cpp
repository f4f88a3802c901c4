#include <doctest.h>

#include <cmath>
#include <random>

#include "oracle.hpp"
#include "smmconv/conv_ref.hpp"
#include "smmconv/im2col.hpp"
#include "smmconv/smm.hpp"
#include "smmconv/worker_pool.hpp"

using namespace smmconv;

namespace {

template <class T>
T filled(T t, std::uint64_t seed) {
  fill_deterministic(t, seed);
  return t;
}

float fma_oracle(float alpha, float s, float d) {
  if constexpr (kFusedMultiplyAdd) return std::fma(alpha, s, d);
  const float product = alpha * s;
  return product + d;
}

}  // namespace

TEST_SUITE("smm weights") {
  TEST_CASE("1x1x1x1 repack") {
    const ConvGeometry g{};
    WeightsStandard w = make_weights(g);
    w(0, 0, 0, 0) = 0.625f;
    const WeightsSMM s = repack_weights(w, g);
    CHECK(s.extents() == WeightsSMM::Extents{1, 1, 1, 1});
    CHECK(s(0, 0, 0, 0) == 0.625f);
  }

  TEST_CASE("layout formula") {
    const ConvGeometry g{.c_i = 2, .c_o = 3, .h = 5, .w = 5, .k_h = 3, .k_w = 3};
    const auto w = filled(make_weights(g), 21);
    const WeightsSMM s = repack_weights(w, g);
    CHECK(s.extents() == WeightsSMM::Extents{2, 3, 3, 3});
    std::mt19937 rng(3);
    for (int n = 0; n < 10; ++n) {
      const int m = int(rng() % 3), c = int(rng() % 2), k = int(rng() % 3),
                j = int(rng() % 3);
      const std::size_t smm_flat = ((std::size_t(c) * 3 + j) * 3 + k) * 3 + m;
      const std::size_t std_flat = ((std::size_t(m) * 2 + c) * 3 + k) * 3 + j;
      CHECK(s.values()[smm_flat] == w.values()[std_flat]);
    }
  }

  TEST_CASE("repack is a bijection") {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 20; ++i) {
      const ConvGeometry g = oracle::random_geometry(rng);
      const auto w = filled(make_weights(g), i);
      const WeightsSMM s = repack_weights(w, g);
      CHECK(unpack_weights(s, g) == w);
      std::vector<float> a(w.values().begin(), w.values().end());
      std::vector<float> b(s.values().begin(), s.values().end());
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      CHECK(a == b);
    }
  }

  TEST_CASE("shape mismatch") {
    const ConvGeometry g{.c_i = 2, .c_o = 3, .h = 5, .w = 5, .k_h = 3, .k_w = 3};
    ConvGeometry other = g;
    other.c_o = 4;
    CHECK_THROWS_AS(repack_weights(make_weights(other), g), ShapeError);
    CHECK_THROWS_AS(unpack_weights(WeightsSMM({2, 3, 3, 4}), g), ShapeError);
  }
}

TEST_SUITE("slice buffer") {
  TEST_CASE("4x4 input, kw=3 slices") {
    const ConvGeometry g{.h = 4, .w = 4, .k_h = 3, .k_w = 3};
    const auto in = filled(make_input(g), 1);
    SliceBuffer buf(g);
    CHECK(buf.rows() == 4);
    CHECK(buf.cols() == 2);
    for (int j = 0; j < 3; ++j) {
      extract_slice(in, g, 0, j, buf);
      for (int r = 0; r < 4; ++r)
        for (int t = 0; t < 2; ++t) CHECK(buf(r, t) == in(0, r, j + t));
    }
  }

  TEST_CASE("padding is written as zeros") {
    const ConvGeometry g{.c_i = 2, .h = 5, .w = 5, .k_h = 3, .k_w = 3,
                         .p_h = 1, .p_w = 1};
    const auto in = filled(make_input(g), 2);
    const auto padded = oracle::pad_input(in, g);
    SliceBuffer buf(g);
    REQUIRE(buf.rows() == 7);
    REQUIRE(buf.cols() == 5);
    extract_slice(in, g, 1, 0, buf);
    for (std::size_t r = 0; r < buf.rows(); ++r) CHECK(buf(r, 0) == 0.0f);
    for (std::size_t t = 0; t < buf.cols(); ++t) {
      CHECK(buf(0, t) == 0.0f);
      CHECK(buf(6, t) == 0.0f);
    }
    for (int j = 0; j < 3; ++j) {
      extract_slice(in, g, 1, j, buf);
      for (int r = 0; r < 7; ++r)
        for (int t = 0; t < 5; ++t)
          CHECK(buf(r, t) == padded[(7 + r) * 7 + j + t]);
    }
  }

  TEST_CASE("strided columns") {
    const ConvGeometry g{.c_i = 2, .h = 6, .w = 6, .k_h = 3, .k_w = 2,
                         .s_h = 1, .s_w = 2};
    const auto in = filled(make_input(g), 3);
    SliceBuffer buf(g);
    REQUIRE(buf.cols() == 3);
    for (int c = 0; c < 2; ++c)
      for (int j = 0; j < 2; ++j) {
        extract_slice(in, g, c, j, buf);
        for (int r = 0; r < 6; ++r)
          for (int t = 0; t < 3; ++t) CHECK(buf(r, t) == in(c, r, j + 2 * t));
      }

    std::mt19937_64 rng(31);
    for (int i = 0; i < 30; ++i) {
      const ConvGeometry rg = oracle::random_geometry(rng);
      const auto ri = filled(make_input(rg), i);
      const auto pad = oracle::pad_input(ri, rg);
      SliceBuffer rb(rg);
      const int c = rg.c_i - 1;
      const int j = rg.k_w - 1;
      extract_slice(ri, rg, c, j, rb);
      for (int r = 0; r < rg.padded_h(); ++r)
        for (int t = 0; t < rg.out_w(); ++t)
          CHECK(rb(r, t) == pad[(std::size_t(c) * rg.padded_h() + r) *
                                    rg.padded_w() +
                                j + t * rg.s_w]);
    }
  }

  TEST_CASE("index checks") {
    const ConvGeometry g{.c_i = 2, .h = 5, .w = 5, .k_h = 3, .k_w = 3};
    const auto in = filled(make_input(g), 1);
    SliceBuffer buf(g);
    CHECK_THROWS_AS(extract_slice(in, g, 2, 0, buf), ShapeError);
    CHECK_THROWS_AS(extract_slice(in, g, -1, 0, buf), ShapeError);
    CHECK_THROWS_AS(extract_slice(in, g, 0, 3, buf), ShapeError);
    ConvGeometry other = g;
    other.p_h = 1;
    SliceBuffer wrong(other);
    CHECK_THROWS_AS(extract_slice(in, g, 0, 0, wrong), ShapeError);
    CHECK_THROWS_AS(shifted_view(buf, g, 3), ShapeError);
  }

  TEST_CASE("shifted view is an offset into the buffer") {
    const ConvGeometry g{.h = 9, .w = 6, .k_h = 3, .k_w = 2, .s_h = 2};
    const auto in = filled(make_input(g), 4);
    SliceBuffer buf(g);
    extract_slice(in, g, 0, 1, buf);
    for (int k = 0; k < 3; ++k) {
      workspace::Probe probe;
      const ConstMatrixView v = shifted_view(buf, g, k);
      CHECK(probe.read().copied_elements == 0);
      CHECK(probe.read().allocations == 0);
      CHECK(v.data == buf.data() + k * buf.cols());
      CHECK(v.rows == std::size_t(g.out_h()));
      CHECK(v.cols == buf.cols());
      CHECK(v.row_stride == 2 * buf.cols());
      for (std::size_t r = 0; r < v.rows; ++r)
        for (std::size_t t = 0; t < v.cols; ++t)
          CHECK(v(r, t) == in(0, int(k + 2 * r), int(1 + t)));
    }
  }
}

TEST_SUITE("scalar_matrix_fma") {
  TEST_CASE("alpha = 0 leaves dst unchanged") {
    std::vector<float> src(12), dst(12);
    fill_deterministic(src, 1);
    fill_deterministic(dst, 2);
    const auto before = dst;
    scalar_matrix_fma(0.0f, dense_view(src.data(), 3, 4),
                      dense_view(dst.data(), 3, 4));
    CHECK(dst == before);
  }

  TEST_CASE("alpha = 1 into zeros copies src") {
    std::vector<float> src(35), dst(35, 0.0f);
    fill_deterministic(src, 3);
    scalar_matrix_fma(1.0f, dense_view(src.data(), 5, 7),
                      dense_view(dst.data(), 5, 7));
    CHECK(dst == src);
  }

  TEST_CASE("random 5x7 against elementwise oracle") {
    std::vector<float> src(35), dst(35);
    fill_deterministic(src, 4);
    fill_deterministic(dst, 5);
    const float alpha = 0.3779f;
    std::vector<float> expect(35);
    for (std::size_t i = 0; i < 35; ++i) expect[i] = fma_oracle(alpha, src[i], dst[i]);
    scalar_matrix_fma(alpha, dense_view(src.data(), 5, 7),
                      dense_view(dst.data(), 5, 7));
    CHECK(dst == expect);
  }

  TEST_CASE("row-strided source") {
    std::vector<float> src(6 * 10), dst(3 * 4);
    fill_deterministic(src, 6);
    fill_deterministic(dst, 7);
    const ConstMatrixView view{src.data() + 10, 3, 4, 20};
    std::vector<float> expect(12);
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t t = 0; t < 4; ++t)
        expect[r * 4 + t] = fma_oracle(-1.25f, view(r, t), dst[r * 4 + t]);
    scalar_matrix_fma(-1.25f, view, dense_view(dst.data(), 3, 4));
    CHECK(dst == expect);
  }

  TEST_CASE("shape mismatch") {
    std::vector<float> a(12), b(12);
    CHECK_THROWS_AS(scalar_matrix_fma(1.0f, dense_view(a.data(), 3, 4),
                                      dense_view(b.data(), 4, 3)),
                    ShapeError);
  }
}

TEST_SUITE("smm_conv") {
  TEST_CASE("1x1 kernel is a scaled copy") {
    const ConvGeometry g{.h = 5, .w = 6};
    const auto in = filled(make_input(g), 8);
    WeightsStandard w = make_weights(g);
    w(0, 0, 0, 0) = 0.7f;
    const OutputTensor out = smm_conv_single(in, repack_weights(w, g), g);
    for (std::size_t e = 0; e < in.size(); ++e)
      CHECK(out.values()[e] == 0.7f * in.values()[e]);
  }

  TEST_CASE("all ones") {
    const ConvGeometry g{.h = 4, .w = 4, .k_h = 3, .k_w = 3};
    InputTensor in = make_input(g);
    WeightsStandard w = make_weights(g);
    std::fill(in.values().begin(), in.values().end(), 1.0f);
    std::fill(w.values().begin(), w.values().end(), 1.0f);
    const OutputTensor out = smm_conv_single(in, repack_weights(w, g), g);
    REQUIRE(out.extents() == OutputTensor::Extents{1, 2, 2});
    for (float v : out.values()) CHECK(v == 9.0f);
  }

  TEST_CASE("randomized sweep against conv_ref") {
    int cases = 0;
    for (int ci = 1; ci <= 4; ++ci)
      for (int co = 1; co <= 4; ++co)
        for (int hw : {4, 8, 12})
          for (int k : {1, 3, 5})
            for (int p : {0, 1})
              for (int s : {1, 2}) {
                const ConvGeometry g{.c_i = ci, .c_o = co, .h = hw,
                                     .w = 16 - hw, .k_h = k, .k_w = k,
                                     .s_h = s, .s_w = 3 - s, .p_h = p,
                                     .p_w = p};
                if (k > g.padded_h() || k > g.padded_w()) continue;
                const auto in = filled(make_input(g), cases);
                const auto w = filled(make_weights(g), 7000 + cases);
                const auto out = smm_conv_single(in, repack_weights(w, g), g);
                CHECK(max_rel_diff(out, conv_ref(in, w, g)) <= 1e-4);
                ++cases;
              }
    CHECK(cases > 300);
  }

  TEST_CASE("single-threaded run is deterministic") {
    const ConvGeometry g{.c_i = 5, .c_o = 6, .h = 13, .w = 11, .k_h = 5,
                         .k_w = 3, .s_w = 2, .p_h = 2, .p_w = 1};
    const auto in = filled(make_input(g), 1);
    const auto w = repack_weights(filled(make_weights(g), 2), g);
    const OutputTensor first = smm_conv_single(in, w, g);
    for (int i = 0; i < 3; ++i) CHECK(smm_conv_single(in, w, g) == first);
  }

  TEST_CASE("one slice buffer, one copy per (c, j)") {
    const ConvGeometry g{.c_i = 3, .c_o = 4, .h = 10, .w = 9, .k_h = 3,
                         .k_w = 4, .s_h = 2, .p_h = 1, .p_w = 2};
    const auto in = filled(make_input(g), 3);
    const auto w = repack_weights(filled(make_weights(g), 4), g);
    const std::size_t slice = std::size_t(g.padded_h()) * g.out_w();
    workspace::Probe probe;
    (void)smm_conv_single(in, w, g);
    const auto s = probe.read();
    CHECK(s.allocations == 1);
    CHECK(s.allocated_bytes == 4 * slice);
    CHECK(s.peak_live_bytes == 4 * slice);
    CHECK(s.pack_calls == std::size_t(g.c_i * g.k_w));
    CHECK(s.copied_elements == std::size_t(g.c_i * g.k_w) * slice);
  }

  TEST_CASE("workspace formula") {
    const ConvGeometry g{.h = 64, .w = 64, .k_h = 3, .k_w = 3};
    CHECK(smm_workspace_elements(g, 1) == 3968);
    ConvGeometry padded = g;
    padded.p_h = 1;
    CHECK(smm_workspace_elements(padded, 1) == 4092);
    CHECK(smm_workspace_elements(g, 8) == 8 * 3968);
  }

  TEST_CASE("memory ratio against im2col") {
    std::mt19937_64 rng(77);
    oracle::GeometryRanges ranges;
    ranges.strides = {1};
    ranges.paddings = {0};
    for (int i = 0; i < 50; ++i) {
      const ConvGeometry g = oracle::random_geometry(rng, ranges);
      // im2col / smm == c_i * k_h * k_w * h' / h, cross-multiplied
      CHECK(im2col_workspace_elements(g) * std::size_t(g.h) ==
            smm_workspace_elements(g, 1) * std::size_t(g.c_i) * g.k_h * g.k_w *
                std::size_t(g.out_h()));
    }
  }
}

TEST_SUITE("smm_conv_parallel") {
  TEST_CASE("one worker matches the single-threaded driver") {
    const ConvGeometry g{.c_i = 3, .c_o = 5, .h = 8, .w = 8, .k_h = 3,
                         .k_w = 3, .p_h = 1, .p_w = 1};
    const auto in = filled(make_input(g), 1);
    const auto w = repack_weights(filled(make_weights(g), 2), g);
    CHECK(smm_conv_parallel(in, w, g, 1) == smm_conv_single(in, w, g));
  }

  TEST_CASE("VGG-shaped layer with four workers") {
    const ConvGeometry g{.c_i = 64, .c_o = 64, .h = 56, .w = 56, .k_h = 3,
                         .k_w = 3, .p_h = 1, .p_w = 1};
    const auto in = filled(make_input(g), 3);
    const auto w = repack_weights(filled(make_weights(g), 4), g);
    CHECK(smm_conv_parallel(in, w, g, 4) == smm_conv_single(in, w, g));
  }

  TEST_CASE("bitwise equal for any worker count") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 15; ++i) {
      const ConvGeometry g = oracle::random_geometry(rng);
      const auto in = filled(make_input(g), i);
      const auto w = repack_weights(filled(make_weights(g), 300 + i), g);
      const OutputTensor single = smm_conv_single(in, w, g);
      for (std::size_t d : {1, 2, 3, 4, 7, 8})
        CHECK(smm_conv_parallel(in, w, g, d) == single);
    }
  }

  TEST_CASE("scratch is one slice per worker") {
    const ConvGeometry g{.c_i = 5, .c_o = 7, .h = 12, .w = 10, .k_h = 3,
                         .k_w = 3, .p_h = 1};
    const auto in = filled(make_input(g), 1);
    const auto w = repack_weights(filled(make_weights(g), 2), g);
    for (std::size_t d : {1, 3, 4}) {
      workspace::Probe probe;
      (void)smm_conv_parallel(in, w, g, d);
      const auto s = probe.read();
      CHECK(s.allocations == d);
      CHECK(s.peak_live_bytes == 4 * smm_workspace_elements(g, d));
      // every (c, j) pair is still extracted exactly once
      CHECK(s.pack_calls == std::size_t(g.c_i * g.k_w));
    }
  }

  TEST_CASE("reusable pool") {
    WorkerPool pool(3);
    const ConvGeometry g{.c_i = 4, .c_o = 2, .h = 9, .w = 9, .k_h = 5,
                         .k_w = 5, .p_h = 2, .p_w = 2};
    const auto in = filled(make_input(g), 5);
    const auto w = repack_weights(filled(make_weights(g), 6), g);
    const OutputTensor single = smm_conv_single(in, w, g);
    for (int i = 0; i < 5; ++i) CHECK(smm_conv_parallel(in, w, g, pool) == single);
  }

  TEST_CASE("zero workers rejected") {
    const ConvGeometry g{};
    const auto in = make_input(g);
    const auto w = repack_weights(make_weights(g), g);
    CHECK_THROWS_AS(smm_conv_parallel(in, w, g, 0), ShapeError);
  }
}
