#include "smmconv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace smmconv {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

void ConvGeometry::validate() const {
  require(c_i >= 1, "ci must be >= 1");
  require(c_o >= 1, "co must be >= 1");
  require(h >= 1, "h must be >= 1");
  require(w >= 1, "w must be >= 1");
  require(k_h >= 1, "kh must be >= 1");
  require(k_w >= 1, "kw must be >= 1");
  require(s_h >= 1, "sh must be >= 1");
  require(s_w >= 1, "sw must be >= 1");
  require(p_h >= 0, "ph must be >= 0");
  require(p_w >= 0, "pw must be >= 0");
  require(k_h <= padded_h(), "kh exceeds padded input height");
  require(k_w <= padded_w(), "kw exceeds padded input width");
}

std::size_t ConvGeometry::input_elements() const {
  return std::size_t(c_i) * std::size_t(h) * std::size_t(w);
}

std::size_t ConvGeometry::output_elements() const {
  return std::size_t(c_o) * std::size_t(out_h()) * std::size_t(out_w());
}

std::size_t ConvGeometry::weight_elements() const {
  return std::size_t(c_o) * std::size_t(c_i) * std::size_t(k_h) *
         std::size_t(k_w);
}

std::string to_string(const ConvGeometry& g) {
  std::ostringstream os;
  os << "ci=" << g.c_i << " co=" << g.c_o << " h=" << g.h << " w=" << g.w
     << " kh=" << g.k_h << " kw=" << g.k_w << " sh=" << g.s_h
     << " sw=" << g.s_w << " ph=" << g.p_h << " pw=" << g.p_w;
  return os.str();
}

OutputShape output_shape(const ConvGeometry& geom) {
  geom.validate();
  return {geom.out_h(), geom.out_w()};
}

InputTensor make_input(const ConvGeometry& geom) {
  geom.validate();
  return InputTensor({std::size_t(geom.c_i), std::size_t(geom.h),
                      std::size_t(geom.w)});
}

OutputTensor make_output(const ConvGeometry& geom) {
  geom.validate();
  return OutputTensor({std::size_t(geom.c_o), std::size_t(geom.out_h()),
                       std::size_t(geom.out_w())});
}

WeightsStandard make_weights(const ConvGeometry& geom) {
  geom.validate();
  return WeightsStandard({std::size_t(geom.c_o), std::size_t(geom.c_i),
                          std::size_t(geom.k_h), std::size_t(geom.k_w)});
}

void check_input(const InputTensor& input, const ConvGeometry& geom) {
  geom.validate();
  const InputTensor::Extents expected{std::size_t(geom.c_i),
                                      std::size_t(geom.h), std::size_t(geom.w)};
  if (input.extents() != expected)
    throw ShapeError("input extents do not match geometry (" +
                     to_string(geom) + ")");
}

void check_weights(const WeightsStandard& weights, const ConvGeometry& geom) {
  geom.validate();
  const WeightsStandard::Extents expected{
      std::size_t(geom.c_o), std::size_t(geom.c_i), std::size_t(geom.k_h),
      std::size_t(geom.k_w)};
  if (weights.extents() != expected)
    throw ShapeError("weight extents do not match geometry (" +
                     to_string(geom) + ")");
}

void fill_deterministic(std::span<float> values, std::uint64_t seed) {
  std::uint64_t state = seed;
  for (float& v : values) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    v = static_cast<float>(z >> 40) * 0x1p-24f;
  }
}

double max_rel_diff(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw ShapeError("max_rel_diff: lengths differ");
  constexpr double kEps = 1e-12;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i];
    const double y = b[i];
    const double denom = std::max({std::abs(x), std::abs(y), kEps});
    worst = std::max(worst, std::abs(x - y) / denom);
  }
  return worst;
}

}  // namespace smmconv
