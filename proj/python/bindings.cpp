#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cstring>

#include "smmconv/bench.hpp"
#include "smmconv/conv_ref.hpp"
#include "smmconv/im2col.hpp"
#include "smmconv/mec.hpp"
#include "smmconv/smm.hpp"
#include "smmconv/worker_pool.hpp"

namespace py = pybind11;
using namespace smmconv;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

template <class Tensor>
Tensor from_numpy(const FloatArray& array, const typename Tensor::Extents& expected,
                  const char* what) {
  const std::size_t rank = std::tuple_size_v<typename Tensor::Extents>;
  bool ok = std::size_t(array.ndim()) == rank;
  for (std::size_t a = 0; ok && a < rank; ++a)
    ok = std::size_t(array.shape(py::ssize_t(a))) == expected[a];
  if (!ok) throw ShapeError(std::string(what) + " shape does not match geometry");
  Tensor t(expected);
  std::memcpy(t.data(), array.data(), t.size() * sizeof(float));
  return t;
}

template <class Tensor>
FloatArray to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.extents().begin(), t.extents().end());
  FloatArray out(shape);
  std::memcpy(out.mutable_data(), t.data(), t.size() * sizeof(float));
  return out;
}

InputTensor input_of(const FloatArray& a, const ConvGeometry& g) {
  return from_numpy<InputTensor>(
      a, {std::size_t(g.c_i), std::size_t(g.h), std::size_t(g.w)}, "input");
}

WeightsStandard weights_of(const FloatArray& a, const ConvGeometry& g) {
  return from_numpy<WeightsStandard>(
      a, {std::size_t(g.c_o), std::size_t(g.c_i), std::size_t(g.k_h),
          std::size_t(g.k_w)},
      "weights");
}

WeightsSMM smm_weights_of(const FloatArray& a, const ConvGeometry& g) {
  return from_numpy<WeightsSMM>(
      a, {std::size_t(g.c_i), std::size_t(g.k_w), std::size_t(g.k_h),
          std::size_t(g.c_o)},
      "smm weights");
}

// Runs `body` without the GIL, with a pool when threads > 1.
template <class F>
OutputTensor run_threaded(std::size_t threads, F body) {
  if (threads < 1) throw ShapeError("threads must be >= 1");
  py::gil_scoped_release release;
  if (threads == 1) return body(nullptr);
  WorkerPool pool(threads);
  return body(&pool);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "NCHW convolution backends: reference, im2col+GEMM, MEC and SMM";

  // Translators are tried newest first; the base class goes in first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<UnsupportedError>(m, "UnsupportedError",
                                           PyExc_NotImplementedError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<BenchError>(m, "BenchError", PyExc_RuntimeError);

  py::class_<ConvGeometry>(m, "ConvGeometry")
      .def(py::init([](int ci, int co, int h, int w, int kh, int kw, int sh,
                       int sw, int ph, int pw) {
             ConvGeometry g{ci, co, h, w, kh, kw, sh, sw, ph, pw};
             g.validate();
             return g;
           }),
           py::kw_only(), py::arg("ci"), py::arg("co"), py::arg("h"),
           py::arg("w"), py::arg("kh"), py::arg("kw"), py::arg("sh") = 1,
           py::arg("sw") = 1, py::arg("ph") = 0, py::arg("pw") = 0)
      .def_readonly("ci", &ConvGeometry::c_i)
      .def_readonly("co", &ConvGeometry::c_o)
      .def_readonly("h", &ConvGeometry::h)
      .def_readonly("w", &ConvGeometry::w)
      .def_readonly("kh", &ConvGeometry::k_h)
      .def_readonly("kw", &ConvGeometry::k_w)
      .def_readonly("sh", &ConvGeometry::s_h)
      .def_readonly("sw", &ConvGeometry::s_w)
      .def_readonly("ph", &ConvGeometry::p_h)
      .def_readonly("pw", &ConvGeometry::p_w)
      .def_property_readonly("out_h", &ConvGeometry::out_h)
      .def_property_readonly("out_w", &ConvGeometry::out_w)
      .def("__eq__", [](const ConvGeometry& a, const ConvGeometry& b) { return a == b; })
      .def("__repr__", [](const ConvGeometry& g) {
        return "ConvGeometry(" + to_string(g) + ")";
      });

  m.def("output_shape", [](const ConvGeometry& g) {
    const OutputShape s = output_shape(g);
    return py::make_tuple(s.h, s.w);
  });

  m.def("fill_deterministic",
        [](std::vector<py::ssize_t> shape, std::uint64_t seed) {
          FloatArray out(shape);
          fill_deterministic(std::span<float>(out.mutable_data(), std::size_t(out.size())),
                             seed);
          return out;
        },
        py::arg("shape"), py::arg("seed"),
        "Array of the given shape filled from the library's seeded stream.");

  m.def("conv_ref",
        [](const FloatArray& input, const FloatArray& weights, const ConvGeometry& g) {
          const auto in = input_of(input, g);
          const auto w = weights_of(weights, g);
          return to_numpy(run_threaded(1, [&](WorkerPool*) { return conv_ref(in, w, g); }));
        },
        py::arg("input"), py::arg("weights"), py::arg("geometry"));

  m.def("conv_im2col",
        [](const FloatArray& input, const FloatArray& weights, const ConvGeometry& g,
           std::size_t threads) {
          const auto in = input_of(input, g);
          const auto w = weights_of(weights, g);
          return to_numpy(run_threaded(
              threads, [&](WorkerPool* pool) { return conv_im2col(in, w, g, pool); }));
        },
        py::arg("input"), py::arg("weights"), py::arg("geometry"),
        py::arg("threads") = 1);

  m.def("conv_mec",
        [](const FloatArray& input, const FloatArray& weights, const ConvGeometry& g,
           std::size_t threads) {
          const auto in = input_of(input, g);
          const auto w = weights_of(weights, g);
          return to_numpy(run_threaded(
              threads, [&](WorkerPool* pool) { return conv_mec(in, w, g, pool); }));
        },
        py::arg("input"), py::arg("weights"), py::arg("geometry"),
        py::arg("threads") = 1);

  m.def("repack_weights",
        [](const FloatArray& weights, const ConvGeometry& g) {
          return to_numpy(repack_weights(weights_of(weights, g), g));
        },
        py::arg("weights"), py::arg("geometry"),
        "c_o x c_i x k_h x k_w -> c_i x k_w x k_h x c_o");

  m.def("unpack_weights",
        [](const FloatArray& weights, const ConvGeometry& g) {
          return to_numpy(unpack_weights(smm_weights_of(weights, g), g));
        },
        py::arg("weights"), py::arg("geometry"));

  m.def("smm_conv",
        [](const FloatArray& input, const FloatArray& smm_weights, const ConvGeometry& g,
           std::size_t threads) {
          const auto in = input_of(input, g);
          const auto w = smm_weights_of(smm_weights, g);
          return to_numpy(run_threaded(threads, [&](WorkerPool* pool) {
            return pool ? smm_conv_parallel(in, w, g, *pool) : smm_conv_single(in, w, g);
          }));
        },
        py::arg("input"), py::arg("smm_weights"), py::arg("geometry"),
        py::arg("threads") = 1,
        "SMM convolution; weights must already be in the repacked layout.");

  m.def("im2col_workspace_elements", &im2col_workspace_elements);
  m.def("mec_workspace_elements", &mec_workspace_elements);
  m.def("smm_workspace_elements", &smm_workspace_elements, py::arg("geometry"),
        py::arg("workers") = 1);
  m.def("max_rel_diff", [](const FloatArray& a, const FloatArray& b) {
    return max_rel_diff(std::span<const float>(a.data(), std::size_t(a.size())),
                        std::span<const float>(b.data(), std::size_t(b.size())));
  });

  py::class_<LayerSpec>(m, "LayerSpec")
      .def(py::init<std::string, ConvGeometry>(), py::arg("name"), py::arg("geometry"))
      .def_readonly("name", &LayerSpec::name)
      .def_readonly("geometry", &LayerSpec::geometry)
      .def("__repr__", [](const LayerSpec& s) {
        return "LayerSpec(" + s.name + ": " + to_string(s.geometry) + ")";
      });

  m.def("parse_layer_config", [](const std::string& text) { return parse_layer_config(text); });
  m.def("builtin_network", [](const std::string& name) { return builtin_network(name); });
  m.def("builtin_network_names", &builtin_network_names);
  m.def("sweep", [](const std::string& kind) { return sweep(std::string_view(kind)); });

  py::class_<BenchRecord>(m, "BenchRecord")
      .def_readonly("layer", &BenchRecord::layer)
      .def_property_readonly("backend",
                             [](const BenchRecord& r) { return std::string(backend_name(r.backend)); })
      .def_readonly("threads", &BenchRecord::threads)
      .def_readonly("repeats", &BenchRecord::repeats)
      .def_readonly("supported", &BenchRecord::supported)
      .def_readonly("median_time_s", &BenchRecord::median_time_s)
      .def_readonly("scratch_bytes", &BenchRecord::scratch_bytes)
      .def_readonly("speedup_vs_im2col", &BenchRecord::speedup_vs_im2col)
      .def_readonly("checksum", &BenchRecord::checksum);

  m.def("run_bench",
        [](const std::vector<LayerSpec>& specs, const std::string& backends,
           std::size_t repeats, std::size_t threads, std::uint64_t seed) {
          BenchOptions options;
          options.backends = parse_backend_list(backends);
          options.repeats = repeats;
          options.threads = threads;
          options.seed = seed;
          py::gil_scoped_release release;
          return run_bench(specs, options);
        },
        py::arg("specs"), py::arg("backends") = "im2col,mec,smm",
        py::arg("repeats") = 3, py::arg("threads") = 1, py::arg("seed") = 0);

  m.def("emit_csv",
        [](const std::vector<BenchRecord>& records) { return emit_csv(records); });
  m.def("parse_csv", [](const std::string& text) { return parse_csv(text); });
  m.def("default_thread_count", &default_thread_count);
}
