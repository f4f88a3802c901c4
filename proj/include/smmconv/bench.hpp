#pragma once

// Benchmark harness: layer lists (config files, network presets, parameter
// sweeps), timed runs of each backend with scratch accounting and
// cross-backend checksums, and CSV output.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smmconv/tensor.hpp"

namespace smmconv {

/// Malformed layer config; carries the 1-based line number.
class ConfigError : public Error {
 public:
  ConfigError(std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Integrity failure while benchmarking (for example diverging checksums).
class BenchError : public Error {
 public:
  using Error::Error;
};

struct LayerSpec {
  std::string name;
  ConvGeometry geometry;
  bool operator==(const LayerSpec&) const = default;
};

enum class Backend { Ref, Im2col, Mec, Smm };

std::string_view backend_name(Backend backend);
Backend parse_backend(std::string_view name);
/// Comma-separated list, e.g. "im2col,mec,smm".
std::vector<Backend> parse_backend_list(std::string_view list);
bool backend_supports(Backend backend, const ConvGeometry& geom);
/// Scratch bytes the backend allocates for one call with `threads` workers.
std::size_t scratch_bytes_for(Backend backend, const ConvGeometry& geom,
                              std::size_t threads);

/// Parses `layer name=<label> ci= co= h= w= kh= kw= [sh= sw= ph= pw=]`
/// lines. '#' starts a comment; blank lines are skipped; sh/sw default to 1
/// and ph/pw to 0.
std::vector<LayerSpec> parse_layer_config(std::string_view text);
std::vector<LayerSpec> load_layer_config(const std::string& path);

std::vector<std::string> builtin_network_names();
/// Convolution layers of alexnet, vgg16 or yolov3 (shipped preset files).
std::vector<LayerSpec> builtin_network(std::string_view name);

enum class SweepKind { InChannels, Spatial, Kernel, OutChannels };

SweepKind parse_sweep_kind(std::string_view name);
std::vector<LayerSpec> sweep(SweepKind kind);
std::vector<LayerSpec> sweep(std::string_view kind);

struct BenchRecord {
  std::string layer;
  Backend backend = Backend::Ref;
  std::size_t threads = 1;
  std::size_t repeats = 0;
  bool supported = true;
  double median_time_s = 0.0;
  std::size_t scratch_bytes = 0;
  std::optional<double> speedup_vs_im2col;
  double checksum = 0.0;

  bool operator==(const BenchRecord&) const = default;
};

struct BenchOptions {
  std::vector<Backend> backends{Backend::Im2col, Backend::Mec, Backend::Smm};
  std::size_t repeats = 3;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
};

/// For each spec, in order: fill input (seed) and weights (seed + 1), then per
/// backend one warm-up call and `repeats` timed calls. Weight repacking is
/// outside the timed region. Throws BenchError if any backend's checksum
/// differs from the first supported backend's by more than 1e-3 relative, or
/// if measured scratch differs from scratch_bytes_for().
std::vector<BenchRecord> run_bench(std::span<const LayerSpec> specs,
                                   const BenchOptions& options);

/// Sum of output elements, accumulated in double.
double checksum(std::span<const float> values);

inline constexpr std::string_view kCsvHeader =
    "layer,backend,threads,repeats,median_time_s,scratch_bytes,"
    "speedup_vs_im2col,checksum";

std::string emit_csv(std::span<const BenchRecord> records);
void emit_csv(std::span<const BenchRecord> records, std::ostream& out);
void write_csv(std::span<const BenchRecord> records, const std::string& path);
std::vector<BenchRecord> parse_csv(std::string_view text);

struct BackendTotal {
  Backend backend = Backend::Ref;
  double total_time_s = 0.0;     // all specs this backend ran
  std::size_t layers = 0;        // specs where both this backend and im2col ran
  double compared_time_s = 0.0;  // this backend, over those specs
  double im2col_time_s = 0.0;    // im2col, over those specs
  std::optional<double> speedup_vs_im2col;
};

/// Whole-list totals per backend. The speedup is summed im2col medians over
/// summed backend medians, restricted to specs where both ran.
std::vector<BackendTotal> summarize(std::span<const BenchRecord> records);

}  // namespace smmconv
