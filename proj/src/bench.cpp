#include "smmconv/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include "smmconv/conv_ref.hpp"
#include "smmconv/im2col.hpp"
#include "smmconv/mec.hpp"
#include "smmconv/smm.hpp"
#include "smmconv/worker_pool.hpp"
#include "smmconv/workspace.hpp"

namespace smmconv {

namespace detail {
extern const std::pair<std::string_view, std::string_view> kNetworkPresets[];
extern const std::size_t kNetworkPresetCount;
}  // namespace detail

ConfigError::ConfigError(std::size_t line, const std::string& message)
    : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

template <class T>
bool parse_number(std::string_view text, T& value) {
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc() && ptr == end;
}

bool parse_double(std::string_view text, double& value) {
  // from_chars for double is not available on every toolchain we target.
  const std::string copy(text);
  char* end = nullptr;
  value = std::strtod(copy.c_str(), &end);
  return !copy.empty() && end == copy.c_str() + copy.size();
}

struct GeometryField {
  std::string_view key;
  int ConvGeometry::*member;
  bool required;
};

constexpr GeometryField kGeometryFields[] = {
    {"ci", &ConvGeometry::c_i, true}, {"co", &ConvGeometry::c_o, true},
    {"h", &ConvGeometry::h, true},    {"w", &ConvGeometry::w, true},
    {"kh", &ConvGeometry::k_h, true}, {"kw", &ConvGeometry::k_w, true},
    {"sh", &ConvGeometry::s_h, false}, {"sw", &ConvGeometry::s_w, false},
    {"ph", &ConvGeometry::p_h, false}, {"pw", &ConvGeometry::p_w, false},
};

LayerSpec parse_layer_line(std::string_view line, std::size_t lineno) {
  const auto toks = tokens(line);
  if (toks.front() != "layer")
    throw ConfigError(lineno, "expected 'layer', got '" +
                                  std::string(toks.front()) + "'");
  LayerSpec spec;
  bool have_name = false;
  std::map<std::string_view, bool> seen;
  for (std::size_t i = 1; i < toks.size(); ++i) {
    const auto eq = toks[i].find('=');
    if (eq == std::string_view::npos || eq == 0)
      throw ConfigError(lineno, "expected key=value, got '" +
                                    std::string(toks[i]) + "'");
    const std::string_view key = toks[i].substr(0, eq);
    const std::string_view value = toks[i].substr(eq + 1);
    if (seen[key])
      throw ConfigError(lineno, "field '" + std::string(key) + "' repeated");
    seen[key] = true;
    if (key == "name") {
      if (value.empty() || value.find(',') != std::string_view::npos)
        throw ConfigError(lineno,
                          "name must be non-empty and contain no commas");
      spec.name = std::string(value);
      have_name = true;
      continue;
    }
    const auto field =
        std::find_if(std::begin(kGeometryFields), std::end(kGeometryFields),
                     [&](const GeometryField& f) { return f.key == key; });
    if (field == std::end(kGeometryFields))
      throw ConfigError(lineno, "unknown field '" + std::string(key) + "'");
    int parsed = 0;
    if (!parse_number(value, parsed))
      throw ConfigError(lineno, "field '" + std::string(key) +
                                    "' is not an integer: '" +
                                    std::string(value) + "'");
    spec.geometry.*(field->member) = parsed;
  }
  if (!have_name) throw ConfigError(lineno, "missing field 'name'");
  for (const auto& f : kGeometryFields)
    if (f.required && !seen[f.key])
      throw ConfigError(lineno, "missing field '" + std::string(f.key) + "'");
  try {
    spec.geometry.validate();
  } catch (const ShapeError& e) {
    throw ConfigError(lineno, e.what());
  }
  return spec;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

std::string format_checksum(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

LayerSpec make_spec(std::string name, int ci, int co, int hw, int k) {
  return {std::move(name), ConvGeometry{.c_i = ci, .c_o = co, .h = hw, .w = hw,
                                        .k_h = k, .k_w = k}};
}

std::string dims(int hw) {
  return std::to_string(hw) + "x" + std::to_string(hw);
}

}  // namespace

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::Ref: return "ref";
    case Backend::Im2col: return "im2col";
    case Backend::Mec: return "mec";
    case Backend::Smm: return "smm";
  }
  return "?";
}

Backend parse_backend(std::string_view name) {
  for (Backend b : {Backend::Ref, Backend::Im2col, Backend::Mec, Backend::Smm})
    if (backend_name(b) == name) return b;
  throw Error("unknown backend '" + std::string(name) +
              "' (available: ref, im2col, mec, smm)");
}

std::vector<Backend> parse_backend_list(std::string_view list) {
  std::vector<Backend> out;
  for (auto part : split(list, ',')) {
    const Backend b = parse_backend(trim(part));
    if (std::find(out.begin(), out.end(), b) != out.end())
      throw Error("backend '" + std::string(trim(part)) + "' listed twice");
    out.push_back(b);
  }
  return out;
}

bool backend_supports(Backend backend, const ConvGeometry& geom) {
  return backend != Backend::Mec || mec_supported(geom);
}

std::size_t scratch_bytes_for(Backend backend, const ConvGeometry& geom,
                              std::size_t threads) {
  switch (backend) {
    case Backend::Ref: return 0;
    case Backend::Im2col: return sizeof(float) * im2col_workspace_elements(geom);
    case Backend::Mec: return sizeof(float) * mec_workspace_elements(geom);
    case Backend::Smm:
      return sizeof(float) * smm_workspace_elements(geom, threads);
  }
  return 0;
}

std::vector<LayerSpec> parse_layer_config(std::string_view text) {
  std::vector<LayerSpec> specs;
  std::size_t lineno = 0;
  for (auto raw : split(text, '\n')) {
    ++lineno;
    const auto hash = raw.find('#');
    const auto line = trim(raw.substr(0, hash));
    if (line.empty()) continue;
    specs.push_back(parse_layer_line(line, lineno));
  }
  return specs;
}

std::vector<LayerSpec> load_layer_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_layer_config(ss.str());
}

std::vector<std::string> builtin_network_names() {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < detail::kNetworkPresetCount; ++i)
    names.emplace_back(detail::kNetworkPresets[i].first);
  return names;
}

std::vector<LayerSpec> builtin_network(std::string_view name) {
  for (std::size_t i = 0; i < detail::kNetworkPresetCount; ++i)
    if (detail::kNetworkPresets[i].first == name)
      return parse_layer_config(detail::kNetworkPresets[i].second);
  std::string available;
  for (const auto& n : builtin_network_names())
    available += (available.empty() ? "" : ", ") + n;
  throw Error("unknown network '" + std::string(name) +
              "' (available: " + available + ")");
}

SweepKind parse_sweep_kind(std::string_view name) {
  if (name == "in_channels") return SweepKind::InChannels;
  if (name == "spatial") return SweepKind::Spatial;
  if (name == "kernel") return SweepKind::Kernel;
  if (name == "out_channels") return SweepKind::OutChannels;
  throw Error("unknown sweep '" + std::string(name) +
              "' (available: in_channels, spatial, kernel, out_channels)");
}

std::vector<LayerSpec> sweep(SweepKind kind) {
  std::vector<LayerSpec> specs;
  switch (kind) {
    case SweepKind::InChannels:
      for (int hw : {32, 64})
        for (int ci : {1, 16, 32, 64, 128, 256})
          specs.push_back(make_spec("ci" + std::to_string(ci) + "_" + dims(hw),
                                    ci, 32, hw, 3));
      break;
    case SweepKind::Spatial:
      for (int ci : {1, 32, 64})
        for (int hw : {32, 64, 128, 256, 512})
          specs.push_back(make_spec(dims(hw) + "_ci" + std::to_string(ci), ci,
                                    32, hw, 3));
      break;
    case SweepKind::Kernel:
      for (int hw : {64, 256})
        for (int k : {3, 5, 7, 9, 11, 13, 15})
          specs.push_back(make_spec("k" + std::to_string(k) + "_" + dims(hw),
                                    32, 32, hw, k));
      break;
    case SweepKind::OutChannels:
      for (int co : {1, 8, 16, 32, 64, 128})
        specs.push_back(
            make_spec("co" + std::to_string(co) + "_" + dims(256), 16, co, 256, 3));
      break;
  }
  return specs;
}

std::vector<LayerSpec> sweep(std::string_view kind) {
  return sweep(parse_sweep_kind(kind));
}

double checksum(std::span<const float> values) {
  double sum = 0.0;
  for (float v : values) sum += v;
  return sum;
}

std::vector<BenchRecord> run_bench(std::span<const LayerSpec> specs,
                                   const BenchOptions& options) {
  if (options.repeats < 3) throw BenchError("repeats must be >= 3");
  if (options.threads < 1) throw BenchError("threads must be >= 1");
  if (options.backends.empty()) throw BenchError("no backends selected");

  WorkerPool pool(options.threads);
  WorkerPool* shared = options.threads > 1 ? &pool : nullptr;
  std::vector<BenchRecord> records;

  for (const LayerSpec& spec : specs) {
    const ConvGeometry& geom = spec.geometry;
    geom.validate();
    InputTensor input = make_input(geom);
    fill_deterministic(input, options.seed);
    WeightsStandard weights = make_weights(geom);
    fill_deterministic(weights, options.seed + 1);

    const std::size_t first_record = records.size();
    for (Backend backend : options.backends) {
      BenchRecord rec;
      rec.layer = spec.name;
      rec.backend = backend;
      rec.threads = backend == Backend::Ref ? 1 : options.threads;
      rec.repeats = options.repeats;
      if (!backend_supports(backend, geom)) {
        rec.supported = false;
        records.push_back(std::move(rec));
        continue;
      }

      std::function<OutputTensor()> call;
      WeightsSMM smm_weights;
      switch (backend) {
        case Backend::Ref:
          call = [&] { return conv_ref(input, weights, geom); };
          break;
        case Backend::Im2col:
          call = [&] { return conv_im2col(input, weights, geom, shared); };
          break;
        case Backend::Mec:
          call = [&] { return conv_mec(input, weights, geom, shared); };
          break;
        case Backend::Smm:
          smm_weights = repack_weights(weights, geom);
          if (shared != nullptr)
            call = [&] { return smm_conv_parallel(input, smm_weights, geom, pool); };
          else
            call = [&] { return smm_conv_single(input, smm_weights, geom); };
          break;
      }

      {
        workspace::Probe probe;
        (void)call();
        rec.scratch_bytes = probe.read().peak_live_bytes;
      }
      const std::size_t expected =
          scratch_bytes_for(backend, geom, rec.threads);
      if (rec.scratch_bytes != expected)
        throw BenchError("layer " + spec.name + ": backend " +
                         std::string(backend_name(backend)) + " allocated " +
                         std::to_string(rec.scratch_bytes) +
                         " scratch bytes, accounting says " +
                         std::to_string(expected));

      std::vector<double> times;
      OutputTensor last;
      for (std::size_t r = 0; r < options.repeats; ++r) {
        const auto start = std::chrono::steady_clock::now();
        last = call();
        const auto stop = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double>(stop - start).count());
      }
      rec.median_time_s = median(std::move(times));
      rec.checksum = checksum(last.values());
      records.push_back(std::move(rec));
    }

    const BenchRecord* reference = nullptr;
    const BenchRecord* im2col = nullptr;
    for (std::size_t i = first_record; i < records.size(); ++i) {
      const BenchRecord& rec = records[i];
      if (!rec.supported) continue;
      if (rec.backend == Backend::Im2col) im2col = &rec;
      if (reference == nullptr) {
        reference = &rec;
        continue;
      }
      const double denom = std::max(
          {std::abs(reference->checksum), std::abs(rec.checksum), 1e-12});
      if (std::abs(rec.checksum - reference->checksum) / denom > 1e-3)
        throw BenchError(
            "layer " + spec.name + ": checksum of " +
            std::string(backend_name(rec.backend)) + " (" +
            format_checksum(rec.checksum) + ") diverges from " +
            std::string(backend_name(reference->backend)) + " (" +
            format_checksum(reference->checksum) + ")");
    }
    if (im2col != nullptr)
      for (std::size_t i = first_record; i < records.size(); ++i)
        if (records[i].supported)
          records[i].speedup_vs_im2col =
              im2col->median_time_s / records[i].median_time_s;
  }
  return records;
}

std::string emit_csv(std::span<const BenchRecord> records) {
  std::ostringstream os;
  emit_csv(records, os);
  return os.str();
}

void emit_csv(std::span<const BenchRecord> records, std::ostream& out) {
  if (records.empty()) throw Error("no benchmark records to emit");
  out << kCsvHeader << '\n';
  for (const BenchRecord& r : records) {
    out << r.layer << ',' << backend_name(r.backend) << ',' << r.threads << ','
        << r.repeats << ',';
    if (!r.supported) {
      out << "unsupported,,,\n";
      continue;
    }
    out << format_fixed(r.median_time_s, 6) << ',' << r.scratch_bytes << ','
        << (r.speedup_vs_im2col ? format_fixed(*r.speedup_vs_im2col, 4) : "")
        << ',' << format_checksum(r.checksum) << '\n';
  }
}

void write_csv(std::span<const BenchRecord> records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  emit_csv(records, out);
  out.flush();
  if (!out) throw Error("write to '" + path + "' failed");
}

std::vector<BenchRecord> parse_csv(std::string_view text) {
  std::vector<BenchRecord> records;
  std::size_t lineno = 0;
  bool header_seen = false;
  for (auto raw : split(text, '\n')) {
    ++lineno;
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kCsvHeader) throw ConfigError(lineno, "unexpected CSV header");
      header_seen = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 8) throw ConfigError(lineno, "expected 8 CSV fields");
    BenchRecord r;
    r.layer = std::string(f[0]);
    r.backend = parse_backend(f[1]);
    if (!parse_number(f[2], r.threads) || !parse_number(f[3], r.repeats))
      throw ConfigError(lineno, "bad threads/repeats field");
    if (f[4] == "unsupported") {
      r.supported = false;
      records.push_back(std::move(r));
      continue;
    }
    if (!parse_double(f[4], r.median_time_s))
      throw ConfigError(lineno, "bad median_time_s field");
    if (!parse_number(f[5], r.scratch_bytes))
      throw ConfigError(lineno, "bad scratch_bytes field");
    if (!f[6].empty()) {
      double s = 0.0;
      if (!parse_double(f[6], s))
        throw ConfigError(lineno, "bad speedup_vs_im2col field");
      r.speedup_vs_im2col = s;
    }
    if (!parse_double(f[7], r.checksum))
      throw ConfigError(lineno, "bad checksum field");
    records.push_back(std::move(r));
  }
  if (!header_seen) throw ConfigError(lineno, "missing CSV header");
  return records;
}

std::vector<BackendTotal> summarize(std::span<const BenchRecord> records) {
  std::vector<BackendTotal> totals;
  std::map<std::string, double> im2col_time;
  for (const auto& r : records)
    if (r.supported && r.backend == Backend::Im2col)
      im2col_time[r.layer] = r.median_time_s;

  for (const auto& r : records) {
    auto it = std::find_if(totals.begin(), totals.end(), [&](const auto& t) {
      return t.backend == r.backend;
    });
    if (it == totals.end()) {
      BackendTotal fresh;
      fresh.backend = r.backend;
      totals.push_back(fresh);
      it = std::prev(totals.end());
    }
    if (!r.supported) continue;
    it->total_time_s += r.median_time_s;
    const auto base = im2col_time.find(r.layer);
    if (base == im2col_time.end()) continue;
    ++it->layers;
    it->compared_time_s += r.median_time_s;
    it->im2col_time_s += base->second;
  }
  for (auto& t : totals) {
    if (t.layers > 0 && t.compared_time_s > 0.0)
      t.speedup_vs_im2col = t.im2col_time_s / t.compared_time_s;
  }
  return totals;
}

}  // namespace smmconv
