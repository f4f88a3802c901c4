// smmconv: run one convolution, or benchmark backends over layer lists.
//
//   smmconv conv --backend smm --ci 64 --co 64 --h 56 --w 56 --kh 3 --kw 3 \
//                --ph 1 --pw 1 --threads 4
//   smmconv bench --network vgg16 --backends im2col,mec,smm --out vgg16.csv
//
// Data goes to stdout (or --out), diagnostics to stderr as a single line.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "smmconv/bench.hpp"
#include "smmconv/conv_ref.hpp"
#include "smmconv/im2col.hpp"
#include "smmconv/mec.hpp"
#include "smmconv/smm.hpp"
#include "smmconv/worker_pool.hpp"
#include "smmconv/workspace.hpp"

namespace {

using namespace smmconv;

struct ConvArgs {
  std::string backend = "smm";
  ConvGeometry geom;
  std::size_t threads = default_thread_count();
  std::uint64_t seed = 0;
};

struct BenchArgs {
  std::string network;
  std::string config;
  std::string sweep;
  std::string backends = "im2col,mec,smm";
  std::size_t repeats = 3;
  std::size_t threads = default_thread_count();
  std::uint64_t seed = 0;
  std::string out;
};

int run_conv(const ConvArgs& args) {
  const Backend backend = parse_backend(args.backend);
  const ConvGeometry& geom = args.geom;
  geom.validate();
  if (args.threads < 1) throw Error("threads must be >= 1");
  if (!backend_supports(backend, geom)) mec_check_supported(geom);

  InputTensor input = make_input(geom);
  fill_deterministic(input, args.seed);
  WeightsStandard weights = make_weights(geom);
  fill_deterministic(weights, args.seed + 1);

  WorkerPool pool(backend == Backend::Ref ? 1 : args.threads);
  WorkerPool* shared = pool.size() > 1 ? &pool : nullptr;
  WeightsSMM smm_weights;
  if (backend == Backend::Smm) smm_weights = repack_weights(weights, geom);

  workspace::Probe probe;
  OutputTensor out;
  switch (backend) {
    case Backend::Ref: out = conv_ref(input, weights, geom); break;
    case Backend::Im2col: out = conv_im2col(input, weights, geom, shared); break;
    case Backend::Mec: out = conv_mec(input, weights, geom, shared); break;
    case Backend::Smm:
      out = shared ? smm_conv_parallel(input, smm_weights, geom, pool)
                   : smm_conv_single(input, smm_weights, geom);
      break;
  }
  const auto used = probe.read();

  char sum[64];
  std::snprintf(sum, sizeof sum, "%.9g", checksum(out.values()));
  std::cout << "backend=" << backend_name(backend) << " threads=" << pool.size()
            << " out_h=" << geom.out_h() << " out_w=" << geom.out_w()
            << " checksum=" << sum << " scratch_bytes=" << used.peak_live_bytes
            << '\n';
  return 0;
}

int run_bench_command(const BenchArgs& args) {
  const int sources = int(!args.network.empty()) + int(!args.config.empty()) +
                      int(!args.sweep.empty());
  if (sources != 1)
    throw Error("bench needs exactly one of --network, --config, --sweep");

  std::vector<LayerSpec> specs;
  if (!args.network.empty()) specs = builtin_network(args.network);
  if (!args.config.empty()) specs = load_layer_config(args.config);
  if (!args.sweep.empty()) specs = sweep(args.sweep);
  if (specs.empty()) throw Error("no layers to benchmark");

  BenchOptions options;
  options.backends = parse_backend_list(args.backends);
  options.repeats = args.repeats;
  options.threads = args.threads;
  options.seed = args.seed;
  std::cerr << "smmconv: benchmarking " << specs.size() << " layers, threads="
            << options.threads << ", repeats=" << options.repeats << '\n';

  const auto records = run_bench(specs, options);
  if (args.out.empty()) {
    emit_csv(records, std::cout);
    return 0;
  }
  write_csv(records, args.out);
  for (const auto& total : summarize(records)) {
    char line[160];
    if (total.speedup_vs_im2col)
      std::snprintf(line, sizeof line, "%-8s total %.6f s  speedup %.4f",
                    std::string(backend_name(total.backend)).c_str(),
                    total.total_time_s, *total.speedup_vs_im2col);
    else
      std::snprintf(line, sizeof line, "%-8s total %.6f s",
                    std::string(backend_name(total.backend)).c_str(),
                    total.total_time_s);
    std::cout << line << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SMM convolution kernels and benchmark harness", "smmconv"};
  app.require_subcommand(1);
  // "-h" is taken by --h (input height).
  app.set_help_flag("--help", "Print this help message and exit");

  ConvArgs conv;
  auto* conv_cmd = app.add_subcommand("conv", "Run one convolution");
  conv_cmd->set_help_flag("--help", "Print this help message and exit");
  conv_cmd->add_option("--backend", conv.backend, "ref|im2col|mec|smm")
      ->capture_default_str();
  conv_cmd->add_option("--ci", conv.geom.c_i, "Input channels")->required();
  conv_cmd->add_option("--co", conv.geom.c_o, "Output channels")->required();
  conv_cmd->add_option("--h", conv.geom.h, "Input height")->required();
  conv_cmd->add_option("--w", conv.geom.w, "Input width")->required();
  conv_cmd->add_option("--kh", conv.geom.k_h, "Kernel height")->required();
  conv_cmd->add_option("--kw", conv.geom.k_w, "Kernel width")->required();
  conv_cmd->add_option("--sh", conv.geom.s_h, "Vertical stride");
  conv_cmd->add_option("--sw", conv.geom.s_w, "Horizontal stride");
  conv_cmd->add_option("--ph", conv.geom.p_h, "Vertical padding");
  conv_cmd->add_option("--pw", conv.geom.p_w, "Horizontal padding");
  conv_cmd->add_option("--threads", conv.threads, "Worker threads")
      ->capture_default_str();
  conv_cmd->add_option("--seed", conv.seed, "Fill seed")->capture_default_str();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Benchmark backends");
  bench_cmd->add_option("--network", bench.network, "alexnet|vgg16|yolov3");
  bench_cmd->add_option("--config", bench.config, "Layer config file");
  bench_cmd->add_option("--sweep", bench.sweep,
                        "in_channels|spatial|kernel|out_channels");
  bench_cmd->add_option("--backends", bench.backends, "Comma-separated list")
      ->capture_default_str();
  bench_cmd->add_option("--repeats", bench.repeats, "Timed runs per backend")
      ->capture_default_str();
  bench_cmd->add_option("--threads", bench.threads, "Worker threads")
      ->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed, "Fill seed")->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "CSV destination (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "smmconv: error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (conv_cmd->parsed()) return run_conv(conv);
    return run_bench_command(bench);
  } catch (const std::exception& e) {
    std::cerr << "smmconv: error: " << e.what() << '\n';
    return 1;
  }
}
