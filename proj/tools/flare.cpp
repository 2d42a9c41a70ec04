#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "flare/codec.hpp"
#include "flare/error.hpp"
#include "flare/pipeline.hpp"
#include "flare/simcore.hpp"
#include "flare/trace.hpp"
#include "flare/volume.hpp"

using nlohmann::json;
using namespace flare;

namespace {

enum Exit { kOk = 0, kVerifyFailed = 1, kIoError = 2, kInternal = 3 };

Dims parse_dims(const std::string& text) {
  Dims d;
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> d.nx >> c1 >> d.ny >> c2 >> d.nz) || c1 != ',' || c2 != ',' || !in.eof())
    throw InputError("dims must look like NX,NY,NZ, got '" + text + "'");
  if (d.count() == 0) throw DimensionError("dims must be positive");
  return d;
}

Order parse_order(const std::string& s) { return s == "bfs" ? Order::BreadthFirst : Order::LookAhead; }

json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

json dims_json(Dims d) { return {d.nx, d.ny, d.nz}; }

json outputs_of(const std::string& main, const std::string& extra) {
  json out{main};
  if (!extra.empty()) out.push_back(extra);
  return out;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

std::vector<std::uint32_t> parse_range(const std::string& text) {
  std::vector<std::uint32_t> out;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const auto lo = std::stoul(text.substr(0, dots)), hi = std::stoul(text.substr(dots + 2));
    if (lo == 0 || hi < lo) throw InputError("bad range " + text);
    for (auto v = lo; v <= hi; ++v) out.push_back(static_cast<std::uint32_t>(v));
    return out;
  }
  std::istringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    const auto v = std::stoul(tok);
    if (v == 0) throw InputError("range values must be positive");
    out.push_back(static_cast<std::uint32_t>(v));
  }
  if (out.empty()) throw InputError("empty range");
  return out;
}

struct Common {
  std::string config;
  std::vector<std::string> overrides;

  sim::CoreConfig core() const {
    sim::CoreConfig cfg;
    if (!config.empty()) cfg = sim::load_config(config);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw InputError("--set expects key=value, got " + kv);
      sim::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
  json manifest_overrides() const { return {{"config_file", config}, {"set", overrides}}; }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flare: error-bounded neural-hybrid compressor and accelerator model"};
  app.require_subcommand(1);

  std::string input, output, json_path, dims_text, order_text = "lookahead", trace_path, original, reconstructed;
  double eb = 1e-3, lr = 1e-2, factor = 1.0;
  std::size_t block = 32;
  int epochs = 6;
  std::uint64_t seed = 42;
  Common common;
  std::string mode_text = "flare", phase_text = "compress", kind = "M", range_text, workloads_text;
  double bps = 2.0;

  auto add_core = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "key=value core configuration file");
    sub->add_option("--set", common.overrides, "core configuration override key=value");
  };

  auto* comp = app.add_subcommand("compress", "compress a raw float32 volume");
  comp->add_option("input", input, "raw little-endian float32 file")->required();
  comp->add_option("-o,--out", output, "compressed stream path")->required();
  comp->add_option("--dims", dims_text, "NX,NY,NZ (z fastest)")->required();
  comp->add_option("--eb", eb, "relative error bound");
  comp->add_option("--block", block, "block edge");
  comp->add_option("--order", order_text, "lookahead or bfs")->check(CLI::IsMember({"lookahead", "bfs"}));
  comp->add_option("--epochs", epochs, "training epochs (0 disables the network)");
  comp->add_option("--lr", lr, "SGD learning rate");
  comp->add_option("--seed", seed, "network initialization seed");
  comp->add_option("--json", json_path, "metrics sidecar (default OUT.metrics.json)");
  comp->add_option("--trace", trace_path, "write the execution trace here");

  auto* dec = app.add_subcommand("decompress", "reconstruct a raw float32 volume");
  dec->add_option("input", input, "compressed stream")->required();
  dec->add_option("-o,--out", output, "raw output path")->required();
  dec->add_option("--order", order_text, "lookahead or bfs")->check(CLI::IsMember({"lookahead", "bfs"}));
  dec->add_option("--json", json_path, "metrics sidecar (default OUT.metrics.json)");
  dec->add_option("--trace", trace_path, "write the execution trace here");
  bool predictor_only = false;
  dec->add_flag("--predictor-only", predictor_only, "skip the neural enhancer");

  auto* ver = app.add_subcommand("verify", "check a reconstruction against its original");
  ver->add_option("original", original)->required();
  ver->add_option("reconstructed", reconstructed)->required();
  ver->add_option("--dims", dims_text, "NX,NY,NZ")->required();
  ver->add_option("--eb", eb, "relative error bound");
  ver->add_option("--factor", factor, "bound multiplier (2 for enhanced output)");
  ver->add_option("--json", json_path, "report path");

  auto* simc = app.add_subcommand("simulate", "run the accelerator model on a trace");
  simc->add_option("trace", trace_path, "trace file")->required();
  simc->add_option("--mode", mode_text)->check(CLI::IsMember({"baseline", "flare"}));
  simc->add_option("--phase", phase_text)->check(CLI::IsMember({"compress", "decompress"}));
  simc->add_option("--json", json_path, "report path (default stdout)");
  add_core(simc);

  auto* sweep = app.add_subcommand("sweep", "sweep arrays per core (M) or cores (N)");
  sweep->add_option("--kind", kind)->check(CLI::IsMember({"M", "N"}));
  sweep->add_option("--range", range_text, "e.g. 1..8 or 1,2,4")->required();
  sweep->add_option("--dims", dims_text, "volume for an M sweep");
  sweep->add_option("--workloads", workloads_text, "name:NX,NY,NZ;... for an N sweep");
  sweep->add_option("--block", block);
  sweep->add_option("--epochs", epochs);
  sweep->add_option("--bits-per-symbol", bps);
  sweep->add_option("--csv", output, "CSV path (default stdout)");
  add_core(sweep);

  auto* mk = app.add_subcommand("make-trace", "write a data-independent proxy trace");
  mk->add_option("--dims", dims_text)->required();
  mk->add_option("--block", block);
  mk->add_option("--order", order_text)->check(CLI::IsMember({"lookahead", "bfs"}));
  mk->add_option("--phase", phase_text)->check(CLI::IsMember({"compress", "decompress"}));
  mk->add_option("--epochs", epochs);
  mk->add_option("--bits-per-symbol", bps);
  mk->add_option("-o,--out", output)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kIoError;
  }

  try {
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    if (*comp) {
      const auto dims = parse_dims(dims_text);
      const auto v = load_volume(input, dims);
      CompressOptions opts{eb, block, 32768, parse_order(order_text), epochs, lr, seed};
      const auto r = compress(v, opts);
      write_file(output, r.bytes);
      if (!trace_path.empty()) save_trace(trace_path, r.trace);
      const json manifest{{"command", "compress"}, {"input", input},   {"dims", dims_json(dims)}, {"eb_rel", eb},
                          {"block", block},         {"seed", seed},     {"epochs", epochs},        {"lr", lr},
                          {"order", order_text},    {"outputs", outputs_of(output, trace_path)}};
      const json metrics{{"ratio", r.ratio()},
                         {"bytes", r.bytes.size()},
                         {"psnr_predictor", number_or_inf(psnr(v, r.predicted))},
                         {"psnr_enhanced", number_or_inf(psnr(v, r.enhanced))},
                         {"max_abs_err_predictor", max_abs_error(v.data(), r.predicted.data())},
                         {"max_abs_err_enhanced", max_abs_error(v.data(), r.enhanced.data())},
                         {"eb_abs", r.parts.eb_abs},
                         {"network", r.has_network},
                         {"epoch_loss", r.epoch_loss},
                         {"wall_seconds", elapsed()},
                         {"trace", trace_path},
                         {"manifest", manifest}};
      write_json(json_path.empty() ? output + ".metrics.json" : json_path, metrics);
      write_json(output + ".manifest.json", manifest);
      std::printf("compressed %s -> %s: %zu bytes, ratio %.2f, PSNR predictor %.2f dB, enhanced %.2f dB\n", input.c_str(),
                  output.c_str(), r.bytes.size(), r.ratio(), psnr(v, r.predicted), psnr(v, r.enhanced));
      return kOk;
    }

    if (*dec) {
      const auto bytes = read_file(input);
      const auto r = decompress(bytes, parse_order(order_text));
      const bool enhanced = !predictor_only && r.has_network;
      const auto& out = enhanced ? r.enhanced : r.predicted;
      store_volume(output, out);
      if (!trace_path.empty()) save_trace(trace_path, r.trace);
      const double bound = (enhanced ? 2.0 : 1.0) * r.eb_abs;
      const json manifest{{"command", "decompress"}, {"input", input},     {"order", order_text},
                          {"predictor_only", predictor_only}, {"outputs", outputs_of(output, trace_path)}};
      const json metrics{{"dims", dims_json(out.dims())},   {"eb_abs", r.eb_abs},    {"bound", bound},
                         {"enhanced", enhanced},            {"wall_seconds", elapsed()}, {"trace", trace_path},
                         {"manifest", manifest}};
      write_json(json_path.empty() ? output + ".metrics.json" : json_path, metrics);
      write_json(output + ".manifest.json", manifest);
      std::printf("decompressed %s -> %s (%zu x %zu x %zu), bound %.6g\n", input.c_str(), output.c_str(), out.dims().nx,
                  out.dims().ny, out.dims().nz, bound);
      return kOk;
    }

    if (*ver) {
      const auto dims = parse_dims(dims_text);
      const auto a = load_volume(original, dims);
      const auto b = load_volume(reconstructed, dims);
      const double bound = factor * eb * a.range();
      const double err = max_abs_error(a.data(), b.data());
      const bool pass = err <= bound;
      const json report{{"max_abs_err", err}, {"bound", bound}, {"pass", pass}, {"psnr", number_or_inf(psnr(a, b))}};
      if (!json_path.empty()) write_json(json_path, report);
      std::printf("%s: max_abs_err %.6g, bound %.6g, PSNR %s dB\n", pass ? "PASS" : "FAIL", err, bound,
                  std::isinf(psnr(a, b)) ? "inf" : std::to_string(psnr(a, b)).c_str());
      return pass ? kOk : kVerifyFailed;
    }

    if (*simc) {
      const auto trace = load_trace(trace_path);
      const auto cfg = common.core();
      const auto mode = mode_text == "baseline" ? sim::Mode::Baseline : sim::Mode::Flare;
      const auto phase = phase_text == "compress" ? sim::Phase::Compress : sim::Phase::Decompress;
      const auto report = sim::simulate(trace, cfg, mode, phase);
      const auto text = sim::to_json(report);
      if (json_path.empty()) {
        std::cout << text << '\n';
      } else {
        std::ofstream(json_path) << text << '\n';
        write_json(json_path + ".manifest.json", {{"command", "simulate"},
                                                  {"trace", trace_path},
                                                  {"mode", mode_text},
                                                  {"phase", phase_text},
                                                  {"config", common.manifest_overrides()},
                                                  {"outputs", {json_path}}});
        std::printf("%s %s: %llu cycles, %llu DRAM bytes\n", mode_text.c_str(), phase_text.c_str(),
                    static_cast<unsigned long long>(report.total_cycles),
                    static_cast<unsigned long long>(report.dram_bytes()));
      }
      return kOk;
    }

    if (*sweep) {
      const auto cfg = common.core();
      const auto range = parse_range(range_text);
      std::string csv;
      if (kind == "M") {
        if (dims_text.empty()) throw InputError("an M sweep needs --dims");
        csv = sim::sweep_m_csv(sim::sweep_M({parse_dims(dims_text), block, epochs, bps}, cfg, range));
      } else {
        std::vector<sim::Workload> wl;
        std::istringstream in(workloads_text);
        std::string tok;
        while (std::getline(in, tok, ';')) {
          const auto colon = tok.find(':');
          if (colon == std::string::npos) throw InputError("workload must be name:NX,NY,NZ, got " + tok);
          wl.push_back({tok.substr(0, colon), {parse_dims(tok.substr(colon + 1)), block, epochs, bps}});
        }
        csv = sim::sweep_n_csv(sim::sweep_N(wl, cfg, range));
      }
      if (output.empty()) {
        std::cout << csv;
      } else {
        std::ofstream(output) << csv;
        write_json(output + ".manifest.json", {{"command", "sweep"},
                                               {"kind", kind},
                                               {"range", range_text},
                                               {"dims", dims_text},
                                               {"workloads", workloads_text},
                                               {"block", block},
                                               {"epochs", epochs},
                                               {"bits_per_symbol", bps},
                                               {"config", common.manifest_overrides()},
                                               {"outputs", {output}}});
      }
      return kOk;
    }

    if (*mk) {
      const auto phase = phase_text == "compress" ? sim::Phase::Compress : sim::Phase::Decompress;
      save_trace(output, sim::make_proxy_trace({parse_dims(dims_text), block, epochs, bps}, parse_order(order_text), phase));
      return kOk;
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const CorruptStream& e) {
    std::cerr << "error: corrupt input: " << e.what() << '\n';
    return kIoError;
  } catch (const TruncatedStream& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
