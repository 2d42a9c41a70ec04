#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "flare/trace.hpp"
#include "flare/volume.hpp"

namespace flare::sim {

// Hardware defaults first; the cost-model constants below them are invented.
struct CoreConfig {
  std::uint32_t M = 4;
  std::uint32_t N = 1;
  std::uint64_t sram_bytes = 32ull << 20;
  std::uint64_t fifo1_bytes = 8ull << 20;
  std::uint64_t fifo2_bytes = 32ull << 20;
  std::uint32_t pe_rows = 128;
  std::uint32_t pe_cols = 128;
  std::uint64_t global_buffer_bytes = 24ull << 20;

  double cycles_per_interp_point = 1.0;
  std::uint32_t systolic_fill = 4;
  double cycles_per_mac = 1.0;
  double neural_utilization = 0.7;
  double codec_cycles_per_symbol_enc = 2.0;
  double codec_cycles_per_symbol_dec = 4.0;
  std::uint32_t codec_lanes = 16;
  double dram_bytes_per_cycle = 64.0;

  double energy_dram_byte = 10.0;
  double energy_sram_byte = 1.0;
  double energy_mac = 0.2;

  // Throws InputError for non-positive or out-of-range values.
  void validate() const;
  bool operator==(const CoreConfig&) const = default;
};

// Applies one `key = value` override; unknown keys raise InputError.
void set_config_value(CoreConfig& cfg, const std::string& key, const std::string& value);
// Flat key=value text, '#' starts a comment.
CoreConfig parse_config(const std::string& text, CoreConfig base = {});
CoreConfig load_config(const std::filesystem::path& path, CoreConfig base = {});
std::map<std::string, std::string> config_entries(const CoreConfig& cfg);

enum class Mode : std::uint8_t { Baseline, Flare };
enum class Phase : std::uint8_t { Compress, Decompress };

enum Stage : std::size_t { kPrediction = 0, kNormalization = 1, kNeural = 2, kCodec = 3 };
inline constexpr std::size_t kStages = 4;
inline constexpr std::array<const char*, kStages> kStageNames{"prediction", "normalization", "neural", "codec"};

struct EngineStats {
  std::uint64_t busy = 0;   // cycles doing work
  std::uint64_t stall = 0;  // cycles blocked on a full output FIFO
  std::uint64_t idle = 0;   // cycles waiting for input inside the active window

  bool operator==(const EngineStats&) const = default;
};

// Bytes a stage produces, split into what stays on chip and what is
// written off chip; reads are the stage's off-chip input traffic.
struct StageLedger {
  std::uint64_t produced = 0;
  std::uint64_t onchip = 0;
  std::uint64_t offchip_writes = 0;
  std::uint64_t reads = 0;
  std::uint64_t spill = 0;

  std::uint64_t dram() const { return reads + offchip_writes + spill; }
  bool balanced() const { return produced == onchip + offchip_writes; }
  bool operator==(const StageLedger&) const = default;
};

struct SimReport {
  Mode mode = Mode::Flare;
  Phase phase = Phase::Compress;
  std::uint64_t total_cycles = 0;
  std::uint64_t compute_cycles = 0;  // engine schedule makespan
  std::uint64_t dram_cycles = 0;     // dram bytes / bandwidth
  EngineStats prediction, neural, codec;  // prediction figures are per array
  std::uint64_t bubble_cycles = 0;
  std::uint64_t fifo1_peak_bytes = 0;
  std::uint64_t fifo2_peak_bytes = 0;
  std::uint64_t sram_peak_bytes = 0;
  std::array<StageLedger, kStages> stages{};
  std::uint64_t macs = 0;
  double energy_units = 0.0;
  bool capacity_violation = false;
  std::vector<std::string> violations;

  std::uint64_t dram_bytes() const;
  std::uint64_t dram_bytes(Stage s) const { return stages[s].dram(); }
  bool operator==(const SimReport&) const = default;
};

// Deterministic for a given (trace, cfg). Throws SimulationError on an
// inconsistent trace or when no engine can make progress.
SimReport simulate(const ExecTrace& trace, const CoreConfig& cfg, Mode mode, Phase phase);

struct Comparison {
  double speedup = 0.0;        // baseline cycles / flare cycles
  double movement_ratio = 0.0;  // baseline dram bytes / flare dram bytes
};
Comparison compare(const SimReport& baseline, const SimReport& flare);

// Per-stage share (percent) of the off-chip traffic FLARE removes.
struct MovementBreakdown {
  std::array<double, kStages> share{};
  std::array<std::int64_t, kStages> saved_bytes{};
  bool zero_savings = false;
};
MovementBreakdown movement_breakdown(const SimReport& baseline, const SimReport& flare);

// Data-independent trace for a volume geometry: the schedule plus neural
// MACs for the phase and codec bits at an assumed entropy.
struct ProxySpec {
  Dims dims;
  std::size_t block_size = 32;
  int epochs = 6;
  double bits_per_symbol = 2.0;
};
ExecTrace make_proxy_trace(const ProxySpec& spec, Order order, Phase phase);

struct SweepMRow {
  std::uint32_t M = 0;
  std::uint64_t compress_cycles = 0;
  std::uint64_t decompress_cycles = 0;
  std::uint64_t prediction_busy_compress = 0;
  std::uint64_t prediction_busy_decompress = 0;
};
std::vector<SweepMRow> sweep_M(const ProxySpec& spec, const CoreConfig& cfg, const std::vector<std::uint32_t>& Ms);

struct Workload {
  std::string name;
  ProxySpec spec;
};
struct SweepNRow {
  std::uint32_t N = 0;
  std::uint64_t compress_makespan = 0;
  std::uint64_t decompress_makespan = 0;
  std::uint64_t compress_bottleneck = 0;  // largest single workload
  std::uint64_t decompress_bottleneck = 0;
  std::vector<std::vector<std::string>> compress_assignment;
};

// Longest-processing-time-first assignment of whole workloads to cores.
std::uint64_t lpt_makespan(const std::vector<std::uint64_t>& jobs, std::uint32_t cores,
                           std::vector<std::vector<std::size_t>>* assignment = nullptr);
std::vector<SweepNRow> sweep_N(const std::vector<Workload>& workloads, const CoreConfig& cfg,
                               const std::vector<std::uint32_t>& Ns);

std::string to_json(const SimReport& r, int indent = 2);
std::string sweep_m_csv(const std::vector<SweepMRow>& rows);
std::string sweep_n_csv(const std::vector<SweepNRow>& rows);

const char* to_string(Mode m);
const char* to_string(Phase p);

}  // namespace flare::sim
