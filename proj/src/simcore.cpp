#include "flare/simcore.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <variant>

#include "json.hpp"

#include "flare/error.hpp"
#include "flare/neural.hpp"
#include "flare/predictor.hpp"

namespace flare::sim {

namespace {

constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

using Field = std::variant<std::uint32_t CoreConfig::*, std::uint64_t CoreConfig::*, double CoreConfig::*>;

const std::vector<std::pair<const char*, Field>>& config_fields() {
  static const std::vector<std::pair<const char*, Field>> fields{
      {"M", &CoreConfig::M},
      {"N", &CoreConfig::N},
      {"sram_bytes", &CoreConfig::sram_bytes},
      {"fifo1_bytes", &CoreConfig::fifo1_bytes},
      {"fifo2_bytes", &CoreConfig::fifo2_bytes},
      {"pe_rows", &CoreConfig::pe_rows},
      {"pe_cols", &CoreConfig::pe_cols},
      {"global_buffer_bytes", &CoreConfig::global_buffer_bytes},
      {"cycles_per_interp_point", &CoreConfig::cycles_per_interp_point},
      {"systolic_fill", &CoreConfig::systolic_fill},
      {"cycles_per_mac", &CoreConfig::cycles_per_mac},
      {"neural_utilization", &CoreConfig::neural_utilization},
      {"codec_cycles_per_symbol_enc", &CoreConfig::codec_cycles_per_symbol_enc},
      {"codec_cycles_per_symbol_dec", &CoreConfig::codec_cycles_per_symbol_dec},
      {"codec_lanes", &CoreConfig::codec_lanes},
      {"dram_bytes_per_cycle", &CoreConfig::dram_bytes_per_cycle},
      {"energy_dram_byte", &CoreConfig::energy_dram_byte},
      {"energy_sram_byte", &CoreConfig::energy_sram_byte},
      {"energy_mac", &CoreConfig::energy_mac},
  };
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) throw InputError("bad value '" + text + "' for config key " + key);
  return v;
}

std::uint64_t cost(double units, double per_unit) { return static_cast<std::uint64_t>(std::ceil(units * per_unit)); }

}  // namespace

void CoreConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError(std::string("config value ") + name + " must be positive");
  };
  for (const auto& [name, field] : config_fields())
    std::visit([&](auto member) { positive(static_cast<double>(this->*member), name); }, field);
  if (neural_utilization > 1.0) throw InputError("neural_utilization must be in (0, 1]");
}

void set_config_value(CoreConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, field] : config_fields()) {
    if (key != name) continue;
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(cfg.*member)>;
          cfg.*member = parse_number<T>(key, value);
        },
        field);
    return;
  }
  throw InputError("unknown config key " + key);
}

CoreConfig parse_config(const std::string& text, CoreConfig cfg) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError("config line " + std::to_string(lineno) + " is not key=value");
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

CoreConfig load_config(const std::filesystem::path& path, CoreConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base);
}

std::map<std::string, std::string> config_entries(const CoreConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& [name, field] : config_fields())
    std::visit(
        [&](auto member) {
          std::ostringstream ss;
          ss << cfg.*member;
          out[name] = ss.str();
        },
        field);
  return out;
}

const char* to_string(Mode m) { return m == Mode::Baseline ? "baseline" : "flare"; }
const char* to_string(Phase p) { return p == Phase::Compress ? "compress" : "decompress"; }

std::uint64_t SimReport::dram_bytes() const {
  std::uint64_t n = 0;
  for (const auto& s : stages) n += s.dram();
  return n;
}

namespace {

struct Item {
  std::uint32_t level = 0, block = 0;
  std::uint64_t points = 0, passes = 0, symbols = 0, bits = 0;
};

// The trace reduced to what the cost model needs.
struct Digest {
  const ExecTrace* trace = nullptr;
  BlockGrid grid;
  std::vector<std::uint64_t> anchors;  // per block
  std::uint64_t anchor_points = 0, code_points = 0, payload_bits = 0, macs = 0;
  std::vector<std::uint64_t> level_points;  // indexed by level
  std::vector<Item> items;
  std::uint64_t volume_bytes() const { return (anchor_points + code_points) * sizeof(float); }
  std::uint64_t payload_bytes() const { return (payload_bits + 7) / 8; }
};

Digest digest(const ExecTrace& t) {
  Digest w;
  w.trace = &t;
  if (t.events.empty()) return w;
  w.grid = partition_blocks(t.dims, t.block_size);
  w.anchors.assign(w.grid.blocks.size(), 0);
  w.level_points.assign(t.levels + 1, 0);
  bool open = false;
  for (const auto& e : t.events) {
    if (e.block >= w.grid.blocks.size()) throw SimulationError("trace references block " + std::to_string(e.block) + " outside the grid");
    switch (e.kind) {
      case EventKind::LoadAnchors:
        w.anchors[e.block] += e.a;
        w.anchor_points += e.a;
        break;
      case EventKind::PredictBatch:
        if (open) throw SimulationError("PredictBatch without matching CodecSymbols");
        if (e.level < 1 || e.level > t.levels) throw SimulationError("PredictBatch level out of range");
        w.items.push_back({e.level, e.block, e.a, e.b, 0, 0});
        w.code_points += e.a;
        w.level_points[e.level] += e.a;
        open = true;
        break;
      case EventKind::CodecSymbols: {
        if (!open || w.items.back().block != e.block || w.items.back().level != e.level)
          throw SimulationError("CodecSymbols does not follow its PredictBatch");
        w.items.back().symbols = e.a;
        w.items.back().bits = e.b;
        w.payload_bits += e.b;
        open = false;
        break;
      }
      case EventKind::NeuralSlice:
        w.macs += e.b;
        break;
      default:
        break;
    }
  }
  if (open) throw SimulationError("trace ends inside a PredictBatch");
  if (w.volume_bytes() != t.dims.count() * sizeof(float))
    throw SimulationError("trace does not cover the volume: " + std::to_string(w.anchor_points + w.code_points) +
                          " of " + std::to_string(t.dims.count()) + " points");
  return w;
}

// Bytes of reference lattice read while predicting every level, one read
// per known point per level.
std::uint64_t reference_bytes(const Digest& w) {
  std::uint64_t known = w.anchor_points, total = 0;
  for (std::uint32_t level = w.trace->levels; level >= 1; --level) {
    total += known;
    known += w.level_points[level];
  }
  return total * sizeof(float);
}

void fill_ledger(SimReport& r, const Digest& w, Mode mode, Phase phase) {
  auto& pred = r.stages[kPrediction];
  auto& norm = r.stages[kNormalization];
  auto& neural = r.stages[kNeural];
  auto& codec = r.stages[kCodec];
  const std::uint64_t V = w.volume_bytes();
  const std::uint64_t codes = w.code_points * sizeof(std::uint32_t);
  const std::uint64_t anchors = w.anchor_points * sizeof(float);
  const std::uint64_t payload = w.payload_bytes();
  const bool has_neural = w.macs > 0;
  if (V == 0) return;

  if (phase == Phase::Compress) {
    pred.reads = V;  // originals
    pred.produced = V + codes + anchors;
    codec.reads = 0;
    codec.produced = codec.offchip_writes = payload;
    if (mode == Mode::Baseline) {
      pred.reads += reference_bytes(w);
      pred.offchip_writes = pred.produced;
      codec.reads = codes;
      if (has_neural) {
        norm.reads = 3 * V;  // extrema sweep, normalize recon, normalize targets
        norm.produced = norm.offchip_writes = 2 * V;
        neural.reads = V;
      }
    } else {
      pred.onchip = V + codes;
      pred.offchip_writes = anchors;
    }
  } else {
    codec.reads = payload;
    codec.produced = codes;
    pred.reads = anchors;
    pred.produced = V;
    if (has_neural) neural.produced = neural.offchip_writes = V;
    if (mode == Mode::Baseline) {
      codec.offchip_writes = codes;
      pred.reads += codes + reference_bytes(w);
      pred.offchip_writes = V;
      if (has_neural) {
        norm.reads = 3 * V;  // extrema sweep, normalize, denormalize
        norm.produced = norm.offchip_writes = 2 * V;
        neural.reads = V;
      }
    } else {
      codec.onchip = codes;
      if (has_neural) {
        pred.onchip = V;
      } else {
        pred.offchip_writes = V;
      }
    }
  }
}

// FIFO whose pushes arrive in non-decreasing time order. Entries leave at
// their free time; an unknown free time blocks forever.
class Fifo {
 public:
  Fifo(const char* name, std::uint64_t capacity) : name_(name), cap_(capacity) {}

  // Earliest time >= t0 at which `bytes` fit. Throws on deadlock.
  std::uint64_t earliest(std::uint64_t t0, std::uint64_t bytes) const {
    if (bytes > cap_)
      throw SimulationError(std::string(name_) + ": work item of " + std::to_string(bytes) +
                            " bytes exceeds capacity " + std::to_string(cap_));
    std::vector<std::uint64_t> times{t0};
    for (const auto& e : live_)
      if (e.free != kNever && e.free > t0) times.push_back(e.free);
    std::sort(times.begin(), times.end());
    for (auto t : times)
      if (occupancy(t) + bytes <= cap_) return t;
    throw SimulationError(std::string(name_) + " deadlock: " + std::to_string(occupancy(times.back())) +
                          " bytes held by consumers that have not been scheduled, producer needs " +
                          std::to_string(bytes));
  }

  std::size_t push(std::uint64_t t, std::uint64_t bytes) {
    std::erase_if(live_, [t](const Entry& e) { return e.free <= t; });
    live_.push_back({next_id_, bytes, kNever});
    peak_ = std::max(peak_, occupancy(t));
    return next_id_++;
  }

  void release(std::size_t id, std::uint64_t t) {
    for (auto& e : live_)
      if (e.id == id) e.free = t;
  }

  std::uint64_t peak() const { return peak_; }

 private:
  struct Entry {
    std::size_t id;
    std::uint64_t bytes, free;
  };
  std::uint64_t occupancy(std::uint64_t t) const {
    std::uint64_t n = 0;
    for (const auto& e : live_)
      if (e.free > t) n += e.bytes;
    return n;
  }
  const char* name_;
  std::uint64_t cap_;
  std::vector<Entry> live_;
  std::size_t next_id_ = 0;
  std::uint64_t peak_ = 0;
};

// Single in-order server with busy/idle/stall accounting.
struct Server {
  std::uint64_t free = 0, busy = 0, idle = 0, stall = 0;
  bool started = false;

  std::uint64_t run(std::uint64_t ready, std::uint64_t c) {
    const auto start = std::max(free, ready);
    if (started) idle += start - free;
    started = true;
    busy += c;
    free = start + c;
    return start;
  }
};

class Engines {
 public:
  Engines(const Digest& w, const CoreConfig& cfg)
      : w_(w), cfg_(cfg), arrays_(cfg.M), block_ready_(w.grid.blocks.size(), 0), block_array_(w.grid.blocks.size(), 0) {}

  std::uint64_t pred_cost(const Item& it) const {
    return cost(static_cast<double>(it.points), cfg_.cycles_per_interp_point) + cfg_.systolic_fill * it.passes;
  }
  std::uint64_t codec_cost(const Item& it, Phase phase) const {
    const double per = phase == Phase::Compress ? cfg_.codec_cycles_per_symbol_enc : cfg_.codec_cycles_per_symbol_dec;
    return cost(static_cast<double>(it.symbols), per / cfg_.codec_lanes);
  }
  std::uint64_t neural_cost(std::uint64_t macs) const {
    const double rate = static_cast<double>(cfg_.pe_rows) * cfg_.pe_cols * cfg_.neural_utilization;
    return cost(static_cast<double>(macs), cfg_.cycles_per_mac / rate);
  }

  // Places an item on the earliest free array, in issue order.
  std::uint64_t issue(const Item& it, std::uint64_t ready, const std::function<std::uint64_t(std::uint64_t)>& gate) {
    const auto a = static_cast<std::size_t>(
        std::min_element(arrays_.begin(), arrays_.end(), [](const Server& x, const Server& y) { return x.free < y.free; }) -
        arrays_.begin());
    const auto t0 = std::max({arrays_[a].free, block_ready_[it.block], last_issue_, ready});
    const auto t = gate ? gate(t0) : t0;
    arrays_[a].stall += t - t0;
    const auto start = arrays_[a].run(t, pred_cost(it));
    last_issue_ = start;
    block_ready_[it.block] = arrays_[a].free;
    block_array_[it.block] = a;
    return start;
  }

  // Holds the array that finished `block` until time t.
  void hold(std::uint32_t block, std::uint64_t t) {
    auto& arr = arrays_[block_array_[block]];
    if (t > arr.free) {
      arr.stall += t - arr.free;
      arr.free = t;
    }
  }

  std::uint64_t block_ready(std::uint32_t b) const { return block_ready_[b]; }

  std::uint64_t makespan() const {
    std::uint64_t m = 0;
    for (const auto& a : arrays_) m = std::max(m, a.free);
    return m;
  }

  EngineStats array_stats(std::uint64_t total) const {
    EngineStats s;
    std::uint64_t busy = 0, stall = 0;
    for (const auto& a : arrays_) {
      busy += a.busy;
      stall += a.stall;
    }
    s.busy = busy / cfg_.M;
    s.stall = stall / cfg_.M;
    s.idle = total - s.busy - s.stall;
    return s;
  }

  const Digest& w_;
  const CoreConfig& cfg_;
  std::vector<Server> arrays_;
  std::vector<std::uint64_t> block_ready_;
  std::vector<std::size_t> block_array_;
  std::uint64_t last_issue_ = 0;
};

EngineStats finish(const Server& s, std::uint64_t total) {
  EngineStats e;
  e.busy = s.busy;
  e.stall = s.stall;
  e.idle = total - s.busy - s.stall;
  return e;
}

SimReport run_flare(const Digest& w, const CoreConfig& cfg, Phase phase) {
  SimReport r;
  Engines eng(w, cfg);
  Server codec, neural;
  Fifo fifo1("FIFO1", cfg.fifo1_bytes), fifo2("FIFO2", cfg.fifo2_bytes);
  std::uint64_t last_forward = 0;
  std::map<std::size_t, std::vector<std::size_t>> slab_entries;
  std::size_t item_index = 0;

  struct Batch {
    std::size_t slab = 0;
    std::uint64_t ready = 0, done = 0;
    bool open = false;
  } batch;
  auto close_batch = [&] {
    if (!batch.open) return;
    for (auto id : slab_entries[batch.slab]) fifo2.release(id, batch.done);
    slab_entries.erase(batch.slab);
    batch.open = false;
  };

  for (const auto& e : w.trace->events) {
    if (e.kind != EventKind::NeuralSlice) close_batch();
    switch (e.kind) {
      case EventKind::CodecSymbols: {
        const Item& it = w.items[item_index++];
        const auto bytes = it.points * sizeof(std::uint32_t);
        if (phase == Phase::Compress) {
          auto gate = [&](std::uint64_t t0) { return fifo1.earliest(t0, bytes); };
          const auto start = eng.issue(it, 0, gate);
          const auto id = fifo1.push(start, bytes);
          codec.run(eng.block_ready(it.block), eng.codec_cost(it, phase));
          fifo1.release(id, codec.free);
        } else {
          const auto t = fifo1.earliest(codec.free, bytes);
          codec.stall += t - codec.free;
          const auto start = codec.run(t, eng.codec_cost(it, phase));
          const auto id = fifo1.push(start, bytes);
          const auto pstart = eng.issue(it, codec.free, nullptr);
          fifo1.release(id, pstart);
        }
        break;
      }
      case EventKind::Forward: {
        const auto t0 = std::max(eng.block_ready(e.block), last_forward);
        const auto t = fifo2.earliest(t0, e.a);
        eng.hold(e.block, t);
        last_forward = t;
        slab_entries[w.grid.blocks[e.block].origin[0] / w.grid.block_size].push_back(fifo2.push(t, e.a));
        break;
      }
      case EventKind::EmitSliceBatch:
        batch = {e.a / w.grid.block_size, last_forward, last_forward, true};
        break;
      case EventKind::NeuralSlice:
        if (!batch.open) throw SimulationError("NeuralSlice outside a slice batch");
        neural.run(batch.ready, eng.neural_cost(e.b));
        batch.done = neural.free;
        break;
      default:
        break;
    }
  }
  close_batch();

  r.compute_cycles = std::max({eng.makespan(), codec.free, neural.free, last_forward});
  r.fifo1_peak_bytes = fifo1.peak();
  r.fifo2_peak_bytes = fifo2.peak();
  fill_ledger(r, w, Mode::Flare, phase);
  r.sram_peak_bytes = peak_working_set(*w.trace);
  if (r.sram_peak_bytes > cfg.sram_bytes) {
    r.capacity_violation = true;
    r.violations.push_back("prediction working set " + std::to_string(r.sram_peak_bytes) + " B exceeds sram_bytes " +
                           std::to_string(cfg.sram_bytes) + " B; excess spilled off chip");
    r.stages[kPrediction].spill = 2 * (r.sram_peak_bytes - cfg.sram_bytes);
  }
  r.dram_cycles = cost(static_cast<double>(r.dram_bytes()), 1.0 / cfg.dram_bytes_per_cycle);
  r.total_cycles = std::max(r.compute_cycles, r.dram_cycles);
  r.prediction = eng.array_stats(r.total_cycles);
  r.codec = finish(codec, r.total_cycles);
  r.neural = finish(neural, r.total_cycles);
  return r;
}

SimReport run_baseline(const Digest& w, const CoreConfig& cfg, Phase phase) {
  SimReport r;
  Engines eng(w, cfg);
  std::uint64_t codec_busy = 0, neural_busy = 0;
  for (const auto& it : w.items) {
    eng.issue(it, 0, nullptr);
    codec_busy += eng.codec_cost(it, phase);
  }
  for (const auto& e : w.trace->events)
    if (e.kind == EventKind::NeuralSlice) neural_busy += eng.neural_cost(e.b);
  fill_ledger(r, w, Mode::Baseline, phase);
  const auto dram = [&](Stage s) { return cost(static_cast<double>(r.stages[s].dram()), 1.0 / cfg.dram_bytes_per_cycle); };
  const std::uint64_t pred_busy = eng.makespan();
  const std::array<std::uint64_t, kStages> busy{pred_busy, 0, neural_busy, codec_busy};
  std::uint64_t total = 0;
  for (std::size_t s = 0; s < kStages; ++s) {
    total += std::max(busy[s], dram(static_cast<Stage>(s)));
    r.compute_cycles += busy[s];
    r.dram_cycles += dram(static_cast<Stage>(s));
  }
  r.total_cycles = total;
  r.sram_peak_bytes = peak_working_set(*w.trace);
  r.prediction = eng.array_stats(total);
  r.codec = {codec_busy, 0, total - codec_busy};
  r.neural = {neural_busy, 0, total - neural_busy};
  return r;
}

}  // namespace

SimReport simulate(const ExecTrace& trace, const CoreConfig& cfg, Mode mode, Phase phase) {
  cfg.validate();
  SimReport r;
  if (!trace.events.empty()) {
    const auto w = digest(trace);
    r = mode == Mode::Flare ? run_flare(w, cfg, phase) : run_baseline(w, cfg, phase);
    r.macs = w.macs;
  }
  r.mode = mode;
  r.phase = phase;
  r.bubble_cycles = r.prediction.idle + r.codec.idle + r.neural.idle;
  std::uint64_t onchip = 0;
  for (const auto& s : r.stages) onchip += s.onchip;
  r.energy_units = cfg.energy_dram_byte * static_cast<double>(r.dram_bytes()) +
                   cfg.energy_sram_byte * 2.0 * static_cast<double>(onchip) + cfg.energy_mac * static_cast<double>(r.macs);
  return r;
}

Comparison compare(const SimReport& baseline, const SimReport& flare) {
  Comparison c;
  if (flare.total_cycles > 0) c.speedup = static_cast<double>(baseline.total_cycles) / static_cast<double>(flare.total_cycles);
  if (flare.dram_bytes() > 0)
    c.movement_ratio = static_cast<double>(baseline.dram_bytes()) / static_cast<double>(flare.dram_bytes());
  return c;
}

MovementBreakdown movement_breakdown(const SimReport& baseline, const SimReport& flare) {
  MovementBreakdown m;
  std::int64_t total = 0;
  for (std::size_t s = 0; s < kStages; ++s) {
    m.saved_bytes[s] = static_cast<std::int64_t>(baseline.stages[s].dram()) - static_cast<std::int64_t>(flare.stages[s].dram());
    total += m.saved_bytes[s];
  }
  if (total <= 0) {
    m.zero_savings = true;
    return m;
  }
  for (std::size_t s = 0; s < kStages; ++s) m.share[s] = 100.0 * static_cast<double>(m.saved_bytes[s]) / static_cast<double>(total);
  return m;
}

ExecTrace make_proxy_trace(const ProxySpec& spec, Order order, Phase phase) {
  const auto grid = partition_blocks(spec.dims, spec.block_size);
  ScheduleOptions opts;
  const std::uint64_t inference = nn::macs_per_pixel() * spec.dims.ny * spec.dims.nz;
  opts.neural_macs_per_slice = phase == Phase::Compress ? 3 * static_cast<std::uint64_t>(spec.epochs) * inference : inference;
  auto t = build_schedule(grid, order, opts);
  for (auto& e : t.events)
    if (e.kind == EventKind::CodecSymbols) e.b = static_cast<std::uint64_t>(std::llround(static_cast<double>(e.a) * spec.bits_per_symbol));
  return t;
}

std::vector<SweepMRow> sweep_M(const ProxySpec& spec, const CoreConfig& cfg, const std::vector<std::uint32_t>& Ms) {
  if (Ms.empty()) throw InputError("M range is empty");
  const auto ct = make_proxy_trace(spec, Order::LookAhead, Phase::Compress);
  const auto dt = make_proxy_trace(spec, Order::LookAhead, Phase::Decompress);
  std::vector<SweepMRow> rows;
  for (auto M : Ms) {
    CoreConfig c = cfg;
    c.M = M;
    const auto rc = simulate(ct, c, Mode::Flare, Phase::Compress);
    const auto rd = simulate(dt, c, Mode::Flare, Phase::Decompress);
    rows.push_back({M, rc.total_cycles, rd.total_cycles, rc.prediction.busy, rd.prediction.busy});
  }
  return rows;
}

std::uint64_t lpt_makespan(const std::vector<std::uint64_t>& jobs, std::uint32_t cores,
                           std::vector<std::vector<std::size_t>>* assignment) {
  if (cores == 0) throw InputError("core count must be positive");
  std::vector<std::size_t> order(jobs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return jobs[a] > jobs[b]; });
  std::vector<std::uint64_t> load(cores, 0);
  if (assignment) assignment->assign(cores, {});
  for (auto j : order) {
    const auto c = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    load[c] += jobs[j];
    if (assignment) (*assignment)[c].push_back(j);
  }
  return *std::max_element(load.begin(), load.end());
}

std::vector<SweepNRow> sweep_N(const std::vector<Workload>& workloads, const CoreConfig& cfg,
                               const std::vector<std::uint32_t>& Ns) {
  if (Ns.empty()) throw InputError("N range is empty");
  if (workloads.empty()) throw InputError("no workloads given");
  std::vector<std::uint64_t> comp, decomp;
  for (const auto& wl : workloads) {
    comp.push_back(simulate(make_proxy_trace(wl.spec, Order::LookAhead, Phase::Compress), cfg, Mode::Flare, Phase::Compress).total_cycles);
    decomp.push_back(
        simulate(make_proxy_trace(wl.spec, Order::LookAhead, Phase::Decompress), cfg, Mode::Flare, Phase::Decompress).total_cycles);
  }
  std::vector<SweepNRow> rows;
  for (auto N : Ns) {
    SweepNRow row;
    row.N = N;
    std::vector<std::vector<std::size_t>> assign;
    row.compress_makespan = lpt_makespan(comp, N, &assign);
    row.decompress_makespan = lpt_makespan(decomp, N);
    row.compress_bottleneck = *std::max_element(comp.begin(), comp.end());
    row.decompress_bottleneck = *std::max_element(decomp.begin(), decomp.end());
    for (const auto& core : assign) {
      row.compress_assignment.emplace_back();
      for (auto j : core) row.compress_assignment.back().push_back(workloads[j].name);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string to_json(const SimReport& r, int indent) {
  using nlohmann::json;
  auto engine = [](const EngineStats& e) { return json{{"busy", e.busy}, {"stall", e.stall}, {"idle", e.idle}}; };
  json stages = json::object();
  for (std::size_t s = 0; s < kStages; ++s) {
    const auto& l = r.stages[s];
    stages[kStageNames[s]] = {{"dram_bytes", l.dram()},     {"reads", l.reads},       {"produced", l.produced},
                              {"onchip", l.onchip},         {"offchip_writes", l.offchip_writes},
                              {"spill", l.spill},           {"balanced", l.balanced()}};
  }
  json j{{"mode", to_string(r.mode)},
         {"phase", to_string(r.phase)},
         {"total_cycles", r.total_cycles},
         {"compute_cycles", r.compute_cycles},
         {"dram_cycles", r.dram_cycles},
         {"engines", {{"prediction", engine(r.prediction)}, {"neural", engine(r.neural)}, {"codec", engine(r.codec)}}},
         {"bubble_cycles", r.bubble_cycles},
         {"fifo1_peak_bytes", r.fifo1_peak_bytes},
         {"fifo2_peak_bytes", r.fifo2_peak_bytes},
         {"sram_peak_bytes", r.sram_peak_bytes},
         {"dram_bytes", r.dram_bytes()},
         {"stages", stages},
         {"macs", r.macs},
         {"energy_units", r.energy_units},
         {"capacity_violation", r.capacity_violation},
         {"violations", r.violations}};
  return j.dump(indent);
}

std::string sweep_m_csv(const std::vector<SweepMRow>& rows) {
  std::ostringstream ss;
  ss << "M,compress_cycles,decompress_cycles,prediction_busy_compress,prediction_busy_decompress\n";
  for (const auto& r : rows)
    ss << r.M << ',' << r.compress_cycles << ',' << r.decompress_cycles << ',' << r.prediction_busy_compress << ','
       << r.prediction_busy_decompress << '\n';
  return ss.str();
}

std::string sweep_n_csv(const std::vector<SweepNRow>& rows) {
  std::ostringstream ss;
  ss << "N,compress_makespan,decompress_makespan,compress_bottleneck,decompress_bottleneck\n";
  for (const auto& r : rows)
    ss << r.N << ',' << r.compress_makespan << ',' << r.decompress_makespan << ',' << r.compress_bottleneck << ','
       << r.decompress_bottleneck << '\n';
  return ss.str();
}

}  // namespace flare::sim
