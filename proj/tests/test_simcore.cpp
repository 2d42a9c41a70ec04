#include <numeric>

#include "doctest.h"
#include "flare/error.hpp"
#include "flare/predictor.hpp"
#include "flare/simcore.hpp"

using namespace flare;
using namespace flare::sim;

namespace {

ExecTrace proxy(Dims d, Phase phase, Order order = Order::LookAhead, int epochs = 6) {
  ProxySpec spec;
  spec.dims = d;
  spec.epochs = epochs;
  return make_proxy_trace(spec, order, phase);
}

}  // namespace

TEST_CASE("empty trace") {
  const auto r = simulate(ExecTrace{}, CoreConfig{}, Mode::Flare, Phase::Compress);
  CHECK(r.total_cycles == 0);
  CHECK(r.dram_bytes() == 0);
  CHECK(r.energy_units == 0.0);
  CHECK_FALSE(r.capacity_violation);
}

TEST_CASE("single block prediction cost") {
  const auto trace = build_schedule(partition_blocks({32, 32, 32}, 32), Order::BreadthFirst);
  CoreConfig cfg;
  cfg.M = 1;
  const auto r = simulate(trace, cfg, Mode::Flare, Phase::Compress);
  // 32^3 - 1 anchor points, 5 levels x 3 axis passes, fill of 4 per pass.
  CHECK(r.prediction.busy == 32767 + 4 * 15);
  CHECK(r.neural.busy == 0);
  CHECK(r.macs == 0);
}

TEST_CASE("prediction work splits across arrays") {
  ProxySpec spec;
  spec.dims = {64, 64, 64};
  const auto rows = sweep_M(spec, CoreConfig{}, {1, 2, 4});
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].prediction_busy_compress * 2 == doctest::Approx(rows[0].prediction_busy_compress).epsilon(1e-6));
  CHECK(rows[2].prediction_busy_compress * 4 == doctest::Approx(rows[0].prediction_busy_compress).epsilon(1e-6));
  CHECK(rows[1].decompress_cycles < rows[0].decompress_cycles);
  CHECK(rows[2].decompress_cycles <= rows[1].decompress_cycles);
}

TEST_CASE("flare against baseline") {
  for (const auto phase : {Phase::Compress, Phase::Decompress}) {
    CAPTURE(to_string(phase));
    const auto t = proxy({64, 64, 64}, phase);
    const CoreConfig cfg;
    const auto base = simulate(t, cfg, Mode::Baseline, phase);
    const auto fl = simulate(t, cfg, Mode::Flare, phase);
    CHECK(fl.total_cycles <= base.total_cycles);
    CHECK(fl.dram_bytes() < base.dram_bytes());
    CHECK(fl.dram_bytes(kNormalization) == 0);
    CHECK(base.dram_bytes(kNormalization) > 0);
    CHECK(fl.fifo1_peak_bytes <= cfg.fifo1_bytes);
    CHECK(fl.fifo2_peak_bytes <= cfg.fifo2_bytes);
    CHECK(fl.total_cycles >= fl.compute_cycles);
    CHECK(fl.total_cycles >= fl.dram_cycles);
    for (std::size_t s = 0; s < kStages; ++s) {
      CAPTURE(kStageNames[s]);
      CHECK(base.stages[s].balanced());
      CHECK(fl.stages[s].balanced());
    }
    const auto c = compare(base, fl);
    CHECK(c.speedup == doctest::Approx(double(base.total_cycles) / fl.total_cycles));
    CHECK(c.movement_ratio > 1.0);
  }
}

TEST_CASE("movement breakdown") {
  const auto t = proxy({64, 64, 64}, Phase::Compress);
  const auto base = simulate(t, CoreConfig{}, Mode::Baseline, Phase::Compress);
  const auto fl = simulate(t, CoreConfig{}, Mode::Flare, Phase::Compress);
  const auto b = movement_breakdown(base, fl);
  CHECK_FALSE(b.zero_savings);
  CHECK(std::accumulate(b.share.begin(), b.share.end(), 0.0) == doctest::Approx(100.0));
  for (std::size_t s = 0; s < kStages; ++s)
    CHECK(b.saved_bytes[s] == std::int64_t(base.dram_bytes(Stage(s))) - std::int64_t(fl.dram_bytes(Stage(s))));
  CHECK(movement_breakdown(fl, fl).zero_savings);

  SimReport x, y;
  x.stages[kPrediction].reads = 300;
  x.stages[kNormalization].reads = 500;
  x.stages[kCodec].offchip_writes = 200;
  y.stages[kPrediction].reads = 100;
  y.stages[kCodec].offchip_writes = 200;
  const auto h = movement_breakdown(x, y);
  CHECK(h.share[kPrediction] == doctest::Approx(200.0 / 7));
  CHECK(h.share[kNormalization] == doctest::Approx(500.0 / 7));
  CHECK(h.share[kNeural] == 0.0);
  CHECK(h.share[kCodec] == 0.0);
}

TEST_CASE("monotone in bandwidth and fifo size") {
  const auto t = proxy({64, 64, 64}, Phase::Decompress);
  std::uint64_t prev = UINT64_MAX;
  for (double bw : {4.0, 16.0, 64.0, 256.0}) {
    CoreConfig cfg;
    cfg.dram_bytes_per_cycle = bw;
    const auto r = simulate(t, cfg, Mode::Flare, Phase::Decompress);
    CHECK(r.total_cycles <= prev);
    prev = r.total_cycles;
  }
  prev = UINT64_MAX;
  for (std::uint64_t kib : {256, 1024, 4096, 8192}) {
    CoreConfig cfg;
    cfg.fifo1_bytes = kib << 10;
    const auto r = simulate(t, cfg, Mode::Flare, Phase::Decompress);
    CHECK(r.total_cycles <= prev);
    prev = r.total_cycles;
  }
}

TEST_CASE("deterministic reports") {
  const auto t = proxy({48, 40, 36}, Phase::Compress);
  const auto a = simulate(t, CoreConfig{}, Mode::Flare, Phase::Compress);
  const auto b = simulate(t, CoreConfig{}, Mode::Flare, Phase::Compress);
  CHECK(a == b);
  CHECK(to_json(a) == to_json(b));
}

TEST_CASE("capacity problems") {
  const auto t = proxy({64, 64, 64}, Phase::Compress);
  CoreConfig small;
  small.sram_bytes = 1 << 16;
  const auto r = simulate(t, small, Mode::Flare, Phase::Compress);
  CHECK(r.capacity_violation);
  CHECK(r.violations.size() == 1);
  CHECK(r.stages[kPrediction].spill == 2 * (r.sram_peak_bytes - small.sram_bytes));

  // A slab of four blocks cannot sit in a FIFO2 that holds one block, and
  // the slab is only freed once the neural engine has consumed all of it.
  CoreConfig tight;
  tight.fifo2_bytes = 32 * 32 * 32 * 4;
  CHECK_THROWS_AS(simulate(t, tight, Mode::Flare, Phase::Compress), SimulationError);

  CoreConfig tiny;
  tiny.fifo1_bytes = 16;
  CHECK_THROWS_AS(simulate(t, tiny, Mode::Flare, Phase::Compress), SimulationError);

  auto broken = t;
  broken.events.pop_back();
  broken.events.erase(broken.events.begin() + 1);
  CHECK_THROWS_AS(simulate(broken, CoreConfig{}, Mode::Flare, Phase::Compress), SimulationError);
}

TEST_CASE("lpt scheduling") {
  CHECK(lpt_makespan({10, 10, 10, 10}, 1) == 40);
  CHECK(lpt_makespan({10, 10, 10, 10}, 2) == 20);
  CHECK(lpt_makespan({10, 10, 10, 10}, 8) == 10);
  std::vector<std::vector<std::size_t>> assignment;
  CHECK(lpt_makespan({7, 5, 4, 3, 3}, 2, &assignment) == 12);
  REQUIRE(assignment.size() == 2);
  CHECK(assignment[0] == std::vector<std::size_t>{0, 3});
  CHECK(assignment[1] == std::vector<std::size_t>{1, 2, 4});
  CHECK(lpt_makespan({}, 3) == 0);

  std::vector<Workload> w;
  for (int i = 0; i < 4; ++i) w.push_back({"w" + std::to_string(i), {{32, 32, 32}}});
  const auto rows = sweep_N(w, CoreConfig{}, {1, 2, 4});
  CHECK(rows[1].compress_makespan * 2 == rows[0].compress_makespan);
  CHECK(rows[2].compress_makespan == rows[2].compress_bottleneck);
}

TEST_CASE("config parsing") {
  const auto cfg = parse_config("# core\nM = 2\nsram_bytes=1024\n\nneural_utilization = 0.5  # derated\n");
  CHECK(cfg.M == 2);
  CHECK(cfg.sram_bytes == 1024);
  CHECK(cfg.neural_utilization == 0.5);
  CHECK(parse_config("") == CoreConfig{});
  CHECK_THROWS_AS(parse_config("bogus = 1"), InputError);
  CHECK_THROWS_AS(parse_config("M = two"), InputError);
  CHECK_THROWS_AS(parse_config("M"), InputError);
  CHECK_THROWS_AS(parse_config("M = 0"), InputError);
  CHECK_THROWS_AS(parse_config("neural_utilization = 1.5"), InputError);
  CHECK_THROWS_AS(load_config("/nonexistent/core.cfg"), IoError);

  auto round = CoreConfig{};
  round.M = 7;
  round.energy_mac = 0.25;
  std::string text;
  for (const auto& [k, v] : config_entries(round)) text += k + " = " + v + "\n";
  CHECK(parse_config(text) == round);
}
