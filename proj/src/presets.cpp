#include <cmath>
#include <cstdio>

#include "caneflow/errors.hpp"
#include "caneflow/harness.hpp"
#include "caneflow/rng.hpp"

namespace caneflow::harness {
namespace {

constexpr double kLuxLevels[6] = {700.0, 1900.0, 2700.0, 3900.0, 5500.0, 6700.0};
constexpr double kSpeeds[5] = {1.0, 1.3, 1.6, 1.9, 2.2};
constexpr double kMasses[8] = {230.0, 240.0, 250.0, 260.0, 270.0, 280.0, 290.0, 300.0};
constexpr double kEmptySpeeds[8] = {1.0, 1.15, 1.3, 1.45, 1.6, 1.8, 2.0, 2.2};
// Sustainable flow per unit elevator speed; above this the pile tops the
// slats.
constexpr double kFlowPerSpeed = 8.0;
constexpr double kOverflowFlowPerSpeed = 12.0;

std::string run_name(std::size_t idx) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "run_%03zu", idx);
  return buf;
}

std::vector<LabRunSpec> lab_runs(std::uint64_t seed, double frame_rate,
                                 const std::vector<double>& durations) {
  std::vector<LabRunSpec> runs;
  runs.reserve(239);
  std::size_t idx = 0;
  auto next_seed = [&] { return derive_seed(seed, 1 + idx); };

  for (std::size_t i = 0; i < 219; ++i) {
    LabRunSpec r;
    const double speed = kSpeeds[(i / 6) % 5];
    const double mass = kMasses[(i / 30) % 8];
    const double d0 = durations[(i / 5) % durations.size()];
    const double duration = std::max(d0, std::ceil(mass / (kFlowPerSpeed * speed)));
    r.scenario.lighting.lux = kLuxLevels[i % 6];
    r.scenario.elevator_speed = speed;
    r.scenario.duration = duration;
    r.scenario.mass_flow_target = mass / duration;
    r.scenario.frame_rate = frame_rate;
    r.scenario.overflow_enabled = false;
    r.scenario.rng_seed = next_seed();
    r.run_id = run_name(++idx);
    runs.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < 12; ++i) {
    LabRunSpec r;
    const double speed = kSpeeds[i % 5];
    r.scenario.lighting.lux = kLuxLevels[i % 6];
    r.scenario.elevator_speed = speed;
    r.scenario.duration = 20.0 + 5.0 * static_cast<double>(i % 3);
    r.scenario.mass_flow_target = kOverflowFlowPerSpeed * speed;
    r.scenario.frame_rate = frame_rate;
    r.scenario.overflow_enabled = true;
    r.scenario.rng_seed = next_seed();
    r.run_id = run_name(++idx);
    runs.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < 8; ++i) {
    LabRunSpec r;
    r.scenario.lighting.lux = kLuxLevels[i % 6];
    r.scenario.elevator_speed = kEmptySpeeds[i];
    r.scenario.duration = 20.0;
    r.scenario.mass_flow_target = 0.0;
    r.scenario.frame_rate = frame_rate;
    r.scenario.overflow_enabled = false;
    r.scenario.rng_seed = next_seed();
    r.run_id = run_name(++idx);
    runs.push_back(std::move(r));
  }
  return runs;
}

std::vector<FieldGroupSpec> field_groups() {
  std::vector<FieldGroupSpec> g(6);
  g[0] = {2014, "TX", "burnt", 40, 340.0, 0.5, 16.0, 0.40, 3000.0, 0.05, 0.04, {}};
  g[1] = {2014, "BRZ", "green", 60, 300.0, 0.5, 20.0, 0.30, 3200.0, 0.05, 0.05, {}};
  g[2] = {2015, "TX", "burnt", 40, 345.0, 0.5, 15.0, 0.35, 2900.0, 0.05, 0.045, {}};
  g[3] = {2015, "LA", "green", 80, 290.0, 0.5, 21.0, 0.30, 3100.0, 0.05, 0.05,
          {true, 40, 1.25}};
  g[4] = {2016, "FL", "burnt", 50, 350.0, 0.5, 17.0, 0.45, 3000.0, 0.05, 0.04, {}};
  g[5] = {2016, "FL", "green", 50, 295.0, 0.5, 19.0, 0.25, 3050.0, 0.05, 0.05, {}};
  return g;
}

}  // namespace

CampaignConfig make_preset(const std::string& name, std::uint64_t seed) {
  CampaignConfig c;
  c.seed = seed;
  c.est.roi = RoiSpec{0.0, 0.0, c.sim.roi.width, c.sim.roi.length, 0.0};
  if (name == "lab") {
    c.kind = "lab";
    c.runs = lab_runs(seed, 2.5, {20.0, 35.0, 60.0});
  } else if (name == "lab-full") {
    c.kind = "lab";
    c.runs = lab_runs(seed, 7.5, {20.0, 45.0, 70.0, 95.0, 120.0});
  } else if (name == "field") {
    c.kind = "field";
    c.groups = field_groups();
  } else {
    throw Error(ErrorCategory::config,
                "unknown preset '" + name + "' (lab|lab-full|field)");
  }
  return c;
}

}  // namespace caneflow::harness
