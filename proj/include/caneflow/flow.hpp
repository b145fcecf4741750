// Incremental mass-flow integration: per-frame volume increments scaled by
// elevator travel (V_delta = dt * V_e * V_c), density-scaled mass increments,
// the volume transform, per-load aggregation, and point yield.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "caneflow/est.hpp"
#include "caneflow/types.hpp"

namespace caneflow::flow {

enum class Transform { identity, sqrt };

const char* transform_name(Transform t);
Transform parse_transform(const std::string& name);  // throws config error

enum class LowLightPolicy { include, exclude };

const char* policy_name(LowLightPolicy p);
LowLightPolicy parse_policy(const std::string& name);  // throws config error

// identity -> v_c; sqrt -> numeric square root. Applied to the volume rate
// before the dt * V_e scaling.
double apply_transform(double v_c, Transform t);  // throws domain error if v_c < 0

// Window-averaged pulse rate centered on `at`, converted to chain speed and
// clamped to [0, 3] m/s. Pulse timestamps must be strictly increasing with
// non-decreasing counts.
double elevator_speed(std::span<const SpeedPulse> pulses, const SprocketSpec& spec,
                      double at, double window = 0.5);

struct FlowSample {
  double timestamp = 0.0;
  double v_delta = 0.0;  // transformed volume increment
  double m_delta = 0.0;  // kg
  double v_e = 0.0;      // m/s
};

struct RunTotals {
  double accumulated_volume = 0.0;  // transformed units
  double predicted_mass_kg = 0.0;
  int n_frames = 0;
  int n_used = 0;
  int n_low_light = 0;
};

struct AccumulateOptions {
  Transform transform = Transform::identity;
  LowLightPolicy policy = LowLightPolicy::include;
  double rho = 1.0;        // kg per transformed-volume unit
  double frame_rate = 7.5;  // Hz; the last frame covers 1/frame_rate seconds
  double speed_window = 0.5;  // s
};

// Ordered fold over per-frame estimates. Emits one FlowSample per frame;
// excluded low-light frames contribute zero increments but stay in the
// stream. Totals are exact sums of the emitted increments.
std::vector<FlowSample> accumulate(std::span<const est::VolumeEstimate> estimates,
                                   std::span<const SpeedPulse> pulses,
                                   const SprocketSpec& spec,
                                   const AccumulateOptions& opts, RunTotals& totals);

struct YieldPoint {
  double kg_per_m2 = 0.0;
  double t_per_ha = 0.0;
};

// Yield = m_dot / (w * v_m).
YieldPoint point_yield(double m_dot_kgps, double v_m_mps, double w_m);

struct LoadRecord {
  std::string load_id;
  int year = 0;
  std::string region;
  std::string crop_type;  // green | burnt
  double accum_volume = 0.0;  // transformed units
  double predicted_mass_kg = 0.0;
  std::optional<double> actual_mass_kg;  // wagon scale; absent if unweighed
  double duration_s = 0.0;
  int n_frames = 0;
  int n_low_light = 0;
  bool overflow = false;
};

// A load is usable for density calibration when it was weighed and conveyed
// measurable volume.
bool calibratable(const LoadRecord& r);

LoadRecord build_load_record(std::string load_id, int year, std::string region,
                             std::string crop_type, const RunTotals& totals,
                             double duration_s, std::optional<double> actual_mass_kg,
                             bool overflow);

}  // namespace caneflow::flow
