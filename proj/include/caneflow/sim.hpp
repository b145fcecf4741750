// Synthetic billet beds and stereo-like point clouds: random sequential
// deposition with settle-to-contact, exact cylinder ray casting for surface
// heights, a Monte-Carlo envelope oracle, and full scenario runs (frames +
// sprocket pulses + ground truth).
#pragma once

#include <cstdint>
#include <vector>

#include "caneflow/types.hpp"

namespace caneflow::sim {

struct Billet {
  double length = 0.20;    // m
  double diameter = 0.04;  // m
  Vec3 center;             // elevator frame
  Vec3 axis{1.0, 0.0, 0.0};  // unit norm
  bool ghost = false;      // overflow re-count copy; carries no mass

  double volume() const;
};

void validate(const Billet& b);  // throws domain error on bad geometry

struct LightingCondition {
  double lux = 4300.0;
};

struct SimScenario {
  double mass_flow_target = 5.0;  // kg/s conveyed
  double elevator_speed = 2.0;    // m/s
  double duration = 30.0;         // s
  LightingCondition lighting{};
  double frame_rate = 7.5;  // Hz
  std::uint64_t rng_seed = 1;
  bool overflow_enabled = false;
};

void validate(const SimScenario& s);

// Material / sensor model knobs shared by a whole campaign.
struct SimParams {
  double billet_diameter = 0.04;
  double billet_length = 0.20;
  double particle_density = 120.0;  // kg/m^3, dry hollow surrogate billets
  RoiSpec roi{0.0, 0.0, 0.8, 0.24, 0.0};

  // Rendering.
  double point_spacing = 0.02;  // m between grid samples
  double noise_sigma = 0.005;   // m, additive z noise; 0 disables
  double lowlight_lux = 2700.0;
  double lowlight_inflation = 1.3;  // point-count multiplier below the gate
  double lowlight_max_bias = 0.15;  // max negative elevation bias fraction

  // Packing / overflow model.
  double deposit_cell = 0.02;      // settle heightfield resolution
  double prop_lift_max = 0.01;     // max extra rest height on covered ground
  double prop_lift_slope = 0.7;    // extra lift per meter of pile height
  double slat_cap_height = 0.18;   // m, material above this spills back
  double packing_ref = 0.55;       // packing fraction used for ROI capacity
  double spill_min_fraction = 0.005;  // spilled volume fraction that flags a run
  double spill_back_min = 0.5;     // m, ghost re-entry distance downstream
  double spill_back_max = 2.0;

  // Elevator speed sensor.
  SprocketSpec sprocket{};
  double pulse_jitter = 0.002;  // s, uniform timing jitter per pulse
};

void validate(const SimParams& p);

struct PackedBed {
  std::vector<Billet> billets;
  RoiSpec roi;  // horizontal extent containing all billet centers
  double particle_density = 120.0;
  std::uint64_t fill_seed = 0;
};

struct RunTruth {
  double total_mass_kg = 0.0;          // conveyed mass (ghost copies excluded)
  double total_solid_volume_m3 = 0.0;  // conveyed solid volume
  double spilled_volume_m3 = 0.0;
  bool overflow = false;
  double duration_s = 0.0;
  int n_frames = 0;
  double elevator_speed_mps = 0.0;
  double mass_flow_target_kgps = 0.0;
  double lux = 0.0;
  double frame_rate_hz = 0.0;
  std::uint64_t seed = 0;
  double particle_density = 0.0;
};

struct RunArtifacts {
  std::vector<PointCloudFrame> frames;
  std::vector<SpeedPulse> pulses;
  RunTruth truth;
  PackedBed strip;  // the full conveyed bed, for oracle checks
};

// Geometric solid capacity of an ROI used for the overflow error threshold.
double roi_capacity_solid(const RoiSpec& roi, const SimParams& p);

// Random sequential deposition into the scenario ROI until the analytic solid
// volume matches the target (the final billet is trimmed). Deterministic given
// scenario.rng_seed; beds for larger targets extend beds for smaller ones.
PackedBed pack_billets(const SimScenario& scenario, double target_solid_volume,
                       const SimParams& p);

// Exact analytic sum of cylinder volumes (ghost copies included; a packed bed
// has none).
double solid_volume(const PackedBed& bed);
// Same, excluding ghost copies: the volume that physically passed through.
double conveyed_solid_volume(const PackedBed& bed);

// Highest billet surface crossed by the vertical ray at (x, y); 0 if none.
// Throws a domain error when (x, y) is outside the bed's ROI.
double surface_height(const PackedBed& bed, double x, double y);
// Batch variant; no per-point domain checks.
void surface_heights(const PackedBed& bed, const double* xs, const double* ys,
                     std::size_t n, double* out);

// Monte-Carlo integral of surface_height over a window; the brute-force
// envelope oracle the estimator is checked against.
double envelope_volume(const PackedBed& bed, const RoiSpec& window,
                       std::size_t n_samples, std::uint64_t seed);

// Stereo-like sampling of the bed surface over its ROI: jittered grid,
// Gaussian z noise, and the low-light artifact (inflated point count plus a
// negative elevation bias proportional to the lux deficit).
PointCloudFrame render_point_cloud(const PackedBed& bed, LightingCondition lighting,
                                   std::uint64_t noise_seed, const SimParams& p);

// Full run: packs a strip of material, slides the camera window along it at
// the elevator speed, and emits frames, pulse events and ground truth.
RunArtifacts run_scenario(const SimScenario& scenario, const SimParams& p);

// Solid volume conveyed past the window per frame interval (by billet center;
// ghost copies excluded). Sums to the run truth total.
std::vector<double> frame_band_volumes(const PackedBed& strip, const SimScenario& scenario);

}  // namespace caneflow::sim
