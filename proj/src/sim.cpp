#include "caneflow/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "caneflow/errors.hpp"
#include "caneflow/kernels.hpp"
#include "caneflow/rng.hpp"

namespace caneflow::sim {
namespace {

constexpr double kPi = std::numbers::pi;

double cylinder_volume(double length, double diameter) {
  const double r = 0.5 * diameter;
  return kPi * r * r * length;
}

// Billets sorted by center y so a sliding window touches a contiguous range.
class SurfaceModel {
 public:
  explicit SurfaceModel(const PackedBed& bed) {
    std::vector<std::size_t> order(bed.billets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return bed.billets[a].center.y < bed.billets[b].center.y;
    });
    field_.reserve(order.size());
    cy_.reserve(order.size());
    for (std::size_t i : order) {
      const Billet& b = bed.billets[i];
      field_.push(b.center, b.axis, b.length, b.diameter);
      cy_.push_back(b.center.y);
      reach_ = std::max(reach_, 0.5 * b.length + 0.5 * b.diameter);
    }
  }

  void heights(const double* xs, const double* ys, std::size_t n, double* out) const {
    kern::raycast_max_z(field_, xs, ys, n, out);
  }

  // Heights using only billets whose y extent can intersect [y_lo, y_hi].
  void window_heights(double y_lo, double y_hi, const double* xs, const double* ys,
                      std::size_t n, double* out) const {
    const auto lo = std::lower_bound(cy_.begin(), cy_.end(), y_lo - reach_);
    const auto hi = std::upper_bound(cy_.begin(), cy_.end(), y_hi + reach_);
    const std::size_t a = static_cast<std::size_t>(lo - cy_.begin());
    const std::size_t b = static_cast<std::size_t>(hi - cy_.begin());
    kern::raycast_max_z(slice(a, b), xs, ys, n, out);
  }

 private:
  kern::CylinderField slice(std::size_t a, std::size_t b) const {
    kern::CylinderField f;
    f.cx.assign(field_.cx.begin() + a, field_.cx.begin() + b);
    f.cy.assign(field_.cy.begin() + a, field_.cy.begin() + b);
    f.cz.assign(field_.cz.begin() + a, field_.cz.begin() + b);
    f.ax.assign(field_.ax.begin() + a, field_.ax.begin() + b);
    f.ay.assign(field_.ay.begin() + a, field_.ay.begin() + b);
    f.az.assign(field_.az.begin() + a, field_.az.begin() + b);
    f.half_len.assign(field_.half_len.begin() + a, field_.half_len.begin() + b);
    f.radius.assign(field_.radius.begin() + a, field_.radius.begin() + b);
    return f;
  }

  kern::CylinderField field_;
  std::vector<double> cy_;
  double reach_ = 0.0;
};

// Coarse heightfield used only while settling billets into place.
class DepositGrid {
 public:
  DepositGrid(const RoiSpec& roi, double cell)
      : x0_(roi.x0), y0_(roi.y0), cell_(cell),
        nx_(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(roi.width / cell)))),
        ny_(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(roi.length / cell)))),
        h_(nx_ * ny_, 0.0) {}

  struct Probe {
    double max_height = 0.0;
    double rest_height = 0.0;  // high-percentile support height under the footprint
    double covered_fraction = 0.0;  // fraction of footprint cells already occupied
  };

  // Footprint of a horizontal cylinder at (x, y) with yaw angle `theta`.
  template <typename Fn>
  void for_footprint(double x, double y, double theta, double length, double diameter,
                     Fn&& fn) const {
    const double ux = std::cos(theta);
    const double uy = std::sin(theta);
    const double hl = 0.5 * length;
    const double r = 0.5 * diameter;
    const double ext = hl + r;
    const std::size_t ix0 = clamp_x(x - ext);
    const std::size_t ix1 = clamp_x(x + ext);
    const std::size_t iy0 = clamp_y(y - ext);
    const std::size_t iy1 = clamp_y(y + ext);
    bool any = false;
    for (std::size_t iy = iy0; iy <= iy1; ++iy) {
      for (std::size_t ix = ix0; ix <= ix1; ++ix) {
        const double px = x0_ + (static_cast<double>(ix) + 0.5) * cell_;
        const double py = y0_ + (static_cast<double>(iy) + 0.5) * cell_;
        const double dx = px - x;
        const double dy = py - y;
        const double s = dx * ux + dy * uy;
        const double t = -dx * uy + dy * ux;
        if (std::abs(s) <= hl + 0.5 * cell_ && std::abs(t) <= r + 0.5 * cell_) {
          fn(ix, iy, t);
          any = true;
        }
      }
    }
    if (!any) {
      const std::size_t ix = clamp_x(x);
      const std::size_t iy = clamp_y(y);
      fn(ix, iy, 0.0);
    }
  }

  // Resting on the strict footprint maximum lets one tall column capture every
  // billet that grazes it and the pile runs away; a high-percentile support
  // height keeps isolated spikes from propagating.
  Probe probe(double x, double y, double theta, double length, double diameter) const {
    Probe p;
    std::vector<double> support;
    std::size_t covered = 0;
    for_footprint(x, y, theta, length, diameter,
                  [&](std::size_t ix, std::size_t iy, double) {
                    const double v = h_[iy * nx_ + ix];
                    p.max_height = std::max(p.max_height, v);
                    support.push_back(v);
                    if (v > 1e-9) ++covered;
                  });
    const std::size_t rank = support.size() / 2;  // median support
    std::nth_element(support.begin(), support.begin() + rank, support.end());
    p.rest_height = support[rank];
    p.covered_fraction = static_cast<double>(covered) / static_cast<double>(support.size());
    return p;
  }

  void settle(double x, double y, double theta, double length, double diameter,
              double center_z) {
    const double r = 0.5 * diameter;
    for_footprint(x, y, theta, length, diameter,
                  [&](std::size_t ix, std::size_t iy, double t) {
                    const double arg = r * r - t * t;
                    const double top = center_z + (arg > 0.0 ? std::sqrt(arg) : 0.0);
                    double& cell = h_[iy * nx_ + ix];
                    cell = std::max(cell, top);
                  });
  }

 private:
  std::size_t clamp_x(double x) const {
    const double f = std::floor((x - x0_) / cell_);
    if (f < 0.0) return 0;
    const auto i = static_cast<std::size_t>(f);
    return std::min(i, nx_ - 1);
  }
  std::size_t clamp_y(double y) const {
    const double f = std::floor((y - y0_) / cell_);
    if (f < 0.0) return 0;
    const auto i = static_cast<std::size_t>(f);
    return std::min(i, ny_ - 1);
  }

  double x0_, y0_, cell_;
  std::size_t nx_, ny_;
  std::vector<double> h_;
};

struct Packer {
  const SimParams& p;
  RoiSpec roi;
  bool allow_spill = false;
  DepositGrid grid;
  Rng rng;
  std::vector<Billet> billets;
  double spilled_volume = 0.0;

  Packer(const SimParams& params, const RoiSpec& r, bool spill, std::uint64_t seed)
      : p(params), roi(r), allow_spill(spill), grid(r, params.deposit_cell), rng(seed) {}

  // One deposition: draws position, yaw and a lift term and computes the rest
  // pose on the current pile. Always consumes four draws. The heightfield is
  // only updated once the billet is committed.
  Billet drop(double length, bool ghost, double y_min, double y_max) {
    const double r = 0.5 * p.billet_diameter;
    const double x = rng.uniform(roi.x0, roi.x0 + roi.width);
    const double y = rng.uniform(y_min, y_max);
    const double theta = rng.uniform(0.0, kPi);
    const double u_lift = rng.uniform();
    const auto probe = grid.probe(x, y, theta, length, p.billet_diameter);
    // Piles get looser as they grow: interlocking billets bridge farther above
    // the support the higher the pile sits.
    const double lift = u_lift * probe.covered_fraction *
                        (p.prop_lift_max + p.prop_lift_slope * probe.rest_height);
    const double cz = probe.rest_height + r + lift;
    Billet b;
    b.length = length;
    b.diameter = p.billet_diameter;
    b.center = Vec3{x, y, cz};
    b.axis = Vec3{std::cos(theta), std::sin(theta), 0.0};
    b.ghost = ghost;
    return b;
  }

  void commit(const Billet& b) {
    const double theta = std::atan2(b.axis.y, b.axis.x);
    grid.settle(b.center.x, b.center.y, theta, b.length, b.diameter, b.center.z);
    billets.push_back(b);
  }

  void place(double length) {
    const Billet b = drop(length, false, roi.y0, roi.y0 + roi.length);
    if (allow_spill && b.center.z + 0.5 * b.diameter > p.slat_cap_height) {
      // Over the slat cap the billet cannot rest; it tumbles onto material
      // farther along the strip, or off the end entirely. Spilled volume is
      // excluded from the conveyed truth mass either way.
      spilled_volume += b.volume();
      const double back = rng.uniform(p.spill_back_min, p.spill_back_max);
      const double gy = b.center.y + back;
      if (gy <= roi.y0 + roi.length) commit(drop(length, true, gy, gy));
      return;
    }
    commit(b);
  }
};

void render_window(const SurfaceModel& surf, double win_x0, double win_y0, double width,
                   double length, LightingCondition lighting, std::uint64_t seed,
                   const SimParams& p, PointCloudFrame& out) {
  Rng rng(seed);
  const double s = p.point_spacing;
  const auto nx = static_cast<std::size_t>(std::max<long long>(1, std::llround(width / s)));
  const auto ny = static_cast<std::size_t>(std::max<long long>(1, std::llround(length / s)));
  const double span_x = static_cast<double>(nx) * s;
  const double span_y = static_cast<double>(ny) * s;

  std::vector<double> lx;
  std::vector<double> ly;
  lx.reserve(nx * ny);
  ly.reserve(nx * ny);
  for (std::size_t iy = 0; iy < ny; ++iy) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      lx.push_back((static_cast<double>(ix) + rng.uniform()) * s);
      ly.push_back((static_cast<double>(iy) + rng.uniform()) * s);
    }
  }
  const bool low_light = lighting.lux < p.lowlight_lux;
  if (low_light) {
    const std::size_t base = lx.size();
    const auto extra = static_cast<std::size_t>(
        std::llround((p.lowlight_inflation - 1.0) * static_cast<double>(base)));
    for (std::size_t i = 0; i < extra; ++i) {
      lx.push_back(rng.uniform(0.0, span_x));
      ly.push_back(rng.uniform(0.0, span_y));
    }
  }

  const std::size_t n = lx.size();
  std::vector<double> gx(n);
  std::vector<double> gy(n);
  for (std::size_t i = 0; i < n; ++i) {
    gx[i] = win_x0 + lx[i];
    gy[i] = win_y0 + ly[i];
  }
  std::vector<double> h(n);
  surf.window_heights(win_y0, win_y0 + length, gx.data(), gy.data(), n, h.data());

  const double bias_factor =
      low_light ? 1.0 - p.lowlight_max_bias * (p.lowlight_lux - lighting.lux) / p.lowlight_lux
                : 1.0;
  out.lux = lighting.lux;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double z = h[i] * bias_factor;
    if (p.noise_sigma > 0.0) z += rng.normal(0.0, p.noise_sigma);
    out.push(lx[i], ly[i], z);
  }
}

}  // namespace

double Billet::volume() const { return cylinder_volume(length, diameter); }

void validate(const Billet& b) {
  if (!(b.length > 0.0) || !(b.diameter > 0.0))
    throw Error(ErrorCategory::domain, "billet dimensions must be positive");
  const double norm = b.axis.x * b.axis.x + b.axis.y * b.axis.y + b.axis.z * b.axis.z;
  if (std::abs(norm - 1.0) > 1e-9)
    throw Error(ErrorCategory::domain, "billet axis must be unit length");
}

void validate(const SimScenario& s) {
  if (!(s.duration > 0.0))
    throw Error(ErrorCategory::config, "scenario duration must be positive");
  if (!(s.frame_rate > 0.0))
    throw Error(ErrorCategory::config, "scenario frame_rate must be positive");
  if (!(s.elevator_speed >= 0.0) || !(s.elevator_speed <= 3.0))
    throw Error(ErrorCategory::config, "scenario elevator_speed must be in [0, 3] m/s");
  if (!(s.mass_flow_target >= 0.0))
    throw Error(ErrorCategory::config, "scenario mass_flow_target must be non-negative");
  if (!(s.lighting.lux >= 0.0))
    throw Error(ErrorCategory::config, "scenario lux must be non-negative");
}

void validate(const SimParams& p) {
  if (!(p.billet_diameter > 0.0) || !(p.billet_length > 0.0))
    throw Error(ErrorCategory::config, "billet dimensions must be positive");
  if (!(p.particle_density > 0.0))
    throw Error(ErrorCategory::config, "particle_density must be positive");
  if (!(p.roi.width > 0.0) || !(p.roi.length > 0.0))
    throw Error(ErrorCategory::config, "roi must have positive extent");
  if (!(p.point_spacing > 0.0))
    throw Error(ErrorCategory::config, "point_spacing must be positive");
  if (!(p.noise_sigma >= 0.0))
    throw Error(ErrorCategory::config, "noise_sigma must be non-negative");
  if (!(p.lowlight_inflation >= 1.0))
    throw Error(ErrorCategory::config, "lowlight_inflation must be >= 1");
  if (!(p.lowlight_max_bias >= 0.0) || !(p.lowlight_max_bias < 1.0))
    throw Error(ErrorCategory::config, "lowlight_max_bias must be in [0, 1)");
  if (!(p.deposit_cell > 0.0))
    throw Error(ErrorCategory::config, "deposit_cell must be positive");
  if (!(p.prop_lift_max >= 0.0) || !(p.prop_lift_slope >= 0.0))
    throw Error(ErrorCategory::config, "prop_lift terms must be non-negative");
  if (!(p.slat_cap_height > 0.0))
    throw Error(ErrorCategory::config, "slat_cap_height must be positive");
  if (!(p.packing_ref > 0.0) || !(p.packing_ref <= 1.0))
    throw Error(ErrorCategory::config, "packing_ref must be in (0, 1]");
  if (!(p.sprocket.pulses_per_rev > 0) || !(p.sprocket.circumference > 0.0))
    throw Error(ErrorCategory::config, "sprocket spec must be positive");
  if (!(p.pulse_jitter >= 0.0))
    throw Error(ErrorCategory::config, "pulse_jitter must be non-negative");
}

double roi_capacity_solid(const RoiSpec& roi, const SimParams& p) {
  return roi.area() * p.slat_cap_height * p.packing_ref;
}

namespace {

// Billet lengths realizing the target exactly: whole billets plus one trimmed
// remainder.
std::vector<double> billet_lengths(double target_solid_volume, const SimParams& p) {
  std::vector<double> lengths;
  if (!(target_solid_volume > 0.0)) return lengths;
  const double v_one = cylinder_volume(p.billet_length, p.billet_diameter);
  const double n_exact = target_solid_volume / v_one;
  auto n_full = static_cast<std::size_t>(n_exact);
  const double rem = target_solid_volume - static_cast<double>(n_full) * v_one;
  lengths.assign(n_full, p.billet_length);
  const double area = kPi * 0.25 * p.billet_diameter * p.billet_diameter;
  const double rem_len = rem / area;
  if (rem_len > 1e-9) lengths.push_back(rem_len);
  return lengths;
}

PackedBed pack_into(const RoiSpec& roi, double target_solid_volume, bool allow_spill,
                    std::uint64_t seed, const SimParams& p, double* spilled_out) {
  if (!(target_solid_volume >= 0.0))
    throw Error(ErrorCategory::config, "target solid volume must be non-negative");
  const double capacity = roi_capacity_solid(roi, p);
  if (!allow_spill && target_solid_volume > 1.5 * capacity)
    throw Error(ErrorCategory::overflow,
                "requested material exceeds 1.5x elevator capacity; enable overflow");
  Packer packer(p, roi, allow_spill, seed);
  for (double len : billet_lengths(target_solid_volume, p)) packer.place(len);
  if (spilled_out != nullptr) *spilled_out = packer.spilled_volume;
  PackedBed bed;
  bed.billets = std::move(packer.billets);
  bed.roi = roi;
  bed.particle_density = p.particle_density;
  bed.fill_seed = seed;
  return bed;
}

}  // namespace

PackedBed pack_billets(const SimScenario& scenario, double target_solid_volume,
                       const SimParams& p) {
  validate(scenario);
  validate(p);
  RoiSpec roi = p.roi;
  roi.x0 = 0.0;
  roi.y0 = 0.0;
  return pack_into(roi, target_solid_volume, false, derive_seed(scenario.rng_seed, 11),
                   p, nullptr);
}

double solid_volume(const PackedBed& bed) {
  double total = 0.0;
  for (const Billet& b : bed.billets) total += b.volume();
  return total;
}

double conveyed_solid_volume(const PackedBed& bed) {
  double total = 0.0;
  for (const Billet& b : bed.billets)
    if (!b.ghost) total += b.volume();
  return total;
}

double surface_height(const PackedBed& bed, double x, double y) {
  if (!bed.roi.contains(x, y))
    throw Error(ErrorCategory::domain, "surface query outside bed roi");
  SurfaceModel surf(bed);
  double out = 0.0;
  surf.heights(&x, &y, 1, &out);
  return out;
}

void surface_heights(const PackedBed& bed, const double* xs, const double* ys,
                     std::size_t n, double* out) {
  SurfaceModel surf(bed);
  surf.heights(xs, ys, n, out);
}

double envelope_volume(const PackedBed& bed, const RoiSpec& window,
                       std::size_t n_samples, std::uint64_t seed) {
  if (n_samples == 0)
    throw Error(ErrorCategory::config, "envelope_volume needs at least one sample");
  SurfaceModel surf(bed);
  Rng rng(seed);
  constexpr std::size_t kChunk = 4096;
  std::vector<double> xs(kChunk);
  std::vector<double> ys(kChunk);
  std::vector<double> hs(kChunk);
  double total = 0.0;
  std::size_t done = 0;
  while (done < n_samples) {
    const std::size_t m = std::min(kChunk, n_samples - done);
    for (std::size_t i = 0; i < m; ++i) {
      xs[i] = rng.uniform(window.x0, window.x0 + window.width);
      ys[i] = rng.uniform(window.y0, window.y0 + window.length);
    }
    surf.heights(xs.data(), ys.data(), m, hs.data());
    total += kern::sum(hs.data(), m);
    done += m;
  }
  return total / static_cast<double>(n_samples) * window.area();
}

PointCloudFrame render_point_cloud(const PackedBed& bed, LightingCondition lighting,
                                   std::uint64_t noise_seed, const SimParams& p) {
  SurfaceModel surf(bed);
  PointCloudFrame frame;
  render_window(surf, bed.roi.x0, bed.roi.y0, bed.roi.width, bed.roi.length, lighting,
                noise_seed, p, frame);
  return frame;
}

RunArtifacts run_scenario(const SimScenario& scenario, const SimParams& p) {
  validate(scenario);
  validate(p);
  RunArtifacts art;

  const double strip_len = std::max(scenario.elevator_speed * scenario.duration,
                                    p.roi.length);
  RoiSpec strip_roi;
  strip_roi.x0 = 0.0;
  strip_roi.y0 = 0.0;
  strip_roi.width = p.roi.width;
  strip_roi.length = strip_len;
  strip_roi.plane_height = 0.0;

  const double target_solid =
      scenario.mass_flow_target * scenario.duration / p.particle_density;
  double spilled = 0.0;
  art.strip = pack_into(strip_roi, target_solid, scenario.overflow_enabled,
                        derive_seed(scenario.rng_seed, 11), p, &spilled);

  RunTruth& truth = art.truth;
  truth.total_solid_volume_m3 = conveyed_solid_volume(art.strip);
  truth.total_mass_kg = truth.total_solid_volume_m3 * p.particle_density;
  truth.spilled_volume_m3 = spilled;
  truth.overflow = target_solid > 0.0 &&
                   spilled > p.spill_min_fraction * target_solid;
  truth.duration_s = scenario.duration;
  truth.elevator_speed_mps = scenario.elevator_speed;
  truth.mass_flow_target_kgps = scenario.mass_flow_target;
  truth.lux = scenario.lighting.lux;
  truth.frame_rate_hz = scenario.frame_rate;
  truth.seed = scenario.rng_seed;
  truth.particle_density = p.particle_density;

  // Sprocket pulses with sentinel samples pinning the run interval.
  {
    Rng rng(derive_seed(scenario.rng_seed, 22));
    art.pulses.push_back(SpeedPulse{0.0, 0});
    const double rate = scenario.elevator_speed *
                        static_cast<double>(p.sprocket.pulses_per_rev) /
                        p.sprocket.circumference;
    std::int64_t count = 0;
    if (rate > 0.0) {
      const auto n_pulses = static_cast<std::int64_t>(scenario.duration * rate);
      double prev = 0.0;
      for (std::int64_t k = 1; k <= n_pulses; ++k) {
        double t = static_cast<double>(k) / rate +
                   rng.uniform(-p.pulse_jitter, p.pulse_jitter);
        t = std::max(t, prev + 1e-9);
        // Keep a gap ahead of the end sentinel wider than the 6-significant-
        // digit serialization can collapse.
        if (t >= scenario.duration - std::max(1e-9, 1e-5 * scenario.duration)) break;
        art.pulses.push_back(SpeedPulse{t, k});
        prev = t;
        count = k;
      }
    }
    art.pulses.push_back(SpeedPulse{scenario.duration, count});
  }

  // Camera frames: the window trails the material by the distance travelled.
  {
    SurfaceModel surf(art.strip);
    const auto n_frames =
        static_cast<std::size_t>(std::llround(scenario.duration * scenario.frame_rate));
    art.frames.reserve(n_frames);
    for (std::size_t k = 0; k < n_frames; ++k) {
      const double t = static_cast<double>(k) / scenario.frame_rate;
      // Material starts at the sensor line, so the window fills gradually; a
      // parked elevator instead keeps the packed bed in view.
      const double y_hi =
          scenario.elevator_speed > 0.0 ? scenario.elevator_speed * t : p.roi.length;
      PointCloudFrame frame;
      render_window(surf, 0.0, y_hi - p.roi.length, p.roi.width, p.roi.length,
                    scenario.lighting, derive_seed(scenario.rng_seed, 1000 + k), p,
                    frame);
      frame.timestamp = t;
      art.frames.push_back(std::move(frame));
    }
    truth.n_frames = static_cast<int>(n_frames);
  }

  return art;
}

std::vector<double> frame_band_volumes(const PackedBed& strip, const SimScenario& scenario) {
  validate(scenario);
  if (!(scenario.elevator_speed > 0.0))
    throw Error(ErrorCategory::config, "frame bands need a moving elevator");
  const auto n_frames =
      static_cast<std::size_t>(std::llround(scenario.duration * scenario.frame_rate));
  const double band = scenario.elevator_speed / scenario.frame_rate;
  std::vector<double> out(n_frames, 0.0);
  for (const Billet& b : strip.billets) {
    if (b.ghost) continue;
    auto idx = static_cast<std::size_t>(std::floor(b.center.y / band));
    if (idx >= n_frames) idx = n_frames - 1;
    out[idx] += b.volume();
  }
  return out;
}

}  // namespace caneflow::sim
