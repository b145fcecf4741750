#include "caneflow/flow.hpp"

#include <algorithm>
#include <cmath>

#include "caneflow/errors.hpp"

namespace caneflow::flow {
namespace {

constexpr double kSpeedClamp = 3.0;  // m/s

void check_pulses(std::span<const SpeedPulse> pulses) {
  if (pulses.size() < 2)
    throw Error(ErrorCategory::insufficient_data, "need at least two speed pulses");
  for (std::size_t i = 1; i < pulses.size(); ++i) {
    if (!(pulses[i].timestamp > pulses[i - 1].timestamp))
      throw Error(ErrorCategory::stream_order, "pulse timestamps must be strictly increasing");
    if (pulses[i].count < pulses[i - 1].count)
      throw Error(ErrorCategory::stream_order, "pulse counts must be non-decreasing");
  }
}

// Piecewise-linear cumulative count; tau clamped to the pulse span.
double interp_count(std::span<const SpeedPulse> pulses, double tau) {
  if (tau <= pulses.front().timestamp) return static_cast<double>(pulses.front().count);
  if (tau >= pulses.back().timestamp) return static_cast<double>(pulses.back().count);
  const auto it = std::upper_bound(
      pulses.begin(), pulses.end(), tau,
      [](double t, const SpeedPulse& p) { return t < p.timestamp; });
  const SpeedPulse& hi = *it;
  const SpeedPulse& lo = *(it - 1);
  const double frac = (tau - lo.timestamp) / (hi.timestamp - lo.timestamp);
  return static_cast<double>(lo.count) +
         frac * static_cast<double>(hi.count - lo.count);
}

}  // namespace

const char* transform_name(Transform t) {
  return t == Transform::identity ? "identity" : "sqrt";
}

Transform parse_transform(const std::string& name) {
  if (name == "identity") return Transform::identity;
  if (name == "sqrt") return Transform::sqrt;
  throw Error(ErrorCategory::config, "unknown transform '" + name + "' (identity|sqrt)");
}

const char* policy_name(LowLightPolicy p) {
  return p == LowLightPolicy::include ? "include" : "exclude";
}

LowLightPolicy parse_policy(const std::string& name) {
  if (name == "include") return LowLightPolicy::include;
  if (name == "exclude") return LowLightPolicy::exclude;
  throw Error(ErrorCategory::config, "unknown low-light policy '" + name + "' (include|exclude)");
}

double apply_transform(double v_c, Transform t) {
  if (v_c < 0.0)
    throw Error(ErrorCategory::domain, "volume rate must be non-negative");
  return t == Transform::identity ? v_c : std::sqrt(v_c);
}

double elevator_speed(std::span<const SpeedPulse> pulses, const SprocketSpec& spec,
                      double at, double window) {
  check_pulses(pulses);
  if (!(spec.pulses_per_rev > 0) || !(spec.circumference > 0.0))
    throw Error(ErrorCategory::config, "sprocket spec must be positive");
  if (!(window >= 0.0))
    throw Error(ErrorCategory::config, "speed window must be non-negative");
  const double span_lo = pulses.front().timestamp;
  const double span_hi = pulses.back().timestamp;
  const double a = std::max(span_lo, at - 0.5 * window);
  const double b = std::min(span_hi, at + 0.5 * window);
  if (!(b > a)) return 0.0;
  const double rate = (interp_count(pulses, b) - interp_count(pulses, a)) / (b - a);
  const double speed =
      rate * spec.circumference / static_cast<double>(spec.pulses_per_rev);
  return std::clamp(speed, 0.0, kSpeedClamp);
}

std::vector<FlowSample> accumulate(std::span<const est::VolumeEstimate> estimates,
                                   std::span<const SpeedPulse> pulses,
                                   const SprocketSpec& spec,
                                   const AccumulateOptions& opts, RunTotals& totals) {
  if (!(opts.rho > 0.0))
    throw Error(ErrorCategory::config, "density must be positive");
  if (!(opts.frame_rate > 0.0))
    throw Error(ErrorCategory::config, "frame_rate must be positive");
  totals = RunTotals{};
  std::vector<FlowSample> samples;
  if (estimates.empty()) return samples;

  for (std::size_t i = 1; i < estimates.size(); ++i)
    if (!(estimates[i].frame_timestamp > estimates[i - 1].frame_timestamp))
      throw Error(ErrorCategory::stream_order, "estimates must be strictly time-ordered");
  check_pulses(pulses);
  const double t_first = estimates.front().frame_timestamp;
  const double t_last = estimates.back().frame_timestamp;
  if (pulses.front().timestamp > t_first + 1e-9 ||
      pulses.back().timestamp < t_last - 1e-9)
    throw Error(ErrorCategory::insufficient_data, "pulse stream does not cover the frame span");

  samples.reserve(estimates.size());
  const std::size_t n = estimates.size();
  for (std::size_t i = 0; i < n; ++i) {
    const est::VolumeEstimate& e = estimates[i];
    const double dt = i + 1 < n
                          ? estimates[i + 1].frame_timestamp - e.frame_timestamp
                          : 1.0 / opts.frame_rate;
    const double v_e = elevator_speed(pulses, spec, e.frame_timestamp, opts.speed_window);
    const bool low_light = e.quality == est::FrameQuality::low_light;
    const bool used = !(low_light && opts.policy == LowLightPolicy::exclude);
    FlowSample s;
    s.timestamp = e.frame_timestamp;
    s.v_e = v_e;
    if (used) {
      const double x = apply_transform(e.v_c, opts.transform);
      s.v_delta = dt * v_e * x;
      s.m_delta = s.v_delta * opts.rho;
    }
    samples.push_back(s);
    totals.accumulated_volume += s.v_delta;
    totals.predicted_mass_kg += s.m_delta;
    ++totals.n_frames;
    if (low_light) ++totals.n_low_light;
    if (used) ++totals.n_used;
  }
  return samples;
}

YieldPoint point_yield(double m_dot_kgps, double v_m_mps, double w_m) {
  if (!(v_m_mps > 0.0))
    throw Error(ErrorCategory::domain, "machine ground speed must be positive");
  if (!(w_m > 0.0))
    throw Error(ErrorCategory::domain, "row width must be positive");
  YieldPoint y;
  y.kg_per_m2 = m_dot_kgps / (w_m * v_m_mps);
  y.t_per_ha = y.kg_per_m2 * 10.0;
  return y;
}

bool calibratable(const LoadRecord& r) {
  return r.actual_mass_kg.has_value() && r.accum_volume > 0.0;
}

LoadRecord build_load_record(std::string load_id, int year, std::string region,
                             std::string crop_type, const RunTotals& totals,
                             double duration_s, std::optional<double> actual_mass_kg,
                             bool overflow) {
  if (!(duration_s > 0.0))
    throw Error(ErrorCategory::config, "load duration must be positive");
  if (actual_mass_kg && !(*actual_mass_kg >= 0.0))
    throw Error(ErrorCategory::domain, "actual mass must be non-negative");
  LoadRecord r;
  r.load_id = std::move(load_id);
  r.year = year;
  r.region = std::move(region);
  r.crop_type = std::move(crop_type);
  r.accum_volume = totals.accumulated_volume;
  r.predicted_mass_kg = totals.predicted_mass_kg;
  r.actual_mass_kg = actual_mass_kg;
  r.duration_s = duration_s;
  r.n_frames = totals.n_frames;
  r.n_low_light = totals.n_low_light;
  r.overflow = overflow;
  return r;
}

}  // namespace caneflow::flow
