#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "caneflow/errors.hpp"
#include "caneflow/flow.hpp"
#include "caneflow/rng.hpp"

using namespace caneflow;

namespace {

// Perfectly regular pulse train for a given chain speed.
std::vector<SpeedPulse> regular_pulses(double speed, double duration,
                                       const SprocketSpec& spec = {}) {
  std::vector<SpeedPulse> pulses;
  pulses.push_back(SpeedPulse{0.0, 0});
  const double rate = speed * static_cast<double>(spec.pulses_per_rev) / spec.circumference;
  for (std::int64_t k = 1;; ++k) {
    const double t = static_cast<double>(k) / rate;
    if (t >= duration) break;
    pulses.push_back(SpeedPulse{t, k});
  }
  pulses.push_back(SpeedPulse{
      duration, static_cast<std::int64_t>(std::floor(duration * rate + 1e-9))});
  return pulses;
}

std::vector<est::VolumeEstimate> flat_estimates(double v_c, std::size_t n,
                                                double frame_rate,
                                                est::FrameQuality q = est::FrameQuality::ok) {
  std::vector<est::VolumeEstimate> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].frame_timestamp = static_cast<double>(i) / frame_rate;
    out[i].v_c = v_c;
    out[i].raw_volume = v_c * 0.24;
    out[i].quality = q;
  }
  return out;
}

}  // namespace

TEST_CASE("transform and policy names parse both ways") {
  CHECK(flow::parse_transform("identity") == flow::Transform::identity);
  CHECK(flow::parse_transform("sqrt") == flow::Transform::sqrt);
  CHECK_THROWS_AS(flow::parse_transform("cube"), Error);
  CHECK(std::string(flow::transform_name(flow::Transform::sqrt)) == "sqrt");
  CHECK(flow::parse_policy("include") == flow::LowLightPolicy::include);
  CHECK(flow::parse_policy("exclude") == flow::LowLightPolicy::exclude);
  CHECK_THROWS_AS(flow::parse_policy("maybe"), Error);
}

TEST_CASE("volume transform values") {
  CHECK(flow::apply_transform(0.0144, flow::Transform::sqrt) ==
        doctest::Approx(0.12).epsilon(1e-12));
  CHECK(flow::apply_transform(0.25, flow::Transform::sqrt) == 0.5);
  CHECK(flow::apply_transform(0.25, flow::Transform::identity) == 0.25);
  CHECK(flow::apply_transform(0.0, flow::Transform::sqrt) == 0.0);
  CHECK_THROWS_AS(flow::apply_transform(-1e-9, flow::Transform::sqrt), Error);
}

TEST_CASE("elevator speed from a regular pulse train") {
  const auto pulses = regular_pulses(2.0, 10.0);
  CHECK(flow::elevator_speed(pulses, SprocketSpec{}, 5.0) ==
        doctest::Approx(2.0).epsilon(1e-9));
  CHECK(flow::elevator_speed(pulses, SprocketSpec{}, 0.0) ==
        doctest::Approx(2.0).epsilon(1e-6));
  CHECK(flow::elevator_speed(pulses, SprocketSpec{}, 10.0) ==
        doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("elevator speed handles stop, jitter and the clamp") {
  const std::vector<SpeedPulse> stopped{{0.0, 0}, {5.0, 0}, {10.0, 0}};
  CHECK(flow::elevator_speed(stopped, SprocketSpec{}, 5.0) == 0.0);

  // Jittered train recovers the true speed within two percent.
  Rng rng(7);
  std::vector<SpeedPulse> jittered;
  jittered.push_back(SpeedPulse{0.0, 0});
  const double rate = 1.6 * 10.0 / 0.5;
  for (std::int64_t k = 1; static_cast<double>(k) / rate < 10.0; ++k) {
    jittered.push_back(
        SpeedPulse{static_cast<double>(k) / rate + rng.uniform(-0.002, 0.002),
                   k});
  }
  jittered.push_back(SpeedPulse{10.0, jittered.back().count});
  CHECK(flow::elevator_speed(jittered, SprocketSpec{}, 5.0) ==
        doctest::Approx(1.6).epsilon(0.02));

  // Physically impossible rates clamp to the 3 m/s ceiling.
  const std::vector<SpeedPulse> wild{{0.0, 0}, {0.5, 1000}, {1.0, 2000}};
  CHECK(flow::elevator_speed(wild, SprocketSpec{}, 0.5) == 3.0);
}

TEST_CASE("pulse stream errors") {
  const std::vector<SpeedPulse> one{{0.0, 0}};
  CHECK_THROWS_AS(flow::elevator_speed(one, SprocketSpec{}, 0.0), Error);

  const std::vector<SpeedPulse> backwards{{0.0, 0}, {1.0, 5}, {0.5, 6}};
  try {
    flow::elevator_speed(backwards, SprocketSpec{}, 0.5);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::stream_order);
  }

  const std::vector<SpeedPulse> rollback{{0.0, 10}, {1.0, 5}};
  CHECK_THROWS_AS(flow::elevator_speed(rollback, SprocketSpec{}, 0.5), Error);
}

TEST_CASE("accumulation matches the pinned arithmetic") {
  // dt = 1/7.5 s, V_e = 2 m/s, v_c = 0.015 m^3/m gives 0.004 m^3 per frame.
  const auto pulses = regular_pulses(2.0, 1.0);
  const auto estimates = flat_estimates(0.015, 1, 7.5);
  flow::AccumulateOptions opts;
  opts.frame_rate = 7.5;
  opts.rho = 1.0;
  flow::RunTotals totals;
  const auto samples = flow::accumulate(estimates, pulses, SprocketSpec{}, opts, totals);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].v_delta == doctest::Approx(0.004).epsilon(1e-12));
  CHECK(samples[0].v_e == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(totals.accumulated_volume == doctest::Approx(0.004).epsilon(1e-12));
}

TEST_CASE("point yield matches the pinned arithmetic") {
  const flow::YieldPoint y = flow::point_yield(30.0, 1.5, 1.8);
  CHECK(y.kg_per_m2 == doctest::Approx(100.0 / 9.0).epsilon(1e-12));
  CHECK(y.t_per_ha == doctest::Approx(1000.0 / 9.0).epsilon(1e-12));
  CHECK_THROWS_AS(flow::point_yield(30.0, 0.0, 1.8), Error);
  CHECK_THROWS_AS(flow::point_yield(30.0, 1.5, -1.0), Error);
}

TEST_CASE("interior and final frame intervals") {
  // Frames at 0 and 0.4 s; the interior interval is the gap, the final frame
  // covers one nominal frame period.
  const auto pulses = regular_pulses(1.0, 2.0);
  const auto estimates = flat_estimates(0.1, 2, 2.5);
  flow::AccumulateOptions opts;
  opts.frame_rate = 2.5;
  flow::RunTotals totals;
  const auto samples = flow::accumulate(estimates, pulses, SprocketSpec{}, opts, totals);
  REQUIRE(samples.size() == 2);
  CHECK(samples[0].v_delta == doctest::Approx(0.4 * 1.0 * 0.1).epsilon(1e-9));
  CHECK(samples[1].v_delta == doctest::Approx(0.4 * 1.0 * 0.1).epsilon(1e-9));
}

TEST_CASE("sqrt is applied per frame, not to the total") {
  const auto pulses = regular_pulses(1.0, 2.0);
  std::vector<est::VolumeEstimate> estimates = flat_estimates(0.04, 2, 2.5);
  estimates[1].v_c = 0.16;
  flow::AccumulateOptions opts;
  opts.transform = flow::Transform::sqrt;
  opts.frame_rate = 2.5;
  flow::RunTotals totals;
  flow::accumulate(estimates, pulses, SprocketSpec{}, opts, totals);
  // Per-frame: 0.4 * (sqrt(0.04) + sqrt(0.16)) = 0.4 * 0.6.
  CHECK(totals.accumulated_volume == doctest::Approx(0.24).epsilon(1e-9));
  // Transforming the accumulated identity volume instead would give
  // sqrt(0.4 * 0.2) = 0.283, a different number.
  CHECK(totals.accumulated_volume != doctest::Approx(std::sqrt(0.08)).epsilon(0.01));
}

TEST_CASE("mass scales exactly with density and speed") {
  const auto estimates = flat_estimates(0.09, 8, 2.5);
  flow::AccumulateOptions opts;
  opts.frame_rate = 2.5;
  opts.rho = 32.0;
  flow::RunTotals t1;
  flow::accumulate(estimates, regular_pulses(1.0, 4.0), SprocketSpec{}, opts, t1);
  opts.rho = 64.0;
  flow::RunTotals t2;
  flow::accumulate(estimates, regular_pulses(1.0, 4.0), SprocketSpec{}, opts, t2);
  CHECK(t2.predicted_mass_kg == 2.0 * t1.predicted_mass_kg);

  opts.rho = 32.0;
  flow::RunTotals t4;
  flow::accumulate(estimates, regular_pulses(2.0, 4.0), SprocketSpec{}, opts, t4);
  CHECK(t4.accumulated_volume == doctest::Approx(2.0 * t1.accumulated_volume).epsilon(1e-9));
}

TEST_CASE("empty frames contribute exactly zero mass") {
  const auto estimates = flat_estimates(0.0, 10, 2.5, est::FrameQuality::empty);
  flow::AccumulateOptions opts;
  opts.frame_rate = 2.5;
  opts.rho = 123.4;
  flow::RunTotals totals;
  const auto samples = flow::accumulate(estimates, regular_pulses(2.2, 4.0),
                                        SprocketSpec{}, opts, totals);
  CHECK(totals.predicted_mass_kg == 0.0);
  CHECK(totals.accumulated_volume == 0.0);
  for (const flow::FlowSample& s : samples) CHECK(s.m_delta == 0.0);
}

TEST_CASE("low light policy include versus exclude") {
  std::vector<est::VolumeEstimate> estimates = flat_estimates(0.1, 4, 2.5);
  estimates[1].quality = est::FrameQuality::low_light;
  estimates[2].quality = est::FrameQuality::low_light;
  const auto pulses = regular_pulses(1.0, 4.0);

  flow::AccumulateOptions opts;
  opts.frame_rate = 2.5;
  flow::RunTotals inc;
  flow::accumulate(estimates, pulses, SprocketSpec{}, opts, inc);
  CHECK(inc.n_low_light == 2);
  CHECK(inc.n_used == 4);
  CHECK(inc.accumulated_volume == doctest::Approx(4 * 0.04).epsilon(1e-9));

  opts.policy = flow::LowLightPolicy::exclude;
  flow::RunTotals exc;
  const auto samples = flow::accumulate(estimates, pulses, SprocketSpec{}, opts, exc);
  CHECK(exc.n_used == 2);
  CHECK(exc.accumulated_volume == doctest::Approx(2 * 0.04).epsilon(1e-9));
  REQUIRE(samples.size() == 4);  // excluded frames stay in the stream
  CHECK(samples[1].v_delta == 0.0);
  CHECK(samples[2].m_delta == 0.0);
}

TEST_CASE("accumulate input validation") {
  const auto pulses = regular_pulses(1.0, 4.0);
  auto estimates = flat_estimates(0.1, 4, 2.5);
  flow::AccumulateOptions opts;
  opts.frame_rate = 2.5;
  flow::RunTotals totals;

  std::swap(estimates[1], estimates[2]);
  try {
    flow::accumulate(estimates, pulses, SprocketSpec{}, opts, totals);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::stream_order);
  }
  std::swap(estimates[1], estimates[2]);

  try {
    flow::accumulate(estimates, regular_pulses(1.0, 0.5), SprocketSpec{}, opts, totals);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::insufficient_data);
  }

  opts.rho = 0.0;
  CHECK_THROWS_AS(flow::accumulate(estimates, pulses, SprocketSpec{}, opts, totals),
                  Error);
  opts.rho = 1.0;
  opts.frame_rate = 0.0;
  CHECK_THROWS_AS(flow::accumulate(estimates, pulses, SprocketSpec{}, opts, totals),
                  Error);
}

TEST_CASE("load records") {
  flow::RunTotals totals;
  totals.accumulated_volume = 2.5;
  totals.predicted_mass_kg = 150.0;
  totals.n_frames = 100;
  totals.n_low_light = 7;
  const flow::LoadRecord r =
      flow::build_load_record("ld1", 2015, "LA", "green", totals, 120.0, 160.0, false);
  CHECK(r.load_id == "ld1");
  CHECK(r.accum_volume == 2.5);
  REQUIRE(r.actual_mass_kg.has_value());
  CHECK(*r.actual_mass_kg == 160.0);
  CHECK(r.n_low_light == 7);
  CHECK(flow::calibratable(r));

  const flow::LoadRecord unweighed =
      flow::build_load_record("ld2", 2015, "LA", "green", totals, 120.0, std::nullopt,
                              false);
  CHECK(!flow::calibratable(unweighed));

  CHECK_THROWS_AS(flow::build_load_record("x", 0, "r", "c", totals, 0.0, 1.0, false),
                  Error);
  CHECK_THROWS_AS(flow::build_load_record("x", 0, "r", "c", totals, 10.0, -1.0, false),
                  Error);
}
