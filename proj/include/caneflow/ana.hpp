// Calibration analytics over load records: per-load density, coefficient of
// variation by group, through-origin mass fit, transform comparison, and
// offline density-shift detection.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "caneflow/flow.hpp"

namespace caneflow::ana {

struct DensityEstimate {
  std::string load_id;
  double rho = 0.0;  // actual mass / accumulated transformed volume
  int year = 0;
  std::string region;
  std::string crop_type;
  double timestamp = 0.0;  // load sequence position
};

// Empty when the load is uncalibratable (unweighed or zero volume).
std::optional<DensityEstimate> estimate_density(const flow::LoadRecord& r,
                                                double timestamp = 0.0);

// Sample standard deviation (n-1) over mean, in percent.
double cv(std::span<const double> values);

struct FitPoint {
  double x = 0.0;
  double y = 0.0;
  bool overflow = false;
};

struct FitResult {
  double slope = 0.0;
  double r_squared = 0.0;
  std::size_t n = 0;
  std::size_t excluded = 0;
};

// Least squares y = slope * x with the intercept forced through zero;
// r_squared is the standard 1 - SSres/SStot with SStot about the mean of y,
// clamped to [0, 1].
FitResult fit_through_origin(std::span<const FitPoint> points, bool exclude_overflow);

struct GroupBy {
  bool year = true;
  bool region = true;
  bool crop_type = true;
};

GroupBy parse_group_by(const std::string& keys);  // comma list; throws config error

struct CVReport {
  int year = 0;               // 0 renders as * when not grouped
  std::string crop_type;      // "*" when not grouped
  std::string location;       // region; "*" when not grouped
  std::size_t n_loads = 0;
  double cv_identity = 0.0;   // percent
  double cv_sqrt = 0.0;       // percent
};

// Paired per-group CV of calibration densities under both transforms. Inputs
// must describe the same loads in the same order; groups with fewer than two
// calibratable loads are skipped.
std::vector<CVReport> compare_transforms(std::span<const flow::LoadRecord> identity_loads,
                                         std::span<const flow::LoadRecord> sqrt_loads,
                                         const GroupBy& group_by = {});

struct ShiftOptions {
  double penalty_scale = 8.0;
  std::size_t min_segment = 5;
};

struct ShiftReport {
  std::vector<std::size_t> changepoints;  // index of first load after each shift
  std::vector<double> changepoint_timestamps;
  std::vector<double> segment_means;
  std::vector<double> stat_trace;  // first-level split gain per index
  double penalty = 0.0;
  double sigma_hat = 0.0;
};

// Binary segmentation on segment-mean cost with a variance-scaled penalty.
ShiftReport detect_shift(std::span<const DensityEstimate> series,
                         const ShiftOptions& opts = {});

}  // namespace caneflow::ana
