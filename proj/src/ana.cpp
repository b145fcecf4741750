#include "caneflow/ana.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "caneflow/errors.hpp"
#include "caneflow/kernels.hpp"

namespace caneflow::ana {
namespace {

double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

// Robust noise scale from successive differences, immune to a few level
// shifts.
double sigma_from_diffs(std::span<const double> y) {
  std::vector<double> d;
  d.reserve(y.size() - 1);
  for (std::size_t i = 1; i < y.size(); ++i) d.push_back(y[i] - y[i - 1]);
  std::vector<double> tmp = d;
  const double med = median_inplace(tmp);
  std::vector<double> dev;
  dev.reserve(d.size());
  for (double v : d) dev.push_back(std::abs(v - med));
  const double mad = median_inplace(dev);
  return mad / 0.6745 / std::sqrt(2.0);
}

class SegmentCost {
 public:
  explicit SegmentCost(std::span<const double> y) : s1_(y.size() + 1, 0.0), s2_(y.size() + 1, 0.0) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      s1_[i + 1] = s1_[i] + y[i];
      s2_[i + 1] = s2_[i] + y[i] * y[i];
    }
  }

  // Sum of squared deviations from the segment mean over [a, b).
  double operator()(std::size_t a, std::size_t b) const {
    const double n = static_cast<double>(b - a);
    const double s = s1_[b] - s1_[a];
    const double q = s2_[b] - s2_[a];
    return std::max(q - s * s / n, 0.0);
  }

 private:
  std::vector<double> s1_, s2_;
};

struct BestSplit {
  std::size_t k = 0;
  double gain = -1.0;
};

BestSplit best_split(const SegmentCost& cost, std::size_t a, std::size_t b,
                     std::size_t min_seg) {
  BestSplit best;
  if (b - a < 2 * min_seg) return best;
  const double whole = cost(a, b);
  for (std::size_t k = a + min_seg; k + min_seg <= b; ++k) {
    const double gain = whole - cost(a, k) - cost(k, b);
    if (gain > best.gain) {
      best.gain = gain;
      best.k = k;
    }
  }
  return best;
}

void segment(const SegmentCost& cost, std::size_t a, std::size_t b, std::size_t min_seg,
             double penalty, std::vector<std::size_t>& out) {
  const BestSplit s = best_split(cost, a, b, min_seg);
  if (s.gain <= penalty) return;
  segment(cost, a, s.k, min_seg, penalty, out);
  out.push_back(s.k);
  segment(cost, s.k, b, min_seg, penalty, out);
}

std::tuple<int, std::string, std::string> group_key(const flow::LoadRecord& r,
                                                    const GroupBy& g) {
  return {g.year ? r.year : 0, g.crop_type ? r.crop_type : std::string("*"),
          g.region ? r.region : std::string("*")};
}

}  // namespace

std::optional<DensityEstimate> estimate_density(const flow::LoadRecord& r,
                                                double timestamp) {
  if (!flow::calibratable(r)) return std::nullopt;
  DensityEstimate d;
  d.load_id = r.load_id;
  d.rho = *r.actual_mass_kg / r.accum_volume;
  d.year = r.year;
  d.region = r.region;
  d.crop_type = r.crop_type;
  d.timestamp = timestamp;
  return d;
}

double cv(std::span<const double> values) {
  if (values.size() < 2)
    throw Error(ErrorCategory::insufficient_data, "cv needs at least two values");
  const double n = static_cast<double>(values.size());
  const double mean = kern::sum(values.data(), values.size()) / n;
  if (!(mean > 0.0))
    throw Error(ErrorCategory::domain, "cv needs a positive mean");
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (n - 1.0)) / mean * 100.0;
}

FitResult fit_through_origin(std::span<const FitPoint> points, bool exclude_overflow) {
  std::vector<double> xs;
  std::vector<double> ys;
  std::size_t excluded = 0;
  for (const FitPoint& p : points) {
    if (exclude_overflow && p.overflow) {
      ++excluded;
      continue;
    }
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  if (xs.size() < 2)
    throw Error(ErrorCategory::insufficient_data, "fit needs at least two points");
  const double sxx = kern::dot(xs.data(), xs.data(), xs.size());
  if (!(sxx > 0.0))
    throw Error(ErrorCategory::domain, "fit is degenerate: all x are zero");
  const double sxy = kern::dot(xs.data(), ys.data(), xs.size());
  FitResult fit;
  fit.slope = sxy / sxx;
  fit.n = xs.size();
  fit.excluded = excluded;
  const double ybar = kern::sum(ys.data(), ys.size()) / static_cast<double>(ys.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - fit.slope * xs[i];
    ss_res += r * r;
    const double d = ys[i] - ybar;
    ss_tot += d * d;
  }
  if (ss_tot > 0.0)
    fit.r_squared = std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
  else
    fit.r_squared = ss_res > 0.0 ? 0.0 : 1.0;
  return fit;
}

GroupBy parse_group_by(const std::string& keys) {
  GroupBy g{false, false, false};
  std::stringstream ss(keys);
  std::string item;
  bool any = false;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "year")
      g.year = true;
    else if (item == "region")
      g.region = true;
    else if (item == "crop_type")
      g.crop_type = true;
    else
      throw Error(ErrorCategory::config,
                  "unknown group-by key '" + item + "' (year|region|crop_type)");
    any = true;
  }
  if (!any) throw Error(ErrorCategory::config, "group-by needs at least one key");
  return g;
}

std::vector<CVReport> compare_transforms(std::span<const flow::LoadRecord> identity_loads,
                                         std::span<const flow::LoadRecord> sqrt_loads,
                                         const GroupBy& group_by) {
  if (identity_loads.size() != sqrt_loads.size())
    throw Error(ErrorCategory::config, "transform comparison needs paired load lists");
  struct Group {
    std::vector<double> rho_identity;
    std::vector<double> rho_sqrt;
  };
  std::map<std::tuple<int, std::string, std::string>, Group> groups;
  for (std::size_t i = 0; i < identity_loads.size(); ++i) {
    const flow::LoadRecord& a = identity_loads[i];
    const flow::LoadRecord& b = sqrt_loads[i];
    if (a.load_id != b.load_id)
      throw Error(ErrorCategory::config, "transform comparison lists disagree on load ids");
    if (!flow::calibratable(a) || !flow::calibratable(b)) continue;
    Group& g = groups[group_key(a, group_by)];
    g.rho_identity.push_back(*a.actual_mass_kg / a.accum_volume);
    g.rho_sqrt.push_back(*b.actual_mass_kg / b.accum_volume);
  }
  std::vector<CVReport> out;
  for (const auto& [key, g] : groups) {
    if (g.rho_identity.size() < 2) continue;
    CVReport r;
    r.year = std::get<0>(key);
    r.crop_type = std::get<1>(key);
    r.location = std::get<2>(key);
    r.n_loads = g.rho_identity.size();
    r.cv_identity = cv(g.rho_identity);
    r.cv_sqrt = cv(g.rho_sqrt);
    out.push_back(std::move(r));
  }
  return out;
}

ShiftReport detect_shift(std::span<const DensityEstimate> series, const ShiftOptions& opts) {
  if (series.size() < 10)
    throw Error(ErrorCategory::insufficient_data, "shift detection needs at least 10 loads");
  if (opts.min_segment < 2)
    throw Error(ErrorCategory::config, "min_segment must be at least 2");
  const std::size_t n = series.size();
  std::vector<double> y;
  y.reserve(n);
  for (const DensityEstimate& d : series) y.push_back(d.rho);
  for (std::size_t i = 1; i < n; ++i)
    if (!(series[i].timestamp >= series[i - 1].timestamp))
      throw Error(ErrorCategory::stream_order, "density series must be time-ordered");

  ShiftReport rep;
  rep.sigma_hat = sigma_from_diffs(y);
  rep.penalty = opts.penalty_scale * rep.sigma_hat * rep.sigma_hat *
                std::log(static_cast<double>(n));

  const SegmentCost cost(y);
  rep.stat_trace.assign(n, 0.0);
  if (n >= 2 * opts.min_segment) {
    const double whole = cost(0, n);
    for (std::size_t k = opts.min_segment; k + opts.min_segment <= n; ++k)
      rep.stat_trace[k] = whole - cost(0, k) - cost(k, n);
  }

  segment(cost, 0, n, opts.min_segment, rep.penalty, rep.changepoints);
  std::sort(rep.changepoints.begin(), rep.changepoints.end());
  for (std::size_t k : rep.changepoints)
    rep.changepoint_timestamps.push_back(series[k].timestamp);

  std::size_t prev = 0;
  for (std::size_t s = 0; s <= rep.changepoints.size(); ++s) {
    const std::size_t end = s < rep.changepoints.size() ? rep.changepoints[s] : n;
    double sum = 0.0;
    for (std::size_t i = prev; i < end; ++i) sum += y[i];
    rep.segment_means.push_back(sum / static_cast<double>(end - prev));
    prev = end;
  }
  return rep;
}

}  // namespace caneflow::ana
