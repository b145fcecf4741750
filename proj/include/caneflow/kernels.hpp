// Data-parallel inner loops behind the simulator and estimator: vertical
// ray casts against finite cylinders, ROI clipping, and reductions.
//
// Each kernel has a scalar reference implementation and an AVX2 variant; the
// backend is selected at runtime (best available by default). The ray-cast and
// clip kernels are lane-for-lane bit-identical between backends; the
// reductions differ only in summation order.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "caneflow/types.hpp"

namespace caneflow::kern {

enum class Backend { scalar, avx2 };

const char* backend_name(Backend b);
bool backend_supported(Backend b);
Backend active_backend();
// Throws a config error if the backend is not supported on this CPU.
void select_backend(Backend b);
void select_best_backend();

// Structure-of-arrays cylinder set for batched vertical ray casting.
// Axis vectors must be unit norm; half_len is half the cylinder length.
struct CylinderField {
  std::vector<double> cx, cy, cz;
  std::vector<double> ax, ay, az;
  std::vector<double> half_len, radius;

  std::size_t size() const { return cx.size(); }
  void reserve(std::size_t n);
  void push(const Vec3& center, const Vec3& axis, double length, double diameter);
};

// out[i] = highest z at which the vertical ray through (xs[i], ys[i]) meets
// any cylinder surface (lateral wall or end cap), or 0 if it meets none.
void raycast_max_z(const CylinderField& field, const double* xs, const double* ys,
                   std::size_t n, double* out);

// Retains points with (x, y) inside the ROI; z is rebased to the elevator
// plane and clamped to >= 0. Output arrays must hold n elements. Returns the
// number of retained points. In-place operation (ox == xs, ...) is allowed.
std::size_t clip_points(const double* xs, const double* ys, const double* zs, std::size_t n,
                        const RoiSpec& roi, double* ox, double* oy, double* oz);

double sum(const double* v, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);

}  // namespace caneflow::kern
