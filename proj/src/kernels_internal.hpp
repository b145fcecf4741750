// Backend entry points shared between the dispatcher and the per-backend
// translation units. Not installed.
#pragma once

#include <cstddef>

#include "caneflow/kernels.hpp"

namespace caneflow::kern {

// Cylinder parameters broadcast per billet in the ray-cast loops. Degenerate
// axes (|az| ~ 1 or ~ 0) are handled by masking, not branching, so the scalar
// and SIMD paths execute the same arithmetic per lane.
inline constexpr double kAxisEps = 1e-12;

void raycast_max_z_scalar(const CylinderField& field, const double* xs, const double* ys,
                          std::size_t n, double* out);
std::size_t clip_points_scalar(const double* xs, const double* ys, const double* zs,
                               std::size_t n, const RoiSpec& roi, double* ox, double* oy,
                               double* oz);
double sum_scalar(const double* v, std::size_t n);
double dot_scalar(const double* a, const double* b, std::size_t n);

#if defined(__x86_64__) || defined(_M_X64)
void raycast_max_z_avx2(const CylinderField& field, const double* xs, const double* ys,
                        std::size_t n, double* out);
std::size_t clip_points_avx2(const double* xs, const double* ys, const double* zs,
                             std::size_t n, const RoiSpec& roi, double* ox, double* oy,
                             double* oz);
double sum_avx2(const double* v, std::size_t n);
double dot_avx2(const double* a, const double* b, std::size_t n);
#endif

}  // namespace caneflow::kern
