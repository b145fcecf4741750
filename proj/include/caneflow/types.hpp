// Core value types shared across the pipeline: geometry, frames, pulses.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace caneflow {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(const Vec3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Rectangular region of interest on the elevator, axis-aligned in the
// elevator frame. x runs across the elevator, y along conveyance, z up from
// the elevator floor (plane_height).
struct RoiSpec {
  double x0 = 0.0;
  double y0 = 0.0;
  double width = 0.8;    // m, across elevator
  double length = 0.24;  // m, along conveyance
  double plane_height = 0.0;

  double area() const { return width * length; }
  bool contains(double x, double y) const {
    return x >= x0 && x <= x0 + width && y >= y0 && y <= y0 + length;
  }
};

// One 3-D sample of the material surface. Stored as parallel coordinate
// arrays; the wire format is flat [x,y,z,...] triplets.
struct PointCloudFrame {
  double timestamp = 0.0;  // s
  double lux = 0.0;
  std::vector<double> xs, ys, zs;

  std::size_t size() const { return xs.size(); }
  void reserve(std::size_t n) {
    xs.reserve(n);
    ys.reserve(n);
    zs.reserve(n);
  }
  void push(double x, double y, double z) {
    xs.push_back(x);
    ys.push_back(y);
    zs.push_back(z);
  }
};

// Cumulative pulse count from the drive-sprocket proximity sensor.
struct SpeedPulse {
  double timestamp = 0.0;  // s
  std::int64_t count = 0;
};

// Converts sprocket pulses into chain travel.
struct SprocketSpec {
  int pulses_per_rev = 10;
  double circumference = 0.5;  // m of chain travel per revolution
};

}  // namespace caneflow
