#pragma once

#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "rnr/error.hpp"
#include "rnr/frame.hpp"

namespace rnr {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// Wraps an angle to (-pi, pi].
double wrap_pi(double angle);

// Pinhole camera parameters. Depth images store raw units; depth_scale
// converts them to meters.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  double depth_scale = 1.0;

  void validate() const;  // throws Error on broken invariants
};

// 6-DoF pose in the world frame. Convention: +x is camera-forward at zero
// yaw, +z is up, the frame is right-handed (+y left). Rotation applies as
// Rz(yaw) * Ry(pitch) * Rx(roll); angles are kept in (-pi, pi].
struct Pose3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  std::array<double, 9> rotation() const;  // row-major 3x3
  Vec3 rotate(const Vec3& v) const;
  Vec3 transform(const Vec3& v) const;  // rotate then translate

  // this * other: applies `other` in this pose's frame.
  Pose3 compose(const Pose3& other) const;
  Pose3 inverse() const;
  Pose3 normalized() const;

  static Pose3 from_rotation(const std::array<double, 9>& r, double x, double y, double z);
};

struct GridIndex {
  int u = 0;
  int v = 0;
  friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

struct PosEncodingConfig {
  int octaves = 4;
  bool enabled = true;
};

inline constexpr double kDefaultMaxDepth = 10.0;  // meters; deeper returns are treated as no-return

// Back-projects pixel (h, w) at the given depth through the camera model and
// transforms it into the world frame. Throws InvalidDepth when depth is not
// a finite positive value within max_depth.
Vec3 unproject_pixel(const CameraIntrinsics& intrinsics, double h, double w, double depth,
                     const Pose3& pose, double max_depth = kDefaultMaxDepth);

// Floor-discretizes a world position onto the grid: u = floor(x/s) + origin.u.
GridIndex grid_discretize(const Vec3& q, double cell_size, GridIndex origin);

// Fourier features of a 3D position, octave-major: for octave j the six
// entries are sin(2^j * q) then cos(2^j * q), each applied component-wise.
// Output length is 6 * octaves.
void positional_encoding(const Vec3& q, const PosEncodingConfig& cfg, double* out);
std::vector<double> positional_encoding(const Vec3& q, const PosEncodingConfig& cfg);

// Resizes a frame so that fx = fy = target_focal (bilinear color, nearest
// depth/valid). Output dimensions are round(dim * target_focal / focal); the
// principal point scales with the resize ratio. Throws DegenerateResize when
// an output dimension falls below 8 pixels.
std::pair<RgbdFrame, CameraIntrinsics> standardize_intrinsics(const RgbdFrame& frame,
                                                              const CameraIntrinsics& intrinsics,
                                                              double target_focal);

// Shared grid geometry for latent and occupancy maps: cell (u, v) covers
// world x in [(u - origin.u) * s, (u - origin.u + 1) * s), same for y/v.
struct MapGeometry {
  int cells_u = 128;
  int cells_v = 128;
  double cell_size = 0.25;
  GridIndex origin{64, 64};

  bool contains(GridIndex c) const {
    return c.u >= 0 && c.u < cells_u && c.v >= 0 && c.v < cells_v;
  }
  GridIndex world_to_cell(double x, double y) const {
    return grid_discretize(Vec3{x, y, 0.0}, cell_size, origin);
  }
  std::pair<double, double> cell_center(GridIndex c) const {
    return {(c.u - origin.u + 0.5) * cell_size, (c.v - origin.v + 0.5) * cell_size};
  }
  std::size_t flat(int u, int v) const {
    return static_cast<std::size_t>(u) * static_cast<std::size_t>(cells_v) + static_cast<std::size_t>(v);
  }
  friend bool operator==(const MapGeometry&, const MapGeometry&) = default;
};

}  // namespace rnr
