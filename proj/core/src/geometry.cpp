#include "rnr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rnr {

double wrap_pi(double angle) {
  double a = std::remainder(angle, 2.0 * M_PI);  // [-pi, pi]
  if (a <= -M_PI) a = M_PI;
  return a;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error("intrinsics: image dimensions must be positive");
  if (cx < 0.0 || cx >= width) throw Error("intrinsics: cx outside [0, width)");
  if (cy < 0.0 || cy >= height) throw Error("intrinsics: cy outside [0, height)");
  if (!(depth_scale > 0.0)) throw Error("intrinsics: depth_scale must be positive");
}

std::array<double, 9> Pose3::rotation() const {
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  // Rz(yaw) * Ry(pitch) * Rx(roll)
  return {cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
          sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
          -sp,     cp * sr,                cp * cr};
}

Vec3 Pose3::rotate(const Vec3& v) const {
  const auto r = rotation();
  return {r[0] * v.x + r[1] * v.y + r[2] * v.z,
          r[3] * v.x + r[4] * v.y + r[5] * v.z,
          r[6] * v.x + r[7] * v.y + r[8] * v.z};
}

Vec3 Pose3::transform(const Vec3& v) const {
  Vec3 r = rotate(v);
  return {r.x + x, r.y + y, r.z + z};
}

Pose3 Pose3::from_rotation(const std::array<double, 9>& r, double tx, double ty, double tz) {
  Pose3 p;
  p.x = tx;
  p.y = ty;
  p.z = tz;
  p.pitch = std::asin(std::clamp(-r[6], -1.0, 1.0));
  p.roll = std::atan2(r[7], r[8]);
  p.yaw = std::atan2(r[3], r[0]);
  return p.normalized();
}

Pose3 Pose3::compose(const Pose3& other) const {
  const auto ra = rotation();
  const auto rb = other.rotation();
  std::array<double, 9> r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r[i * 3 + j] = ra[i * 3] * rb[j] + ra[i * 3 + 1] * rb[3 + j] + ra[i * 3 + 2] * rb[6 + j];
  const Vec3 t = transform({other.x, other.y, other.z});
  return from_rotation(r, t.x, t.y, t.z);
}

Pose3 Pose3::inverse() const {
  const auto r = rotation();
  // transpose
  std::array<double, 9> rt = {r[0], r[3], r[6], r[1], r[4], r[7], r[2], r[5], r[8]};
  const double tx = -(rt[0] * x + rt[1] * y + rt[2] * z);
  const double ty = -(rt[3] * x + rt[4] * y + rt[5] * z);
  const double tz = -(rt[6] * x + rt[7] * y + rt[8] * z);
  return from_rotation(rt, tx, ty, tz);
}

Pose3 Pose3::normalized() const {
  Pose3 p = *this;
  p.roll = wrap_pi(p.roll);
  p.pitch = wrap_pi(p.pitch);
  p.yaw = wrap_pi(p.yaw);
  return p;
}

Vec3 unproject_pixel(const CameraIntrinsics& intrinsics, double h, double w, double depth,
                     const Pose3& pose, double max_depth) {
  if (!std::isfinite(depth) || depth <= 0.0 || depth > max_depth)
    throw InvalidDepth("depth " + std::to_string(depth) + " outside (0, " + std::to_string(max_depth) + "]");
  // Camera frame: +x right, +y down, +z along the optical axis. Body frame:
  // +x forward, +y left, +z up.
  const double xc = (w - intrinsics.cx) * depth / intrinsics.fx;
  const double yc = (h - intrinsics.cy) * depth / intrinsics.fy;
  const Vec3 body{depth, -xc, -yc};
  return pose.transform(body);
}

GridIndex grid_discretize(const Vec3& q, double cell_size, GridIndex origin) {
  return {static_cast<int>(std::floor(q.x / cell_size)) + origin.u,
          static_cast<int>(std::floor(q.y / cell_size)) + origin.v};
}

void positional_encoding(const Vec3& q, const PosEncodingConfig& cfg, double* out) {
  double scale = 1.0;
  for (int j = 0; j < cfg.octaves; ++j) {
    out[j * 6 + 0] = std::sin(scale * q.x);
    out[j * 6 + 1] = std::sin(scale * q.y);
    out[j * 6 + 2] = std::sin(scale * q.z);
    out[j * 6 + 3] = std::cos(scale * q.x);
    out[j * 6 + 4] = std::cos(scale * q.y);
    out[j * 6 + 5] = std::cos(scale * q.z);
    scale *= 2.0;
  }
}

std::vector<double> positional_encoding(const Vec3& q, const PosEncodingConfig& cfg) {
  std::vector<double> out(static_cast<std::size_t>(cfg.octaves) * 6);
  positional_encoding(q, cfg, out.data());
  return out;
}

namespace {

// Standard resize coordinate mapping; identity when in == out.
inline double src_coord(int dst, int out_dim, int in_dim) {
  return (dst + 0.5) * static_cast<double>(in_dim) / out_dim - 0.5;
}

}  // namespace

std::pair<RgbdFrame, CameraIntrinsics> standardize_intrinsics(const RgbdFrame& frame,
                                                              const CameraIntrinsics& intrinsics,
                                                              double target_focal) {
  if (!(target_focal > 0.0)) throw Error("standardize_intrinsics: target focal must be positive");
  intrinsics.validate();
  if (frame.width != intrinsics.width || frame.height != intrinsics.height)
    throw Error("standardize_intrinsics: frame and intrinsics dimensions disagree");

  const int out_w = static_cast<int>(std::lround(frame.width * target_focal / intrinsics.fx));
  const int out_h = static_cast<int>(std::lround(frame.height * target_focal / intrinsics.fy));
  if (out_w < 8 || out_h < 8)
    throw DegenerateResize("standardize_intrinsics: output " + std::to_string(out_h) + "x" +
                           std::to_string(out_w) + " below 8 pixels");

  RgbdFrame out = RgbdFrame::zeros(out_h, out_w);
  out.timestamp = frame.timestamp;

  if (out_w == frame.width && out_h == frame.height) {
    out.color = frame.color;
    out.depth = frame.depth;
    out.valid = frame.valid;
  } else {
    for (int h = 0; h < out_h; ++h) {
      const double sy = src_coord(h, out_h, frame.height);
      const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, frame.height - 1);
      const int y1 = std::min(y0 + 1, frame.height - 1);
      const double wy = std::clamp(sy - y0, 0.0, 1.0);
      const int ny = std::clamp(static_cast<int>(std::lround(sy)), 0, frame.height - 1);
      for (int w = 0; w < out_w; ++w) {
        const double sx = src_coord(w, out_w, frame.width);
        const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, frame.width - 1);
        const int x1 = std::min(x0 + 1, frame.width - 1);
        const double wx = std::clamp(sx - x0, 0.0, 1.0);
        for (int c = 0; c < 3; ++c) {
          const double v00 = frame.color[frame.pixel_index(y0, x0) * 3 + c];
          const double v01 = frame.color[frame.pixel_index(y0, x1) * 3 + c];
          const double v10 = frame.color[frame.pixel_index(y1, x0) * 3 + c];
          const double v11 = frame.color[frame.pixel_index(y1, x1) * 3 + c];
          const double v = (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) + wy * ((1.0 - wx) * v10 + wx * v11);
          out.color[out.pixel_index(h, w) * 3 + c] = static_cast<float>(v);
        }
        const int nx = std::clamp(static_cast<int>(std::lround(sx)), 0, frame.width - 1);
        out.depth[out.pixel_index(h, w)] = frame.depth[frame.pixel_index(ny, nx)];
        out.valid[out.pixel_index(h, w)] = frame.valid[frame.pixel_index(ny, nx)];
      }
    }
  }

  CameraIntrinsics ci = intrinsics;
  ci.fx = target_focal;
  ci.fy = target_focal;
  ci.cx = intrinsics.cx * static_cast<double>(out_w) / frame.width;
  ci.cy = intrinsics.cy * static_cast<double>(out_h) / frame.height;
  ci.width = out_w;
  ci.height = out_h;
  return {std::move(out), ci};
}

}  // namespace rnr
