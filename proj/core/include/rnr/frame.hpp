#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace rnr {

// Calibrated RGB-D frame. Color is row-major H*W*3 in [0,1], depth is meters,
// valid marks pixels with a usable depth return.
struct RgbdFrame {
  int height = 0;
  int width = 0;
  std::vector<float> color;          // H*W*3
  std::vector<float> depth;          // H*W
  std::vector<std::uint8_t> valid;   // H*W, 0 or 1
  std::int64_t timestamp = 0;

  std::size_t pixel_index(int h, int w) const {
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(width) + static_cast<std::size_t>(w);
  }
  bool is_valid(int h, int w) const { return valid[pixel_index(h, w)] != 0; }
  float depth_at(int h, int w) const { return depth[pixel_index(h, w)]; }
  const float* color_at(int h, int w) const { return &color[pixel_index(h, w) * 3]; }

  static RgbdFrame zeros(int height, int width) {
    RgbdFrame f;
    f.height = height;
    f.width = width;
    f.color.assign(static_cast<std::size_t>(height) * width * 3, 0.0f);
    f.depth.assign(static_cast<std::size_t>(height) * width, 0.0f);
    f.valid.assign(static_cast<std::size_t>(height) * width, 0);
    return f;
  }
};

}  // namespace rnr
