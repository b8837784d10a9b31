#pragma once

#include <cstdint>
#include <vector>

#include "rnr/frame.hpp"
#include "rnr/geometry.hpp"

namespace rnr {

struct EncoderConfig {
  int latent_dim = 32;
  std::uint64_t seed = 0;
  double weight_sharpness = 0.25;       // softmax temperature for the weight logits
  bool use_positional_encoding = true;  // concatenate gamma(q) channels
  bool uniform_weights = false;         // force beta uniform (unweighted-map variant)

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// Per-pixel latent codes and importance weights. Weights are softmax-normalized
// over valid pixels (sum to 1); invalid pixels carry zero codes and weight.
struct PixelCodes {
  int height = 0;
  int width = 0;
  int dim = 0;
  std::vector<float> codes;          // H*W*D
  std::vector<double> weights;       // H*W
  std::vector<std::uint8_t> valid;   // H*W

  std::size_t pixel_index(int h, int w) const {
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(width) + static_cast<std::size_t>(w);
  }
  const float* code_at(int h, int w) const { return &codes[pixel_index(h, w) * dim]; }
};

// Deterministic training-free encoder: a seeded linear projection with a tanh
// bound over per-pixel features [r, g, b, depth/max, |gx|, |gy|, gamma(q)...].
// Weight logits are local gradient energy, softmaxed over valid pixels.
// Throws AllPixelsInvalid when the frame has no valid pixel.
PixelCodes encode_frame(const RgbdFrame& frame, const CameraIntrinsics& intrinsics, const Pose3& pose,
                        const EncoderConfig& cfg, const PosEncodingConfig& pe_cfg,
                        double max_depth = kDefaultMaxDepth);

// Number of raw feature channels feeding the projection.
int encoder_feature_dim(const EncoderConfig& cfg, const PosEncodingConfig& pe_cfg);

}  // namespace rnr
