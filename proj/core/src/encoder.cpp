#include "rnr/encoder.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <random>

namespace rnr {

namespace {

// Relative influence of each feature block on the latent code. Color carries
// the matching signal; depth and screen-space gradients are view-dependent and
// kept soft; positional-encoding x/y channels mismatch between egocentric and
// world coordinates and stay small, while the z channels carry the vertical
// structure the 2D grid would otherwise lose.
constexpr double kColorGain = 1.0;
constexpr double kDepthGain = 0.25;
constexpr double kGradGain = 0.5;
constexpr double kPeGainXY = 0.1;
constexpr double kPeGainZ = 0.7;

double octave_damp(int octave) { return std::pow(2.0, -0.5 * octave); }

double luminance(const float* rgb) {
  return 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2];
}

}  // namespace

int encoder_feature_dim(const EncoderConfig&, const PosEncodingConfig& pe_cfg) {
  return 6 + (pe_cfg.enabled ? 6 * pe_cfg.octaves : 0);
}

PixelCodes encode_frame(const RgbdFrame& frame, const CameraIntrinsics& intrinsics, const Pose3& pose,
                        const EncoderConfig& cfg, const PosEncodingConfig& pe_cfg, double max_depth) {
  const int height = frame.height;
  const int width = frame.width;
  const std::size_t n = static_cast<std::size_t>(height) * width;

  std::size_t valid_count = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (frame.valid[i]) ++valid_count;
  if (valid_count == 0) throw AllPixelsInvalid("encode_frame: no valid pixel");

  const int feat_dim = encoder_feature_dim(cfg, pe_cfg);
  const int latent_dim = cfg.latent_dim;

  // Fixed seeded projection; row-major generation keeps it reproducible.
  Eigen::MatrixXd projection(latent_dim, feat_dim);
  {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(feat_dim)));
    for (int d = 0; d < latent_dim; ++d)
      for (int f = 0; f < feat_dim; ++f) projection(d, f) = gauss(rng);
  }

  // Masked luminance gradients: central difference when both neighbors are
  // valid, one-sided against the pixel itself otherwise, zero when isolated.
  std::vector<double> grad_x(n, 0.0), grad_y(n, 0.0), grad_energy(n, 0.0);
  auto lum_at = [&](int h, int w) { return luminance(frame.color_at(h, w)); };
  for (int h = 0; h < height; ++h) {
    for (int w = 0; w < width; ++w) {
      const std::size_t i = frame.pixel_index(h, w);
      if (!frame.valid[i]) continue;
      const double center = lum_at(h, w);
      auto diff_along = [&](int h0, int w0, int h1, int w1) {
        const bool ok0 = h0 >= 0 && w0 >= 0 && h0 < height && w0 < width && frame.is_valid(h0, w0);
        const bool ok1 = h1 >= 0 && w1 >= 0 && h1 < height && w1 < width && frame.is_valid(h1, w1);
        if (ok0 && ok1) return 0.5 * (lum_at(h1, w1) - lum_at(h0, w0));
        if (ok1) return lum_at(h1, w1) - center;
        if (ok0) return center - lum_at(h0, w0);
        return 0.0;
      };
      grad_x[i] = diff_along(h, w - 1, h, w + 1);
      grad_y[i] = diff_along(h - 1, w, h + 1, w);
      grad_energy[i] = grad_x[i] * grad_x[i] + grad_y[i] * grad_y[i];
    }
  }

  PixelCodes out;
  out.height = height;
  out.width = width;
  out.dim = latent_dim;
  out.codes.assign(n * static_cast<std::size_t>(latent_dim), 0.0f);
  out.weights.assign(n, 0.0);
  out.valid = frame.valid;

  Eigen::VectorXd features(feat_dim);
  Eigen::VectorXd latent(latent_dim);
  std::vector<double> pe(pe_cfg.enabled ? static_cast<std::size_t>(6 * pe_cfg.octaves) : 0);

  std::vector<double> logits(n, 0.0);
  for (int h = 0; h < height; ++h) {
    for (int w = 0; w < width; ++w) {
      const std::size_t i = frame.pixel_index(h, w);
      if (!frame.valid[i]) continue;

      const float* rgb = frame.color_at(h, w);
      features[0] = kColorGain * rgb[0];
      features[1] = kColorGain * rgb[1];
      features[2] = kColorGain * rgb[2];
      features[3] = kDepthGain * (frame.depth[i] / max_depth);
      features[4] = kGradGain * std::abs(grad_x[i]);
      features[5] = kGradGain * std::abs(grad_y[i]);
      if (pe_cfg.enabled) {
        const Vec3 q = unproject_pixel(intrinsics, h, w, frame.depth[i], pose, max_depth);
        positional_encoding(q, pe_cfg, pe.data());
        for (int j = 0; j < pe_cfg.octaves; ++j) {
          const double damp = octave_damp(j);
          for (int k = 0; k < 6; ++k) {
            const double gain = (k % 3 == 2) ? kPeGainZ : kPeGainXY;
            features[6 + j * 6 + k] = damp * gain * pe[j * 6 + k];
          }
        }
      }

      latent.noalias() = projection * features;
      float* code = &out.codes[i * static_cast<std::size_t>(latent_dim)];
      for (int d = 0; d < latent_dim; ++d) code[d] = static_cast<float>(std::tanh(latent[d]));

      // 3x3 gradient-energy neighborhood, valid members only
      double energy = 0.0;
      int members = 0;
      for (int dh = -1; dh <= 1; ++dh) {
        for (int dw = -1; dw <= 1; ++dw) {
          const int nh = h + dh, nw = w + dw;
          if (nh < 0 || nw < 0 || nh >= height || nw >= width) continue;
          if (!frame.is_valid(nh, nw)) continue;
          energy += grad_energy[frame.pixel_index(nh, nw)];
          ++members;
        }
      }
      logits[i] = members > 0 ? energy / members : 0.0;
    }
  }

  // softmax over valid pixels
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    if (frame.valid[i]) max_logit = std::max(max_logit, logits[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!frame.valid[i]) continue;
    const double e = cfg.uniform_weights ? 1.0 : std::exp((logits[i] - max_logit) / cfg.weight_sharpness);
    out.weights[i] = e;
    sum += e;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (frame.valid[i]) out.weights[i] /= sum;

  return out;
}

}  // namespace rnr
