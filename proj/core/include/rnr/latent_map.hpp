#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "rnr/encoder.hpp"
#include "rnr/geometry.hpp"

namespace rnr {

// Cells with accumulated weight below this are treated as empty everywhere
// (reads, fusion, correlation).
inline constexpr double kEmptyMaskEps = 1e-12;

// Bird's-eye latent grid: per cell a D-dim latent code and an accumulated
// weight mask. Internally the code array holds the weighted sums (sum of
// beta * c); the division by the mask happens at read and save boundaries.
class LatentGrid {
 public:
  LatentGrid() = default;
  LatentGrid(const MapGeometry& geom, const EncoderConfig& enc, const PosEncodingConfig& pe);

  const MapGeometry& geometry() const { return geom_; }
  const EncoderConfig& encoder_config() const { return enc_; }
  const PosEncodingConfig& pe_config() const { return pe_; }
  int dim() const { return enc_.latent_dim; }

  double mask(int u, int v) const { return mask_[geom_.flat(u, v)]; }
  bool cell_empty(int u, int v) const { return mask_[geom_.flat(u, v)] < kEmptyMaskEps; }

  // Weighted sum of codes (numerator of the weighted mean).
  std::span<const double> numerator(int u, int v) const {
    return {&num_[geom_.flat(u, v) * dim()], static_cast<std::size_t>(dim())};
  }
  // Weighted-mean latent code; zeros for empty cells. Throws OutOfMap.
  std::vector<double> cell_code(int u, int v) const;

  void accumulate(int u, int v, const float* code, double beta);
  void accumulate_raw(int u, int v, std::span<const double> num, double mask_value);

  double mask_total() const;
  std::size_t nonempty_cells() const;

  std::span<const double> raw_numerators() const { return num_; }
  std::span<const double> raw_mask() const { return mask_; }
  std::span<double> raw_numerators() { return num_; }
  std::span<double> raw_mask() { return mask_; }

  bool same_shape(const LatentGrid& other) const;

 private:
  MapGeometry geom_;
  EncoderConfig enc_;
  PosEncodingConfig pe_;
  std::vector<double> num_;   // U*V*D weighted sums
  std::vector<double> mask_;  // U*V weight totals
};

struct RegisterStats {
  std::size_t used_pixels = 0;
  std::size_t dropped_pixels = 0;  // valid pixels discretized outside the grid
};

// Projects one posed frame into a local latent grid: encode, unproject,
// discretize, accumulate beta-weighted codes per cell. Out-of-map pixels are
// skipped and counted.
LatentGrid register_frame(const RgbdFrame& frame, const Pose3& pose, const CameraIntrinsics& intrinsics,
                          const EncoderConfig& enc, const PosEncodingConfig& pe, const MapGeometry& geom,
                          RegisterStats* stats = nullptr, double max_depth = kDefaultMaxDepth);

// Mask-weighted average of two grids; headers must agree (ShapeMismatch).
LatentGrid fuse(const LatentGrid& global, const LatentGrid& local);
void fuse_into(LatentGrid& global, const LatentGrid& local);

// Binary map file, little-endian. Header: magic "RNRM", version u32, U u32,
// V u32, D u32, s f32, origin_u i32, origin_v i32, L u32 (0 when positional
// encoding is disabled), encoder seed u64, weight_sharpness f32. Payload: M
// as f32 (v fastest, then u, then d), then N as f32 (v fastest, then u).
void save_map(const LatentGrid& grid, const std::filesystem::path& path);
LatentGrid load_map(const std::filesystem::path& path);

// Exact header + payload byte count for a map of the given shape.
std::size_t map_file_size(int cells_u, int cells_v, int dim);

}  // namespace rnr
