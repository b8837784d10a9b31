#pragma once

#include <memory>
#include <vector>

#include "rnr/latent_map.hpp"

namespace rnr {

struct QueryParams {
  int side_cells = 41;  // odd; the agent sits at the center cell heading +u
  double cell_size = 0.25;
};

// Egocentric latent grid built from a single frame at identity pose.
struct QueryGrid {
  LatentGrid grid;
  int center() const { return grid.geometry().cells_u / 2; }
};

QueryGrid build_query(const RgbdFrame& frame, const CameraIntrinsics& intrinsics, const EncoderConfig& enc,
                      const PosEncodingConfig& pe, const QueryParams& params, RegisterStats* stats = nullptr,
                      double max_depth = kDefaultMaxDepth);

// Query grid resampled at R discrete headings; angle r is r * 2pi / R
// counterclockwise.
struct RotationStack {
  std::vector<LatentGrid> grids;
  std::vector<double> angles;  // radians
  int rotations() const { return static_cast<int>(grids.size()); }
};

// Rotates the weighted code sums and the mask about the center cell by
// bilinear interpolation; rotated cells with mask below kEmptyMaskEps are
// cleared. Requires an odd square grid.
LatentGrid rotate_grid(const LatentGrid& grid, double angle);

RotationStack rotate_query(const QueryGrid& query, int rotations);

// Normalized probability volume over (u, v, rotation-bin) poses.
struct PoseHeatmap {
  int cells_u = 0;
  int cells_v = 0;
  int rotations = 0;
  std::vector<double> p;  // (u * V + v) * R + r

  double at(int u, int v, int r) const {
    return p[(static_cast<std::size_t>(u) * cells_v + v) * rotations + r];
  }
  struct Bin {
    int u = 0, v = 0, r = 0;
  };
  Bin argmax() const;
  double sum() const;
  double angle_of_bin(int r) const;
  int bin_of_angle(double angle) const;
};

enum class CorrelationMethod { Direct, Fft };

struct CorrelationConfig {
  double temperature = 0.05;
  double min_overlap = 0.25;  // fraction of query cells that must land on key content
  CorrelationMethod method = CorrelationMethod::Fft;
  int threads = 0;  // 0 = hardware concurrency
};

// Masked normalized cross-correlation against a key map. The constructor
// normalizes the key once (and, for the FFT path, precomputes its spectra) so
// repeated queries against the same map stay cheap.
class Correlator {
 public:
  Correlator(const LatentGrid& key, const CorrelationConfig& cfg);
  ~Correlator();
  Correlator(Correlator&&) noexcept;
  Correlator& operator=(Correlator&&) noexcept;

  // Raw placement scores, one per (u, v, r); masked placements are -inf.
  // score = coverage * mean cosine similarity over co-occupied cells.
  std::vector<double> scores(const RotationStack& stack, CorrelationMethod method) const;
  std::vector<double> scores(const RotationStack& stack) const;

  // softmax(scores / temperature); throws NoOverlap when every placement is
  // masked, EmptyQuery when the stack carries no content.
  PoseHeatmap localize(const RotationStack& stack) const;

  const CorrelationConfig& config() const { return cfg_; }
  const MapGeometry& key_geometry() const { return key_geom_; }

  struct Impl;  // defined in localizer.cpp

 private:
  std::unique_ptr<Impl> impl_;
  CorrelationConfig cfg_;
  MapGeometry key_geom_;
};

// One-shot convenience wrapper around Correlator.
PoseHeatmap correlate(const LatentGrid& key, const RotationStack& stack, const CorrelationConfig& cfg);

}  // namespace rnr
