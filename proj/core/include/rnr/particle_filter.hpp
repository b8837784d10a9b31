#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "rnr/geometry.hpp"
#include "rnr/localizer.hpp"
#include "rnr/occupancy.hpp"

namespace rnr {

struct Particle {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // radians, (-pi, pi]
};

// Odometry increment expressed in the previous body frame.
struct OdometryDelta {
  double forward = 0.0;
  double lateral = 0.0;
  double yaw = 0.0;
};

struct MotionNoise {
  double trans_sigma_frac = 0.05;          // sigma = frac * |translation|
  double rot_sigma = 2.0 * M_PI / 180.0;   // radians
};

struct PoseEstimate {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

// Weighted pose hypotheses over the map frame. State transitions mutate in
// place (single writer); weights stay normalized after every operation.
class ParticleFilter {
 public:
  // Uniform over free-cell interiors, headings uniform over (-pi, pi].
  // Throws NoFreeSpace.
  static ParticleFilter init_uniform(const OccupancyGrid& grid, int count, std::uint64_t seed);

  // Samples bins proportional to the heatmap, uniform within each bin.
  static ParticleFilter init_from_heatmap(const PoseHeatmap& heatmap, const MapGeometry& geom, int count,
                                          std::uint64_t seed);

  void motion_update(const OdometryDelta& delta, const MotionNoise& noise);

  // w_i *= H(bin(x_i, y_i, heading_i)) + floor, then renormalize; particles
  // outside the map receive only the floor. Throws DegenerateWeights when
  // everything underflows to zero before flooring.
  void measurement_update(const PoseHeatmap& heatmap, const MapGeometry& geom, double likelihood_floor);

  // Systematic resampling when ESS < threshold_frac * N; returns whether a
  // resample happened.
  bool resample_if_needed(double ess_threshold_frac);

  // Weighted mean position and circular-mean heading. Throws ZeroResultant
  // when the heading resultant vanishes.
  PoseEstimate estimate() const;

  double effective_sample_size() const;
  std::size_t size() const { return particles_.size(); }
  std::span<const Particle> particles() const { return particles_; }
  std::span<const double> weights() const { return weights_; }

 private:
  ParticleFilter(std::vector<Particle> particles, std::uint64_t seed);

  std::vector<Particle> particles_;
  std::vector<double> weights_;
  std::mt19937_64 rng_;
};

}  // namespace rnr
