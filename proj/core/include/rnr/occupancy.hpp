#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rnr/geometry.hpp"

namespace rnr {

enum class CellState : std::uint8_t { Free = 0, Occupied = 1, Unknown = 2 };

// Tristate occupancy grid sharing the latent map's indexing convention.
struct OccupancyGrid {
  MapGeometry geom;
  std::vector<CellState> cells;

  static OccupancyGrid filled(const MapGeometry& geom, CellState state) {
    OccupancyGrid g;
    g.geom = geom;
    g.cells.assign(static_cast<std::size_t>(geom.cells_u) * geom.cells_v, state);
    return g;
  }
  CellState at(int u, int v) const { return cells[geom.flat(u, v)]; }
  void set(int u, int v, CellState s) { cells[geom.flat(u, v)] = s; }
};

// Safety inflation: Unknown becomes Occupied, and every Free cell whose
// center lies within `radius` meters (Euclidean) of an Occupied cell center
// becomes Occupied.
OccupancyGrid inflate(const OccupancyGrid& grid, double radius);

// 8-bit PGM (0 = occupied, 255 = free, 128 = unknown) plus a sidecar text
// file `<path>.meta` carrying `s origin_u origin_v`.
void save_occupancy(const OccupancyGrid& grid, const std::filesystem::path& path);
OccupancyGrid load_occupancy(const std::filesystem::path& path);

}  // namespace rnr
