#include "rnr/latent_map.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>

namespace rnr {

static_assert(std::endian::native == std::endian::little, "map serialization assumes a little-endian host");

LatentGrid::LatentGrid(const MapGeometry& geom, const EncoderConfig& enc, const PosEncodingConfig& pe)
    : geom_(geom), enc_(enc), pe_(pe) {
  const std::size_t cells = static_cast<std::size_t>(geom.cells_u) * geom.cells_v;
  num_.assign(cells * static_cast<std::size_t>(enc.latent_dim), 0.0);
  mask_.assign(cells, 0.0);
}

std::vector<double> LatentGrid::cell_code(int u, int v) const {
  if (!geom_.contains({u, v}))
    throw OutOfMap("cell (" + std::to_string(u) + ", " + std::to_string(v) + ") outside grid");
  std::vector<double> code(dim(), 0.0);
  const double m = mask(u, v);
  if (m < kEmptyMaskEps) return code;
  const auto num = numerator(u, v);
  for (int d = 0; d < dim(); ++d) code[d] = num[d] / m;
  return code;
}

void LatentGrid::accumulate(int u, int v, const float* code, double beta) {
  const std::size_t base = geom_.flat(u, v) * dim();
  for (int d = 0; d < dim(); ++d) num_[base + d] += beta * code[d];
  mask_[geom_.flat(u, v)] += beta;
}

void LatentGrid::accumulate_raw(int u, int v, std::span<const double> num, double mask_value) {
  const std::size_t base = geom_.flat(u, v) * dim();
  for (int d = 0; d < dim(); ++d) num_[base + d] += num[d];
  mask_[geom_.flat(u, v)] += mask_value;
}

double LatentGrid::mask_total() const {
  double sum = 0.0;
  for (double m : mask_) sum += m;
  return sum;
}

std::size_t LatentGrid::nonempty_cells() const {
  std::size_t count = 0;
  for (double m : mask_)
    if (m >= kEmptyMaskEps) ++count;
  return count;
}

bool LatentGrid::same_shape(const LatentGrid& other) const {
  return geom_ == other.geom_ && enc_ == other.enc_ && pe_.octaves == other.pe_.octaves &&
         pe_.enabled == other.pe_.enabled;
}

LatentGrid register_frame(const RgbdFrame& frame, const Pose3& pose, const CameraIntrinsics& intrinsics,
                          const EncoderConfig& enc, const PosEncodingConfig& pe, const MapGeometry& geom,
                          RegisterStats* stats, double max_depth) {
  const PixelCodes codes = encode_frame(frame, intrinsics, pose, enc, pe, max_depth);

  LatentGrid grid(geom, enc, pe);
  RegisterStats local_stats;
  for (int h = 0; h < frame.height; ++h) {
    for (int w = 0; w < frame.width; ++w) {
      const std::size_t i = frame.pixel_index(h, w);
      if (!frame.valid[i]) continue;
      const Vec3 q = unproject_pixel(intrinsics, h, w, frame.depth[i], pose, max_depth);
      const GridIndex cell = grid_discretize(q, geom.cell_size, geom.origin);
      if (!geom.contains(cell)) {
        ++local_stats.dropped_pixels;
        continue;
      }
      grid.accumulate(cell.u, cell.v, codes.code_at(h, w), codes.weights[i]);
      ++local_stats.used_pixels;
    }
  }
  if (stats) *stats = local_stats;
  return grid;
}

void fuse_into(LatentGrid& global, const LatentGrid& local) {
  if (!global.same_shape(local)) throw ShapeMismatch("fuse: grid headers disagree");
  auto num = global.raw_numerators();
  auto mask = global.raw_mask();
  const auto lnum = std::as_const(local).raw_numerators();
  const auto lmask = std::as_const(local).raw_mask();
  for (std::size_t i = 0; i < lnum.size(); ++i) num[i] += lnum[i];
  for (std::size_t i = 0; i < lmask.size(); ++i) mask[i] += lmask[i];
}

LatentGrid fuse(const LatentGrid& global, const LatentGrid& local) {
  LatentGrid out = global;
  fuse_into(out, local);
  return out;
}

namespace {

constexpr char kMagic[4] = {'R', 'N', 'R', 'M'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

constexpr std::size_t kHeaderSize = 4 + 4 + 4 + 4 + 4 + 4 + 4 + 4 + 4 + 8 + 4;

}  // namespace

std::size_t map_file_size(int cells_u, int cells_v, int dim) {
  const std::size_t cells = static_cast<std::size_t>(cells_u) * cells_v;
  return kHeaderSize + cells * dim * sizeof(float) + cells * sizeof(float);
}

void save_map(const LatentGrid& grid, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoFailure("save_map: cannot open " + path.string());

  const auto& geom = grid.geometry();
  const auto& enc = grid.encoder_config();
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_pod(os, static_cast<std::uint32_t>(geom.cells_u));
  write_pod(os, static_cast<std::uint32_t>(geom.cells_v));
  write_pod(os, static_cast<std::uint32_t>(enc.latent_dim));
  write_pod(os, static_cast<float>(geom.cell_size));
  write_pod(os, static_cast<std::int32_t>(geom.origin.u));
  write_pod(os, static_cast<std::int32_t>(geom.origin.v));
  write_pod(os, static_cast<std::uint32_t>(grid.pe_config().enabled ? grid.pe_config().octaves : 0));
  write_pod(os, static_cast<std::uint64_t>(enc.seed));
  write_pod(os, static_cast<float>(enc.weight_sharpness));

  // M, divided form: v fastest, then u, then d
  std::vector<float> row(static_cast<std::size_t>(geom.cells_v));
  for (int d = 0; d < grid.dim(); ++d) {
    for (int u = 0; u < geom.cells_u; ++u) {
      for (int v = 0; v < geom.cells_v; ++v) {
        const double m = grid.mask(u, v);
        row[v] = m < kEmptyMaskEps ? 0.0f : static_cast<float>(grid.numerator(u, v)[d] / m);
      }
      os.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
    }
  }
  for (int u = 0; u < geom.cells_u; ++u) {
    for (int v = 0; v < geom.cells_v; ++v) row[v] = static_cast<float>(grid.mask(u, v));
    os.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
  }
  if (!os) throw IoFailure("save_map: write failed for " + path.string());
}

LatentGrid load_map(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoFailure("load_map: cannot open " + path.string());

  std::error_code ec;
  const auto actual_size = std::filesystem::file_size(path, ec);
  if (ec) throw IoFailure("load_map: cannot stat " + path.string());
  if (actual_size < kHeaderSize) throw CorruptHeader("load_map: file shorter than header");

  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw CorruptHeader("load_map: bad magic");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kVersion)
    throw VersionMismatch("load_map: version " + std::to_string(version) + ", expected " +
                          std::to_string(kVersion));

  MapGeometry geom;
  geom.cells_u = static_cast<int>(read_pod<std::uint32_t>(is));
  geom.cells_v = static_cast<int>(read_pod<std::uint32_t>(is));
  EncoderConfig enc;
  enc.latent_dim = static_cast<int>(read_pod<std::uint32_t>(is));
  geom.cell_size = read_pod<float>(is);
  geom.origin.u = read_pod<std::int32_t>(is);
  geom.origin.v = read_pod<std::int32_t>(is);
  PosEncodingConfig pe;
  const auto octaves = read_pod<std::uint32_t>(is);
  pe.enabled = octaves > 0;
  pe.octaves = pe.enabled ? static_cast<int>(octaves) : 4;
  enc.use_positional_encoding = pe.enabled;
  enc.seed = read_pod<std::uint64_t>(is);
  enc.weight_sharpness = read_pod<float>(is);
  if (!is) throw CorruptHeader("load_map: truncated header");

  if (geom.cells_u <= 0 || geom.cells_v <= 0 || enc.latent_dim <= 0 || !(geom.cell_size > 0.0f))
    throw CorruptHeader("load_map: implausible header fields");
  const std::size_t expected = map_file_size(geom.cells_u, geom.cells_v, enc.latent_dim);
  if (actual_size != expected)
    throw TruncatedPayload("load_map: file size " + std::to_string(actual_size) + ", expected " +
                           std::to_string(expected));

  LatentGrid grid(geom, enc, pe);
  auto num = grid.raw_numerators();
  auto mask = grid.raw_mask();
  const std::size_t cells = static_cast<std::size_t>(geom.cells_u) * geom.cells_v;
  const int dim = enc.latent_dim;

  std::vector<float> mean(cells * dim);
  is.read(reinterpret_cast<char*>(mean.data()), mean.size() * sizeof(float));
  std::vector<float> mask_f(cells);
  is.read(reinterpret_cast<char*>(mask_f.data()), mask_f.size() * sizeof(float));
  if (!is) throw TruncatedPayload("load_map: payload read failed");

  for (std::size_t c = 0; c < cells; ++c) mask[c] = mask_f[c];
  // Reconstruct the weighted sums from the stored means.
  for (int d = 0; d < dim; ++d) {
    const float* plane = &mean[static_cast<std::size_t>(d) * cells];
    for (std::size_t c = 0; c < cells; ++c) num[c * dim + d] = static_cast<double>(plane[c]) * mask[c];
  }
  return grid;
}

}  // namespace rnr
