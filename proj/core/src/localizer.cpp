#include "rnr/localizer.hpp"

#include <fftw3.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>
#include <thread>

namespace rnr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

int thread_count(int requested, int jobs) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  return std::min(n, std::max(jobs, 1));
}

// Smallest size >= n with only {2, 3, 5, 7} factors; keeps FFTW fast.
int good_fft_size(int n) {
  for (int s = n;; ++s) {
    int m = s;
    for (int f : {2, 3, 5, 7})
      while (m % f == 0) m /= f;
    if (m == 1) return s;
  }
}

std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

QueryGrid build_query(const RgbdFrame& frame, const CameraIntrinsics& intrinsics, const EncoderConfig& enc,
                      const PosEncodingConfig& pe, const QueryParams& params, RegisterStats* stats,
                      double max_depth) {
  if (params.side_cells < 1 || params.side_cells % 2 == 0)
    throw Error("build_query: side_cells must be odd and positive");
  MapGeometry geom;
  geom.cells_u = params.side_cells;
  geom.cells_v = params.side_cells;
  geom.cell_size = params.cell_size;
  geom.origin = {params.side_cells / 2, params.side_cells / 2};
  QueryGrid q{register_frame(frame, Pose3{}, intrinsics, enc, pe, geom, stats, max_depth)};
  return q;
}

LatentGrid rotate_grid(const LatentGrid& grid, double angle) {
  const auto& geom = grid.geometry();
  if (geom.cells_u != geom.cells_v || geom.cells_u % 2 == 0)
    throw Error("rotate_grid: requires an odd square grid");
  const int side = geom.cells_u;
  const int c = side / 2;
  const int dim = grid.dim();
  const double cs = std::cos(angle);
  const double sn = std::sin(angle);

  LatentGrid out(geom, grid.encoder_config(), grid.pe_config());
  auto onum = out.raw_numerators();
  auto omask = out.raw_mask();
  const auto inum = grid.raw_numerators();
  const auto imask = grid.raw_mask();

  for (int u = 0; u < side; ++u) {
    for (int v = 0; v < side; ++v) {
      const double du = u - c;
      const double dv = v - c;
      // inverse rotation of the output offset
      const double su = c + cs * du + sn * dv;
      const double sv = c - sn * du + cs * dv;
      const int i0 = static_cast<int>(std::floor(su));
      const int j0 = static_cast<int>(std::floor(sv));
      const double fu = su - i0;
      const double fv = sv - j0;

      double m = 0.0;
      const std::size_t obase = geom.flat(u, v) * dim;
      for (int di = 0; di <= 1; ++di) {
        for (int dj = 0; dj <= 1; ++dj) {
          const int i = i0 + di;
          const int j = j0 + dj;
          if (i < 0 || j < 0 || i >= side || j >= side) continue;
          const double w = (di ? fu : 1.0 - fu) * (dj ? fv : 1.0 - fv);
          if (w == 0.0) continue;
          const std::size_t ibase = geom.flat(i, j) * dim;
          for (int d = 0; d < dim; ++d) onum[obase + d] += w * inum[ibase + d];
          m += w * imask[geom.flat(i, j)];
        }
      }
      if (m < kEmptyMaskEps) {
        for (int d = 0; d < dim; ++d) onum[obase + d] = 0.0;
        m = 0.0;
      }
      omask[geom.flat(u, v)] = m;
    }
  }
  return out;
}

RotationStack rotate_query(const QueryGrid& query, int rotations) {
  if (rotations < 1) throw Error("rotate_query: rotations must be >= 1");
  RotationStack stack;
  stack.grids.reserve(rotations);
  stack.angles.reserve(rotations);
  for (int r = 0; r < rotations; ++r) {
    const double angle = 2.0 * M_PI * r / rotations;
    stack.angles.push_back(angle);
    stack.grids.push_back(rotate_grid(query.grid, angle));
  }
  return stack;
}

PoseHeatmap::Bin PoseHeatmap::argmax() const {
  Bin best;
  double best_p = -1.0;
  for (int u = 0; u < cells_u; ++u)
    for (int v = 0; v < cells_v; ++v)
      for (int r = 0; r < rotations; ++r) {
        const double value = at(u, v, r);
        if (value > best_p) {
          best_p = value;
          best = {u, v, r};
        }
      }
  return best;
}

double PoseHeatmap::sum() const {
  double s = 0.0;
  for (double value : p) s += value;
  return s;
}

double PoseHeatmap::angle_of_bin(int r) const { return 2.0 * M_PI * r / rotations; }

int PoseHeatmap::bin_of_angle(double angle) const {
  const double step = 2.0 * M_PI / rotations;
  const int r = static_cast<int>(std::lround(angle / step));
  return ((r % rotations) + rotations) % rotations;
}

// ---------------------------------------------------------------------------

struct Correlator::Impl {
  // normalized key: channel-major planes of unit cell codes, plus occupancy
  int cells_u = 0, cells_v = 0, dim = 0;
  std::vector<float> key_hat;   // D * U * V
  std::vector<float> key_occ;   // U * V
  std::size_t key_nonempty = 0;

  // FFT machinery, set up lazily for the query side in use
  std::once_flag fft_once;
  int query_side = 0;
  int pad_u = 0, pad_v = 0, spec_v = 0;
  fftwf_plan plan_fwd = nullptr;
  fftwf_plan plan_inv = nullptr;
  std::vector<fftwf_complex*> key_spec;  // dim + 1 spectra (channels, then occupancy)
  float* plan_real = nullptr;
  fftwf_complex* plan_spec = nullptr;

  ~Impl() {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    if (plan_fwd) fftwf_destroy_plan(plan_fwd);
    if (plan_inv) fftwf_destroy_plan(plan_inv);
    for (auto* s : key_spec) fftwf_free(s);
    if (plan_real) fftwf_free(plan_real);
    if (plan_spec) fftwf_free(plan_spec);
  }

  std::size_t spec_size() const { return static_cast<std::size_t>(pad_u) * spec_v; }

  void setup_fft(int side) {
    pad_u = good_fft_size(cells_u + side - 1);
    pad_v = good_fft_size(cells_v + side - 1);
    spec_v = pad_v / 2 + 1;
    query_side = side;
    const std::size_t real_n = static_cast<std::size_t>(pad_u) * pad_v;

    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    plan_real = static_cast<float*>(fftwf_malloc(real_n * sizeof(float)));
    plan_spec = static_cast<fftwf_complex*>(fftwf_malloc(spec_size() * sizeof(fftwf_complex)));
    plan_fwd = fftwf_plan_dft_r2c_2d(pad_u, pad_v, plan_real, plan_spec, FFTW_ESTIMATE);
    plan_inv = fftwf_plan_dft_c2r_2d(pad_u, pad_v, plan_spec, plan_real, FFTW_ESTIMATE);

    // key spectra: channels then occupancy
    key_spec.resize(dim + 1, nullptr);
    const std::size_t key_cells = static_cast<std::size_t>(cells_u) * cells_v;
    for (int d = 0; d <= dim; ++d) {
      std::memset(plan_real, 0, real_n * sizeof(float));
      const float* src = d < dim ? &key_hat[static_cast<std::size_t>(d) * key_cells] : key_occ.data();
      for (int u = 0; u < cells_u; ++u)
        std::memcpy(&plan_real[static_cast<std::size_t>(u) * pad_v], &src[static_cast<std::size_t>(u) * cells_v],
                    cells_v * sizeof(float));
      key_spec[d] = static_cast<fftwf_complex*>(fftwf_malloc(spec_size() * sizeof(fftwf_complex)));
      fftwf_execute_dft_r2c(plan_fwd, plan_real, key_spec[d]);
    }
  }
};

namespace {

// Normalizes a grid into unit-code planes; cells below the mask epsilon stay
// zero in both the code planes and the occupancy plane.
void normalize_cells(const LatentGrid& grid, std::vector<float>& hat, std::vector<float>& occ,
                     std::size_t* nonempty) {
  const auto& geom = grid.geometry();
  const int dim = grid.dim();
  const std::size_t cells = static_cast<std::size_t>(geom.cells_u) * geom.cells_v;
  hat.assign(cells * dim, 0.0f);
  occ.assign(cells, 0.0f);
  std::size_t count = 0;
  const auto num = grid.raw_numerators();
  const auto mask = grid.raw_mask();
  for (std::size_t cidx = 0; cidx < cells; ++cidx) {
    if (mask[cidx] < kEmptyMaskEps) continue;
    occ[cidx] = 1.0f;
    ++count;
    double norm2 = 0.0;
    const double* n = &num[cidx * dim];
    for (int d = 0; d < dim; ++d) norm2 += n[d] * n[d];
    if (norm2 <= 0.0) continue;  // occupied but direction-free; contributes zero similarity
    const double inv = 1.0 / std::sqrt(norm2);
    for (int d = 0; d < dim; ++d) hat[static_cast<std::size_t>(d) * cells + cidx] = static_cast<float>(n[d] * inv);
  }
  if (nonempty) *nonempty = count;
}

struct RotatedQuery {
  std::vector<float> hat;  // D * Uq * Uq
  std::vector<float> occ;  // Uq * Uq
  std::size_t nonempty = 0;
};

}  // namespace

Correlator::Correlator(const LatentGrid& key, const CorrelationConfig& cfg)
    : impl_(std::make_unique<Impl>()), cfg_(cfg), key_geom_(key.geometry()) {
  impl_->cells_u = key_geom_.cells_u;
  impl_->cells_v = key_geom_.cells_v;
  impl_->dim = key.dim();
  normalize_cells(key, impl_->key_hat, impl_->key_occ, &impl_->key_nonempty);
  if (impl_->key_nonempty == 0) throw EmptyKey("correlate: key map has no content");
}

Correlator::~Correlator() = default;
Correlator::Correlator(Correlator&&) noexcept = default;
Correlator& Correlator::operator=(Correlator&&) noexcept = default;

namespace {

// Direct reference path: loop over placements, skipping cells that are empty
// on either side. score = sum of cosines / query cell count, masked by the
// coverage threshold.
void direct_scores_rotation(const Correlator::Impl& key, const RotatedQuery& q, int side, int center,
                            double min_overlap, int rotations, int r, std::vector<double>& out) {
  const int U = key.cells_u, V = key.cells_v;
  const int dim = key.dim;
  const std::size_t key_cells = static_cast<std::size_t>(U) * V;
  const std::size_t q_cells = static_cast<std::size_t>(side) * side;

  // gather non-empty query cells
  struct QCell {
    int du, dv;
    const float* code;  // strided by q_cells per channel
    std::size_t idx;
  };
  std::vector<QCell> qcells;
  qcells.reserve(q_cells);
  for (int qu = 0; qu < side; ++qu)
    for (int qv = 0; qv < side; ++qv) {
      const std::size_t idx = static_cast<std::size_t>(qu) * side + qv;
      if (q.occ[idx] == 0.0f) continue;
      qcells.push_back({qu - center, qv - center, &q.hat[idx], idx});
    }
  const double qne = static_cast<double>(qcells.size());
  if (qcells.empty()) {
    for (int u = 0; u < U; ++u)
      for (int v = 0; v < V; ++v) out[(static_cast<std::size_t>(u) * V + v) * rotations + r] = kNegInf;
    return;
  }

  for (int u = 0; u < U; ++u) {
    for (int v = 0; v < V; ++v) {
      double sum = 0.0;
      int cnt = 0;
      for (const auto& qc : qcells) {
        const int ku = u + qc.du;
        const int kv = v + qc.dv;
        if (ku < 0 || kv < 0 || ku >= U || kv >= V) continue;
        const std::size_t kidx = static_cast<std::size_t>(ku) * V + kv;
        if (key.key_occ[kidx] == 0.0f) continue;
        ++cnt;
        double dot = 0.0;
        for (int d = 0; d < dim; ++d)
          dot += static_cast<double>(key.key_hat[static_cast<std::size_t>(d) * key_cells + kidx]) *
                 static_cast<double>(qc.code[static_cast<std::size_t>(d) * q_cells]);
        sum += dot;
      }
      const double coverage = cnt / qne;
      out[(static_cast<std::size_t>(u) * V + v) * rotations + r] =
          coverage < min_overlap ? kNegInf : sum / qne;
    }
  }
}

// Per-thread FFT work buffers, allocated with fftwf_malloc so the new-array
// execute functions see the same alignment the plans were created with.
struct FftScratch {
  float* real = nullptr;
  fftwf_complex* spec = nullptr;
  fftwf_complex* accum = nullptr;
  fftwf_complex* count_spec = nullptr;
  float* corr = nullptr;
  float* count = nullptr;
  std::size_t real_n = 0;

  explicit FftScratch(const Correlator::Impl& impl) {
    real_n = static_cast<std::size_t>(impl.pad_u) * impl.pad_v;
    const std::size_t spec_n = impl.spec_size();
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    real = static_cast<float*>(fftwf_malloc(real_n * sizeof(float)));
    spec = static_cast<fftwf_complex*>(fftwf_malloc(spec_n * sizeof(fftwf_complex)));
    accum = static_cast<fftwf_complex*>(fftwf_malloc(spec_n * sizeof(fftwf_complex)));
    count_spec = static_cast<fftwf_complex*>(fftwf_malloc(spec_n * sizeof(fftwf_complex)));
    corr = static_cast<float*>(fftwf_malloc(real_n * sizeof(float)));
    count = static_cast<float*>(fftwf_malloc(real_n * sizeof(float)));
  }
  ~FftScratch() {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftwf_free(real);
    fftwf_free(spec);
    fftwf_free(accum);
    fftwf_free(count_spec);
    fftwf_free(corr);
    fftwf_free(count);
  }
  FftScratch(const FftScratch&) = delete;
  FftScratch& operator=(const FftScratch&) = delete;
};

namespace {

// Frequency-domain path: per channel, multiply the key spectrum with the
// conjugated query spectrum and accumulate; one inverse transform then yields
// sum-of-cosines for every placement at once. A second correlation of the
// occupancy planes yields the co-occupancy counts.
void fft_scores_rotation(const Correlator::Impl& key, FftScratch& s, const RotatedQuery& q, int side,
                         int center, double min_overlap, int rotations, int r, std::vector<double>& out) {
  const int U = key.cells_u, V = key.cells_v;
  const int pad_u = key.pad_u, pad_v = key.pad_v;
  const std::size_t spec_n = key.spec_size();
  const std::size_t q_cells = static_cast<std::size_t>(side) * side;
  const double qne = static_cast<double>(q.nonempty);

  if (q.nonempty == 0) {
    for (int u = 0; u < U; ++u)
      for (int v = 0; v < V; ++v) out[(static_cast<std::size_t>(u) * V + v) * rotations + r] = kNegInf;
    return;
  }

  auto load_plane = [&](const float* src) {
    std::memset(s.real, 0, s.real_n * sizeof(float));
    for (int qu = 0; qu < side; ++qu)
      std::memcpy(&s.real[static_cast<std::size_t>(qu) * pad_v], &src[static_cast<std::size_t>(qu) * side],
                  side * sizeof(float));
  };

  std::memset(s.accum, 0, spec_n * sizeof(fftwf_complex));
  for (int d = 0; d < key.dim; ++d) {
    load_plane(&q.hat[static_cast<std::size_t>(d) * q_cells]);
    fftwf_execute_dft_r2c(key.plan_fwd, s.real, s.spec);
    const fftwf_complex* ks = key.key_spec[d];
    for (std::size_t k = 0; k < spec_n; ++k) {
      const float a = ks[k][0], b = ks[k][1];
      const float c = s.spec[k][0], dq = s.spec[k][1];
      s.accum[k][0] += a * c + b * dq;
      s.accum[k][1] += b * c - a * dq;
    }
  }
  load_plane(q.occ.data());
  fftwf_execute_dft_r2c(key.plan_fwd, s.real, s.spec);
  {
    const fftwf_complex* ks = key.key_spec[key.dim];
    for (std::size_t k = 0; k < spec_n; ++k) {
      const float a = ks[k][0], b = ks[k][1];
      const float c = s.spec[k][0], dq = s.spec[k][1];
      s.count_spec[k][0] = a * c + b * dq;
      s.count_spec[k][1] = b * c - a * dq;
    }
  }
  fftwf_execute_dft_c2r(key.plan_inv, s.accum, s.corr);
  fftwf_execute_dft_c2r(key.plan_inv, s.count_spec, s.count);

  const double scale = 1.0 / (static_cast<double>(pad_u) * pad_v);
  for (int u = 0; u < U; ++u) {
    const int a = ((u - center) % pad_u + pad_u) % pad_u;
    for (int v = 0; v < V; ++v) {
      const int b = ((v - center) % pad_v + pad_v) % pad_v;
      const std::size_t pidx = static_cast<std::size_t>(a) * pad_v + b;
      const long cnt = std::lround(static_cast<double>(s.count[pidx]) * scale);
      const double coverage = static_cast<double>(cnt) / qne;
      out[(static_cast<std::size_t>(u) * V + v) * rotations + r] =
          coverage < min_overlap ? kNegInf : static_cast<double>(s.corr[pidx]) * scale / qne;
    }
  }
}

}  // namespace

std::vector<double> Correlator::scores(const RotationStack& stack, CorrelationMethod method) const {
  const int rotations = stack.rotations();
  if (rotations < 1) throw Error("correlate: empty rotation stack");
  const auto& qgeom = stack.grids.front().geometry();
  const int side = qgeom.cells_u;
  const int center = side / 2;
  if (stack.grids.front().dim() != impl_->dim) throw ShapeMismatch("correlate: latent dims disagree");
  if (std::abs(qgeom.cell_size - key_geom_.cell_size) > 1e-9)
    throw ShapeMismatch("correlate: cell sizes disagree");

  // normalize every rotation once
  std::vector<RotatedQuery> queries(rotations);
  std::size_t total_nonempty = 0;
  for (int r = 0; r < rotations; ++r) {
    normalize_cells(stack.grids[r], queries[r].hat, queries[r].occ, &queries[r].nonempty);
    total_nonempty += queries[r].nonempty;
  }
  if (total_nonempty == 0) throw EmptyQuery("correlate: query has no content");

  const int U = impl_->cells_u, V = impl_->cells_v;
  std::vector<double> out(static_cast<std::size_t>(U) * V * rotations, kNegInf);

  const int workers = thread_count(cfg_.threads, rotations);
  if (method == CorrelationMethod::Direct) {
    std::atomic<int> next{0};
    auto work = [&] {
      for (int r = next.fetch_add(1); r < rotations; r = next.fetch_add(1))
        direct_scores_rotation(*impl_, queries[r], side, center, cfg_.min_overlap, rotations, r, out);
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return out;
  }

  std::call_once(impl_->fft_once, [&] { impl_->setup_fft(side); });
  if (impl_->query_side != side) throw ShapeMismatch("correlate: query side changed between calls");
  {
    std::atomic<int> next{0};
    auto work = [&] {
      FftScratch scratch(*impl_);
      for (int r = next.fetch_add(1); r < rotations; r = next.fetch_add(1))
        fft_scores_rotation(*impl_, scratch, queries[r], side, center, cfg_.min_overlap, rotations, r, out);
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
  }
  return out;
}

std::vector<double> Correlator::scores(const RotationStack& stack) const {
  return scores(stack, cfg_.method);
}

PoseHeatmap Correlator::localize(const RotationStack& stack) const {
  const std::vector<double> s = scores(stack);
  PoseHeatmap h;
  h.cells_u = impl_->cells_u;
  h.cells_v = impl_->cells_v;
  h.rotations = stack.rotations();
  h.p.assign(s.size(), 0.0);

  double max_score = kNegInf;
  for (double value : s) max_score = std::max(max_score, value);
  if (!std::isfinite(max_score))
    throw NoOverlap("correlate: no placement reaches the overlap threshold");

  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s[i])) continue;
    const double e = std::exp((s[i] - max_score) / cfg_.temperature);
    h.p[i] = e;
    sum += e;
  }
  for (double& value : h.p) value /= sum;
  return h;
}

PoseHeatmap correlate(const LatentGrid& key, const RotationStack& stack, const CorrelationConfig& cfg) {
  return Correlator(key, cfg).localize(stack);
}

}  // namespace rnr
