#include "stablab/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stablab/error.hpp"

namespace stablab {

Metric Metric::euclidean(int dim) {
  Metric m;
  m.dim = dim;
  return m;
}

Metric Metric::for_window(const WindowSpec& w) {
  Metric m;
  m.dim = w.dim();
  m.torus = w.boundary == Boundary::torus;
  if (m.torus)
    for (int a = 0; a < m.dim; ++a) m.period[a] = w.box.side(a);
  return m;
}

void Metric::delta(const double* from, const double* to, double* out) const {
  for (int a = 0; a < dim; ++a) {
    double v = to[a] - from[a];
    if (torus) {
      const double p = period[a];
      if (v > 0.5 * p)
        v -= p;
      else if (v < -0.5 * p)
        v += p;
    }
    out[a] = v;
  }
}

double Metric::dist2(const double* a, const double* b) const {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) {
    double v = b[i] - a[i];
    if (torus) {
      const double p = period[i];
      if (v > 0.5 * p)
        v -= p;
      else if (v < -0.5 * p)
        v += p;
    }
    s += v * v;
  }
  return s;
}

double Metric::dist(const double* a, const double* b) const { return std::sqrt(dist2(a, b)); }

// ---------------------------------------------------------------------------

GridIndex::GridIndex(const PointConfig& config, double cell_size)
    : config_(&config), metric_(Metric::for_window(config.window())) {
  const Box& box = config.window().box;
  const int d = box.dim();
  const std::size_t n = config.size();
  lo_ = box.lo;
  if (cell_size <= 0.0) {
    const double per = box.volume() / static_cast<double>(std::max<std::size_t>(n, 1));
    cell_size = std::pow(per, 1.0 / d);
  }
  // Keep the total cell count within a small multiple of n.
  const double cap = 4.0 * static_cast<double>(n) + 64.0;
  for (;;) {
    double total = 1.0;
    for (int a = 0; a < d; ++a) {
      const double c = std::floor(box.side(a) / cell_size);
      ncell_[a] = static_cast<int>(std::clamp(c, 1.0, 1e6));
      total *= ncell_[a];
    }
    if (total <= cap) break;
    cell_size *= 1.25;
  }
  min_width_ = std::numeric_limits<double>::infinity();
  for (int a = 0; a < d; ++a) {
    width_[a] = box.side(a) / ncell_[a];
    min_width_ = std::min(min_width_, width_[a]);
  }

  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(ncell_[a]);

  std::vector<std::size_t> cell_id(n);
  start_.assign(total + 1, 0);
  int c[kMaxDim];
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = config.pos(i).data();
    for (int a = 0; a < d; ++a) c[a] = cell_of(x, a);
    cell_id[i] = flat(c);
    ++start_[cell_id[i] + 1];
  }
  std::partial_sum(start_.begin(), start_.end(), start_.begin());
  ids_.resize(n);
  std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
  for (std::size_t i = 0; i < n; ++i) ids_[fill[cell_id[i]]++] = i;
}

int GridIndex::cell_of(const double* x, int a) const {
  double u = (x[a] - lo_[a]) / width_[a];
  if (metric_.torus) {
    // Queries (e.g. circumcenters) may sit outside the box.
    u = std::fmod(u, static_cast<double>(ncell_[a]));
    if (u < 0.0) u += ncell_[a];
  }
  if (!(u > 0.0)) return 0;
  const int c = u >= ncell_[a] ? ncell_[a] - 1 : static_cast<int>(u);
  return c;
}

std::size_t GridIndex::flat(const int* c) const {
  std::size_t idx = 0, stride = 1;
  for (int a = 0; a < dim(); ++a) {
    idx += static_cast<std::size_t>(c[a]) * stride;
    stride *= static_cast<std::size_t>(ncell_[a]);
  }
  return idx;
}

// ---------------------------------------------------------------------------

SpatialView::SpatialView(const GridIndex& index)
    : index_(&index), base_coords_(index.config().coords().data()), n_base_(index.size()) {}

SpatialView::SpatialView(const GridIndex& index, std::vector<MarkedPoint> extras)
    : SpatialView(index) {
  const int d = dim();
  const Box& box = index.config().window().box;
  extra_coords_.reserve(extras.size() * d);
  extra_marks_.reserve(extras.size());
  for (auto& p : extras) {
    if (static_cast<int>(p.pos.size()) != d) throw ConfigError("extra point dimension mismatch");
    for (int a = 0; a < d; ++a) {
      double v = p.pos[a];
      if (metric().torus) {
        const double side = box.side(a);
        double u = std::fmod(v - box.lo[a], side);
        if (u < 0.0) u += side;
        if (u >= side) u = 0.0;
        v = box.lo[a] + u;
      }
      extra_coords_.push_back(v);
    }
    extra_marks_.push_back(p.mark);
  }
}

bool SpatialView::position_less(std::size_t a, std::size_t b) const {
  const double* pa = pos(a);
  const double* pb = pos(b);
  for (int i = 0; i < dim(); ++i)
    if (pa[i] != pb[i]) return pa[i] < pb[i];
  return a < b;
}

bool SpatialView::ring_covers_all(int ring) const {
  const int* nc = index_->cells_per_axis();
  for (int a = 0; a < dim(); ++a) {
    const bool done = metric().torus ? 2 * ring + 1 >= nc[a] : ring >= nc[a] - 1;
    if (!done) return false;
  }
  return true;
}

void SpatialView::knn(const double* x, int k, std::vector<Neighbor>& out, std::size_t exclude,
                      std::size_t exclude2) const {
  out.clear();
  if (k <= 0) return;
  const Metric& m = metric();
  auto worse = [this](const Neighbor& a, const Neighbor& b) { return neighbor_less(a, b); };
  // Max-heap on the tie-broken order: the root is the current k-th neighbor.
  auto consider = [&](std::size_t id) {
    if (id == exclude || id == exclude2) return;
    Neighbor nb{m.dist2(x, pos(id)), id};
    if (static_cast<int>(out.size()) < k) {
      out.push_back(nb);
      std::push_heap(out.begin(), out.end(), worse);
    } else if (neighbor_less(nb, out.front())) {
      std::pop_heap(out.begin(), out.end(), worse);
      out.back() = nb;
      std::push_heap(out.begin(), out.end(), worse);
    }
  };
  for (std::size_t e = 0; e < extra_count(); ++e) consider(extra_id(e));

  const double w = index_->min_cell_width();
  for (int ring = 0;; ++ring) {
    for_each_in_ring(x, ring, consider);
    if (static_cast<int>(out.size()) == k) {
      // Unvisited points are at distance >= ring * w.
      const double bound = ring * w;
      if (out.front().d2 < bound * bound * (1.0 - 1e-12)) break;
    }
    if (ring_covers_all(ring)) break;
  }
  if (static_cast<int>(out.size()) < k)
    throw InsufficientPointsError(static_cast<std::size_t>(k), out.size());
  std::sort_heap(out.begin(), out.end(), worse);
}

void SpatialView::range(const double* x, double r, std::vector<std::size_t>& out,
                        std::size_t exclude) const {
  out.clear();
  if (r < 0.0) return;
  const Metric& m = metric();
  const double r2 = r * r;
  auto consider = [&](std::size_t id) {
    if (id != exclude && m.dist2(x, pos(id)) <= r2) out.push_back(id);
  };
  for (std::size_t e = 0; e < extra_count(); ++e) consider(extra_id(e));
  const double w = index_->min_cell_width();
  for (int ring = 0;; ++ring) {
    for_each_in_ring(x, ring, consider);
    if (ring * w > r || ring_covers_all(ring)) break;
  }
}

std::size_t SpatialView::count_in_ball(const double* c, double r, bool open, std::size_t limit,
                                       std::span<const std::size_t> skip) const {
  const Metric& m = metric();
  const double r2 = r * r;
  std::size_t count = 0;
  auto consider = [&](std::size_t id) {
    if (count >= limit) return false;
    if (std::find(skip.begin(), skip.end(), id) != skip.end()) return true;
    const double d2 = m.dist2(c, pos(id));
    if (open ? d2 < r2 : d2 <= r2) ++count;
    return count < limit;
  };
  for (std::size_t e = 0; e < extra_count(); ++e)
    if (!consider(extra_id(e))) return count;
  const double w = index_->min_cell_width();
  for (int ring = 0; count < limit; ++ring) {
    for_each_in_ring(c, ring, consider);
    if (ring * w > r || ring_covers_all(ring)) break;
  }
  return count;
}

// ---------------------------------------------------------------------------

bool solve_small(double* A, double* b, int n, double tol) {
  double scale = 0.0;
  for (int i = 0; i < n * n; ++i) scale = std::max(scale, std::abs(A[i]));
  if (scale == 0.0) return n == 0;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(A[r * n + col]) > std::abs(A[piv * n + col])) piv = r;
    if (std::abs(A[piv * n + col]) <= tol * scale) return false;
    if (piv != col) {
      for (int j = 0; j < n; ++j) std::swap(A[col * n + j], A[piv * n + j]);
      std::swap(b[col], b[piv]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double f = A[r * n + col] / A[col * n + col];
      if (f == 0.0) continue;
      for (int j = col; j < n; ++j) A[r * n + j] -= f * A[col * n + j];
      b[r] -= f * b[col];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double v = b[r];
    for (int j = r + 1; j < n; ++j) v -= A[r * n + j] * b[j];
    b[r] = v / A[r * n + r];
  }
  return true;
}

double det_small(double* A, int n) {
  double det = 1.0;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(A[r * n + col]) > std::abs(A[piv * n + col])) piv = r;
    if (A[piv * n + col] == 0.0) return 0.0;
    if (piv != col) {
      for (int j = 0; j < n; ++j) std::swap(A[col * n + j], A[piv * n + j]);
      det = -det;
    }
    det *= A[col * n + col];
    for (int r = col + 1; r < n; ++r) {
      const double f = A[r * n + col] / A[col * n + col];
      for (int j = col; j < n; ++j) A[r * n + j] -= f * A[col * n + j];
    }
  }
  return det;
}

namespace {

constexpr int kMaxPts = kMaxDim + 1;

int point_count(std::span<const double> pts, int d) {
  if (d <= 0 || pts.size() % static_cast<std::size_t>(d) != 0)
    throw ConfigError("point array does not match the dimension");
  const int n = static_cast<int>(pts.size()) / d;
  if (n < 1 || n > d + 1) throw ConfigError("need between 1 and d+1 points");
  return n;
}

// Gram matrix of the edge vectors p_i - p_0.
void gram(std::span<const double> pts, int d, int k, double* G, double* v) {
  for (int i = 0; i < k; ++i)
    for (int a = 0; a < d; ++a) v[i * d + a] = pts[(i + 1) * d + a] - pts[a];
  for (int i = 0; i < k; ++i)
    for (int j = 0; j <= i; ++j) {
      double s = 0.0;
      for (int a = 0; a < d; ++a) s += v[i * d + a] * v[j * d + a];
      G[i * k + j] = G[j * k + i] = s;
    }
}

}  // namespace

Circumsphere circumsphere(std::span<const double> pts, int d) {
  const int n = point_count(pts, d);
  const int k = n - 1;
  Circumsphere out;
  out.center.assign(pts.begin(), pts.begin() + d);
  if (k == 0) return out;
  double G[kMaxPts * kMaxPts], v[kMaxPts * kMaxDim], b[kMaxPts];
  gram(pts, d, k, G, v);
  for (int i = 0; i < k; ++i) b[i] = 0.5 * G[i * k + i];
  if (!solve_small(G, b, k)) {
    out.degenerate = true;
    return out;
  }
  double r2 = 0.0;
  for (int a = 0; a < d; ++a) {
    double off = 0.0;
    for (int i = 0; i < k; ++i) off += b[i] * v[i * d + a];
    out.center[a] += off;
    r2 += off * off;
  }
  out.radius = std::sqrt(r2);
  return out;
}

bool center_in_interior(std::span<const double> pts, int d, std::span<const double> c) {
  const int n = point_count(pts, d);
  const int k = n - 1;
  if (static_cast<int>(c.size()) != d) throw ConfigError("center dimension mismatch");
  if (k == 0) return false;
  double G[kMaxPts * kMaxPts], v[kMaxPts * kMaxDim], b[kMaxPts];
  gram(pts, d, k, G, v);
  for (int i = 0; i < k; ++i) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) s += v[i * d + a] * (c[a] - pts[a]);
    b[i] = s;
  }
  if (!solve_small(G, b, k)) throw DegenerateSimplexError("simplex is not in general position");
  double first = 1.0;
  for (int i = 0; i < k; ++i) {
    if (!(b[i] > kGeomTol)) return false;
    first -= b[i];
  }
  return first > kGeomTol;
}

double simplex_volume(std::span<const double> pts, int d) {
  const int n = point_count(pts, d);
  const int k = n - 1;
  if (k == 0) return 0.0;
  double G[kMaxPts * kMaxPts], v[kMaxPts * kMaxDim];
  gram(pts, d, k, G, v);
  const double det = det_small(G, k);
  if (!(det > 0.0)) return 0.0;
  double fact = 1.0;
  for (int i = 2; i <= k; ++i) fact *= i;
  return std::sqrt(det) / fact;
}

double simplex_volume_d2(std::span<const double> d2, int n) {
  const int k = n - 1;
  if (k <= 0) return 0.0;
  if (k > kMaxDim || d2.size() != static_cast<std::size_t>(n) * n)
    throw SpecError("simplex_volume_d2: bad distance matrix");
  double G[kMaxPts * kMaxPts];
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      G[i * k + j] = 0.5 * (d2[i + 1] + d2[j + 1] - d2[(i + 1) * n + j + 1]);
  const double det = det_small(G, k);
  if (!(det > 0.0)) return 0.0;
  double fact = 1.0;
  for (int i = 2; i <= k; ++i) fact *= i;
  return std::sqrt(det) / fact;
}

}  // namespace stablab
