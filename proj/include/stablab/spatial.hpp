#pragma once

// Uniform-grid spatial index with exact kNN / ball queries, plus the small
// dense geometry kernels (circumspheres, barycentric tests, simplex volumes).

#include <array>
#include <cstddef>
#include <limits>
#include <algorithm>
#include <span>
#include <type_traits>
#include <vector>

#include "stablab/procgen.hpp"

namespace stablab {

inline constexpr std::size_t kNoPoint = std::numeric_limits<std::size_t>::max();

/// Euclidean metric, or the flat-torus metric with the minimum-image
/// convention when `torus` is set.
struct Metric {
  int dim = 0;
  bool torus = false;
  std::array<double, kMaxDim> period{};

  static Metric euclidean(int dim);
  static Metric for_window(const WindowSpec& w);

  /// Displacement to - from, reduced to the minimum image on a torus.
  void delta(const double* from, const double* to, double* out) const;
  double dist2(const double* a, const double* b) const;
  double dist(const double* a, const double* b) const;
};

struct Neighbor {
  double d2;
  std::size_t id;
};

/// Bucket grid over a point configuration, stored in compressed rows
/// (cell -> contiguous id range). Immutable after construction.
class GridIndex {
 public:
  /// cell_size <= 0 picks (Vol/n)^{1/d}, about one point per cell.
  explicit GridIndex(const PointConfig& config, double cell_size = 0.0);

  const PointConfig& config() const { return *config_; }
  const Metric& metric() const { return metric_; }
  int dim() const { return metric_.dim; }
  std::size_t size() const { return config_->size(); }
  const int* cells_per_axis() const { return ncell_.data(); }
  double cell_width(int a) const { return width_[a]; }
  double min_cell_width() const { return min_width_; }
  std::size_t cell_count() const { return start_.size() - 1; }

  /// Cell coordinate of x along axis a, clamped into the grid.
  int cell_of(const double* x, int a) const;
  std::size_t flat(const int* c) const;
  std::span<const std::size_t> cell_points(std::size_t flat_cell) const {
    return {ids_.data() + start_[flat_cell], ids_.data() + start_[flat_cell + 1]};
  }

 private:
  const PointConfig* config_;
  Metric metric_;
  std::vector<double> lo_;
  std::array<int, kMaxDim> ncell_{};
  std::array<double, kMaxDim> width_{};
  double min_width_ = 0.0;
  std::vector<std::size_t> start_;
  std::vector<std::size_t> ids_;
};

/// A point set made of an indexed configuration plus a few extra points
/// that are scanned directly. Ids 0..n-1 are configuration points, n.. are
/// extras in insertion order.
class SpatialView {
 public:
  explicit SpatialView(const GridIndex& index);
  SpatialView(const GridIndex& index, std::vector<MarkedPoint> extras);

  const GridIndex& index() const { return *index_; }
  const Metric& metric() const { return index_->metric(); }
  int dim() const { return index_->dim(); }
  std::size_t base_size() const { return n_base_; }
  std::size_t size() const { return n_base_ + extra_marks_.size(); }
  std::size_t extra_count() const { return extra_marks_.size(); }
  std::size_t extra_id(std::size_t e) const { return n_base_ + e; }

  const double* pos(std::size_t id) const {
    return id < n_base_ ? base_coords_ + id * static_cast<std::size_t>(dim())
                        : extra_coords_.data() + (id - n_base_) * static_cast<std::size_t>(dim());
  }
  const Mark& mark(std::size_t id) const {
    return id < n_base_ ? index_->config().mark(id) : extra_marks_[id - n_base_];
  }

  /// Strict total order used to break distance ties: lexicographic on
  /// position, then id.
  bool position_less(std::size_t a, std::size_t b) const;
  bool neighbor_less(const Neighbor& a, const Neighbor& b) const {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    return position_less(a.id, b.id);
  }

  /// The k nearest points to x, sorted by the tie-broken order; `exclude`
  /// ids (up to two) are skipped. Throws InsufficientPointsError.
  void knn(const double* x, int k, std::vector<Neighbor>& out, std::size_t exclude = kNoPoint,
           std::size_t exclude2 = kNoPoint) const;
  /// Ids within the closed ball of radius r around x (r may be infinite).
  void range(const double* x, double r, std::vector<std::size_t>& out,
             std::size_t exclude = kNoPoint) const;
  /// Number of points in the ball (open or closed), stopping once `limit`
  /// is reached. Ids in `skip` are ignored.
  std::size_t count_in_ball(const double* c, double r, bool open, std::size_t limit,
                            std::span<const std::size_t> skip = {}) const;

  /// Calls f(id) for every point in cells at Chebyshev cell distance
  /// exactly `ring` from the cell containing x (extras not included). If f
  /// returns bool, false stops the walk.
  template <class F>
  void for_each_in_ring(const double* x, int ring, F&& f) const;
  /// True when ring `ring` already covers the whole grid.
  bool ring_covers_all(int ring) const;

 private:
  const GridIndex* index_;
  const double* base_coords_;
  std::size_t n_base_;
  std::vector<double> extra_coords_;
  std::vector<Mark> extra_marks_;
};

/// Circumsphere of k+1 points within their affine hull.
struct Circumsphere {
  std::vector<double> center;
  double radius = 0.0;
  bool degenerate = false;
};

/// Tolerance for pivots and barycentric coordinates.
inline constexpr double kGeomTol = 1e-12;

/// pts holds k+1 points of dimension d, flat. k+1 <= d+1.
Circumsphere circumsphere(std::span<const double> pts, int d);
/// True iff every barycentric coordinate of c exceeds kGeomTol.
/// Throws DegenerateSimplexError when the points are not affinely independent.
bool center_in_interior(std::span<const double> pts, int d, std::span<const double> c);
/// k-dimensional volume of the simplex spanned by k+1 points (0 if degenerate).
double simplex_volume(std::span<const double> pts, int d);
/// Same volume from the n x n matrix of squared pairwise distances
/// (row-major). Used on the torus, where distances are minimum images.
double simplex_volume_d2(std::span<const double> d2, int n);

/// Solves the small dense system A x = b (n x n, row-major) in place by
/// Gaussian elimination with partial pivoting. Returns false when a pivot
/// falls below tol * (largest |A_ij|).
bool solve_small(double* A, double* b, int n, double tol = kGeomTol);
/// Determinant of a small dense matrix (row-major, destroyed).
double det_small(double* A, int n);

// ---------------------------------------------------------------------------

template <class F>
void SpatialView::for_each_in_ring(const double* x, int ring, F&& f) const {
  const GridIndex& g = *index_;
  const int d = g.dim();
  const bool torus = g.metric().torus;
  const int* nc = g.cells_per_axis();
  int center[kMaxDim];
  // Per axis the candidate cells form either a window of offsets
  // [-ring, ring] (clipped on hard grids) or, when the ring wraps around a
  // torus, every cell once.
  int first[kMaxDim], len[kMaxDim];
  bool wraps[kMaxDim];
  for (int a = 0; a < d; ++a) {
    center[a] = g.cell_of(x, a);
    wraps[a] = torus && 2 * ring + 1 >= nc[a];
    if (wraps[a]) {
      first[a] = 0;
      len[a] = nc[a];
    } else if (torus) {
      first[a] = -ring;
      len[a] = 2 * ring + 1;
    } else {
      const int lo = std::max(0, center[a] - ring), hi = std::min(nc[a] - 1, center[a] + ring);
      first[a] = lo - center[a];
      len[a] = hi - lo + 1;
      if (len[a] <= 0) return;
    }
  }
  auto entry = [&](int a, int t, int& cell) {
    if (wraps[a]) {
      cell = t;
      const int off = ((t - center[a]) % nc[a] + nc[a]) % nc[a];
      return std::min(off, nc[a] - off);
    }
    const int o = first[a] + t;
    cell = torus ? ((center[a] + o) % nc[a] + nc[a]) % nc[a] : center[a] + o;
    return o < 0 ? -o : o;
  };

  int t[kMaxDim] = {};
  int cell[kMaxDim];
  for (;;) {
    int cheb = 0;
    for (int a = 0; a < d; ++a) cheb = std::max(cheb, entry(a, t[a], cell[a]));
    if (cheb == ring) {
      for (std::size_t id : g.cell_points(g.flat(cell))) {
        if constexpr (std::is_same_v<std::invoke_result_t<F&, std::size_t>, bool>) {
          if (!f(id)) return;
        } else {
          f(id);
        }
      }
    }
    int a = 0;
    for (; a < d; ++a) {
      if (++t[a] < len[a]) break;
      t[a] = 0;
    }
    if (a == d) break;
  }
}

}  // namespace stablab
