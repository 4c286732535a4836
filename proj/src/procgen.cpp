#include "stablab/procgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "stablab/error.hpp"
#include "stablab/rng.hpp"

namespace stablab {

double Box::volume() const {
  double v = 1.0;
  for (int a = 0; a < dim(); ++a) v *= side(a);
  return v;
}

bool Box::contains(std::span<const double> x) const {
  for (int a = 0; a < dim(); ++a)
    if (x[a] < lo[a] || x[a] > hi[a]) return false;
  return true;
}

bool Box::contains_half_open(std::span<const double> x) const {
  for (int a = 0; a < dim(); ++a)
    if (x[a] < lo[a] || x[a] >= hi[a]) return false;
  return true;
}

bool Box::contains_box(const Box& other) const {
  if (other.dim() != dim()) return false;
  for (int a = 0; a < dim(); ++a)
    if (other.lo[a] < lo[a] || other.hi[a] > hi[a]) return false;
  return true;
}

std::vector<double> Box::center() const {
  std::vector<double> c(dim());
  for (int a = 0; a < dim(); ++a) c[a] = 0.5 * (lo[a] + hi[a]);
  return c;
}

void Box::validate() const {
  if (lo.size() != hi.size()) throw ConfigError("box bounds have different dimensions");
  if (lo.empty() || dim() > kMaxDim)
    throw ConfigError("box dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  for (int a = 0; a < dim(); ++a) {
    if (!(lo[a] < hi[a]) || !std::isfinite(lo[a]) || !std::isfinite(hi[a]))
      throw ConfigError("box axis " + std::to_string(a) + " needs finite lo < hi");
  }
}

namespace {

// Grid vertices are stored with the first axis fastest.
std::size_t grid_vertex_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int v : shape) n *= static_cast<std::size_t>(v);
  return n;
}

void check_grid(const DensitySpec& d, int dim) {
  if (static_cast<int>(d.grid_shape.size()) != dim)
    throw DensityError("grid density shape must have one entry per axis");
  for (int v : d.grid_shape)
    if (v < 2) throw DensityError("grid density needs at least 2 vertices per axis");
  if (d.grid_values.size() != grid_vertex_count(d.grid_shape))
    throw DensityError("grid density value count does not match its shape");
}

}  // namespace

double DensitySpec::operator()(std::span<const double> x, const Box& box) const {
  switch (kind) {
    case Kind::constant:
      return value;
    case Kind::affine: {
      double g = base;
      for (std::size_t a = 0; a < gradient.size(); ++a) g += gradient[a] * x[a];
      return g;
    }
    case Kind::grid: {
      const int d = box.dim();
      int cell[kMaxDim];
      double frac[kMaxDim];
      for (int a = 0; a < d; ++a) {
        const int n = grid_shape[a] - 1;
        double u = (x[a] - box.lo[a]) / box.side(a) * n;
        u = std::clamp(u, 0.0, static_cast<double>(n));
        int c = std::min(static_cast<int>(u), n - 1);
        cell[a] = c;
        frac[a] = u - c;
      }
      double g = 0.0;
      for (int corner = 0; corner < (1 << d); ++corner) {
        double w = 1.0;
        std::size_t idx = 0, stride = 1;
        for (int a = 0; a < d; ++a) {
          const int bit = (corner >> a) & 1;
          w *= bit ? frac[a] : 1.0 - frac[a];
          idx += static_cast<std::size_t>(cell[a] + bit) * stride;
          stride *= static_cast<std::size_t>(grid_shape[a]);
        }
        if (w != 0.0) g += w * grid_values[idx];
      }
      return g;
    }
  }
  return 0.0;
}

double DensitySpec::max_over(const Box& box) const {
  switch (kind) {
    case Kind::constant:
      return value;
    case Kind::affine: {
      double g = base;
      for (std::size_t a = 0; a < gradient.size(); ++a)
        g += std::max(gradient[a] * box.lo[a], gradient[a] * box.hi[a]);
      return g;
    }
    case Kind::grid:
      return *std::max_element(grid_values.begin(), grid_values.end());
  }
  return 0.0;
}

double DensitySpec::min_over(const Box& box) const {
  switch (kind) {
    case Kind::constant:
      return value;
    case Kind::affine: {
      double g = base;
      for (std::size_t a = 0; a < gradient.size(); ++a)
        g += std::min(gradient[a] * box.lo[a], gradient[a] * box.hi[a]);
      return g;
    }
    case Kind::grid:
      return *std::min_element(grid_values.begin(), grid_values.end());
  }
  return 0.0;
}

double DensitySpec::sup(const Box& box) const {
  return sup_bound > 0.0 ? sup_bound : max_over(box);
}

double DensitySpec::integral(const Box& box) const {
  switch (kind) {
    case Kind::constant:
      return value * box.volume();
    case Kind::affine: {
      const auto c = box.center();
      return (*this)(c, box) * box.volume();
    }
    case Kind::grid: {
      // Tensor trapezoid rule is exact for multilinear interpolants.
      const int d = box.dim();
      double total = 0.0;
      std::vector<int> idx(d, 0);
      for (std::size_t v = 0; v < grid_values.size(); ++v) {
        double w = 1.0;
        for (int a = 0; a < d; ++a) {
          const int n = grid_shape[a] - 1;
          w *= (idx[a] == 0 || idx[a] == n) ? 0.5 / n : 1.0 / n;
        }
        total += w * grid_values[v];
        for (int a = 0; a < d; ++a) {
          if (++idx[a] < grid_shape[a]) break;
          idx[a] = 0;
        }
      }
      return total * box.volume();
    }
  }
  return 0.0;
}

double DensitySpec::lipschitz(const Box& box) const {
  switch (kind) {
    case Kind::constant:
      return 0.0;
    case Kind::affine: {
      double s2 = 0.0;
      for (double g : gradient) s2 += g * g;
      return std::sqrt(s2);
    }
    case Kind::grid: {
      // Each partial derivative of a multilinear interpolant is a convex
      // combination of edge slopes along that axis.
      const int d = box.dim();
      double s2 = 0.0;
      std::size_t stride = 1;
      for (int a = 0; a < d; ++a) {
        const double h = box.side(a) / (grid_shape[a] - 1);
        double worst = 0.0;
        for (std::size_t v = 0; v < grid_values.size(); ++v) {
          const auto ia = (v / stride) % static_cast<std::size_t>(grid_shape[a]);
          if (ia + 1 < static_cast<std::size_t>(grid_shape[a]))
            worst = std::max(worst, std::abs(grid_values[v + stride] - grid_values[v]) / h);
        }
        s2 += worst * worst;
        stride *= static_cast<std::size_t>(grid_shape[a]);
      }
      return std::sqrt(s2);
    }
  }
  return 0.0;
}

void WindowSpec::validate() const {
  box.validate();
  const int d = dim();
  if (density.kind == DensitySpec::Kind::affine && static_cast<int>(density.gradient.size()) != d)
    throw DensityError("affine density gradient must have one entry per axis");
  if (density.kind == DensitySpec::Kind::grid) check_grid(density, d);
  if (boundary == Boundary::torus && !density.is_constant())
    throw ConfigError("torus windows require a constant density");
  if (density.min_over(box) < 0.0) throw DensityError("density is negative somewhere on the window");
  if (density.sup_bound < 0.0) throw DensityError("density sup_bound must be nonnegative");
  if (density.sup_bound > 0.0 && density.max_over(box) > density.sup_bound * (1.0 + 1e-12))
    throw DensityError("density exceeds its declared sup_bound");
}

PointConfig::PointConfig(WindowSpec window, double intensity_s)
    : window_(std::move(window)), intensity_s_(intensity_s), dim_(window_.dim()) {}

MarkedPoint PointConfig::point(std::size_t i) const {
  auto p = pos(i);
  return {std::vector<double>(p.begin(), p.end()), marks_[i]};
}

void PointConfig::push_back(std::span<const double> x, Mark m) {
  if (static_cast<int>(x.size()) != dim_) throw ConfigError("point dimension mismatch");
  if (window_.boundary == Boundary::torus) {
    for (int a = 0; a < dim_; ++a) {
      const double lo = window_.box.lo[a], side = window_.box.side(a);
      double u = std::fmod(x[a] - lo, side);
      if (u < 0.0) u += side;
      if (u >= side) u = 0.0;
      coords_.push_back(lo + u);
    }
  } else {
    coords_.insert(coords_.end(), x.begin(), x.end());
  }
  marks_.push_back(m);
}

void PointConfig::reserve(std::size_t n) {
  coords_.reserve(n * static_cast<std::size_t>(dim_));
  marks_.reserve(n);
}

void PointConfig::assign(std::vector<double> coords, std::vector<Mark> marks) {
  if (coords.size() != marks.size() * static_cast<std::size_t>(dim_))
    throw ConfigError("coordinate count does not match mark count");
  coords_ = std::move(coords);
  marks_ = std::move(marks);
}

std::size_t PointConfig::find(std::span<const double> x) const {
  for (std::size_t i = 0; i < size(); ++i)
    if (std::equal(x.begin(), x.end(), pos(i).begin())) return i;
  return size();
}

namespace {

// Sorted order of point indices, lexicographic in coordinates.
std::vector<std::size_t> lex_order(const std::vector<double>& coords, int dim) {
  const std::size_t n = coords.size() / static_cast<std::size_t>(dim);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return std::lexicographical_compare(&coords[i * dim], &coords[i * dim] + dim, &coords[j * dim],
                                        &coords[j * dim] + dim);
  });
  return order;
}

// Indices of points whose position equals an earlier point in lexicographic order.
std::vector<std::size_t> duplicate_positions(const std::vector<double>& coords, int dim) {
  std::vector<std::size_t> dups;
  const auto order = lex_order(coords, dim);
  for (std::size_t k = 1; k < order.size(); ++k) {
    const double* a = &coords[order[k - 1] * dim];
    const double* b = &coords[order[k] * dim];
    if (std::equal(a, a + dim, b)) dups.push_back(order[k]);
  }
  return dups;
}

void draw_uniform(const Box& box, Engine& eng, double* out) {
  for (int a = 0; a < box.dim(); ++a) {
    std::uniform_real_distribution<double> u(box.lo[a], box.hi[a]);
    out[a] = u(eng);
  }
}

std::size_t draw_poisson(double mean, Engine& eng) {
  if (!(mean > 0.0)) return 0;
  std::poisson_distribution<long long> pd(mean);
  return static_cast<std::size_t>(pd(eng));
}

// Redraws the positions of duplicated points until the set is simple.
void make_simple(std::vector<double>& coords, const Box& box, Engine& eng) {
  const int d = box.dim();
  for (;;) {
    const auto dups = duplicate_positions(coords, d);
    if (dups.empty()) return;
    for (auto i : dups) draw_uniform(box, eng, &coords[i * d]);
  }
}

}  // namespace

bool PointConfig::is_simple() const { return duplicate_positions(coords_, dim_).empty(); }

void validate_simplex(std::span<const double> probs) {
  if (probs.empty()) throw SpecError("color probabilities must be nonempty");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw SpecError("color probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw SpecError("color probabilities must sum to 1");
}

PointConfig sample_homogeneous(const WindowSpec& window, double s, std::uint64_t seed) {
  window.validate();
  if (!window.density.is_constant())
    throw DensityError("sample_homogeneous requires a constant density");
  if (s < 0.0) throw ConfigError("intensity s must be nonnegative");
  const int d = window.dim();
  const double mean = s * window.density.value * window.box.volume();
  if (!std::isfinite(mean)) throw ConfigError("expected point count is not finite");
  Engine eng = make_engine(seed);
  const std::size_t n = draw_poisson(mean, eng);
  std::vector<double> coords(n * d);
  for (std::size_t i = 0; i < n; ++i) draw_uniform(window.box, eng, &coords[i * d]);
  make_simple(coords, window.box, eng);
  PointConfig out(window, s);
  out.assign(std::move(coords), std::vector<Mark>(n));
  return out;
}

PointConfig sample_inhomogeneous(const WindowSpec& window, double s, std::uint64_t seed) {
  window.validate();
  if (s < 0.0) throw ConfigError("intensity s must be nonnegative");
  const int d = window.dim();
  const double sup = window.density.sup(window.box);
  const double mean = s * sup * window.box.volume();
  if (!std::isfinite(mean)) throw ConfigError("expected point count is not finite");
  Engine eng = make_engine(seed);
  const std::size_t n = draw_poisson(mean, eng);
  std::vector<double> coords;
  coords.reserve(n * d);
  std::uniform_real_distribution<double> keep(0.0, 1.0);
  double buf[kMaxDim];
  for (std::size_t i = 0; i < n; ++i) {
    draw_uniform(window.box, eng, buf);
    const double g = window.density(std::span<const double>(buf, d), window.box);
    if (g > sup * (1.0 + 1e-12) || g < 0.0)
      throw DensityError("density value " + std::to_string(g) + " outside [0, sup_bound]");
    // Always consume the acceptance draw so the stream layout does not
    // depend on g.
    const double u = keep(eng);
    if (u * sup < g) coords.insert(coords.end(), buf, buf + d);
  }
  make_simple(coords, window.box, eng);
  PointConfig out(window, s);
  const std::size_t kept = coords.size() / d;
  out.assign(std::move(coords), std::vector<Mark>(kept));
  return out;
}

PointConfig sample_poisson(const WindowSpec& window, double s, std::uint64_t seed) {
  return window.density.is_constant() ? sample_homogeneous(window, s, seed)
                                      : sample_inhomogeneous(window, s, seed);
}

PointConfig attach_colors(const PointConfig& config, std::span<const double> probs,
                          std::uint64_t seed) {
  validate_simplex(probs);
  Engine eng = make_engine(seed);
  std::discrete_distribution<int> pick(probs.begin(), probs.end());
  PointConfig out = config;
  for (std::size_t i = 0; i < out.size(); ++i) out.set_mark(i, Mark::of_color(pick(eng) + 1));
  return out;
}

CoupledPair sample_coupled(const WindowSpec& window, double s, std::span<const double> anchor_x,
                           std::uint64_t seed) {
  window.validate();
  const int d = window.dim();
  if (static_cast<int>(anchor_x.size()) != d || !window.box.contains(anchor_x))
    throw ConfigError("coupling anchor must lie in the window");
  const double t_max = s * window.density.sup(window.box);
  Engine eng = make_engine(seed);
  const std::size_t n = draw_poisson(t_max * window.box.volume(), eng);
  std::vector<double> coords(n * d);
  std::vector<double> times(n);
  std::uniform_real_distribution<double> ut(0.0, t_max > 0.0 ? t_max : 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    draw_uniform(window.box, eng, &coords[i * d]);
    times[i] = ut(eng);
  }
  make_simple(coords, window.box, eng);

  CoupledPair pair;
  pair.anchor_x.assign(anchor_x.begin(), anchor_x.end());
  pair.sg_view = PointConfig(window, s);
  pair.sgx_view = PointConfig(window, s);
  const double level_x = s * window.density(anchor_x, window.box);
  pair.driver.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> z(&coords[i * d], d);
    const Mark m = Mark::of_time(times[i]);
    pair.driver.push_back({std::vector<double>(z.begin(), z.end()), times[i], m});
    if (times[i] <= s * window.density(z, window.box)) pair.sg_view.push_back(z, m);
    if (times[i] <= level_x) pair.sgx_view.push_back(z, m);
  }
  return pair;
}

}  // namespace stablab
