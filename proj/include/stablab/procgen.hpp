#pragma once

// Marked Poisson processes on axis-aligned boxes and flat tori.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace stablab {

inline constexpr int kMaxDim = 8;

enum class Boundary { hard, torus };

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  static Box unit(int dim) { return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)}; }

  int dim() const { return static_cast<int>(lo.size()); }
  double side(int a) const { return hi[a] - lo[a]; }
  double volume() const;
  /// Closed containment.
  bool contains(std::span<const double> x) const;
  /// Half-open containment [lo, hi); used for regions so that adjacent
  /// regions partition the points.
  bool contains_half_open(std::span<const double> x) const;
  bool contains_box(const Box& other) const;
  std::vector<double> center() const;
  /// Throws ConfigError unless lo < hi on every axis.
  void validate() const;
};

/// Intensity density g on the window. The grid kind interpolates
/// multilinearly between values sampled at the vertices of a regular grid
/// spanning the window box.
struct DensitySpec {
  enum class Kind { constant, affine, grid };

  Kind kind = Kind::constant;
  double value = 1.0;
  double base = 0.0;
  std::vector<double> gradient;
  std::vector<int> grid_shape;
  std::vector<double> grid_values;
  /// Upper bound used for thinning; 0 means derive it from the density parameters.
  double sup_bound = 0.0;

  static DensitySpec constant(double c) {
    DensitySpec d;
    d.value = c;
    return d;
  }
  static DensitySpec affine(double base, std::vector<double> gradient) {
    DensitySpec d;
    d.kind = Kind::affine;
    d.base = base;
    d.gradient = std::move(gradient);
    return d;
  }

  double operator()(std::span<const double> x, const Box& box) const;
  /// The bound used for thinning: sup_bound when given, else the exact
  /// maximum over the box.
  double sup(const Box& box) const;
  /// Exact maximum / minimum of g over the box.
  double max_over(const Box& box) const;
  double min_over(const Box& box) const;
  double integral(const Box& box) const;
  double lipschitz(const Box& box) const;
  bool is_constant() const { return kind == Kind::constant; }
};

struct WindowSpec {
  Box box;
  Boundary boundary = Boundary::hard;
  DensitySpec density;

  static WindowSpec unit_cube(int dim, Boundary b = Boundary::hard) {
    return {Box::unit(dim), b, DensitySpec::constant(1.0)};
  }

  int dim() const { return box.dim(); }
  /// Throws ConfigError/DensityError on violated invariants.
  void validate() const;
};

struct Mark {
  enum class Kind : std::uint8_t { none, color, time };
  Kind kind = Kind::none;
  int color = 0;
  double time = 0.0;

  static Mark none() { return {}; }
  static Mark of_color(int c) { return {Kind::color, c, 0.0}; }
  static Mark of_time(double t) { return {Kind::time, 0, t}; }
  bool operator==(const Mark&) const = default;
};

struct MarkedPoint {
  std::vector<double> pos;
  Mark mark;
};

/// A finite simple marked point set in a window. Coordinates are stored
/// flat, point i occupying coords[i*dim, (i+1)*dim).
class PointConfig {
 public:
  PointConfig() = default;
  PointConfig(WindowSpec window, double intensity_s);

  int dim() const { return dim_; }
  std::size_t size() const { return marks_.size(); }
  bool empty() const { return marks_.empty(); }
  const WindowSpec& window() const { return window_; }
  double intensity() const { return intensity_s_; }
  void set_intensity(double s) { intensity_s_ = s; }

  std::span<const double> pos(std::size_t i) const {
    return {coords_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  const Mark& mark(std::size_t i) const { return marks_[i]; }
  void set_mark(std::size_t i, Mark m) { marks_[i] = m; }
  const std::vector<double>& coords() const { return coords_; }
  MarkedPoint point(std::size_t i) const;

  /// Appends a point; torus windows reduce the position modulo the box.
  void push_back(std::span<const double> x, Mark m = {});
  void push_back(const MarkedPoint& p) { push_back(p.pos, p.mark); }
  void reserve(std::size_t n);
  /// Replaces the contents; coords.size() must equal marks.size() * dim.
  void assign(std::vector<double> coords, std::vector<Mark> marks);
  /// Points satisfying pred(i) are kept, order preserved.
  template <class Pred>
  PointConfig filtered(Pred&& pred) const {
    PointConfig out(window_, intensity_s_);
    for (std::size_t i = 0; i < size(); ++i)
      if (pred(i)) out.push_back(pos(i), mark(i));
    return out;
  }
  /// Index of the first point with exactly this position, or size().
  std::size_t find(std::span<const double> x) const;
  /// True when no two points share a position.
  bool is_simple() const;

 private:
  WindowSpec window_;
  double intensity_s_ = 1.0;
  int dim_ = 0;
  std::vector<double> coords_;
  std::vector<Mark> marks_;
};

/// One realization of the intensity-1 driver on W x [0, T] and the two
/// thinned views it induces.
struct CoupledPair {
  struct DriverPoint {
    std::vector<double> pos;
    double t = 0.0;
    Mark mark;
  };
  std::vector<DriverPoint> driver;
  PointConfig sg_view;
  PointConfig sgx_view;
  std::vector<double> anchor_x;
};

PointConfig sample_homogeneous(const WindowSpec& window, double s, std::uint64_t seed);
PointConfig sample_inhomogeneous(const WindowSpec& window, double s, std::uint64_t seed);
/// Dispatches on the density kind.
PointConfig sample_poisson(const WindowSpec& window, double s, std::uint64_t seed);
PointConfig attach_colors(const PointConfig& config, std::span<const double> probs,
                          std::uint64_t seed);
CoupledPair sample_coupled(const WindowSpec& window, double s, std::span<const double> anchor_x,
                           std::uint64_t seed);

/// Validates a color probability simplex (nonnegative, sums to 1 within 1e-12).
void validate_simplex(std::span<const double> probs);

}  // namespace stablab
