#pragma once

// Grids, fields and diagonal spectral operators for two bases:
//   * Fourier2D: doubly periodic box, real-to-complex FFT (half spectrum),
//   * Sine1D:    Dirichlet interval, DST-I on the interior points.
//
// Spectral coefficients are normalized so that the physical field is the
// plain sum of coefficient times basis function; e.g. for Fourier2D
//   u(x) = sum_k  u_k exp(i k.x),
// and for Sine1D
//   u(x) = sum_m  c_m sin(m pi (x - a) / L).

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include "savbdf/errors.hpp"

namespace savbdf {

enum class Basis { fourier2d, sine1d };

namespace detail {
// The FFTW planner is not re-entrant; execution of existing plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

/// Immutable description of a discretization plus its transform plans.
class Grid {
  struct Key {};

 public:
  static GridPtr fourier2d(std::size_t nx, std::size_t ny, double lx = 2.0, double ly = 2.0,
                           double x0 = 0.0, double y0 = 0.0) {
    if (nx == 0 || ny == 0 || nx % 2 != 0 || ny % 2 != 0)
      throw Error("Fourier2D extents must be positive and even");
    if (!(lx > 0.0) || !(ly > 0.0)) throw Error("domain lengths must be positive");
    return std::make_shared<const Grid>(Key{}, Basis::fourier2d, std::array{nx, ny},
                                        std::array{lx, ly}, std::array{x0, y0});
  }

  static GridPtr sine1d(std::size_t n, double a = -1.0, double b = 1.0) {
    if (n == 0) throw Error("Sine1D extent must be positive");
    if (!(b > a)) throw Error("Sine1D interval must satisfy a < b");
    return std::make_shared<const Grid>(Key{}, Basis::sine1d, std::array<std::size_t, 2>{n, 1},
                                        std::array{b - a, 0.0}, std::array{a, 0.0});
  }

  Grid(Key, Basis basis, std::array<std::size_t, 2> extents, std::array<double, 2> lengths,
       std::array<double, 2> origin)
      : basis_(basis), extents_(extents), lengths_(lengths), origin_(origin) {
    build_modes();
    build_plans();
  }

  Grid(const Grid&) = delete;
  Grid& operator=(const Grid&) = delete;

  ~Grid() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    for (fftw_plan p : {plan_fwd_, plan_inv_, plan_dct_})
      if (p) fftw_destroy_plan(p);
  }

  Basis basis() const { return basis_; }
  std::size_t dimension() const { return basis_ == Basis::fourier2d ? 2 : 1; }
  std::size_t extent(std::size_t d) const { return extents_[d]; }
  double length(std::size_t d) const { return lengths_[d]; }
  double origin(std::size_t d) const { return origin_[d]; }

  std::size_t physical_size() const { return extents_[0] * extents_[1]; }
  std::size_t spectral_size() const { return k2_.size(); }

  /// Measure of the domain, |Omega|.
  double volume() const {
    return basis_ == Basis::fourier2d ? lengths_[0] * lengths_[1] : lengths_[0];
  }
  /// Quadrature weight of one grid point.
  double cell_volume() const {
    return basis_ == Basis::fourier2d ? volume() / static_cast<double>(physical_size())
                                      : lengths_[0] / static_cast<double>(extents_[0] + 1);
  }

  /// Coordinates of physical point `i` (x, y); y is 0 for Sine1D.
  std::array<double, 2> point(std::size_t i) const {
    if (basis_ == Basis::fourier2d) {
      const std::size_t i0 = i / extents_[1], i1 = i % extents_[1];
      return {origin_[0] + lengths_[0] * static_cast<double>(i0) / static_cast<double>(extents_[0]),
              origin_[1] + lengths_[1] * static_cast<double>(i1) / static_cast<double>(extents_[1])};
    }
    return {origin_[0] + cell_volume() * static_cast<double>(i + 1), 0.0};
  }

  /// |k|^2 per spectral mode.
  std::span<const double> wavenumber_sq() const { return k2_; }
  /// Parseval weight per spectral mode: ||u||^2_{L2} = sum_m w_m |u_m|^2.
  std::span<const double> parseval_weight() const { return weight_; }
  /// Signed integer mode index per spectral mode (second entry unused for Sine1D).
  std::span<const std::array<long, 2>> mode_index() const { return modes_; }
  /// Spectral position of mode (0,0); only meaningful for Fourier2D.
  std::size_t zero_mode() const { return 0; }

  /// Physical values -> spectral coefficients.
  void forward(std::span<const double> phys, std::span<std::complex<double>> spec) const {
    if (basis_ == Basis::fourier2d) {
      std::vector<double> in(phys.begin(), phys.end());
      fftw_execute_dft_r2c(plan_fwd_, in.data(), reinterpret_cast<fftw_complex*>(spec.data()));
      const double scale = 1.0 / static_cast<double>(physical_size());
      for (auto& c : spec) c *= scale;
    } else {
      const std::size_t n = extents_[0];
      std::vector<double> in(phys.begin(), phys.end()), out(n);
      fftw_execute_r2r(plan_fwd_, in.data(), out.data());
      const double scale = 1.0 / static_cast<double>(n + 1);
      for (std::size_t m = 0; m < n; ++m) spec[m] = {out[m] * scale, 0.0};
    }
  }

  /// Spectral coefficients -> physical values.
  void inverse(std::span<const std::complex<double>> spec, std::span<double> phys) const {
    if (basis_ == Basis::fourier2d) {
      std::vector<std::complex<double>> in(spec.begin(), spec.end());
      fftw_execute_dft_c2r(plan_inv_, reinterpret_cast<fftw_complex*>(in.data()), phys.data());
    } else {
      const std::size_t n = extents_[0];
      std::vector<double> in(n);
      for (std::size_t m = 0; m < n; ++m) in[m] = spec[m].real();
      fftw_execute_r2r(plan_inv_, in.data(), phys.data());
      for (auto& v : phys) v *= 0.5;
    }
  }

  /// Sine1D only: values of d/dx of the sine series at the grid points.
  void sine_derivative(std::span<const std::complex<double>> spec, std::span<double> out) const {
    if (basis_ != Basis::sine1d) throw WrongBasis("sine derivative needs a Sine1D grid");
    const std::size_t n = extents_[0];
    std::vector<double> in(n + 2, 0.0), y(n + 2);
    for (std::size_t m = 0; m < n; ++m) in[m + 1] = spec[m].real() * std::sqrt(k2_[m]);
    fftw_execute_r2r(plan_dct_, in.data(), y.data());
    for (std::size_t j = 0; j < n; ++j) out[j] = 0.5 * y[j + 1];
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.basis_ == b.basis_ && a.extents_ == b.extents_ && a.lengths_ == b.lengths_ &&
           a.origin_ == b.origin_;
  }

 private:
  void build_modes() {
    if (basis_ == Basis::fourier2d) {
      const std::size_t n0 = extents_[0], n1 = extents_[1], h1 = n1 / 2 + 1;
      const double c0 = 2.0 * std::numbers::pi / lengths_[0];
      const double c1 = 2.0 * std::numbers::pi / lengths_[1];
      k2_.resize(n0 * h1);
      weight_.resize(n0 * h1);
      modes_.resize(n0 * h1);
      for (std::size_t j0 = 0; j0 < n0; ++j0) {
        const long m0 = j0 <= n0 / 2 ? static_cast<long>(j0) : static_cast<long>(j0) - static_cast<long>(n0);
        for (std::size_t j1 = 0; j1 < h1; ++j1) {
          const std::size_t idx = j0 * h1 + j1;
          const long m1 = static_cast<long>(j1);
          const double kx = c0 * static_cast<double>(m0), ky = c1 * static_cast<double>(m1);
          k2_[idx] = kx * kx + ky * ky;
          weight_[idx] = volume() * ((j1 == 0 || j1 == n1 / 2) ? 1.0 : 2.0);
          modes_[idx] = {m0, m1};
        }
      }
    } else {
      const std::size_t n = extents_[0];
      k2_.resize(n);
      weight_.assign(n, 0.5 * lengths_[0]);
      modes_.resize(n);
      for (std::size_t m = 0; m < n; ++m) {
        const double k = static_cast<double>(m + 1) * std::numbers::pi / lengths_[0];
        k2_[m] = k * k;
        modes_[m] = {static_cast<long>(m + 1), 0};
      }
    }
  }

  void build_plans() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    if (basis_ == Basis::fourier2d) {
      const int n0 = static_cast<int>(extents_[0]), n1 = static_cast<int>(extents_[1]);
      auto* r = fftw_alloc_real(physical_size());
      auto* c = fftw_alloc_complex(spectral_size());
      plan_fwd_ = fftw_plan_dft_r2c_2d(n0, n1, r, c, flags);
      plan_inv_ = fftw_plan_dft_c2r_2d(n0, n1, c, r, flags);
      fftw_free(r);
      fftw_free(c);
    } else {
      const int n = static_cast<int>(extents_[0]);
      auto* a = fftw_alloc_real(extents_[0] + 2);
      auto* b = fftw_alloc_real(extents_[0] + 2);
      plan_fwd_ = fftw_plan_r2r_1d(n, a, b, FFTW_RODFT00, flags);
      plan_inv_ = fftw_plan_r2r_1d(n, a, b, FFTW_RODFT00, flags);
      plan_dct_ = fftw_plan_r2r_1d(n + 2, a, b, FFTW_REDFT00, flags);
      fftw_free(a);
      fftw_free(b);
    }
    if (!plan_fwd_ || !plan_inv_) throw Error("FFTW planning failed");
  }

  Basis basis_;
  std::array<std::size_t, 2> extents_;
  std::array<double, 2> lengths_;
  std::array<double, 2> origin_;
  std::vector<double> k2_;
  std::vector<double> weight_;
  std::vector<std::array<long, 2>> modes_;
  fftw_plan plan_fwd_ = nullptr;
  fftw_plan plan_inv_ = nullptr;
  fftw_plan plan_dct_ = nullptr;
};

/// Real grid function holding a physical and/or spectral representation.
/// At least one representation is valid; the other is computed on demand.
class Field {
 public:
  Field() = default;

  /// Zero field on `grid`.
  explicit Field(GridPtr grid)
      : grid_(std::move(grid)),
        phys_(grid_->physical_size(), 0.0),
        spec_(grid_->spectral_size()),
        phys_valid_(true),
        spec_valid_(true) {}

  static Field from_physical(GridPtr grid, std::vector<double> values) {
    if (values.size() != grid->physical_size()) throw Error("physical size mismatch");
    Field f;
    f.grid_ = std::move(grid);
    f.phys_ = std::move(values);
    f.phys_valid_ = true;
    return f;
  }

  /// Fourier2D input is symmetrized so the coefficients describe a real field.
  static Field from_spectral(GridPtr grid, std::vector<std::complex<double>> coeffs) {
    if (coeffs.size() != grid->spectral_size()) throw Error("spectral size mismatch");
    Field f;
    f.grid_ = std::move(grid);
    f.spec_ = std::move(coeffs);
    f.spec_valid_ = true;
    f.enforce_hermitian();
    return f;
  }

  /// Samples fn(x, y) at every grid point (y = 0 on Sine1D).
  template <class Fn>
  static Field sample(GridPtr grid, Fn&& fn) {
    std::vector<double> v(grid->physical_size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto p = grid->point(i);
      v[i] = fn(p[0], p[1]);
    }
    return from_physical(std::move(grid), std::move(v));
  }

  const GridPtr& grid() const { return grid_; }
  bool empty() const { return !grid_; }
  bool has_physical() const { return phys_valid_; }
  bool has_spectral() const { return spec_valid_; }

  std::span<const double> physical() const {
    if (!phys_valid_) {
      phys_.resize(grid_->physical_size());
      grid_->inverse(spec_, phys_);
      phys_valid_ = true;
    }
    return phys_;
  }

  std::span<const std::complex<double>> spectral() const {
    if (!spec_valid_) {
      spec_.resize(grid_->spectral_size());
      grid_->forward(phys_, spec_);
      spec_valid_ = true;
    }
    return spec_;
  }

  /// Mutable access; invalidates the spectral representation.
  std::span<double> physical_mut() {
    (void)physical();
    spec_valid_ = false;
    return phys_;
  }

  /// Mutable access; invalidates the physical representation.
  std::span<std::complex<double>> spectral_mut() {
    (void)spectral();
    phys_valid_ = false;
    return spec_;
  }

  Field& scale(double a) {
    if (phys_valid_)
      for (auto& v : phys_) v *= a;
    if (spec_valid_)
      for (auto& c : spec_) c *= a;
    return *this;
  }

  /// this += a * x
  Field& axpy(double a, const Field& x) {
    check_same_grid(x);
    if (spec_valid_) {
      const auto xs = x.spectral();
      for (std::size_t i = 0; i < spec_.size(); ++i) spec_[i] += a * xs[i];
      if (phys_valid_) {
        if (x.phys_valid_) {
          for (std::size_t i = 0; i < phys_.size(); ++i) phys_[i] += a * x.phys_[i];
        } else {
          phys_valid_ = false;
        }
      }
    } else {
      const auto xp = x.physical();
      for (std::size_t i = 0; i < phys_.size(); ++i) phys_[i] += a * xp[i];
    }
    return *this;
  }

  Field& operator+=(const Field& x) { return axpy(1.0, x); }
  Field& operator-=(const Field& x) { return axpy(-1.0, x); }
  Field& operator*=(double a) { return scale(a); }

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }
  friend Field operator*(Field a, double s) { return a *= s; }

  void check_same_grid(const Field& other) const {
    if (grid_ != other.grid_ && !(grid_ && other.grid_ && *grid_ == *other.grid_))
      throw GridMismatch();
  }

 private:
  void enforce_hermitian() {
    if (grid_->basis() != Basis::fourier2d) {
      for (auto& c : spec_) c = {c.real(), 0.0};
      return;
    }
    const std::size_t n0 = grid_->extent(0), n1 = grid_->extent(1), h1 = n1 / 2 + 1;
    for (std::size_t j1 : {std::size_t{0}, n1 / 2}) {
      for (std::size_t j0 = 0; j0 <= n0 / 2; ++j0) {
        const std::size_t m0 = (n0 - j0) % n0;
        auto& a = spec_[j0 * h1 + j1];
        auto& b = spec_[m0 * h1 + j1];
        const auto avg = 0.5 * (a + std::conj(b));
        a = avg;
        b = std::conj(avg);
      }
    }
  }

  GridPtr grid_;
  mutable std::vector<double> phys_;
  mutable std::vector<std::complex<double>> spec_;
  mutable bool phys_valid_ = false;
  mutable bool spec_valid_ = false;
};

/// Copy of `f` with its spectral representation populated.
inline Field transform_forward(const Field& f) {
  Field out = f;
  (void)out.spectral();
  return out;
}

/// Copy of `f` with its physical representation populated.
inline Field transform_inverse(const Field& f) {
  Field out = f;
  (void)out.physical();
  return out;
}

/// Per-mode symbol of the Laplacian: -|k|^2.
inline std::vector<double> laplacian_symbol(const Grid& grid) {
  std::vector<double> s(grid.wavenumber_sq().begin(), grid.wavenumber_sq().end());
  for (auto& v : s) v = -v;
  return s;
}

/// Diagonal multiplication in spectral space.
inline Field apply_symbol(std::span<const double> symbol, const Field& f) {
  if (symbol.size() != f.grid()->spectral_size()) throw Error("symbol size mismatch");
  const auto in = f.spectral();
  std::vector<std::complex<double>> out(in.size());
  for (std::size_t m = 0; m < in.size(); ++m) out[m] = symbol[m] * in[m];
  return Field::from_spectral(f.grid(), std::move(out));
}

/// (shift + A) x, with A given by its symbol.
inline Field apply_shifted(double shift, std::span<const double> symbol, const Field& x) {
  if (symbol.size() != x.grid()->spectral_size()) throw Error("symbol size mismatch");
  const auto in = x.spectral();
  std::vector<std::complex<double>> out(in.size());
  for (std::size_t m = 0; m < in.size(); ++m) out[m] = (shift + symbol[m]) * in[m];
  return Field::from_spectral(x.grid(), std::move(out));
}

/// Solves (shift + A) x = rhs; every denominator must be strictly positive.
inline Field solve_shifted(double shift, std::span<const double> symbol, const Field& rhs) {
  if (symbol.size() != rhs.grid()->spectral_size()) throw Error("symbol size mismatch");
  const auto in = rhs.spectral();
  std::vector<std::complex<double>> out(in.size());
  for (std::size_t m = 0; m < in.size(); ++m) {
    const double d = shift + symbol[m];
    if (!(d > 0.0)) throw IndefiniteOperator(m);
    out[m] = in[m] / d;
  }
  return Field::from_spectral(rhs.grid(), std::move(out));
}

/// sum_m w_m * symbol_m * |f_m|^2, i.e. (S f, f) in L2 for a diagonal S.
inline double spectral_quadratic(const Field& f, std::span<const double> symbol) {
  const auto c = f.spectral();
  const auto w = f.grid()->parseval_weight();
  double s = 0.0;
  for (std::size_t m = 0; m < c.size(); ++m) s += w[m] * symbol[m] * std::norm(c[m]);
  return s;
}

/// Spectral H^s norm: (sum (1+|k|^2)^s |f_k|^2)^{1/2}; s = 0 is the L2 norm.
inline double sobolev_norm(const Field& f, double s) {
  const auto c = f.spectral();
  const auto w = f.grid()->parseval_weight();
  const auto k2 = f.grid()->wavenumber_sq();
  double acc = 0.0;
  for (std::size_t m = 0; m < c.size(); ++m)
    acc += w[m] * std::pow(1.0 + k2[m], s) * std::norm(c[m]);
  return std::sqrt(acc);
}

/// Whether mode `m` survives the 2/3 rule.
inline bool dealias_keeps(const Grid& grid, std::size_t m) {
  const auto idx = grid.mode_index()[m];
  if (grid.basis() == Basis::fourier2d) {
    const auto cut = [](std::size_t n) { return static_cast<long>(n / 3); };
    return std::abs(idx[0]) <= cut(grid.extent(0)) && std::abs(idx[1]) <= cut(grid.extent(1));
  }
  return idx[0] <= static_cast<long>(2 * grid.extent(0) / 3);
}

/// Zeroes every mode above 2/3 of the Nyquist index (idempotent).
inline Field dealias(const Field& f) {
  const auto& grid = *f.grid();
  const auto in = f.spectral();
  std::vector<std::complex<double>> out(in.begin(), in.end());
  for (std::size_t m = 0; m < out.size(); ++m)
    if (!dealias_keeps(grid, m)) out[m] = 0.0;
  return Field::from_spectral(f.grid(), std::move(out));
}

template <class Fn>
Field pointwise_map(const Field& f, Fn&& fn) {
  const auto in = f.physical();
  std::vector<double> out(in.size());
  std::transform(in.begin(), in.end(), out.begin(), fn);
  return Field::from_physical(f.grid(), std::move(out));
}

/// L2 inner product by uniform-grid quadrature.
inline double inner(const Field& f, const Field& g) {
  f.check_same_grid(g);
  const auto a = f.physical(), b = g.physical();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s * f.grid()->cell_volume();
}

/// L2 inner product evaluated from spectral coefficients.
inline double inner_spectral(const Field& f, const Field& g) {
  f.check_same_grid(g);
  const auto a = f.spectral(), b = g.spectral();
  const auto w = f.grid()->parseval_weight();
  double s = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) s += w[m] * (a[m] * std::conj(b[m])).real();
  return s;
}

/// Quadrature of the field over the domain.
inline double integrate(const Field& f) {
  const auto v = f.physical();
  double s = 0.0;
  for (double x : v) s += x;
  return s * f.grid()->cell_volume();
}

/// Fourier2D: exact mean from the (0,0) coefficient; otherwise quadrature / |Omega|.
inline double mean(const Field& f) {
  if (f.grid()->basis() == Basis::fourier2d) return f.spectral()[f.grid()->zero_mode()].real();
  return integrate(f) / f.grid()->volume();
}

inline double max_abs(const Field& f) {
  double m = 0.0;
  for (double v : f.physical()) m = std::max(m, std::abs(v));
  return m;
}

inline bool all_finite(const Field& f) {
  const auto v = f.physical();
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// Sine1D: grid values of f_x (a cosine series, so returned as plain values).
inline std::vector<double> sine_derivative_values(const Field& f) {
  std::vector<double> out(f.grid()->physical_size());
  f.grid()->sine_derivative(f.spectral(), out);
  return out;
}

}  // namespace savbdf
