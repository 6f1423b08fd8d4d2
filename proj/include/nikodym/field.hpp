#pragma once

// Discretized functions on R^d x I: periodic spatial lattice with a partial
// Fourier transform in x, multiplier application, fractional s-derivative on
// the zero-padded [-2,2] lattice, and mixed norms.

#include "nikodym/common.hpp"

#include <vector>

namespace nikodym {

enum class Axis { t, s };

struct GridSpec {
  int d = 2;
  double X = 3.0;   // spatial box [-X, X]^d
  int nx = 64;      // points per spatial axis (power of two)
  int nt = 32;      // points on the trailing axis (power of two)
  bool periodic = true;

  double h() const { return 2.0 * X / nx; }
  std::int64_t spatial_points() const;
  double xi_spacing() const { return kPi / X; }
  void validate() const;

  bool operator==(const GridSpec& o) const {
    return d == o.d && X == o.X && nx == o.nx && nt == o.nt &&
           periodic == o.periodic;
  }
};

// Uniform midpoint lattice on [lo, hi].
struct AxisDomain {
  double lo = -1.0;
  double hi = 1.0;
  int n = 32;

  double step() const { return (hi - lo) / n; }
  double point(int k) const { return lo + (k + 0.5) * step(); }
  bool covers_I() const { return lo <= -1.0 && hi >= 1.0; }
};

inline AxisDomain t_domain(int nt) { return AxisDomain{-1.0, 1.0, nt}; }
inline AxisDomain padded_s_domain(int ns) { return AxisDomain{-2.0, 2.0, ns}; }

// Slice-major storage: values[slice * spatial_points + x_flat].
struct Field {
  GridSpec grid;
  Axis axis = Axis::t;
  AxisDomain dom = t_domain(32);
  std::vector<cplx> values;

  std::int64_t slices() const { return dom.n; }
  std::int64_t spatial() const { return grid.spatial_points(); }
  cplx& at(std::int64_t slice, std::int64_t xflat) {
    return values[slice * spatial() + xflat];
  }
  cplx at(std::int64_t slice, std::int64_t xflat) const {
    return values[slice * spatial() + xflat];
  }
  double cell_weight() const { return std::pow(grid.h(), grid.d) * dom.step(); }
  double l2_norm() const;
  double max_abs() const;

  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(double a);
};

Field make_field(const GridSpec& g, Axis axis, const AxisDomain& dom);

// Spatial lattice coordinates for flat index (x_i = -X + h * m_i).
Vec x_at(const GridSpec& g, std::int64_t xflat);
// Frequency lattice in FFT storage order; entries are (pi/X) * signed index.
Vec xi_at(const GridSpec& g, std::int64_t kflat);

// Same layout as Field; coefficients g^(xi_k, t_j) with the integral
// normalization ghat(xi) = int e^{-i x xi} g dx (discretized).
struct SpectralField {
  GridSpec grid;
  Axis axis = Axis::t;
  AxisDomain dom = t_domain(32);
  std::vector<cplx> values;

  std::int64_t slices() const { return dom.n; }
  std::int64_t spatial() const { return grid.spatial_points(); }
  cplx& at(std::int64_t slice, std::int64_t kflat) {
    return values[slice * spatial() + kflat];
  }
  cplx at(std::int64_t slice, std::int64_t kflat) const {
    return values[slice * spatial() + kflat];
  }
  // Parseval-compatible weight: ||ghat||^2 * (2X)^-d * dom.step() == ||g||^2.
  double coeff_weight() const { return std::pow(2.0 * grid.X, -grid.d) * dom.step(); }
  double l2_norm() const;
};

SpectralField partial_ft_x(const Field& f);
Field inverse_ft_x(const SpectralField& f);

// F^-1 (m . F g) per slice; m receives (xi) or (xi, slice coordinate).
Field apply_multiplier(const Field& f, const std::function<double(const Vec&)>& m);
Field apply_multiplier(const Field& f,
                       const std::function<cplx(const Vec&, double)>& m);

// Multiplier (1 + |sigma|)^order on the padded [-2,2] sigma-lattice. Fields
// on I are zero-padded first; fields already on [-2,2] are transformed in
// place, so compositions invert exactly on the padded lattice.
Field fractional_s_derivative(const Field& f, double order);

// Restrict a padded s-field to the slices lying inside I.
Field restrict_to_I(const Field& f);

// || ||g(x,.)||_{q over axis} ||_{p over x}; p in (0,inf], q in {2, inf}.
double mixed_norm(const Field& f, double p_x, double q_axis);

// Per-x maximum of |values| over slices whose coordinate lies in [lo, hi].
std::vector<double> max_over_axis(const Field& f, double lo, double hi);

// Unnormalized in-place 1-D DFT (forward: e^{-i...}); n must be supported by
// the transform backend (powers of two here).
void fft_1d(cplx* data, int n, bool forward);

// ---------------------------------------------------------------------------
// Factories
// ---------------------------------------------------------------------------

Field constant_field(const GridSpec& g, Axis axis, const AxisDomain& dom,
                     cplx value);
// e^{i <x, xi_k>} for a lattice frequency index vector (one per axis).
Field plane_wave_field(const GridSpec& g, Axis axis, const AxisDomain& dom,
                       const std::vector<int>& k_index);
// Random band-limited field: iid Gaussian spectrum on |xi| <= band, zero
// elsewhere; smooth in s/t via a low-order random trigonometric profile.
Field random_bandlimited_field(const GridSpec& g, Axis axis,
                               const AxisDomain& dom, double band,
                               std::uint64_t seed);
// Nonnegative smooth band-limited field (square of a band/2-limited field).
Field random_nonneg_field(const GridSpec& g, Axis axis, const AxisDomain& dom,
                          double band, std::uint64_t seed);
// Smooth bump supported in |x|_inf <= X - 1 times a smooth axis profile.
Field bump_field(const GridSpec& g, Axis axis, const AxisDomain& dom,
                 double spatial_width, double axis_width);

// Flat binary layout (header then row-major complex values) + JSON sidecar.
void write_field(const Field& f, const std::string& path);
Field read_field(const std::string& path);

}  // namespace nikodym
