#pragma once

// The averaging operator over delta-tubes (direct quadrature backend and a
// fast lens-based backend for indicator data), the Nikodym maximal function,
// the oscillatory-integral (FIO) backend, the fractional-derivative
// composite, kernels K[a], the Schur row bound, and the error-term
// oscillatory integral b_delta.

#include "nikodym/common.hpp"
#include "nikodym/curve.hpp"
#include "nikodym/cutoffs.hpp"
#include "nikodym/field.hpp"
#include "nikodym/symbol.hpp"
#include "nikodym/tube.hpp"

namespace nikodym {

// ---------------------------------------------------------------------------
// Ball intersection volumes (slice geometry for indicator averages)
// ---------------------------------------------------------------------------

// Volume of B(0,R) intersect B(c e1, r) in R^d; closed forms for d = 2, 3,
// slab quadrature otherwise.
double ball_intersection_volume(double center_dist, double R, double r, int d);

// ---------------------------------------------------------------------------
// Direct averaging backend
// ---------------------------------------------------------------------------

struct DirectQuadOptions {
  int nodes_per_delta = 8;  // resolution contract: >= 8
  int cross_nodes = 16;     // per transverse axis
  int t_nodes = 0;          // 0 = auto from delta
};

// (1/|T_delta(s)|) int_{T} g(x - y, t) dy dt by product quadrature with the
// discrete tube normalization (g == 1 integrates to exactly 1).
double averaging_direct(const Curve& curve, double delta,
                        const std::function<double(const Vec&, double)>& g,
                        const Vec& x, double s,
                        const DirectQuadOptions& opt = {});

// Anisotropic variant over the Frenet box with half-widths r.
double averaging_direct(const Curve& curve, const Vec& r,
                        const std::function<double(const Vec&, double)>& g,
                        const Vec& x, double s,
                        const DirectQuadOptions& opt = {});

// ---------------------------------------------------------------------------
// Indicator witnesses with per-slice lens evaluation (exact in t up to
// 1-D quadrature); the workhorse for the sharpness experiments.
// ---------------------------------------------------------------------------

struct BallWitness {
  Vec center;     // spatial center; constant in t
  double radius;  // g = indicator of |y - center| <= radius
};

struct TubeWitness {
  double r_param = 0.0;   // direction parameter of the witness tube
  double radius = 0.0;    // 10*delta in the plan of the log experiment
  Vec shift;              // spatial translation w
  bool reflected = true;  // |y + t gamma(r) - shift| <= radius when true
};

class MaximalEvaluator {
 public:
  // s-grid step <= delta/2 (resolution contract; throws ConfigurationError).
  MaximalEvaluator(Curve curve, double delta, int s_grid_points,
                   bool parabolic_refine = true);

  void set_witness(const BallWitness& w);
  void set_witness(const TubeWitness& w);

  double average(const Vec& x, double s) const;  // A g (x, s)
  double maximal(const Vec& x) const;            // sup over the s-grid
  double delta() const { return delta_; }
  const Curve& curve() const { return curve_; }

 private:
  double lens_average(const Vec& p, const Vec& q, double r_big) const;

  Curve curve_;
  double delta_;
  int s_points_;
  bool refine_;
  std::optional<BallWitness> ball_;
  std::optional<TubeWitness> tube_;
};

// ---------------------------------------------------------------------------
// FIO backend
// ---------------------------------------------------------------------------

// A[a,gamma] g(x,s) on the padded s-lattice [-2,2] (ns slices). g must be a
// t-axis field on the same grid.
Field averaging_fio(const Symbol& a, const Curve& curve, const Field& g,
                    int ns, const ParallelContext& ctx = ParallelContext::serial());

// (1 + sqrt(-d_s^2))^(1/2) A[a,gamma] g.
Field fractional_fio(const Symbol& a, const Curve& curve, const Field& g,
                     int ns, const ParallelContext& ctx = ParallelContext::serial());

// Per-x max over the s-slices inside I of |field| (certified lower bound on
// the sup); field must be an s-axis field.
std::vector<double> nikodym_maximal_spectral(const Field& a_g);

// Coefficient-space operator for norm estimation: forward maps t-coefficients
// to s-coefficients, optionally composing the fractional multiplier.
class FioCoefficientOperator {
 public:
  FioCoefficientOperator(Symbol a, Curve curve, GridSpec grid, int nt, int ns,
                         bool fractional,
                         ParallelContext ctx = ParallelContext::serial());

  std::vector<cplx> forward(const std::vector<cplx>& v_t) const;
  std::vector<cplx> adjoint(const std::vector<cplx>& w_s) const;

  double norm_t(const std::vector<cplx>& v) const;
  double norm_s(const std::vector<cplx>& w) const;

  std::int64_t t_size() const { return grid_.spatial_points() * nt_; }
  std::int64_t s_size() const { return grid_.spatial_points() * ns_; }
  const GridSpec& grid() const { return grid_; }
  int nt() const { return nt_; }
  int ns() const { return ns_; }

  // Power iteration on L* L; returns the Rayleigh sequence (operator norm
  // lower bounds) and the final witness coefficients.
  struct PowerIterationResult {
    std::vector<double> rayleigh;
    std::vector<cplx> witness;
    double value = 0.0;
  };
  PowerIterationResult power_iteration(int iterations, std::uint64_t seed) const;

 private:
  void apply_fractional(std::vector<cplx>& w, bool square) const;

  Symbol a_;
  Curve curve_;
  GridSpec grid_;
  int nt_, ns_;
  bool fractional_;
  ParallelContext ctx_;
  std::vector<double> xi_cache_;   // flattened xi vectors
  std::vector<double> frac_mult_;  // (1+|sigma|)^(1/2) on the s-lattice
};

// ---------------------------------------------------------------------------
// Kernels and Schur bounds
// ---------------------------------------------------------------------------

struct KernelOptions {
  double curve_c1_sup = 0.0;     // sup |gamma'|; 0 = compute on the fly
  double s_feature_scale = 0.02; // finest s-feature of the symbol
  int nodes_per_osc = 16;
};

// K[a](xi, t', t) = int_I e^{i (t - t') <gamma(s), xi>} a(xi,s,t') conj a(xi,s,t) ds.
cplx kernel_K(const Symbol& a, const Curve& curve, const Vec& xi,
              double t_prime, double t, const KernelOptions& opt = {});

// d_s a = t <gamma'(s), xi> a + da/ds (finite differences for the last term).
Symbol d_s_symbol(const Symbol& a, const Curve& curve);

struct SchurReport {
  int iota = 0;
  double lambda = 0.0;
  double Lambda = 0.0;          // tested scale
  double sup_row_integral = 0.0;  // sup over sampled (xi, t') of int |K| dt
  double constant = 0.0;          // sup / Lambda^(2 iota - 1)
  int xi_samples = 0;
  int tprime_samples = 0;
  std::string to_csv_row() const;  // lambda, iota, Lambda, sup_value, constant
};

SchurReport schur_bound(const Symbol& a, const Curve& curve, int iota,
                        int xi_samples, int tprime_samples, double Lambda,
                        const KernelOptions& opt = {},
                        const ParallelContext& ctx = ParallelContext::serial());

// ---------------------------------------------------------------------------
// Error-term oscillatory integral
// ---------------------------------------------------------------------------

// b_delta(xi, sigma, t) = chi3(sigma) int_I e^{-i(sigma s + t <gamma(s), xi>)}
// a(xi, s, t) ds with chi3 built from the C_cut * delta^-1 cutoff.
cplx b_delta_eval(const Symbol& a_delta, const Curve& curve, const Vec& xi,
                  double sigma, double t, double c_cut, double delta,
                  const KernelOptions& opt = {});

struct DecayFit {
  double exponent = 0.0;  // fitted decay power of |b| in (1 + |sigma|)
  LineFit fit;
  int points_used = 0;
};

// Fits log |b| against log(1 + |sigma|) over sigma in [sigma_lo, sigma_hi]
// (|b| clipped above a relative floor).
DecayFit b_delta_decay_fit(const Symbol& a_delta, const Curve& curve,
                           const Vec& xi, double t, double c_cut, double delta,
                           double sigma_lo, double sigma_hi, int points = 24);

}  // namespace nikodym
