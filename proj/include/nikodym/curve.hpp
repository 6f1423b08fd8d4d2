#pragma once

// Curves on I = [-1,1] with derivative oracles up to order 2d, the
// nondegeneracy machinery (generalized determinants, sampled class
// membership, Frenet frames), the implicit root sigma(xi) and the
// rescaling maps driving the induction scheme.

#include "nikodym/common.hpp"

#include <memory>

namespace nikodym {

class CurveImpl;

// Immutable curve handle with value semantics. eval(i, s) returns the i-th
// derivative, 0 <= i <= max_order() = 2d.
class Curve {
 public:
  Curve() = default;
  explicit Curve(std::shared_ptr<const CurveImpl> impl) : impl_(std::move(impl)) {}

  Vec eval(int order, double s) const;
  int dim() const;
  int max_order() const;
  // Regularity budget B (unitless); the C^{2d} bound the curve claims.
  double regularity() const;
  const std::string& name() const;
  bool valid() const { return impl_ != nullptr; }

 private:
  std::shared_ptr<const CurveImpl> impl_;
};

// Built-in families.
Curve make_moment_curve(int d, double regularity = 10.0);
Curve make_circle2d(double regularity = 10.0);
Curve make_perturbed_moment(int d, double eps, double regularity = 10.0);
// Straight line (s, 0, ..., 0); rank-deficient beyond order 1. Negative control.
Curve make_line(int d, double regularity = 10.0);

// Position-only oracle: derivatives by central finite differences with step
// h = 1e-4 * max(1, |s|) applied recursively per order.
Curve make_finite_difference_curve(std::string name, int d, double regularity,
                                   std::function<Vec(double)> position);

// Orthogonal image Q * gamma(s); Q must be d x d.
Curve rotate_curve(const Curve& c, const Mat& q);

// Registry keys: "moment", "circle2d", "perturbed-moment:eps=<float>", "line".
Curve curve_from_name(const std::string& key, int d);

// ---------------------------------------------------------------------------
// Nondegeneracy
// ---------------------------------------------------------------------------

// sqrt of the sum of squares of all L x L minors of (gamma^(1) ... gamma^(L)),
// i.e. the L-volume of the derivative parallelepiped. Equals |det| at L = d.
double generalized_determinant(const Curve& c, double s, int order);

struct NondegeneracyReport {
  int order = 0;                 // L
  double bound = 0.0;            // B used for the pass decision
  double min_gen_det = 0.0;
  double argmin_s = 0.0;
  double max_cnorm = 0.0;        // empirical C^{2d} norm over the grid
  int samples = 0;
  bool passes = false;           // min_gen_det >= 1/B and max_cnorm <= B
  std::string note = "sampled certification";

  std::string to_json() const;
};

NondegeneracyReport check_class_membership(const Curve& c, double bound,
                                           int order, int s_samples = 1024);

// Orthonormal Frenet basis e_1..e_d (columns), <e_k, gamma^(k)> > 0.
// Throws DegeneracyError naming the failing order when a pivot collapses.
Mat frenet_frame(const Curve& c, double s, double pivot_tol = 1e-10);

// ---------------------------------------------------------------------------
// sigma(xi): root of <gamma^(N-1)(sigma), xi> = 0 on I
// ---------------------------------------------------------------------------

struct SigmaOptions {
  int scan_points = 512;
  double tol = 1e-12;
};

// Grid scan for sign changes, bisection, Newton polish. Among refined roots
// picks the one with the smallest residual, ties broken by the smallest sigma.
// Returns nullopt when no sign change is bracketed.
std::optional<double> solve_sigma(const Curve& c, const Vec& xi, int level,
                                  const SigmaOptions& opt = {});

// Memoizing solver keyed by exact xi bytes; safe for concurrent use.
class SigmaSolver {
 public:
  SigmaSolver(Curve c, int level, SigmaOptions opt = {});
  ~SigmaSolver();
  std::optional<double> operator()(const Vec& xi) const;
  int level() const { return level_; }
  const Curve& curve() const { return curve_; }

 private:
  struct Cache;
  Curve curve_;
  int level_;
  SigmaOptions opt_;
  std::shared_ptr<Cache> cache_;
};

// ---------------------------------------------------------------------------
// Rescaling
// ---------------------------------------------------------------------------

// Linear map with T gamma^(i)(s0) = rho^i gamma^(i)(s0) for i <= N and
// T v = rho^N v on the orthogonal complement of the derivative span.
struct RescalingMap {
  double s0 = 0.0;
  double rho = 0.0;
  int level = 0;  // N
  int d = 0;
  Mat matrix;             // T
  Mat inverse;            // T^-1
  Mat inverse_transpose;  // T^-* (written T* in scaling identities)
};

RescalingMap build_rescaling_map(const Curve& c, double s0, double rho,
                                 int level);

// gamma~(s) = T^-1 (gamma(s0 + rho s) - gamma(s0)); derivative oracle
// gamma~^(i)(s) = rho^i T^-1 gamma^(i)(s0 + rho s).
Curve rescale_curve(const Curve& c, const RescalingMap& map);

double operator_norm(const Mat& m);

}  // namespace nikodym
