#pragma once

// Symbols a(xi, s, t) of the averaging machinery: the frequency-localized
// a_delta and its Littlewood-Paley pieces, the H-split, the anisotropic
// distance function G to the degenerate set, the shell symbols a^n and their
// s-localizations a^{n,nu}, symbol rescaling, anisotropic symbols, and the
// sampling audits for all of them.

#include "nikodym/common.hpp"
#include "nikodym/curve.hpp"
#include "nikodym/cutoffs.hpp"

#include <memory>

namespace nikodym {

struct SymbolMeta {
  double lambda = 0.0;  // dyadic frequency scale (0 = low piece)
  double type_A = 0.0;  // two-sided inner-product constant, when audited
  int type_L = 0;       // type order
  int shell_n = -1;     // G-shell index (-1: not a shell piece)
  long shell_nu = 0;
  std::string id;
};

// Support hint: a radial annulus in xi, windows in s and t, and optionally a
// xi-dependent s-center (sigma(xi)) with a halfwidth for localized pieces.
struct SupportHint {
  double xi_lo = 0.0;
  double xi_hi = 0.0;  // 0 = unknown / unbounded
  double s_lo = -2.0, s_hi = 2.0;
  double t_lo = -2.0, t_hi = 2.0;
  std::function<std::optional<double>(const Vec&)> s_center;
  double s_halfwidth = 0.0;
  // Custom xi-draw from low-discrepancy coordinates; used for supports that
  // concentrate near thin cones where annulus rejection would starve. May
  // also fix the s-coordinate (returns (xi, s) with s = NaN when free).
  std::function<std::pair<Vec, double>(const std::vector<double>&)> cone_sampler;
  int cone_dims = 0;
};

struct Symbol {
  std::function<cplx(const Vec&, double, double)> eval;
  SymbolMeta meta;
  SupportHint hint;
  Curve curve;  // may be empty for curve-free symbols

  // Optional separable fast path: eval == xi_part(xi) * st_part(s, t).
  std::function<double(const Vec&)> xi_part;
  std::function<double(double, double)> st_part;

  bool separable() const { return xi_part && st_part; }
  cplx operator()(const Vec& xi, double s, double t) const { return eval(xi, s, t); }
};

struct SamplePoint {
  Vec xi;
  double s = 0.0, t = 0.0;
  double abs_value = 0.0;
};

// Low-discrepancy samples of supp(a) drawn through the support hint with
// rejection on |a| > 1e-12. May return fewer than requested (empty support).
std::vector<SamplePoint> sample_support(const Symbol& a, int want,
                                        std::uint64_t seq_offset = 0,
                                        int max_tries_factor = 512);

// ---------------------------------------------------------------------------
// Concrete symbols
// ---------------------------------------------------------------------------

// a_delta(xi,s,t) = psi(delta |xi|) chi~_I(s) chi~_I(t).
Symbol build_a_delta(std::shared_ptr<const CutoffLibrary> lib, double delta);

// Littlewood-Paley piece: a * eta(|xi|) (lambda = 0) or a * beta(|xi|/lambda).
Symbol littlewood_paley_piece(const Symbol& a,
                              std::shared_ptr<const CutoffLibrary> lib,
                              double lambda);

// Anisotropic symbol prod_j psi(<xi, e_j(s)> r_j) chi~_I(s) chi~_I(t).
// Inadmissible r only warns (construction stays defined).
Symbol build_anisotropic_symbol(std::shared_ptr<const CutoffLibrary> lib,
                                const Curve& curve, const Vec& r,
                                bool* admissible = nullptr);

// Clean type-(lambda, A, 1) symbol for base-case kernel experiments:
// frequency annulus, first derivative pinned to |<gamma'(s),xi>|/|xi| in
// [1/2, 3/4], and an interior s-window (zero near the ends of I, so that
// integration by parts in the kernel sees no boundary terms).
Symbol build_base_case_symbol(std::shared_ptr<const CutoffLibrary> lib,
                              const Curve& curve, double lambda);

// ---------------------------------------------------------------------------
// Type audit
// ---------------------------------------------------------------------------

struct TypeAudit {
  double min_ratio = 0.0;  // of sum_i |<gamma^(i)(s), xi>| / |xi|
  double max_ratio = 0.0;
  double suggested_A = 0.0;  // power of two covering both sides
  int accepted = 0;
  bool pass = false;
  std::string to_json() const;
};

TypeAudit measure_type(const Symbol& a, const Curve& curve, int order,
                       int samples = 1024, std::uint64_t seq_offset = 0);

// ---------------------------------------------------------------------------
// H-split
// ---------------------------------------------------------------------------

struct HSplitOptions {
  double eps_degeneracy = 0.1;  // target for the first N-1 inner products
  double a_prime_max = 1048576.0;  // 2^20 calibration cap
  int samples = 1024;
  std::uint64_t seed = 1;
};

struct HSplit {
  Symbol a_near;   // a * H   (degenerate part, decomposed further)
  Symbol a_far;    // a * (1 - H), type (lambda, A', N-1)
  double a_prime = 0.0;
  double measured_A = 0.0;
  // audit results on sampled supp(a * H)
  double min_top_ratio = 0.0;   // |<gamma^(N)(s),xi>| / |xi|, must be >= 1/(10A)
  double max_degeneracy = 0.0;  // A * sum_{i<N} |<gamma^(i)(s),xi>| / |xi|
  int accepted = 0;
  std::string to_json() const;
};

// Calibrates A' by doubling until the strengthened inequalities hold on
// sampled supp(aH); throws CalibrationError when the cap is exhausted.
HSplit build_H_and_split(const Symbol& a, const Curve& curve, int order,
                         std::shared_ptr<const CutoffLibrary> lib,
                         const HSplitOptions& opt = {});

// ---------------------------------------------------------------------------
// Distance function G and shell symbols
// ---------------------------------------------------------------------------

class GammaDistance {
 public:
  GammaDistance(Curve curve, int order, double lambda, double eps0);

  // base(xi) + eps0^-2 (s - sigma(xi))^2; nullopt when sigma is unsolvable
  // at xi (excluded-point marker).
  std::optional<double> operator()(const Vec& xi, double s) const;
  std::optional<double> sigma(const Vec& xi) const { return (*solver_)(xi); }
  double eps0() const { return eps0_; }
  int order() const { return order_; }
  double lambda() const { return lambda_; }

 private:
  Curve curve_;
  int order_;
  double lambda_;
  double eps0_;
  std::shared_ptr<SigmaSolver> solver_;
};

struct ShellDecomposition {
  Symbol base;                // the symbol that was decomposed (aH)
  std::shared_ptr<GammaDistance> distance;
  double eps0 = 0.0;
  double eps1 = 0.0;
  double lambda = 0.0;
  int order = 0;  // N
};

ShellDecomposition make_shell_decomposition(
    const Symbol& a_near, const Curve& curve, int order,
    std::shared_ptr<const CutoffLibrary> lib, double eps0, double eps1);

// a^0 (n = 0) or a^n (n >= 1) from the shell decomposition.
Symbol shell_symbol(const ShellDecomposition& dec,
                    std::shared_ptr<const CutoffLibrary> lib, int n);

// a^{n,nu} = a^n * zeta(rho^-1 (s - s_{n,nu})), s_{n,nu} = rho nu,
// rho = 2^n lambda^{-1/N}.
Symbol shell_piece(const ShellDecomposition& dec,
                   std::shared_ptr<const CutoffLibrary> lib, int n, long nu);

double shell_rho(const ShellDecomposition& dec, int n);

// Indices n (0-based; includes 0) whose shell symbol has nonempty sampled
// support.
std::vector<int> occupied_shells(const ShellDecomposition& dec,
                                 std::shared_ptr<const CutoffLibrary> lib,
                                 int max_n, int samples_per_shell = 256);

// Default eps0 policy: (4N)^-N / (2 Bhat), Bhat the measured regularity.
double default_eps0(const Curve& curve, int order);

// ---------------------------------------------------------------------------
// Audits
// ---------------------------------------------------------------------------

struct InnerProductAudit {
  int n = 0;
  long nu = 0;
  double lambda = 0.0;
  double rho = 0.0;
  double min_ratio = 0.0;  // sum_{i<N} rho^{i-N} |<gamma^(i)(s),xi>| / lambda
  double max_ratio = 0.0;
  int accepted = 0;
  bool empty = false;  // empty-support marker
  bool pass = false;
  std::string to_json() const;
};

InnerProductAudit verify_inner_product_bounds(const Symbol& piece,
                                              const Curve& curve, int order,
                                              double rho, int samples = 1024,
                                              double spread_budget = 0.0);

struct GBoundAudit {
  double max_g = 0.0;         // over sampled support
  double cap = 0.0;           // derived C(B,d) eps0^-2 bound
  int excluded_points = 0;    // sigma unsolvable on support (expected 0)
  int accepted = 0;
  bool pass = false;
  std::string to_json() const;
};

GBoundAudit audit_g_bound(const ShellDecomposition& dec, int samples = 1024);

// Rescaled symbol a~(xi,s,t) = a(T* xi, s0 + rho s, t).
Symbol rescale_symbol(const Symbol& a, const RescalingMap& map);

struct AnnulusAudit {
  double c1 = 0.0;  // min |xi| / (rho^N lambda) over sampled support
  double c2 = 0.0;  // max
  int accepted = 0;
  bool pass = false;
  std::string to_json() const;
};

AnnulusAudit audit_rescaled_annulus(const Symbol& rescaled, double rho,
                                    double lambda, int order,
                                    int samples = 1024);

// Sup of |finite-difference d^beta/ds^beta a| over sampled support,
// beta = 1..max_beta (central stencils, h = 1e-5).
std::vector<double> derivative_sups(const Symbol& a, int max_beta = 3,
                                    int samples = 512,
                                    std::uint64_t seq_offset = 0);

std::string audit_row_json(const std::string& symbol_id,
                           const std::string& lemma, int n, long nu,
                           double lambda, double min_ratio, double max_ratio,
                           bool pass);

}  // namespace nikodym
