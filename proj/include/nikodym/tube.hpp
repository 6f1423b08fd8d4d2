#pragma once

// delta-tubes and anisotropic Frenet-frame tubes in R^{d+1}: membership,
// volumes, Monte-Carlo intersection estimation and scale-vector
// admissibility.

#include "nikodym/common.hpp"
#include "nikodym/curve.hpp"

namespace nikodym {

struct Tube {
  enum class Kind { Isotropic, Anisotropic };

  Kind kind = Kind::Isotropic;
  Curve curve;
  double s = 0.0;        // direction parameter
  double delta = 0.0;    // isotropic radius
  Vec r;                 // anisotropic Frenet half-widths (size d)
  Vec center_shift;      // translation in R^{d+1} (w + T)

  int dim() const { return curve.dim(); }
  // Membership after subtracting center_shift; point = (y, t), size d+1.
  bool contains(const Vec& point) const;
  double volume() const;
  // Tight axis-aligned box (lo, hi) in R^{d+1} covering the tube.
  std::pair<Vec, Vec> bounding_box() const;
};

Tube make_iso_tube(Curve curve, double s, double delta,
                   const Vec& center_shift = Vec());
Tube make_aniso_tube(Curve curve, double s, const Vec& r,
                     const Vec& center_shift = Vec());

// Spec strings: "iso:s=<f>,delta=<f>" / "aniso:s=<f>,r=<f,f,...>".
Tube parse_tube_spec(const std::string& spec, Curve curve);

// ---------------------------------------------------------------------------
// Scale vectors
// ---------------------------------------------------------------------------

struct AdmissibilityResult {
  bool admissible = false;
  std::string first_violation;  // empty when admissible
};

// r_d <= ... <= r_1 <= r_2^(1/2) and the log-convexity chain
// r_j <= r_i^((k-j)/(k-i)) r_k^((j-i)/(k-i)); comparisons on log scale with
// tolerance 1e-12.
AdmissibilityResult check_admissible(const Vec& r);

// ---------------------------------------------------------------------------
// Intersection volume
// ---------------------------------------------------------------------------

struct IntersectionEstimate {
  double volume = 0.0;
  double std_error = 0.0;
  std::int64_t samples = 0;
  std::int64_t hits = 0;
};

// Unbiased Monte-Carlo estimate over the bounding box of the smaller tube;
// byte-deterministic given the seed. Disjoint boxes return exactly zero.
IntersectionEstimate intersection_volume_mc(const Tube& a, const Tube& b,
                                            std::int64_t samples,
                                            std::uint64_t seed);

// delta^(d+1) / (delta + gamma_gap); dimensional constants absorbed, used
// only in factor comparisons.
double predicted_intersection_volume(double delta, double gamma_gap, int d);

}  // namespace nikodym
