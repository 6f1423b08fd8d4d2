#pragma once

// Smooth compactly supported cutoffs with exact partition identities.
//
// psi is the normalized autocorrelation of an even C_c^infty bump, so its
// inverse Fourier transform is a perfect square (hence nonnegative) and
// bounded below on |y| <= 1. The Littlewood-Paley pairs are built by
// telescoping a single plateau function, which makes the partition-of-unity
// identities exact up to floating-point rounding.

#include "nikodym/common.hpp"

namespace nikodym {

class CutoffLibrary {
 public:
  CutoffLibrary();

  // supp psi = [-1/2, 1/2] (inside the required [-1,1]); psi(0) = 1.
  double psi(double r) const;
  // Inverse transform of psi, evaluated through the bump construction;
  // nonnegative everywhere by design.
  double psi_inverse_ft(double y) const;
  // min of psi_inverse_ft over 1e4 points of |y| <= 1, recorded at build.
  double psi_check_floor() const { return psi_floor_; }

  // supp eta = [-2,2], eta = 1 on [-1,1]; beta(r) = eta(r) - eta(2r),
  // supported on 1/2 <= |r| <= 2; eta(r) + sum_{lambda=2^k, k>=1} beta(r/lambda) = 1.
  double eta(double r) const;
  double beta(double r) const;

  // supp eta1 = [-4,4], eta1 = 1 on [-1,1]; beta1(r) = eta1(r) - eta1(4r),
  // supported on 1/4 <= |r| <= 4; eta1(r) + sum_{n>=1} beta1(4^-n r) = 1.
  double eta1(double r) const;
  double beta1(double r) const;

  // supp zeta = [-1,1], sum_nu zeta(. - nu) = 1 (exact).
  double zeta(double r) const;
  // zeta~ = 1 on [-3,3], supported in [-4,4].
  double zeta_tilde(double r) const;

  // chi~_I = 1 on I, supported in [-2,2].
  double chi_tilde_I(double r) const;

 private:
  double psi_table_lookup(double r) const;

  std::vector<double> psi_table_;  // on [0, 1/2]
  double psi_norm_ = 1.0;          // raw autocorrelation at 0
  double psi_floor_ = 0.0;
};

struct CutoffVerification {
  double partition_residual_eta = 0.0;   // eta + dyadic betas vs 1
  double partition_residual_eta1 = 0.0;
  double partition_residual_zeta = 0.0;
  double psi_min_inverse_ft = 0.0;       // over |y| <= 1
  double psi_min_wide = 0.0;             // over |y| <= 64
  bool pass = false;
  std::string to_json() const;
};

// Builds the library and runs the numeric checks (1e4-point grids,
// residual tolerance 1e-8). Throws EvaluationError if positivity fails.
CutoffLibrary build_cutoffs(CutoffVerification* verification = nullptr);

}  // namespace nikodym
