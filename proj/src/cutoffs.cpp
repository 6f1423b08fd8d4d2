#include "nikodym/cutoffs.hpp"

#include <cmath>
#include <sstream>

namespace nikodym {

namespace {

// Even bump supported on |x| <= 1/4.
double bump(double x) {
  const double u = 4.0 * x;
  const double t = 1.0 - u * u;
  return t > 0.0 ? std::exp(-1.0 / t) : 0.0;
}

// 64-node Gauss-Legendre on [-1,1] (nodes/weights generated by Newton on
// Legendre polynomials at startup).
struct GaussLegendre {
  std::vector<double> node, weight;
  explicit GaussLegendre(int n) : node(n), weight(n) {
    for (int i = 0; i < n; ++i) {
      double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        const double dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (x * p1 - p0) / (x * x - 1.0);
      node[i] = x;
      weight[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

const GaussLegendre& gl64() {
  static GaussLegendre g(64);
  return g;
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 int panels = 1) {
  const auto& g = gl64();
  double acc = 0.0;
  const double w = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * w;
    const double mid = lo + 0.5 * w, half = 0.5 * w;
    for (std::size_t i = 0; i < g.node.size(); ++i)
      acc += g.weight[i] * f(mid + half * g.node[i]);
  }
  return acc * 0.5 * w;
}

constexpr int kPsiTableSize = 8193;  // on [0, 1/2]

}  // namespace

CutoffLibrary::CutoffLibrary() {
  psi_table_.resize(kPsiTableSize);
  for (int i = 0; i < kPsiTableSize; ++i) {
    const double r = 0.5 * i / (kPsiTableSize - 1);
    const double lo = std::max(-0.25, r - 0.25);
    const double hi = std::min(0.25, r + 0.25);
    psi_table_[i] =
        hi > lo ? integrate([r](double u) { return bump(u) * bump(r - u); }, lo,
                            hi, 2)
                : 0.0;
  }
  psi_norm_ = psi_table_[0];
  for (auto& v : psi_table_) v /= psi_norm_;
}

double CutoffLibrary::psi_table_lookup(double r) const {
  const double a = std::abs(r);
  if (a >= 0.5) return 0.0;
  const double pos = a * 2.0 * (kPsiTableSize - 1);
  const int i = std::min(static_cast<int>(pos), kPsiTableSize - 2);
  const double f = pos - i;
  // Catmull-Rom through neighbouring table entries.
  const double p0 = psi_table_[std::max(0, i - 1)];
  const double p1 = psi_table_[i];
  const double p2 = psi_table_[i + 1];
  const double p3 = psi_table_[std::min(kPsiTableSize - 1, i + 2)];
  const double a0 = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
  const double a1 = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
  const double a2 = -0.5 * p0 + 0.5 * p2;
  return ((a0 * f + a1) * f + a2) * f + p1;
}

double CutoffLibrary::psi(double r) const { return psi_table_lookup(r); }

double CutoffLibrary::psi_inverse_ft(double y) const {
  // psi-check = (bump-check)^2 / psi_norm; quadrature resolves the phase.
  const int panels = 2 + static_cast<int>(std::abs(y) / 8.0);
  const double c =
      integrate([y](double x) { return bump(x) * std::cos(x * y); }, -0.25,
                0.25, panels);
  return c * c / psi_norm_;
}

double CutoffLibrary::eta(double r) const {
  const double a = std::abs(r);
  if (a <= 1.0) return 1.0;
  if (a >= 2.0) return 0.0;
  return smoothstep(2.0 - a);
}

double CutoffLibrary::beta(double r) const { return eta(r) - eta(2.0 * r); }

double CutoffLibrary::eta1(double r) const {
  const double a = std::abs(r);
  if (a <= 1.0) return 1.0;
  if (a >= 4.0) return 0.0;
  return smoothstep((4.0 - a) / 3.0);
}

double CutoffLibrary::beta1(double r) const { return eta1(r) - eta1(4.0 * r); }

double CutoffLibrary::zeta(double r) const {
  const double a = std::abs(r);
  if (a >= 1.0) return 0.0;
  // smoothstep(u) + smoothstep(1-u) = 1 makes the integer shifts sum to one.
  return smoothstep(1.0 - a);
}

double CutoffLibrary::zeta_tilde(double r) const {
  const double a = std::abs(r);
  if (a <= 3.0) return 1.0;
  if (a >= 4.0) return 0.0;
  return smoothstep(4.0 - a);
}

double CutoffLibrary::chi_tilde_I(double r) const {
  const double a = std::abs(r);
  if (a <= 1.0) return 1.0;
  if (a >= 2.0) return 0.0;
  return smoothstep(2.0 - a);
}

std::string CutoffVerification::to_json() const {
  std::ostringstream os;
  os << "{\"partition_residual_eta\":" << format_double(partition_residual_eta)
     << ",\"partition_residual_eta1\":" << format_double(partition_residual_eta1)
     << ",\"partition_residual_zeta\":" << format_double(partition_residual_zeta)
     << ",\"psi_min_inverse_ft\":" << format_double(psi_min_inverse_ft)
     << ",\"psi_min_wide\":" << format_double(psi_min_wide)
     << ",\"pass\":" << (pass ? "true" : "false") << "}";
  return os.str();
}

CutoffLibrary build_cutoffs(CutoffVerification* verification) {
  CutoffLibrary lib;
  CutoffVerification v;

  const int grid = 10000;
  for (int i = 0; i < grid; ++i) {
    // eta + dyadic betas on |r| <= 2^9 (partition exact once lambda exceeds |r|).
    const double r = -512.0 + 1024.0 * i / (grid - 1);
    double acc = lib.eta(r);
    for (double lam = 2.0; lam <= 2048.0; lam *= 2.0) acc += lib.beta(r / lam);
    v.partition_residual_eta =
        std::max(v.partition_residual_eta, std::abs(acc - 1.0));

    double acc1 = lib.eta1(r);
    for (int n = 1; n <= 8; ++n) acc1 += lib.beta1(std::pow(4.0, -n) * r);
    v.partition_residual_eta1 =
        std::max(v.partition_residual_eta1, std::abs(acc1 - 1.0));

    const double x = -5.0 + 10.0 * i / (grid - 1);
    double accz = 0.0;
    for (int nu = -8; nu <= 8; ++nu) accz += lib.zeta(x - nu);
    v.partition_residual_zeta =
        std::max(v.partition_residual_zeta, std::abs(accz - 1.0));
  }

  v.psi_min_inverse_ft = std::numeric_limits<double>::infinity();
  v.psi_min_wide = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid; ++i) {
    const double y1 = -1.0 + 2.0 * i / (grid - 1);
    v.psi_min_inverse_ft = std::min(v.psi_min_inverse_ft, lib.psi_inverse_ft(y1));
    const double yw = -64.0 + 128.0 * i / (grid - 1);
    v.psi_min_wide = std::min(v.psi_min_wide, lib.psi_inverse_ft(yw));
  }

  v.pass = v.partition_residual_eta <= 1e-8 && v.partition_residual_eta1 <= 1e-8 &&
           v.partition_residual_zeta <= 1e-8 && v.psi_min_inverse_ft > 0.0 &&
           v.psi_min_wide >= 0.0;
  if (!v.pass)
    throw EvaluationError("cutoff construction failed verification: " + v.to_json());
  if (verification) *verification = v;
  return lib;
}

}  // namespace nikodym
