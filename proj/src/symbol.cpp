#include "nikodym/symbol.hpp"

#include <Eigen/QR>

#include <cmath>
#include <iostream>
#include <sstream>

namespace nikodym {

namespace {

constexpr double kSupportEps = 1e-12;

double gauss_from(double u1, double u2) {
  u1 = std::max(u1, 1e-12);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

Vec unit_direction(const std::vector<double>& coords, int d, int offset) {
  Vec v(d);
  for (int i = 0; i < d; i += 2) {
    const double u1 = coords[offset + i];
    const double u2 = coords[offset + i + 1 < d ? offset + i + 1 : offset];
    v[i] = gauss_from(u1, u2);
    if (i + 1 < d)
      v[i + 1] = std::sqrt(-2.0 * std::log(std::max(u1, 1e-12))) *
                 std::sin(2.0 * kPi * u2);
  }
  const double n = v.norm();
  return n > 0 ? Vec(v / n) : Vec(Vec::Unit(d, 0));
}

}  // namespace

std::vector<SamplePoint> sample_support(const Symbol& a, int want,
                                        std::uint64_t seq_offset,
                                        int max_tries_factor) {
  std::vector<SamplePoint> out;
  if (want <= 0) return out;
  const int d = a.curve.valid() ? a.curve.dim() : static_cast<int>(0);

  const bool cone = static_cast<bool>(a.hint.cone_sampler);
  const int dir_coords = d + (d % 2);
  const int dims = cone ? a.hint.cone_dims + 1  // +1 for t
                        : 1 + dir_coords + 2;
  const std::int64_t max_tries =
      static_cast<std::int64_t>(want) * max_tries_factor;
  for (std::int64_t tri = 1; tri <= max_tries && static_cast<int>(out.size()) < want;
       ++tri) {
    const auto u = halton_point(seq_offset + tri, dims);
    Vec xi;
    double s = 0.0;
    double t = 0.0;
    if (cone) {
      auto [cxi, cs] = a.hint.cone_sampler(u);
      xi = std::move(cxi);
      s = cs;
      t = a.hint.t_lo + (a.hint.t_hi - a.hint.t_lo) * u[dims - 1];
    } else {
      if (d == 0) throw InvalidInputError("sample_support: symbol has no curve/dim");
      const double r = a.hint.xi_lo + (a.hint.xi_hi - a.hint.xi_lo) * u[0];
      xi = r * unit_direction(u, d, 1);
      s = a.hint.s_lo + (a.hint.s_hi - a.hint.s_lo) * u[1 + dir_coords];
      t = a.hint.t_lo + (a.hint.t_hi - a.hint.t_lo) * u[2 + dir_coords];
    }
    if (std::isnan(s) || a.hint.s_center) {
      // xi-dependent s-window around sigma(xi)
      if (!a.hint.s_center) continue;
      auto c = a.hint.s_center(xi);
      if (!c) continue;
      s = *c + (2.0 * halton(seq_offset + tri, 37) - 1.0) * a.hint.s_halfwidth;
    }
    const double v = std::abs(a.eval(xi, s, t));
    if (v > kSupportEps) out.push_back(SamplePoint{xi, s, t, v});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Concrete symbols
// ---------------------------------------------------------------------------

Symbol build_a_delta(std::shared_ptr<const CutoffLibrary> lib, double delta) {
  if (!(delta > 0.0 && delta < 1.0))
    throw InvalidInputError("build_a_delta: delta must lie in (0,1)");
  Symbol a;
  a.meta.id = "a_delta[" + format_double(delta) + "]";
  a.hint.xi_lo = 0.0;
  a.hint.xi_hi = 0.5 / delta;
  a.xi_part = [lib, delta](const Vec& xi) { return lib->psi(delta * xi.norm()); };
  a.st_part = [lib](double s, double t) {
    return lib->chi_tilde_I(s) * lib->chi_tilde_I(t);
  };
  auto xi_part = a.xi_part;
  auto st_part = a.st_part;
  a.eval = [xi_part, st_part](const Vec& xi, double s, double t) {
    return cplx(xi_part(xi) * st_part(s, t), 0.0);
  };
  return a;
}

Symbol littlewood_paley_piece(const Symbol& a,
                              std::shared_ptr<const CutoffLibrary> lib,
                              double lambda) {
  if (lambda != 0.0 &&
      (lambda < 2.0 || std::abs(std::log2(lambda) - std::round(std::log2(lambda))) > 1e-12))
    throw InvalidInputError("littlewood_paley_piece: lambda must be 0 or in 2^N");
  Symbol out = a;
  out.meta.lambda = lambda;
  out.meta.id = a.meta.id + (lambda == 0.0 ? "^0" : "^" + format_double(lambda));
  auto base = a.eval;
  auto window = [lib, lambda](const Vec& xi) {
    const double r = xi.norm();
    return lambda == 0.0 ? lib->eta(r) : lib->beta(r / lambda);
  };
  out.eval = [base, window](const Vec& xi, double s, double t) {
    return base(xi, s, t) * window(xi);
  };
  if (a.separable()) {
    auto xp = a.xi_part;
    out.xi_part = [xp, window](const Vec& xi) { return xp(xi) * window(xi); };
    out.st_part = a.st_part;
  }
  if (lambda == 0.0) {
    out.hint.xi_hi = a.hint.xi_hi > 0 ? std::min(a.hint.xi_hi, 2.0) : 2.0;
  } else {
    out.hint.xi_lo = std::max(a.hint.xi_lo, lambda / 2.0);
    out.hint.xi_hi = a.hint.xi_hi > 0 ? std::min(a.hint.xi_hi, 2.0 * lambda)
                                      : 2.0 * lambda;
  }
  return out;
}

Symbol build_anisotropic_symbol(std::shared_ptr<const CutoffLibrary> lib,
                                const Curve& curve, const Vec& r,
                                bool* admissible) {
  if (r.size() != curve.dim())
    throw InvalidInputError("build_anisotropic_symbol: r must have d entries");
  const auto adm = check_admissible(r);
  if (admissible) *admissible = adm.admissible;
  if (!adm.admissible)
    std::cerr << "[nikodym] warning: inadmissible scale vector ("
              << adm.first_violation << "); symbol still constructed\n";
  Symbol a;
  a.curve = curve;
  a.meta.id = "a_r[d=" + std::to_string(curve.dim()) + "]";
  double rmin = r[0];
  for (int j = 1; j < r.size(); ++j) rmin = std::min(rmin, r[j]);
  a.hint.xi_hi = 0.5 * std::sqrt(static_cast<double>(curve.dim())) / rmin;
  Vec rcopy = r;
  a.eval = [lib, curve, rcopy](const Vec& xi, double s, double t) {
    const double cut = lib->chi_tilde_I(s) * lib->chi_tilde_I(t);
    if (cut == 0.0) return cplx(0.0, 0.0);
    const Mat frame = frenet_frame(curve, s);
    double prod = 1.0;
    for (int j = 0; j < rcopy.size() && prod != 0.0; ++j)
      prod *= lib->psi(frame.col(j).dot(xi) * rcopy[j]);
    return cplx(prod * cut, 0.0);
  };
  return a;
}

Symbol build_base_case_symbol(std::shared_ptr<const CutoffLibrary> lib,
                              const Curve& curve, double lambda) {
  Symbol a;
  a.curve = curve;
  a.meta.lambda = lambda;
  a.meta.type_L = 1;
  a.meta.id = "base_case[" + format_double(lambda) + "]";
  a.hint.xi_lo = lambda / 2.0;
  a.hint.xi_hi = 2.0 * lambda;
  a.hint.s_lo = -0.97;
  a.hint.s_hi = 0.97;
  a.eval = [lib, curve, lambda](const Vec& xi, double s, double t) {
    const double r = xi.norm();
    if (r == 0.0) return cplx(0.0, 0.0);
    const double ring = lib->beta(r / lambda);
    if (ring == 0.0) return cplx(0.0, 0.0);
    const double win = smoothstep((0.97 - std::abs(s)) / 0.07);
    if (win == 0.0) return cplx(0.0, 0.0);
    const double u = curve.eval(1, s).dot(xi) / r;
    const double q = smoothstep(8.0 * (u - 0.5)) * smoothstep(8.0 * (0.75 - u));
    return cplx(ring * win * q * lib->chi_tilde_I(t), 0.0);
  };
  return a;
}

// ---------------------------------------------------------------------------
// Type audit
// ---------------------------------------------------------------------------

TypeAudit measure_type(const Symbol& a, const Curve& curve, int order,
                       int samples, std::uint64_t seq_offset) {
  TypeAudit audit;
  const auto pts = sample_support(a, samples, seq_offset);
  audit.accepted = static_cast<int>(pts.size());
  if (pts.empty()) return audit;
  audit.min_ratio = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    double sum = 0.0;
    for (int i = 1; i <= order; ++i)
      sum += std::abs(curve.eval(i, p.s).dot(p.xi));
    const double ratio = sum / p.xi.norm();
    audit.min_ratio = std::min(audit.min_ratio, ratio);
    audit.max_ratio = std::max(audit.max_ratio, ratio);
  }
  audit.pass = audit.min_ratio > 0.0;
  const double need = std::max(audit.max_ratio, 1.0 / audit.min_ratio);
  audit.suggested_A = std::pow(2.0, std::ceil(std::log2(std::max(2.0, need))));
  return audit;
}

std::string TypeAudit::to_json() const {
  std::ostringstream os;
  os << "{\"min_ratio\":" << format_double(min_ratio)
     << ",\"max_ratio\":" << format_double(max_ratio)
     << ",\"suggested_A\":" << format_double(suggested_A)
     << ",\"accepted\":" << accepted << ",\"pass\":" << (pass ? "true" : "false")
     << "}";
  return os.str();
}

// ---------------------------------------------------------------------------
// Cone sampler: parametrizes the thin support of a*H
// ---------------------------------------------------------------------------

namespace {

// Draws xi = r (dir_perp + sum_i w_i f_i) with <gamma^(i)(s*), f_j> = d_ij,
// so the first N-1 inner products are exactly the window coordinates w_i.
// s is then drawn near s*. Coordinates consumed:
//   u[0]: s*, u[1..2m]: complement direction (m = ceil((d-N+1)/2) pairs),
//   next N-1: window coords, then radius, then s-offset.
struct ConeSamplerDef {
  Curve curve;
  int order = 0;  // N
  double window = 0.0;      // inner-product window (absolute)
  double s_halfwidth = 0.0;
  double xi_lo = 0.0, xi_hi = 0.0;
  double s_lo = -1.0, s_hi = 1.0;

  int dims() const {
    const int d = curve.dim();
    const int comp = d - order + 1;
    return 1 + comp + (comp % 2) + (order - 1) + 1 + 1;
  }

  std::pair<Vec, double> operator()(const std::vector<double>& u) const {
    const int d = curve.dim();
    const int comp = d - order + 1;
    const int comp_coords = comp + (comp % 2);
    const double s_star = s_lo + (s_hi - s_lo) * u[0];

    Mat m(d, order - 1);
    for (int i = 1; i < order; ++i) m.col(i - 1) = curve.eval(i, s_star);

    Vec dir;
    if (order == 1) {
      dir = unit_direction(u, d, 1);
    } else {
      Eigen::HouseholderQR<Mat> qr(m);
      const Mat q = qr.householderQ();
      const Mat basis = q.rightCols(comp);
      Vec coeff(comp);
      for (int i = 0; i < comp; i += 2) {
        const double u1 = u[1 + i];
        const double u2 = u[1 + (i + 1 < comp ? i + 1 : i)];
        coeff[i] = gauss_from(u1, u2);
        if (i + 1 < comp)
          coeff[i + 1] = std::sqrt(-2.0 * std::log(std::max(u1, 1e-12))) *
                         std::sin(2.0 * kPi * u2);
      }
      if (coeff.norm() == 0.0) coeff[0] = 1.0;
      dir = basis * (coeff / coeff.norm());
    }

    const double r = xi_lo + (xi_hi - xi_lo) * u[1 + comp_coords + (order - 1)];
    Vec xi = r * dir;
    if (order > 1) {
      const Mat gram = m.transpose() * m;
      const Mat dual = m * gram.inverse();  // columns f_i, <gamma^(j), f_i> = d_ij
      for (int i = 0; i < order - 1; ++i) {
        const double w = (2.0 * u[1 + comp_coords + i] - 1.0) * window;
        xi += w * dual.col(i);
      }
    }
    const double s =
        s_star + (2.0 * u[1 + comp_coords + order] - 1.0) * s_halfwidth;
    return {xi, s};
  }
};

void attach_cone_sampler(Symbol& sym, const ConeSamplerDef& def) {
  sym.hint.cone_dims = def.dims();
  sym.hint.cone_sampler =
      [def](const std::vector<double>& u) { return def(u); };
}

}  // namespace

// ---------------------------------------------------------------------------
// H-split
// ---------------------------------------------------------------------------

HSplit build_H_and_split(const Symbol& a, const Curve& curve, int order,
                         std::shared_ptr<const CutoffLibrary> lib,
                         const HSplitOptions& opt) {
  if (order < 2) throw InvalidInputError("H-split needs N >= 2");
  const double lambda = a.meta.lambda;
  if (lambda <= 0.0)
    throw InvalidInputError("H-split needs a dyadic symbol (lambda > 0)");

  const TypeAudit type = measure_type(a, curve, order, opt.samples);
  if (type.accepted == 0)
    throw CalibrationError("H-split: base symbol has empty sampled support",
                           a.meta.id);
  const double A = type.suggested_A;

  auto make_split = [&](double a_prime) {
    auto h_fun = [curve, lib, order, lambda, a_prime](const Vec& xi, double s) {
      double prod = 1.0;
      for (int i = 1; i < order && prod != 0.0; ++i)
        prod *= lib->eta(a_prime / lambda * curve.eval(i, s).dot(xi));
      return prod;
    };
    Symbol near = a;
    near.curve = curve;
    near.meta.id = a.meta.id + "*H";
    near.meta.type_A = A;
    near.meta.type_L = order;
    near.xi_part = nullptr;
    near.st_part = nullptr;
    auto base = a.eval;
    near.eval = [base, h_fun](const Vec& xi, double s, double t) {
      return base(xi, s, t) * h_fun(xi, s);
    };
    ConeSamplerDef cone;
    cone.curve = curve;
    cone.order = order;
    cone.window = 2.2 * lambda / a_prime;
    cone.s_halfwidth = std::min(1.5, 60.0 * A / a_prime);
    cone.xi_lo = std::max(a.hint.xi_lo, 1e-9);
    cone.xi_hi = a.hint.xi_hi;
    cone.s_lo = std::max(a.hint.s_lo, -1.0);
    cone.s_hi = std::min(a.hint.s_hi, 1.0);
    attach_cone_sampler(near, cone);

    Symbol far = a;
    far.curve = curve;
    far.meta.id = a.meta.id + "*(1-H)";
    far.meta.type_A = a_prime;
    far.meta.type_L = order - 1;
    far.xi_part = nullptr;
    far.st_part = nullptr;
    far.eval = [base, h_fun](const Vec& xi, double s, double t) {
      return base(xi, s, t) * (1.0 - h_fun(xi, s));
    };
    return std::make_pair(near, far);
  };

  std::string worst = "(none)";
  for (double a_prime = 4.0; a_prime <= opt.a_prime_max; a_prime *= 2.0) {
    auto [near, far] = make_split(a_prime);
    const auto pts = sample_support(near, opt.samples, opt.seed * 131);
    if (pts.empty()) {
      worst = "no sampled support at A'=" + format_double(a_prime);
      continue;
    }
    double min_top = std::numeric_limits<double>::infinity();
    double max_deg = 0.0;
    const SamplePoint* worst_pt = nullptr;
    for (const auto& p : pts) {
      const double nrm = p.xi.norm();
      const double top = std::abs(curve.eval(order, p.s).dot(p.xi)) / nrm;
      double deg = 0.0;
      for (int i = 1; i < order; ++i)
        deg += std::abs(curve.eval(i, p.s).dot(p.xi));
      deg *= A / nrm;
      if (top < min_top) min_top = top;
      if (deg > max_deg) {
        max_deg = deg;
        worst_pt = &p;
      }
    }
    const bool top_ok = min_top >= 1.0 / (10.0 * A);
    const bool deg_ok = max_deg <= opt.eps_degeneracy;
    if (top_ok && deg_ok) {
      HSplit out;
      out.a_near = near;
      out.a_far = far;
      out.a_prime = a_prime;
      out.measured_A = A;
      out.min_top_ratio = min_top;
      out.max_degeneracy = max_deg;
      out.accepted = static_cast<int>(pts.size());
      return out;
    }
    if (worst_pt) {
      std::ostringstream os;
      os << "A'=" << a_prime << " s=" << worst_pt->s << " |xi|="
         << worst_pt->xi.norm() << " top=" << min_top << " deg=" << max_deg;
      worst = os.str();
    }
  }
  throw CalibrationError("H-split calibration failed (no A' <= 2^20 works)",
                         worst);
}

std::string HSplit::to_json() const {
  std::ostringstream os;
  os << "{\"a_prime\":" << format_double(a_prime)
     << ",\"measured_A\":" << format_double(measured_A)
     << ",\"min_top_ratio\":" << format_double(min_top_ratio)
     << ",\"max_degeneracy\":" << format_double(max_degeneracy)
     << ",\"accepted\":" << accepted << "}";
  return os.str();
}

// ---------------------------------------------------------------------------
// G and shells
// ---------------------------------------------------------------------------

GammaDistance::GammaDistance(Curve curve, int order, double lambda, double eps0)
    : curve_(std::move(curve)),
      order_(order),
      lambda_(lambda),
      eps0_(eps0),
      solver_(std::make_shared<SigmaSolver>(curve_, order)) {
  if (order_ < 2) throw InvalidInputError("GammaDistance needs N >= 2");
  if (eps0_ <= 0.0) throw InvalidInputError("GammaDistance: eps0 > 0 required");
}

std::optional<double> GammaDistance::operator()(const Vec& xi, double s) const {
  const auto sg = (*solver_)(xi);
  if (!sg) return std::nullopt;
  double acc = sq((s - *sg) / eps0_);
  for (int i = 1; i < order_; ++i) {
    const double ip = curve_.eval(i, *sg).dot(xi) / (eps0_ * lambda_);
    acc += std::pow(std::abs(ip), 2.0 / (order_ - i));
  }
  return acc;
}

double default_eps0(const Curve& curve, int order) {
  const auto rep = check_class_membership(curve, curve.regularity(), order, 256);
  const double bhat =
      std::max({1.0, rep.max_cnorm,
                rep.min_gen_det > 0 ? 1.0 / rep.min_gen_det : 1.0});
  return std::pow(4.0 * order, -order) / (2.0 * bhat);
}

ShellDecomposition make_shell_decomposition(
    const Symbol& a_near, const Curve& curve, int order,
    std::shared_ptr<const CutoffLibrary> lib, double eps0, double eps1) {
  (void)lib;
  ShellDecomposition dec;
  dec.base = a_near;
  dec.order = order;
  dec.lambda = a_near.meta.lambda;
  dec.eps0 = eps0;
  dec.eps1 = eps1;
  dec.distance =
      std::make_shared<GammaDistance>(curve, order, dec.lambda, eps0);
  if (dec.lambda <= 0.0)
    throw InvalidInputError("shell decomposition needs lambda > 0");
  return dec;
}

double shell_rho(const ShellDecomposition& dec, int n) {
  return std::pow(2.0, n) * std::pow(dec.lambda, -1.0 / dec.order);
}

Symbol shell_symbol(const ShellDecomposition& dec,
                    std::shared_ptr<const CutoffLibrary> lib, int n) {
  if (n < 0) throw InvalidInputError("shell index must be >= 0");
  Symbol out = dec.base;
  out.meta.shell_n = n;
  out.meta.id = dec.base.meta.id + "^n" + std::to_string(n);
  auto base = dec.base.eval;
  auto dist = dec.distance;
  const double scale = sq(dec.eps1) * std::pow(dec.lambda, 2.0 / dec.order);
  const double shrink = std::pow(4.0, -n);
  const int nn = n;
  out.eval = [base, dist, lib, scale, shrink, nn](const Vec& xi, double s,
                                                  double t) {
    const cplx b = base(xi, s, t);
    if (b == cplx(0.0, 0.0)) return b;
    const auto g = (*dist)(xi, s);
    if (!g) return cplx(0.0, 0.0);  // excluded point
    const double x = scale * *g;
    return b * (nn == 0 ? lib->eta1(x) : lib->beta1(shrink * x));
  };
  return out;
}

Symbol shell_piece(const ShellDecomposition& dec,
                   std::shared_ptr<const CutoffLibrary> lib, int n, long nu) {
  Symbol out = shell_symbol(dec, lib, n);
  const double rho = shell_rho(dec, n);
  const double center = rho * static_cast<double>(nu);
  out.meta.shell_nu = nu;
  out.meta.id += ",nu" + std::to_string(nu);
  auto base = out.eval;
  out.eval = [base, lib, rho, center](const Vec& xi, double s, double t) {
    const double z = lib->zeta((s - center) / rho);
    return z == 0.0 ? cplx(0.0, 0.0) : base(xi, s, t) * z;
  };
  return out;
}

std::vector<int> occupied_shells(const ShellDecomposition& dec,
                                 std::shared_ptr<const CutoffLibrary> lib,
                                 int max_n, int samples_per_shell) {
  std::vector<int> occ;
  for (int n = 0; n <= max_n; ++n) {
    Symbol sn = shell_symbol(dec, lib, n);
    const auto pts = sample_support(sn, samples_per_shell, 7919ull * (n + 1));
    if (static_cast<int>(pts.size()) >= std::max(4, samples_per_shell / 32))
      occ.push_back(n);
  }
  return occ;
}

// ---------------------------------------------------------------------------
// Audits
// ---------------------------------------------------------------------------

InnerProductAudit verify_inner_product_bounds(const Symbol& piece,
                                              const Curve& curve, int order,
                                              double rho, int samples,
                                              double spread_budget) {
  InnerProductAudit audit;
  audit.n = piece.meta.shell_n;
  audit.nu = piece.meta.shell_nu;
  audit.lambda = piece.meta.lambda;
  audit.rho = rho;
  const auto pts = sample_support(piece, samples, 104729);
  audit.accepted = static_cast<int>(pts.size());
  if (pts.empty()) {
    audit.empty = true;
    return audit;
  }
  audit.min_ratio = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    double sum = 0.0;
    for (int i = 1; i < order; ++i)
      sum += std::pow(rho, i - order) * std::abs(curve.eval(i, p.s).dot(p.xi));
    const double ratio = sum / piece.meta.lambda;
    audit.min_ratio = std::min(audit.min_ratio, ratio);
    audit.max_ratio = std::max(audit.max_ratio, ratio);
  }
  if (spread_budget <= 0.0) {
    const double A = std::max(1.0, piece.meta.type_A);
    spread_budget = 4096.0 * A * A;
  }
  audit.pass = audit.min_ratio > 0.0 &&
               audit.max_ratio / audit.min_ratio <= spread_budget;
  return audit;
}

std::string InnerProductAudit::to_json() const {
  return audit_row_json("a^{n,nu}", "localized inner products", n, nu, lambda,
                        min_ratio, max_ratio, pass);
}

GBoundAudit audit_g_bound(const ShellDecomposition& dec, int samples) {
  GBoundAudit audit;
  const auto pts = sample_support(dec.base, samples, 224737);
  audit.accepted = static_cast<int>(pts.size());
  const double b = dec.base.curve.valid() ? dec.base.curve.regularity() : 10.0;
  audit.cap = ((dec.order - 1) * sq(1.0 + 2.0 * b) + 4.0) / sq(dec.eps0);
  for (const auto& p : pts) {
    const auto g = (*dec.distance)(p.xi, p.s);
    if (!g) {
      ++audit.excluded_points;
      continue;
    }
    audit.max_g = std::max(audit.max_g, *g);
  }
  audit.pass = audit.accepted > 0 && audit.excluded_points == 0 &&
               audit.max_g <= audit.cap;
  return audit;
}

std::string GBoundAudit::to_json() const {
  std::ostringstream os;
  os << "{\"max_g\":" << format_double(max_g) << ",\"cap\":" << format_double(cap)
     << ",\"excluded\":" << excluded_points << ",\"accepted\":" << accepted
     << ",\"pass\":" << (pass ? "true" : "false") << "}";
  return os.str();
}

Symbol rescale_symbol(const Symbol& a, const RescalingMap& map) {
  Symbol out;
  out.curve = a.curve;
  out.meta = a.meta;
  out.meta.id = a.meta.id + "~";
  out.meta.lambda = std::pow(map.rho, map.level) * a.meta.lambda;
  auto base = a.eval;
  const Mat tstar = map.inverse_transpose;
  const double s0 = map.s0, rho = map.rho;
  out.eval = [base, tstar, s0, rho](const Vec& xi, double s, double t) {
    return base(tstar * xi, s0 + rho * s, t);
  };
  // Support: push the base sampler through T^T (inverse of T*).
  const Mat t_transpose = map.matrix.transpose();
  if (a.hint.cone_sampler) {
    auto inner = a.hint.cone_sampler;
    out.hint = a.hint;
    out.hint.cone_sampler = [inner, t_transpose, s0,
                             rho](const std::vector<double>& u) {
      auto [xi, s] = inner(u);
      double s_out = std::isnan(s) ? s : (s - s0) / rho;
      return std::make_pair(Vec(t_transpose * xi), s_out);
    };
  } else {
    const double scale = std::pow(map.rho, map.level);
    out.hint = a.hint;
    out.hint.cone_sampler = nullptr;
    out.hint.xi_lo = 0.25 * scale * a.hint.xi_lo;
    out.hint.xi_hi = 4.0 * scale * std::max(a.hint.xi_hi, a.hint.xi_lo);
    out.hint.s_lo = -1.5;
    out.hint.s_hi = 1.5;
  }
  return out;
}

AnnulusAudit audit_rescaled_annulus(const Symbol& rescaled, double rho,
                                    double lambda, int order, int samples) {
  AnnulusAudit audit;
  const double scale = std::pow(rho, order) * lambda;
  const auto pts = sample_support(rescaled, samples, 15485863);
  audit.accepted = static_cast<int>(pts.size());
  if (pts.empty()) return audit;
  audit.c1 = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    const double r = p.xi.norm() / scale;
    audit.c1 = std::min(audit.c1, r);
    audit.c2 = std::max(audit.c2, r);
  }
  audit.pass = audit.c1 > 0.0 && std::isfinite(audit.c2);
  return audit;
}

std::string AnnulusAudit::to_json() const {
  std::ostringstream os;
  os << "{\"c1\":" << format_double(c1) << ",\"c2\":" << format_double(c2)
     << ",\"accepted\":" << accepted << ",\"pass\":" << (pass ? "true" : "false")
     << "}";
  return os.str();
}

std::vector<double> derivative_sups(const Symbol& a, int max_beta, int samples,
                                    std::uint64_t seq_offset) {
  const double h = 1e-5;
  std::vector<double> sups(max_beta, 0.0);
  const auto pts = sample_support(a, samples, seq_offset);
  auto val = [&a](const Vec& xi, double s, double t) {
    return a.eval(xi, s, t).real();
  };
  for (const auto& p : pts) {
    const double m2 = val(p.xi, p.s - 2 * h, p.t), m1 = val(p.xi, p.s - h, p.t);
    const double c0 = val(p.xi, p.s, p.t);
    const double p1 = val(p.xi, p.s + h, p.t), p2 = val(p.xi, p.s + 2 * h, p.t);
    if (max_beta >= 1)
      sups[0] = std::max(sups[0], std::abs((p1 - m1) / (2 * h)));
    if (max_beta >= 2)
      sups[1] = std::max(sups[1], std::abs((p1 - 2 * c0 + m1) / (h * h)));
    if (max_beta >= 3)
      sups[2] = std::max(
          sups[2], std::abs((p2 - 2 * p1 + 2 * m1 - m2) / (2 * h * h * h)));
  }
  return sups;
}

std::string audit_row_json(const std::string& symbol_id,
                           const std::string& lemma, int n, long nu,
                           double lambda, double min_ratio, double max_ratio,
                           bool pass) {
  std::ostringstream os;
  os << "{\"symbol_id\":\"" << symbol_id << "\",\"lemma\":\"" << lemma
     << "\",\"n\":" << n << ",\"nu\":" << nu
     << ",\"lambda\":" << format_double(lambda)
     << ",\"min_ratio\":" << format_double(min_ratio)
     << ",\"max_ratio\":" << format_double(max_ratio)
     << ",\"pass\":" << (pass ? "true" : "false") << "}";
  return os.str();
}

}  // namespace nikodym
