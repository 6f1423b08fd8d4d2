#include "nikodym/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace nikodym {

namespace {

struct Gl8 {
  // 8-node Gauss-Legendre on [-1, 1].
  static constexpr double x[8] = {-0.9602898564975362, -0.7966664774136267,
                                  -0.5255324099163290, -0.1834346424956498,
                                  0.1834346424956498,  0.5255324099163290,
                                  0.7966664774136267,  0.9602898564975362};
  static constexpr double w[8] = {0.1012285362903763, 0.2223810344533745,
                                  0.3137066458778873, 0.3626837833783620,
                                  0.3626837833783620, 0.3137066458778873,
                                  0.2223810344533745, 0.1012285362903763};
};

constexpr double Gl8::x[8];
constexpr double Gl8::w[8];

template <typename F>
auto gl8_panels(F&& f, double a, double b, int panels)
    -> decltype(f(0.0) * 0.0) {
  using R = decltype(f(0.0) * 0.0);
  R acc{};
  const double w = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * w;
    for (int i = 0; i < 8; ++i)
      acc += Gl8::w[i] * f(mid + 0.5 * w * Gl8::x[i]);
  }
  return acc * (0.5 * w);
}

double curve_c1_sup(const Curve& c) {
  double m = 0.0;
  for (int k = 0; k <= 128; ++k)
    m = std::max(m, c.eval(1, -1.0 + 2.0 * k / 128.0).norm());
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Ball intersections
// ---------------------------------------------------------------------------

double ball_intersection_volume(double c, double R, double r, int d) {
  if (c >= R + r) return 0.0;
  if (c <= std::abs(R - r)) {
    const double rr = std::min(R, r);
    return unit_ball_volume(d) * std::pow(rr, d);
  }
  if (d == 2) {
    auto segment = [](double rad, double dist) {
      dist = std::clamp(dist, -rad, rad);
      return rad * rad * std::acos(dist / rad) -
             dist * std::sqrt(std::max(0.0, rad * rad - dist * dist));
    };
    const double x = (c * c - R * R + r * r) / (2.0 * c);
    return segment(r, x) + segment(R, c - x);
  }
  if (d == 3) {
    const double num = sq(R + r - c) *
                       (c * c + 2.0 * c * r - 3.0 * r * r + 2.0 * c * R +
                        6.0 * r * R - 3.0 * R * R);
    return kPi * num / (12.0 * c);
  }
  // Slab quadrature: concentric (d-1)-ball slices along the center axis.
  const double lo = std::max(-R, c - r);
  const double hi = std::min(R, c + r);
  const double wdm1 = unit_ball_volume(d - 1);
  auto slice = [&](double x) {
    const double s2 = std::min(R * R - x * x, r * r - sq(x - c));
    return s2 > 0 ? wdm1 * std::pow(s2, 0.5 * (d - 1)) : 0.0;
  };
  return gl8_panels(slice, lo, hi, 24);
}

// ---------------------------------------------------------------------------
// Direct averaging
// ---------------------------------------------------------------------------

namespace {

double averaging_direct_impl(const Curve& curve, const Mat* frame,
                             const Vec& half_widths, double delta_iso,
                             const std::function<double(const Vec&, double)>& g,
                             const Vec& x, double s,
                             const DirectQuadOptions& opt) {
  if (opt.nodes_per_delta < 8)
    throw ConfigurationError(
        "averaging_direct: resolution contract needs >= 8 nodes per delta");
  const int d = curve.dim();
  const bool iso = frame == nullptr;
  const double width = iso ? delta_iso : half_widths.maxCoeff();

  int t_nodes = opt.t_nodes;
  if (t_nodes == 0)
    t_nodes = std::min(20000, std::max(128, static_cast<int>(std::ceil(
                                                16.0 / width))));
  const int m = std::max(opt.cross_nodes, 2 * opt.nodes_per_delta);

  const Vec gamma_s = curve.eval(0, s);
  std::vector<Vec> offsets;
  std::vector<double> cell(m);
  for (int i = 0; i < m; ++i) cell[i] = -1.0 + (i + 0.5) * 2.0 / m;

  // Cross-section nodes: midpoint lattice over the box, restricted to the
  // ball for isotropic tubes. Normalization is discrete, so g == 1 -> 1.
  std::vector<int> idx(d, 0);
  for (;;) {
    Vec u(d);
    for (int k = 0; k < d; ++k) u[k] = cell[idx[k]];
    if (iso) {
      if (u.norm() <= 1.0) offsets.push_back(delta_iso * u);
    } else {
      Vec y = Vec::Zero(d);
      for (int k = 0; k < d; ++k) y += half_widths[k] * u[k] * frame->col(k);
      offsets.push_back(y);
    }
    int k = 0;
    while (k < d && ++idx[k] == m) idx[k++] = 0;
    if (k == d) break;
  }
  if (offsets.empty())
    throw ConfigurationError("averaging_direct: empty cross-section");

  double acc = 0.0;
  for (int j = 0; j < t_nodes; ++j) {
    const double t = -1.0 + (j + 0.5) * 2.0 / t_nodes;
    const Vec base = x - t * gamma_s;
    for (const Vec& off : offsets) acc += g(base - off, t);
  }
  return acc / (static_cast<double>(t_nodes) *
                static_cast<double>(offsets.size()));
}

}  // namespace

double averaging_direct(const Curve& curve, double delta,
                        const std::function<double(const Vec&, double)>& g,
                        const Vec& x, double s, const DirectQuadOptions& opt) {
  if (delta <= 0.0) throw InvalidInputError("averaging_direct: delta > 0");
  return averaging_direct_impl(curve, nullptr, Vec(), delta, g, x, s, opt);
}

double averaging_direct(const Curve& curve, const Vec& r,
                        const std::function<double(const Vec&, double)>& g,
                        const Vec& x, double s, const DirectQuadOptions& opt) {
  const Mat frame = frenet_frame(curve, s);
  return averaging_direct_impl(curve, &frame, r, 0.0, g, x, s, opt);
}

// ---------------------------------------------------------------------------
// MaximalEvaluator
// ---------------------------------------------------------------------------

MaximalEvaluator::MaximalEvaluator(Curve curve, double delta, int s_grid_points,
                                   bool parabolic_refine)
    : curve_(std::move(curve)),
      delta_(delta),
      s_points_(s_grid_points),
      refine_(parabolic_refine) {
  if (delta <= 0.0) throw InvalidInputError("MaximalEvaluator: delta > 0");
  const double step = 2.0 / (s_grid_points - 1);
  if (step > delta / 2.0 + 1e-15)
    throw ConfigurationError(
        "MaximalEvaluator: s-grid step exceeds delta/2 resolution contract");
}

void MaximalEvaluator::set_witness(const BallWitness& w) {
  ball_ = w;
  tube_.reset();
}

void MaximalEvaluator::set_witness(const TubeWitness& w) {
  tube_ = w;
  ball_.reset();
}

// Average of the indicator against the tube at (x, s): per t-slice the
// overlap of two balls whose center distance is |p + t q|.
double MaximalEvaluator::lens_average(const Vec& p, const Vec& q,
                                      double r_big) const {
  const int d = curve_.dim();
  const double reach = delta_ + r_big;
  // |p + t q|^2 <= reach^2 determines the active t-window.
  const double qq = q.squaredNorm();
  double t_lo = -1.0, t_hi = 1.0;
  std::vector<double> cuts;
  if (qq > 1e-30) {
    const double pq = p.dot(q);
    const double disc = pq * pq - qq * (p.squaredNorm() - reach * reach);
    if (disc <= 0.0) return 0.0;
    const double sd = std::sqrt(disc);
    t_lo = std::max(-1.0, (-pq - sd) / qq);
    t_hi = std::min(1.0, (-pq + sd) / qq);
    if (t_lo >= t_hi) return 0.0;
    // Kinks where the small ball becomes fully contained.
    const double inner = std::abs(r_big - delta_);
    const double disc2 = pq * pq - qq * (p.squaredNorm() - inner * inner);
    if (disc2 > 0.0) {
      const double sd2 = std::sqrt(disc2);
      for (double root : {(-pq - sd2) / qq, (-pq + sd2) / qq})
        if (root > t_lo && root < t_hi) cuts.push_back(root);
    }
  } else if (p.norm() > reach) {
    return 0.0;
  }
  cuts.push_back(t_lo);
  cuts.push_back(t_hi);
  std::sort(cuts.begin(), cuts.end());

  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    acc += gl8_panels(
        [&](double t) {
          return ball_intersection_volume((p + t * q).norm(), r_big, delta_, d);
        },
        cuts[i], cuts[i + 1], 4);
  }
  const double tube_vol = 2.0 * unit_ball_volume(d) * std::pow(delta_, d);
  return acc / tube_vol;
}

double MaximalEvaluator::average(const Vec& x, double s) const {
  const Vec gamma_s = curve_.eval(0, s);
  if (ball_) {
    // centers: tube slice at t gamma(s); data ball at x - center.
    return lens_average(x - ball_->center, -gamma_s, ball_->radius);
  }
  if (tube_) {
    const Vec gamma_r = curve_.eval(0, tube_->r_param);
    const Vec q = tube_->reflected ? Vec(gamma_s - gamma_r)
                                   : Vec(gamma_s + gamma_r);
    return lens_average(tube_->shift - x, q, tube_->radius);
  }
  throw ConfigurationError("MaximalEvaluator: no witness set");
}

double MaximalEvaluator::maximal(const Vec& x) const {
  double best = 0.0;
  int best_k = -1;
  const double step = 2.0 / (s_points_ - 1);
  for (int k = 0; k < s_points_; ++k) {
    const double v = average(x, -1.0 + k * step);
    if (v > best) {
      best = v;
      best_k = k;
    }
  }
  if (refine_ && best_k > 0 && best_k < s_points_ - 1) {
    const double v0 = average(x, -1.0 + (best_k - 1) * step);
    const double v2 = average(x, -1.0 + (best_k + 1) * step);
    const double denom = v0 - 2.0 * best + v2;
    if (denom < 0.0) {
      double off = 0.5 * (v0 - v2) / denom;
      off = std::clamp(off, -1.0, 1.0);
      const double sref = -1.0 + (best_k + off) * step;
      best = std::max(best, average(x, std::clamp(sref, -1.0, 1.0)));
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// FIO backend
// ---------------------------------------------------------------------------

namespace {

// Out(k, s_i) = sum_j w_t e^{-i t_j <gamma(s_i), xi_k>} a(xi_k, s_i, t_j) G(k, t_j)
void fio_slice(const Symbol& a, const Curve& curve, const SpectralField& gh,
               double s, cplx* out) {
  const GridSpec& grid = gh.grid;
  const std::int64_t sp = grid.spatial_points();
  const int nt = gh.dom.n;
  const double wt = gh.dom.step();
  const Vec gamma_s = curve.valid() ? curve.eval(0, s) : Vec::Zero(grid.d);
  const bool sep = a.separable();

  for (std::int64_t k = 0; k < sp; ++k) {
    const Vec xi = xi_at(grid, k);
    double xi_val = 1.0;
    if (sep) {
      xi_val = a.xi_part(xi);
      if (xi_val == 0.0) {
        out[k] = cplx(0, 0);
        continue;
      }
    }
    const double phase_rate = gamma_s.dot(xi);
    const double t0 = gh.dom.point(0);
    const cplx rot = std::exp(cplx(0.0, -phase_rate * wt));
    cplx phase = std::exp(cplx(0.0, -phase_rate * t0));
    cplx acc(0, 0);
    for (int j = 0; j < nt; ++j) {
      const double t = gh.dom.point(j);
      const cplx aval = sep ? cplx(xi_val * a.st_part(s, t), 0.0)
                            : a.eval(xi, s, t);
      acc += phase * aval * gh.at(j, k);
      phase *= rot;
    }
    out[k] = acc * wt;
  }
}

}  // namespace

Field averaging_fio(const Symbol& a, const Curve& curve, const Field& g,
                    int ns, const ParallelContext& ctx) {
  if (g.axis != Axis::t)
    throw ConfigurationError("averaging_fio: input must be a t-axis field");
  const SpectralField gh = partial_ft_x(g);
  SpectralField outc;
  outc.grid = g.grid;
  outc.axis = Axis::s;
  outc.dom = padded_s_domain(ns);
  outc.values.assign(static_cast<std::size_t>(ns) * g.spatial(), cplx(0, 0));
  parallel_for(ctx, ns, [&](std::int64_t i) {
    fio_slice(a, curve, gh, outc.dom.point(static_cast<int>(i)),
              outc.values.data() + i * g.spatial());
  });
  return inverse_ft_x(outc);
}

Field fractional_fio(const Symbol& a, const Curve& curve, const Field& g,
                     int ns, const ParallelContext& ctx) {
  return fractional_s_derivative(averaging_fio(a, curve, g, ns, ctx), 0.5);
}

std::vector<double> nikodym_maximal_spectral(const Field& a_g) {
  if (a_g.axis != Axis::s)
    throw ConfigurationError("nikodym_maximal_spectral: need an s-axis field");
  return max_over_axis(a_g, -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// FioCoefficientOperator
// ---------------------------------------------------------------------------

FioCoefficientOperator::FioCoefficientOperator(Symbol a, Curve curve,
                                               GridSpec grid, int nt, int ns,
                                               bool fractional,
                                               ParallelContext ctx)
    : a_(std::move(a)),
      curve_(std::move(curve)),
      grid_(grid),
      nt_(nt),
      ns_(ns),
      fractional_(fractional),
      ctx_(ctx) {
  grid_.validate();
  const std::int64_t sp = grid_.spatial_points();
  xi_cache_.resize(static_cast<std::size_t>(sp) * grid_.d);
  for (std::int64_t k = 0; k < sp; ++k) {
    const Vec xi = xi_at(grid_, k);
    for (int ax = 0; ax < grid_.d; ++ax) xi_cache_[k * grid_.d + ax] = xi[ax];
  }
  frac_mult_.resize(ns_);
  for (int j = 0; j < ns_; ++j) {
    int k = j;
    if (k >= ns_ / 2) k -= ns_;
    const double sigma = 2.0 * kPi / 4.0 * k;
    frac_mult_[j] = std::sqrt(1.0 + std::abs(sigma));
  }
}

std::vector<cplx> FioCoefficientOperator::forward(
    const std::vector<cplx>& v_t) const {
  const std::int64_t sp = grid_.spatial_points();
  if (static_cast<std::int64_t>(v_t.size()) != sp * nt_)
    throw InvalidInputError("forward: coefficient size mismatch");
  std::vector<cplx> w(static_cast<std::size_t>(sp) * ns_, cplx(0, 0));
  const AxisDomain sdom = padded_s_domain(ns_);
  const AxisDomain tdom = t_domain(nt_);
  const double wt = tdom.step();
  const bool sep = a_.separable();

  parallel_for(ctx_, ns_, [&](std::int64_t i) {
    const double s = sdom.point(static_cast<int>(i));
    const Vec gamma_s = curve_.eval(0, s);
    Vec xi(grid_.d);
    for (std::int64_t k = 0; k < sp; ++k) {
      for (int ax = 0; ax < grid_.d; ++ax) xi[ax] = xi_cache_[k * grid_.d + ax];
      double xi_val = 1.0;
      if (sep) {
        xi_val = a_.xi_part(xi);
        if (xi_val == 0.0) continue;
      }
      const double rate = gamma_s.dot(xi);
      const cplx rot = std::exp(cplx(0.0, -rate * wt));
      cplx phase = std::exp(cplx(0.0, -rate * tdom.point(0)));
      cplx acc(0, 0);
      for (int j = 0; j < nt_; ++j) {
        const cplx aval = sep ? cplx(xi_val * a_.st_part(s, tdom.point(j)), 0.0)
                              : a_.eval(xi, s, tdom.point(j));
        acc += phase * aval * v_t[j * sp + k];
        phase *= rot;
      }
      w[i * sp + k] = acc * wt;
    }
  });
  if (fractional_) apply_fractional(w, false);
  return w;
}

std::vector<cplx> FioCoefficientOperator::adjoint(
    const std::vector<cplx>& w_s) const {
  const std::int64_t sp = grid_.spatial_points();
  if (static_cast<std::int64_t>(w_s.size()) != sp * ns_)
    throw InvalidInputError("adjoint: coefficient size mismatch");
  std::vector<cplx> w = w_s;
  if (fractional_) apply_fractional(w, false);
  std::vector<cplx> v(static_cast<std::size_t>(sp) * nt_, cplx(0, 0));
  const AxisDomain sdom = padded_s_domain(ns_);
  const AxisDomain tdom = t_domain(nt_);
  const double ws = sdom.step();
  const double wt = tdom.step();
  const bool sep = a_.separable();

  std::vector<Vec> gammas(ns_);
  for (int i = 0; i < ns_; ++i) gammas[i] = curve_.eval(0, sdom.point(i));

  const int chunks = std::max(1, ctx_.workers * 4);
  const std::int64_t chunk = (sp + chunks - 1) / chunks;
  parallel_for(ctx_, chunks, [&](std::int64_t c) {
    const std::int64_t k_lo = c * chunk;
    const std::int64_t k_hi = std::min(sp, k_lo + chunk);
    Vec xi(grid_.d);
    std::vector<cplx> acc(nt_);
    for (std::int64_t k = k_lo; k < k_hi; ++k) {
      for (int ax = 0; ax < grid_.d; ++ax) xi[ax] = xi_cache_[k * grid_.d + ax];
      double xi_val = 1.0;
      if (sep) {
        xi_val = a_.xi_part(xi);
        if (xi_val == 0.0) continue;
      }
      std::fill(acc.begin(), acc.end(), cplx(0, 0));
      for (int i = 0; i < ns_; ++i) {
        const cplx wk = w[static_cast<std::int64_t>(i) * sp + k];
        if (wk == cplx(0, 0)) continue;
        const double s = sdom.point(i);
        const double rate = gammas[i].dot(xi);
        const cplx rot = std::exp(cplx(0.0, rate * wt));  // conjugated phase
        cplx phase = std::exp(cplx(0.0, rate * tdom.point(0)));
        for (int j = 0; j < nt_; ++j) {
          const cplx aval = sep ? cplx(xi_val * a_.st_part(s, tdom.point(j)), 0.0)
                                : a_.eval(xi, s, tdom.point(j));
          acc[j] += phase * std::conj(aval) * wk;
          phase *= rot;
        }
      }
      for (int j = 0; j < nt_; ++j)
        v[static_cast<std::int64_t>(j) * sp + k] = acc[j] * ws;
    }
  });
  return v;
}

void FioCoefficientOperator::apply_fractional(std::vector<cplx>& w,
                                              bool square) const {
  const std::int64_t sp = grid_.spatial_points();
  std::vector<cplx> line(ns_);
  std::vector<double> m(ns_);
  for (int j = 0; j < ns_; ++j)
    m[j] = square ? frac_mult_[j] * frac_mult_[j] : frac_mult_[j];
  // DFT along the strided s-axis per spatial point.
  for (std::int64_t k = 0; k < sp; ++k) {
    for (int j = 0; j < ns_; ++j) line[j] = w[static_cast<std::int64_t>(j) * sp + k];
    fft_1d(line.data(), ns_, true);
    for (int j = 0; j < ns_; ++j) line[j] *= m[j] / static_cast<double>(ns_);
    fft_1d(line.data(), ns_, false);
    for (int j = 0; j < ns_; ++j) w[static_cast<std::int64_t>(j) * sp + k] = line[j];
  }
}

double FioCoefficientOperator::norm_t(const std::vector<cplx>& v) const {
  double acc = 0.0;
  for (const cplx& z : v) acc += std::norm(z);
  return std::sqrt(acc * std::pow(2.0 * grid_.X, -grid_.d) * (2.0 / nt_));
}

double FioCoefficientOperator::norm_s(const std::vector<cplx>& w) const {
  double acc = 0.0;
  for (const cplx& z : w) acc += std::norm(z);
  return std::sqrt(acc * std::pow(2.0 * grid_.X, -grid_.d) * (4.0 / ns_));
}

FioCoefficientOperator::PowerIterationResult
FioCoefficientOperator::power_iteration(int iterations,
                                        std::uint64_t seed) const {
  const std::int64_t n = t_size();
  std::vector<cplx> v(n);
  Rng rng = rng_stream(seed, 17);
  for (auto& z : v) z = cplx(rng.normal(), rng.normal());

  PowerIterationResult res;
  for (int it = 0; it < iterations; ++it) {
    const double nv = norm_t(v);
    if (nv == 0.0) break;
    for (auto& z : v) z /= nv;
    const auto w = forward(v);
    res.rayleigh.push_back(norm_s(w) / norm_t(v));
    v = adjoint(w);
  }
  res.witness = v;
  res.value = res.rayleigh.empty() ? 0.0 : res.rayleigh.back();
  return res;
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

cplx kernel_K(const Symbol& a, const Curve& curve, const Vec& xi,
              double t_prime, double t, const KernelOptions& opt) {
  const double c1 = opt.curve_c1_sup > 0 ? opt.curve_c1_sup : curve_c1_sup(curve);
  double s_lo = std::max(-1.0, a.hint.s_lo);
  double s_hi = std::min(1.0, a.hint.s_hi);
  if (s_lo >= s_hi) return cplx(0, 0);
  const double len = s_hi - s_lo;
  const double osc = std::abs(t - t_prime) * c1 * xi.norm() * len / (2.0 * kPi);
  const int panels_osc = static_cast<int>(std::ceil(2.0 * osc));
  const int panels_sym = static_cast<int>(std::ceil(len / opt.s_feature_scale));
  const int panels = std::clamp(std::max(panels_osc, panels_sym), 8, 100000);
  const double dt = t - t_prime;
  return gl8_panels(
      [&](double s) -> cplx {
        const cplx av = a.eval(xi, s, t_prime) * std::conj(a.eval(xi, s, t));
        if (av == cplx(0, 0)) return av;
        const double phase = dt * curve.eval(0, s).dot(xi);
        return std::exp(cplx(0.0, phase)) * av;
      },
      s_lo, s_hi, panels);
}

Symbol d_s_symbol(const Symbol& a, const Curve& curve) {
  Symbol out = a;
  out.meta.id = "d_s[" + a.meta.id + "]";
  out.xi_part = nullptr;
  out.st_part = nullptr;
  auto base = a.eval;
  const double h = 1e-5;
  out.eval = [base, curve, h](const Vec& xi, double s, double t) {
    const cplx val = base(xi, s, t);
    const cplx ds = (base(xi, s + h, t) - base(xi, s - h, t)) / (2.0 * h);
    return t * curve.eval(1, s).dot(xi) * val + ds;
  };
  return out;
}

SchurReport schur_bound(const Symbol& a, const Curve& curve, int iota,
                        int xi_samples, int tprime_samples, double Lambda,
                        const KernelOptions& opt, const ParallelContext& ctx) {
  if (iota != 0 && iota != 1)
    throw InvalidInputError("schur_bound: iota must be 0 or 1");
  const Symbol sym = iota == 0 ? a : d_s_symbol(a, curve);
  KernelOptions kopt = opt;
  if (kopt.curve_c1_sup == 0.0) kopt.curve_c1_sup = curve_c1_sup(curve);

  const auto pts = sample_support(a, xi_samples, 33391);
  SchurReport rep;
  rep.iota = iota;
  rep.lambda = a.meta.lambda;
  rep.Lambda = Lambda;
  rep.xi_samples = static_cast<int>(pts.size());
  rep.tprime_samples = tprime_samples;
  if (pts.empty()) return rep;

  struct Task {
    Vec xi;
    double tp;
  };
  std::vector<Task> tasks;
  for (const auto& p : pts)
    for (int i = 0; i < tprime_samples; ++i)
      tasks.push_back(Task{p.xi, -1.0 + (i + 0.5) * 2.0 / tprime_samples});

  std::vector<double> rows(tasks.size(), 0.0);
  parallel_for(ctx, static_cast<std::int64_t>(tasks.size()), [&](std::int64_t ti) {
    const auto& task = tasks[ti];
    // Dyadic shells around t' resolve the kernel concentration scale 1/Lambda.
    const double w0 = 0.25 / std::max(4.0, Lambda);
    std::vector<double> cuts{task.tp};
    for (double w = w0; w < 2.5; w *= 2.0) {
      cuts.push_back(task.tp - w);
      cuts.push_back(task.tp + w);
    }
    cuts.push_back(-1.0);
    cuts.push_back(1.0);
    std::sort(cuts.begin(), cuts.end());
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double lo = std::max(-1.0, cuts[i]);
      const double hi = std::min(1.0, cuts[i + 1]);
      if (lo >= hi) continue;
      acc += gl8_panels(
          [&](double t) {
            return std::abs(kernel_K(sym, curve, task.xi, task.tp, t, kopt));
          },
          lo, hi, 1);
    }
    rows[ti] = acc;
  });
  rep.sup_row_integral = *std::max_element(rows.begin(), rows.end());
  rep.constant = rep.sup_row_integral / std::pow(Lambda, 2.0 * iota - 1.0);
  return rep;
}

std::string SchurReport::to_csv_row() const {
  std::ostringstream os;
  os << format_double(lambda) << "," << iota << "," << format_double(Lambda)
     << "," << format_double(sup_row_integral) << ","
     << format_double(constant);
  return os.str();
}

// ---------------------------------------------------------------------------
// b_delta
// ---------------------------------------------------------------------------

namespace {

double chi_tilde_cut(double sigma, double c_over_delta) {
  const double a = std::abs(sigma);
  if (a <= c_over_delta) return 1.0;
  if (a >= 2.0 * c_over_delta) return 0.0;
  return smoothstep((2.0 * c_over_delta - a) / c_over_delta);
}

}  // namespace

cplx b_delta_eval(const Symbol& a_delta, const Curve& curve, const Vec& xi,
                  double sigma, double t, double c_cut, double delta,
                  const KernelOptions& opt) {
  const double cd = c_cut / delta;
  const double chi3 =
      (1.0 + std::abs(sigma)) * std::sqrt(1.0 - chi_tilde_cut(sigma, cd));
  if (chi3 == 0.0) return cplx(0, 0);
  const double c1 = opt.curve_c1_sup > 0 ? opt.curve_c1_sup : curve_c1_sup(curve);
  const double osc =
      (std::abs(sigma) + std::abs(t) * c1 * xi.norm()) * 2.0 / (2.0 * kPi);
  const int panels = std::clamp(static_cast<int>(std::ceil(2.0 * osc)) + 8, 16,
                                400000);
  const cplx integral = gl8_panels(
      [&](double s) -> cplx {
        const cplx av = a_delta.eval(xi, s, t);
        if (av == cplx(0, 0)) return av;
        const double phase = -(sigma * s + t * curve.eval(0, s).dot(xi));
        return std::exp(cplx(0.0, phase)) * av;
      },
      -1.0, 1.0, panels);
  return chi3 * integral;
}

DecayFit b_delta_decay_fit(const Symbol& a_delta, const Curve& curve,
                           const Vec& xi, double t, double c_cut, double delta,
                           double sigma_lo, double sigma_hi, int points) {
  std::vector<double> xs, ys;
  double peak = 0.0;
  std::vector<std::pair<double, double>> raw;
  for (int i = 0; i < points; ++i) {
    const double sigma =
        sigma_lo * std::pow(sigma_hi / sigma_lo, static_cast<double>(i) /
                                                     (points - 1));
    const double v =
        std::abs(b_delta_eval(a_delta, curve, xi, sigma, t, c_cut, delta));
    raw.emplace_back(sigma, v);
    peak = std::max(peak, v);
  }
  for (const auto& [sigma, v] : raw) {
    if (v < 1e-13 * peak || v == 0.0) continue;
    xs.push_back(std::log1p(sigma));
    ys.push_back(std::log(v));
  }
  DecayFit out;
  out.points_used = static_cast<int>(xs.size());
  if (xs.size() >= 3) {
    out.fit = fit_line(xs, ys);
    out.exponent = -out.fit.slope;
  }
  return out;
}

}  // namespace nikodym
