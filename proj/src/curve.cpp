#include "nikodym/curve.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

namespace nikodym {

class CurveImpl {
 public:
  CurveImpl(std::string name, int d, double regularity)
      : name_(std::move(name)), d_(d), regularity_(regularity) {
    if (d < 1) throw InvalidInputError("curve dimension must be >= 1");
    if (regularity <= 1.0)
      throw InvalidInputError("curve regularity budget must exceed 1");
  }
  virtual ~CurveImpl() = default;

  virtual Vec derivative(int order, double s) const = 0;

  const std::string& name() const { return name_; }
  int dim() const { return d_; }
  int max_order() const { return 2 * d_; }
  double regularity() const { return regularity_; }

  void check_order(int order) const {
    if (order < 0 || order > max_order())
      throw EvaluationError("derivative order " + std::to_string(order) +
                            " outside 0.." + std::to_string(max_order()) +
                            " for curve " + name_);
  }

 private:
  std::string name_;
  int d_;
  double regularity_;
};

Vec Curve::eval(int order, double s) const {
  if (!impl_) throw EvaluationError("empty curve handle");
  impl_->check_order(order);
  return impl_->derivative(order, s);
}

int Curve::dim() const {
  if (!impl_) throw EvaluationError("empty curve handle");
  return impl_->dim();
}

int Curve::max_order() const { return 2 * dim(); }

double Curve::regularity() const {
  if (!impl_) throw EvaluationError("empty curve handle");
  return impl_->regularity();
}

const std::string& Curve::name() const {
  if (!impl_) throw EvaluationError("empty curve handle");
  return impl_->name();
}

namespace {

double inv_factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return 1.0 / f;
}

class MomentCurve final : public CurveImpl {
 public:
  MomentCurve(int d, double reg) : CurveImpl("moment", d, reg) {}
  Vec derivative(int order, double s) const override {
    const int d = dim();
    Vec v = Vec::Zero(d);
    // gamma_j(s) = s^j / j!  (1-based j); d^i/ds^i -> s^(j-i)/(j-i)!.
    for (int j = order > 0 ? order : 1; j <= d; ++j) {
      v[j - 1] = std::pow(s, j - order) * inv_factorial(j - order);
    }
    if (order == 0) {
      for (int j = 1; j <= d; ++j) v[j - 1] = std::pow(s, j) * inv_factorial(j);
    }
    return v;
  }
};

class Circle2d final : public CurveImpl {
 public:
  explicit Circle2d(double reg) : CurveImpl("circle2d", 2, reg) {}
  Vec derivative(int order, double s) const override {
    Vec v(2);
    const double ph = s + 0.5 * kPi * order;
    v[0] = std::cos(ph);
    v[1] = std::sin(ph);
    return v;
  }
};

class PerturbedMoment final : public CurveImpl {
 public:
  PerturbedMoment(int d, double eps, double reg)
      : CurveImpl("perturbed-moment:eps=" + format_double(eps), d, reg),
        base_(d, reg),
        eps_(eps) {}
  Vec derivative(int order, double s) const override {
    Vec v = base_.derivative(order, s);
    // Perturbation alternates sin, cos per coordinate.
    for (int j = 0; j < dim(); ++j) {
      const double ph = s + 0.5 * kPi * order;
      v[j] += eps_ * (j % 2 == 0 ? std::sin(ph) : std::cos(ph));
    }
    return v;
  }

 private:
  MomentCurve base_;
  double eps_;
};

class LineCurve final : public CurveImpl {
 public:
  LineCurve(int d, double reg) : CurveImpl("line", d, reg) {}
  Vec derivative(int order, double s) const override {
    Vec v = Vec::Zero(dim());
    if (order == 0) v[0] = s;
    if (order == 1) v[0] = 1.0;
    return v;
  }
};

class FiniteDifferenceCurve final : public CurveImpl {
 public:
  FiniteDifferenceCurve(std::string name, int d, double reg,
                        std::function<Vec(double)> pos)
      : CurveImpl(std::move(name), d, reg), pos_(std::move(pos)) {}
  Vec derivative(int order, double s) const override {
    if (order == 0) return pos_(s);
    const double h = 1e-4 * std::max(1.0, std::abs(s));
    return (derivative(order - 1, s + h) - derivative(order - 1, s - h)) /
           (2.0 * h);
  }

 private:
  std::function<Vec(double)> pos_;
};

class RotatedCurve final : public CurveImpl {
 public:
  RotatedCurve(Curve base, Mat q)
      : CurveImpl(base.name() + "+rotated", base.dim(), base.regularity()),
        base_(std::move(base)),
        q_(std::move(q)) {}
  Vec derivative(int order, double s) const override {
    return q_ * base_.eval(order, s);
  }

 private:
  Curve base_;
  Mat q_;
};

class RescaledCurve final : public CurveImpl {
 public:
  RescaledCurve(Curve base, RescalingMap map)
      : CurveImpl(base.name() + "~[s0=" + format_double(map.s0) +
                      ",rho=" + format_double(map.rho) +
                      ",N=" + std::to_string(map.level) + "]",
                  base.dim(), base.regularity()),
        base_(std::move(base)),
        map_(std::move(map)) {}
  Vec derivative(int order, double s) const override {
    const double arg = map_.s0 + map_.rho * s;
    if (order == 0)
      return map_.inverse * (base_.eval(0, arg) - base_.eval(0, map_.s0));
    return std::pow(map_.rho, order) * (map_.inverse * base_.eval(order, arg));
  }

 private:
  Curve base_;
  RescalingMap map_;
};

}  // namespace

Curve make_moment_curve(int d, double regularity) {
  return Curve(std::make_shared<MomentCurve>(d, regularity));
}

Curve make_circle2d(double regularity) {
  return Curve(std::make_shared<Circle2d>(regularity));
}

Curve make_perturbed_moment(int d, double eps, double regularity) {
  return Curve(std::make_shared<PerturbedMoment>(d, eps, regularity));
}

Curve make_line(int d, double regularity) {
  return Curve(std::make_shared<LineCurve>(d, regularity));
}

Curve make_finite_difference_curve(std::string name, int d, double regularity,
                                   std::function<Vec(double)> position) {
  return Curve(std::make_shared<FiniteDifferenceCurve>(std::move(name), d,
                                                       regularity,
                                                       std::move(position)));
}

Curve rotate_curve(const Curve& c, const Mat& q) {
  if (q.rows() != c.dim() || q.cols() != c.dim())
    throw InvalidInputError("rotate_curve: matrix dimension mismatch");
  return Curve(std::make_shared<RotatedCurve>(c, q));
}

Curve curve_from_name(const std::string& key, int d) {
  if (key == "moment") return make_moment_curve(d);
  if (key == "circle2d") {
    if (d != 2) throw InvalidInputError("circle2d requires d = 2");
    return make_circle2d();
  }
  if (key == "line") return make_line(d);
  const std::string prefix = "perturbed-moment:eps=";
  if (key.rfind(prefix, 0) == 0) {
    const double eps = std::stod(key.substr(prefix.size()));
    return make_perturbed_moment(d, eps);
  }
  throw InvalidInputError("unknown curve '" + key + "'");
}

// ---------------------------------------------------------------------------

double generalized_determinant(const Curve& c, double s, int order) {
  const int d = c.dim();
  if (order < 1 || order > d)
    throw InvalidInputError("generalized_determinant: need 1 <= L <= d");
  Mat m(d, order);
  for (int i = 1; i <= order; ++i) m.col(i - 1) = c.eval(i, s);
  const Mat gram = m.transpose() * m;
  return std::sqrt(std::max(0.0, gram.determinant()));
}

NondegeneracyReport check_class_membership(const Curve& c, double bound,
                                           int order, int s_samples) {
  if (bound <= 1.0) throw InvalidInputError("membership bound must exceed 1");
  if (s_samples < 2) throw InvalidInputError("need at least 2 s-samples");
  NondegeneracyReport rep;
  rep.order = order;
  rep.bound = bound;
  rep.samples = s_samples;
  rep.min_gen_det = std::numeric_limits<double>::infinity();
  for (int k = 0; k < s_samples; ++k) {
    const double s = -1.0 + 2.0 * k / (s_samples - 1);
    const double g = generalized_determinant(c, s, order);
    if (g < rep.min_gen_det) {
      rep.min_gen_det = g;
      rep.argmin_s = s;
    }
    for (int i = 0; i <= c.max_order(); ++i)
      rep.max_cnorm = std::max(rep.max_cnorm, c.eval(i, s).norm());
  }
  rep.passes = rep.min_gen_det >= 1.0 / bound && rep.max_cnorm <= bound;
  return rep;
}

std::string NondegeneracyReport::to_json() const {
  std::ostringstream os;
  os << "{\"order\":" << order << ",\"bound\":" << format_double(bound)
     << ",\"min_gen_det\":" << format_double(min_gen_det)
     << ",\"argmin_s\":" << format_double(argmin_s)
     << ",\"max_cnorm\":" << format_double(max_cnorm)
     << ",\"samples\":" << samples << ",\"passes\":" << (passes ? "true" : "false")
     << ",\"note\":\"" << note << "\"}";
  return os.str();
}

Mat frenet_frame(const Curve& c, double s, double pivot_tol) {
  const int d = c.dim();
  if (generalized_determinant(c, s, d) <= 0.0)
    throw DegeneracyError(d, "frenet_frame: derivative span is degenerate");
  Mat e(d, d);
  for (int k = 0; k < d; ++k) {
    Vec v = c.eval(k + 1, s);
    const double scale = std::max(1.0, v.norm());
    // Modified Gram-Schmidt with one re-orthogonalization pass.
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j < k; ++j) v -= e.col(j).dot(v) * e.col(j);
    const double nrm = v.norm();
    if (nrm < pivot_tol * scale)
      throw DegeneracyError(
          k + 1, "frenet_frame: pivot below tolerance at order " +
                     std::to_string(k + 1));
    e.col(k) = v / nrm;
  }
  return e;
}

// ---------------------------------------------------------------------------

namespace {

double sigma_objective(const Curve& c, const Vec& xi, int level, double s) {
  return c.eval(level - 1, s).dot(xi);
}

double refine_root(const Curve& c, const Vec& xi, int level, double lo,
                   double hi, double flo, double tol) {
  // Bisection, then guarded Newton using the next derivative order.
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = sigma_objective(c, xi, level, mid);
    if (fm == 0.0) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  double s = 0.5 * (lo + hi);
  for (int it = 0; it < 4; ++it) {
    const double f = sigma_objective(c, xi, level, s);
    const double fp = c.eval(level, s).dot(xi);
    if (fp == 0.0) break;
    const double step = f / fp;
    const double cand = s - step;
    if (cand < lo || cand > hi) break;
    s = cand;
  }
  return s;
}

}  // namespace

std::optional<double> solve_sigma(const Curve& c, const Vec& xi, int level,
                                  const SigmaOptions& opt) {
  if (xi.size() != c.dim()) throw InvalidInputError("solve_sigma: xi dimension");
  if (xi.norm() == 0.0) throw InvalidInputError("solve_sigma: xi must be nonzero");
  if (level < 2 || level > c.dim())
    throw InvalidInputError("solve_sigma: need 2 <= N <= d");

  const int n = opt.scan_points;
  std::vector<double> roots;
  double prev_s = -1.0;
  double prev_f = sigma_objective(c, xi, level, prev_s);
  const double zero_tol = 1e-14 * xi.norm();
  if (std::abs(prev_f) <= zero_tol) roots.push_back(prev_s);
  for (int k = 1; k < n; ++k) {
    const double s = -1.0 + 2.0 * k / (n - 1);
    const double f = sigma_objective(c, xi, level, s);
    if (std::abs(f) <= zero_tol) {
      roots.push_back(s);
    } else if (prev_f != 0.0 && (f > 0) != (prev_f > 0)) {
      roots.push_back(refine_root(c, xi, level, prev_s, s, prev_f, opt.tol));
    }
    prev_s = s;
    prev_f = f;
  }
  if (roots.empty()) return std::nullopt;

  double best = roots.front();
  double best_res = std::abs(sigma_objective(c, xi, level, best));
  for (std::size_t i = 1; i < roots.size(); ++i) {
    const double res = std::abs(sigma_objective(c, xi, level, roots[i]));
    if (res < best_res || (res == best_res && roots[i] < best)) {
      best = roots[i];
      best_res = res;
    }
  }
  return best;
}

struct SigmaSolver::Cache {
  mutable std::mutex mu;
  // Keyed by the exact bit pattern of xi.
  mutable std::map<std::string, std::optional<double>> memo;
};

SigmaSolver::SigmaSolver(Curve c, int level, SigmaOptions opt)
    : curve_(std::move(c)), level_(level), opt_(opt),
      cache_(std::make_shared<Cache>()) {}

SigmaSolver::~SigmaSolver() = default;

std::optional<double> SigmaSolver::operator()(const Vec& xi) const {
  std::string key(reinterpret_cast<const char*>(xi.data()),
                  sizeof(double) * xi.size());
  {
    std::lock_guard<std::mutex> lock(cache_->mu);
    auto it = cache_->memo.find(key);
    if (it != cache_->memo.end()) return it->second;
  }
  auto value = solve_sigma(curve_, xi, level_, opt_);
  std::lock_guard<std::mutex> lock(cache_->mu);
  cache_->memo.emplace(std::move(key), value);
  return value;
}

// ---------------------------------------------------------------------------

double operator_norm(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

RescalingMap build_rescaling_map(const Curve& c, double s0, double rho,
                                 int level) {
  const int d = c.dim();
  if (rho <= 0.0 || rho >= 1.0)
    throw InvalidInputError("rescaling: rho must lie in (0,1)");
  if (s0 - rho < -1.0 || s0 + rho > 1.0)
    throw InvalidInputError("rescaling: [s0-rho, s0+rho] must lie inside I");
  if (level < 1 || level > d)
    throw InvalidInputError("rescaling: need 1 <= N <= d");
  if (generalized_determinant(c, s0, level) <= 0.0)
    throw DegeneracyError(level, "rescaling: degenerate derivative span at s0");

  Mat m(d, level);
  for (int i = 1; i <= level; ++i) m.col(i - 1) = c.eval(i, s0);

  Mat p(d, d);
  p.leftCols(level) = m;
  if (level < d) {
    Eigen::HouseholderQR<Mat> qr(m);
    const Mat q = qr.householderQ();
    p.rightCols(d - level) = q.rightCols(d - level);
  }

  Vec scale(d), inv_scale(d);
  for (int i = 0; i < d; ++i) {
    const int power = i < level ? i + 1 : level;
    scale[i] = std::pow(rho, power);
    inv_scale[i] = std::pow(rho, -power);
  }

  const Mat p_inv = p.inverse();
  RescalingMap map;
  map.s0 = s0;
  map.rho = rho;
  map.level = level;
  map.d = d;
  map.matrix = p * scale.asDiagonal() * p_inv;
  map.inverse = p * inv_scale.asDiagonal() * p_inv;
  map.inverse_transpose = map.inverse.transpose();

  // Defining identities, verified to 1e-8 relative.
  for (int i = 1; i <= level; ++i) {
    const Vec g = c.eval(i, s0);
    const double err = (map.matrix * g - std::pow(rho, i) * g).norm();
    if (err > 1e-8 * std::max(1.0, g.norm()))
      throw EvaluationError("rescaling map failed eigenvector identity");
  }
  return map;
}

Curve rescale_curve(const Curve& c, const RescalingMap& map) {
  if (map.d != c.dim()) throw InvalidInputError("rescale_curve: dimension");
  return Curve(std::make_shared<RescaledCurve>(c, map));
}

}  // namespace nikodym
