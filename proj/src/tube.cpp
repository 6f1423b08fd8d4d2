#include "nikodym/tube.hpp"

#include <cmath>
#include <sstream>

namespace nikodym {

namespace {

Vec default_shift(int d1, const Vec& shift) {
  if (shift.size() == 0) return Vec::Zero(d1);
  if (shift.size() != d1)
    throw InvalidInputError("tube center_shift must live in R^(d+1)");
  return shift;
}

}  // namespace

Tube make_iso_tube(Curve curve, double s, double delta, const Vec& center_shift) {
  if (delta <= 0.0) throw InvalidInputError("tube radius must be positive");
  Tube t;
  t.kind = Tube::Kind::Isotropic;
  t.s = s;
  t.delta = delta;
  t.center_shift = default_shift(curve.dim() + 1, center_shift);
  t.curve = std::move(curve);
  return t;
}

Tube make_aniso_tube(Curve curve, double s, const Vec& r, const Vec& center_shift) {
  if (r.size() != curve.dim())
    throw InvalidInputError("anisotropic tube needs d half-widths");
  for (int j = 0; j < r.size(); ++j)
    if (r[j] <= 0.0) throw InvalidInputError("tube half-widths must be positive");
  Tube t;
  t.kind = Tube::Kind::Anisotropic;
  t.s = s;
  t.r = r;
  t.center_shift = default_shift(curve.dim() + 1, center_shift);
  t.curve = std::move(curve);
  return t;
}

bool Tube::contains(const Vec& point) const {
  const int d = dim();
  if (point.size() != d + 1) throw InvalidInputError("tube point must be (y, t)");
  const Vec q = point - center_shift;
  const double t = q[d];
  if (t < -1.0 || t > 1.0) return false;
  const Vec offset = q.head(d) - t * curve.eval(0, s);
  if (kind == Kind::Isotropic) return offset.norm() <= delta;
  const Mat frame = frenet_frame(curve, s);
  for (int j = 0; j < d; ++j)
    if (std::abs(frame.col(j).dot(offset)) > r[j]) return false;
  return true;
}

double Tube::volume() const {
  const int d = dim();
  if (kind == Kind::Isotropic)
    return 2.0 * unit_ball_volume(d) * std::pow(delta, d);
  double v = 2.0;
  for (int j = 0; j < d; ++j) v *= 2.0 * r[j];
  return v;
}

std::pair<Vec, Vec> Tube::bounding_box() const {
  const int d = dim();
  const Vec g = curve.eval(0, s);
  Vec dev(d);
  if (kind == Kind::Isotropic) {
    dev.setConstant(delta);
  } else {
    const Mat frame = frenet_frame(curve, s);
    for (int m = 0; m < d; ++m) {
      double acc = 0.0;
      for (int j = 0; j < d; ++j) acc += r[j] * std::abs(frame(m, j));
      dev[m] = acc;
    }
  }
  Vec lo(d + 1), hi(d + 1);
  for (int m = 0; m < d; ++m) {
    lo[m] = -std::abs(g[m]) - dev[m] + center_shift[m];
    hi[m] = std::abs(g[m]) + dev[m] + center_shift[m];
  }
  lo[d] = -1.0 + center_shift[d];
  hi[d] = 1.0 + center_shift[d];
  return {lo, hi};
}

Tube parse_tube_spec(const std::string& spec, Curve curve) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw InvalidInputError("tube spec must look like 'iso:...' or 'aniso:...'");
  const std::string kind = spec.substr(0, colon);
  double s = 0.0;
  double delta = 0.0;
  std::vector<double> rvals;
  std::stringstream body(spec.substr(colon + 1));
  std::string item;
  while (std::getline(body, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      // continuation of the r list
      if (rvals.empty()) throw InvalidInputError("bad tube spec token: " + item);
      rvals.push_back(std::stod(item));
      continue;
    }
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    if (key == "s") s = std::stod(val);
    else if (key == "delta") delta = std::stod(val);
    else if (key == "r") rvals.push_back(std::stod(val));
    else throw InvalidInputError("unknown tube spec key: " + key);
  }
  if (kind == "iso") return make_iso_tube(std::move(curve), s, delta);
  if (kind == "aniso") {
    Vec r(static_cast<int>(rvals.size()));
    for (std::size_t i = 0; i < rvals.size(); ++i) r[static_cast<int>(i)] = rvals[i];
    return make_aniso_tube(std::move(curve), s, r);
  }
  throw InvalidInputError("unknown tube kind: " + kind);
}

// ---------------------------------------------------------------------------

AdmissibilityResult check_admissible(const Vec& r) {
  const int d = static_cast<int>(r.size());
  if (d < 1) throw InvalidInputError("scale vector must be nonempty");
  for (int j = 0; j < d; ++j)
    if (!(r[j] > 0.0 && r[j] < 1.0))
      throw InvalidInputError("scale vector components must lie in (0,1)");

  const double tol = 1e-12;
  std::vector<double> lg(d);
  for (int j = 0; j < d; ++j) lg[j] = std::log(r[j]);

  AdmissibilityResult out;
  for (int j = 0; j + 1 < d; ++j) {
    if (lg[j + 1] > lg[j] + tol) {
      out.first_violation = "monotonicity: r[" + std::to_string(j + 2) +
                            "] > r[" + std::to_string(j + 1) + "]";
      return out;
    }
  }
  if (d >= 2 && lg[0] > 0.5 * lg[1] + tol) {
    out.first_violation = "r[1] > sqrt(r[2])";
    return out;
  }
  for (int i = 1; i <= d; ++i) {
    for (int k = i; k <= d; ++k) {
      for (int j = i; j <= k; ++j) {
        if (i == k) continue;
        const double rhs = (static_cast<double>(k - j) * lg[i - 1] +
                            static_cast<double>(j - i) * lg[k - 1]) /
                           static_cast<double>(k - i);
        if (lg[j - 1] > rhs + tol) {
          out.first_violation = "log-convexity at (i,j,k)=(" +
                                std::to_string(i) + "," + std::to_string(j) +
                                "," + std::to_string(k) + ")";
          return out;
        }
      }
    }
  }
  out.admissible = true;
  return out;
}

// ---------------------------------------------------------------------------

IntersectionEstimate intersection_volume_mc(const Tube& a, const Tube& b,
                                            std::int64_t samples,
                                            std::uint64_t seed) {
  if (samples < 1000)
    throw InvalidInputError("intersection_volume_mc: need >= 1e3 samples");
  const Tube& small = a.volume() <= b.volume() ? a : b;
  const Tube& other = a.volume() <= b.volume() ? b : a;

  const auto [alo, ahi] = a.bounding_box();
  const auto [blo, bhi] = b.bounding_box();
  for (int m = 0; m < alo.size(); ++m)
    if (alo[m] > bhi[m] || blo[m] > ahi[m])
      return IntersectionEstimate{0.0, 0.0, samples, 0};

  const auto [lo, hi] = small.bounding_box();
  double box_vol = 1.0;
  for (int m = 0; m < lo.size(); ++m) box_vol *= hi[m] - lo[m];

  Rng rng = rng_stream(seed, 0);
  const int n_coords = static_cast<int>(lo.size());
  Vec p(n_coords);
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < samples; ++i) {
    for (int m = 0; m < n_coords; ++m) p[m] = rng.uniform(lo[m], hi[m]);
    if (small.contains(p) && other.contains(p)) ++hits;
  }
  const double frac = static_cast<double>(hits) / static_cast<double>(samples);
  IntersectionEstimate est;
  est.samples = samples;
  est.hits = hits;
  est.volume = box_vol * frac;
  est.std_error =
      box_vol * std::sqrt(std::max(0.0, frac * (1.0 - frac) / samples));
  return est;
}

double predicted_intersection_volume(double delta, double gamma_gap, int d) {
  if (delta <= 0.0 || gamma_gap < 0.0)
    throw InvalidInputError("predicted_intersection_volume: bad arguments");
  return std::pow(delta, d + 1) / (delta + gamma_gap);
}

}  // namespace nikodym
