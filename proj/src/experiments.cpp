#include "nikodym/experiments.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nikodym {

namespace {

int next_pow2(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}

double curve_position_sup(const Curve& c) {
  double m = 0.0;
  for (int k = 0; k <= 256; ++k)
    m = std::max(m, c.eval(0, -1.0 + k / 128.0).norm());
  return m;
}

double lp_norm_field(const Field& f, double p) {
  if (std::isinf(p)) return f.max_abs();
  double acc = 0.0;
  for (const cplx& v : f.values) acc += std::pow(std::abs(v), p);
  return std::pow(acc * f.cell_weight(), 1.0 / p);
}

std::string strategy_name(NormStrategy s) {
  switch (s) {
    case NormStrategy::Random: return "random";
    case NormStrategy::Adversarial: return "adversarial";
    case NormStrategy::PowerIteration: return "power-iteration";
  }
  return "?";
}

}  // namespace

// ---------------------------------------------------------------------------
// empirical_norm
// ---------------------------------------------------------------------------

std::string NormEstimate::to_json() const {
  std::ostringstream os;
  os << "{\"op\":\"" << op_id << "\",\"p\":" << format_double(p)
     << ",\"q\":" << format_double(q) << ",\"strategy\":\""
     << strategy_name(strategy) << "\",\"value\":" << format_double(value)
     << ",\"trials\":" << trials << ",\"seed\":" << seed << ",\"witness\":"
     << witness << ",\"witness_hash\":\"" << hash_hex(witness_hash) << "\"}";
  return os.str();
}

namespace {

NormEstimate norm_multiplier(const OperatorSpec& op, double p, double q,
                             NormStrategy strategy, int trials,
                             std::uint64_t seed) {
  NormEstimate est;
  est.op_id = op.id;
  est.p = p;
  est.q = q;
  est.strategy = strategy;
  est.seed = seed;
  est.trials = trials;

  const GridSpec grid = op.grid;
  const auto dom = t_domain(op.nt);
  if (strategy == NormStrategy::PowerIteration) {
    if (p != 2.0 || q != 2.0)
      throw InvalidInputError("power iteration needs p = q = 2");
    // Iterating m(xi) on the spectrum converges to the lattice sup of |m|.
    Field g = random_bandlimited_field(grid, Axis::t, dom, 1e9, seed);
    SpectralField sf = partial_ft_x(g);
    const std::int64_t sp = sf.spatial();
    std::vector<double> m(sp);
    for (std::int64_t k = 0; k < sp; ++k)
      m[k] = std::abs(op.multiplier(xi_at(grid, k)));
    double value = 0.0;
    for (int it = 0; it < 30; ++it) {
      double num = 0.0, den = 0.0;
      for (std::int64_t i = 0; i < sf.slices(); ++i)
        for (std::int64_t k = 0; k < sp; ++k) {
          const double w = std::norm(sf.at(i, k));
          num += m[k] * m[k] * w;
          den += w;
        }
      value = den > 0 ? std::sqrt(num / den) : 0.0;
      est.rayleigh.push_back(value);
      double peak = 0.0;
      for (std::int64_t i = 0; i < sf.slices(); ++i)
        for (std::int64_t k = 0; k < sp; ++k) {
          sf.at(i, k) *= m[k] * m[k];
          peak = std::max(peak, std::abs(sf.at(i, k)));
        }
      if (peak == 0.0) break;
      for (auto& z : sf.values) z /= peak;
    }
    est.value = value;
    est.witness = "{\"kind\":\"power-iteration\",\"iterations\":30}";
    est.witness_hash = fnv1a(est.witness, fnv1a(&seed, sizeof(seed)));
    SpectralField keep = sf;
    auto mult = op.multiplier;
    est.reevaluate = [keep, mult]() {
      double num = 0.0, den = 0.0;
      for (std::int64_t i = 0; i < keep.slices(); ++i)
        for (std::int64_t k = 0; k < keep.spatial(); ++k) {
          const double mm = std::abs(mult(xi_at(keep.grid, k)));
          const double w = std::norm(keep.at(i, k));
          num += mm * mm * w;
          den += w;
        }
      return den > 0 ? std::sqrt(num / den) : 0.0;
    };
    return est;
  }

  double best = 0.0;
  int best_trial = 0;
  for (int trial = 0; trial < trials; ++trial) {
    Field g = random_bandlimited_field(grid, Axis::t, dom, 1e9,
                                       splitmix64(seed) ^ trial);
    const double gn = lp_norm_field(g, p);
    if (gn == 0.0) continue;
    Field mg = apply_multiplier(g, op.multiplier);
    const double ratio = lp_norm_field(mg, q) / gn;
    if (ratio > best) {
      best = ratio;
      best_trial = trial;
    }
  }
  est.value = best;
  est.witness = "{\"kind\":\"random-field\",\"trial\":" +
                std::to_string(best_trial) + "}";
  est.witness_hash = fnv1a(est.witness, seed);
  est.reevaluate = [op, p, q, seed, best_trial]() {
    Field g = random_bandlimited_field(op.grid, Axis::t, t_domain(op.nt), 1e9,
                                       splitmix64(seed) ^ best_trial);
    return lp_norm_field(apply_multiplier(g, op.multiplier), q) /
           lp_norm_field(g, p);
  };
  return est;
}

NormEstimate norm_fio(const OperatorSpec& op, double p, double q,
                      NormStrategy strategy, int trials, std::uint64_t seed,
                      const ParallelContext& ctx) {
  NormEstimate est;
  est.op_id = op.id;
  est.p = p;
  est.q = q;
  est.strategy = strategy;
  est.seed = seed;
  est.trials = trials;
  const bool fractional = op.kind == OperatorSpec::Kind::FractionalFio;

  if (strategy == NormStrategy::PowerIteration) {
    if (p != 2.0 || q != 2.0)
      throw InvalidInputError("power iteration needs p = q = 2");
    FioCoefficientOperator L(op.symbol, op.curve, op.grid, op.nt, op.ns,
                             fractional, ctx);
    auto res = L.power_iteration(30, seed);
    est.value = res.value;
    est.rayleigh = res.rayleigh;
    est.witness = "{\"kind\":\"power-iteration\",\"iterations\":30}";
    est.witness_hash =
        fnv1a(res.witness.data(), res.witness.size() * sizeof(cplx));
    auto witness = std::make_shared<std::vector<cplx>>(std::move(res.witness));
    auto Lp = std::make_shared<FioCoefficientOperator>(
        op.symbol, op.curve, op.grid, op.nt, op.ns, fractional, ctx);
    est.reevaluate = [Lp, witness]() {
      const double nv = Lp->norm_t(*witness);
      if (nv == 0.0) return 0.0;
      return Lp->norm_s(Lp->forward(*witness)) / nv;
    };
    return est;
  }

  // Random band-limited witnesses through the full field pipeline.
  const double band = op.symbol.hint.xi_hi > 0 ? op.symbol.hint.xi_hi : 1e9;
  double best = 0.0;
  int best_trial = 0;
  for (int trial = 0; trial < trials; ++trial) {
    Field g = random_bandlimited_field(op.grid, Axis::t, t_domain(op.nt), band,
                                       splitmix64(seed) ^ trial);
    const double gn = lp_norm_field(g, p);
    if (gn == 0.0) continue;
    Field out = fractional
                    ? fractional_fio(op.symbol, op.curve, g, op.ns, ctx)
                    : averaging_fio(op.symbol, op.curve, g, op.ns, ctx);
    const double ratio = lp_norm_field(out, q) / gn;
    if (ratio > best) {
      best = ratio;
      best_trial = trial;
    }
  }
  est.value = best;
  est.witness = "{\"kind\":\"random-field\",\"trial\":" +
                std::to_string(best_trial) + ",\"band\":" +
                format_double(band) + "}";
  est.witness_hash = fnv1a(est.witness, seed);
  est.reevaluate = [op, p, q, seed, best_trial, band, fractional, ctx]() {
    Field g = random_bandlimited_field(op.grid, Axis::t, t_domain(op.nt), band,
                                       splitmix64(seed) ^ best_trial);
    Field out = fractional
                    ? fractional_fio(op.symbol, op.curve, g, op.ns, ctx)
                    : averaging_fio(op.symbol, op.curve, g, op.ns, ctx);
    return lp_norm_field(out, q) / lp_norm_field(g, p);
  };
  return est;
}

struct MaximalWitnessEval {
  double value = 0.0;   // ||N g||_p / ||g||_p
  std::string descr;
};

MaximalWitnessEval eval_maximal_witness(const Curve& curve, double delta,
                                        double p, bool tube_kind,
                                        double param, std::uint64_t seed,
                                        const ParallelContext& ctx,
                                        std::int64_t max_cells) {
  const int d = curve.dim();
  const int s_points = next_pow2(static_cast<int>(std::ceil(4.0 / delta))) + 1;
  MaximalEvaluator ev(curve, delta, s_points);

  Vec lo(d), hi(d);
  double gnorm_p = 0.0;
  std::string descr;
  if (tube_kind) {
    TubeWitness w;
    w.r_param = param;
    w.radius = 10.0 * delta;
    w.shift = Vec::Zero(d);
    w.reflected = true;
    ev.set_witness(w);
    const Vec gr = curve.eval(0, param);
    for (int m = 0; m < d; ++m) {
      double ext = 0.0;
      for (int k = 0; k <= 128; ++k) {
        const Vec gs = curve.eval(0, -1.0 + k / 64.0);
        ext = std::max(ext, std::abs(gs[m] - gr[m]));
      }
      lo[m] = -(ext + 12.0 * delta);
      hi[m] = ext + 12.0 * delta;
    }
    gnorm_p = std::pow(
        2.0 * unit_ball_volume(d) * std::pow(10.0 * delta, d), 1.0 / p);
    descr = "{\"kind\":\"tube\",\"r\":" + format_double(param) +
            ",\"radius\":" + format_double(10.0 * delta) + "}";
  } else {
    BallWitness w;
    w.center = Vec::Zero(d);
    w.radius = delta;
    ev.set_witness(w);
    for (int m = 0; m < d; ++m) {
      double ext = 0.0;
      for (int k = 0; k <= 128; ++k)
        ext = std::max(ext, std::abs(curve.eval(0, -1.0 + k / 64.0)[m]));
      lo[m] = -(ext + 2.5 * delta);
      hi[m] = ext + 2.5 * delta;
    }
    gnorm_p =
        std::pow(2.0 * unit_ball_volume(d) * std::pow(delta, d), 1.0 / p);
    descr = "{\"kind\":\"ball\",\"radius\":" + format_double(delta) + "}";
  }

  double len_prod = 1.0;
  for (int m = 0; m < d; ++m) len_prod *= hi[m] - lo[m];
  double cell = delta / 2.0;
  while (len_prod / std::pow(cell, d) > static_cast<double>(max_cells))
    cell *= 1.4142135623730951;

  const int levels = std::max(1, static_cast<int>(std::floor(std::log2(1.0 / delta))) + 1);
  const LevelScan scan =
      scan_maximal(ev, lo, hi, levels, 0.0, cell, seed, ctx);

  double np_p = 0.0;
  for (int k = 0; k < levels; ++k)
    np_p += std::pow(std::pow(2.0, -(k + 1)), p) * scan.level_measure[k];
  MaximalWitnessEval out;
  out.value = p == 2.0 ? std::sqrt(scan.integral_sq) / gnorm_p
                       : std::pow(np_p, 1.0 / p) / gnorm_p;
  out.descr = descr;
  return out;
}

NormEstimate norm_maximal(const OperatorSpec& op, double p, double q,
                          NormStrategy strategy, int trials,
                          std::uint64_t seed, const ParallelContext& ctx) {
  if (strategy == NormStrategy::PowerIteration)
    throw InvalidInputError(
        "invalid-strategy: power iteration needs a linear operator");
  if (p != q)
    throw InvalidInputError("maximal norm estimation expects p == q");
  NormEstimate est;
  est.op_id = op.id;
  est.p = p;
  est.q = q;
  est.strategy = strategy;
  est.seed = seed;
  est.trials = trials;

  double best = 0.0;
  bool best_tube = true;
  double best_param = 0.0;
  std::string best_descr = "{}";
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng = rng_stream(seed, trial);
    const bool tube = strategy == NormStrategy::Adversarial
                          ? trial % 2 == 0
                          : rng.uniform() < 0.5;
    const double param = rng.uniform(-0.5, 0.5);
    const auto r = eval_maximal_witness(op.curve, op.delta, p, tube, param,
                                        splitmix64(seed + trial), ctx,
                                        1 << 18);
    if (r.value > best) {
      best = r.value;
      best_tube = tube;
      best_param = param;
      best_descr = r.descr;
    }
  }
  est.value = best;
  est.witness = best_descr;
  est.witness_hash = fnv1a(best_descr, seed);
  const Curve curve = op.curve;
  const double delta = op.delta;
  est.reevaluate = [curve, delta, p, best_tube, best_param, seed, ctx]() {
    // deterministic given the stored witness family and seed
    std::uint64_t s2 = 0;
    for (std::uint64_t trial = 0; trial < 64; ++trial) {
      Rng rng = rng_stream(seed, trial);
      const bool tube = trial % 2 == 0;
      const double param = rng.uniform(-0.5, 0.5);
      if (tube == best_tube && param == best_param) {
        s2 = splitmix64(seed + trial);
        break;
      }
    }
    return eval_maximal_witness(curve, delta, p, best_tube, best_param,
                                s2 == 0 ? seed : s2, ctx, 1 << 18)
        .value;
  };
  return est;
}

}  // namespace

NormEstimate empirical_norm(const OperatorSpec& op, double p, double q,
                            NormStrategy strategy, int trials,
                            std::uint64_t seed, const ParallelContext& ctx) {
  switch (op.kind) {
    case OperatorSpec::Kind::Multiplier:
      return norm_multiplier(op, p, q, strategy, trials, seed);
    case OperatorSpec::Kind::AveragingFio:
    case OperatorSpec::Kind::FractionalFio:
      return norm_fio(op, p, q, strategy, trials, seed, ctx);
    case OperatorSpec::Kind::Maximal:
      return norm_maximal(op, p, q, strategy, trials, seed, ctx);
  }
  throw InvalidInputError("empirical_norm: unknown operator kind");
}

double fio_block_norm_scan(const Symbol& a, const Curve& curve, int xi_samples,
                           int ns, int nt, bool fractional) {
  const auto pts = sample_support(a, xi_samples, 86028121);
  if (pts.empty()) return 0.0;
  const AxisDomain sdom = padded_s_domain(ns);
  const AxisDomain tdom = t_domain(nt);
  double best = 0.0;
  std::vector<double> mult(ns);
  for (int j = 0; j < ns; ++j) {
    int k = j;
    if (k >= ns / 2) k -= ns;
    mult[j] = std::sqrt(1.0 + std::abs(kPi / 2.0 * k));
  }
  for (const auto& p : pts) {
    Eigen::MatrixXcd m(ns, nt);
    for (int i = 0; i < ns; ++i) {
      const double s = sdom.point(i);
      const double rate = curve.eval(0, s).dot(p.xi);
      for (int j = 0; j < nt; ++j) {
        const double t = tdom.point(j);
        m(i, j) = std::exp(cplx(0.0, -rate * t)) * a.eval(p.xi, s, t);
      }
    }
    if (fractional) {
      std::vector<cplx> line(ns);
      for (int j = 0; j < nt; ++j) {
        for (int i = 0; i < ns; ++i) line[i] = m(i, j);
        fft_1d(line.data(), ns, true);
        for (int i = 0; i < ns; ++i) line[i] *= mult[i] / static_cast<double>(ns);
        fft_1d(line.data(), ns, false);
        for (int i = 0; i < ns; ++i) m(i, j) = line[i];
      }
    }
    const double ws = std::sqrt(sdom.step()), wt = std::sqrt(tdom.step());
    Eigen::MatrixXcd weighted = ws * m * wt;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(weighted);
    best = std::max(best, svd.singularValues()(0));
  }
  return best;
}

// ---------------------------------------------------------------------------
// scaling_law_fit
// ---------------------------------------------------------------------------

ScalingFit scaling_law_fit(const std::vector<double>& log_scales,
                           const std::vector<double>& norms,
                           double claimed_exponent, double slack,
                           bool upper_bound_claim) {
  if (log_scales.size() != norms.size() || log_scales.size() < 4)
    throw InvalidInputError("scaling_law_fit: need >= 4 grid points");
  ScalingFit out;
  out.claimed_exponent = claimed_exponent;
  out.slack = slack;
  out.upper_bound_claim = upper_bound_claim;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    if (norms[i] <= 0.0)
      throw InvalidInputError("scaling_law_fit: norms must be positive");
    out.x.push_back(std::log(log_scales[i]));
    out.y.push_back(std::log(norms[i]));
  }
  out.fit = fit_line(out.x, out.y);
  out.pass = upper_bound_claim ? out.fit.slope <= claimed_exponent + slack
                               : out.fit.slope >= claimed_exponent - slack;
  return out;
}

std::string ScalingFit::to_json() const {
  std::ostringstream os;
  os << "{\"slope\":" << format_double(fit.slope)
     << ",\"intercept\":" << format_double(fit.intercept)
     << ",\"slope_stderr\":" << format_double(fit.slope_stderr)
     << ",\"r2\":" << format_double(fit.r2)
     << ",\"claimed\":" << format_double(claimed_exponent)
     << ",\"slack\":" << format_double(slack) << ",\"upper\":"
     << (upper_bound_claim ? "true" : "false")
     << ",\"pass\":" << (pass ? "true" : "false") << ",\"n\":" << fit.n << "}";
  return os.str();
}

// ---------------------------------------------------------------------------
// scan_maximal
// ---------------------------------------------------------------------------

LevelScan scan_maximal(const MaximalEvaluator& ev, const Vec& box_lo,
                       const Vec& box_hi, int levels,
                       double superlevel_threshold, double cell,
                       std::uint64_t seed, const ParallelContext& ctx) {
  const int d = static_cast<int>(box_lo.size());
  std::vector<std::int64_t> counts(d);
  std::int64_t total = 1;
  for (int m = 0; m < d; ++m) {
    counts[m] = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::ceil((box_hi[m] - box_lo[m]) / cell)));
    total *= counts[m];
  }
  const double cell_vol = [&] {
    double v = 1.0;
    for (int m = 0; m < d; ++m) v *= (box_hi[m] - box_lo[m]) / counts[m];
    return v;
  }();

  struct Partial {
    std::vector<double> levels;
    double integral_sq = 0.0;
    double superlevel = 0.0;
    double max_value = 0.0;
  };
  // Fixed chunk count: partial sums merge in chunk order, so results do not
  // depend on the worker count.
  const int chunks = 256;
  const std::int64_t chunk = (total + chunks - 1) / chunks;
  std::vector<Partial> partials(chunks);

  parallel_for(ctx, chunks, [&](std::int64_t c) {
    Partial part;
    part.levels.assign(levels, 0.0);
    Vec x(d);
    const std::int64_t i_lo = c * chunk;
    const std::int64_t i_hi = std::min(total, i_lo + chunk);
    for (std::int64_t i = i_lo; i < i_hi; ++i) {
      std::int64_t rest = i;
      Rng rng = rng_stream(seed, static_cast<std::uint64_t>(i));
      for (int m = 0; m < d; ++m) {
        const std::int64_t idx = rest % counts[m];
        rest /= counts[m];
        const double w = (box_hi[m] - box_lo[m]) / counts[m];
        x[m] = box_lo[m] + (idx + rng.uniform()) * w;
      }
      const double v = std::min(1.0, ev.maximal(x));
      if (v <= 0.0) continue;
      part.integral_sq += v * v * cell_vol;
      part.max_value = std::max(part.max_value, v);
      if (superlevel_threshold > 0.0 && v >= superlevel_threshold)
        part.superlevel += cell_vol;
      const int k = std::min(levels - 1,
                             static_cast<int>(std::floor(-std::log2(v))));
      if (k >= 0 && v > std::pow(2.0, -(k + 1)))
        part.levels[k] += cell_vol;
    }
    partials[c] = std::move(part);
  });

  LevelScan out;
  out.level_measure.assign(levels, 0.0);
  out.cells = total;
  out.cell_volume = cell_vol;
  out.threshold = superlevel_threshold;
  for (const auto& part : partials) {
    if (part.levels.empty()) continue;
    for (int k = 0; k < levels; ++k) out.level_measure[k] += part.levels[k];
    out.integral_sq += part.integral_sq;
    out.superlevel_measure += part.superlevel;
    out.max_value = std::max(out.max_value, part.max_value);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sharpness: range of p
// ---------------------------------------------------------------------------

RangeSharpnessReport sharpness_range_experiment(
    const Curve& curve, const std::vector<double>& deltas, double p,
    std::uint64_t seed, const ParallelContext& ctx, std::int64_t max_cells) {
  const int d = curve.dim();
  RangeSharpnessReport rep;
  rep.d = d;
  rep.p = p;
  const double kLevelFactor = 0.2;

  for (std::size_t di = 0; di < deltas.size(); ++di) {
    const double delta = deltas[di];
    const int s_points = next_pow2(static_cast<int>(std::ceil(4.0 / delta))) + 1;
    MaximalEvaluator ev(curve, delta, s_points);
    BallWitness w;
    w.center = Vec::Zero(d);
    w.radius = delta;
    ev.set_witness(w);

    Vec lo(d), hi(d);
    for (int m = 0; m < d; ++m) {
      double ext = 0.0;
      for (int k = 0; k <= 256; ++k)
        ext = std::max(ext, std::abs(curve.eval(0, -1.0 + k / 128.0)[m]));
      lo[m] = -(ext + 2.5 * delta);
      hi[m] = ext + 2.5 * delta;
    }
    double len_prod = 1.0;
    for (int m = 0; m < d; ++m) len_prod *= hi[m] - lo[m];
    double cell = delta / 2.0;
    while (len_prod / std::pow(cell, d) > static_cast<double>(max_cells))
      cell *= 1.4142135623730951;

    RangeSharpnessPoint pt;
    pt.delta = delta;
    pt.level = kLevelFactor * delta;
    const LevelScan scan =
        scan_maximal(ev, lo, hi, 4, pt.level, cell, seed + di, ctx);
    pt.superlevel_measure = scan.superlevel_measure;
    pt.measure_ratio = scan.superlevel_measure / std::pow(delta, d - 1);
    pt.max_value = scan.max_value;

    // delta-neighbourhood of -gamma must sit inside the superlevel set.
    Rng rng = rng_stream(seed, 1000 + di);
    int hits = 0;
    const int probes = 200;
    for (int i = 0; i < probes; ++i) {
      const double s = rng.uniform(-1.0, 1.0);
      Vec x = -curve.eval(0, s);
      Vec jitter(d);
      for (int m = 0; m < d; ++m) jitter[m] = rng.normal();
      jitter *= (0.5 * delta) / std::max(1e-12, jitter.norm());
      x += jitter;
      if (ev.maximal(x) >= pt.level) ++hits;
    }
    pt.neighborhood_hit_rate = static_cast<double>(hits) / probes;
    rep.points.push_back(pt);
  }

  if (rep.points.size() >= 2) {
    std::vector<double> lx, lv, lm;
    for (const auto& pt : rep.points) {
      lx.push_back(std::log(pt.delta));
      lv.push_back(std::log(pt.max_value));
      lm.push_back(std::log(std::max(pt.superlevel_measure, 1e-300)));
    }
    rep.value_slope = fit_line(lx, lv).slope;
    rep.measure_slope = fit_line(lx, lm).slope;
    rep.implied_p_min = (d + 1 - rep.measure_slope) / rep.value_slope;
  }
  bool ok = true;
  for (const auto& pt : rep.points)
    ok = ok && pt.neighborhood_hit_rate >= 0.95 && pt.measure_ratio >= 1.0;
  rep.pass = ok && (rep.points.size() < 2 || rep.implied_p_min >= 2.0 - 0.25);
  return rep;
}

std::string RangeSharpnessReport::to_json() const {
  std::ostringstream os;
  os << "{\"d\":" << d << ",\"p\":" << format_double(p) << ",\"points\":[";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& pt = points[i];
    os << (i ? "," : "") << "{\"delta\":" << format_double(pt.delta)
       << ",\"level\":" << format_double(pt.level)
       << ",\"measure\":" << format_double(pt.superlevel_measure)
       << ",\"measure_ratio\":" << format_double(pt.measure_ratio)
       << ",\"hit_rate\":" << format_double(pt.neighborhood_hit_rate)
       << ",\"max_value\":" << format_double(pt.max_value) << "}";
  }
  os << "],\"value_slope\":" << format_double(value_slope)
     << ",\"measure_slope\":" << format_double(measure_slope)
     << ",\"implied_p_min\":" << format_double(implied_p_min)
     << ",\"pass\":" << (pass ? "true" : "false") << "}";
  return os.str();
}

// ---------------------------------------------------------------------------
// Sharpness: log lower bound
// ---------------------------------------------------------------------------

LogSharpnessReport sharpness_log_experiment(const Curve& curve, double delta,
                                            double p, const Vec& x0,
                                            double r_param, std::uint64_t seed,
                                            const ParallelContext& ctx,
                                            std::int64_t max_cells) {
  const int d = curve.dim();
  LogSharpnessReport rep;
  rep.delta = delta;
  rep.p = p;
  const int K = static_cast<int>(std::floor(std::log2(1.0 / delta)));
  if (K < 0) {
    rep.degenerate = true;
    return rep;
  }
  rep.levels = K;

  const int s_points = next_pow2(static_cast<int>(std::ceil(4.0 / delta))) + 1;
  MaximalEvaluator ev(curve, delta, s_points);
  TubeWitness w;
  w.r_param = r_param;
  w.radius = 10.0 * delta;
  w.shift = x0.size() == d ? x0 : Vec(Vec::Zero(d));
  w.reflected = true;
  ev.set_witness(w);

  Vec lo(d), hi(d);
  const Vec gr = curve.eval(0, r_param);
  for (int m = 0; m < d; ++m) {
    double ext = 0.0;
    for (int k = 0; k <= 256; ++k) {
      const Vec gs = curve.eval(0, -1.0 + k / 128.0);
      ext = std::max(ext, std::abs(gs[m] - gr[m]));
    }
    lo[m] = w.shift[m] - (ext + 12.0 * delta);
    hi[m] = w.shift[m] + ext + 12.0 * delta;
  }
  double len_prod = 1.0;
  for (int m = 0; m < d; ++m) len_prod *= hi[m] - lo[m];
  double cell = delta / 2.0;
  while (len_prod / std::pow(cell, d) > static_cast<double>(max_cells))
    cell *= 1.4142135623730951;

  const LevelScan scan =
      scan_maximal(ev, lo, hi, K + 1, 0.0, cell, seed, ctx);
  rep.level_measure = scan.level_measure;
  rep.chain_rhs = scan.integral_sq;

  rep.min_c = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= K; ++k) {
    const double c =
        scan.level_measure[k] / (std::pow(4.0, k) * std::pow(delta, d));
    rep.level_c.push_back(c);
    rep.min_c = std::min(rep.min_c, c);
    rep.dyadic_sum += std::pow(4.0, -(k + 1)) * scan.level_measure[k];
  }
  rep.chain_ok = rep.dyadic_sum <= rep.chain_rhs * (1.0 + 1e-9);

  const double fnorm =
      std::pow(2.0 * unit_ball_volume(d) * std::pow(10.0 * delta, d), 1.0 / p);
  double np_p = 0.0;
  for (int k = 0; k <= K; ++k)
    np_p += std::pow(std::pow(2.0, -(k + 1)), p) * scan.level_measure[k];
  rep.norm_lower_bound = std::pow(np_p, 1.0 / p) / fnorm;
  return rep;
}

std::string LogSharpnessReport::to_json() const {
  std::ostringstream os;
  os << "{\"delta\":" << format_double(delta) << ",\"p\":" << format_double(p)
     << ",\"K\":" << levels << ",\"measures\":[";
  for (std::size_t i = 0; i < level_measure.size(); ++i)
    os << (i ? "," : "") << format_double(level_measure[i]);
  os << "],\"c\":[";
  for (std::size_t i = 0; i < level_c.size(); ++i)
    os << (i ? "," : "") << format_double(level_c[i]);
  os << "],\"min_c\":" << format_double(min_c)
     << ",\"dyadic_sum\":" << format_double(dyadic_sum)
     << ",\"chain_rhs\":" << format_double(chain_rhs)
     << ",\"norm_lower_bound\":" << format_double(norm_lower_bound)
     << ",\"chain_ok\":" << (chain_ok ? "true" : "false")
     << ",\"degenerate\":" << (degenerate ? "true" : "false") << "}";
  return os.str();
}

LogSharpnessSweep sharpness_log_sweep(const Curve& curve,
                                      const std::vector<double>& deltas,
                                      double p, std::uint64_t seed,
                                      const ParallelContext& ctx) {
  LogSharpnessSweep sweep;
  std::vector<double> scales, values;
  const int d = curve.dim();
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    auto rep = sharpness_log_experiment(curve, deltas[i], p, Vec::Zero(d), 0.0,
                                        seed + i, ctx);
    scales.push_back(std::log(1.0 / deltas[i]));
    values.push_back(std::max(rep.norm_lower_bound, 1e-300));
    sweep.reports.push_back(std::move(rep));
  }
  sweep.exponent_fit =
      scaling_law_fit(scales, values, 1.0 / p, 0.25, /*upper=*/false);
  // lower-bound claim: slope >= 1/p - slack; acceptance uses >= 0.4 at p = 2
  return sweep;
}

std::string LogSharpnessSweep::to_json() const {
  std::ostringstream os;
  os << "{\"reports\":[";
  for (std::size_t i = 0; i < reports.size(); ++i)
    os << (i ? "," : "") << reports[i].to_json();
  os << "],\"exponent_fit\":" << exponent_fit.to_json() << "}";
  return os.str();
}

// ---------------------------------------------------------------------------
// Theorem-1 trend
// ---------------------------------------------------------------------------

TrendReport theorem1_trend(const Curve& curve, const std::vector<double>& deltas,
                           double claimed_exponent, double slack,
                           std::uint64_t seed, const ParallelContext& ctx) {
  TrendReport rep;
  std::vector<double> scales, values;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const double delta = deltas[i];
    MaximalNormPoint pt;
    pt.delta = delta;
    pt.tube_value = eval_maximal_witness(curve, delta, 2.0, true, 0.0,
                                         seed + 2 * i, ctx, 1 << 21)
                        .value;
    pt.ball_value = eval_maximal_witness(curve, delta, 2.0, false, 0.0,
                                         seed + 2 * i + 1, ctx, 1 << 21)
                        .value;
    pt.value = std::max(pt.tube_value, pt.ball_value);
    pt.witness = pt.tube_value >= pt.ball_value ? "tube" : "ball";
    rep.points.push_back(pt);
    scales.push_back(std::log(1.0 / delta));
    values.push_back(pt.value);
  }
  rep.fit = scaling_law_fit(scales, values, claimed_exponent, slack, true);
  return rep;
}

std::string TrendReport::to_json() const {
  std::ostringstream os;
  os << "{\"points\":[";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& pt = points[i];
    os << (i ? "," : "") << "{\"delta\":" << format_double(pt.delta)
       << ",\"value\":" << format_double(pt.value) << ",\"witness\":\""
       << pt.witness << "\",\"tube\":" << format_double(pt.tube_value)
       << ",\"ball\":" << format_double(pt.ball_value) << "}";
  }
  os << "],\"fit\":" << fit.to_json() << "}";
  return os.str();
}

// ---------------------------------------------------------------------------
// Sobolev embedding
// ---------------------------------------------------------------------------

SobolevReport sobolev_embedding_check(const Curve& curve,
                                      std::shared_ptr<const CutoffLibrary> lib,
                                      const std::vector<double>& deltas,
                                      int fields_per_delta, std::uint64_t seed,
                                      const ParallelContext& ctx) {
  SobolevReport rep;
  const double sup_gamma = curve_position_sup(curve);
  for (std::size_t di = 0; di < deltas.size(); ++di) {
    const double delta = deltas[di];
    GridSpec grid;
    grid.d = curve.dim();
    grid.X = sup_gamma + 1.5;
    grid.nx = next_pow2(std::max(
        32, static_cast<int>(std::ceil(1.1 * grid.X / (kPi * delta)))));
    grid.nt = 32;
    const int ns = next_pow2(
        std::max(128, static_cast<int>(std::ceil(8.0 / delta))));

    const Symbol a = build_a_delta(lib, delta);
    const double band = 0.45 / delta;
    double cmax = 0.0;
    for (int fi = 0; fi < fields_per_delta; ++fi) {
      Field g = random_bandlimited_field(grid, Axis::t, t_domain(grid.nt), band,
                                         splitmix64(seed + di) ^ fi);
      const double gn = g.l2_norm();
      if (gn == 0.0) continue;
      Field ag = averaging_fio(a, curve, g, ns, ctx);
      // LHS: sup over s in I, then L2 in x.
      const auto mx = max_over_axis(ag, -1.0, 1.0);
      double lhs2 = 0.0;
      for (double v : mx) lhs2 += v * v;
      const double lhs = std::sqrt(lhs2 * std::pow(grid.h(), grid.d));
      Field dag = fractional_s_derivative(ag, 0.5);
      const double dn = dag.l2_norm();
      SobolevRow row;
      row.delta = delta;
      row.field_index = fi;
      row.lhs = lhs;
      row.dnorm = dn;
      row.gnorm = gn;
      row.c_fit = lhs / (std::sqrt(std::log(1.0 / delta)) * dn + gn);
      cmax = std::max(cmax, row.c_fit);
      rep.rows.push_back(row);
    }
    rep.deltas.push_back(delta);
    rep.c_per_delta.push_back(cmax);
  }
  double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0;
  for (double c : rep.c_per_delta) {
    cmin = std::min(cmin, c);
    cmax = std::max(cmax, c);
  }
  rep.ratio = cmin > 0 ? cmax / cmin : std::numeric_limits<double>::infinity();
  rep.pass = rep.ratio <= 2.0;
  return rep;
}

std::string SobolevReport::to_json() const {
  std::ostringstream os;
  os << "{\"deltas\":[";
  for (std::size_t i = 0; i < deltas.size(); ++i)
    os << (i ? "," : "") << format_double(deltas[i]);
  os << "],\"c\":[";
  for (std::size_t i = 0; i < c_per_delta.size(); ++i)
    os << (i ? "," : "") << format_double(c_per_delta[i]);
  os << "],\"ratio\":" << format_double(ratio)
     << ",\"pass\":" << (pass ? "true" : "false") << "}";
  return os.str();
}

// ---------------------------------------------------------------------------
// Decomposition audit pipeline
// ---------------------------------------------------------------------------

namespace {

struct PipelineWork {
  Symbol base_piece;
  HSplit split;
  ShellDecomposition shells;
  std::vector<int> occupied;
};

}  // namespace

PipelineReport decomposition_audit_pipeline(
    const Curve& curve, double lambda, int order,
    std::shared_ptr<const CutoffLibrary> lib, const PipelineOptions& opt,
    const ParallelContext& ctx) {
  PipelineReport rep;
  rep.curve_name = curve.name();
  rep.lambda = lambda;
  rep.order = order;

  auto fail = [&rep](const std::string& stage, const std::string& details) {
    PipelineStage st;
    st.name = stage;
    st.ran = true;
    st.pass = false;
    st.details = details;
    rep.stages.push_back(st);
    rep.failed_stage = stage;
    rep.all_pass = false;
    return rep;
  };
  auto ok = [&rep](const std::string& stage, const std::string& details) {
    PipelineStage st;
    st.name = stage;
    st.ran = true;
    st.pass = true;
    st.details = details;
    rep.stages.push_back(st);
  };

  // Admission: the input curve must lie in the claimed nondegeneracy class.
  const auto membership =
      check_class_membership(curve, curve.regularity(), order, 512);
  if (!membership.passes)
    return fail("curve-membership", membership.to_json());
  ok("curve-membership", membership.to_json());

  PipelineWork work;

  // Stage 1: H-split audit.
  try {
    const double delta = opt.delta > 0 ? opt.delta : 1.0 / (8.0 * lambda);
    Symbol a_delta = build_a_delta(lib, delta);
    work.base_piece = littlewood_paley_piece(a_delta, lib, lambda);
    HSplitOptions hopt;
    hopt.samples = opt.samples;
    hopt.seed = opt.seed;
    work.split = build_H_and_split(work.base_piece, curve, order, lib, hopt);
    rep.a_prime = work.split.a_prime;
    rep.measured_A = work.split.measured_A;
    ok("h-split", work.split.to_json());
  } catch (const CalibrationError& e) {
    return fail("h-split", std::string("{\"error\":\"") + e.what() + "\"}");
  }

  // Stage 2: G bounds.
  rep.eps0 = default_eps0(curve, order);
  rep.eps1 = opt.eps1_over_eps0 * rep.eps0;
  work.shells = make_shell_decomposition(work.split.a_near, curve, order, lib,
                                         rep.eps0, rep.eps1);
  {
    const auto g_audit = audit_g_bound(work.shells, opt.samples);
    if (!g_audit.pass) return fail("g-bounds", g_audit.to_json());
    ok("g-bounds", g_audit.to_json());
  }

  // Stage 3: shell count <= C log lambda.
  {
    const int max_n =
        static_cast<int>(std::ceil(std::log2(std::max(2.0, lambda)))) + 4;
    work.occupied = occupied_shells(work.shells, lib, max_n);
    rep.shell_count = static_cast<int>(work.occupied.size());
    const double budget =
        opt.count_budget * std::max(1.0, std::log2(std::max(2.0, lambda)));
    std::ostringstream os;
    os << "{\"count\":" << rep.shell_count << ",\"budget\":"
       << format_double(budget) << "}";
    if (rep.shell_count > budget) return fail("shell-count", os.str());
    ok("shell-count", os.str());
  }

  // Representative rescalable shell piece.
  Symbol piece;
  {
    int best_n = -1;
    for (int n : work.occupied)
      if (n >= 1 && shell_rho(work.shells, n) <= opt.rho_cap) best_n = n;
    if (best_n < 0)
      return fail("inner-products",
                  "{\"error\":\"no occupied shell with rho <= cap\"}");
    const double rho = shell_rho(work.shells, best_n);
    Symbol shell = shell_symbol(work.shells, lib, best_n);
    const auto pts = sample_support(shell, 16, 555557);
    if (pts.empty())
      return fail("inner-products", "{\"error\":\"shell sampling starved\"}");
    const long nu_max = static_cast<long>(std::floor((1.0 - rho) / rho));
    bool found = false;
    for (const auto& p : pts) {
      const auto sg = work.shells.distance->sigma(p.xi);
      if (!sg) continue;
      long nu = std::lround(*sg / rho);
      nu = std::max(-nu_max, std::min(nu_max, nu));
      for (long cand : {nu, nu - 1, nu + 1}) {
        if (std::abs(cand) > nu_max) continue;
        Symbol trial = shell_piece(work.shells, lib, best_n, cand);
        if (!sample_support(trial, 8, 777).empty()) {
          piece = trial;
          rep.rep_n = best_n;
          rep.rep_nu = cand;
          rep.rep_rho = rho;
          found = true;
          break;
        }
      }
      if (found) break;
    }
    if (!found)
      return fail("inner-products",
                  "{\"error\":\"no populated (n,nu) piece found\"}");
  }

  // Stage 4: localized inner-product audit.
  {
    piece.meta.type_A = rep.measured_A;
    const auto audit = verify_inner_product_bounds(
        piece, curve, order, rep.rep_rho, opt.samples,
        opt.spread_budget_scale * std::max(1.0, sq(rep.measured_A)));
    if (!audit.pass || audit.empty)
      return fail("inner-products", audit.to_json());
    ok("inner-products", audit.to_json());
  }

  // Stage 5: rescaling-map invariants.
  RescalingMap map;
  try {
    map = build_rescaling_map(curve, rep.rep_rho * rep.rep_nu, rep.rep_rho,
                              order);
  } catch (const std::exception& e) {
    return fail("rescaling-map", std::string("{\"error\":\"") + e.what() + "\"}");
  }
  {
    double eig_err = 0.0;
    for (int i = 1; i <= order; ++i) {
      const Vec g = curve.eval(i, map.s0);
      eig_err = std::max(eig_err, (map.matrix * g - std::pow(map.rho, i) * g)
                                          .norm() /
                                      std::max(1.0, g.norm()));
    }
    // complement action
    Mat m(curve.dim(), order);
    for (int i = 1; i <= order; ++i) m.col(i - 1) = curve.eval(i, map.s0);
    Eigen::HouseholderQR<Mat> qr(m);
    const Mat q = qr.householderQ();
    double comp_err = 0.0;
    for (int j = order; j < curve.dim(); ++j) {
      const Vec v = q.col(j);
      comp_err = std::max(
          comp_err,
          (map.matrix * v - std::pow(map.rho, order) * v).norm());
    }
    const double inv_norm = operator_norm(map.inverse);
    const double c_inv = inv_norm * std::pow(map.rho, order);
    std::ostringstream os;
    os << "{\"eig_err\":" << format_double(eig_err)
       << ",\"complement_err\":" << format_double(comp_err)
       << ",\"inv_norm_scaled\":" << format_double(c_inv) << "}";
    if (eig_err > 1e-8 || comp_err > 1e-8 || c_inv > 1e4)
      return fail("rescaling-map", os.str());
    ok("rescaling-map", os.str());
  }

  // Stage 6: rescaled-curve membership.
  const Curve tilde = rescale_curve(curve, map);
  {
    const auto rep_m = check_class_membership(
        tilde, 64.0 * curve.regularity(), order - 1 > 0 ? order - 1 : 1, 1024);
    double min_det_full = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 256; ++k)
      min_det_full = std::min(
          min_det_full,
          generalized_determinant(tilde, -1.0 + 2.0 * k / 255.0, order));
    const double b1 = std::max(
        rep_m.max_cnorm, rep_m.min_gen_det > 0 ? 1.0 / rep_m.min_gen_det
                                               : std::numeric_limits<double>::infinity());
    std::ostringstream os;
    os << "{\"membership\":" << rep_m.to_json()
       << ",\"min_det_order_N\":" << format_double(min_det_full)
       << ",\"lemma_floor\":" << format_double(0.5 / curve.regularity())
       << ",\"B1\":" << format_double(b1) << "}";
    if (!rep_m.passes || min_det_full < 0.5 / curve.regularity() || b1 > 64.0)
      return fail("rescaled-curve", os.str());
    ok("rescaled-curve", os.str());
  }

  // Stage 7: rescaled-symbol type audit.
  {
    Symbol tilde_a = rescale_symbol(piece, map);
    const auto annulus = audit_rescaled_annulus(
        tilde_a, rep.rep_rho, lambda, order, opt.samples);
    const auto type = measure_type(tilde_a, tilde, order - 1, opt.samples);
    const auto dsup = derivative_sups(tilde_a, 3, 256);
    const double budget =
        opt.spread_budget_scale * std::max(1.0, sq(rep.measured_A));
    std::ostringstream os;
    os << "{\"annulus\":" << annulus.to_json() << ",\"type\":" << type.to_json()
       << ",\"d_sups\":[" << format_double(dsup[0]) << ","
       << format_double(dsup[1]) << "," << format_double(dsup[2]) << "]}";
    const bool pass = annulus.pass && type.accepted > 0 && type.min_ratio > 0 &&
                      type.max_ratio / type.min_ratio <= budget;
    if (!pass) return fail("rescaled-symbol", os.str());
    ok("rescaled-symbol", os.str());
  }

  // Stage 8: n = 0 Schur bound with Lambda = lambda^(1/N).
  {
    Symbol a0 = shell_symbol(work.shells, lib, 0);
    const double Lambda = std::pow(lambda, 1.0 / order);
    KernelOptions kopt;
    kopt.s_feature_scale = std::min(0.05, 0.125 / Lambda);
    const auto s0 = schur_bound(a0, curve, 0, 6, 8, Lambda, kopt, ctx);
    const auto s1 = schur_bound(a0, curve, 1, 6, 8, Lambda, kopt, ctx);

    // Mechanism checks: s-width of a^0 and sup |d_s a^0| carry the lambda
    // scaling; the row integrals must be consistent with them.
    const auto pts = sample_support(a0, 128, 88001);
    double width = 0.0, sup_a = 0.0;
    {
      // max over sampled xi of the s-extent around sigma(xi)
      std::vector<std::pair<double, double>> by_xi;
      for (const auto& p : pts) {
        sup_a = std::max(sup_a, p.abs_value);
        const auto sg = work.shells.distance->sigma(p.xi);
        if (sg) width = std::max(width, 2.0 * std::abs(p.s - *sg));
      }
    }
    Symbol da0 = d_s_symbol(a0, curve);
    double dsup = 0.0;
    for (const auto& p : pts)
      dsup = std::max(dsup, std::abs(da0.eval(p.xi, p.s, p.t)));

    std::ostringstream os;
    os << "{\"iota0\":{" << "\"sup_row\":" << format_double(s0.sup_row_integral)
       << ",\"constant\":" << format_double(s0.constant) << "},"
       << "\"iota1\":{\"sup_row\":" << format_double(s1.sup_row_integral)
       << ",\"constant\":" << format_double(s1.constant) << "},"
       << "\"width\":" << format_double(width)
       << ",\"width_scaled\":" << format_double(width * Lambda)
       << ",\"dsup_scaled\":" << format_double(dsup / Lambda) << "}";
    const bool pass = s0.sup_row_integral > 0 &&
                      width * Lambda <= 8.0 &&
                      s0.sup_row_integral <= 8.0 * width * sq(sup_a) &&
                      s1.sup_row_integral <= 8.0 * width * sq(dsup);
    if (!pass) return fail("n0-schur", os.str());
    ok("n0-schur", os.str());
  }

  rep.all_pass = true;
  return rep;
}

int shell_count_at_lambda(const Curve& curve, double lambda, int order,
                          std::shared_ptr<const CutoffLibrary> lib,
                          const PipelineOptions& opt) {
  const double delta = opt.delta > 0 ? opt.delta : 1.0 / (8.0 * lambda);
  Symbol a_delta = build_a_delta(lib, delta);
  Symbol piece = littlewood_paley_piece(a_delta, lib, lambda);
  HSplitOptions hopt;
  hopt.samples = std::min(opt.samples, 512);
  hopt.seed = opt.seed;
  const HSplit split = build_H_and_split(piece, curve, order, lib, hopt);
  const double eps0 = default_eps0(curve, order);
  const auto shells = make_shell_decomposition(
      split.a_near, curve, order, lib, eps0, opt.eps1_over_eps0 * eps0);
  const int max_n =
      static_cast<int>(std::ceil(std::log2(std::max(2.0, lambda)))) + 4;
  return static_cast<int>(occupied_shells(shells, lib, max_n, 128).size());
}

// ---------------------------------------------------------------------------
// Anisotropic admissibility
// ---------------------------------------------------------------------------

AnisoReport aniso_admissibility_report(const Curve& curve,
                                       const std::vector<double>& deltas,
                                       double sandwich_delta,
                                       int sandwich_samples,
                                       std::uint64_t seed) {
  const int d = curve.dim();
  AnisoReport rep;
  bool all_adm = true;
  for (double delta : deltas) {
    Vec uniform = Vec::Constant(d, delta);
    Vec graded(d);
    for (int j = 0; j < d; ++j) graded[j] = std::pow(delta, j + 1);
    for (const auto& [name, r] :
         {std::pair<std::string, Vec>{"uniform", uniform},
          std::pair<std::string, Vec>{"graded", graded}}) {
      const auto adm = check_admissible(r);
      rep.rows.push_back(AnisoFamilyRow{name, delta, adm.admissible,
                                        adm.first_violation});
      all_adm = all_adm && adm.admissible;
    }
  }

  // Sandwich at a fixed delta: sample the inner set, check the outer ones.
  const double delta = sandwich_delta;
  const double s_dir = 0.3;
  Tube iso_in = make_iso_tube(curve, s_dir, delta);
  Tube box = make_aniso_tube(curve, s_dir, Vec::Constant(d, delta));
  Tube iso_out = make_iso_tube(curve, s_dir, delta * std::sqrt(double(d)));
  Rng rng = rng_stream(seed, 99);
  const auto [lo, hi] = box.bounding_box();
  int got = 0;
  rep.sandwich_samples = sandwich_samples;
  Vec pnt(d + 1);
  std::int64_t guard = 0;
  while (got < sandwich_samples && guard++ < 1000ll * sandwich_samples) {
    for (int m = 0; m <= d; ++m) pnt[m] = rng.uniform(lo[m], hi[m]);
    const bool in_iso = iso_in.contains(pnt);
    const bool in_box = box.contains(pnt);
    if (!in_iso && !in_box) continue;
    ++got;
    if (in_iso && !in_box) ++rep.inner_failures;
    if (in_box && !iso_out.contains(pnt)) ++rep.outer_failures;
  }
  rep.pass = all_adm && rep.inner_failures == 0 && rep.outer_failures == 0 &&
             got >= sandwich_samples;
  return rep;
}

std::string AnisoReport::to_json() const {
  std::ostringstream os;
  os << "{\"rows\":[";
  for (std::size_t i = 0; i < rows.size(); ++i)
    os << (i ? "," : "") << "{\"family\":\"" << rows[i].family
       << "\",\"delta\":" << format_double(rows[i].delta) << ",\"admissible\":"
       << (rows[i].admissible ? "true" : "false") << ",\"violation\":\""
       << rows[i].violation << "\"}";
  os << "],\"sandwich_samples\":" << sandwich_samples
     << ",\"inner_failures\":" << inner_failures
     << ",\"outer_failures\":" << outer_failures
     << ",\"pass\":" << (pass ? "true" : "false") << "}";
  return os.str();
}

// ---------------------------------------------------------------------------
// Tube volume law
// ---------------------------------------------------------------------------

namespace {

// Parameter s > r with |gamma(s) - gamma(r)| = gap (monotone bisection).
double solve_gap(const Curve& curve, double r, double gap) {
  const Vec gr = curve.eval(0, r);
  auto f = [&](double s) { return (curve.eval(0, s) - gr).norm() - gap; };
  double lo = r, hi = 1.0;
  if (f(hi) < 0) return hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TubeVolumeReport tube_volume_report(std::int64_t samples_per_pair,
                                    std::uint64_t seed,
                                    const ParallelContext& ctx) {
  TubeVolumeReport rep;
  struct Config {
    int d;
    double delta;
    Curve curve;
    std::vector<double> gap_mults;
  };
  std::vector<Config> configs;
  configs.push_back(
      {2, std::pow(2.0, -6), make_circle2d(), {1, 2, 4, 8, 16, 24, 32, 48, 64, 80}});
  configs.push_back(
      {3, std::pow(2.0, -5), make_moment_curve(3), {1, 2, 4, 6, 8, 12, 16, 24, 32, 40}});

  struct Task {
    Tube big, small;
    int d;
    double delta, gap;
    int pair;
  };
  std::vector<Task> tasks;
  int pair_index = 0;
  for (const auto& cfg : configs) {
    const double r_dir = -0.5;
    int idx = 0;
    for (double gm : cfg.gap_mults) {
      const double gap_target = gm * cfg.delta;
      const double s_dir = solve_gap(cfg.curve, r_dir, gap_target);
      const Vec diff = cfg.curve.eval(0, s_dir) - cfg.curve.eval(0, r_dir);
      const double gap = diff.norm();
      // Alternate aligned crossings and mid-tube crossings with a small
      // transverse offset.
      Vec shift = Vec::Zero(cfg.d + 1);
      if (idx % 2 == 1) {
        Vec perp = Vec::Zero(cfg.d);
        perp[1] = 1.0;
        perp -= perp.dot(diff) / std::max(1e-30, diff.squaredNorm()) * diff;
        if (perp.norm() > 1e-9) perp /= perp.norm();
        const Vec off = -0.5 * diff + 0.3 * cfg.delta * perp;
        shift.head(cfg.d) = off;
      }
      Task task;
      task.big = make_iso_tube(cfg.curve, r_dir, 10.0 * cfg.delta, shift);
      task.small = make_iso_tube(cfg.curve, s_dir, cfg.delta);
      task.d = cfg.d;
      task.delta = cfg.delta;
      task.gap = gap;
      task.pair = pair_index++;
      tasks.push_back(task);
      ++idx;
    }
  }

  std::vector<TubeVolumeRow> rows(tasks.size());
  parallel_for(ctx, static_cast<std::int64_t>(tasks.size()), [&](std::int64_t i) {
    const auto& task = tasks[i];
    const auto est = intersection_volume_mc(task.big, task.small,
                                            samples_per_pair, seed + task.pair);
    TubeVolumeRow row;
    row.pair = task.pair;
    row.d = task.d;
    row.delta = task.delta;
    row.gap = task.gap;
    row.mc = est.volume;
    row.se = est.std_error;
    row.predicted = predicted_intersection_volume(task.delta, task.gap, task.d);
    row.ratio = row.mc / row.predicted;
    rows[i] = row;
  });
  rep.rows = rows;

  auto band = [&](int d, double* constant, double* spread) {
    double lg = 0.0;
    int n = 0;
    for (const auto& row : rep.rows)
      if (row.d == d && row.ratio > 0) {
        lg += std::log(row.ratio);
        ++n;
      }
    if (n == 0) {
      *constant = 0;
      *spread = std::numeric_limits<double>::infinity();
      return false;
    }
    *constant = std::exp(lg / n);
    double worst = 1.0;
    for (const auto& row : rep.rows)
      if (row.d == d)
        worst = std::max(worst, std::max(row.ratio / *constant,
                                         *constant / std::max(row.ratio, 1e-300)));
    *spread = worst;
    return worst <= 4.0;
  };
  const bool p2 = band(2, &rep.constant_d2, &rep.spread_d2);
  const bool p3 = band(3, &rep.constant_d3, &rep.spread_d3);
  rep.pass = p2 && p3;
  return rep;
}

std::string TubeVolumeReport::to_json() const {
  std::ostringstream os;
  os << "{\"rows\":[";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << (i ? "," : "") << "{\"pair\":" << r.pair << ",\"d\":" << r.d
       << ",\"delta\":" << format_double(r.delta)
       << ",\"gap\":" << format_double(r.gap) << ",\"mc\":" << format_double(r.mc)
       << ",\"se\":" << format_double(r.se)
       << ",\"predicted\":" << format_double(r.predicted)
       << ",\"ratio\":" << format_double(r.ratio) << "}";
  }
  os << "],\"constant_d2\":" << format_double(constant_d2)
     << ",\"spread_d2\":" << format_double(spread_d2)
     << ",\"constant_d3\":" << format_double(constant_d3)
     << ",\"spread_d3\":" << format_double(spread_d3)
     << ",\"pass\":" << (pass ? "true" : "false") << "}";
  return os.str();
}

std::string PipelineReport::to_json() const {
  std::ostringstream os;
  os << "{\"curve\":\"" << curve_name << "\",\"lambda\":" << format_double(lambda)
     << ",\"order\":" << order << ",\"eps0\":" << format_double(eps0)
     << ",\"eps1\":" << format_double(eps1)
     << ",\"a_prime\":" << format_double(a_prime)
     << ",\"measured_A\":" << format_double(measured_A)
     << ",\"shell_count\":" << shell_count << ",\"rep_n\":" << rep_n
     << ",\"rep_nu\":" << rep_nu << ",\"rep_rho\":" << format_double(rep_rho)
     << ",\"stages\":[";
  for (std::size_t i = 0; i < stages.size(); ++i) {
    os << (i ? "," : "") << "{\"name\":\"" << stages[i].name << "\",\"ran\":"
       << (stages[i].ran ? "true" : "false")
       << ",\"pass\":" << (stages[i].pass ? "true" : "false")
       << ",\"details\":" << stages[i].details << "}";
  }
  os << "],\"all_pass\":" << (all_pass ? "true" : "false")
     << ",\"failed_stage\":\"" << failed_stage << "\"}";
  return os.str();
}

}  // namespace nikodym
