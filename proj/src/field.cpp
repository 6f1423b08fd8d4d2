#include "nikodym/field.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

namespace nikodym {

std::int64_t GridSpec::spatial_points() const {
  std::int64_t n = 1;
  for (int i = 0; i < d; ++i) n *= nx;
  return n;
}

void GridSpec::validate() const {
  if (d < 1 || d > 4) throw ConfigurationError("grid: full fields need 1 <= d <= 4");
  if (!is_power_of_two(nx) || !is_power_of_two(nt))
    throw ConfigurationError("grid: nx and nt must be powers of two");
  if (X <= 0.0) throw ConfigurationError("grid: X must be positive");
}

// ---------------------------------------------------------------------------
// FFT engine: cached FFTW plans, new-array execution, thread-safe.
// ---------------------------------------------------------------------------

namespace {

class FftEngine {
 public:
  static FftEngine& instance() {
    static FftEngine engine;
    return engine;
  }

  // In-place d-dimensional transform of a contiguous n^rank block.
  void dft(int rank, int n, cplx* data, int sign) {
    fftw_plan plan = get_plan(rank, n, sign);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(data),
                     reinterpret_cast<fftw_complex*>(data));
  }

 private:
  fftw_plan get_plan(int rank, int n, int sign) {
    const std::uint64_t key =
        (static_cast<std::uint64_t>(rank) << 40) |
        (static_cast<std::uint64_t>(n) << 8) | (sign == FFTW_FORWARD ? 1 : 0);
    std::lock_guard<std::mutex> lock(mu_);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<int> dims(rank, n);
    std::vector<cplx> scratch(static_cast<std::size_t>(std::pow(n, rank)));
    fftw_plan plan = fftw_plan_dft(
        rank, dims.data(), reinterpret_cast<fftw_complex*>(scratch.data()),
        reinterpret_cast<fftw_complex*>(scratch.data()), sign,
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan) throw EvaluationError("fftw plan creation failed");
    plans_.emplace(key, plan);
    return plan;
  }

  std::mutex mu_;
  std::map<std::uint64_t, fftw_plan> plans_;
};

// (-1)^(sum of axis indices) checkerboard accounting for the -X lattice
// offset in the transform phase.
inline int checkerboard_sign(const GridSpec& g, std::int64_t kflat) {
  int sum = 0;
  for (int ax = 0; ax < g.d; ++ax) {
    sum += static_cast<int>(kflat % g.nx);
    kflat /= g.nx;
  }
  return (sum & 1) ? -1 : 1;
}

}  // namespace

Vec x_at(const GridSpec& g, std::int64_t xflat) {
  Vec x(g.d);
  for (int ax = 0; ax < g.d; ++ax) {
    x[ax] = -g.X + g.h() * static_cast<double>(xflat % g.nx);
    xflat /= g.nx;
  }
  return x;
}

Vec xi_at(const GridSpec& g, std::int64_t kflat) {
  Vec xi(g.d);
  for (int ax = 0; ax < g.d; ++ax) {
    int k = static_cast<int>(kflat % g.nx);
    if (k >= g.nx / 2) k -= g.nx;
    xi[ax] = g.xi_spacing() * k;
    kflat /= g.nx;
  }
  return xi;
}

Field make_field(const GridSpec& g, Axis axis, const AxisDomain& dom) {
  g.validate();
  Field f;
  f.grid = g;
  f.axis = axis;
  f.dom = dom;
  f.values.assign(static_cast<std::size_t>(dom.n) * g.spatial_points(), cplx(0, 0));
  return f;
}

double Field::l2_norm() const {
  double acc = 0.0;
  for (const cplx& v : values) acc += std::norm(v);
  return std::sqrt(acc * cell_weight());
}

double Field::max_abs() const {
  double m = 0.0;
  for (const cplx& v : values) m = std::max(m, std::abs(v));
  return m;
}

Field& Field::operator+=(const Field& o) {
  if (values.size() != o.values.size()) throw InvalidInputError("field shape mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
  return *this;
}

Field& Field::operator-=(const Field& o) {
  if (values.size() != o.values.size()) throw InvalidInputError("field shape mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
  return *this;
}

Field& Field::operator*=(double a) {
  for (cplx& v : values) v *= a;
  return *this;
}

double SpectralField::l2_norm() const {
  double acc = 0.0;
  for (const cplx& v : values) acc += std::norm(v);
  return std::sqrt(acc * coeff_weight());
}

SpectralField partial_ft_x(const Field& f) {
  if (!f.grid.periodic) throw ConfigurationError("partial_ft_x needs a periodic grid");
  f.grid.validate();
  SpectralField out;
  out.grid = f.grid;
  out.axis = f.axis;
  out.dom = f.dom;
  out.values = f.values;
  const double scale = std::pow(f.grid.h(), f.grid.d);
  const std::int64_t sp = f.spatial();
  for (std::int64_t slice = 0; slice < f.slices(); ++slice) {
    cplx* block = out.values.data() + slice * sp;
    FftEngine::instance().dft(f.grid.d, f.grid.nx, block, FFTW_FORWARD);
    for (std::int64_t k = 0; k < sp; ++k)
      block[k] *= scale * checkerboard_sign(f.grid, k);
  }
  return out;
}

Field inverse_ft_x(const SpectralField& f) {
  Field out;
  out.grid = f.grid;
  out.axis = f.axis;
  out.dom = f.dom;
  out.values = f.values;
  const double scale = std::pow(2.0 * f.grid.X, -f.grid.d);
  const std::int64_t sp = f.spatial();
  for (std::int64_t slice = 0; slice < f.slices(); ++slice) {
    cplx* block = out.values.data() + slice * sp;
    for (std::int64_t k = 0; k < sp; ++k)
      block[k] *= scale * checkerboard_sign(f.grid, k);
    FftEngine::instance().dft(f.grid.d, f.grid.nx, block, FFTW_BACKWARD);
  }
  return out;
}

Field apply_multiplier(const Field& f, const std::function<double(const Vec&)>& m) {
  return apply_multiplier(
      f, std::function<cplx(const Vec&, double)>(
             [&m](const Vec& xi, double) { return cplx(m(xi), 0.0); }));
}

Field apply_multiplier(const Field& f,
                       const std::function<cplx(const Vec&, double)>& m) {
  SpectralField sf = partial_ft_x(f);
  const std::int64_t sp = sf.spatial();
  for (std::int64_t slice = 0; slice < sf.slices(); ++slice) {
    const double coord = sf.dom.point(static_cast<int>(slice));
    for (std::int64_t k = 0; k < sp; ++k)
      sf.at(slice, k) *= m(xi_at(sf.grid, k), coord);
  }
  return inverse_ft_x(sf);
}

// ---------------------------------------------------------------------------
// Fractional s-derivative
// ---------------------------------------------------------------------------

namespace {

Field zero_pad_s(const Field& f) {
  if (f.dom.lo == -2.0 && f.dom.hi == 2.0) return f;
  if (!(f.dom.lo == -1.0 && f.dom.hi == 1.0))
    throw ConfigurationError("fractional_s_derivative: axis domain must be I or [-2,2]");
  Field out = make_field(f.grid, f.axis, padded_s_domain(2 * f.dom.n));
  const std::int64_t sp = f.spatial();
  const std::int64_t offset = f.dom.n / 2;
  for (std::int64_t slice = 0; slice < f.slices(); ++slice)
    std::memcpy(out.values.data() + (slice + offset) * sp,
                f.values.data() + slice * sp, sizeof(cplx) * sp);
  return out;
}

}  // namespace

Field fractional_s_derivative(const Field& f, double order) {
  if (f.axis != Axis::s)
    throw ConfigurationError("fractional_s_derivative: axis_label must be s");
  if (!is_power_of_two(f.dom.n))
    throw ConfigurationError("fractional_s_derivative: slice count must be a power of two");
  Field padded = zero_pad_s(f);
  const std::int64_t ns = padded.slices();
  const std::int64_t sp = padded.spatial();
  const double period = padded.dom.hi - padded.dom.lo;  // = 4
  const double dsig = 2.0 * kPi / period;

  std::vector<double> mult(ns);
  for (std::int64_t j = 0; j < ns; ++j) {
    std::int64_t k = j;
    if (k >= ns / 2) k -= ns;
    mult[j] = std::pow(1.0 + std::abs(dsig * static_cast<double>(k)), order);
  }

  std::vector<cplx> line(ns);
  for (std::int64_t x = 0; x < sp; ++x) {
    for (std::int64_t j = 0; j < ns; ++j) line[j] = padded.values[j * sp + x];
    FftEngine::instance().dft(1, static_cast<int>(ns), line.data(), FFTW_FORWARD);
    for (std::int64_t j = 0; j < ns; ++j) line[j] *= mult[j] / static_cast<double>(ns);
    FftEngine::instance().dft(1, static_cast<int>(ns), line.data(), FFTW_BACKWARD);
    for (std::int64_t j = 0; j < ns; ++j) padded.values[j * sp + x] = line[j];
  }
  return padded;
}

Field restrict_to_I(const Field& f) {
  std::vector<int> keep;
  for (int j = 0; j < f.dom.n; ++j) {
    const double c = f.dom.point(j);
    if (c >= -1.0 && c <= 1.0) keep.push_back(j);
  }
  Field out = make_field(f.grid, f.axis,
                         AxisDomain{-1.0, 1.0, static_cast<int>(keep.size())});
  const std::int64_t sp = f.spatial();
  for (std::size_t i = 0; i < keep.size(); ++i)
    std::memcpy(out.values.data() + static_cast<std::int64_t>(i) * sp,
                f.values.data() + static_cast<std::int64_t>(keep[i]) * sp,
                sizeof(cplx) * sp);
  return out;
}

double mixed_norm(const Field& f, double p_x, double q_axis) {
  const std::int64_t sp = f.spatial();
  const std::int64_t ns = f.slices();
  const double wslice = f.dom.step();
  const double wx = std::pow(f.grid.h(), f.grid.d);

  std::vector<double> per_x(sp, 0.0);
  if (q_axis == 2.0) {
    for (std::int64_t j = 0; j < ns; ++j)
      for (std::int64_t x = 0; x < sp; ++x)
        per_x[x] += std::norm(f.values[j * sp + x]) * wslice;
    for (auto& v : per_x) v = std::sqrt(v);
  } else if (std::isinf(q_axis)) {
    for (std::int64_t j = 0; j < ns; ++j)
      for (std::int64_t x = 0; x < sp; ++x)
        per_x[x] = std::max(per_x[x], std::abs(f.values[j * sp + x]));
  } else {
    throw InvalidInputError("mixed_norm: q must be 2 or inf");
  }

  if (std::isinf(p_x)) {
    double m = 0.0;
    for (double v : per_x) m = std::max(m, v);
    return m;
  }
  if (p_x <= 0.0) throw InvalidInputError("mixed_norm: p must be positive");
  double acc = 0.0;
  for (double v : per_x) acc += std::pow(v, p_x) * wx;
  return std::pow(acc, 1.0 / p_x);
}

void fft_1d(cplx* data, int n, bool forward) {
  FftEngine::instance().dft(1, n, data, forward ? FFTW_FORWARD : FFTW_BACKWARD);
}

std::vector<double> max_over_axis(const Field& f, double lo, double hi) {
  const std::int64_t sp = f.spatial();
  std::vector<double> out(sp, 0.0);
  for (std::int64_t j = 0; j < f.slices(); ++j) {
    const double c = f.dom.point(static_cast<int>(j));
    if (c < lo || c > hi) continue;
    for (std::int64_t x = 0; x < sp; ++x)
      out[x] = std::max(out[x], std::abs(f.values[j * sp + x]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Factories
// ---------------------------------------------------------------------------

Field constant_field(const GridSpec& g, Axis axis, const AxisDomain& dom,
                     cplx value) {
  Field f = make_field(g, axis, dom);
  for (auto& v : f.values) v = value;
  return f;
}

Field plane_wave_field(const GridSpec& g, Axis axis, const AxisDomain& dom,
                       const std::vector<int>& k_index) {
  if (static_cast<int>(k_index.size()) != g.d)
    throw InvalidInputError("plane_wave_field: one index per axis");
  Field f = make_field(g, axis, dom);
  const std::int64_t sp = f.spatial();
  for (std::int64_t x = 0; x < sp; ++x) {
    const Vec pos = x_at(g, x);
    double phase = 0.0;
    for (int ax = 0; ax < g.d; ++ax)
      phase += pos[ax] * g.xi_spacing() * k_index[ax];
    const cplx val = std::exp(cplx(0.0, phase));
    for (std::int64_t j = 0; j < f.slices(); ++j) f.values[j * sp + x] = val;
  }
  return f;
}

Field random_bandlimited_field(const GridSpec& g, Axis axis,
                               const AxisDomain& dom, double band,
                               std::uint64_t seed) {
  SpectralField sf;
  sf.grid = g;
  sf.axis = axis;
  sf.dom = dom;
  sf.values.assign(static_cast<std::size_t>(dom.n) * g.spatial_points(), cplx(0, 0));
  const std::int64_t sp = sf.spatial();

  // Smooth trailing-axis profile: a handful of random low modes.
  Rng prof_rng = rng_stream(seed, 0xa);
  const int n_modes = 4;
  std::vector<double> amp(n_modes), ph(n_modes);
  for (int m = 0; m < n_modes; ++m) {
    amp[m] = prof_rng.normal();
    ph[m] = prof_rng.uniform(0.0, 2.0 * kPi);
  }
  Rng spec_rng = rng_stream(seed, 0xb);
  for (std::int64_t k = 0; k < sp; ++k) {
    const Vec xi = xi_at(g, k);
    if (xi.norm() > band) continue;
    const cplx base(spec_rng.normal(), spec_rng.normal());
    for (std::int64_t j = 0; j < sf.slices(); ++j) {
      const double c = sf.dom.point(static_cast<int>(j));
      double prof = 1.0;
      for (int m = 0; m < n_modes; ++m)
        prof += 0.3 * amp[m] * std::cos((m + 1) * kPi * c / 2.0 + ph[m]);
      sf.at(j, k) = base * prof;
    }
  }
  return inverse_ft_x(sf);
}

Field random_nonneg_field(const GridSpec& g, Axis axis, const AxisDomain& dom,
                          double band, std::uint64_t seed) {
  Field u = random_bandlimited_field(g, axis, dom, band / 2.0, seed);
  Field f = make_field(g, axis, dom);
  for (std::size_t i = 0; i < u.values.size(); ++i)
    f.values[i] = cplx(sq(u.values[i].real()), 0.0);
  const double m = f.max_abs();
  if (m > 0) f *= 1.0 / m;
  return f;
}

Field bump_field(const GridSpec& g, Axis axis, const AxisDomain& dom,
                 double spatial_width, double axis_width) {
  Field f = make_field(g, axis, dom);
  const std::int64_t sp = f.spatial();
  const double support = std::min(spatial_width, g.X - 1.0);
  for (std::int64_t x = 0; x < sp; ++x) {
    const Vec pos = x_at(g, x);
    double w = 1.0;
    for (int ax = 0; ax < g.d; ++ax)
      w *= smoothstep((support - std::abs(pos[ax])) / (0.5 * support));
    if (w == 0.0) continue;
    for (std::int64_t j = 0; j < f.slices(); ++j) {
      const double c = f.dom.point(static_cast<int>(j));
      const double wa = smoothstep((axis_width - std::abs(c)) / (0.5 * axis_width));
      f.values[j * sp + x] = cplx(w * wa, 0.0);
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'N', 'K', 'F', 'L', 'D', '0', '0', '1'};
}

void write_field(const Field& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigurationError("cannot open " + path + " for writing");
  out.write(kMagic, 8);
  const std::int32_t d = f.grid.d, nx = f.grid.nx, nslices = f.dom.n;
  const std::int32_t axis = f.axis == Axis::t ? 0 : 1;
  const double X = f.grid.X, lo = f.dom.lo, hi = f.dom.hi;
  out.write(reinterpret_cast<const char*>(&d), 4);
  out.write(reinterpret_cast<const char*>(&nx), 4);
  out.write(reinterpret_cast<const char*>(&nslices), 4);
  out.write(reinterpret_cast<const char*>(&axis), 4);
  out.write(reinterpret_cast<const char*>(&X), 8);
  out.write(reinterpret_cast<const char*>(&lo), 8);
  out.write(reinterpret_cast<const char*>(&hi), 8);
  out.write(reinterpret_cast<const char*>(f.values.data()),
            static_cast<std::streamsize>(sizeof(cplx) * f.values.size()));
  if (!out) throw ConfigurationError("short write to " + path);

  std::ofstream side(path + ".json");
  side << "{\"format\":\"NKFLD001\",\"d\":" << d << ",\"X\":" << format_double(X)
       << ",\"nx\":" << nx << ",\"nt\":" << nslices << ",\"axis\":\""
       << (axis == 0 ? "t" : "s") << "\",\"dtype\":\"c128\",\"domain\":["
       << format_double(lo) << "," << format_double(hi) << "]}\n";
}

Field read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigurationError("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw ConfigurationError(path + ": bad field header");
  std::int32_t d, nx, nslices, axis;
  double X, lo, hi;
  in.read(reinterpret_cast<char*>(&d), 4);
  in.read(reinterpret_cast<char*>(&nx), 4);
  in.read(reinterpret_cast<char*>(&nslices), 4);
  in.read(reinterpret_cast<char*>(&axis), 4);
  in.read(reinterpret_cast<char*>(&X), 8);
  in.read(reinterpret_cast<char*>(&lo), 8);
  in.read(reinterpret_cast<char*>(&hi), 8);
  GridSpec g;
  g.d = d;
  g.X = X;
  g.nx = nx;
  g.nt = nslices;
  Field f = make_field(g, axis == 0 ? Axis::t : Axis::s,
                       AxisDomain{lo, hi, nslices});
  in.read(reinterpret_cast<char*>(f.values.data()),
          static_cast<std::streamsize>(sizeof(cplx) * f.values.size()));
  if (!in) throw ConfigurationError(path + ": truncated field payload");
  return f;
}

}  // namespace nikodym
