#include "nikodym/common.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <thread>

namespace nikodym {

double unit_ball_volume(int d) {
  if (d < 0) throw InvalidInputError("unit_ball_volume: d must be >= 0");
  return std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

namespace {
inline double flat_exp(double u) {
  return u > 0.0 ? std::exp(-1.0 / u) : 0.0;
}
}  // namespace

double smoothstep(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double a = flat_exp(u);
  const double b = flat_exp(1.0 - u);
  return a / (a + b);
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t Rng::next() {
  // xorshift* seeded through splitmix; period is ample for desk-scale MC.
  state_ = splitmix64(state_);
  return state_;
}

double Rng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * kPi * u2;
  spare_ = r * std::sin(th);
  have_spare_ = true;
  return r * std::cos(th);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw InvalidInputError("Rng::below(0)");
  return next() % n;
}

Rng rng_stream(std::uint64_t seed, std::uint64_t stream) {
  return Rng(splitmix64(seed ^ splitmix64(stream + 0x51ed2701ULL)));
}

double halton(std::uint64_t index, std::uint32_t base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

std::vector<double> halton_point(std::uint64_t index, int dims) {
  static const std::uint32_t primes[] = {2,  3,  5,  7,  11, 13,
                                         17, 19, 23, 29, 31, 37};
  if (dims > static_cast<int>(sizeof(primes) / sizeof(primes[0])))
    throw InvalidInputError("halton_point: too many dimensions");
  std::vector<double> p(dims);
  for (int i = 0; i < dims; ++i) p[i] = halton(index, primes[i]);
  return p;
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const auto* b = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t h) {
  return fnv1a(s.data(), s.size(), h);
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw InvalidInputError("fit_line: need >= 2 points of equal length");
  const int n = static_cast<int>(x.size());
  double sx = 0, sy = 0;
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw InvalidInputError("fit_line: degenerate abscissae");
  LineFit out;
  out.n = n;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  double ss_res = 0, ss_tot = 0;
  for (int i = 0; i < n; ++i) {
    const double fit = out.intercept + out.slope * x[i];
    ss_res += (y[i] - fit) * (y[i] - fit);
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  out.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  out.slope_stderr =
      n > 2 ? std::sqrt(ss_res / (n - 2) / sxx) : 0.0;
  return out;
}

ParallelContext ParallelContext::hardware() {
  const unsigned hc = std::thread::hardware_concurrency();
  return ParallelContext{hc == 0 ? 1 : static_cast<int>(hc)};
}

void parallel_for(const ParallelContext& ctx, std::int64_t n,
                  const std::function<void(std::int64_t)>& body) {
  if (n <= 0) return;
  const int workers = std::max(1, std::min<std::int64_t>(ctx.workers, n));
  if (workers == 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::int64_t> cursor{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::int64_t i = cursor.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::string(buf);
}

}  // namespace nikodym
