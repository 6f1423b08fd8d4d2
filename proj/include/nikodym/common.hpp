#pragma once

// Shared scalar utilities: errors, deterministic RNG streams, low-discrepancy
// sampling, least-squares fits and a small worker pool.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nikodym {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct InvalidInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigurationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EvaluationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a Gram-Schmidt pivot (or a derivative span) collapses; names the
// failing derivative order.
struct DegeneracyError : std::runtime_error {
  int order;
  DegeneracyError(int failing_order, const std::string& msg)
      : std::runtime_error(msg), order(failing_order) {}
};

// Raised when a doubling search for a symbol constant exhausts its budget.
struct CalibrationError : std::runtime_error {
  std::string worst_point;
  CalibrationError(const std::string& msg, std::string worst)
      : std::runtime_error(msg + " [worst point: " + worst + "]"),
        worst_point(std::move(worst)) {}
};

// ---------------------------------------------------------------------------
// Scalars
// ---------------------------------------------------------------------------

// Volume of the unit ball in R^d.
double unit_ball_volume(int d);

// C^infty step: 0 for u <= 0, 1 for u >= 1, and S(u) + S(1-u) = 1.
double smoothstep(double u);

inline double sq(double x) { return x * x; }

bool is_power_of_two(int n);

// ---------------------------------------------------------------------------
// Deterministic RNG
// ---------------------------------------------------------------------------

// Stream-splittable generator. Distributions are hand-rolled from raw bits so
// output is identical across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) { next(); next(); }

  std::uint64_t next();

  // Uniform in [0, 1).
  double uniform();
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  // Standard normal (Box-Muller, stateless pairs).
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Independent stream keyed by (seed, stream index); order-independent.
Rng rng_stream(std::uint64_t seed, std::uint64_t stream);

std::uint64_t splitmix64(std::uint64_t x);

// ---------------------------------------------------------------------------
// Low-discrepancy sampling
// ---------------------------------------------------------------------------

// Halton radical inverse for 1-based index.
double halton(std::uint64_t index, std::uint32_t base);

// First dims entries of the Halton sequence point #index (bases 2,3,5,...).
std::vector<double> halton_point(std::uint64_t index, int dims);

// ---------------------------------------------------------------------------
// Hashing (FNV-1a, used for config/content hashes)
// ---------------------------------------------------------------------------

std::uint64_t fnv1a(const void* data, std::size_t n,
                    std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hash_hex(std::uint64_t h);

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r2 = 0.0;
  int n = 0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// Parallelism
// ---------------------------------------------------------------------------

// Modules receive a context, never raw threads. Results must be written to
// index-addressed slots so reductions stay deterministic.
struct ParallelContext {
  int workers = 1;
  static ParallelContext serial() { return ParallelContext{1}; }
  static ParallelContext hardware();
};

void parallel_for(const ParallelContext& ctx, std::int64_t n,
                  const std::function<void(std::int64_t)>& body);

// Deterministic text formatting for CSV/JSON payloads ("%.12g").
std::string format_double(double v);

}  // namespace nikodym
