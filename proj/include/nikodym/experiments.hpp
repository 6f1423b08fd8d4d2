#pragma once

// Empirical operator-norm estimation (random / adversarial / power-iteration
// witnesses), the two sharpness constructions, scaling-law fits, the
// Sobolev-embedding uniformity check and the full decomposition audit
// pipeline.

#include "nikodym/common.hpp"
#include "nikodym/curve.hpp"
#include "nikodym/cutoffs.hpp"
#include "nikodym/field.hpp"
#include "nikodym/operators.hpp"
#include "nikodym/symbol.hpp"

#include <memory>

namespace nikodym {

// ---------------------------------------------------------------------------
// Norm estimation
// ---------------------------------------------------------------------------

struct OperatorSpec {
  enum class Kind { Multiplier, AveragingFio, FractionalFio, Maximal };
  Kind kind = Kind::Multiplier;
  std::string id;
  Curve curve;
  Symbol symbol;    // fio kinds
  GridSpec grid;
  int nt = 32;
  int ns = 128;
  double delta = 0.125;                        // maximal kind
  std::function<double(const Vec&)> multiplier;  // multiplier kind
};

enum class NormStrategy { Random, Adversarial, PowerIteration };

struct NormEstimate {
  std::string op_id;
  double p = 2.0, q = 2.0;
  NormStrategy strategy = NormStrategy::Random;
  double value = 0.0;  // certified lower bound, achieved by the witness
  int trials = 0;
  std::uint64_t seed = 0;
  std::string witness;           // descriptor (JSON fragment)
  std::uint64_t witness_hash = 0;
  std::function<double()> reevaluate;  // recomputes value from the witness
  std::vector<double> rayleigh;        // power iteration history

  std::string to_json() const;
};

NormEstimate empirical_norm(const OperatorSpec& op, double p, double q,
                            NormStrategy strategy, int trials,
                            std::uint64_t seed,
                            const ParallelContext& ctx = ParallelContext::serial());

// Discrete operator norm of the per-frequency block of A[a] (optionally with
// the fractional multiplier), maximized over sampled supp_xi(a).
double fio_block_norm_scan(const Symbol& a, const Curve& curve, int xi_samples,
                           int ns, int nt, bool fractional = false);

// ---------------------------------------------------------------------------
// Scaling fits
// ---------------------------------------------------------------------------

struct ScalingFit {
  std::vector<double> x;  // log log delta^-1 (or log log lambda)
  std::vector<double> y;  // log norm
  LineFit fit;
  double claimed_exponent = 0.0;
  double slack = 0.25;
  bool upper_bound_claim = true;
  bool pass = false;
  std::string to_json() const;
};

// Least-squares slope of log(norm) against log(log scale); pass when the
// slope is consistent with the claimed exponent within the slack.
ScalingFit scaling_law_fit(const std::vector<double>& log_scales,
                           const std::vector<double>& norms,
                           double claimed_exponent, double slack = 0.25,
                           bool upper_bound_claim = true);

// ---------------------------------------------------------------------------
// Maximal-function probing (shared by the sharpness experiments)
// ---------------------------------------------------------------------------

struct LevelScan {
  std::vector<double> level_measure;  // k -> |{2^-(k+1) < Ng <= 2^-k}| (abs.)
  double integral_sq = 0.0;           // int (Ng)^2 dx
  double max_value = 0.0;
  double superlevel_measure = 0.0;    // |{Ng >= threshold}|
  double threshold = 0.0;
  std::int64_t cells = 0;
  double cell_volume = 0.0;
};

// Stratified (jittered-cell) probing of the maximal function over the given
// box. Deterministic in (seed); parallel over cell chunks.
LevelScan scan_maximal(const MaximalEvaluator& ev, const Vec& box_lo,
                       const Vec& box_hi, int levels,
                       double superlevel_threshold, double cell,
                       std::uint64_t seed, const ParallelContext& ctx);

// ---------------------------------------------------------------------------
// Sharpness experiments
// ---------------------------------------------------------------------------

struct RangeSharpnessPoint {
  double delta = 0.0;
  double level = 0.0;              // c delta used for the superlevel set
  double superlevel_measure = 0.0;
  double measure_ratio = 0.0;      // measure / delta^(d-1)
  double neighborhood_hit_rate = 0.0;  // fraction of -gamma probes in the set
  double max_value = 0.0;
};

struct RangeSharpnessReport {
  int d = 0;
  double p = 2.0;
  std::vector<RangeSharpnessPoint> points;
  // slopes of log(level) and log(measure) against log(delta)
  double value_slope = 0.0;
  double measure_slope = 0.0;
  double implied_p_min = 0.0;  // (d + 1 - measure_slope) / value_slope
  bool pass = false;
  std::string to_json() const;
};

RangeSharpnessReport sharpness_range_experiment(
    const Curve& curve, const std::vector<double>& deltas, double p,
    std::uint64_t seed, const ParallelContext& ctx,
    std::int64_t max_cells = 1 << 20);

struct LogSharpnessReport {
  double delta = 0.0;
  double p = 2.0;
  int levels = 0;  // k = 0..levels
  std::vector<double> level_measure;
  std::vector<double> level_c;     // measure / (4^k delta^d)
  double min_c = 0.0;
  double dyadic_sum = 0.0;         // sum 4^-(k+1) |A_k|
  double chain_rhs = 0.0;          // int (Nf)^2 (>= dyadic_sum by construction)
  double norm_lower_bound = 0.0;   // ||Nf||_p / ||f||_p
  bool chain_ok = false;
  bool degenerate = false;         // empty k-range marker (delta too large)
  std::string to_json() const;
};

LogSharpnessReport sharpness_log_experiment(const Curve& curve, double delta,
                                            double p, const Vec& x0,
                                            double r_param, std::uint64_t seed,
                                            const ParallelContext& ctx,
                                            std::int64_t max_cells = 1 << 21);

struct LogSharpnessSweep {
  std::vector<LogSharpnessReport> reports;
  ScalingFit exponent_fit;  // log(norm lower bound) vs log(log delta^-1)
  std::string to_json() const;
};

LogSharpnessSweep sharpness_log_sweep(const Curve& curve,
                                      const std::vector<double>& deltas,
                                      double p, std::uint64_t seed,
                                      const ParallelContext& ctx);

// Lower bounds for ||N_delta||_{L2 -> L2} from the adversarial family (ball
// and tube witnesses); used by the main trend experiment.
struct MaximalNormPoint {
  double delta = 0.0;
  double value = 0.0;     // best achieved ratio
  std::string witness;    // which family achieved it
  double ball_value = 0.0;
  double tube_value = 0.0;
};

struct TrendReport {
  std::vector<MaximalNormPoint> points;
  ScalingFit fit;
  std::string to_json() const;
};

TrendReport theorem1_trend(const Curve& curve, const std::vector<double>& deltas,
                           double claimed_exponent, double slack,
                           std::uint64_t seed, const ParallelContext& ctx);

// ---------------------------------------------------------------------------
// Sobolev-embedding uniformity
// ---------------------------------------------------------------------------

struct SobolevRow {
  double delta = 0.0;
  int field_index = 0;
  double lhs = 0.0;      // || N[a_delta] g ||_{L2_x Linf_s}
  double dnorm = 0.0;    // || D_s A g ||_2
  double gnorm = 0.0;    // || g ||_2
  double c_fit = 0.0;    // lhs / (sqrt(log 1/delta) dnorm + gnorm)
};

struct SobolevReport {
  std::vector<SobolevRow> rows;
  std::vector<double> deltas;
  std::vector<double> c_per_delta;  // max over fields
  double ratio = 0.0;               // max / min over delta
  bool pass = false;                // ratio <= 2
  std::string to_json() const;
};

SobolevReport sobolev_embedding_check(const Curve& curve,
                                      std::shared_ptr<const CutoffLibrary> lib,
                                      const std::vector<double>& deltas,
                                      int fields_per_delta, std::uint64_t seed,
                                      const ParallelContext& ctx);

// ---------------------------------------------------------------------------
// Decomposition audit pipeline
// ---------------------------------------------------------------------------

struct PipelineStage {
  std::string name;
  bool ran = false;
  bool pass = false;
  std::string details;  // JSON fragment
};

struct PipelineOptions {
  double delta = 0.0;        // 0: use 1/(8 lambda)
  int samples = 1024;
  double eps1_over_eps0 = 4.0;
  double rho_cap = 0.5;
  double count_budget = 2.0;      // shells <= budget * max(1, log2 lambda)
  double spread_budget_scale = 4096.0;
  std::uint64_t seed = 1;
};

struct PipelineReport {
  std::string curve_name;
  double lambda = 0.0;
  int order = 0;
  double eps0 = 0.0, eps1 = 0.0, a_prime = 0.0, measured_A = 0.0;
  int shell_count = 0;
  int rep_n = -1;
  long rep_nu = 0;
  double rep_rho = 0.0;
  std::vector<PipelineStage> stages;
  bool all_pass = false;
  std::string failed_stage;  // empty when everything ran clean
  std::string to_json() const;
};

PipelineReport decomposition_audit_pipeline(
    const Curve& curve, double lambda, int order,
    std::shared_ptr<const CutoffLibrary> lib, const PipelineOptions& opt = {},
    const ParallelContext& ctx = ParallelContext::serial());

// Shell count only (for the lambda-sweep bound count <= C log lambda).
int shell_count_at_lambda(const Curve& curve, double lambda, int order,
                          std::shared_ptr<const CutoffLibrary> lib,
                          const PipelineOptions& opt = {});

// ---------------------------------------------------------------------------
// Anisotropic admissibility + the isotropic sandwich
// ---------------------------------------------------------------------------

struct AnisoFamilyRow {
  std::string family;  // "uniform" (delta,...,delta) or "graded" (delta^j)
  double delta = 0.0;
  bool admissible = false;
  std::string violation;
};

struct AnisoReport {
  std::vector<AnisoFamilyRow> rows;
  // iso(delta) subset aniso-box(delta,..) subset iso(delta sqrt(d))
  int sandwich_samples = 0;
  int inner_failures = 0;
  int outer_failures = 0;
  bool pass = false;
  std::string to_json() const;
};

AnisoReport aniso_admissibility_report(const Curve& curve,
                                       const std::vector<double>& deltas,
                                       double sandwich_delta,
                                       int sandwich_samples,
                                       std::uint64_t seed);

// ---------------------------------------------------------------------------
// Tube intersection volume law
// ---------------------------------------------------------------------------

struct TubeVolumeRow {
  int pair = 0;
  int d = 0;
  double delta = 0.0;
  double gap = 0.0;   // |gamma(r) - gamma(s)|
  double mc = 0.0;
  double se = 0.0;
  double predicted = 0.0;
  double ratio = 0.0;
};

struct TubeVolumeReport {
  std::vector<TubeVolumeRow> rows;
  // per-dimension geometric-mean calibration constant and worst deviation
  double constant_d2 = 0.0, spread_d2 = 0.0;
  double constant_d3 = 0.0, spread_d3 = 0.0;
  bool pass = false;  // every ratio within factor 4 of its dimension constant
  std::string to_json() const;
};

TubeVolumeReport tube_volume_report(std::int64_t samples_per_pair,
                                    std::uint64_t seed,
                                    const ParallelContext& ctx);

}  // namespace nikodym
