#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rbm/geometry.hpp"
#include "rbm/simulator.hpp"
#include "rbm/test_functions.hpp"
#include "rbm/vec2.hpp"

namespace rbm {

struct EstimateReport {
  double estimate = 0.0;
  double std_error = 0.0;
  std::pair<double, double> ci95{0.0, 0.0};
  std::size_t n = 0;
  std::string theorem_tag;
};

// Sample mean with its standard error and a normal 95% interval.
EstimateReport mean_report(std::span<const double> samples, std::string tag = {});

// Mean of weights[i] * values[i], e.g. a Girsanov-reweighted expectation.
EstimateReport weighted_mean_report(std::span<const double> values, std::span<const double> weights,
                                    std::string tag = {});

// Independent seed for a second batch that must not share streams with the
// first (splitmix64 of seed ^ salt).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

// ---------------------------------------------------------------------------
// Vertex hitting

struct HittingReport {
  EstimateReport primary;     // radius eps_vertex
  EstimateReport half_eps;    // radius eps_vertex / 2
  double eps_vertex = 0.0;
  std::vector<double> horizons;
  std::vector<EstimateReport> by_horizon;  // radius eps_vertex, hit before each horizon
  bool vertex_attraction = false;          // only meaningful when alpha >= 1
};

// Fraction of absorbed-mode paths that enter the eps_vertex ball before T,
// reported alongside the eps_vertex / 2 sensitivity run and the curve over
// `horizons` (each <= cfg.T). One simulation pass serves all of them: the
// paths coincide up to the first entry into the larger ball.
HittingReport estimate_hitting_probability(const SimConfig& cfg,
                                           std::span<const double> horizons = {});

// Label describing what the hitting theorems predict for this geometry and drift.
std::string hitting_theorem_tag(const WedgeGeometry& g, const Vec2& mu);

// ---------------------------------------------------------------------------
// Boundary occupation

// Fraction of [0, T] (left Riemann sum on the path grid) spent within
// distance delta of the boundary.
double boundary_occupation_fraction(const PathSample& path, const WedgeGeometry& g, double delta);

EstimateReport estimate_boundary_occupation(std::span<const PathSample> paths,
                                            const WedgeGeometry& g, double delta);

// One streaming pass over cfg's paths for several deltas.
std::vector<EstimateReport> occupation_sweep(const SimConfig& cfg, std::span<const double> deltas);

// ---------------------------------------------------------------------------
// p-variation along dyadic partitions

enum class Verdict { stabilizing, diverging, inconclusive };
std::string_view to_string(Verdict v);

struct VariationSweep {
  double p = 1.0;
  std::vector<int> mesh_levels;
  std::vector<double> values;  // per-level median over paths
  std::vector<double> means;   // per-level mean over paths
  Verdict verdict = Verdict::inconclusive;
};

// Sum over the 2^level cells of the dyadic sub-grid of |y(t_i) - y(t_{i-1})|^p.
// y.size() - 1 must be a multiple of 2^level.
double p_variation(std::span<const Vec2> y, double p, int level);

// Growth verdict over the last 4 levels (3 successive ratios): diverging if
// every ratio exceeds 1 + margin, stabilizing if none does.
Verdict growth_verdict(std::span<const double> values, double margin);

// Decay verdict over the last 4 levels: stabilizing (tending to zero) if
// strictly decreasing, diverging if nondecreasing.
Verdict decay_verdict(std::span<const double> values);

// Summarizes per-path tables (table[path][level]).
VariationSweep summarize_growth(double p, std::span<const int> levels,
                                const std::vector<std::vector<double>>& table, double margin);
VariationSweep summarize_decay(double p, std::span<const int> levels,
                               const std::vector<std::vector<double>>& table);

// Per-path V_p tables, indexed [p][path][level], from one streaming pass.
// cfg.steps() must be a multiple of 2^(max level).
std::vector<std::vector<std::vector<double>>> variation_tables(const SimConfig& cfg,
                                                               std::span<const double> ps,
                                                               std::span<const int> levels);

// V_p sweeps for several exponents from one batch of cfg's paths. Requires
// 1 < alpha < 2 (RegimeError otherwise).
std::vector<VariationSweep> variation_sweep(const SimConfig& cfg, std::span<const double> ps,
                                            std::span<const int> levels, double margin = 0.1);

// Zero-energy sweep (p = 2) over arbitrary sampled series, e.g. Y or X paths.
VariationSweep zero_energy_sweep(std::span<const std::vector<Vec2>> series,
                                 std::span<const int> levels);
VariationSweep zero_energy_sweep(std::span<const PathSample> paths, std::span<const int> levels);
// Streaming form for a config; requires 1 < alpha < 2.
VariationSweep zero_energy_sweep(const SimConfig& cfg, std::span<const int> levels);

// ---------------------------------------------------------------------------
// Submartingale diagnostic

struct SubmartingaleReport {
  double min_z = 0.0;
  std::size_t argmin_s = 0;  // grid positions of the worst pair
  std::size_t argmin_t = 0;
  std::vector<double> grid_times;
  std::vector<double> mean_M;  // mean of M at each grid time
  std::size_t n = 0;
};

// M(t) = f(Z(t)) - int_0^t mu . grad f(Z) ds - 1/2 int_0^t lap f(Z) ds at the
// requested grid indices (left Riemann sums).
std::vector<double> martingale_functional(const PathSample& path, const TestFunction& f,
                                          const Vec2& mu, std::span<const std::size_t> grid);

// Minimum over grid pairs s < t of mean(M(t) - M(s)) / standard error of the
// paired differences. Throws CertificateError for uncertified f unless
// allow_uncertified is set.
SubmartingaleReport submartingale_check(const std::vector<std::vector<double>>& m_values,
                                        std::span<const double> grid_times);
SubmartingaleReport submartingale_check(std::span<const PathSample> paths, const TestFunction& f,
                                        const Vec2& mu, std::span<const std::size_t> grid,
                                        bool allow_uncertified = false);
// Streaming form with `grid_points` equally spaced times in [0, T].
SubmartingaleReport submartingale_check(const SimConfig& cfg, const TestFunction& f,
                                        std::size_t grid_points = 20,
                                        bool allow_uncertified = false);

// ---------------------------------------------------------------------------
// Feller / scaling

// Squared energy distance 2E|A-B| - E|A-A'| - E|B-B'| (U-statistic form).
double energy_distance(std::span<const Vec2> a, std::span<const Vec2> b, unsigned threads = 0);

// Z(T) for every path of cfg.
std::vector<Vec2> terminal_samples(const SimConfig& cfg);

// Energy distance between Z(t) started at z_a and at z_b; the two batches
// use independent streams.
double feller_distance(const SimConfig& cfg, const Vec2& z_a, const Vec2& z_b, double t);

// Width of the same-law null band in standard deviations. The null
// distribution is right-skewed (weighted chi-square), so 4 sd keeps the
// false-rejection rate near 1%.
inline constexpr double kNullSigmas = 4.0;

// Same-law null: mean + kNullSigmas sd of `replicates` energy distances
// between independent batches started at z.
double energy_null_threshold(const SimConfig& cfg, const Vec2& z, double t, std::size_t replicates);

struct FellerTrend {
  std::vector<int> k;
  std::vector<double> distances;
  double null_threshold = 0.0;
  bool decreasing = false;
};

// Distances between starts z and z + (2^-k, 0), k = 1..k_max. `decreasing`
// holds when each distance is below its predecessor or already inside the
// null band.
FellerTrend feller_trend(const SimConfig& cfg, const Vec2& z, int k_max, double t,
                         std::size_t null_replicates = 20);

struct ScalingCheck {
  double distance = 0.0;
  double null_threshold = 0.0;
  bool passed = false;
};

// Driftless scaling: Z(t) from x against |x| Z(t / |x|^2) from x / |x|, the
// second run using step dt / |x|^2. Requires mu = 0.
ScalingCheck scaling_check(const SimConfig& cfg, const Vec2& x, double t,
                           std::size_t null_replicates = 20);

// ---------------------------------------------------------------------------
// Girsanov

struct GirsanovCheck {
  EstimateReport reweighted;  // E_0[zeta(T) g]
  EstimateReport direct;      // E_mu[g]
  double z_score = 0.0;       // difference over the combined standard error
};

// Compares E_0[zeta(T) g(Z(T))] with E_mu[g(Z(T))] on independent batches.
template <class G>
GirsanovCheck girsanov_cross_check(const SimConfig& cfg, const Vec2& mu, G&& g);

// ---------------------------------------------------------------------------
// Y-flatness

// Total |increment of R eta + free_push| accumulated strictly inside the
// grid excursions [sigma_k, tau_k): sigma_k is the first entry into S_{2 delta}
// after tau_{k-1}, tau_k the first subsequent exit from S_delta.
double flatness_audit(const PathSample& path, const WedgeGeometry& g, double delta);

// ---------------------------------------------------------------------------

namespace detail {

struct FreeAndConstrainedEnd {
  Vec2 x0, x, z;
};

std::vector<FreeAndConstrainedEnd> terminal_states(const SimConfig& cfg);

}  // namespace detail

template <class G>
GirsanovCheck girsanov_cross_check(const SimConfig& cfg, const Vec2& mu, G&& g) {
  SimConfig driftless = cfg;
  driftless.mu = {};
  SimConfig drifted = cfg;
  drifted.mu = mu;
  drifted.seed = derive_seed(cfg.seed, 0x6769727361ULL);

  const auto a = detail::terminal_states(driftless);
  const auto b = detail::terminal_states(drifted);
  std::vector<double> ga(a.size()), wa(a.size()), gb(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ga[i] = g(a[i].z);
    wa[i] = girsanov_weight(a[i].x - a[i].x0, mu, cfg.T);
  }
  for (std::size_t i = 0; i < b.size(); ++i) gb[i] = g(b[i].z);

  GirsanovCheck out;
  out.reweighted = weighted_mean_report(ga, wa, "E_0[zeta(T) g]");
  out.direct = mean_report(gb, "E_mu[g]");
  const double se = std::sqrt(out.reweighted.std_error * out.reweighted.std_error +
                              out.direct.std_error * out.direct.std_error);
  const double diff = out.reweighted.estimate - out.direct.estimate;
  if (se > 0.0) {
    out.z_score = diff / se;
  } else {
    out.z_score = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  }
  return out;
}

}  // namespace rbm
