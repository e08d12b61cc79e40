#include <doctest.h>

#include <cmath>
#include <vector>

#include "rbm/errors.hpp"
#include "rbm/estimators.hpp"
#include "rbm/rng.hpp"
#include "rbm/test_functions.hpp"

using namespace rbm;

namespace {

SimConfig alpha_half() {
  SimConfig c;
  c.geometry = build_wedge(kPi / 2, kPi / 8, kPi / 8);
  c.mu = {0.1, 0.1};
  c.z0 = {1.0, 0.5};
  c.T = 1.0;
  c.dt = 1e-3;
  c.n_paths = 64;
  c.seed = 17;
  c.threads = 2;
  return c;
}

std::vector<Vec2> gaussian_cloud(const Vec2& centre, double scale, std::size_t n, std::uint64_t stream) {
  const GaussianStream g(99, stream);
  std::vector<Vec2> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = centre + scale * g(i);
  return out;
}

// Direct O(n^2) evaluation of the U-statistic.
double energy_bruteforce(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (const Vec2& p : a)
    for (const Vec2& q : b) ab += norm(p - q);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if (i != j) aa += norm(a[i] - a[j]);
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      if (i != j) bb += norm(b[i] - b[j]);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  return 2.0 * ab / (na * nb) - aa / (na * (na - 1)) - bb / (nb * (nb - 1));
}

}  // namespace

TEST_CASE("p_variation on hand-computed series") {
  const std::vector<Vec2> constant(17, Vec2{0.4, 0.2});
  for (int level = 0; level <= 4; ++level) CHECK(p_variation(constant, 1.5, level) == 0.0);

  const std::vector<Vec2> jump{{0.0, 0.0}, {1.0, 0.0}};
  CHECK(p_variation(jump, 2.0, 0) == doctest::Approx(1.0));

  const std::vector<Vec2> two{{0.0, 0.0}, {0.3, 0.0}, {0.3, 0.4}};
  CHECK(p_variation(two, 1.0, 1) == doctest::Approx(0.7));
  CHECK(p_variation(two, 1.0, 0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(p_variation(two, 1.0, 2), PreconditionError);
}

TEST_CASE("verdict rules") {
  const std::vector<double> growing{1, 1, 1.2, 1.44, 1.73, 2.08};
  const std::vector<double> flat{5, 4, 3.9, 3.95, 3.92, 3.9};
  const std::vector<double> mixed{1, 1.5, 1.5, 2.0};
  CHECK(growth_verdict(growing, 0.1) == Verdict::diverging);
  CHECK(growth_verdict(flat, 0.1) == Verdict::stabilizing);
  CHECK(growth_verdict(mixed, 0.1) == Verdict::inconclusive);
  CHECK(growth_verdict(std::vector<double>{0, 0, 0, 0}, 0.1) == Verdict::stabilizing);

  CHECK(decay_verdict(std::vector<double>{9, 4, 2, 1, 0.5}) == Verdict::stabilizing);
  CHECK(decay_verdict(std::vector<double>{1, 1, 2, 3}) == Verdict::diverging);
  CHECK(decay_verdict(std::vector<double>{3, 2, 2.5, 1}) == Verdict::inconclusive);
  CHECK(to_string(Verdict::diverging) == "diverging");
}

TEST_CASE("zero-energy sweep: Y identically zero and the Brownian contrast") {
  const std::vector<int> levels{4, 5, 6, 7, 8};
  const std::size_t n = 1u << 8;
  std::vector<std::vector<Vec2>> zeros(3, std::vector<Vec2>(n + 1));
  const VariationSweep z = zero_energy_sweep(zeros, levels);
  for (double v : z.values) CHECK(v == 0.0);
  CHECK(z.verdict == Verdict::stabilizing);

  // Quadratic variation of planar Brownian motion on [0, T] is 2T.
  const double T = 1.5;
  const double h = T / static_cast<double>(n);
  std::vector<std::vector<Vec2>> bm(400, std::vector<Vec2>(n + 1));
  for (std::size_t i = 0; i < bm.size(); ++i) {
    const GaussianStream g(5, i);
    for (std::size_t k = 1; k <= n; ++k) bm[i][k] = bm[i][k - 1] + std::sqrt(h) * g(k - 1);
  }
  const VariationSweep x = zero_energy_sweep(bm, levels);
  for (double m : x.means) CHECK(m == doctest::Approx(2.0 * T).epsilon(0.05));
  CHECK(x.verdict != Verdict::stabilizing);
}

TEST_CASE("variation sweep requires 1 < alpha < 2") {
  SimConfig c = alpha_half();
  c.dt = 1.0 / 256;
  const std::vector<double> ps{1.0};
  const std::vector<int> levels{4, 5, 6, 7, 8};
  CHECK_THROWS_AS(variation_sweep(c, ps, levels), RegimeError);
}

TEST_CASE("boundary occupation limits") {
  SimConfig c = alpha_half();
  c.z0 = {40.0, 40.0};
  c.mu = {};
  c.n_paths = 8;
  const auto deep = batch_simulate(c);
  CHECK(estimate_boundary_occupation(deep, c.geometry, 0.5).estimate == 0.0);
  CHECK(estimate_boundary_occupation(deep, c.geometry, 1000.0).estimate == 1.0);
  CHECK(boundary_occupation_fraction(deep.front(), c.geometry, 0.5) == 0.0);

  const std::vector<double> deltas{0.5, 0.0};
  CHECK_THROWS(occupation_sweep(alpha_half(), deltas));
}

TEST_CASE("occupation sweep agrees with the per-path fraction") {
  const SimConfig c = alpha_half();
  const auto paths = batch_simulate(c);
  const std::vector<double> deltas{0.2, 0.05};
  const auto sweep = occupation_sweep(c, deltas);
  for (std::size_t j = 0; j < deltas.size(); ++j) {
    CHECK(sweep[j].estimate ==
          doctest::Approx(estimate_boundary_occupation(paths, c.geometry, deltas[j]).estimate).epsilon(1e-12));
  }
  CHECK(sweep[0].estimate > sweep[1].estimate);
}

TEST_CASE("constant test function has zero increments") {
  SimConfig c = alpha_half();
  c.mu = {};
  const TestFunction f = make_constant(c.geometry, 3.0);
  const SubmartingaleReport r = submartingale_check(c, f, 10);
  CHECK(r.min_z == 0.0);
  for (double m : r.mean_M) CHECK(m == 3.0);
}

TEST_CASE("martingale functional matches the streaming form") {
  const SimConfig c = alpha_half();
  const TestFunction f = make_f_eps_C(c.geometry, 0.3, 2.0);
  const auto paths = batch_simulate(c);
  const std::size_t n = c.steps();
  std::vector<std::size_t> grid;
  for (std::size_t j = 0; j < 5; ++j) grid.push_back(static_cast<std::size_t>(std::llround(j * n / 4.0)));
  const SubmartingaleReport a = submartingale_check(paths, f, c.mu, grid);
  const SubmartingaleReport b = submartingale_check(c, f, 5);
  CHECK(a.min_z == doctest::Approx(b.min_z).epsilon(1e-9));
  CHECK(a.grid_times == b.grid_times);

  const TestFunction bad = negate(f, c.geometry);
  CHECK_THROWS_AS(submartingale_check(c, bad, 5), CertificateError);
  CHECK_NOTHROW(submartingale_check(c, bad, 5, true));
}

TEST_CASE("energy distance equals the brute-force U-statistic") {
  const auto a = gaussian_cloud({0.0, 0.0}, 1.0, 150, 0);
  const auto b = gaussian_cloud({0.4, -0.2}, 1.3, 110, 1);
  const double ref = energy_bruteforce(a, b);
  CHECK(energy_distance(a, b, 1) == doctest::Approx(ref).epsilon(1e-12));
  CHECK(energy_distance(a, b, 1) == energy_distance(a, b, 7));
  CHECK(energy_distance(a, a, 3) == doctest::Approx(energy_bruteforce(a, a)).epsilon(1e-12));
  const std::vector<Vec2> one{{0.0, 0.0}};
  CHECK_THROWS_AS(energy_distance(one, b), PreconditionError);
}

TEST_CASE("Feller distance: equal starts and far starts") {
  SimConfig c = alpha_half();
  c.mu = {0.2, -0.1};
  c.dt = 1e-2;
  c.n_paths = 400;
  const Vec2 z{0.5, 0.5};
  const double same = feller_distance(c, z, z, 1.0);
  CHECK(same <= energy_null_threshold(c, z, 1.0, 20));

  // Before the boundary matters the two laws are translates, and the
  // distance approaches 2|z_a - z_b| minus the within-sample spread.
  c.dt = 1e-3;
  const Vec2 far{5.5, 5.5};
  const double d = feller_distance(c, {2.0, 2.0}, far, 0.01);
  CHECK(d == doctest::Approx(2.0 * norm(far - Vec2{2.0, 2.0})).epsilon(0.05));
}

TEST_CASE("scaling check requires zero drift") {
  SimConfig c = alpha_half();
  c.n_paths = 10;
  CHECK_THROWS(scaling_check(c, {2.0, 1.0}, 1.0));
}

TEST_CASE("flatness audit") {
  SimConfig c = alpha_half();
  c.z0 = {0.3, 0.2};
  c.n_paths = 8;
  auto paths = batch_simulate(c);
  for (const PathSample& p : paths) {
    CHECK(flatness_audit(p, c.geometry, 0.01) == 0.0);
    CHECK(flatness_audit(p, c.geometry, 0.05) == 0.0);
    CHECK(flatness_audit(p, c.geometry, 100.0) == 0.0);
  }

  // Inject an eta increment at a time when the path is deep inside.
  PathSample& p = paths.front();
  std::size_t k = 1;
  while (k + 1 < p.size() && !(p.Z[k - 1].x > 0.1 && p.Z[k - 1].y > 0.1 && p.Z[k].x > 0.1 && p.Z[k].y > 0.1)) ++k;
  REQUIRE(k + 1 < p.size());
  for (std::size_t m = k; m < p.size(); ++m) p.eta[m].x += 0.05;
  CHECK(flatness_audit(p, c.geometry, 0.01) > 0.0);
  CHECK_THROWS_AS(flatness_audit(p, c.geometry, 0.0), DomainError);
}

TEST_CASE("hitting estimation requires absorbed mode") {
  SimConfig c = alpha_half();
  c.n_paths = 4;
  CHECK_THROWS_AS(estimate_hitting_probability(c), PreconditionError);
  c.mode = Mode::absorbed;
  const std::vector<double> late{2.0};
  CHECK_THROWS_AS(estimate_hitting_probability(c, late), PreconditionError);
}

TEST_CASE("hitting report is consistent across radii and horizons") {
  SimConfig c;
  c.geometry = build_wedge(kPi / 4, 0.9 * kPi / 4, 0.9 * kPi / 4);
  c.z0 = {0.5, 0.2};
  c.T = 2.0;
  c.dt = 2e-3;
  c.n_paths = 200;
  c.mode = Mode::absorbed;
  c.seed = 3;
  const std::vector<double> horizons{0.5, 1.0, 2.0};
  const HittingReport r = estimate_hitting_probability(c, horizons);
  CHECK(r.half_eps.estimate <= r.primary.estimate);
  CHECK(r.by_horizon.size() == 3);
  CHECK(r.by_horizon[0].estimate <= r.by_horizon[1].estimate);
  CHECK(r.by_horizon[1].estimate <= r.by_horizon[2].estimate);
  CHECK(r.by_horizon[2].estimate == r.primary.estimate);
  CHECK(r.eps_vertex == doctest::Approx(1e-3 * norm(c.z0)));

  // The estimate is the fraction of full-path records with tau0 set.
  const auto paths = batch_simulate(c);
  double hits = 0;
  for (const PathSample& p : paths) hits += p.tau0_index ? 1.0 : 0.0;
  CHECK(r.primary.estimate == doctest::Approx(hits / static_cast<double>(paths.size())));
}

TEST_CASE("mean reports and derived seeds") {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  const EstimateReport r = mean_report(x, "tag");
  CHECK(r.estimate == 2.5);
  CHECK(r.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(r.ci95.first < 2.5);
  CHECK(r.ci95.second > 2.5);
  CHECK(r.theorem_tag == "tag");
  const std::vector<double> w{2.0, 0.0, 0.0, 0.0};
  CHECK(weighted_mean_report(x, w).estimate == 0.5);
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
}
