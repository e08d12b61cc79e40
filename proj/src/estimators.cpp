#include "rbm/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "rbm/errors.hpp"

namespace rbm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

EstimateReport finish_report(double mean, double se, std::size_t n, std::string tag) {
  EstimateReport r;
  r.estimate = mean;
  r.std_error = se;
  r.ci95 = {mean - 1.96 * se, mean + 1.96 * se};
  r.n = n;
  r.theorem_tag = std::move(tag);
  return r;
}

void require_one_to_two(const WedgeGeometry& g, const char* what) {
  if (g.regime() != Regime::one_to_two) {
    std::ostringstream msg;
    msg << what << " requires 1 < alpha < 2 (alpha = " << g.alpha() << ")";
    throw RegimeError(msg.str());
  }
}

double z_of(double mean, double se) {
  if (se > 0.0) return mean / se;
  if (mean == 0.0) return 0.0;
  return std::copysign(kInf, mean);
}

}  // namespace

EstimateReport mean_report(std::span<const double> samples, std::string tag) {
  const std::size_t n = samples.size();
  if (n == 0) return finish_report(0.0, 0.0, 0, std::move(tag));
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double var = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
  return finish_report(mean, std::sqrt(var / static_cast<double>(n)), n, std::move(tag));
}

EstimateReport weighted_mean_report(std::span<const double> values, std::span<const double> weights,
                                    std::string tag) {
  if (values.size() != weights.size()) {
    throw PreconditionError("weighted_mean_report: size mismatch");
  }
  std::vector<double> prod(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) prod[i] = values[i] * weights[i];
  return mean_report(prod, std::move(tag));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed ^ salt;
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------

std::string hitting_theorem_tag(const WedgeGeometry& g, const Vec2& mu) {
  std::ostringstream tag;
  tag << "regime=" << to_string(g.regime()) << " alpha=" << g.alpha() << "; ";
  switch (g.regime()) {
    case Regime::nonpositive:
      tag << "alpha<=0: P(tau0=inf)=1";
      break;
    case Regime::zero_to_one:
      tag << "0<alpha<1: no drift-specific hitting claim";
      break;
    default: {
      const bool cond = vertex_attraction_condition(g, mu);
      const double mu_angle = std::atan2(mu.y, mu.x);
      const bool interior_drift = norm(mu) > 0.0 && mu_angle > 0.0 && mu_angle < g.xi();
      if (cond) {
        tag << "alpha>=1, co(v1,v2,mu)∩S={0} holds: P(tau0<inf)=1";
      } else if (interior_drift) {
        tag << "alpha>=1, condition fails, drift angle in (0,xi): P(tau0<inf) in (0,1)";
      } else {
        tag << "alpha>=1, condition fails: P(tau0<inf)>0";
      }
    }
  }
  return tag.str();
}

HittingReport estimate_hitting_probability(const SimConfig& cfg, std::span<const double> horizons) {
  if (cfg.mode != Mode::absorbed) {
    throw PreconditionError("hitting probability estimation requires absorbed mode");
  }
  validate(cfg);
  for (double h : horizons) {
    if (!(h > 0.0) || h > cfg.T * (1.0 + 1e-12)) {
      throw PreconditionError("hitting horizons must lie in (0, T]");
    }
  }
  const double eps = cfg.effective_eps_vertex();
  SimConfig run = cfg;
  run.eps_vertex = 0.5 * eps;

  struct Visitor {
    double eps;
    double t_big = kInf;
    double t_small = kInf;
    bool operator()(const StepState& s) {
      if (t_big == kInf && (s.absorbed || norm(s.z) <= eps)) t_big = s.t;
      if (s.absorbed) {
        t_small = s.t;
        return false;
      }
      return true;
    }
  };
  const auto hits = map_walks(
      run, [eps] { return Visitor{eps}; },
      [](Visitor& v) { return std::pair<double, double>{v.t_big, v.t_small}; });

  const std::string tag = hitting_theorem_tag(cfg.geometry, cfg.mu);
  auto fraction = [&](double horizon, bool big) {
    std::vector<double> ind(hits.size());
    const double limit = horizon * (1.0 + 1e-12);
    for (std::size_t i = 0; i < hits.size(); ++i) {
      ind[i] = (big ? hits[i].first : hits[i].second) <= limit ? 1.0 : 0.0;
    }
    const double p = std::accumulate(ind.begin(), ind.end(), 0.0) / static_cast<double>(ind.size());
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(ind.size()));
    return finish_report(p, se, ind.size(), tag);
  };

  HittingReport rep;
  rep.eps_vertex = eps;
  rep.primary = fraction(cfg.T, true);
  rep.half_eps = fraction(cfg.T, false);
  rep.horizons.assign(horizons.begin(), horizons.end());
  for (double h : horizons) rep.by_horizon.push_back(fraction(h, true));
  rep.vertex_attraction =
      cfg.geometry.alpha() >= 1.0 - kAlphaTol && vertex_attraction_condition(cfg.geometry, cfg.mu);
  return rep;
}

// ---------------------------------------------------------------------------

double boundary_occupation_fraction(const PathSample& path, const WedgeGeometry& g, double delta) {
  if (!(delta > 0.0)) throw DomainError("occupation delta must be positive");
  if (path.size() < 2) return 0.0;
  double near = 0.0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    if (g.distance_to_boundary(path.Z[k]) <= delta) near += path.times[k + 1] - path.times[k];
  }
  return near / (path.times.back() - path.times.front());
}

EstimateReport estimate_boundary_occupation(std::span<const PathSample> paths,
                                            const WedgeGeometry& g, double delta) {
  std::vector<double> v(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) v[i] = boundary_occupation_fraction(paths[i], g, delta);
  std::ostringstream tag;
  tag << "boundary occupation within delta=" << delta << " (limit 0 as delta->0)";
  return mean_report(v, tag.str());
}

std::vector<EstimateReport> occupation_sweep(const SimConfig& cfg, std::span<const double> deltas) {
  for (double d : deltas) {
    if (!(d > 0.0)) throw DomainError("occupation delta must be positive");
  }
  const std::vector<double> ds(deltas.begin(), deltas.end());
  const WedgeGeometry g = cfg.geometry;

  struct Visitor {
    const std::vector<double>* ds;
    const WedgeGeometry* g;
    std::vector<double> near;
    double prev_dist = 0.0;
    double prev_t = 0.0;
    bool operator()(const StepState& s) {
      if (s.k > 0) {
        const double dt = s.t - prev_t;
        for (std::size_t i = 0; i < ds->size(); ++i) {
          if (prev_dist <= (*ds)[i]) near[i] += dt;
        }
      }
      prev_dist = g->distance_to_boundary(s.z);
      prev_t = s.t;
      return true;
    }
  };
  const double T = cfg.T;
  const auto per_path = map_walks(
      cfg, [&] { return Visitor{&ds, &g, std::vector<double>(ds.size(), 0.0)}; },
      [T](Visitor& v) {
        for (double& x : v.near) x /= T;
        return v.near;
      });

  std::vector<EstimateReport> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::vector<double> col(per_path.size());
    for (std::size_t p = 0; p < per_path.size(); ++p) col[p] = per_path[p][i];
    std::ostringstream tag;
    tag << "boundary occupation within delta=" << ds[i] << " (limit 0 as delta->0)";
    out.push_back(mean_report(col, tag.str()));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::stabilizing: return "stabilizing";
    case Verdict::diverging: return "diverging";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

double p_variation(std::span<const Vec2> y, double p, int level) {
  if (!(p > 0.0)) throw DomainError("p-variation exponent must be positive");
  if (level < 0 || level > 62) throw PreconditionError("dyadic level out of range");
  const std::size_t cells = std::size_t{1} << level;
  if (y.size() < 2 || (y.size() - 1) % cells != 0) {
    throw PreconditionError("path length does not contain the requested dyadic sub-grid");
  }
  const std::size_t stride = (y.size() - 1) / cells;
  double sum = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    const Vec2 d = y[(i + 1) * stride] - y[i * stride];
    if (p == 2.0) {
      sum += norm2(d);
    } else if (p == 1.0) {
      sum += std::sqrt(norm2(d));
    } else {
      sum += std::pow(norm2(d), 0.5 * p);
    }
  }
  return sum;
}

namespace {

std::span<const double> last_four(std::span<const double> values) {
  const std::size_t m = std::min<std::size_t>(4, values.size());
  return values.subspan(values.size() - m);
}

}  // namespace

Verdict growth_verdict(std::span<const double> values, double margin) {
  const auto v = last_four(values);
  if (v.size() < 2) return Verdict::inconclusive;
  if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) return Verdict::stabilizing;
  bool all_grow = true;
  bool none_grow = true;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    double r;
    if (v[i] == 0.0) {
      r = v[i + 1] > 0.0 ? kInf : 1.0;
    } else {
      r = v[i + 1] / v[i];
    }
    if (r > 1.0 + margin) {
      none_grow = false;
    } else {
      all_grow = false;
    }
  }
  if (all_grow) return Verdict::diverging;
  if (none_grow) return Verdict::stabilizing;
  return Verdict::inconclusive;
}

Verdict decay_verdict(std::span<const double> values) {
  const auto v = last_four(values);
  if (v.size() < 2) return Verdict::inconclusive;
  if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) return Verdict::stabilizing;
  bool decreasing = true;
  bool nondecreasing = true;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    if (!(v[i + 1] < v[i])) decreasing = false;
    if (v[i + 1] < v[i]) nondecreasing = false;
  }
  if (decreasing) return Verdict::stabilizing;
  if (nondecreasing) return Verdict::diverging;
  return Verdict::inconclusive;
}

namespace {

VariationSweep summarize(double p, std::span<const int> levels,
                         const std::vector<std::vector<double>>& table) {
  VariationSweep s;
  s.p = p;
  s.mesh_levels.assign(levels.begin(), levels.end());
  for (std::size_t l = 0; l < levels.size(); ++l) {
    std::vector<double> col(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) col[i] = table[i][l];
    s.means.push_back(col.empty() ? 0.0
                                  : std::accumulate(col.begin(), col.end(), 0.0) /
                                        static_cast<double>(col.size()));
    s.values.push_back(median(std::move(col)));
  }
  return s;
}

}  // namespace

VariationSweep summarize_growth(double p, std::span<const int> levels,
                                const std::vector<std::vector<double>>& table, double margin) {
  VariationSweep s = summarize(p, levels, table);
  s.verdict = growth_verdict(s.values, margin);
  return s;
}

VariationSweep summarize_decay(double p, std::span<const int> levels,
                               const std::vector<std::vector<double>>& table) {
  VariationSweep s = summarize(p, levels, table);
  s.verdict = decay_verdict(s.values);
  return s;
}

std::vector<std::vector<std::vector<double>>> variation_tables(const SimConfig& cfg,
                                                               std::span<const double> ps,
                                                               std::span<const int> levels) {
  if (levels.empty()) throw PreconditionError("variation sweep needs at least one level");
  const int max_level = *std::max_element(levels.begin(), levels.end());
  if (max_level > 62 || cfg.steps() % (std::size_t{1} << max_level) != 0) {
    throw PreconditionError("number of steps must be a multiple of 2^(max level)");
  }
  const std::vector<double> pv(ps.begin(), ps.end());
  const std::vector<int> lv(levels.begin(), levels.end());
  const std::size_t n = cfg.steps() + 1;

  struct Visitor {
    std::vector<Vec2> y;
    bool operator()(const StepState& s) {
      y.push_back(s.z - s.x);
      return true;
    }
  };
  // per_path[path][p][level]
  const auto per_path = map_walks(
      cfg,
      [n] {
        Visitor v;
        v.y.reserve(n);
        return v;
      },
      [&](Visitor& v) {
        std::vector<std::vector<double>> t(pv.size(), std::vector<double>(lv.size()));
        for (std::size_t a = 0; a < pv.size(); ++a) {
          for (std::size_t b = 0; b < lv.size(); ++b) t[a][b] = p_variation(v.y, pv[a], lv[b]);
        }
        return t;
      });

  std::vector<std::vector<std::vector<double>>> out(pv.size());
  for (std::size_t a = 0; a < pv.size(); ++a) {
    out[a].reserve(per_path.size());
    for (const auto& t : per_path) out[a].push_back(t[a]);
  }
  return out;
}

std::vector<VariationSweep> variation_sweep(const SimConfig& cfg, std::span<const double> ps,
                                            std::span<const int> levels, double margin) {
  require_one_to_two(cfg.geometry, "variation sweep");
  const auto tables = variation_tables(cfg, ps, levels);
  std::vector<VariationSweep> out;
  for (std::size_t a = 0; a < ps.size(); ++a) {
    out.push_back(summarize_growth(ps[a], levels, tables[a], margin));
  }
  return out;
}

VariationSweep zero_energy_sweep(std::span<const std::vector<Vec2>> series,
                                 std::span<const int> levels) {
  std::vector<std::vector<double>> table;
  table.reserve(series.size());
  for (const auto& y : series) {
    std::vector<double> row;
    for (int l : levels) row.push_back(p_variation(y, 2.0, l));
    table.push_back(std::move(row));
  }
  return summarize_decay(2.0, levels, table);
}

VariationSweep zero_energy_sweep(std::span<const PathSample> paths, std::span<const int> levels) {
  std::vector<std::vector<double>> table;
  table.reserve(paths.size());
  for (const auto& p : paths) {
    std::vector<double> row;
    for (int l : levels) row.push_back(p_variation(p.Y, 2.0, l));
    table.push_back(std::move(row));
  }
  return summarize_decay(2.0, levels, table);
}

VariationSweep zero_energy_sweep(const SimConfig& cfg, std::span<const int> levels) {
  require_one_to_two(cfg.geometry, "zero-energy sweep");
  const double two[] = {2.0};
  const auto tables = variation_tables(cfg, two, levels);
  return summarize_decay(2.0, levels, tables[0]);
}

// ---------------------------------------------------------------------------

std::vector<double> martingale_functional(const PathSample& path, const TestFunction& f,
                                          const Vec2& mu, std::span<const std::size_t> grid) {
  std::vector<double> out;
  out.reserve(grid.size());
  double integral = 0.0;
  std::size_t next = 0;
  for (std::size_t k = 0; k < path.size() && next < grid.size(); ++k) {
    const Vec2& z = path.Z[k];
    while (next < grid.size() && grid[next] == k) {
      out.push_back(f.f(z) - integral);
      ++next;
    }
    if (k + 1 < path.size()) {
      integral += (dot(mu, f.grad(z)) + 0.5 * f.laplacian(z)) * (path.times[k + 1] - path.times[k]);
    }
  }
  if (out.size() != grid.size()) throw PreconditionError("grid index beyond path length");
  return out;
}

SubmartingaleReport submartingale_check(const std::vector<std::vector<double>>& m_values,
                                        std::span<const double> grid_times) {
  SubmartingaleReport rep;
  rep.n = m_values.size();
  rep.grid_times.assign(grid_times.begin(), grid_times.end());
  const std::size_t g = grid_times.size();
  rep.mean_M.assign(g, 0.0);
  for (const auto& row : m_values) {
    for (std::size_t j = 0; j < g; ++j) rep.mean_M[j] += row[j];
  }
  for (double& m : rep.mean_M) m /= static_cast<double>(std::max<std::size_t>(1, rep.n));

  rep.min_z = kInf;
  std::vector<double> diffs(rep.n);
  for (std::size_t a = 0; a < g; ++a) {
    for (std::size_t b = a + 1; b < g; ++b) {
      for (std::size_t i = 0; i < rep.n; ++i) diffs[i] = m_values[i][b] - m_values[i][a];
      const EstimateReport r = mean_report(diffs);
      const double z = z_of(r.estimate, r.std_error);
      if (z < rep.min_z) {
        rep.min_z = z;
        rep.argmin_s = a;
        rep.argmin_t = b;
      }
    }
  }
  if (rep.min_z == kInf) rep.min_z = 0.0;
  return rep;
}

SubmartingaleReport submartingale_check(std::span<const PathSample> paths, const TestFunction& f,
                                        const Vec2& mu, std::span<const std::size_t> grid,
                                        bool allow_uncertified) {
  if (!f.certified && !allow_uncertified) {
    throw CertificateError("submartingale check: test function " + f.name + " is not certified");
  }
  std::vector<std::vector<double>> m;
  m.reserve(paths.size());
  for (const auto& p : paths) m.push_back(martingale_functional(p, f, mu, grid));
  std::vector<double> times;
  if (!paths.empty()) {
    for (std::size_t k : grid) times.push_back(paths.front().times.at(k));
  }
  return submartingale_check(m, times);
}

SubmartingaleReport submartingale_check(const SimConfig& cfg, const TestFunction& f,
                                        std::size_t grid_points, bool allow_uncertified) {
  if (!f.certified && !allow_uncertified) {
    throw CertificateError("submartingale check: test function " + f.name + " is not certified");
  }
  if (grid_points < 2) throw PreconditionError("submartingale check needs at least 2 grid times");
  const std::size_t n = cfg.steps();
  std::vector<std::size_t> grid(grid_points);
  std::vector<double> times(grid_points);
  for (std::size_t j = 0; j < grid_points; ++j) {
    grid[j] = static_cast<std::size_t>(
        std::llround(static_cast<double>(j) * static_cast<double>(n) / static_cast<double>(grid_points - 1)));
    times[j] = grid[j] == n ? cfg.T : static_cast<double>(grid[j]) * cfg.step_size();
  }
  const Vec2 mu = cfg.mu;

  struct Visitor {
    const TestFunction* f;
    const std::vector<std::size_t>* grid;
    Vec2 mu;
    std::vector<double> m;
    double integral = 0.0;
    double prev_t = 0.0;
    double prev_rate = 0.0;
    std::size_t next = 0;
    bool operator()(const StepState& s) {
      if (s.k > 0) integral += prev_rate * (s.t - prev_t);
      while (next < grid->size() && (*grid)[next] == s.k) {
        m.push_back(f->f(s.z) - integral);
        ++next;
      }
      prev_rate = dot(mu, f->grad(s.z)) + 0.5 * f->laplacian(s.z);
      prev_t = s.t;
      return next < grid->size();
    }
  };
  const auto m = map_walks(
      cfg, [&] { return Visitor{&f, &grid, mu, {}}; }, [](Visitor& v) { return v.m; });
  return submartingale_check(m, times);
}

// ---------------------------------------------------------------------------

double energy_distance(std::span<const Vec2> a, std::span<const Vec2> b, unsigned threads) {
  if (a.size() < 2 || b.size() < 2) throw PreconditionError("energy distance needs >= 2 samples per side");
  auto dist = [](const Vec2& p, const Vec2& q) {
    const double dx = p.x - q.x;
    const double dy = p.y - q.y;
    return std::sqrt(dx * dx + dy * dy);
  };
  // Row sums are computed independently and added in row order, so the
  // result does not depend on the worker count.
  std::vector<double> ab(a.size()), aa(a.size()), bb(b.size());
  parallel_for(a.size(), threads, [&](std::size_t i) {
    double s = 0.0;
    for (const Vec2& q : b) s += dist(a[i], q);
    ab[i] = s;
    double t = 0.0;
    for (std::size_t j = i + 1; j < a.size(); ++j) t += dist(a[i], a[j]);
    aa[i] = t;
  });
  parallel_for(b.size(), threads, [&](std::size_t i) {
    double t = 0.0;
    for (std::size_t j = i + 1; j < b.size(); ++j) t += dist(b[i], b[j]);
    bb[i] = t;
  });
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double mean_ab = std::accumulate(ab.begin(), ab.end(), 0.0) / (na * nb);
  const double mean_aa = 2.0 * std::accumulate(aa.begin(), aa.end(), 0.0) / (na * (na - 1.0));
  const double mean_bb = 2.0 * std::accumulate(bb.begin(), bb.end(), 0.0) / (nb * (nb - 1.0));
  return 2.0 * mean_ab - mean_aa - mean_bb;
}

namespace detail {

std::vector<FreeAndConstrainedEnd> terminal_states(const SimConfig& cfg) {
  struct Visitor {
    FreeAndConstrainedEnd e;
    bool operator()(const StepState& s) {
      if (s.k == 0) e.x0 = s.x;
      e.x = s.x;
      e.z = s.z;
      return true;
    }
  };
  return map_walks(cfg, [] { return Visitor{}; }, [](Visitor& v) { return v.e; });
}

}  // namespace detail

std::vector<Vec2> terminal_samples(const SimConfig& cfg) {
  const auto ends = detail::terminal_states(cfg);
  std::vector<Vec2> out(ends.size());
  for (std::size_t i = 0; i < ends.size(); ++i) out[i] = ends[i].z;
  return out;
}

namespace {

std::vector<Vec2> samples_from(const SimConfig& cfg, const Vec2& z, double t, std::uint64_t seed) {
  SimConfig c = cfg;
  c.z0 = z;
  c.T = t;
  c.seed = seed;
  return terminal_samples(c);
}

}  // namespace

double feller_distance(const SimConfig& cfg, const Vec2& z_a, const Vec2& z_b, double t) {
  const auto a = samples_from(cfg, z_a, t, cfg.seed);
  const auto b = samples_from(cfg, z_b, t, derive_seed(cfg.seed, 1));
  return energy_distance(a, b, cfg.threads);
}

double energy_null_threshold(const SimConfig& cfg, const Vec2& z, double t, std::size_t replicates) {
  if (replicates < 2) throw PreconditionError("null calibration needs at least 2 replicates");
  std::vector<double> d(replicates);
  for (std::size_t r = 0; r < replicates; ++r) {
    const auto a = samples_from(cfg, z, t, derive_seed(cfg.seed, 0x1000 + 2 * r));
    const auto b = samples_from(cfg, z, t, derive_seed(cfg.seed, 0x1001 + 2 * r));
    d[r] = energy_distance(a, b, cfg.threads);
  }
  const EstimateReport r = mean_report(d);
  const double sd = r.std_error * std::sqrt(static_cast<double>(replicates));
  return r.estimate + kNullSigmas * sd;
}

FellerTrend feller_trend(const SimConfig& cfg, const Vec2& z, int k_max, double t,
                         std::size_t null_replicates) {
  if (k_max < 1) throw PreconditionError("feller trend needs k_max >= 1");
  FellerTrend out;
  const auto ref = samples_from(cfg, z, t, cfg.seed);
  for (int k = 1; k <= k_max; ++k) {
    const Vec2 zk = z + Vec2{std::ldexp(1.0, -k), 0.0};
    const auto sample = samples_from(cfg, zk, t, derive_seed(cfg.seed, 0x2000 + static_cast<std::uint64_t>(k)));
    out.k.push_back(k);
    out.distances.push_back(energy_distance(ref, sample, cfg.threads));
  }
  out.null_threshold = energy_null_threshold(cfg, z, t, null_replicates);
  bool ok = out.distances.back() < out.distances.front() || k_max == 1;
  for (std::size_t i = 1; i < out.distances.size(); ++i) {
    ok = ok && (out.distances[i] < out.distances[i - 1] || out.distances[i] <= out.null_threshold);
  }
  out.decreasing = ok;
  return out;
}

ScalingCheck scaling_check(const SimConfig& cfg, const Vec2& x, double t,
                           std::size_t null_replicates) {
  if (cfg.mu.x != 0.0 || cfg.mu.y != 0.0) throw PreconditionError("scaling check requires mu = 0");
  const double s = norm(x);
  if (!(s > 0.0)) throw DomainError("scaling check requires a start point away from the vertex");
  ScalingCheck out;
  SimConfig base = cfg;
  base.dt = cfg.effective_dt();
  const auto a = samples_from(base, x, t, cfg.seed);
  SimConfig scaled = base;
  scaled.dt = base.dt / (s * s);
  auto b = samples_from(scaled, (1.0 / s) * x, t / (s * s), derive_seed(cfg.seed, 0x3000));
  for (Vec2& p : b) p = s * p;
  out.distance = energy_distance(a, b, cfg.threads);
  out.null_threshold = energy_null_threshold(base, x, t, null_replicates);
  out.passed = out.distance <= out.null_threshold;
  return out;
}

// ---------------------------------------------------------------------------

double flatness_audit(const PathSample& path, const WedgeGeometry& g, double delta) {
  if (!(delta > 0.0)) throw DomainError("flatness audit delta must be positive");
  const std::size_t n = path.size();
  double total = 0.0;
  std::size_t k = 0;
  while (k < n) {
    while (k < n && !g.in_inner_wedge(path.Z[k], 2.0 * delta)) ++k;
    if (k >= n) break;
    const std::size_t sigma = k;
    std::size_t tau = sigma;
    while (tau < n && g.in_inner_wedge(path.Z[tau], delta)) ++tau;
    for (std::size_t m = sigma + 1; m < tau; ++m) {
      const Vec2 d = g.R() * (path.eta[m] - path.eta[m - 1]) + (path.free_push[m] - path.free_push[m - 1]);
      total += norm(d);
    }
    k = tau;
  }
  return total;
}

}  // namespace rbm
