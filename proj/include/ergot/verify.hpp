#pragma once

// Executable checks of the decomposition results: restricted optimal cost
// equals a two-stage transport over ergodic components, and the restricted
// Wasserstein distance equals the lifted boundary metric. Also a seeded
// random instance generator.

#include "ergot/core.hpp"
#include "ergot/ergodic.hpp"
#include "ergot/restriction.hpp"
#include "ergot/transport.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ergot {

// ---------------------------------------------------------------------------
// Optimal inner plans between extreme measures

struct QoptTable {
  std::vector<Measure> row_components;
  std::vector<Measure> col_components;
  std::vector<std::size_t> row_classes;
  std::vector<std::size_t> col_classes;
  /// values(a, b): restricted optimal cost between row component a and
  /// column component b; +inf when infeasible.
  Matrix values;
  std::vector<std::vector<OtResult>> plans;
  std::vector<int> row_class_of;
  std::vector<int> col_class_of;

  /// Table cell used by the induced kernel at (x, y), if both points belong
  /// to tabulated classes.
  std::optional<std::pair<std::size_t, std::size_t>> cell_of(std::size_t x, std::size_t y) const {
    const int cx = row_class_of[x], cy = col_class_of[y];
    std::optional<std::size_t> a, b;
    for (std::size_t i = 0; i < row_classes.size(); ++i)
      if (static_cast<int>(row_classes[i]) == cx) a = i;
    for (std::size_t j = 0; j < col_classes.size(); ++j)
      if (static_cast<int>(col_classes[j]) == cy) b = j;
    if (!a || !b) return std::nullopt;
    return std::make_pair(*a, *b);
  }
};

namespace detail {

inline QoptTable qopt_over(const Boundary& bx, const Boundary& by, const std::vector<std::size_t>& rows,
                           const std::vector<std::size_t>& cols, const CostMatrix& c, const LinearRestriction& r) {
  QoptTable t;
  t.row_classes = rows;
  t.col_classes = cols;
  t.row_class_of = bx.class_of;
  t.col_class_of = by.class_of;
  for (auto a : rows) t.row_components.push_back(bx.extremes[a]);
  for (auto b : cols) t.col_components.push_back(by.extremes[b]);
  t.values = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  t.plans.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      OtResult res = solve_constrained_ot(t.row_components[i], t.col_components[j], c, r);
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = res.value;
      t.plans[i].push_back(std::move(res));
    }
  }
  return t;
}

inline std::vector<std::size_t> iota_classes(std::size_t k) {
  std::vector<std::size_t> v(k);
  for (std::size_t i = 0; i < k; ++i) v[i] = i;
  return v;
}

}  // namespace detail

/// Optimal restricted plans between every pair of extreme measures. The
/// solver's deterministic basis plays the role of a measurable selection.
inline QoptTable build_qopt(const SimplexSpec& spec_x, const SimplexSpec& spec_y, const CostMatrix& c,
                            const LinearRestriction& r) {
  const Boundary bx = boundary(spec_x), by = boundary(spec_y);
  return detail::qopt_over(bx, by, detail::iota_classes(bx.extremes.size()), detail::iota_classes(by.extremes.size()),
                           c, r);
}

// ---------------------------------------------------------------------------
// Cost decomposition

struct DecompositionReport {
  double lhs = kInfinity;
  double rhs = kInfinity;
  double gap = 0.0;
  OtStatus lhs_status = OtStatus::Infeasible;
  OtStatus outer_status = OtStatus::Infeasible;
  TransportPlan lhs_plan;
  /// Inner optimal values between the components of mu (rows) and nu (cols).
  Matrix inner_table;
  std::vector<std::size_t> row_classes;
  std::vector<std::size_t> col_classes;
  Vector mu_weights;
  Vector nu_weights;
  TransportPlan outer_plan;
  /// Row-major k_mu x k_nu inner optimal plans.
  std::vector<TransportPlan> per_component_plans;
  /// Number of ergodic components of the optimal restricted plan.
  std::size_t plan_components = 0;
  /// min over plan components of (component cost - matching inner value).
  double qopt_slack = kInfinity;
  /// Some product atom is strictly smaller than its marginal-class rectangle.
  bool atoms_finer_than_rectangles = false;
};

/// Solves inf{<c, pi> : pi in Pi_R(mu, nu)} directly and through the
/// two-stage problem over ergodic components, and cross-checks the
/// decomposition of the direct optimum against the inner optima.
inline DecompositionReport verify_decomposition(const Measure& mu, const Measure& nu, const CostMatrix& c,
                                                const LinearRestriction& r) {
  if (!r.has_product_structure())
    throw Error(ErrorKind::MissingProductStructure, "verification needs a product action or kernel");
  DecompositionReport rep;
  const OtResult direct = solve_constrained_ot(mu, nu, c, r);
  rep.lhs = direct.value;
  rep.lhs_status = direct.status;
  rep.lhs_plan = direct.plan;

  const ErgodicDecomposition dm = decompose_measure(mu, r.mx_spec);
  const ErgodicDecomposition dn = decompose_measure(nu, r.my_spec);
  const Boundary bx = boundary(r.mx_spec), by = boundary(r.my_spec);
  const QoptTable table = detail::qopt_over(bx, by, dm.component_class, dn.component_class, c, r);
  rep.inner_table = table.values;
  rep.row_classes = dm.component_class;
  rep.col_classes = dn.component_class;
  rep.mu_weights = dm.weights;
  rep.nu_weights = dn.weights;
  for (const auto& row : table.plans)
    for (const auto& cell : row) rep.per_component_plans.push_back(cell.plan);

  const Measure wm{component_space(dm.components.size()), dm.weights};
  const Measure wn{component_space(dn.components.size()), dn.weights};
  const OtResult outer = detail::solve_transport_lp(wm, wn, table.values, nullptr);
  rep.rhs = outer.value;
  rep.outer_status = outer.status;
  rep.outer_plan = outer.plan;
  rep.gap = (std::isfinite(rep.lhs) && std::isfinite(rep.rhs)) ? std::abs(rep.lhs - rep.rhs)
            : (rep.lhs == rep.rhs)                              ? 0.0
                                                                : kInfinity;

  const std::size_t ny = r.y_space().size();
  const ProductPartition part = product_partition(r);
  for (const auto& atom : part.atoms) {
    const std::size_t first = atom.front();
    const int cx = bx.class_of[first / ny], cy = by.class_of[first % ny];
    std::size_t rect = 0;
    for (std::size_t x = 0; x < r.x_space().size(); ++x)
      for (std::size_t y = 0; y < ny; ++y)
        if (bx.class_of[x] == cx && by.class_of[y] == cy && part.atom_of[x * ny + y] >= 0) ++rect;
    if (atom.size() < rect) rep.atoms_finer_than_rectangles = true;
  }

  if (direct.status == OtStatus::Optimal) {
    const PlanDecomposition pd = decompose_plan(direct.plan, r);
    rep.plan_components = pd.components.size();
    for (std::size_t k = 0; k < pd.components.size(); ++k) {
      const auto [a, b] = pd.marginal_class[k];
      std::optional<std::size_t> i, j;
      for (std::size_t t = 0; t < table.row_classes.size(); ++t)
        if (table.row_classes[t] == a) i = t;
      for (std::size_t t = 0; t < table.col_classes.size(); ++t)
        if (table.col_classes[t] == b) j = t;
      if (!i || !j) throw Error(ErrorKind::Internal, "plan component outside the marginal decompositions");
      const double cost = pairing(c.c, pd.components[k].p);
      rep.qopt_slack = std::min(rep.qopt_slack, cost - table.values(static_cast<Eigen::Index>(*i),
                                                                     static_cast<Eigen::Index>(*j)));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Metric axioms and metric decomposition

struct AxiomReport {
  std::size_t triples = 0;
  double max_self_distance = 0.0;
  double max_asymmetry = 0.0;
  double max_triangle_excess = -kInfinity;
  /// Smallest distance between distinct measures.
  double min_separation = kInfinity;
  bool passed = true;
  std::vector<std::string> failures;
};

inline bool same_measure(const Measure& a, const Measure& b) {
  return (a.w - b.w).cwiseAbs().maxCoeff() <= kMassTol;
}

/// Identity, positivity, symmetry and the triangle inequality on each triple.
template <class Distance>
AxiomReport check_metric_axioms(Distance&& dist, const std::vector<std::array<Measure, 3>>& triples,
                                double tol = kMetricTol) {
  AxiomReport rep;
  auto fail = [&](std::size_t t, const std::string& why) {
    rep.passed = false;
    rep.failures.push_back("triple " + std::to_string(t) + ": " + why);
  };
  for (std::size_t t = 0; t < triples.size(); ++t) {
    const auto& [a, b, c] = triples[t];
    ++rep.triples;
    const double aa = dist(a, a), ab = dist(a, b), ba = dist(b, a), bc = dist(b, c), ac = dist(a, c);
    rep.max_self_distance = std::max(rep.max_self_distance, aa);
    if (!(aa <= tol)) fail(t, "d(a,a) = " + fmt_real(aa));
    if (!same_measure(a, b)) {
      rep.min_separation = std::min(rep.min_separation, ab);
      if (!(ab > kMetricTol)) fail(t, "d(a,b) = " + fmt_real(ab) + " for distinct a, b");
    }
    const double asym = (ab == ba) ? 0.0 : std::abs(ab - ba);
    rep.max_asymmetry = std::max(rep.max_asymmetry, asym);
    if (!(asym <= tol)) fail(t, "asymmetry " + fmt_real(asym));
    if (std::isfinite(ab) && std::isfinite(bc)) {
      const double excess = ac - ab - bc;
      rep.max_triangle_excess = std::max(rep.max_triangle_excess, excess);
      if (!(excess <= tol)) fail(t, "triangle excess " + fmt_real(excess));
    }
  }
  return rep;
}

struct MetricDecompositionReport {
  BoundaryMetricMatrix boundary;
  std::vector<double> restricted;  // W_p^R per sample pair
  std::vector<double> lifted;      // lifted boundary metric per sample pair
  std::vector<double> gaps;
  double max_gap = 0.0;
  AxiomReport restricted_axioms;
  AxiomReport lifted_axioms;
  bool passed = true;
};

/// Compares W_p^R with the lifted boundary metric on each sample pair and
/// runs the metric axioms on both over consecutive sample triples.
inline MetricDecompositionReport verify_metric_decomposition(const SimplexSpec& spec, const GroundMetric& d, double p,
                                                             const LinearRestriction& r,
                                                             const std::vector<std::pair<Measure, Measure>>& samples,
                                                             double tol = kTheoremTol) {
  MetricDecompositionReport rep;
  rep.boundary = boundary_metric(spec, d, p, r);
  for (const auto& [mu, nu] : samples) {
    const double w = wasserstein(mu, nu, d, p, r);
    const double l = lifted_metric(mu, nu, rep.boundary, spec, p);
    const double gap = (w == l) ? 0.0 : std::abs(w - l);
    rep.restricted.push_back(w);
    rep.lifted.push_back(l);
    rep.gaps.push_back(gap);
    rep.max_gap = std::max(rep.max_gap, gap);
  }
  std::vector<std::array<Measure, 3>> triples;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i)
    triples.push_back({samples[i].first, samples[i].second, samples[i + 1].first});
  rep.restricted_axioms =
      check_metric_axioms([&](const Measure& a, const Measure& b) { return wasserstein(a, b, d, p, r); }, triples);
  rep.lifted_axioms = check_metric_axioms(
      [&](const Measure& a, const Measure& b) { return lifted_metric(a, b, rep.boundary, spec, p); }, triples);
  rep.passed = rep.max_gap <= tol && rep.restricted_axioms.passed && rep.lifted_axioms.passed;
  return rep;
}

// ---------------------------------------------------------------------------
// Random instances

/// mt19937_64 with portable integer and real draws (the standard
/// distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t k) { return static_cast<std::size_t>(eng_() % k); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 eng_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of the i-th instance of a seeded batch.
inline std::uint64_t instance_seed(std::uint64_t seed, std::size_t i) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i)));
}

enum class InstanceKind { Permutation, Kernel };

struct InstanceSpec {
  InstanceKind kind = InstanceKind::Permutation;
  std::size_t n = 6;
  /// Cycle type of the permutation, or recurrent class sizes of the kernel.
  /// Points not covered are fixed points / transient states.
  std::vector<std::size_t> cycles{3, 3};
  double cost_low = 0.0;
  double cost_high = 1.0;
  /// Probability that a component gets zero weight in a random marginal.
  double zero_weight_prob = 0.2;
  std::uint64_t seed = 0;
};

struct Instance {
  InstanceSpec spec;
  FiniteSpace space;
  std::optional<GroupAction> action;
  /// Raw random kernel; the restriction uses its ergodic projection.
  std::optional<StochKernel> kernel;
  SimplexSpec simplex;
  CostMatrix cost;
  GroundMetric metric;
  Measure mu;
  Measure nu;
  LinearRestriction restriction;
};

/// A random member of the simplex: a random mixture of its extreme points.
inline Measure random_member(const Boundary& b, Rng& rng, double zero_prob) {
  const std::size_t k = b.extremes.size();
  std::vector<double> w(k);
  double total = 0.0;
  for (auto& x : w) {
    x = rng.uniform() < zero_prob ? 0.0 : rng.uniform(0.05, 1.0);
    total += x;
  }
  if (total == 0.0) {
    w[rng.below(k)] = 1.0;
    total = 1.0;
  }
  Measure m{b.extremes.front().space, Vector::Zero(b.extremes.front().w.size())};
  for (std::size_t a = 0; a < k; ++a) m.w += (w[a] / total) * b.extremes[a].w;
  return m;
}

/// Euclidean distances between random points of the unit square.
inline GroundMetric random_metric(const FiniteSpace& space, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(space.size());
  Matrix pts(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) pts.row(i) << rng.uniform(), rng.uniform();
  GroundMetric g{space, Matrix::Zero(n, n)};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g.d(i, j) = (pts.row(i) - pts.row(j)).norm();
  return g;
}

inline Instance generate_instance(const InstanceSpec& spec) {
  std::size_t covered = 0;
  for (auto c : spec.cycles) {
    if (c == 0) throw Error(ErrorKind::InvalidInput, "cycle/class sizes must be positive");
    covered += c;
  }
  if (spec.n == 0) throw Error(ErrorKind::InvalidInput, "degenerate instance: n = 0");
  if (covered > spec.n)
    throw Error(ErrorKind::InvalidInput, "cycle/class sizes sum to " + std::to_string(covered) + " > n = " +
                                             std::to_string(spec.n));
  if (spec.kind == InstanceKind::Kernel && spec.cycles.empty())
    throw Error(ErrorKind::InvalidInput, "kernel instances need at least one recurrent class");
  if (!(spec.cost_low <= spec.cost_high)) throw Error(ErrorKind::InvalidInput, "cost range is empty");

  Rng rng(spec.seed);
  const std::size_t n = spec.n;
  const FiniteSpace space = FiniteSpace::indexed(n);
  std::vector<std::size_t> points(n);
  for (std::size_t i = 0; i < n; ++i) points[i] = i;
  rng.shuffle(points);

  Instance inst{spec, space, std::nullopt, std::nullopt, SimplexSpec::full(space), {}, {}, {}, {}, {}};
  if (spec.kind == InstanceKind::Permutation) {
    Permutation g = Permutation::identity(n, "g");
    std::size_t pos = 0;
    for (auto len : spec.cycles) {
      for (std::size_t k = 0; k < len; ++k) g.image[points[pos + k]] = points[pos + (k + 1) % len];
      pos += len;
    }
    inst.action = GroupAction{space, {g}};
    inst.simplex = SimplexSpec::invariant(*inst.action);
    inst.restriction = invariance_restriction(*inst.action);
  } else {
    const auto nn = static_cast<Eigen::Index>(n);
    StochKernel q{space, Matrix::Zero(nn, nn)};
    std::size_t pos = 0;
    for (auto len : spec.cycles) {
      for (std::size_t a = 0; a < len; ++a) {
        double total = 0.0;
        for (std::size_t b = 0; b < len; ++b) {
          const double v = rng.uniform(0.1, 1.0);
          q.q(static_cast<Eigen::Index>(points[pos + a]), static_cast<Eigen::Index>(points[pos + b])) = v;
          total += v;
        }
        q.q.row(static_cast<Eigen::Index>(points[pos + a])) /= total;
      }
      pos += len;
    }
    for (std::size_t t = pos; t < n; ++t) {
      const auto x = static_cast<Eigen::Index>(points[t]);
      for (Eigen::Index y = 0; y < nn; ++y) q.q(x, y) = rng.uniform(0.1, 1.0);
      q.q.row(x) /= q.q.row(x).sum();
    }
    const StochKernel erg = ergodic_projection_kernel(q);
    inst.kernel = q;
    inst.simplex = SimplexSpec::stationary(erg);
    inst.restriction = stationarity_restriction(erg, erg);
  }

  const auto nn = static_cast<Eigen::Index>(n);
  inst.cost = {space, space, Matrix(nn, nn)};
  for (Eigen::Index i = 0; i < nn; ++i)
    for (Eigen::Index j = 0; j < nn; ++j) inst.cost.c(i, j) = rng.uniform(spec.cost_low, spec.cost_high);
  inst.metric = random_metric(space, rng);
  const Boundary b = boundary(inst.simplex);
  inst.mu = random_member(b, rng, spec.zero_weight_prob);
  inst.nu = random_member(b, rng, spec.zero_weight_prob);
  return inst;
}

struct RandomSpec {
  InstanceSpec base;
  std::size_t count = 1;
};

/// Parses "perm:n=6,cycles=3+3,count=50,seed=7" or
/// "kernel:n=5,classes=1+1,count=10,seed=3".
inline RandomSpec parse_random_spec(const std::string& text) {
  RandomSpec out;
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  if (kind == "perm")
    out.base.kind = InstanceKind::Permutation;
  else if (kind == "kernel")
    out.base.kind = InstanceKind::Kernel;
  else
    throw Error(ErrorKind::InvalidInput, "random spec kind must be 'perm' or 'kernel', got '" + kind + "'");
  if (colon == std::string::npos) return out;

  auto parse_uint = [&](const std::string& key, const std::string& v) -> std::uint64_t {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
      throw Error(ErrorKind::InvalidInput, "random spec field '" + key + "' expects an unsigned integer, got '" + v + "'");
    return std::stoull(v);
  };
  std::stringstream fields(text.substr(colon + 1));
  std::string field;
  while (std::getline(fields, field, ',')) {
    if (field.empty()) continue;
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::InvalidInput, "random spec field '" + field + "' lacks '='");
    const std::string key = field.substr(0, eq), val = field.substr(eq + 1);
    if (key == "n") {
      out.base.n = parse_uint(key, val);
    } else if (key == "cycles" || key == "classes") {
      out.base.cycles.clear();
      std::stringstream parts(val);
      std::string part;
      while (std::getline(parts, part, '+')) out.base.cycles.push_back(parse_uint(key, part));
    } else if (key == "count") {
      out.count = parse_uint(key, val);
    } else if (key == "seed") {
      out.base.seed = parse_uint(key, val);
    } else {
      throw Error(ErrorKind::InvalidInput, "unknown random spec field '" + key + "'");
    }
  }
  return out;
}

}  // namespace ergot
