#pragma once

// Foundational data types: finite spaces, measures, plans, permutation
// actions, Markov kernels, cost matrices and constraint sets.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace ergot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Mass-balance tolerance for measures, plans and kernel rows.
inline constexpr double kMassTol = 1e-12;
/// Metric-axiom tolerance (triangle inequality, symmetry).
inline constexpr double kMetricTol = 1e-9;
/// Feasibility / optimality tolerance of the LP layer.
inline constexpr double kLpTol = 1e-9;
/// Pivot threshold below which a tableau entry counts as zero.
inline constexpr double kPivotTol = 1e-11;
/// Basic values this small (relative to the rhs scale) are roundoff residue of a degenerate basis.
inline constexpr double kSnapTol = 1e-14;
/// Numerical-rank threshold for row-space membership tests.
inline constexpr double kRankTol = 1e-8;
/// Gap allowed between two independently solved sides of a decomposition.
inline constexpr double kTheoremTol = 1e-8;

enum class ErrorKind {
  DimensionMismatch,
  InvalidInput,
  NotInSimplex,
  TransientMass,
  ProjectionNotFull,
  MissingProductStructure,
  NotFeasible,
  NotGeometric,
  CapExceeded,
  MarginalMismatch,
  Internal,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::NotInSimplex: return "NotInSimplex";
    case ErrorKind::TransientMass: return "TransientMass";
    case ErrorKind::ProjectionNotFull: return "ProjectionNotFull";
    case ErrorKind::MissingProductStructure: return "MissingProductStructure";
    case ErrorKind::NotFeasible: return "NotFeasible";
    case ErrorKind::NotGeometric: return "NotGeometric";
    case ErrorKind::CapExceeded: return "CapExceeded";
    case ErrorKind::MarginalMismatch: return "MarginalMismatch";
    case ErrorKind::Internal: return "Internal";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Short human-readable rendering of a real number (12 significant digits).
inline std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Spaces

/// Labeled finite point set. Points are indexed densely 0..n-1; labels are
/// presentation only.
struct FiniteSpace {
  std::vector<std::string> labels;

  static FiniteSpace indexed(std::size_t n) {
    FiniteSpace s;
    s.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) s.labels.push_back(std::to_string(i));
    return s;
  }

  std::size_t size() const { return labels.size(); }
  bool operator==(const FiniteSpace&) const = default;
};

/// Cell (x, y) of X x Y lives at index x * |Y| + y.
inline FiniteSpace product_space(const FiniteSpace& x, const FiniteSpace& y) {
  FiniteSpace s;
  s.labels.reserve(x.size() * y.size());
  for (const auto& a : x.labels)
    for (const auto& b : y.labels) s.labels.push_back("(" + a + "," + b + ")");
  return s;
}

struct GroundMetric {
  FiniteSpace space;
  Matrix d;
};

struct Measure {
  FiniteSpace space;
  Vector w;

  std::size_t size() const { return static_cast<std::size_t>(w.size()); }
  double operator[](std::size_t i) const { return w(static_cast<Eigen::Index>(i)); }
};

inline Measure dirac(const FiniteSpace& space, std::size_t at) {
  Measure m{space, Vector::Zero(static_cast<Eigen::Index>(space.size()))};
  m.w(static_cast<Eigen::Index>(at)) = 1.0;
  return m;
}

inline Measure uniform_on(const FiniteSpace& space, const std::vector<std::size_t>& points) {
  Measure m{space, Vector::Zero(static_cast<Eigen::Index>(space.size()))};
  for (auto p : points) m.w(static_cast<Eigen::Index>(p)) = 1.0 / static_cast<double>(points.size());
  return m;
}

struct TransportPlan {
  FiniteSpace row_space;
  FiniteSpace col_space;
  Matrix p;

  Measure row_marginal() const { return {row_space, p.rowwise().sum()}; }
  Measure col_marginal() const { return {col_space, p.colwise().sum().transpose()}; }
};

inline TransportPlan product_plan(const Measure& mu, const Measure& nu) {
  return {mu.space, nu.space, mu.w * nu.w.transpose()};
}

/// (Id, Id)_# mu.
inline TransportPlan diagonal_plan(const Measure& mu) {
  return {mu.space, mu.space, Matrix(mu.w.asDiagonal())};
}

// ---------------------------------------------------------------------------
// Actions and kernels

/// A permutation of {0..n-1}; image[i] is the image of point i.
struct Permutation {
  std::string label;
  std::vector<std::size_t> image;

  std::size_t size() const { return image.size(); }
  std::size_t operator()(std::size_t i) const { return image[i]; }

  static Permutation identity(std::size_t n, std::string label = "id") {
    Permutation g{std::move(label), std::vector<std::size_t>(n)};
    for (std::size_t i = 0; i < n; ++i) g.image[i] = i;
    return g;
  }

  bool is_identity() const {
    for (std::size_t i = 0; i < image.size(); ++i)
      if (image[i] != i) return false;
    return true;
  }

  bool is_bijection() const {
    std::vector<bool> hit(image.size(), false);
    for (auto v : image) {
      if (v >= image.size() || hit[v]) return false;
      hit[v] = true;
    }
    return true;
  }

  Permutation inverse() const {
    Permutation g{label + "^-1", std::vector<std::size_t>(image.size())};
    for (std::size_t i = 0; i < image.size(); ++i) g.image[image[i]] = i;
    return g;
  }

  /// (*this) after `first`: i -> this(first(i)). The result is unlabeled.
  Permutation after(const Permutation& first) const {
    Permutation g{{}, std::vector<std::size_t>(image.size())};
    for (std::size_t i = 0; i < image.size(); ++i) g.image[i] = image[first.image[i]];
    return g;
  }

  bool same_map(const Permutation& other) const { return image == other.image; }
};

struct GroupAction {
  FiniteSpace space;
  std::vector<Permutation> generators;
};

/// Row-stochastic matrix; row x is the measure Q^x.
struct StochKernel {
  FiniteSpace space;
  Matrix q;

  Measure row(std::size_t x) const {
    return {space, q.row(static_cast<Eigen::Index>(x)).transpose()};
  }
};

struct CostMatrix {
  FiniteSpace row_space;
  FiniteSpace col_space;
  Matrix c;
};

struct Constraint {
  std::string label;
  Matrix omega;
};

/// Finite spanning set of the functionals omega with <omega, pi> = 0.
struct ConstraintSet {
  FiniteSpace row_space;
  FiniteSpace col_space;
  std::vector<Constraint> omegas;

  std::size_t size() const { return omegas.size(); }
  bool empty() const { return omegas.empty(); }
};

/// <omega, pi> = sum_ij omega[i][j] p[i][j].
inline double pairing(const Matrix& omega, const Matrix& p) { return omega.cwiseProduct(p).sum(); }

inline double max_violation(const ConstraintSet& cs, const Matrix& p) {
  double worst = 0.0;
  for (const auto& c : cs.omegas) worst = std::max(worst, std::abs(pairing(c.omega, p)));
  return worst;
}

// ---------------------------------------------------------------------------
// Simplexes and decompositions

struct FullSimplex {
  FiniteSpace space;
};
struct GroupInvariant {
  GroupAction action;
};
struct KernelStationary {
  StochKernel kernel;
};

/// Which simplex of measures a marginal is drawn from.
struct SimplexSpec {
  std::variant<FullSimplex, GroupInvariant, KernelStationary> variant;

  static SimplexSpec full(FiniteSpace space) { return {FullSimplex{std::move(space)}}; }
  static SimplexSpec invariant(GroupAction action) { return {GroupInvariant{std::move(action)}}; }
  static SimplexSpec stationary(StochKernel kernel) { return {KernelStationary{std::move(kernel)}}; }

  const FiniteSpace& space() const {
    return std::visit(
        [](const auto& v) -> const FiniteSpace& {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, FullSimplex>)
            return v.space;
          else if constexpr (std::is_same_v<T, GroupInvariant>)
            return v.action.space;
          else
            return v.kernel.space;
        },
        variant);
  }

  const char* name() const {
    switch (variant.index()) {
      case 0: return "full";
      case 1: return "invariant";
      default: return "stationary";
    }
  }
};

/// Barycentric representation of a measure over the extreme points of its
/// simplex. Only components carrying positive weight are listed.
struct ErgodicDecomposition {
  std::vector<Measure> components;
  Vector weights;
  /// Point -> ergodic class id (index into the full boundary of the
  /// simplex), or -1 for transient points.
  std::vector<int> class_of;
  /// components[a] is the extreme point of class component_class[a].
  std::vector<std::size_t> component_class;
};

// ---------------------------------------------------------------------------
// Validation

using Violations = std::vector<std::string>;

namespace detail {

inline void check_mass(const Vector& w, const std::string& what, Violations& out) {
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w(i)))
      out.push_back(what + " entry " + std::to_string(i) + " is not finite");
    else if (w(i) < 0.0)
      out.push_back(what + " entry " + std::to_string(i) + " is negative (" + fmt_real(w(i)) + ")");
  }
  const double s = w.sum();
  if (!(std::abs(s - 1.0) <= kMassTol)) out.push_back("mass sum " + fmt_real(s) + " ≠ 1");
}

inline void check_labels(const FiniteSpace& s, Violations& out) {
  if (s.labels.empty()) out.push_back("space is empty");
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j)
      if (s.labels[i] == s.labels[j])
        out.push_back("duplicate label '" + s.labels[i] + "' at " + std::to_string(i) + " and " +
                      std::to_string(j));
}

inline void check_dims(Eigen::Index rows, Eigen::Index cols, std::size_t m, std::size_t n,
                       const std::string& what, Violations& out) {
  if (rows != static_cast<Eigen::Index>(m) || cols != static_cast<Eigen::Index>(n))
    out.push_back(what + " has shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                  ", expected " + std::to_string(m) + "x" + std::to_string(n));
}

}  // namespace detail

inline Violations validate(const FiniteSpace& s) {
  Violations out;
  detail::check_labels(s, out);
  return out;
}

inline Violations validate(const Measure& m) {
  Violations out = validate(m.space);
  if (m.size() != m.space.size()) {
    out.push_back("weight vector length " + std::to_string(m.size()) + " ≠ space size " +
                  std::to_string(m.space.size()));
    return out;
  }
  detail::check_mass(m.w, "weight", out);
  return out;
}

inline Violations validate(const GroundMetric& g) {
  Violations out = validate(g.space);
  const std::size_t n = g.space.size();
  detail::check_dims(g.d.rows(), g.d.cols(), n, n, "metric", out);
  if (!out.empty()) return out;
  for (Eigen::Index i = 0; i < g.d.rows(); ++i) {
    if (std::abs(g.d(i, i)) > kMetricTol)
      out.push_back("d[" + std::to_string(i) + "][" + std::to_string(i) + "] ≠ 0");
    for (Eigen::Index j = 0; j < g.d.cols(); ++j) {
      if (!std::isfinite(g.d(i, j))) {
        out.push_back("d[" + std::to_string(i) + "][" + std::to_string(j) + "] not finite");
        continue;
      }
      if (i != j && !(g.d(i, j) > 0.0))
        out.push_back("d[" + std::to_string(i) + "][" + std::to_string(j) + "] not positive");
      if (j > i && std::abs(g.d(i, j) - g.d(j, i)) > kMetricTol)
        out.push_back("d not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }
  for (Eigen::Index i = 0; i < g.d.rows(); ++i)
    for (Eigen::Index j = 0; j < g.d.rows(); ++j)
      for (Eigen::Index k = 0; k < g.d.rows(); ++k)
        if (g.d(i, k) > g.d(i, j) + g.d(j, k) + kMetricTol)
          out.push_back("triangle inequality fails for (" + std::to_string(i) + "," +
                        std::to_string(j) + "," + std::to_string(k) + ")");
  return out;
}

inline Violations validate(const TransportPlan& t) {
  Violations out;
  detail::check_dims(t.p.rows(), t.p.cols(), t.row_space.size(), t.col_space.size(), "plan", out);
  if (!out.empty()) return out;
  for (Eigen::Index i = 0; i < t.p.rows(); ++i)
    for (Eigen::Index j = 0; j < t.p.cols(); ++j)
      if (!(t.p(i, j) >= 0.0))
        out.push_back("p[" + std::to_string(i) + "][" + std::to_string(j) + "] negative or NaN");
  const double s = t.p.sum();
  if (!(std::abs(s - 1.0) <= kMassTol)) out.push_back("mass sum " + fmt_real(s) + " ≠ 1");
  return out;
}

inline Violations validate(const Permutation& g, std::size_t n) {
  Violations out;
  if (g.size() != n)
    out.push_back("generator '" + g.label + "' has degree " + std::to_string(g.size()) +
                  ", expected " + std::to_string(n));
  else if (!g.is_bijection())
    out.push_back("generator '" + g.label + "' is not a bijection");
  return out;
}

inline Violations validate(const GroupAction& a) {
  Violations out = validate(a.space);
  for (const auto& g : a.generators) {
    auto v = validate(g, a.space.size());
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

inline Violations validate(const StochKernel& k) {
  Violations out = validate(k.space);
  const std::size_t n = k.space.size();
  detail::check_dims(k.q.rows(), k.q.cols(), n, n, "kernel", out);
  if (!out.empty()) return out;
  for (Eigen::Index x = 0; x < k.q.rows(); ++x) {
    Violations row;
    detail::check_mass(k.q.row(x).transpose(), "kernel row " + std::to_string(x), row);
    for (auto& r : row)
      out.push_back(r.rfind("mass sum", 0) == 0 ? "kernel row " + std::to_string(x) + " " + r : r);
  }
  return out;
}

inline Violations validate(const CostMatrix& c) {
  Violations out;
  detail::check_dims(c.c.rows(), c.c.cols(), c.row_space.size(), c.col_space.size(), "cost", out);
  if (!out.empty()) return out;
  for (Eigen::Index i = 0; i < c.c.rows(); ++i)
    for (Eigen::Index j = 0; j < c.c.cols(); ++j)
      if (!std::isfinite(c.c(i, j)))
        out.push_back("c[" + std::to_string(i) + "][" + std::to_string(j) + "] not finite");
  return out;
}

inline Violations validate(const ConstraintSet& cs) {
  Violations out;
  for (const auto& c : cs.omegas) {
    detail::check_dims(c.omega.rows(), c.omega.cols(), cs.row_space.size(), cs.col_space.size(),
                       "constraint '" + c.label + "'", out);
    if (c.omega.size() > 0 && !c.omega.allFinite())
      out.push_back("constraint '" + c.label + "' has non-finite entries");
  }
  return out;
}

inline Violations validate(const ErgodicDecomposition& dec) {
  Violations out;
  for (std::size_t a = 0; a < dec.components.size(); ++a)
    for (auto& v : validate(dec.components[a]))
      out.push_back("component " + std::to_string(a) + ": " + v);
  if (static_cast<std::size_t>(dec.weights.size()) != dec.components.size()) {
    out.push_back("weight count ≠ component count");
    return out;
  }
  Violations w;
  detail::check_mass(dec.weights, "weight", w);
  for (auto& v : w) out.push_back("weights: " + v);
  return out;
}

// ---------------------------------------------------------------------------
// Elementary operations

/// g_# mu: result[g(i)] = mu[i].
inline Measure pushforward(const Permutation& g, const Measure& mu) {
  if (g.size() != mu.size())
    throw Error(ErrorKind::DimensionMismatch, "permutation degree " + std::to_string(g.size()) +
                                                  " vs measure size " + std::to_string(mu.size()));
  Measure out{mu.space, Vector::Zero(mu.w.size())};
  for (std::size_t i = 0; i < g.size(); ++i)
    out.w(static_cast<Eigen::Index>(g(i))) = mu.w(static_cast<Eigen::Index>(i));
  return out;
}

inline TransportPlan transpose_plan(const TransportPlan& t) {
  return {t.col_space, t.row_space, t.p.transpose()};
}

}  // namespace ergot
