#pragma once

// Kantorovich solvers with and without linear restrictions, the restricted
// Wasserstein distance, the boundary metric between extreme measures and its
// lift to the whole simplex, composition gluing and the ergodic
// decomposition of feasible plans.

#include "ergot/core.hpp"
#include "ergot/ergodic.hpp"
#include "ergot/lp.hpp"
#include "ergot/restriction.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace ergot {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class OtStatus { Optimal, Infeasible };

inline const char* to_string(OtStatus s) { return s == OtStatus::Optimal ? "Optimal" : "Infeasible"; }

struct OtResult {
  double value = kInfinity;
  TransportPlan plan;
  OtStatus status = OtStatus::Infeasible;
};

namespace detail {

inline void require_measure(const Measure& m, const char* what) {
  if (auto v = validate(m); !v.empty()) throw Error(ErrorKind::InvalidInput, std::string(what) + ": " + v.front());
}

// Transport LP over the cells charged by both marginals whose cost is finite;
// infinite costs mark forbidden cells.
inline OtResult solve_transport_lp(const Measure& mu, const Measure& nu, const Matrix& cost,
                                   const ConstraintSet* omega) {
  const auto m = static_cast<Eigen::Index>(mu.size());
  const auto n = static_cast<Eigen::Index>(nu.size());
  if (cost.rows() != m || cost.cols() != n)
    throw Error(ErrorKind::DimensionMismatch, "cost is " + std::to_string(cost.rows()) + "x" +
                                                  std::to_string(cost.cols()) + ", marginals " + std::to_string(m) +
                                                  "x" + std::to_string(n));
  if (omega && !omega->empty() &&
      (omega->row_space.size() != mu.size() || omega->col_space.size() != nu.size()))
    throw Error(ErrorKind::DimensionMismatch, "constraint shape does not match marginals");

  std::vector<Eigen::Index> rows_used, cols_used;
  for (Eigen::Index i = 0; i < m; ++i)
    if (mu.w(i) > 0.0) rows_used.push_back(i);
  for (Eigen::Index j = 0; j < n; ++j)
    if (nu.w(j) > 0.0) cols_used.push_back(j);

  std::vector<std::pair<Eigen::Index, Eigen::Index>> vars;
  for (auto i : rows_used)
    for (auto j : cols_used)
      if (std::isfinite(cost(i, j))) vars.emplace_back(i, j);
  const auto nv = static_cast<Eigen::Index>(vars.size());

  std::vector<Vector> rows;
  std::vector<double> rhs;
  for (auto i : rows_used) {
    Vector r = Vector::Zero(nv);
    for (Eigen::Index k = 0; k < nv; ++k)
      if (vars[static_cast<std::size_t>(k)].first == i) r(k) = 1.0;
    rows.push_back(std::move(r));
    rhs.push_back(mu.w(i));
  }
  // The last column marginal is implied by the others.
  for (std::size_t c = 0; c + 1 < cols_used.size(); ++c) {
    Vector r = Vector::Zero(nv);
    for (Eigen::Index k = 0; k < nv; ++k)
      if (vars[static_cast<std::size_t>(k)].second == cols_used[c]) r(k) = 1.0;
    rows.push_back(std::move(r));
    rhs.push_back(nu.w(cols_used[c]));
  }
  if (omega) {
    for (const auto& c : omega->omegas) {
      Vector r(nv);
      for (Eigen::Index k = 0; k < nv; ++k) {
        const auto [i, j] = vars[static_cast<std::size_t>(k)];
        r(k) = c.omega(i, j);
      }
      if (nv == 0 || r.cwiseAbs().maxCoeff() == 0.0) continue;
      rows.push_back(std::move(r));
      rhs.push_back(0.0);
    }
  }

  lp::LpProblem prob;
  prob.num_vars = static_cast<std::size_t>(nv);
  prob.objective.resize(nv);
  for (Eigen::Index k = 0; k < nv; ++k) {
    const auto [i, j] = vars[static_cast<std::size_t>(k)];
    prob.objective(k) = cost(i, j);
  }
  prob.eq_matrix.resize(static_cast<Eigen::Index>(rows.size()), nv);
  prob.eq_rhs.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    prob.eq_matrix.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    prob.eq_rhs(static_cast<Eigen::Index>(r)) = rhs[r];
  }

  const lp::LpSolution sol = lp::solve_lp(prob);
  OtResult res;
  res.plan = {mu.space, nu.space, Matrix::Zero(m, n)};
  if (sol.status == lp::LpStatus::Infeasible) return res;
  if (sol.status == lp::LpStatus::Unbounded)
    throw Error(ErrorKind::Internal, "transport LP reported unbounded");
  for (Eigen::Index k = 0; k < nv; ++k) {
    const auto [i, j] = vars[static_cast<std::size_t>(k)];
    res.plan.p(i, j) = (*sol.x)(k);
  }
  res.value = *sol.value;
  res.status = OtStatus::Optimal;
  return res;
}

}  // namespace detail

/// Unconstrained Kantorovich problem.
inline OtResult solve_ot(const Measure& mu, const Measure& nu, const CostMatrix& c) {
  detail::require_measure(mu, "mu");
  detail::require_measure(nu, "nu");
  if (auto v = validate(c); !v.empty()) throw Error(ErrorKind::DimensionMismatch, "cost: " + v.front());
  return detail::solve_transport_lp(mu, nu, c.c, nullptr);
}

/// Kantorovich problem over Pi_R(mu, nu). Infeasibility is reported through
/// the status, never relaxed.
inline OtResult solve_constrained_ot(const Measure& mu, const Measure& nu, const CostMatrix& c,
                                     const LinearRestriction& r) {
  detail::require_measure(mu, "mu");
  detail::require_measure(nu, "nu");
  if (auto v = validate(c); !v.empty()) throw Error(ErrorKind::DimensionMismatch, "cost: " + v.front());
  require_in_simplex(mu, r.mx_spec, "mu");
  require_in_simplex(nu, r.my_spec, "nu");
  return detail::solve_transport_lp(mu, nu, c.c, &r.omega);
}

inline CostMatrix powered_cost(const GroundMetric& d, double p) {
  return {d.space, d.space, d.d.array().pow(p).matrix()};
}

inline double root_of(double value, double p) {
  if (!std::isfinite(value)) return kInfinity;
  return std::pow(std::max(value, 0.0), 1.0 / p);
}

inline void require_exponent(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw Error(ErrorKind::InvalidInput, "exponent p must be finite and >= 1");
}

/// W_p^R(mu, nu); +inf when Pi_R(mu, nu) is empty.
inline double wasserstein(const Measure& mu, const Measure& nu, const GroundMetric& d, double p,
                          const LinearRestriction& r) {
  require_exponent(p);
  if (r.x_space().size() != r.y_space().size())
    throw Error(ErrorKind::DimensionMismatch, "Wasserstein distance needs X = Y");
  const OtResult res = solve_constrained_ot(mu, nu, powered_cost(d, p), r);
  return res.status == OtStatus::Optimal ? root_of(res.value, p) : kInfinity;
}

// ---------------------------------------------------------------------------
// Boundary metric and its lift

struct BoundaryMetricMatrix {
  std::vector<Measure> components;
  /// k x k, +inf where no restricted plan exists.
  Matrix dbar;
};

inline BoundaryMetricMatrix boundary_metric(const SimplexSpec& spec, const GroundMetric& d, double p,
                                            const LinearRestriction& r) {
  require_exponent(p);
  BoundaryMetricMatrix bm{boundary(spec).extremes, {}};
  const CheckReport geo = check_geometric(r, bm.components);
  if (!geo.passed) throw Error(ErrorKind::NotGeometric, geo.failures.front());
  const auto k = static_cast<Eigen::Index>(bm.components.size());
  bm.dbar = Matrix::Zero(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      bm.dbar(a, b) = wasserstein(bm.components[static_cast<std::size_t>(a)],
                                  bm.components[static_cast<std::size_t>(b)], d, p, r);
  return bm;
}

inline FiniteSpace component_space(std::size_t k) {
  FiniteSpace s;
  for (std::size_t a = 0; a < k; ++a) s.labels.push_back("xi" + std::to_string(a));
  return s;
}

/// Outer Wasserstein distance between the boundary measures of mu and nu
/// with the boundary metric as ground cost.
inline double lifted_metric(const Measure& mu, const Measure& nu, const BoundaryMetricMatrix& bm,
                            const SimplexSpec& spec, double p) {
  require_exponent(p);
  const std::size_t k = bm.components.size();
  const ErgodicDecomposition dm = decompose_measure(mu, spec);
  const ErgodicDecomposition dn = decompose_measure(nu, spec);
  for (const auto* dec : {&dm, &dn})
    for (auto cls : dec->component_class)
      if (cls >= k) throw Error(ErrorKind::DimensionMismatch, "boundary metric does not cover the simplex");
  const FiniteSpace cs = component_space(k);
  const Measure wm{cs, boundary_weights(dm, k)};
  const Measure wn{cs, boundary_weights(dn, k)};
  const Matrix cost = bm.dbar.array().pow(p).matrix();
  const OtResult res = detail::solve_transport_lp(wm, wn, cost, nullptr);
  return res.status == OtStatus::Optimal ? root_of(res.value, p) : kInfinity;
}

// ---------------------------------------------------------------------------
// Gluing

/// Dense 3-index table gamma[x][y][z].
struct JointTable {
  std::size_t nx = 0, ny = 0, nz = 0;
  std::vector<double> data;

  double& at(std::size_t x, std::size_t y, std::size_t z) { return data[(x * ny + y) * nz + z]; }
  double at(std::size_t x, std::size_t y, std::size_t z) const { return data[(x * ny + y) * nz + z]; }
};

struct GluingResult {
  JointTable gamma;
  TransportPlan pi13;
  bool feasible = false;
  /// max |Pr_12(gamma) - pi12| and |Pr_23(gamma) - pi23| over cells.
  double projection_error = 0.0;
};

/// Composition gluing gamma[x][y][z] = pi12[x][y] pi23[y][z] / mu2[y].
inline GluingResult glue_plans(const TransportPlan& pi12, const TransportPlan& pi23, const LinearRestriction& r) {
  if (pi12.p.cols() != pi23.p.rows())
    throw Error(ErrorKind::DimensionMismatch, "middle spaces differ in size");
  const Vector mid12 = pi12.p.colwise().sum().transpose();
  const Vector mid23 = pi23.p.rowwise().sum();
  const double mismatch = (mid12 - mid23).cwiseAbs().maxCoeff();
  if (mismatch > kMassTol)
    throw Error(ErrorKind::MarginalMismatch, "middle marginals differ by " + fmt_real(mismatch));

  GluingResult out;
  const auto nx = static_cast<std::size_t>(pi12.p.rows());
  const auto ny = static_cast<std::size_t>(pi12.p.cols());
  const auto nz = static_cast<std::size_t>(pi23.p.cols());
  out.gamma = {nx, ny, nz, std::vector<double>(nx * ny * nz, 0.0)};
  out.pi13 = {pi12.row_space, pi23.col_space, Matrix::Zero(pi12.p.rows(), pi23.p.cols())};
  for (std::size_t y = 0; y < ny; ++y) {
    const double m = mid12(static_cast<Eigen::Index>(y));
    if (m <= kMassTol) continue;
    for (std::size_t x = 0; x < nx; ++x) {
      const double a = pi12.p(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
      if (a == 0.0) continue;
      for (std::size_t z = 0; z < nz; ++z) {
        const double g = a * pi23.p(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(z)) / m;
        out.gamma.at(x, y, z) = g;
        out.pi13.p(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(z)) += g;
      }
    }
  }
  double err = 0.0;
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) {
      double s = 0.0;
      for (std::size_t z = 0; z < nz; ++z) s += out.gamma.at(x, y, z);
      err = std::max(err, std::abs(s - pi12.p(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y))));
    }
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t z = 0; z < nz; ++z) {
      double s = 0.0;
      for (std::size_t x = 0; x < nx; ++x) s += out.gamma.at(x, y, z);
      err = std::max(err, std::abs(s - pi23.p(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(z))));
    }
  out.projection_error = err;
  const bool shapes_match = r.omega.row_space.size() == nx && r.omega.col_space.size() == nz;
  out.feasible = r.omega.empty() || (shapes_match && max_violation(r.omega, out.pi13.p) <= kLpTol);
  return out;
}

// ---------------------------------------------------------------------------
// Plan decomposition

struct PlanDecomposition {
  std::vector<TransportPlan> components;
  Vector weights;
  /// Cell -> product atom, or -1 for transient cells.
  std::vector<int> atom_of;
  std::vector<std::size_t> component_atom;
  /// Boundary classes (alpha, beta) of each component's marginals.
  std::vector<std::pair<std::size_t, std::size_t>> marginal_class;
};

/// Conditional plans of pi on the product ergodic atoms carrying mass.
inline PlanDecomposition decompose_plan(const TransportPlan& pi, const LinearRestriction& r) {
  const ProductPartition part = product_partition(r);
  const double viol = max_violation(r.omega, pi.p);
  if (viol > kLpTol) throw Error(ErrorKind::NotFeasible, "plan violates Omega by " + fmt_real(viol));
  const std::size_t nx = r.x_space().size(), ny = r.y_space().size();
  if (static_cast<std::size_t>(pi.p.rows()) != nx || static_cast<std::size_t>(pi.p.cols()) != ny)
    throw Error(ErrorKind::DimensionMismatch, "plan shape does not match restriction");

  const Boundary bx = boundary(r.mx_spec), by = boundary(r.my_spec);
  PlanDecomposition out;
  out.atom_of = part.atom_of;
  std::vector<double> w;
  for (std::size_t a = 0; a < part.atoms.size(); ++a) {
    double mass = 0.0;
    for (auto cell : part.atoms[a])
      mass += pi.p(static_cast<Eigen::Index>(cell / ny), static_cast<Eigen::Index>(cell % ny));
    if (mass <= kMassTol) continue;
    TransportPlan comp{pi.row_space, pi.col_space, Matrix::Zero(pi.p.rows(), pi.p.cols())};
    for (auto cell : part.atoms[a]) {
      const auto x = static_cast<Eigen::Index>(cell / ny), y = static_cast<Eigen::Index>(cell % ny);
      comp.p(x, y) = pi.p(x, y) / mass;
    }
    // Marginals of an ergodic plan must be carried by a single class each.
    const Vector rm = comp.p.rowwise().sum(), cm = comp.p.colwise().sum().transpose();
    auto single_class = [](const Vector& m, const std::vector<int>& class_of) {
      int cls = -1;
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (m(i) <= kMassTol) continue;
        const int c = class_of[static_cast<std::size_t>(i)];
        if (c < 0 || (cls >= 0 && c != cls)) return -1;
        cls = c;
      }
      return cls;
    };
    const int ca = single_class(rm, bx.class_of), cb = single_class(cm, by.class_of);
    if (ca < 0 || cb < 0)
      throw Error(ErrorKind::Internal, "component on atom " + std::to_string(a) + " has a non-extreme marginal");
    out.components.push_back(std::move(comp));
    out.component_atom.push_back(a);
    out.marginal_class.emplace_back(static_cast<std::size_t>(ca), static_cast<std::size_t>(cb));
    w.push_back(mass);
  }
  out.weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
  return out;
}

}  // namespace ergot
