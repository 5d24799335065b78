#pragma once

// Linear restrictions R = (Omega, M^X, M^Y) on transport plans: invariance,
// subgroup and stationarity families, plus the property checkers used before
// trusting a decomposition (weak regularity, geometricity, coherency and
// ergodic decomposability).

#include "ergot/core.hpp"
#include "ergot/ergodic.hpp"
#include "ergot/group.hpp"
#include "ergot/lp.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ergot {

struct LinearRestriction {
  ConstraintSet omega;
  SimplexSpec mx_spec;
  SimplexSpec my_spec;
  /// Action on X x Y whose orbits are the product ergodic atoms.
  std::optional<GroupAction> product_action;
  /// Ergodic kernel on X x Y whose recurrent classes are the product atoms.
  std::optional<StochKernel> product_kernel;

  const FiniteSpace& x_space() const { return omega.row_space; }
  const FiniteSpace& y_space() const { return omega.col_space; }
  bool has_product_structure() const { return product_action.has_value() || product_kernel.has_value(); }
};

inline std::string cell_name(std::size_t x, std::size_t y) {
  return "(" + std::to_string(x) + "," + std::to_string(y) + ")";
}

/// (g, h) acting on X x Y, cell (x, y) at index x * |Y| + y.
inline Permutation product_permutation(const Permutation& g, const Permutation& h, std::string label) {
  const std::size_t ny = h.size();
  Permutation out{std::move(label), std::vector<std::size_t>(g.size() * ny)};
  for (std::size_t x = 0; x < g.size(); ++x)
    for (std::size_t y = 0; y < ny; ++y) out.image[x * ny + y] = g(x) * ny + h(y);
  return out;
}

namespace detail {

// One constraint 1_parent - 1_child per edge of a BFS spanning tree of every
// product orbit, rooted at the orbit's smallest cell. A plan satisfies them
// all iff it is constant on each orbit.
inline std::vector<Constraint> orbit_constraints(std::size_t nx, std::size_t ny,
                                                 const std::vector<Permutation>& gens,
                                                 const std::string& prefix) {
  std::vector<Constraint> out;
  std::vector<bool> seen(nx * ny, false);
  const auto rows = static_cast<Eigen::Index>(nx);
  const auto cols = static_cast<Eigen::Index>(ny);
  for (std::size_t root = 0; root < nx * ny; ++root) {
    if (seen[root]) continue;
    seen[root] = true;
    std::vector<std::size_t> queue{root};
    for (std::size_t k = 0; k < queue.size(); ++k) {
      const std::size_t cell = queue[k];
      for (const auto& g : gens) {
        const std::size_t next = g(cell);
        if (seen[next]) continue;
        seen[next] = true;
        queue.push_back(next);
        Matrix w = Matrix::Zero(rows, cols);
        w(static_cast<Eigen::Index>(cell / ny), static_cast<Eigen::Index>(cell % ny)) += 1.0;
        w(static_cast<Eigen::Index>(next / ny), static_cast<Eigen::Index>(next % ny)) -= 1.0;
        out.push_back({prefix + ":" + g.label + ":" + cell_name(cell / ny, cell % ny), std::move(w)});
      }
    }
  }
  return out;
}

inline Vector flatten(const Matrix& m) {
  Vector v(m.size());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v(k++) = m(i, j);
  return v;
}

inline void require_ergodic(const StochKernel& k, const char* which) {
  auto check = check_ergodic_kernel(k);
  if (!check.ok) throw Error(ErrorKind::InvalidInput, std::string(which) + " kernel is not ergodic: " + check.details.front());
}

}  // namespace detail

/// Checks the structural invariants and returns the restriction.
inline LinearRestriction make_restriction(ConstraintSet omega, SimplexSpec mx, SimplexSpec my,
                                          std::optional<GroupAction> product_action = std::nullopt,
                                          std::optional<StochKernel> product_kernel = std::nullopt) {
  if (auto v = validate(omega); !v.empty()) throw Error(ErrorKind::DimensionMismatch, v.front());
  if (!(mx.space().size() == omega.row_space.size() && my.space().size() == omega.col_space.size()))
    throw Error(ErrorKind::DimensionMismatch, "simplex spaces do not match constraint shape");
  const std::size_t cells = omega.row_space.size() * omega.col_space.size();
  if (product_action) {
    require_valid(*product_action);
    if (product_action->space.size() != cells)
      throw Error(ErrorKind::DimensionMismatch, "product action must act on |X|*|Y| cells");
  }
  if (product_kernel) {
    if (product_kernel->space.size() != cells)
      throw Error(ErrorKind::DimensionMismatch, "product kernel must act on |X|*|Y| cells");
    detail::require_ergodic(*product_kernel, "product");
  }
  return {std::move(omega), std::move(mx), std::move(my), std::move(product_action), std::move(product_kernel)};
}

/// No constraints, full simplexes, trivial product action.
inline LinearRestriction unconstrained_restriction(const FiniteSpace& x, const FiniteSpace& y) {
  return make_restriction(ConstraintSet{x, y, {}}, SimplexSpec::full(x), SimplexSpec::full(y),
                          GroupAction{product_space(x, y), {}});
}

/// Plans invariant under the diagonal action g(x, y) = (g(x), g(y)).
inline LinearRestriction invariance_restriction(const GroupAction& action) {
  require_valid(action);
  const std::size_t n = action.space.size();
  GroupAction diag{product_space(action.space, action.space), {}};
  for (const auto& g : action.generators) diag.generators.push_back(product_permutation(g, g, g.label));
  ConstraintSet omega{action.space, action.space, detail::orbit_constraints(n, n, diag.generators, "invariance")};
  return make_restriction(std::move(omega), SimplexSpec::invariant(action), SimplexSpec::invariant(action),
                          std::move(diag));
}

/// Plans invariant under the subgroup of G x G generated by `pairs`. Both
/// projections of the subgroup must equal the group generated by the action.
inline LinearRestriction subgroup_restriction(const GroupAction& action,
                                              const std::vector<std::pair<Permutation, Permutation>>& pairs) {
  require_valid(action);
  const std::size_t n = action.space.size();
  std::vector<Permutation> first, second;
  for (const auto& [g, h] : pairs) {
    for (const auto* p : {&g, &h}) {
      auto v = validate(*p, n);
      if (!v.empty()) throw Error(ErrorKind::InvalidInput, v.front());
    }
    first.push_back(g);
    second.push_back(h);
  }
  const PermGroup whole(n, action.generators);
  for (const auto* side : {&first, &second}) {
    const PermGroup proj(n, *side);
    const char* which = side == &first ? "first" : "second";
    for (const auto& p : *side)
      if (!whole.contains(p))
        throw Error(ErrorKind::ProjectionNotFull,
                    std::string(which) + " component '" + format_cycles(p) + "' lies outside the acting group");
    for (const auto& g : action.generators)
      if (!proj.contains(g))
        throw Error(ErrorKind::ProjectionNotFull, std::string(which) + " projection misses generator '" + g.label + "'");
  }

  GroupAction prod{product_space(action.space, action.space), {}};
  for (const auto& [g, h] : pairs)
    prod.generators.push_back(product_permutation(g, h, (g.label.empty() ? format_cycles(g) : g.label) + "x" +
                                                            (h.label.empty() ? format_cycles(h) : h.label)));
  ConstraintSet omega{action.space, action.space, detail::orbit_constraints(n, n, prod.generators, "subgroup")};
  return make_restriction(std::move(omega), SimplexSpec::invariant(action), SimplexSpec::invariant(action),
                          std::move(prod));
}

/// q_M[(x,y)][(x',y')] = qx[x][x'] * qy[y][y'].
inline StochKernel product_kernel(const StochKernel& qx, const StochKernel& qy) {
  const Eigen::Index nx = qx.q.rows(), ny = qy.q.rows();
  StochKernel out{product_space(qx.space, qy.space), Matrix::Zero(nx * ny, nx * ny)};
  for (Eigen::Index x = 0; x < nx; ++x)
    for (Eigen::Index y = 0; y < ny; ++y)
      for (Eigen::Index a = 0; a < nx; ++a) {
        const double f = qx.q(x, a);
        if (f == 0.0) continue;
        for (Eigen::Index b = 0; b < ny; ++b) out.q(x * ny + y, a * ny + b) = f * qy.q(y, b);
      }
  return out;
}

/// Plans stationary under the product kernel: Omega = {1_c - Q_M(1_c)}.
inline LinearRestriction stationarity_restriction(const StochKernel& qx, const StochKernel& qy) {
  detail::require_ergodic(qx, "X");
  detail::require_ergodic(qy, "Y");
  StochKernel qm = product_kernel(qx, qy);
  const auto nx = static_cast<std::size_t>(qx.q.rows());
  const auto ny = static_cast<std::size_t>(qy.q.rows());
  ConstraintSet omega{qx.space, qy.space, {}};
  for (std::size_t c = 0; c < nx * ny; ++c) {
    Matrix w(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(ny));
    for (std::size_t z = 0; z < nx * ny; ++z)
      w(static_cast<Eigen::Index>(z / ny), static_cast<Eigen::Index>(z % ny)) =
          (z == c ? 1.0 : 0.0) - qm.q(static_cast<Eigen::Index>(z), static_cast<Eigen::Index>(c));
    if (w.cwiseAbs().maxCoeff() <= kMassTol) continue;
    omega.omegas.push_back({"stationarity:" + cell_name(c / ny, c % ny), std::move(w)});
  }
  return make_restriction(std::move(omega), SimplexSpec::stationary(qx), SimplexSpec::stationary(qy), std::nullopt,
                          std::move(qm));
}

// ---------------------------------------------------------------------------
// Product ergodic partition

struct ProductPartition {
  /// Cell -> atom index, or -1 for transient cells.
  std::vector<int> atom_of;
  std::vector<std::vector<std::size_t>> atoms;
  /// Extreme plan carried by each atom, flattened over cells.
  std::vector<Vector> extreme_plans;
};

inline ProductPartition product_partition(const LinearRestriction& r) {
  ProductPartition out;
  if (r.product_action) {
    const auto part = orbit_decompose(*r.product_action);
    out.atoms = part.orbits;
    for (auto o : part.orbit_of) out.atom_of.push_back(static_cast<int>(o));
    for (const auto& a : out.atoms) out.extreme_plans.push_back(uniform_on(r.product_action->space, a).w);
  } else if (r.product_kernel) {
    auto dec = stationary_components(*r.product_kernel);
    out.atoms = std::move(dec.classes);
    out.atom_of = std::move(dec.class_of);
    for (auto& m : dec.components) out.extreme_plans.push_back(std::move(m.w));
  } else {
    throw Error(ErrorKind::MissingProductStructure, "restriction carries neither a product action nor a product kernel");
  }
  return out;
}

inline Matrix unflatten(const Vector& v, std::size_t nx, std::size_t ny) {
  Matrix m(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(ny));
  for (std::size_t c = 0; c < nx * ny; ++c)
    m(static_cast<Eigen::Index>(c / ny), static_cast<Eigen::Index>(c % ny)) = v(static_cast<Eigen::Index>(c));
  return m;
}

// ---------------------------------------------------------------------------
// Property checkers

struct CheckReport {
  std::string check;
  bool passed = true;
  std::vector<std::string> notes;
  std::vector<std::string> failures;

  void fail(std::string why) {
    passed = false;
    failures.push_back(std::move(why));
  }
};

/// Weak regularity: Pi_R(mu, nu) is nonempty, witnessed by mu (x) nu.
inline CheckReport check_weak_regularity(const LinearRestriction& r,
                                         const std::vector<std::pair<Measure, Measure>>& samples) {
  CheckReport rep{"weak-regularity"};
  rep.notes.push_back("closedness of the simplexes and continuity of Omega hold automatically on finite spaces");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& [mu, nu] = samples[i];
    if (auto v = simplex_violation(mu, r.mx_spec)) {
      rep.fail("sample " + std::to_string(i) + ": mu " + *v);
      continue;
    }
    if (auto v = simplex_violation(nu, r.my_spec)) {
      rep.fail("sample " + std::to_string(i) + ": nu " + *v);
      continue;
    }
    const Matrix prod = mu.w * nu.w.transpose();
    for (const auto& c : r.omega.omegas) {
      const double val = pairing(c.omega, prod);
      if (std::abs(val) > kLpTol) {
        rep.fail("sample " + std::to_string(i) + ": <" + c.label + ", mu x nu> = " + fmt_real(val));
        break;
      }
    }
  }
  return rep;
}

/// Geometricity: Omega vanishes on diagonal plans and product plans of
/// simplex members, and its span is closed under transposition.
inline CheckReport check_geometric(const LinearRestriction& r, const std::vector<Measure>& samples) {
  CheckReport rep{"geometric"};
  if (r.x_space().size() != r.y_space().size())
    throw Error(ErrorKind::DimensionMismatch, "geometricity needs X = Y");
  rep.notes.push_back("weak closedness of the simplex holds automatically on finite spaces");
  for (const auto& c : r.omega.omegas) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double diag = c.omega.diagonal().dot(samples[i].w);
      if (std::abs(diag) > kLpTol) {
        rep.fail("diagonal: <" + c.label + ", (Id,Id)#mu_" + std::to_string(i) + "> = " + fmt_real(diag));
        break;
      }
    }
    bool product_ok = true;
    for (std::size_t i = 0; i < samples.size() && product_ok; ++i) {
      for (std::size_t j = 0; j < samples.size() && product_ok; ++j) {
        const double val = samples[i].w.dot(c.omega * samples[j].w);
        if (std::abs(val) > kLpTol) {
          rep.fail("product: <" + c.label + ", mu_" + std::to_string(i) + " x mu_" + std::to_string(j) +
                   "> = " + fmt_real(val));
          product_ok = false;
        }
      }
    }
  }
  lp::RowSpace span(static_cast<Eigen::Index>(r.x_space().size() * r.y_space().size()));
  for (const auto& c : r.omega.omegas) span.add(detail::flatten(c.omega));
  for (const auto& c : r.omega.omegas)
    if (!span.contains(detail::flatten(c.omega.transpose())))
      rep.fail("transpose: " + c.label + "^T is outside span(Omega)");
  return rep;
}

/// Coherency: every omega integrates to zero over each product atom against
/// each feasible sample plan.
inline CheckReport check_coherency(const LinearRestriction& r, const std::vector<TransportPlan>& plans) {
  const ProductPartition part = product_partition(r);
  CheckReport rep{"coherency"};
  rep.notes.push_back("quantified over the atoms of the product ergodic partition");
  const std::size_t ny = r.y_space().size();
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const Matrix& p = plans[i].p;
    if (max_violation(r.omega, p) > kLpTol) {
      rep.fail("plan " + std::to_string(i) + " does not satisfy Omega");
      continue;
    }
    for (const auto& c : r.omega.omegas) {
      for (std::size_t a = 0; a < part.atoms.size(); ++a) {
        double s = 0.0;
        for (auto cell : part.atoms[a]) {
          const auto x = static_cast<Eigen::Index>(cell / ny), y = static_cast<Eigen::Index>(cell % ny);
          s += c.omega(x, y) * p(x, y);
        }
        if (std::abs(s) > kLpTol) {
          rep.fail("plan " + std::to_string(i) + ": " + c.label + " integrates to " + fmt_real(s) + " on atom " +
                   std::to_string(a));
        }
      }
    }
  }
  return rep;
}

/// Ergodic decomposability: Pi_R lies in the product simplex M, product
/// atoms refine the marginal-class rectangles, and every extreme plan of M
/// has extreme marginals.
inline CheckReport check_ergodic_decomposability(const LinearRestriction& r) {
  const ProductPartition part = product_partition(r);
  CheckReport rep{"ergodic-decomposability"};
  const std::size_t nx = r.x_space().size(), ny = r.y_space().size();

  // Pi_R in M: the functionals defining M lie in span(Omega).
  lp::RowSpace span(static_cast<Eigen::Index>(nx * ny));
  for (const auto& c : r.omega.omegas) span.add(detail::flatten(c.omega));
  std::size_t missing = 0;
  if (r.product_action) {
    for (const auto& g : r.product_action->generators)
      for (std::size_t cell = 0; cell < nx * ny; ++cell) {
        if (g(cell) == cell) continue;
        Vector v = Vector::Zero(static_cast<Eigen::Index>(nx * ny));
        v(static_cast<Eigen::Index>(cell)) = 1.0;
        v(static_cast<Eigen::Index>(g(cell))) -= 1.0;
        if (!span.contains(v)) ++missing;
      }
  } else {
    const Matrix& q = r.product_kernel->q;
    for (Eigen::Index c = 0; c < q.cols(); ++c) {
      Vector v = -q.col(c);
      v(c) += 1.0;
      if (!span.contains(v)) ++missing;
    }
  }
  if (missing > 0) rep.fail(std::to_string(missing) + " defining functionals of M lie outside span(Omega)");

  const Boundary bx = boundary(r.mx_spec), by = boundary(r.my_spec);
  for (std::size_t a = 0; a < part.atoms.size(); ++a) {
    const std::size_t first = part.atoms[a].front();
    const int cx = bx.class_of[first / ny], cy = by.class_of[first % ny];
    for (auto cell : part.atoms[a]) {
      if (bx.class_of[cell / ny] != cx || by.class_of[cell % ny] != cy) {
        rep.fail("atom " + std::to_string(a) + " straddles marginal classes");
        break;
      }
    }
    const Matrix plan = unflatten(part.extreme_plans[a], nx, ny);
    const Measure mx{r.x_space(), plan.rowwise().sum()};
    const Measure my{r.y_space(), plan.colwise().sum().transpose()};
    try {
      if (decompose_measure(mx, r.mx_spec).components.size() != 1 ||
          decompose_measure(my, r.my_spec).components.size() != 1)
        rep.fail("extreme plan on atom " + std::to_string(a) + " has a non-extreme marginal");
    } catch (const Error& e) {
      rep.fail("extreme plan on atom " + std::to_string(a) + ": " + e.what());
    }
  }
  return rep;
}

}  // namespace ergot
