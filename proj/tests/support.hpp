#pragma once

// Shared fixtures and independent oracles for the test suites.

#include "ergot/ergot.hpp"

#include <cmath>
#include <vector>

namespace ergot::testing {

inline FiniteSpace c3x2_space() { return FiniteSpace{{"a0", "a1", "a2", "b0", "b1", "b2"}}; }

inline GroupAction c3x2_action() {
  return GroupAction{c3x2_space(), {parse_cycles("(0 1 2)(3 4 5)", 6, "g")}};
}

/// 0 on the diagonal, 1 inside a 3-block, 2 across blocks.
inline GroundMetric block_metric() {
  GroundMetric d{c3x2_space(), Matrix::Zero(6, 6)};
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) d.d(i, j) = i == j ? 0.0 : (i / 3 == j / 3 ? 1.0 : 2.0);
  return d;
}

inline Measure c3x2_mix(double w1) {
  Measure m{c3x2_space(), Vector::Zero(6)};
  for (int i = 0; i < 3; ++i) {
    m.w(i) = w1 / 3.0;
    m.w(i + 3) = (1.0 - w1) / 3.0;
  }
  return m;
}

inline Measure measure(const std::vector<double>& w) {
  Measure m{FiniteSpace::indexed(w.size()), Vector(static_cast<Eigen::Index>(w.size()))};
  for (std::size_t i = 0; i < w.size(); ++i) m.w(static_cast<Eigen::Index>(i)) = w[i];
  return m;
}

inline StochKernel kernel(const std::vector<std::vector<double>>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  StochKernel k{FiniteSpace::indexed(rows.size()), Matrix(n, n)};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) k.q(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return k;
}

/// Transport LP over every cell with every marginal and constraint row kept
/// (the production solver prunes these; the oracle does not).
inline lp::LpProblem full_transport_lp(const Vector& mu, const Vector& nu, const Matrix& cost,
                                       const std::vector<Matrix>& omegas = {}) {
  const Eigen::Index nx = mu.size(), ny = nu.size(), nv = nx * ny;
  lp::LpProblem prob;
  prob.num_vars = static_cast<std::size_t>(nv);
  prob.objective = Vector(nv);
  for (Eigen::Index x = 0; x < nx; ++x)
    for (Eigen::Index y = 0; y < ny; ++y) prob.objective(x * ny + y) = cost(x, y);
  const Eigen::Index rows = nx + ny + static_cast<Eigen::Index>(omegas.size());
  prob.eq_matrix = Matrix::Zero(rows, nv);
  prob.eq_rhs = Vector::Zero(rows);
  for (Eigen::Index x = 0; x < nx; ++x) {
    for (Eigen::Index y = 0; y < ny; ++y) prob.eq_matrix(x, x * ny + y) = 1.0;
    prob.eq_rhs(x) = mu(x);
  }
  for (Eigen::Index y = 0; y < ny; ++y) {
    for (Eigen::Index x = 0; x < nx; ++x) prob.eq_matrix(nx + y, x * ny + y) = 1.0;
    prob.eq_rhs(nx + y) = nu(y);
  }
  for (std::size_t k = 0; k < omegas.size(); ++k)
    for (Eigen::Index x = 0; x < nx; ++x)
      for (Eigen::Index y = 0; y < ny; ++y)
        prob.eq_matrix(nx + ny + static_cast<Eigen::Index>(k), x * ny + y) = omegas[k](x, y);
  return prob;
}

inline std::vector<Matrix> omega_matrices(const ConstraintSet& cs) {
  std::vector<Matrix> out;
  for (const auto& c : cs.omegas) out.push_back(c.omega);
  return out;
}

/// Minimum over all vertices of the full transport polytope.
inline std::optional<double> oracle_value(const Vector& mu, const Vector& nu, const Matrix& cost,
                                          const std::vector<Matrix>& omegas = {}, std::uint64_t cap = 5'000'000) {
  const lp::LpProblem prob = full_transport_lp(mu, nu, cost, omegas);
  return lp::vertex_minimum(prob, lp::enumerate_vertices(prob, cap));
}

/// Invariant transport on the product orbits of a diagonal action: one
/// variable per orbit (its total mass), spread uniformly over the orbit.
/// Vertex enumeration stays small because there are few orbits.
inline std::optional<double> orbit_quotient_oracle(const GroupAction& action, const Vector& mu, const Vector& nu,
                                                   const Matrix& cost) {
  const std::size_t n = action.space.size();
  std::vector<Permutation> gens;
  for (const auto& g : action.generators) gens.push_back(product_permutation(g, g, g.label));
  const auto orbits = orbits_of(n * n, gens);
  const auto k = static_cast<Eigen::Index>(orbits.size());
  const auto nn = static_cast<Eigen::Index>(n);
  lp::LpProblem prob;
  prob.num_vars = orbits.size();
  prob.objective = Vector::Zero(k);
  prob.eq_matrix = Matrix::Zero(2 * nn, k);
  prob.eq_rhs = Vector(2 * nn);
  prob.eq_rhs << mu, nu;
  for (Eigen::Index o = 0; o < k; ++o) {
    const auto& cells = orbits[static_cast<std::size_t>(o)];
    const double share = 1.0 / static_cast<double>(cells.size());
    for (auto cell : cells) {
      const auto x = static_cast<Eigen::Index>(cell / n), y = static_cast<Eigen::Index>(cell % n);
      prob.objective(o) += share * cost(x, y);
      prob.eq_matrix(x, o) += share;
      prob.eq_matrix(nn + y, o) += share;
    }
  }
  return lp::vertex_minimum(prob, lp::enumerate_vertices(prob, 1'000'000));
}

/// (Qf)(x) = sum_y q[x][y] f(y).
inline Vector apply(const Matrix& q, const Vector& f) { return q * f; }

/// max over indicator pairs of |Q(g Q(f)) - Q(g) Q(f)|.
inline double multiplicativity_defect(const Matrix& q) {
  const Eigen::Index n = q.rows();
  double worst = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) {
    const Vector f = Vector::Unit(n, a);
    const Vector qf = apply(q, f);
    for (Eigen::Index b = 0; b < n; ++b) {
      const Vector g = Vector::Unit(n, b);
      const Vector lhs = apply(q, g.cwiseProduct(qf));
      const Vector rhs = apply(q, g).cwiseProduct(qf);
      worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

inline Matrix random_cost(Rng& rng, Eigen::Index nx, Eigen::Index ny) {
  Matrix c(nx, ny);
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index j = 0; j < ny; ++j) c(i, j) = rng.uniform();
  return c;
}

inline Measure random_measure(Rng& rng, std::size_t n, double zero_prob = 0.0) {
  Measure m{FiniteSpace::indexed(n), Vector(static_cast<Eigen::Index>(n))};
  for (Eigen::Index i = 0; i < m.w.size(); ++i) m.w(i) = rng.uniform() < zero_prob ? 0.0 : rng.uniform(0.05, 1.0);
  if (m.w.sum() == 0.0) m.w(0) = 1.0;
  m.w /= m.w.sum();
  return m;
}

}  // namespace ergot::testing
