#pragma once

// Dense two-phase simplex (Bland's rule) plus an exhaustive basis
// enumeration oracle for small instances.

#include "ergot/core.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace ergot::lp {

/// min objective.x  s.t.  eq_matrix x = eq_rhs,  x >= 0.
struct LpProblem {
  std::size_t num_vars = 0;
  Vector objective;
  Matrix eq_matrix;
  Vector eq_rhs;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
  }
  return "Unknown";
}

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  std::optional<Vector> x;
  std::optional<double> value;
  /// Basic columns at termination, ascending.
  std::vector<std::size_t> basis;
  std::size_t pivots = 0;
};

inline void check_dimensions(const LpProblem& prob) {
  const auto n = static_cast<Eigen::Index>(prob.num_vars);
  if (prob.objective.size() != n)
    throw Error(ErrorKind::DimensionMismatch, "objective length " +
                                                  std::to_string(prob.objective.size()) +
                                                  " vs num_vars " + std::to_string(n));
  if (prob.eq_matrix.rows() > 0 && prob.eq_matrix.cols() != n)
    throw Error(ErrorKind::DimensionMismatch, "constraint row length " +
                                                  std::to_string(prob.eq_matrix.cols()) +
                                                  " vs num_vars " + std::to_string(n));
  if (prob.eq_rhs.size() != prob.eq_matrix.rows())
    throw Error(ErrorKind::DimensionMismatch, "rhs length " + std::to_string(prob.eq_rhs.size()) +
                                                  " vs row count " +
                                                  std::to_string(prob.eq_matrix.rows()));
}

namespace detail {

using Tableau = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Rows 0..m-1 hold constraints, row m holds reduced costs; the last column
// holds the rhs (and -objective in the cost row).
class Simplex {
 public:
  static constexpr std::size_t kMaxPivots = 1'000'000;

  Simplex(Tableau t, std::vector<std::size_t> basis, std::size_t enterable)
      : t_(std::move(t)), basis_(std::move(basis)), enterable_(enterable) {}

  Tableau& tableau() { return t_; }
  std::vector<std::size_t>& basis() { return basis_; }
  std::size_t pivots() const { return pivots_; }
  void set_enterable(std::size_t e) { enterable_ = e; }

  Eigen::Index rows() const { return t_.rows() - 1; }
  Eigen::Index rhs_col() const { return t_.cols() - 1; }

  void pivot(Eigen::Index r, Eigen::Index c) {
    if (++pivots_ > kMaxPivots) throw Error(ErrorKind::Internal, "simplex pivot limit exceeded");
    t_.row(r) /= t_(r, c);
    t_(r, c) = 1.0;
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f == 0.0) continue;
      t_.row(i) -= f * t_.row(r);
      t_(i, c) = 0.0;
    }
    basis_[static_cast<std::size_t>(r)] = static_cast<std::size_t>(c);
  }

  /// Runs Bland pivots until optimal (true) or unbounded (false).
  bool run() {
    const Eigen::Index m = rows();
    for (;;) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(enterable_); ++j) {
        if (t_(m, j) < -kLpTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m; ++i) {
        const double a = t_(i, enter);
        if (a <= kPivotTol) continue;
        const double ratio = t_(i, rhs_col()) / a;
        if (leave < 0 || ratio < best - 1e-14) {
          best = ratio;
          leave = i;
        } else if (ratio <= best + 1e-14 && basis_[static_cast<std::size_t>(i)] <
                                                basis_[static_cast<std::size_t>(leave)]) {
          best = std::min(best, ratio);
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
  }

  void drop_row(Eigen::Index r) {
    const Eigen::Index last = t_.rows() - 1;
    for (Eigen::Index i = r; i < last; ++i) t_.row(i) = t_.row(i + 1);
    t_.conservativeResize(last, Eigen::NoChange);
    basis_.erase(basis_.begin() + r);
  }

 private:
  Tableau t_;
  std::vector<std::size_t> basis_;
  std::size_t enterable_;
  std::size_t pivots_ = 0;
};

}  // namespace detail

/// Two-phase dense simplex with Bland's rule and lowest-index tie-breaking.
/// Deterministic: identical input yields an identical basis.
inline LpSolution solve_lp(const LpProblem& prob) {
  check_dimensions(prob);
  const auto n = static_cast<Eigen::Index>(prob.num_vars);
  const Eigen::Index m = prob.eq_matrix.rows();

  // Phase I: artificials n..n+m-1 form the starting basis.
  detail::Tableau t = detail::Tableau::Zero(m + 1, n + m + 1);
  std::vector<std::size_t> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const double sign = prob.eq_rhs(i) < 0.0 ? -1.0 : 1.0;
    t.row(i).head(n) = sign * prob.eq_matrix.row(i);
    t(i, n + i) = 1.0;
    t(i, n + m) = sign * prob.eq_rhs(i);
    basis[static_cast<std::size_t>(i)] = static_cast<std::size_t>(n + i);
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    t.row(m).head(n) -= t.row(i).head(n);
    t(m, n + m) -= t(i, n + m);
  }

  detail::Simplex sx(std::move(t), std::move(basis), static_cast<std::size_t>(n));
  sx.run();  // phase I is bounded below by zero

  LpSolution sol;
  if (-sx.tableau()(sx.rows(), sx.rhs_col()) > kLpTol) {
    sol.status = LpStatus::Infeasible;
    sol.pivots = sx.pivots();
    return sol;
  }

  // Drive artificials out of the basis; rows where that is impossible are
  // redundant and get dropped.
  for (Eigen::Index i = sx.rows() - 1; i >= 0; --i) {
    if (sx.basis()[static_cast<std::size_t>(i)] < static_cast<std::size_t>(n)) continue;
    Eigen::Index col = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::abs(sx.tableau()(i, j)) > kPivotTol) {
        col = j;
        break;
      }
    }
    if (col >= 0)
      sx.pivot(i, col);
    else
      sx.drop_row(i);
  }

  // Phase II on the original columns only.
  const Eigen::Index rows = sx.rows();
  detail::Tableau t2(rows + 1, n + 1);
  t2.topLeftCorner(rows, n) = sx.tableau().topLeftCorner(rows, n);
  t2.col(n).head(rows) = sx.tableau().col(sx.rhs_col()).head(rows);
  t2.row(rows).head(n) = prob.objective.transpose();
  t2(rows, n) = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double cb = prob.objective(static_cast<Eigen::Index>(sx.basis()[i]));
    if (cb != 0.0) t2.row(rows) -= cb * t2.row(i);
  }
  for (Eigen::Index i = 0; i < rows; ++i) t2(rows, static_cast<Eigen::Index>(sx.basis()[i])) = 0.0;

  detail::Simplex sx2(std::move(t2), sx.basis(), static_cast<std::size_t>(n));
  const bool bounded = sx2.run();
  sol.pivots = sx.pivots() + sx2.pivots();
  if (!bounded) {
    sol.status = LpStatus::Unbounded;
    return sol;
  }

  Vector x = Vector::Zero(n);
  const double snap = kSnapTol * std::max(1.0, prob.eq_rhs.size() ? prob.eq_rhs.cwiseAbs().maxCoeff() : 0.0);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double v = sx2.tableau()(i, n);
    x(static_cast<Eigen::Index>(sx2.basis()[i])) = std::abs(v) <= snap ? 0.0 : v;
  }
  sol.status = LpStatus::Optimal;
  sol.value = prob.objective.dot(x);
  sol.x = std::move(x);
  sol.basis = sx2.basis();
  std::sort(sol.basis.begin(), sol.basis.end());
  return sol;
}

// ---------------------------------------------------------------------------
// Row-space bookkeeping

/// Incremental row echelon basis used for numerical rank and row-space
/// membership tests.
class RowSpace {
 public:
  explicit RowSpace(Eigen::Index dim, double tol = kRankTol) : dim_(dim), tol_(tol) {}

  std::size_t rank() const { return rows_.size(); }

  /// Residual of v after elimination against the current basis.
  Vector reduce(Vector v) const {
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      const double f = v(pivots_[k]);
      if (f != 0.0) v -= f * rows_[k];
    }
    return v;
  }

  bool contains(const Vector& v) const {
    const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
    return reduce(v).cwiseAbs().maxCoeff() <= tol_ * scale;
  }

  /// Adds v when independent; returns whether the rank grew.
  bool add(const Vector& v) {
    if (v.size() != dim_) throw Error(ErrorKind::DimensionMismatch, "row-space vector length");
    if (v.size() == 0) return false;
    const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
    Vector r = reduce(v);
    Eigen::Index piv = 0;
    const double mag = r.cwiseAbs().maxCoeff(&piv);
    if (mag <= tol_ * scale) return false;
    r /= r(piv);
    rows_.push_back(std::move(r));
    pivots_.push_back(piv);
    return true;
  }

 private:
  Eigen::Index dim_;
  double tol_;
  std::vector<Vector> rows_;
  std::vector<Eigen::Index> pivots_;
};

inline std::size_t matrix_rank(const Matrix& rows, double tol = kRankTol) {
  RowSpace rs(rows.cols(), tol);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) rs.add(rows.row(i).transpose());
  return rs.rank();
}

// ---------------------------------------------------------------------------
// Vertex enumeration oracle

/// C(n, k), saturating at UINT64_MAX.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 acc = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    acc = acc * (n - k + i) / i;
    if (acc > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(acc);
}

/// Every feasible basic solution of the system, deduplicated by coordinates.
/// Refuses (CapExceeded) when more than `cap` bases would be examined.
inline std::vector<Vector> enumerate_vertices(const LpProblem& prob, std::uint64_t cap) {
  check_dimensions(prob);
  const auto n = static_cast<Eigen::Index>(prob.num_vars);
  const Eigen::Index m = prob.eq_matrix.rows();

  RowSpace rs(n);
  std::vector<Eigen::Index> independent;
  for (Eigen::Index i = 0; i < m; ++i)
    if (rs.add(prob.eq_matrix.row(i).transpose())) independent.push_back(i);
  const auto r = static_cast<Eigen::Index>(independent.size());

  const std::uint64_t candidates = binomial(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r));
  if (candidates > cap)
    throw Error(ErrorKind::CapExceeded, std::to_string(candidates) + " basis candidates exceed cap " +
                                            std::to_string(cap));

  Matrix a(r, n);
  Vector b(r);
  for (Eigen::Index k = 0; k < r; ++k) {
    a.row(k) = prob.eq_matrix.row(independent[static_cast<std::size_t>(k)]);
    b(k) = prob.eq_rhs(independent[static_cast<std::size_t>(k)]);
  }

  std::vector<Vector> found;
  auto accept = [&](const Vector& x) {
    if (x.size() > 0 && x.minCoeff() < -kLpTol) return;
    if (m > 0 && (prob.eq_matrix * x - prob.eq_rhs).cwiseAbs().maxCoeff() > kLpTol) return;
    for (const auto& y : found)
      if (x.size() == 0 || (x - y).cwiseAbs().maxCoeff() <= kLpTol) return;
    found.push_back(x);
  };

  std::vector<Eigen::Index> pick(static_cast<std::size_t>(r));
  for (Eigen::Index k = 0; k < r; ++k) pick[static_cast<std::size_t>(k)] = k;
  if (r == 0) {
    accept(Vector::Zero(n));
    return found;
  }
  for (;;) {
    Matrix basis(r, r);
    for (Eigen::Index k = 0; k < r; ++k) basis.col(k) = a.col(pick[static_cast<std::size_t>(k)]);
    Eigen::FullPivLU<Matrix> lu(basis);
    lu.setThreshold(1e-10);
    if (lu.isInvertible()) {
      const Vector xb = lu.solve(b);
      Vector x = Vector::Zero(n);
      for (Eigen::Index k = 0; k < r; ++k) x(pick[static_cast<std::size_t>(k)]) = xb(k);
      accept(x);
    }
    // next combination in lexicographic order
    Eigen::Index k = r - 1;
    while (k >= 0 && pick[static_cast<std::size_t>(k)] == n - r + k) --k;
    if (k < 0) break;
    ++pick[static_cast<std::size_t>(k)];
    for (Eigen::Index j = k + 1; j < r; ++j)
      pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  return found;
}

/// Minimum objective over enumerated vertices; nullopt when there are none.
inline std::optional<double> vertex_minimum(const LpProblem& prob, const std::vector<Vector>& vertices) {
  std::optional<double> best;
  for (const auto& v : vertices) {
    const double val = prob.objective.dot(v);
    if (!best || val < *best) best = val;
  }
  return best;
}

}  // namespace ergot::lp
