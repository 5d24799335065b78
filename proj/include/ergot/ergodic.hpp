#pragma once

// Ergodic decomposition machinery: orbits of permutation actions, orbit
// averaging kernels, recurrent-class decomposition of Markov kernels and
// barycentric decomposition of simplex members.

#include "ergot/core.hpp"
#include "ergot/group.hpp"

#include <Eigen/LU>

#include <optional>
#include <string>
#include <vector>

namespace ergot {

struct OrbitPartition {
  FiniteSpace space;
  std::vector<std::size_t> orbit_of;
  std::vector<std::vector<std::size_t>> orbits;
};

inline void require_valid(const GroupAction& action) {
  auto v = validate(action);
  if (!v.empty()) throw Error(ErrorKind::InvalidInput, "group action: " + v.front());
}

inline void require_valid(const StochKernel& kernel) {
  auto v = validate(kernel);
  if (!v.empty()) throw Error(ErrorKind::InvalidInput, "kernel: " + v.front());
}

inline OrbitPartition orbit_decompose(const GroupAction& action) {
  require_valid(action);
  OrbitPartition part{action.space, std::vector<std::size_t>(action.space.size()),
                      orbits_of(action.space.size(), action.generators)};
  for (std::size_t o = 0; o < part.orbits.size(); ++o)
    for (auto x : part.orbits[o]) part.orbit_of[x] = o;
  return part;
}

/// Q^x is the uniform measure on the orbit of x (the exact group average).
inline StochKernel averaging_kernel(const GroupAction& action) {
  const auto part = orbit_decompose(action);
  const auto n = static_cast<Eigen::Index>(action.space.size());
  StochKernel k{action.space, Matrix::Zero(n, n)};
  for (const auto& orbit : part.orbits) {
    const double w = 1.0 / static_cast<double>(orbit.size());
    for (auto x : orbit)
      for (auto y : orbit) k.q(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = w;
  }
  return k;
}

struct KernelCheck {
  bool ok = true;
  std::vector<std::size_t> offending;
  std::vector<std::string> details;
};

/// A kernel decomposes its stationary simplex iff every Q^x is carried by
/// points whose own row equals Q^x.
inline KernelCheck check_ergodic_kernel(const StochKernel& kernel) {
  require_valid(kernel);
  KernelCheck report;
  const Eigen::Index n = kernel.q.rows();
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y < n; ++y) {
      if (kernel.q(x, y) <= kMassTol) continue;
      const double diff = (kernel.q.row(x) - kernel.q.row(y)).cwiseAbs().maxCoeff();
      if (diff > kMassTol) {
        report.ok = false;
        report.offending.push_back(static_cast<std::size_t>(x));
        report.details.push_back("row " + std::to_string(x) + " charges point " + std::to_string(y) +
                                 " whose row differs by " + fmt_real(diff));
        break;
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Markov kernels

struct StationaryDecomposition {
  std::vector<Measure> components;
  /// Recurrent classes, each sorted, ordered by smallest point.
  std::vector<std::vector<std::size_t>> classes;
  /// Point -> recurrent class index, or -1 for transient points.
  std::vector<int> class_of;
};

namespace detail {

inline std::vector<std::vector<bool>> reachability(const Matrix& q, double threshold) {
  const auto n = static_cast<std::size_t>(q.rows());
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::size_t> stack{s};
    reach[s][s] = true;
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      for (std::size_t y = 0; y < n; ++y) {
        if (!reach[s][y] && q(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) > threshold) {
          reach[s][y] = true;
          stack.push_back(y);
        }
      }
    }
  }
  return reach;
}

}  // namespace detail

/// Recurrent communicating classes and their stationary distributions.
inline StationaryDecomposition stationary_components(const StochKernel& kernel) {
  require_valid(kernel);
  const auto n = static_cast<std::size_t>(kernel.q.rows());
  const auto reach = detail::reachability(kernel.q, kMassTol);

  StationaryDecomposition out;
  out.class_of.assign(n, -1);
  std::vector<bool> done(n, false);
  for (std::size_t x = 0; x < n; ++x) {
    if (done[x]) continue;
    std::vector<std::size_t> scc;
    for (std::size_t y = 0; y < n; ++y)
      if (reach[x][y] && reach[y][x]) scc.push_back(y);
    for (auto y : scc) done[y] = true;
    bool closed = true;
    for (std::size_t y = 0; y < n && closed; ++y)
      if (reach[x][y] && !reach[y][x]) closed = false;
    if (!closed) continue;

    // Solve pi (Q_C - I) = 0 with sum(pi) = 1 on the class.
    const auto s = static_cast<Eigen::Index>(scc.size());
    Matrix a(s, s);
    for (Eigen::Index i = 0; i < s; ++i)
      for (Eigen::Index j = 0; j < s; ++j)
        a(i, j) = kernel.q(static_cast<Eigen::Index>(scc[static_cast<std::size_t>(j)]),
                           static_cast<Eigen::Index>(scc[static_cast<std::size_t>(i)])) -
                  (i == j ? 1.0 : 0.0);
    a.row(s - 1).setOnes();
    Vector b = Vector::Zero(s);
    b(s - 1) = 1.0;
    Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible())
      throw Error(ErrorKind::Internal, "singular stationary system on class starting at " + std::to_string(x));
    const Vector pi = lu.solve(b);

    Measure m{kernel.space, Vector::Zero(static_cast<Eigen::Index>(n))};
    for (Eigen::Index i = 0; i < s; ++i) m.w(static_cast<Eigen::Index>(scc[static_cast<std::size_t>(i)])) = pi(i);
    const double residual = (kernel.q.transpose() * m.w - m.w).cwiseAbs().maxCoeff();
    if (residual > 1e-10)
      throw Error(ErrorKind::Internal, "stationary residual " + fmt_real(residual) + " on class starting at " +
                                           std::to_string(x));
    const int cid = static_cast<int>(out.classes.size());
    for (auto y : scc) out.class_of[y] = cid;
    out.classes.push_back(std::move(scc));
    out.components.push_back(std::move(m));
  }
  return out;
}

/// Ergodic kernel with the same stationary simplex as `kernel`: recurrent
/// rows become their class's stationary distribution and transient rows copy
/// the lowest-indexed recurrent class they reach.
inline StochKernel ergodic_projection_kernel(const StochKernel& kernel) {
  const auto dec = stationary_components(kernel);
  const auto n = static_cast<std::size_t>(kernel.q.rows());
  const auto reach = detail::reachability(kernel.q, kMassTol);
  StochKernel out{kernel.space, Matrix::Zero(kernel.q.rows(), kernel.q.cols())};
  for (std::size_t x = 0; x < n; ++x) {
    int cls = dec.class_of[x];
    if (cls < 0) {
      for (std::size_t c = 0; c < dec.classes.size() && cls < 0; ++c)
        if (reach[x][dec.classes[c].front()]) cls = static_cast<int>(c);
    }
    out.q.row(static_cast<Eigen::Index>(x)) = dec.components[static_cast<std::size_t>(cls)].w.transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simplexes

/// All extreme points of a simplex, with the class map x -> xi(x).
struct Boundary {
  std::vector<Measure> extremes;
  std::vector<int> class_of;
};

inline Boundary boundary(const SimplexSpec& spec) {
  Boundary b;
  if (const auto* full = std::get_if<FullSimplex>(&spec.variant)) {
    for (std::size_t x = 0; x < full->space.size(); ++x) {
      b.extremes.push_back(dirac(full->space, x));
      b.class_of.push_back(static_cast<int>(x));
    }
  } else if (const auto* inv = std::get_if<GroupInvariant>(&spec.variant)) {
    const auto part = orbit_decompose(inv->action);
    for (const auto& orbit : part.orbits) b.extremes.push_back(uniform_on(inv->action.space, orbit));
    for (auto o : part.orbit_of) b.class_of.push_back(static_cast<int>(o));
  } else {
    auto dec = stationary_components(std::get<KernelStationary>(spec.variant).kernel);
    b.extremes = std::move(dec.components);
    b.class_of = std::move(dec.class_of);
  }
  return b;
}

/// Describes why mu is not in the simplex, or nullopt when it is.
inline std::optional<std::string> simplex_violation(const Measure& mu, const SimplexSpec& spec) {
  if (mu.size() != spec.space().size())
    return "measure size " + std::to_string(mu.size()) + " ≠ simplex space size " +
           std::to_string(spec.space().size());
  if (const auto* inv = std::get_if<GroupInvariant>(&spec.variant)) {
    for (const auto& g : inv->action.generators) {
      const double diff = (pushforward(g, mu).w - mu.w).cwiseAbs().maxCoeff();
      if (diff > kMassTol)
        return "not invariant under generator '" + g.label + "' (deviation " + fmt_real(diff) + ")";
    }
  } else if (const auto* st = std::get_if<KernelStationary>(&spec.variant)) {
    const Vector moved = st->kernel.q.transpose() * mu.w;
    Eigen::Index worst = 0;
    const double diff = (moved - mu.w).cwiseAbs().maxCoeff(&worst);
    if (diff > kMassTol)
      return "not stationary: (mu q)[" + std::to_string(worst) + "] deviates by " + fmt_real(diff);
  }
  return std::nullopt;
}

inline void require_in_simplex(const Measure& mu, const SimplexSpec& spec, const std::string& what) {
  if (auto v = simplex_violation(mu, spec)) throw Error(ErrorKind::NotInSimplex, what + " " + *v);
}

inline ErgodicDecomposition decompose_measure(const Measure& mu, const SimplexSpec& spec) {
  if (auto v = validate(mu); !v.empty()) throw Error(ErrorKind::InvalidInput, "measure: " + v.front());
  require_in_simplex(mu, spec, "measure");

  Boundary b = boundary(spec);
  Vector mass = Vector::Zero(static_cast<Eigen::Index>(b.extremes.size()));
  double transient = 0.0;
  for (std::size_t x = 0; x < mu.size(); ++x) {
    if (b.class_of[x] < 0)
      transient += mu[x];
    else
      mass(b.class_of[x]) += mu[x];
  }
  if (transient > kMassTol)
    throw Error(ErrorKind::TransientMass, "measure assigns mass " + fmt_real(transient) + " to transient states");

  ErgodicDecomposition dec;
  dec.class_of = b.class_of;
  std::vector<double> w;
  for (std::size_t a = 0; a < b.extremes.size(); ++a) {
    if (mass(static_cast<Eigen::Index>(a)) > 0.0) {
      dec.components.push_back(b.extremes[a]);
      dec.component_class.push_back(a);
      w.push_back(mass(static_cast<Eigen::Index>(a)));
    }
  }
  dec.weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
  return dec;
}

/// sum_a weights[a] * components[a]; no renormalization.
inline Measure barycenter(const ErgodicDecomposition& dec) {
  if (dec.components.empty()) throw Error(ErrorKind::InvalidInput, "empty decomposition");
  if (static_cast<std::size_t>(dec.weights.size()) != dec.components.size())
    throw Error(ErrorKind::DimensionMismatch, "weight count ≠ component count");
  Measure out{dec.components.front().space, Vector::Zero(dec.components.front().w.size())};
  for (std::size_t a = 0; a < dec.components.size(); ++a)
    out.w += dec.weights(static_cast<Eigen::Index>(a)) * dec.components[a].w;
  return out;
}

/// Weights of mu over the full boundary of its simplex (zeros included).
inline Vector boundary_weights(const ErgodicDecomposition& dec, std::size_t boundary_size) {
  Vector w = Vector::Zero(static_cast<Eigen::Index>(boundary_size));
  for (std::size_t a = 0; a < dec.components.size(); ++a)
    w(static_cast<Eigen::Index>(dec.component_class[a])) = dec.weights(static_cast<Eigen::Index>(a));
  return w;
}

}  // namespace ergot
