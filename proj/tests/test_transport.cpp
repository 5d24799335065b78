#include "support.hpp"

#include <gtest/gtest.h>

using namespace ergot;
using namespace ergot::testing;

namespace {

Measure u1() { return c3x2_mix(1.0); }
Measure u2() { return c3x2_mix(0.0); }

}  // namespace

TEST(SolveOt, EqualMarginalsCostNothing) {
  const Measure mu = c3x2_mix(0.4);
  const OtResult r = solve_ot(mu, mu, powered_cost(block_metric(), 1));
  ASSERT_EQ(r.status, OtStatus::Optimal);
  EXPECT_NEAR(r.value, 0.0, 1e-12);
}

TEST(SolveOt, DiracToDirac) {
  const FiniteSpace s = FiniteSpace::indexed(2);
  CostMatrix c{s, s, Matrix::Zero(2, 2)};
  c.c(0, 1) = 3.0;
  const OtResult r = solve_ot(dirac(s, 0), dirac(s, 1), c);
  EXPECT_DOUBLE_EQ(r.value, 3.0);
  EXPECT_DOUBLE_EQ(r.plan.p(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(r.plan.p.sum(), 1.0);
}

TEST(SolveOt, RandomThreeByThreeMatchesOracle) {
  Rng rng(101);
  for (int t = 0; t < 30; ++t) {
    const Measure mu = random_measure(rng, 3, 0.2), nu = random_measure(rng, 3, 0.2);
    const Matrix c = random_cost(rng, 3, 3);
    const OtResult r = solve_ot(mu, nu, CostMatrix{mu.space, nu.space, c});
    EXPECT_NEAR(r.value, *oracle_value(mu.w, nu.w, c), 1e-9);
    EXPECT_LE((r.plan.row_marginal().w - mu.w).cwiseAbs().maxCoeff(), kLpTol);
    EXPECT_LE((r.plan.col_marginal().w - nu.w).cwiseAbs().maxCoeff(), kLpTol);
  }
}

TEST(SolveOt, NonFiniteCostRejected) {
  const FiniteSpace s = FiniteSpace::indexed(2);
  CostMatrix c{s, s, Matrix::Zero(2, 2)};
  c.c(0, 0) = kInfinity;
  const Measure h = measure({0.5, 0.5});
  EXPECT_THROW(solve_ot(h, h, c), Error);
}

TEST(TransportLp, InfiniteCellsAreForbidden) {
  Matrix c = Matrix::Zero(2, 2);
  c(0, 0) = kInfinity;
  const Measure h = measure({0.5, 0.5});
  const OtResult r = detail::solve_transport_lp(h, h, c, nullptr);
  ASSERT_EQ(r.status, OtStatus::Optimal);
  EXPECT_EQ(r.plan.p(0, 0), 0.0);
  c(0, 1) = kInfinity;
  EXPECT_EQ(detail::solve_transport_lp(h, h, c, nullptr).status, OtStatus::Infeasible);
}

TEST(SolveOt, DimensionMismatch) {
  const FiniteSpace s = FiniteSpace::indexed(2);
  EXPECT_THROW(solve_ot(measure({1, 0, 0}), measure({0.5, 0.5}), CostMatrix{s, s, Matrix::Zero(2, 2)}), Error);
}

TEST(ConstrainedOt, UniformToUniformIsFree) {
  const LinearRestriction r = invariance_restriction(c3x2_action());
  const Measure u = c3x2_mix(0.5);
  const OtResult res = solve_constrained_ot(u, u, powered_cost(block_metric(), 1), r);
  ASSERT_EQ(res.status, OtStatus::Optimal);
  EXPECT_NEAR(res.value, 0.0, 1e-12);
  // The orbit-averaged diagonal is the diagonal itself here.
  EXPECT_LE((res.plan.p - diagonal_plan(u).p).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ConstrainedOt, CrossBlockCostsTwo) {
  const GroupAction a = c3x2_action();
  const LinearRestriction r = invariance_restriction(a);
  const Matrix c = block_metric().d;
  const OtResult res = solve_constrained_ot(u1(), u2(), CostMatrix{a.space, a.space, c}, r);
  ASSERT_EQ(res.status, OtStatus::Optimal);
  EXPECT_NEAR(res.value, 2.0, 1e-12);
  EXPECT_NEAR(*orbit_quotient_oracle(a, u1().w, u2().w, c), 2.0, 1e-12);
}

TEST(ConstrainedOt, WorkedMixtureOracle) {
  // Vertex oracle over orbit masses for the 0.5/0.5 vs 0.25/0.75 pair.
  const GroupAction a = c3x2_action();
  const Matrix c = block_metric().d;
  const auto oracle = orbit_quotient_oracle(a, c3x2_mix(0.5).w, c3x2_mix(0.25).w, c);
  ASSERT_TRUE(oracle.has_value());
  EXPECT_NEAR(*oracle, 0.5, 1e-12);
  const OtResult res = solve_constrained_ot(c3x2_mix(0.5), c3x2_mix(0.25), CostMatrix{a.space, a.space, c},
                                            invariance_restriction(a));
  EXPECT_NEAR(res.value, *oracle, 1e-12);
}

TEST(ConstrainedOt, EmptyOmegaEqualsPlain) {
  Rng rng(7);
  const FiniteSpace s = FiniteSpace::indexed(4);
  for (int t = 0; t < 10; ++t) {
    const Measure mu = random_measure(rng, 4), nu = random_measure(rng, 4);
    const CostMatrix c{s, s, random_cost(rng, 4, 4)};
    EXPECT_EQ(solve_constrained_ot(mu, nu, c, unconstrained_restriction(s, s)).value, solve_ot(mu, nu, c).value);
  }
}

TEST(ConstrainedOt, MembershipIsChecked) {
  const LinearRestriction r = invariance_restriction(c3x2_action());
  Measure bad{c3x2_space(), Vector::Zero(6)};
  bad.w << 0.5, 0.25, 0.25, 0, 0, 0;
  try {
    solve_constrained_ot(bad, u1(), powered_cost(block_metric(), 1), r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotInSimplex);
  }
}

TEST(ConstrainedOt, InfeasibleIsReported) {
  Matrix w = Matrix::Zero(2, 2);
  w(0, 0) = 1.0;
  const FiniteSpace s = FiniteSpace::indexed(2);
  const LinearRestriction pin = make_restriction(ConstraintSet{s, s, {{"pin", w}}}, SimplexSpec::full(s),
                                                 SimplexSpec::full(s), GroupAction{product_space(s, s), {}});
  const OtResult res = solve_constrained_ot(dirac(s, 0), dirac(s, 0), CostMatrix{s, s, Matrix::Zero(2, 2)}, pin);
  EXPECT_EQ(res.status, OtStatus::Infeasible);
  EXPECT_EQ(wasserstein(dirac(s, 0), dirac(s, 0), GroundMetric{s, Matrix::Zero(2, 2)}, 1, pin), kInfinity);
}

TEST(ConstrainedOt, MatchesFullOracleOnSmallInvariantInstances) {
  // 4 points, swap action: 16 variables, oracle over the unreduced LP.
  const GroupAction a{FiniteSpace::indexed(4), {parse_cycles("(0 1)(2 3)", 4, "g")}};
  const LinearRestriction r = invariance_restriction(a);
  const Boundary b = boundary(SimplexSpec::invariant(a));
  Rng rng(55);
  for (int t = 0; t < 20; ++t) {
    const Measure mu = random_member(b, rng, 0.2), nu = random_member(b, rng, 0.2);
    const Matrix c = random_cost(rng, 4, 4);
    const OtResult res = solve_constrained_ot(mu, nu, CostMatrix{a.space, a.space, c}, r);
    EXPECT_NEAR(res.value, *oracle_value(mu.w, nu.w, c, omega_matrices(r.omega)), 1e-9);
    EXPECT_LE(max_violation(r.omega, res.plan.p), kLpTol);
  }
}

TEST(Wasserstein, Basics) {
  const LinearRestriction r = invariance_restriction(c3x2_action());
  const GroundMetric d = block_metric();
  EXPECT_NEAR(wasserstein(c3x2_mix(0.3), c3x2_mix(0.3), d, 2, r), 0.0, 1e-12);
  EXPECT_NEAR(wasserstein(c3x2_mix(0.5), c3x2_mix(0.25), d, 1, r), 0.5, 1e-12);
}

TEST(Wasserstein, SquaredCostOracle) {
  const GroupAction a = c3x2_action();
  const Matrix c2 = block_metric().d.array().square().matrix();
  const auto oracle = orbit_quotient_oracle(a, c3x2_mix(0.5).w, c3x2_mix(0.25).w, c2);
  ASSERT_TRUE(oracle.has_value());
  EXPECT_NEAR(*oracle, 1.0, 1e-12);  // 0.25 of the mass crosses at cost 4
  EXPECT_NEAR(wasserstein(c3x2_mix(0.5), c3x2_mix(0.25), block_metric(), 2, invariance_restriction(a)),
              std::sqrt(*oracle), 1e-12);
}

TEST(Wasserstein, RejectsBadExponent) {
  const LinearRestriction r = invariance_restriction(c3x2_action());
  EXPECT_THROW(wasserstein(u1(), u1(), block_metric(), 0.5, r), Error);
}

TEST(BoundaryMetric, C3x2) {
  const GroupAction a = c3x2_action();
  const BoundaryMetricMatrix bm =
      boundary_metric(SimplexSpec::invariant(a), block_metric(), 1, invariance_restriction(a));
  Matrix expect(2, 2);
  expect << 0, 2, 2, 0;
  EXPECT_LE((bm.dbar - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BoundaryMetric, DiracsReproduceGroundMetric) {
  const FiniteSpace s = FiniteSpace::indexed(4);
  Rng rng(3);
  const GroundMetric d = random_metric(s, rng);
  const BoundaryMetricMatrix bm = boundary_metric(SimplexSpec::full(s), d, 1, unconstrained_restriction(s, s));
  EXPECT_LE((bm.dbar - d.d).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BoundaryMetric, SingleComponent) {
  const GroupAction a{FiniteSpace::indexed(3), {parse_cycles("(0 1 2)", 3)}};
  Rng rng(4);
  const BoundaryMetricMatrix bm =
      boundary_metric(SimplexSpec::invariant(a), random_metric(a.space, rng), 2, invariance_restriction(a));
  ASSERT_EQ(bm.dbar.rows(), 1);
  EXPECT_NEAR(bm.dbar(0, 0), 0.0, 1e-12);
}

TEST(BoundaryMetric, NonGeometricRefused) {
  const FiniteSpace s = FiniteSpace::indexed(2);
  Matrix w = Matrix::Zero(2, 2);
  w(0, 1) = 1.0;
  const LinearRestriction r = make_restriction(ConstraintSet{s, s, {{"corner", w}}}, SimplexSpec::full(s),
                                               SimplexSpec::full(s), GroupAction{product_space(s, s), {}});
  GroundMetric d{s, Matrix(2, 2)};
  d.d << 0, 1, 1, 0;
  try {
    boundary_metric(SimplexSpec::full(s), d, 1, r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotGeometric);
  }
}

TEST(LiftedMetric, Cases) {
  const GroupAction a = c3x2_action();
  const SimplexSpec spec = SimplexSpec::invariant(a);
  const BoundaryMetricMatrix bm = boundary_metric(spec, block_metric(), 1, invariance_restriction(a));
  EXPECT_NEAR(lifted_metric(c3x2_mix(0.5), c3x2_mix(0.25), bm, spec, 1), 0.5, 1e-12);
  EXPECT_NEAR(lifted_metric(c3x2_mix(0.7), c3x2_mix(0.7), bm, spec, 1), 0.0, 1e-12);
  const GroupAction one{FiniteSpace::indexed(3), {parse_cycles("(0 1 2)", 3)}};
  const SimplexSpec s1 = SimplexSpec::invariant(one);
  Rng rng(2);
  const BoundaryMetricMatrix b1 = boundary_metric(s1, random_metric(one.space, rng), 1, invariance_restriction(one));
  const Measure u = measure({1.0 / 3, 1.0 / 3, 1.0 / 3});
  EXPECT_EQ(lifted_metric(u, u, b1, s1, 1), 0.0);
}

TEST(Gluing, DiagonalComposition) {
  const Measure mu = c3x2_mix(0.3);
  const LinearRestriction r = invariance_restriction(c3x2_action());
  const GluingResult g = glue_plans(diagonal_plan(mu), diagonal_plan(mu), r);
  EXPECT_TRUE(g.feasible);
  EXPECT_LE((g.pi13.p - diagonal_plan(mu).p).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE(g.projection_error, 1e-15);
}

TEST(Gluing, InvariantPlansStayFeasible) {
  const GroupAction a{FiniteSpace::indexed(6), {parse_cycles("(0 1 2)(3 4)", 6, "g")}};
  const LinearRestriction r = invariance_restriction(a);
  const Boundary b = boundary(SimplexSpec::invariant(a));
  Rng rng(12);
  for (int t = 0; t < 10; ++t) {
    const Measure m1 = random_member(b, rng, 0.2), m2 = random_member(b, rng, 0.2), m3 = random_member(b, rng, 0.2);
    const OtResult p12 = solve_constrained_ot(m1, m2, CostMatrix{a.space, a.space, random_cost(rng, 6, 6)}, r);
    const OtResult p23 = solve_constrained_ot(m2, m3, CostMatrix{a.space, a.space, random_cost(rng, 6, 6)}, r);
    const GluingResult g = glue_plans(p12.plan, p23.plan, r);
    EXPECT_TRUE(g.feasible);
    EXPECT_LE(g.projection_error, 1e-9);
    EXPECT_LE(max_violation(r.omega, g.pi13.p), 1e-9);
  }
}

TEST(Gluing, ProductsComposeToProduct) {
  const Measure mu = c3x2_mix(0.2), mid = c3x2_mix(0.6), nu = c3x2_mix(0.9);
  const GluingResult g = glue_plans(product_plan(mu, mid), product_plan(mid, nu), invariance_restriction(c3x2_action()));
  EXPECT_LE((g.pi13.p - product_plan(mu, nu).p).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_TRUE(g.feasible);
}

TEST(Gluing, MiddleMismatch) {
  try {
    glue_plans(product_plan(u1(), u1()), product_plan(u2(), u2()), invariance_restriction(c3x2_action()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MarginalMismatch);
  }
}

TEST(DecomposePlan, ProductOfOrbitUniformsSplitsByOffset) {
  const LinearRestriction r = invariance_restriction(c3x2_action());
  const PlanDecomposition d = decompose_plan(product_plan(u1(), u1()), r);
  ASSERT_EQ(d.components.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(d.weights(static_cast<Eigen::Index>(k)), 1.0 / 3, 1e-15);
    EXPECT_EQ(d.marginal_class[k], (std::pair<std::size_t, std::size_t>{0, 0}));
    // Offset-k orbit: cells (x, x+k mod 3) with mass 1/3 each.
    const Matrix& p = d.components[k].p;
    const Eigen::Index off = (p(0, 0) > 0) ? 0 : (p(0, 1) > 0 ? 1 : 2);
    for (Eigen::Index x = 0; x < 3; ++x) EXPECT_NEAR(p(x, (x + off) % 3), 1.0 / 3, 1e-15);
    EXPECT_NEAR(p.sum(), 1.0, 1e-15);
  }
}

TEST(DecomposePlan, SingleOrbitPlan) {
  const LinearRestriction r = invariance_restriction(c3x2_action());
  const ProductPartition part = product_partition(r);
  const TransportPlan pi{c3x2_space(), c3x2_space(), unflatten(part.extreme_plans[4], 6, 6)};
  const PlanDecomposition d = decompose_plan(pi, r);
  ASSERT_EQ(d.components.size(), 1u);
  EXPECT_EQ(d.weights(0), 1.0);
}

TEST(DecomposePlan, InfeasiblePlanRejected) {
  const LinearRestriction r = invariance_restriction(c3x2_action());
  Matrix p = Matrix::Zero(6, 6);
  p(0, 0) = 1.0;
  try {
    decompose_plan(TransportPlan{c3x2_space(), c3x2_space(), p}, r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotFeasible);
  }
}

TEST(DecomposePlan, ReconstructsSolverPlans) {
  const GroupAction a{FiniteSpace::indexed(7), {parse_cycles("(0 1 2)(3 4)(5 6)", 7, "g")}};
  const LinearRestriction r = invariance_restriction(a);
  const Boundary b = boundary(SimplexSpec::invariant(a));
  Rng rng(66);
  for (int t = 0; t < 10; ++t) {
    const OtResult res = solve_constrained_ot(random_member(b, rng, 0.2), random_member(b, rng, 0.2),
                                              CostMatrix{a.space, a.space, random_cost(rng, 7, 7)}, r);
    const PlanDecomposition d = decompose_plan(res.plan, r);
    Matrix back = Matrix::Zero(7, 7);
    for (std::size_t k = 0; k < d.components.size(); ++k) back += d.weights(static_cast<Eigen::Index>(k)) * d.components[k].p;
    EXPECT_LE((back - res.plan.p).cwiseAbs().maxCoeff(), kMassTol);
  }
}

TEST(TransposeFeasibility, SolverPlans) {
  const GroupAction a{FiniteSpace::indexed(5), {parse_cycles("(0 1)(2 3 4)", 5, "g")}};
  const LinearRestriction r = invariance_restriction(a);
  const Boundary b = boundary(SimplexSpec::invariant(a));
  Rng rng(8);
  for (int t = 0; t < 10; ++t) {
    const OtResult res = solve_constrained_ot(random_member(b, rng, 0.2), random_member(b, rng, 0.2),
                                              CostMatrix{a.space, a.space, random_cost(rng, 5, 5)}, r);
    EXPECT_LE(max_violation(r.omega, transpose_plan(res.plan).p), kLpTol);
  }
}

TEST(Wasserstein, SelfDistanceIsZeroForP2) {
  // Roundoff on degenerate basics used to survive the square root as ~1e-8.
  Rng rng(8);
  const FiniteSpace eight = FiniteSpace::indexed(8);
  const GroupAction a{eight, {parse_cycles("(0 3 5)(1 6 2)(4 7)", 8, "g")}};
  const GroundMetric d = random_metric(eight, rng);
  const Boundary b = boundary(SimplexSpec::invariant(a));
  for (int t = 0; t < 50; ++t) {
    const Measure m = random_member(b, rng, 0.2);
    EXPECT_LE(wasserstein(m, m, d, 2.0, invariance_restriction(a)), 1e-9);
  }
}
