#include "support.hpp"

#include <gtest/gtest.h>

using namespace ergot;
using ergot::testing::measure;

TEST(Validate, UniformMeasureIsValid) { EXPECT_TRUE(validate(measure({0.5, 0.5})).empty()); }

TEST(Validate, ReportsMassSum) {
  const Violations v = validate(measure({0.6, 0.5}));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], "mass sum 1.1 ≠ 1");
}

TEST(Validate, NegativeAndNonFiniteEntriesNamed) {
  const Violations v = validate(measure({1.5, -0.5}));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("entry 1"), std::string::npos);
  const Violations nan = validate(measure({std::nan(""), 1.0}));
  EXPECT_FALSE(nan.empty());
}

TEST(Validate, TwoPointMetric) {
  GroundMetric d{FiniteSpace::indexed(2), Matrix(2, 2)};
  d.d << 0, 3, 3, 0;
  EXPECT_TRUE(validate(d).empty());
  d.d(0, 1) = 2;
  EXPECT_FALSE(validate(d).empty());
}

TEST(Validate, TriangleInequalityViolation) {
  GroundMetric d{FiniteSpace::indexed(3), Matrix(3, 3)};
  d.d << 0, 1, 5, 1, 0, 1, 5, 1, 0;
  EXPECT_FALSE(validate(d).empty());
}

TEST(Validate, DuplicateLabels) {
  EXPECT_FALSE(validate(FiniteSpace{{"a", "b", "a"}}).empty());
  EXPECT_FALSE(validate(FiniteSpace{}).empty());
}

TEST(Validate, KernelRows) {
  StochKernel k = ergot::testing::kernel({{0.5, 0.5}, {0.2, 0.7}});
  const Violations v = validate(k);
  ASSERT_FALSE(v.empty());
  EXPECT_NE(v[0].find("row 1"), std::string::npos);
}

TEST(Validate, NonBijectiveGenerator) {
  GroupAction a{FiniteSpace::indexed(3), {Permutation{"bad", {0, 0, 1}}}};
  EXPECT_FALSE(validate(a).empty());
}

TEST(Validate, Idempotent) {
  const Measure m = measure({0.6, 0.5});
  EXPECT_EQ(validate(m), validate(m));
}

TEST(Pushforward, Identity) {
  const Measure mu = measure({0.2, 0.3, 0.5});
  EXPECT_EQ(pushforward(Permutation::identity(3), mu).w, mu.w);
}

TEST(Pushforward, Swap) {
  const Measure r = pushforward(parse_cycles("(0 1)", 2), measure({0.3, 0.7}));
  EXPECT_EQ(r.w(0), 0.7);
  EXPECT_EQ(r.w(1), 0.3);
}

TEST(Pushforward, DiracRelabel) {
  const Measure r = pushforward(parse_cycles("(0 1 2)", 3), measure({1, 0, 0}));
  EXPECT_EQ(r.w(0), 0.0);
  EXPECT_EQ(r.w(1), 1.0);
  EXPECT_EQ(r.w(2), 0.0);
}

TEST(Pushforward, InverseRoundTripIsExact) {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    const Measure mu = ergot::testing::random_measure(rng, 7);
    std::vector<std::size_t> img(7);
    for (std::size_t i = 0; i < 7; ++i) img[i] = i;
    rng.shuffle(img);
    const Permutation g{"g", img};
    const Measure there = pushforward(g, mu);
    EXPECT_TRUE(validate(there).empty());
    EXPECT_EQ(pushforward(g.inverse(), there).w, mu.w);
  }
}

TEST(Pushforward, SizeMismatchThrows) {
  try {
    pushforward(Permutation::identity(3), measure({0.5, 0.5}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

TEST(TransposePlan, DiagonalIsSymmetric) {
  const TransportPlan d = diagonal_plan(measure({0.5, 0.5}));
  EXPECT_EQ(transpose_plan(d).p, d.p);
}

TEST(TransposePlan, IndexSwap) {
  TransportPlan t{FiniteSpace::indexed(2), FiniteSpace::indexed(2), Matrix(2, 2)};
  t.p << 0, 1, 0, 0;
  Matrix expect(2, 2);
  expect << 0, 0, 1, 0;
  EXPECT_EQ(transpose_plan(t).p, expect);
}

TEST(TransposePlan, InvolutionAndMarginalSwap) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    TransportPlan pi{FiniteSpace::indexed(3), FiniteSpace::indexed(4), ergot::testing::random_cost(rng, 3, 4)};
    pi.p /= pi.p.sum();
    const TransportPlan tt = transpose_plan(pi);
    EXPECT_EQ(transpose_plan(tt).p, pi.p);
    EXPECT_EQ(tt.row_space.labels, pi.col_space.labels);
    const Vector rows_t = tt.p.rowwise().sum();
    const Vector cols = pi.p.colwise().sum().transpose();
    // Same entries, different summation order.
    EXPECT_LE((rows_t - cols).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Plans, ProductPlanMarginals) {
  const Measure mu = measure({0.25, 0.75}), nu = measure({0.1, 0.2, 0.7});
  const TransportPlan pi = product_plan(mu, nu);
  EXPECT_TRUE(pi.row_marginal().w.isApprox(mu.w, 1e-15));
  EXPECT_TRUE(pi.col_marginal().w.isApprox(nu.w, 1e-15));
  EXPECT_TRUE(validate(pi).empty());
}

TEST(Permutation, ComposeAndInverse) {
  const Permutation g = parse_cycles("(0 1 2)", 3, "g");
  EXPECT_TRUE(g.after(g.inverse()).is_identity());
  EXPECT_EQ(g.inverse().label, "g^-1");
  const Permutation g2 = g.after(g);
  EXPECT_EQ(g2.image, (std::vector<std::size_t>{2, 0, 1}));
}

TEST(SimplexSpec, Names) {
  EXPECT_STREQ(SimplexSpec::full(FiniteSpace::indexed(2)).name(), "full");
  EXPECT_EQ(SimplexSpec::invariant(ergot::testing::c3x2_action()).space().size(), 6u);
}

TEST(ErrorFormat, KindPrefix) {
  const Error e(ErrorKind::NotInSimplex, "x");
  EXPECT_STREQ(e.what(), "NotInSimplex: x");
}
