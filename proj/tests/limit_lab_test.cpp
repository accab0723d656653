#include <gtest/gtest.h>

#include <cmath>

#include <Eigen/Dense>

#include "chaoslab/limit_lab.hpp"
#include "chaoslab/suites.hpp"
#include "oracle.hpp"

using namespace chaoslab;

namespace {

SequenceInstance mixture(std::size_t n, double eps = 0.0) {
  return generate_sequence({SequenceKind::Mixture, n, eps});
}
SequenceInstance central(std::size_t n) { return generate_sequence({SequenceKind::Central, n}); }

Eigen::MatrixXd as_matrix(const SymmetricKernel& f) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(f.dim(), f.dim());
  for (const auto& [k, v] : f.entries()) a(k[0], k[1]) = a(k[1], k[0]) = v;
  return a;
}

// All ordered tuples of `len` time indices.
std::vector<std::vector<std::size_t>> all_cells(std::size_t len, std::size_t kt) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> c(len, 0);
  for (;;) {
    out.push_back(c);
    std::size_t j = 0;
    while (j < len && ++c[j] == kt) c[j++] = 0;
    if (j == len) return out;
  }
}

}  // namespace

TEST(GenerateSequence, MixtureExample) {
  const auto s = mixture(4);
  EXPECT_EQ(s.t, 0.5);
  EXPECT_EQ(s.basis.time(0), 0.1);
  EXPECT_EQ(s.basis.channel(0), 0);
  for (std::size_t k = 1; k <= 4; ++k) {
    EXPECT_GT(s.basis.time(k), 0.5);
    EXPECT_LE(s.basis.time(k), 1.0);
  }
  const auto z = sample(5, 50, 0);
  EXPECT_NEAR(eval_integral(s.f, z), z[0] * (z[1] + z[2] + z[3] + z[4]) / 2, 1e-14);
  EXPECT_TRUE(s.y.certified());
  EXPECT_NEAR(s.y.value(z.z), z[0] * z[0], 1e-14);
  for (std::size_t n : {2u, 9u, 100u}) EXPECT_NEAR(2 * norm_sq(mixture(n).f), 1.0, 1e-14);
}

TEST(GenerateSequence, CentralExample) {
  const auto s = central(3);
  const auto z = sample(4, 51, 0);
  EXPECT_NEAR(eval_integral(s.f, z), (z[1] * z[2] + z[2] * z[3]) / std::sqrt(2.0), 1e-14);
  EXPECT_THROW(central(1), InvalidArgument);
  EXPECT_THROW(generate_sequence({SequenceKind::Custom, 4}), InvalidArgument);
}

TEST(CltConditions, Examples) {
  const auto big = check_clt_conditions(central(50).f);
  EXPECT_NEAR(big.variance, 1.0, 1e-14);
  // |f (x)_1 f|^2 = tr(A^4) for the band matrix A; bounded by 3/(n-1) here.
  EXPECT_LE(big.contraction_norms[0] * big.contraction_norms[0], 3.0 / 49.0);

  const auto zero = check_clt_conditions(SymmetricKernel(2, 3));
  EXPECT_EQ(zero.variance, 0.0);
  EXPECT_EQ(zero.contraction_norms[0], 0.0);
  EXPECT_EQ(*zero.fourth_moment, 0.0);
  EXPECT_EQ(*zero.fourth_moment_excess, 0.0);

  const auto sq = check_clt_conditions(SymmetricKernel::monomial(2, {0, 0}));
  EXPECT_NEAR(*sq.fourth_moment, 60.0, 1e-12);
  EXPECT_NEAR(*sq.fourth_moment_excess, 48.0, 1e-12);
}

TEST(CltConditions, CentralContractionMatchesMatrixTrace) {
  for (std::size_t n : {4u, 16u, 64u}) {
    const auto s = central(n);
    const Eigen::MatrixXd a = as_matrix(s.f);
    const double trace4 = (a * a * a * a).trace();
    const double c = check_clt_conditions(s.f).contraction_norms[0];
    EXPECT_NEAR(c * c, trace4, 1e-14);
  }
}

TEST(StableConditions, MixtureIsExactForEveryN) {
  for (std::size_t n : {2u, 8u, 32u, 128u}) {
    const auto s = mixture(n);
    const auto rep = check_stable_conditions(s.f, s.basis, s.t, s.y.y());
    EXPECT_EQ(*rep.neg_norm, 0.0);
    EXPECT_LE(*rep.norm_distance, 1e-12);
    ASSERT_EQ(rep.ascv_norms.size(), 1u);
    EXPECT_EQ(rep.ascv_norms[0], 0.0);
  }
}

TEST(StableConditions, EndpointTimes) {
  CounterRng rng(52, 0);
  const auto b = random_grid_basis(rng, 5);
  const auto f = random_kernel(rng, 2, 5);
  const auto at0 = check_stable_conditions(f, b, 0.0, ChaosFunctional(5, 2 * norm_sq(f)));
  EXPECT_EQ(*at0.neg_norm, 0.0);
  EXPECT_NEAR(at0.ascv_norms[0], at0.contraction_norms[0], 1e-14);

  const auto at1 = check_stable_conditions(f, b, 1.0, ChaosFunctional(5, 1.0));
  EXPECT_NEAR(*at1.neg_norm, norm(f), 1e-15);
  EXPECT_EQ(at1.ascv_norms[0], 0.0);
}

TEST(StableConditions, RejectsMixingVarianceOfTooHighOrder) {
  const auto s = mixture(4);
  ChaosFunctional y(5, 1.0);
  y.add(SymmetricKernel::monomial(5, {0, 0, 0, 0}));
  EXPECT_THROW(check_stable_conditions(s.f, s.basis, s.t, y), InvalidArgument);
}

TEST(DevDecomposition, ConditionalEqualsMainPlusEarly) {
  for (std::uint64_t i = 0; i < 30; ++i) {
    CounterRng rng(53, i);
    const std::size_t n = 2 + rng.below(5), d = 1 + rng.below(3);
    const auto b = random_grid_basis(rng, n);
    const auto f = random_kernel(rng, d, n);
    const double t = static_cast<double>(rng.below(5)) / 4.0;
    const auto dev = dev_decomposition(f, b, t);
    EXPECT_LE(l2_distance(dev.conditional, dev.main + dev.early), 1e-12);

    // The early part is a polynomial in pi_t f, so its size is controlled by
    // the early norm: |early|_{L2} <= sum_r c_r sqrt((2r)!) |pi_t f|^2.
    const double neg = norm(project_tensor(f, b, t, ProjectionMode::KeepEarly));
    double bound = 0;
    for (std::size_t r = 1; r <= d; ++r)
      bound += detail::factorial(d - r) * std::pow(detail::binomial(d, r), 2) *
               std::sqrt(detail::factorial(2 * r)) * neg * neg;
    EXPECT_LE(std::sqrt(second_moment(dev.early)), bound + 1e-12);
  }
  for (std::size_t n : {8u, 32u}) {
    const auto s = mixture(n);
    EXPECT_EQ(second_moment(dev_decomposition(s.f, s.basis, s.t).early), 0.0);
  }
}

TEST(LateFourthCumulant, MatchesContractionFormula) {
  for (std::uint64_t i = 0; i < 20; ++i) {
    CounterRng rng(54, i);
    const std::size_t n = 2 + rng.below(5);
    const auto b = random_grid_basis(rng, n);
    const auto f = random_kernel(rng, 2, n);
    const double t = static_cast<double>(rng.below(5)) / 4.0;
    const auto late = project_tensor(f, b, t, ProjectionMode::KeepRest);
    SymmetricKernel both(2, n);
    for (const auto& [k, v] : late.entries())
      if (!b.is_early(k[0], t) && !b.is_early(k[1], t)) both.set(k, v);
    EXPECT_NEAR(late_fourth_cumulant(f, b, t), 48 * norm_sq(contract(both, both, 1)), 1e-12);
  }
}

TEST(PerturbedMixture, ConditionsAndLateCumulantShrinkTogether) {
  const std::size_t n = 16;
  double prev_ascv = INFINITY, prev_cum = INFINITY;
  for (double eps : {0.8, 0.4, 0.2, 0.1, 0.05}) {
    const auto s = mixture(n, eps);
    const double ascv = check_stable_conditions(s.f, s.basis, s.t, s.y.y()).ascv_norms[0];
    const double cum = late_fourth_cumulant(s.f, s.basis, s.t);
    EXPECT_LT(ascv, prev_ascv);
    EXPECT_LT(cum, prev_cum);
    EXPECT_GT(cum, 0.0);
    prev_ascv = ascv;
    prev_cum = cum;
  }
  const auto exact = mixture(n);
  EXPECT_EQ(check_stable_conditions(exact.f, exact.basis, exact.t, exact.y.y()).ascv_norms[0], 0.0);
  EXPECT_EQ(late_fourth_cumulant(exact.f, exact.basis, exact.t), 0.0);
}

TEST(SqEq, ZeroKernel) {
  SqEqInstance in;
  in.channels = 2;
  in.times = {0.2, 0.5, 0.9};
  in.weights.assign(6, 1.0);
  in.c_cells = {{0}, {2}};
  in.d_cells = {{1}};
  in.f = SymmetricKernel(2, 6);
  const auto r = sqeq_check(in);
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_EQ(r.rhs, 0.0);
  EXPECT_EQ(r.residual, 0.0);
}

TEST(SqEq, RejectsRepeatedTimeAtoms) {
  SqEqInstance in;
  in.times = {0.3, 0.3};
  in.weights.assign(2, 1.0);
  in.f = SymmetricKernel(2, 2);
  try {
    sqeq_check(in);
    FAIL() << "expected rejection";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("pairwise distinct"), std::string::npos);
  }
}

TEST(SqEq, RandomInstances) {
  for (std::uint64_t i = 0; i < 40; ++i) {
    CounterRng rng(55, i);
    SqEqInstance in;
    in.channels = 2;
    in.m = 1 + i % 2;
    in.r = 1;
    in.times = {0.15, 0.4, 0.65, 0.9};
    for (std::size_t k = 0; k < 8; ++k) in.weights.push_back(rng.uniform(0.2, 1.5));
    in.c_cells = all_cells(in.m, 4);
    in.d_cells = all_cells(in.r, 4);
    in.f = random_kernel(rng, in.m + in.r, 8, 1.0, [](const IndexTuple&) { return true; });
    in.f *= 5.0;
    const auto r = sqeq_check(in);
    EXPECT_GT(r.lhs, 0.0);
    EXPECT_LE(r.residual, 1e-10);
  }
}

TEST(SqEq, LeftSideIsWeightedContractionNorm) {
  // With unit weights, every cell present and f vanishing on tied time
  // atoms, the left side is |f (x)_r f|^2 over all points.
  for (std::uint64_t i = 0; i < 10; ++i) {
    CounterRng rng(56, i);
    SqEqInstance in;
    in.channels = 2;
    in.m = 1 + i % 2;
    in.r = 1 + (i / 2) % 2;
    in.times = {0.1, 0.3, 0.6, 0.8, 0.95};
    const std::size_t kt = in.times.size(), npts = 2 * kt;
    in.weights.assign(npts, 1.0);
    in.c_cells = all_cells(in.m, kt);
    in.d_cells = all_cells(in.r, kt);
    const std::size_t d = in.m + in.r;
    in.f = random_kernel(rng, d, npts, 0.8, [&](const IndexTuple& t) {
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a + 1; b < d; ++b)
          if (t[a] % kt == t[b] % kt) return false;
      return true;
    });
    const auto dense = oracle::densify(in.f);
    const double want = oracle::inner(oracle::contract(dense, dense, in.r),
                                      oracle::contract(dense, dense, in.r));
    const auto r = sqeq_check(in);
    EXPECT_NEAR(r.lhs, want, 1e-13);
    EXPECT_LE(r.residual, 1e-12);
  }
}

TEST(StableTest, ZeroLambdaColumnIsExactlyZero) {
  StableTestConfig cfg;
  cfg.samples = 4000;
  const auto row = stable_test(mixture(8), cfg);
  for (const auto& c : row.joint) {
    if (c.lambda == 0.0) { EXPECT_EQ(c.residual, 0.0); }
  }
  for (const auto& c : row.conditional) {
    if (c.lambda == 0.0) { EXPECT_EQ(c.residual, 0.0); }
  }
}

TEST(StableTest, RejectsUncertifiedMixingVariance) {
  auto s = mixture(4);
  s.y = MixtureLaw::uncertified(s.y.y());
  EXPECT_THROW(stable_test(s, StableTestConfig{}), InvalidArgument);
  EXPECT_THROW(MixtureLaw::constant(-1.0, 3), InvalidArgument);
}

TEST(StableTest, MixtureConditionalWithinFourSigma) {
  StableTestConfig cfg;
  cfg.samples = 40000;
  const auto row = stable_test(mixture(32), cfg);
  for (const auto& c : row.conditional) EXPECT_TRUE(c.within(4.0)) << c.lambda << " bin " << c.second;
  for (const auto& c : row.joint) EXPECT_TRUE(c.within(4.0)) << c.lambda << ", " << c.second;
}

TEST(StableTest, CentralJointFactorizes) {
  StableTestConfig cfg;
  cfg.samples = 40000;
  const auto row = stable_test(central(256), cfg);
  for (const auto& c : row.limit) EXPECT_TRUE(c.within(4.0)) << c.lambda << ", " << c.second;
}

TEST(StableTest, IndependentOfLaneCount) {
  StableTestConfig a, b;
  a.samples = b.samples = 5000;
  a.lanes = 1;
  b.lanes = 3;
  const auto ra = stable_test(mixture(8), a), rb = stable_test(mixture(8), b);
  ASSERT_EQ(ra.joint.size(), rb.joint.size());
  for (std::size_t i = 0; i < ra.joint.size(); ++i) {
    EXPECT_EQ(ra.joint[i].residual, rb.joint[i].residual);
    EXPECT_EQ(ra.joint[i].std_error, rb.joint[i].std_error);
  }
}

TEST(ProjectionGap, MixtureGradientNormIsReferenceSquare) {
  const auto s = mixture(16);
  const CompiledField proj(adapted_projection(derivative(s.f), s.basis));
  for (std::uint64_t m = 0; m < 20; ++m) {
    const auto z = sample(s.f.dim(), 57, m);
    EXPECT_NEAR(proj.norm_sq(z.z), z[0] * z[0], 1e-13);
    EXPECT_EQ(projection_norm_sq(proj.field(), s.basis, z.z, s.t), 0.0);
  }
  const auto g = projection_gap(s, 3000, 42, 1);
  EXPECT_LE(g.mean_abs_gap, 1e-13);
  EXPECT_EQ(g.mean_early, 0.0);
}

TEST(Dds, ConstantIntegrandGivesGaussianIncrement) {
  auto cfg = default_dds_config(8);
  cfg.phi_coordinate.reset();
  cfg.samples = 20000;
  const auto r = dds_experiment(cfg);
  EXPECT_NEAR(r.increment_norm_sq, 0.5, 1e-15);
  const auto& last = r.points.back();
  EXPECT_NEAR(last.mean_norm_sq, r.increment_norm_sq, 1e-14);
  for (const auto& p : r.points) EXPECT_LE(std::abs(p.gap), 4 * p.gap_std_error);
}

TEST(Dds, ReferenceIntegrandMatchesIsometry) {
  auto cfg = default_dds_config(8);
  cfg.samples = 20000;
  const auto r = dds_experiment(cfg);
  for (const auto& p : r.points) EXPECT_LE(std::abs(p.gap), 4 * p.gap_std_error) << p.t;
  for (const auto& [j, c] : r.early_correlations) EXPECT_LE(std::abs(c), 4 * r.correlation_std_error);
}

TEST(Dds, DirectionOutsideWindowGivesZero) {
  auto cfg = default_dds_config(8);
  cfg.samples = 2000;
  for (std::size_t i = 0; i < cfg.h.size(); ++i)
    if (cfg.basis.time(i) > cfg.t1 && cfg.basis.time(i) <= cfg.t2) cfg.h[i] = 0.0;
  const auto r = dds_experiment(cfg);
  for (const auto& p : r.points) {
    EXPECT_EQ(p.mean_square, 0.0);
    EXPECT_EQ(p.mean_norm_sq, 0.0);
  }
}

TEST(Dds, RejectsBadIntervalAndLatePhi) {
  auto cfg = default_dds_config(4);
  cfg.t1 = 0.8;
  cfg.t2 = 0.5;
  EXPECT_THROW(dds_experiment(cfg), InvalidArgument);
  cfg = default_dds_config(4);
  cfg.phi_coordinate = 4;
  EXPECT_THROW(dds_experiment(cfg), InvalidArgument);
}
