#include <gtest/gtest.h>

#include <cmath>

#include "chaoslab/suites.hpp"
#include "chaoslab/transport.hpp"

using namespace chaoslab;

namespace {

UnitaryMap transport_for(const FilteredSpace& space) {
  return build_transport(space, space.generators());
}

bool is_signed_permutation(const Eigen::MatrixXd& q) {
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    int ones = 0;
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
      const double a = std::abs(q(r, c));
      if (std::abs(a - 1.0) < 1e-15)
        ++ones;
      else if (a > 1e-15)
        return false;
    }
    if (ones != 1) return false;
  }
  return true;
}

}  // namespace

TEST(BuildTransport, DistinctTimesGiveSignedPermutation) {
  const FilteredSpace space(FilteredBasis({0.7, 0.2, 0.9, 0.4}));
  const auto map = transport_for(space);
  EXPECT_TRUE(is_signed_permutation(map.q));
  EXPECT_EQ(map.concrete.dim(), 4u);
  for (int c : map.concrete.channels()) EXPECT_EQ(c, 1);
}

TEST(BuildTransport, OneDimensional) {
  const FilteredSpace space(FilteredBasis({0.6}));
  const auto map = transport_for(space);
  EXPECT_EQ(std::abs(map.q(0, 0)), 1.0);
}

TEST(BuildTransport, RankTwoExample) {
  const FilteredSpace space(FilteredBasis({0.2, 0.2, 0.6, 0.6}), random_orthogonal(4, 5, 5));
  const auto map = transport_for(space);
  EXPECT_EQ(map.concrete.channels(), (std::vector<int>{1, 1, 2, 2}));
  EXPECT_EQ(map.concrete.times(), (std::vector<double>{0.2, 0.6, 0.2, 0.6}));
  EXPECT_LE(orthogonality_residual(map), 1e-12);
  for (double t : map.breakpoints) EXPECT_LE(intertwining_residual(space, map, t), 1e-12);
}

TEST(BuildTransport, RejectsBadGenerators) {
  const FilteredSpace space(FilteredBasis({0.2, 0.2, 0.6}));
  EXPECT_THROW(build_transport(space, {{0, 0, 0}}), InvalidArgument);
  EXPECT_THROW(build_transport(space, {{1, 0, 0}}), InvalidArgument);
  EXPECT_THROW(build_transport(space, {{1, 1, 0}, {1, 0, 1}}), InvalidArgument);
}

TEST(Pushforward, IdentityRoundTripAndIsometry) {
  const FilteredSpace diag(FilteredBasis({0.25, 0.5, 0.75}));
  CounterRng rng(40, 0);
  const auto f = random_kernel(rng, 2, 3);
  const UnitaryMap id{Eigen::MatrixXd::Identity(3, 3), diag.basis(), diag.breakpoints()};
  EXPECT_LE(max_abs_diff(pushforward_kernel(id, f, PushDirection::Forward), f), 1e-15);

  for (std::uint64_t i = 0; i < 20; ++i) {
    CounterRng r(41, i);
    const std::size_t n = 2 + r.below(6), d = 1 + r.below(3);
    const FilteredSpace space(random_grid_basis(r, n), random_orthogonal(n, 41, i));
    const auto map = transport_for(space);
    const Tensor t = random_tensor(r, d, n);
    const Tensor fwd = pushforward_kernel(map, t, PushDirection::Forward);
    EXPECT_NEAR(norm(fwd), norm(t), 1e-12);
    EXPECT_LE(max_abs_diff(pushforward_kernel(map, fwd, PushDirection::Inverse), t), 1e-12);
  }
}

TEST(VerifyTransport, IdentityTransportHasZeroResiduals) {
  const FilteredSpace space(FilteredBasis({0.25, 0.5, 0.5, 1.0}));
  const auto map = transport_for(space);
  CounterRng rng(42, 0);
  const auto f = random_kernel(rng, 2, 4);
  const auto z = sample(4, 42, 0), w = sample(4, 42, 1);
  const std::vector<double> times{0.0, 0.25, 0.5, 0.75, 1.0};
  EXPECT_LE(verify_transport(space, map, f, times, z.z, w.z).max(), 1e-14);
}

TEST(VerifyTransport, RandomInstances) {
  for (std::uint64_t i = 0; i < 30; ++i) {
    CounterRng r(43, i);
    const std::size_t n = 2 + r.below(7), d = 1 + r.below(3);
    const FilteredSpace space(random_grid_basis(r, n), random_orthogonal(n, 43, i));
    const auto map = transport_for(space);
    const auto f = random_kernel(r, d, n);
    const auto z = sample(n, 44, i), w = sample(n, 45, i);
    const std::vector<double> times{0.0, 0.3, 0.5, 0.75, 1.0};
    const auto res = verify_transport(space, map, f, times, z.z, w.z);
    EXPECT_LE(res.intertwining, 1e-9);
    EXPECT_LE(res.integral, 1e-9);
    EXPECT_LE(res.norm, 1e-9);
    EXPECT_LE(res.conditional, 1e-9);
    EXPECT_LE(res.filtration, 1e-9);
  }
}

TEST(VerifyTransport, AdaptedFieldsPassThePairingTest) {
  int raw_sensitive = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    CounterRng r(46, i);
    const std::size_t n = 3 + r.below(5);
    const FilteredSpace space(random_grid_basis(r, n), random_orthogonal(n, 46, i));
    const auto map = transport_for(space);
    const auto f = random_kernel(r, 2, n);
    const auto raw = derivative(f);
    const auto adapted = adapted_projection(raw, map.concrete);
    const auto h = sample(n, 47, i), z = sample(n, 48, i), w = sample(n, 49, i);

    double worst_adapted = 0, worst_raw = 0;
    for (double t : map.breakpoints) {
      worst_adapted = std::max(worst_adapted,
                               transported_pairing_sensitivity(space, map, adapted, h.z, t, z.z, w.z));
      worst_raw = std::max(worst_raw, transported_pairing_sensitivity(space, map, raw, h.z, t, z.z, w.z));
    }
    EXPECT_LE(worst_adapted, 1e-10);
    if (worst_raw > 1e-6) ++raw_sensitive;
  }
  // The unprojected derivative is not adapted, so the test must be able to see it.
  EXPECT_GT(raw_sensitive, 0);
}

TEST(FilteredSpace, RejectsNonOrthogonalFrame) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2);
  m(0, 1) = 0.5;
  EXPECT_THROW(FilteredSpace(FilteredBasis({0.5, 1.0}), m), InvalidArgument);
}
