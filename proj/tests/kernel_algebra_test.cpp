#include <gtest/gtest.h>

#include <cmath>

#include "chaoslab/suites.hpp"
#include "chaoslab/tensor.hpp"
#include "oracle.hpp"

using namespace chaoslab;

namespace {

CounterRng rng_for(std::uint64_t i) { return CounterRng(1234, derive_stream(77, i)); }

double max_diff(const Tensor& t, const oracle::Dense& d) {
  double m = 0;
  for (std::size_t i = 0; i < d.a.size(); ++i) m = std::max(m, std::abs(t.at(oracle::key(d.unflat(i))) - d.a[i]));
  return m;
}

}  // namespace

TEST(Symmetrize, AlreadySymmetricIsUnchanged) {
  const auto f = symmetrize(Tensor::basis_product(3, {0, 0}));
  EXPECT_EQ(f.value({0, 0}), 1.0);
  EXPECT_EQ(f.entries().size(), 1u);
}

TEST(Symmetrize, MixedPairSplitsInHalf) {
  const auto f = symmetrize(Tensor::basis_product(3, {0, 1}));
  EXPECT_EQ(f.value({0, 1}), 0.5);
  EXPECT_EQ(f.value({1, 0}), 0.5);
  EXPECT_DOUBLE_EQ(norm_sq(f), 0.5);
}

TEST(Symmetrize, MatchesPermutationAverage) {
  for (std::uint64_t i = 0; i < 30; ++i) {
    auto rng = rng_for(i);
    const std::size_t d = 1 + rng.below(4), n = 1 + rng.below(4);
    const Tensor t = random_tensor(rng, d, n);
    const auto expected = oracle::symmetrize(oracle::densify(t));
    EXPECT_LE(max_diff(symmetrize(t).to_tensor(), expected), 1e-14);
  }
}

TEST(Symmetrize, IdempotentProjectionAndContraction) {
  for (std::uint64_t i = 0; i < 50; ++i) {
    auto rng = rng_for(100 + i);
    const std::size_t d = 1 + rng.below(4), n = 1 + rng.below(5);
    const Tensor t = random_tensor(rng, d, n);
    const auto s = symmetrize(t);
    EXPECT_LE(max_abs_diff(symmetrize(s.to_tensor()), s), 1e-15 * (1 + norm(s)));
    const auto g = random_kernel(rng, d, n);
    EXPECT_NEAR(inner(s, g), inner(t, g), 1e-12);
    EXPECT_LE(norm(s), norm(t) + 1e-14);
  }
}

TEST(Symmetrize, MultisetNormLaw) {
  for (std::size_t d = 1; d <= kMaxOrder; ++d)
    for_each_multiset(d, 3, [&](const IndexTuple& t) {
      auto m = multiplicities(t, d);
      double prod = 1;
      for (auto a : m) prod *= detail::factorial(a);
      Tensor e(d, 3);
      e.set(t, 1.0);
      EXPECT_NEAR(norm_sq(symmetrize(e)), prod / detail::factorial(d), 1e-15);
    });
}

TEST(Contract, ExamplesOnMixedPair) {
  const auto f = SymmetricKernel::monomial(2, {0, 1});
  EXPECT_DOUBLE_EQ(contract(f, f, 2).at(IndexTuple{}), 0.5);
  const Tensor c1 = contract(f, f, 1);
  EXPECT_DOUBLE_EQ(c1.at({0, 0}), 0.25);
  EXPECT_DOUBLE_EQ(c1.at({1, 1}), 0.25);
  EXPECT_EQ(c1.entries().size(), 2u);
}

TEST(Contract, ZeroOrderIsTensorProduct) {
  const auto f = SymmetricKernel::monomial(2, {0, 0});
  const Tensor c = contract(f, f, 0);
  EXPECT_EQ(c.order(), 4u);
  EXPECT_EQ(c.at({0, 0, 0, 0}), 1.0);
  EXPECT_EQ(c.entries().size(), 1u);
}

TEST(Contract, MatchesBruteForce) {
  for (std::uint64_t i = 0; i < 40; ++i) {
    auto rng = rng_for(200 + i);
    const std::size_t d = 1 + rng.below(3), n = 1 + rng.below(4);
    const auto f = random_kernel(rng, d, n), g = random_kernel(rng, d, n);
    for (std::size_t p = 0; p <= d; ++p) {
      if (2 * (d - p) > kMaxOrder) continue;
      const auto expected = oracle::contract(oracle::densify(f), oracle::densify(g), p);
      EXPECT_LE(max_diff(contract(f, g, p), expected), 1e-13) << "d=" << d << " p=" << p;
    }
  }
}

TEST(Contract, CauchySchwarzAndFullContraction) {
  for (std::uint64_t i = 0; i < 50; ++i) {
    auto rng = rng_for(300 + i);
    const std::size_t d = 1 + rng.below(3), n = 1 + rng.below(5);
    auto f = random_kernel(rng, d, n), g = random_kernel(rng, d, n);
    f *= 1.0 + rng.uniform(0, 3);
    for (std::size_t p = 0; p <= d; ++p)
      EXPECT_LE(norm(contract(f, g, p)), norm(f) * norm(g) + 1e-12);
    EXPECT_NEAR(contract(f, f, d).at(IndexTuple{}), norm_sq(f), 1e-12);
  }
}

TEST(Contract, RejectsMismatchAndCapacity) {
  EXPECT_THROW(contract(SymmetricKernel(2, 3), SymmetricKernel(2, 4), 1), InvalidArgument);
  EXPECT_THROW(contract(SymmetricKernel(2, 3), SymmetricKernel(3, 3), 1), InvalidArgument);
  EXPECT_THROW(contract(SymmetricKernel(2, 3), SymmetricKernel(2, 3), 3), InvalidArgument);
  EXPECT_THROW(contract(SymmetricKernel(4, 2), SymmetricKernel(4, 2), 0), CapacityError);
}

TEST(Inner, Examples) {
  const auto a = Tensor::basis_product(2, {0, 1});
  const auto b = Tensor::basis_product(2, {1, 0});
  EXPECT_EQ(inner(a, a), 1.0);
  EXPECT_EQ(inner(a, b), 0.0);
  EXPECT_DOUBLE_EQ(inner(SymmetricKernel::monomial(2, {0, 1}), a), 0.5);
  EXPECT_THROW(inner(a, Tensor(3, 2)), InvalidArgument);
}

TEST(Inner, SymmetricMatchesDense) {
  for (std::uint64_t i = 0; i < 30; ++i) {
    auto rng = rng_for(400 + i);
    const std::size_t d = 1 + rng.below(4), n = 1 + rng.below(4);
    const auto f = random_kernel(rng, d, n), g = random_kernel(rng, d, n);
    EXPECT_NEAR(inner(f, g), oracle::inner(oracle::densify(f), oracle::densify(g)), 1e-14);
  }
}

TEST(Capacity, OrderAndDimensionCaps) {
  EXPECT_THROW(SymmetricKernel(kMaxOrder + 1, 2), CapacityError);
  EXPECT_THROW(Tensor(2, kMaxDim + 1), CapacityError);
  EXPECT_NO_THROW(SymmetricKernel(kMaxOrder, 2));
  SymmetricKernel f(2, 3);
  EXPECT_THROW(f.set(make_tuple({0, 3}), 1.0), InvalidArgument);
  EXPECT_THROW(f.set(make_tuple({0, 1}), NAN), InvalidArgument);
}

TEST(Storage, PermutationInvariantByConstruction) {
  SymmetricKernel f(3, 4);
  f.set(make_tuple({2, 0, 1}), 0.7);
  EXPECT_EQ(f.value({0, 1, 2}), 0.7);
  EXPECT_EQ(f.value({1, 2, 0}), 0.7);
  EXPECT_EQ(f.entries().size(), 1u);
  f.add(make_tuple({1, 0, 2}), -0.7);
  EXPECT_TRUE(f.empty());
}
