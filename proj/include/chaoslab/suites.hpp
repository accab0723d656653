#ifndef CHAOSLAB_SUITES_HPP
#define CHAOSLAB_SUITES_HPP

// Randomized invariant suites over exact identities. Each suite draws its
// instances from (seed, suite tag, instance index) and reports the largest
// residual seen.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chaoslab/chaos.hpp"
#include "chaoslab/filtered_space.hpp"
#include "chaoslab/limit_lab.hpp"
#include "chaoslab/malliavin.hpp"
#include "chaoslab/random.hpp"
#include "chaoslab/tensor.hpp"
#include "chaoslab/transport.hpp"

namespace chaoslab {

struct SuiteResult {
  std::string name;
  std::size_t instances = 0;
  double max_residual = 0.0;
  double bound = 0.0;

  bool passed() const { return std::isfinite(max_residual) && max_residual <= bound; }
  void record(double r) {
    ++instances;
    if (!(r <= max_residual)) max_residual = r;
  }
};

/// Calls fn(sorted tuple) for every multiset of `order` indices from [0, dim).
template <class Fn>
void for_each_multiset(std::size_t order, std::size_t dim, Fn&& fn) {
  IndexTuple t{};
  if (order == 0) {
    fn(static_cast<const IndexTuple&>(t));
    return;
  }
  for (;;) {
    fn(static_cast<const IndexTuple&>(t));
    std::size_t k = order;
    while (k > 0 && t[k - 1] == dim - 1) --k;
    if (k == 0) return;
    const Index v = static_cast<Index>(t[k - 1] + 1);
    for (std::size_t j = k - 1; j < order; ++j) t[j] = v;
  }
}

/// Gaussian coefficients on a random subset of multisets, scaled to unit norm.
/// `keep` filters which sorted tuples may be nonzero.
template <class Keep>
SymmetricKernel random_kernel(CounterRng& rng, std::size_t order, std::size_t dim, double density,
                              Keep&& keep) {
  SymmetricKernel f(order, dim);
  for_each_multiset(order, dim, [&](const IndexTuple& t) {
    const double u = rng.uniform();
    const double c = rng.normal();
    if (u < density && keep(t)) f.set(t, c);
  });
  const double nf = norm(f);
  if (nf > 0.0) f *= 1.0 / nf;
  return f;
}

inline SymmetricKernel random_kernel(CounterRng& rng, std::size_t order, std::size_t dim,
                                     double density = 0.7) {
  return random_kernel(rng, order, dim, density, [](const IndexTuple&) { return true; });
}

inline Tensor random_tensor(CounterRng& rng, std::size_t order, std::size_t dim,
                            double density = 0.7) {
  Tensor t(order, dim);
  const std::size_t total = static_cast<std::size_t>(std::pow(dim, order));
  for (std::size_t flat = 0; flat < total; ++flat) {
    IndexTuple k{};
    std::size_t rest = flat;
    for (std::size_t s = 0; s < order; ++s) {
      k[s] = static_cast<Index>(rest % dim);
      rest /= dim;
    }
    const double u = rng.uniform();
    const double c = rng.normal();
    if (u < density) t.set(k, c);
  }
  return t;
}

/// Times drawn from the coarse grid {1/g, ..., 1}, so ties are common.
inline FilteredBasis random_grid_basis(CounterRng& rng, std::size_t dim, std::size_t grid = 4) {
  std::vector<double> times(dim);
  for (auto& t : times) t = static_cast<double>(rng.below(grid) + 1) / static_cast<double>(grid);
  return FilteredBasis(times);
}

namespace detail {

inline constexpr std::uint64_t kSuiteTag = 0x5EED;

inline CounterRng suite_rng(std::uint64_t seed, std::uint64_t suite, std::uint64_t i) {
  return CounterRng(seed, derive_stream((kSuiteTag << 8) + suite, i));
}

inline double grid_time(CounterRng& rng) { return static_cast<double>(rng.below(5)) / 4.0; }

inline bool distinct_times(const FilteredBasis& b, const IndexTuple& t, std::size_t order) {
  for (std::size_t a = 0; a < order; ++a)
    for (std::size_t c = a + 1; c < order; ++c)
      if (b.time(t[a]) == b.time(t[c])) return false;
  return true;
}

}  // namespace detail

/// symmetrize is idempotent, a contraction, and the orthogonal projection
/// onto symmetric tensors.
inline SuiteResult symmetrization_suite(std::uint64_t seed, std::size_t count = 100) {
  SuiteResult res{"symmetrization", 0, 0.0, 1e-12};
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = detail::suite_rng(seed, 1, i);
    const std::size_t d = 1 + rng.below(4), n = 1 + rng.below(5);
    const Tensor t = random_tensor(rng, d, n);
    const SymmetricKernel s = random_kernel(rng, d, n);
    const SymmetricKernel ts = symmetrize(t);
    double r = std::abs(inner(ts, s) - inner(t, s));
    r = std::max(r, max_abs_diff(symmetrize(ts.to_tensor()), ts));
    r = std::max(r, std::max(0.0, norm(ts) - norm(t)));
    res.record(r);
  }
  return res;
}

/// I_d(f)^2 against the evaluated squared expansion.
inline SuiteResult multiplication_suite(std::uint64_t seed, std::size_t count = 100) {
  SuiteResult res{"multiplication-formula", 0, 0.0, 1e-9};
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = detail::suite_rng(seed, 2, i);
    const std::size_t d = 1 + rng.below(3), n = 1 + rng.below(8);
    const SymmetricKernel f = random_kernel(rng, d, n);
    const auto z = sample(n, seed, derive_stream((detail::kSuiteTag << 8) + 102, i));
    const double x = eval_integral(f, z);
    res.record(std::abs(x * x - eval_chaos(square_expand(f), z)));
  }
  return res;
}

/// pi_s^{(x)2r}(f (x)_{d-r} f) = pi_s^{(x)2r}(f (x)_{d-r}^{pi,s} f) + (pi_s f) (x)_{d-r} (pi_s f).
inline SuiteResult early_split_suite(std::uint64_t seed, std::size_t count = 100) {
  SuiteResult res{"early-contraction-split", 0, 0.0, 1e-12};
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = detail::suite_rng(seed, 3, i);
    const std::size_t d = 1 + rng.below(3), n = 1 + rng.below(8);
    const FilteredBasis basis = random_grid_basis(rng, n);
    const double s = detail::grid_time(rng);
    const SymmetricKernel f = random_kernel(rng, d, n);
    const SymmetricKernel pf = project_tensor(f, basis, s, ProjectionMode::KeepEarly);
    for (std::size_t r = 1; r <= d; ++r) {
      const Tensor lhs =
          project_tensor(contract(f, f, d - r), basis, s, ProjectionMode::KeepEarly);
      const Tensor rhs = project_tensor(generalized_contraction(f, basis, d - r, s), basis, s,
                                        ProjectionMode::KeepEarly) +
                         contract(pf.to_tensor(), pf.to_tensor(), d - r);
      res.record(max_abs_diff(lhs, rhs));
    }
  }
  return res;
}

/// Special cases of the generalized contraction: s = 0, s = 1, p = d.
inline SuiteResult special_cases_suite(std::uint64_t seed, std::size_t count = 100) {
  SuiteResult res{"generalized-contraction-cases", 0, 0.0, 1e-12};
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = detail::suite_rng(seed, 4, i);
    const std::size_t d = 1 + rng.below(3), n = 1 + rng.below(8);
    const FilteredBasis basis = random_grid_basis(rng, n);
    const SymmetricKernel f = random_kernel(rng, d, n);
    double r = 0.0;
    for (std::size_t p = 1; p <= d; ++p) {
      r = std::max(r, max_abs_diff(generalized_contraction(f, basis, p, 0.0), contract(f, f, p)));
      r = std::max(r, norm(generalized_contraction(f, basis, p, 1.0)));
    }
    const double s = detail::grid_time(rng);
    const double rest = norm_sq(project_tensor(f, basis, s, ProjectionMode::KeepRest));
    r = std::max(r, std::abs(generalized_contraction(f, basis, d, s).at(IndexTuple{}) - rest));
    res.record(r);
  }
  return res;
}

/// delta(D I_d(f)) = d I_d(f).
inline SuiteResult number_operator_suite(std::uint64_t seed, std::size_t count = 100) {
  SuiteResult res{"divergence-of-derivative", 0, 0.0, 1e-9};
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = detail::suite_rng(seed, 5, i);
    const std::size_t d = 1 + rng.below(3), n = 1 + rng.below(8);
    const SymmetricKernel f = random_kernel(rng, d, n);
    const auto z = sample(n, seed, derive_stream((detail::kSuiteTag << 8) + 105, i));
    res.record(std::abs(skorohod(derivative(f), z) - static_cast<double>(d) * eval_integral(f, z)));
  }
  return res;
}

/// Exact predictable reconstruction for kernels that vanish on tuples with
/// tied time stamps.
inline SuiteResult clark_ocone_suite(std::uint64_t seed, std::size_t count = 100) {
  SuiteResult res{"clark-ocone", 0, 0.0, 1e-9};
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = detail::suite_rng(seed, 6, i);
    const std::size_t d = 1 + rng.below(3), n = 6;
    const FilteredBasis basis = random_grid_basis(rng, n, 8);
    const SymmetricKernel f = random_kernel(rng, d, n, 0.8, [&](const IndexTuple& t) {
      return detail::distinct_times(basis, t, d);
    });
    const auto z = sample(n, seed, derive_stream((detail::kSuiteTag << 8) + 106, i));
    res.record(std::abs(clark_ocone_residual(f, basis, z)));
  }
  return res;
}

/// E[I_2(f)^4] from the squared expansion against 3(2|f|^2)^2 + 48|f (x)_1 f|^2.
inline SuiteResult fourth_moment_suite(std::uint64_t seed, std::size_t count = 100) {
  SuiteResult res{"fourth-moment-order-2", 0, 0.0, 1e-12};
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = detail::suite_rng(seed, 7, i);
    const std::size_t n = 1 + rng.below(8);
    const SymmetricKernel f = random_kernel(rng, 2, n);
    const double v = 2.0 * norm_sq(f);
    res.record(std::abs(fourth_moment(f) - (3.0 * v * v + 48.0 * norm_sq(contract(f, f, 1)))));
  }
  return res;
}

/// Random square-equality instance: distinct atoms, m, r <= 2, |A| <= 3.
inline SqEqInstance random_sqeq_instance(CounterRng& rng) {
  SqEqInstance in;
  in.channels = 1 + rng.below(3);
  in.m = 1 + rng.below(2);
  in.r = 1 + rng.below(2);
  const std::size_t kt = in.m + in.r + rng.below(3);
  // distinct atoms: jittered cells of an even grid
  for (std::size_t k = 0; k < kt; ++k)
    in.times.push_back((static_cast<double>(k) + rng.uniform(0.05, 0.95)) / static_cast<double>(kt));
  for (std::size_t k = kt; k > 1; --k) std::swap(in.times[k - 1], in.times[rng.below(k)]);
  const std::size_t npts = in.channels * kt;
  for (std::size_t p = 0; p < npts; ++p) in.weights.push_back(rng.uniform(0.2, 1.5));
  auto cells = [&](std::size_t len) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> c(len, 0);
    for (;;) {
      // cells repeating an atom only meet tied tuples, on which f is masked
      auto sorted = c;
      std::sort(sorted.begin(), sorted.end());
      const bool distinct = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
      if (rng.uniform() < 0.6 && distinct) out.push_back(c);
      std::size_t j = 0;
      while (j < len && ++c[j] == kt) c[j++] = 0;
      if (j == len) break;
    }
    return out;
  };
  in.c_cells = cells(in.m);
  in.d_cells = cells(in.r);
  in.f = random_kernel(rng, in.m + in.r, npts, 1.0);
  in.f *= std::sqrt(static_cast<double>(in.f.entries().size()));  // O(1) coefficients
  return in;
}

inline SuiteResult sqeq_suite(std::uint64_t seed, std::size_t count = 200) {
  SuiteResult res{"square-equality", 0, 0.0, 1e-10};
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = detail::suite_rng(seed, 8, i);
    res.record(sqeq_check(random_sqeq_instance(rng)).residual);
  }
  return res;
}

/// Transport between a rotated abstract resolution and its concrete model:
/// intertwining, integral identity, contraction norms, conditional
/// expectations and filtration sensitivity.
inline SuiteResult transport_suite(std::uint64_t seed, std::size_t count = 100) {
  SuiteResult res{"transport", 0, 0.0, 1e-9};
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = detail::suite_rng(seed, 9, i);
    const std::size_t n = 1 + rng.below(8), d = 1 + rng.below(3);
    const FilteredBasis basis = random_grid_basis(rng, n);
    const FilteredSpace space(basis, random_orthogonal(n, seed, derive_stream(0x7A, i)));
    const UnitaryMap map = build_transport(space, space.generators());
    const SymmetricKernel f = random_kernel(rng, d, n);
    std::vector<double> times = basis.breakpoints();
    times.push_back(0.1);
    times.push_back(0.6);
    const auto z = sample(n, seed, derive_stream((detail::kSuiteTag << 8) + 109, 2 * i));
    const auto w = sample(n, seed, derive_stream((detail::kSuiteTag << 8) + 109, 2 * i + 1));
    res.record(verify_transport(space, map, f, times, z.z, w.z).max());
  }
  return res;
}

/// Fully orthogonal generators and the reparametrized clock.
inline SuiteResult time_change_suite(std::uint64_t seed, std::size_t count = 100) {
  SuiteResult res{"time-change", 0, 0.0, 1e-12};
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = detail::suite_rng(seed, 10, i);
    const std::size_t n = 1 + rng.below(8);
    const FilteredBasis basis = random_grid_basis(rng, n);
    const Generators gens = fully_orthogonalize(basis);
    const auto [map, restamped] = time_change(basis, gens);
    double r = 0.0;
    const auto& vals = map.values();
    for (std::size_t k = 1; k < vals.size(); ++k) r = std::max(r, vals[k - 1] - vals[k]);
    for (double t : restamped.breakpoints()) {
      double acc = 0.0;
      for (const auto& g : gens.vectors)
        for (std::size_t j = 0; j < n; ++j)
          if (restamped.is_early(j, t)) acc += g[j] * g[j];
      r = std::max(r, std::abs(acc - t));
    }
    // spans R^n: stacked increments of pi_t g_j have full rank
    Eigen::MatrixXd inc(static_cast<Eigen::Index>(n),
                        static_cast<Eigen::Index>(gens.vectors.size() * basis.breakpoints().size()));
    Eigen::Index col = 0;
    for (const auto& g : gens.vectors)
      for (double t : basis.breakpoints()) {
        for (std::size_t j = 0; j < n; ++j)
          inc(static_cast<Eigen::Index>(j), col) = basis.time(j) == t ? g[j] : 0.0;
        ++col;
      }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(inc);
    if (static_cast<std::size_t>(lu.rank()) != n) r = std::max(r, 1.0);
    res.record(r);
  }
  return res;
}

inline std::vector<SuiteResult> run_selftest(std::uint64_t seed) {
  return {symmetrization_suite(seed), multiplication_suite(seed), early_split_suite(seed),
          special_cases_suite(seed),  number_operator_suite(seed), clark_ocone_suite(seed),
          fourth_moment_suite(seed),  sqeq_suite(seed),            transport_suite(seed),
          time_change_suite(seed)};
}

}  // namespace chaoslab

#endif  // CHAOSLAB_SUITES_HPP
