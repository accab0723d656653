#ifndef CHAOSLAB_CHAOS_HPP
#define CHAOSLAB_CHAOS_HPP

// Finite chaos expansions c_0 + sum_d I_d(f_d) and their exact evaluation.
//
// Normalization: h_k are the unnormalized probabilists' Hermite polynomials
// (E[h_k(Z)^2] = k!), so that I_d((e_{j_1}^{a_1} (x) ... )_s) = prod_j h_{a_j}(Z_j)
// and E[I_d(f)^2] = d! |f|^2.

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "chaoslab/error.hpp"
#include "chaoslab/filtered_space.hpp"
#include "chaoslab/random.hpp"
#include "chaoslab/tensor.hpp"

namespace chaoslab {

inline constexpr std::size_t kMaxHermiteDegree = 64;

/// Probabilists' Hermite polynomial: h_0 = 1, h_1 = x,
/// h_{k+1} = x h_k - k h_{k-1}.
inline double hermite(std::size_t k, double x) {
  if (k > kMaxHermiteDegree)
    throw InvalidArgument("hermite degree " + std::to_string(k) + " exceeds " +
                          std::to_string(kMaxHermiteDegree));
  if (k == 0) return 1.0;
  double prev = 1.0, cur = x;
  for (std::size_t j = 1; j < k; ++j) {
    const double next = x * cur - static_cast<double>(j) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// c_0 + sum over distinct orders d >= 1 of I_d(f_d).
class ChaosFunctional {
 public:
  explicit ChaosFunctional(std::size_t dim = 1, double constant = 0.0)
      : dim_(dim), constant_(constant) {
    detail::require(dim > 0, "chaos functional dimension must be positive");
  }

  static ChaosFunctional integral(const SymmetricKernel& f) {
    ChaosFunctional F(f.dim());
    F.add(f);
    return F;
  }

  std::size_t dim() const noexcept { return dim_; }
  double constant() const noexcept { return constant_; }
  const std::map<std::size_t, SymmetricKernel>& kernels() const noexcept { return kernels_; }

  /// Kernel of the given order, or an empty kernel.
  SymmetricKernel kernel(std::size_t order) const {
    auto it = kernels_.find(order);
    return it == kernels_.end() ? SymmetricKernel(order, dim_) : it->second;
  }

  std::size_t max_order() const noexcept {
    return kernels_.empty() ? 0 : kernels_.rbegin()->first;
  }

  void set_constant(double c) { constant_ = c; }

  /// Adds I_d(f) (order 0 goes into the constant).
  void add(const SymmetricKernel& f) {
    if (f.dim() != dim_)
      throw InvalidArgument("kernel dim " + std::to_string(f.dim()) +
                            " does not match functional dim " + std::to_string(dim_));
    if (f.order() == 0) {
      constant_ += f.value(IndexTuple{});
      return;
    }
    auto [it, inserted] = kernels_.try_emplace(f.order(), f);
    if (!inserted) it->second += f;
    if (it->second.empty()) kernels_.erase(it);
  }

  ChaosFunctional& operator+=(const ChaosFunctional& o) {
    require_dim(o);
    constant_ += o.constant_;
    for (const auto& [d, f] : o.kernels_) add(f);
    return *this;
  }

  ChaosFunctional& operator-=(const ChaosFunctional& o) {
    require_dim(o);
    constant_ -= o.constant_;
    for (const auto& [d, f] : o.kernels_) add(-1.0 * f);
    return *this;
  }

  ChaosFunctional& operator*=(double s) {
    constant_ *= s;
    for (auto& [d, f] : kernels_) f *= s;
    std::erase_if(kernels_, [](const auto& kv) { return kv.second.empty(); });
    return *this;
  }

  friend ChaosFunctional operator+(ChaosFunctional a, const ChaosFunctional& b) { return a += b; }
  friend ChaosFunctional operator-(ChaosFunctional a, const ChaosFunctional& b) { return a -= b; }
  friend ChaosFunctional operator*(double s, ChaosFunctional a) { return a *= s; }

 private:
  void require_dim(const ChaosFunctional& o) const {
    if (o.dim_ != dim_) throw InvalidArgument("chaos functional dimension mismatch");
  }

  std::size_t dim_;
  double constant_;
  std::map<std::size_t, SymmetricKernel> kernels_;
};

/// I_d(f)(Z) = sum over multisets f(i) (d!/prod a_j!) prod_j h_{a_j}(Z_j).
inline double eval_integral(const SymmetricKernel& f, std::span<const double> z) {
  if (z.size() != f.dim())
    throw InvalidArgument("sample dim " + std::to_string(z.size()) + " does not match kernel dim " +
                          std::to_string(f.dim()));
  const std::size_t d = f.order();
  if (d == 0) return f.value(IndexTuple{});
  const double dfact = detail::factorial(d);
  double acc = 0.0;
  for (const auto& [key, v] : f.entries()) {
    double prod = 1.0;
    double mult_fact = 1.0;
    std::size_t k = 0;
    while (k < d) {
      std::size_t a = 1;
      while (k + a < d && key[k + a] == key[k]) ++a;
      prod *= hermite(a, z[key[k]]);
      mult_fact *= detail::factorial(a);
      k += a;
    }
    acc += v * (dfact / mult_fact) * prod;
  }
  return acc;
}

inline double eval_integral(const SymmetricKernel& f, const GaussianSample& z) {
  return eval_integral(f, std::span<const double>(z.z));
}

inline double eval_chaos(const ChaosFunctional& F, std::span<const double> z) {
  if (z.size() != F.dim())
    throw InvalidArgument("sample dim " + std::to_string(z.size()) +
                          " does not match functional dim " + std::to_string(F.dim()));
  double acc = F.constant();
  for (const auto& [d, f] : F.kernels()) acc += eval_integral(f, z);
  return acc;
}

inline double eval_chaos(const ChaosFunctional& F, const GaussianSample& z) {
  return eval_chaos(F, std::span<const double>(z.z));
}

/// E[F^2] = c_0^2 + sum_d d! |f_d|^2.
inline double second_moment(const ChaosFunctional& F) {
  double acc = F.constant() * F.constant();
  for (const auto& [d, f] : F.kernels()) acc += detail::factorial(d) * norm_sq(f);
  return acc;
}

/// L^2(P) distance computed from kernels.
inline double l2_distance(const ChaosFunctional& F, const ChaosFunctional& G) {
  return std::sqrt(second_moment(F - G));
}

namespace detail {

inline void check_square_capacity(const SymmetricKernel& f) {
  if (f.order() == 0) throw InvalidArgument("squared expansion needs order >= 1");
  if (2 * f.order() > kMaxOrder)
    throw CapacityError("squared expansion of an order-" + std::to_string(f.order()) +
                        " kernel needs order " + std::to_string(2 * f.order()) +
                        ", above the order cap " + std::to_string(kMaxOrder));
}

// Shared body of square_expand and conditional_second_moment; `project`
// maps the order-2r contraction before symmetrization.
template <class Project>
ChaosFunctional product_expansion(const SymmetricKernel& f, Project&& project) {
  check_square_capacity(f);
  const std::size_t d = f.order();
  ChaosFunctional out(f.dim(), factorial(d) * norm_sq(f));
  const Tensor tf = f.to_tensor();
  for (std::size_t r = 1; r <= d; ++r) {
    const double c = factorial(d - r) * binomial(d, r) * binomial(d, r);
    Tensor k = project(contract(tf, tf, d - r));
    out.add(c * symmetrize(k));
  }
  return out;
}

}  // namespace detail

/// I_d(f)^2 = d!|f|^2 + sum_{r=1}^d (d-r)! C(d,r)^2 I_{2r}((f (x)_{d-r} f)_s).
inline ChaosFunctional square_expand(const SymmetricKernel& f) {
  return detail::product_expansion(f, [](Tensor t) { return t; });
}

/// E[I_d(f)^4], exact from the squared expansion and the isometry.
inline double fourth_moment(const SymmetricKernel& f) {
  return second_moment(square_expand(f));
}

/// E[F | F_s]: every kernel is replaced by pi_s^{(x)d} f.
inline ChaosFunctional conditional_expectation(const ChaosFunctional& F,
                                               const FilteredBasis& basis, double s) {
  detail::check_dim(F.dim(), basis);
  ChaosFunctional out(F.dim(), F.constant());
  for (const auto& [d, f] : F.kernels())
    out.add(project_tensor(f, basis, s, ProjectionMode::KeepEarly));
  return out;
}

/// E[I_d(f)^2 | F_s] = d!|f|^2 + sum_r (d-r)! C(d,r)^2 I_{2r}(pi_s^{(x)2r}(f (x)_{d-r} f)).
inline ChaosFunctional conditional_second_moment(const SymmetricKernel& f,
                                                 const FilteredBasis& basis, double s) {
  detail::check_dim(f.dim(), basis);
  return detail::product_expansion(f, [&](const Tensor& t) {
    return project_tensor(t, basis, s, ProjectionMode::KeepEarly);
  });
}

}  // namespace chaoslab

#endif  // CHAOSLAB_CHAOS_HPP
