#ifndef CHAOSLAB_TENSOR_HPP
#define CHAOSLAB_TENSOR_HPP

// Order-d coefficient arrays over a finite orthonormal basis e_0..e_{n-1}.
//
// Storage is sparse: a Tensor keeps every nonzero index tuple, a
// SymmetricKernel keeps one entry per multiset (sorted tuple). Semantics are
// those of the dense array; lookups of absent tuples return 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "chaoslab/error.hpp"

namespace chaoslab {

inline constexpr std::size_t kMaxOrder = 6;
inline constexpr std::size_t kMaxDim = 1024;

using Index = std::uint16_t;
using IndexTuple = std::array<Index, kMaxOrder>;

namespace detail {

inline void check_shape(std::size_t order, std::size_t dim) {
  if (order > kMaxOrder)
    throw CapacityError("tensor order " + std::to_string(order) +
                        " exceeds the order cap " + std::to_string(kMaxOrder));
  if (dim == 0) throw InvalidArgument("tensor dimension must be positive");
  if (dim > kMaxDim)
    throw CapacityError("tensor dimension " + std::to_string(dim) +
                        " exceeds the dimension cap " + std::to_string(kMaxDim));
}

inline double factorial(std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 2; i <= k; ++i) r *= static_cast<double>(i);
  return r;
}

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  return factorial(n) / (factorial(k) * factorial(n - k));
}

}  // namespace detail

/// Builds an IndexTuple from 0-based indices; unused slots are zero.
inline IndexTuple make_tuple(std::span<const std::size_t> idx) {
  if (idx.size() > kMaxOrder)
    throw CapacityError("index tuple longer than the order cap");
  IndexTuple t{};
  for (std::size_t k = 0; k < idx.size(); ++k) t[k] = static_cast<Index>(idx[k]);
  return t;
}

inline IndexTuple make_tuple(std::initializer_list<std::size_t> idx) {
  return make_tuple(std::span<const std::size_t>(idx.begin(), idx.size()));
}

/// Sorted copy of the first `order` slots: the multiset representative.
inline IndexTuple canonical(IndexTuple t, std::size_t order) {
  std::sort(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(order));
  return t;
}

/// Multiplicities a_j of a sorted tuple, in order of appearance.
inline std::vector<std::size_t> multiplicities(const IndexTuple& sorted, std::size_t order) {
  std::vector<std::size_t> mult;
  for (std::size_t k = 0; k < order; ++k) {
    if (k > 0 && sorted[k] == sorted[k - 1])
      ++mult.back();
    else
      mult.push_back(1);
  }
  return mult;
}

/// Number of distinct arrangements d!/(prod_j a_j!) of a sorted tuple.
inline double arrangement_count(const IndexTuple& sorted, std::size_t order) {
  double denom = 1.0;
  for (auto a : multiplicities(sorted, order)) denom *= detail::factorial(a);
  return detail::factorial(order) / denom;
}

/// Calls fn(tuple) for each distinct arrangement of a sorted tuple.
template <class Fn>
void for_each_arrangement(const IndexTuple& sorted, std::size_t order, Fn&& fn) {
  IndexTuple t = sorted;
  auto first = t.begin();
  auto last = t.begin() + static_cast<std::ptrdiff_t>(order);
  do {
    fn(static_cast<const IndexTuple&>(t));
  } while (std::next_permutation(first, last));
}

inline std::string tuple_to_string(const IndexTuple& t, std::size_t order, std::size_t base = 0) {
  std::ostringstream os;
  os << '(';
  for (std::size_t k = 0; k < order; ++k) {
    if (k) os << ',';
    os << (t[k] + base);
  }
  os << ')';
  return os.str();
}

/// Element of the d-fold tensor product of R^n.
class Tensor {
 public:
  using Storage = std::map<IndexTuple, double>;

  Tensor() : Tensor(0, 1) {}
  Tensor(std::size_t order, std::size_t dim) : order_(order), dim_(dim) {
    detail::check_shape(order, dim);
  }

  static Tensor scalar(double value, std::size_t dim) {
    Tensor t(0, dim);
    t.set(IndexTuple{}, value);
    return t;
  }

  /// e_{i_1} (x) ... (x) e_{i_d}, 0-based.
  static Tensor basis_product(std::size_t dim, std::initializer_list<std::size_t> idx) {
    Tensor t(idx.size(), dim);
    t.set(make_tuple(idx), 1.0);
    return t;
  }

  std::size_t order() const noexcept { return order_; }
  std::size_t dim() const noexcept { return dim_; }
  const Storage& entries() const noexcept { return coeff_; }
  bool empty() const noexcept { return coeff_.empty(); }

  double at(const IndexTuple& t) const {
    auto it = coeff_.find(t);
    return it == coeff_.end() ? 0.0 : it->second;
  }
  double at(std::initializer_list<std::size_t> idx) const { return at(make_tuple(idx)); }

  void set(const IndexTuple& t, double v) {
    check_entry(t, v);
    if (v == 0.0)
      coeff_.erase(t);
    else
      coeff_[t] = v;
  }

  void add(const IndexTuple& t, double v) {
    if (v == 0.0) return;
    check_entry(t, v);
    auto [it, inserted] = coeff_.try_emplace(t, v);
    if (!inserted) {
      it->second += v;
      if (it->second == 0.0) coeff_.erase(it);
    }
  }

  Tensor& operator*=(double s) {
    if (s == 0.0) {
      coeff_.clear();
      return *this;
    }
    for (auto& [k, v] : coeff_) v *= s;
    return *this;
  }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(o);
    for (const auto& [k, v] : o.coeff_) add(k, v);
    return *this;
  }

  Tensor& operator-=(const Tensor& o) {
    require_same_shape(o);
    for (const auto& [k, v] : o.coeff_) add(k, -v);
    return *this;
  }

  friend Tensor operator*(double s, Tensor t) { return t *= s; }
  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }

  void require_same_shape(const Tensor& o) const {
    if (o.order_ != order_ || o.dim_ != dim_)
      throw InvalidArgument("tensor shape mismatch: (order " + std::to_string(order_) + ", dim " +
                            std::to_string(dim_) + ") vs (order " + std::to_string(o.order_) +
                            ", dim " + std::to_string(o.dim_) + ")");
  }

 private:
  void check_entry(const IndexTuple& t, double v) const {
    if (!std::isfinite(v)) throw InvalidArgument("tensor coefficients must be finite");
    for (std::size_t k = 0; k < order_; ++k)
      if (t[k] >= dim_)
        throw InvalidArgument("index " + std::to_string(t[k]) + " out of range for dimension " +
                              std::to_string(dim_));
    for (std::size_t k = order_; k < kMaxOrder; ++k)
      if (t[k] != 0) throw InvalidArgument("index tuple longer than tensor order");
  }

  std::size_t order_;
  std::size_t dim_;
  Storage coeff_;
};

/// Element of the d-fold symmetric tensor product. Only sorted tuples are
/// stored, so permutation invariance holds by construction.
class SymmetricKernel {
 public:
  using Storage = std::map<IndexTuple, double>;

  SymmetricKernel() : SymmetricKernel(0, 1) {}
  SymmetricKernel(std::size_t order, std::size_t dim) : order_(order), dim_(dim) {
    detail::check_shape(order, dim);
  }

  /// Symmetrization of e_{i_1} (x) ... (x) e_{i_d}.
  static SymmetricKernel monomial(std::size_t dim, std::initializer_list<std::size_t> idx) {
    SymmetricKernel f(idx.size(), dim);
    auto key = canonical(make_tuple(idx), idx.size());
    f.set(key, 1.0 / arrangement_count(key, idx.size()));
    return f;
  }

  std::size_t order() const noexcept { return order_; }
  std::size_t dim() const noexcept { return dim_; }
  const Storage& entries() const noexcept { return coeff_; }
  bool empty() const noexcept { return coeff_.empty(); }

  /// Coefficient f(i_1..i_d) for any ordering of the tuple.
  double value(const IndexTuple& t) const {
    auto it = coeff_.find(canonical(t, order_));
    return it == coeff_.end() ? 0.0 : it->second;
  }
  double value(std::initializer_list<std::size_t> idx) const { return value(make_tuple(idx)); }

  /// Sets the coefficient of every arrangement of `t` to `v`.
  void set(const IndexTuple& t, double v) {
    auto key = canonical(t, order_);
    check_entry(key, v);
    if (v == 0.0)
      coeff_.erase(key);
    else
      coeff_[key] = v;
  }

  void add(const IndexTuple& t, double v) {
    if (v == 0.0) return;
    auto key = canonical(t, order_);
    check_entry(key, v);
    auto [it, inserted] = coeff_.try_emplace(key, v);
    if (!inserted) {
      it->second += v;
      if (it->second == 0.0) coeff_.erase(it);
    }
  }

  /// Dense-semantics view: one entry per arrangement.
  Tensor to_tensor() const {
    Tensor t(order_, dim_);
    for (const auto& [key, v] : coeff_)
      for_each_arrangement(key, order_, [&](const IndexTuple& a) { t.set(a, v); });
    return t;
  }

  SymmetricKernel& operator*=(double s) {
    if (s == 0.0) {
      coeff_.clear();
      return *this;
    }
    for (auto& [k, v] : coeff_) v *= s;
    return *this;
  }

  SymmetricKernel& operator+=(const SymmetricKernel& o) {
    require_same_shape(o);
    for (const auto& [k, v] : o.coeff_) add(k, v);
    return *this;
  }

  SymmetricKernel& operator-=(const SymmetricKernel& o) {
    require_same_shape(o);
    for (const auto& [k, v] : o.coeff_) add(k, -v);
    return *this;
  }

  friend SymmetricKernel operator*(double s, SymmetricKernel f) { return f *= s; }
  friend SymmetricKernel operator+(SymmetricKernel a, const SymmetricKernel& b) { return a += b; }
  friend SymmetricKernel operator-(SymmetricKernel a, const SymmetricKernel& b) { return a -= b; }

  void require_same_shape(const SymmetricKernel& o) const {
    if (o.order_ != order_ || o.dim_ != dim_)
      throw InvalidArgument("kernel shape mismatch: (order " + std::to_string(order_) + ", dim " +
                            std::to_string(dim_) + ") vs (order " + std::to_string(o.order_) +
                            ", dim " + std::to_string(o.dim_) + ")");
  }

 private:
  void check_entry(const IndexTuple& key, double v) const {
    if (!std::isfinite(v)) throw InvalidArgument("kernel coefficients must be finite");
    for (std::size_t k = 0; k < order_; ++k)
      if (key[k] >= dim_)
        throw InvalidArgument("index " + std::to_string(key[k]) + " out of range for dimension " +
                              std::to_string(dim_));
    for (std::size_t k = order_; k < kMaxOrder; ++k)
      if (key[k] != 0) throw InvalidArgument("index tuple longer than kernel order");
  }

  std::size_t order_;
  std::size_t dim_;
  Storage coeff_;
};

/// (t)_s(i) = (1/d!) sum over permutations of t(i_sigma). Each stored entry of
/// t contributes to its multiset; the multiset coefficient is the average
/// over its d!/prod a_j! distinct arrangements.
inline SymmetricKernel symmetrize(const Tensor& t) {
  SymmetricKernel f(t.order(), t.dim());
  std::map<IndexTuple, double> sums;
  for (const auto& [key, v] : t.entries()) sums[canonical(key, t.order())] += v;
  for (const auto& [key, s] : sums) f.set(key, s / arrangement_count(key, t.order()));
  return f;
}

inline SymmetricKernel symmetrize(const SymmetricKernel& f) { return f; }

inline double inner(const Tensor& s, const Tensor& t) {
  s.require_same_shape(t);
  const Tensor& small = s.entries().size() <= t.entries().size() ? s : t;
  const Tensor& large = &small == &s ? t : s;
  double acc = 0.0;
  for (const auto& [key, v] : small.entries()) acc += v * large.at(key);
  return acc;
}

inline double inner(const SymmetricKernel& f, const SymmetricKernel& g) {
  f.require_same_shape(g);
  double acc = 0.0;
  for (const auto& [key, v] : f.entries()) {
    auto it = g.entries().find(key);
    if (it != g.entries().end()) acc += arrangement_count(key, f.order()) * v * it->second;
  }
  return acc;
}

inline double inner(const SymmetricKernel& f, const Tensor& t) {
  if (f.order() != t.order() || f.dim() != t.dim()) throw InvalidArgument("tensor shape mismatch");
  double acc = 0.0;
  for (const auto& [key, v] : t.entries()) acc += v * f.value(key);
  return acc;
}

inline double inner(const Tensor& t, const SymmetricKernel& f) { return inner(f, t); }

inline double norm_sq(const Tensor& t) {
  double acc = 0.0;
  for (const auto& [key, v] : t.entries()) acc += v * v;
  return acc;
}

inline double norm_sq(const SymmetricKernel& f) { return inner(f, f); }

inline double norm(const Tensor& t) { return std::sqrt(norm_sq(t)); }
inline double norm(const SymmetricKernel& f) { return std::sqrt(norm_sq(f)); }

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  a.require_same_shape(b);
  double m = 0.0;
  for (const auto& [key, v] : a.entries()) m = std::max(m, std::abs(v - b.at(key)));
  for (const auto& [key, v] : b.entries()) m = std::max(m, std::abs(v - a.at(key)));
  return m;
}

inline double max_abs_diff(const SymmetricKernel& a, const SymmetricKernel& b) {
  a.require_same_shape(b);
  double m = 0.0;
  for (const auto& [key, v] : a.entries()) m = std::max(m, std::abs(v - b.value(key)));
  for (const auto& [key, v] : b.entries()) m = std::max(m, std::abs(v - a.value(key)));
  return m;
}

inline Tensor tensor_product(const Tensor& a, const Tensor& b) {
  if (a.dim() != b.dim()) throw InvalidArgument("tensor product of different dimensions");
  Tensor out(a.order() + b.order(), a.dim());
  for (const auto& [ka, va] : a.entries())
    for (const auto& [kb, vb] : b.entries()) {
      IndexTuple k{};
      std::copy_n(ka.begin(), a.order(), k.begin());
      std::copy_n(kb.begin(), b.order(), k.begin() + static_cast<std::ptrdiff_t>(a.order()));
      out.add(k, va * vb);
    }
  return out;
}

/// Contracts the last p slots of `a` against the last p slots of `b`:
/// (a (x)_p b)(j, k) = sum_i a(j, i) b(k, i).
/// The result has order (a.order - p) + (b.order - p).
inline Tensor contract(const Tensor& a, const Tensor& b, std::size_t p) {
  if (a.dim() != b.dim()) throw InvalidArgument("contraction of tensors of different dimensions");
  if (p > a.order() || p > b.order())
    throw InvalidArgument("contraction order " + std::to_string(p) + " exceeds tensor order");
  const std::size_t fa = a.order() - p;
  const std::size_t fb = b.order() - p;
  if (fa + fb > kMaxOrder)
    throw CapacityError("contraction result order " + std::to_string(fa + fb) +
                        " exceeds the order cap " + std::to_string(kMaxOrder));

  auto split = [p](const Tensor& t, std::size_t free) {
    std::map<IndexTuple, std::vector<std::pair<IndexTuple, double>>> by_tail;
    for (const auto& [key, v] : t.entries()) {
      IndexTuple head{}, tail{};
      std::copy_n(key.begin(), free, head.begin());
      std::copy_n(key.begin() + static_cast<std::ptrdiff_t>(free), p, tail.begin());
      by_tail[tail].emplace_back(head, v);
    }
    return by_tail;
  };

  const auto left = split(a, fa);
  const auto right = &a == &b ? left : split(b, fb);

  Tensor out(fa + fb, a.dim());
  for (const auto& [tail, heads_a] : left) {
    auto it = right.find(tail);
    if (it == right.end()) continue;
    for (const auto& [ha, va] : heads_a)
      for (const auto& [hb, vb] : it->second) {
        IndexTuple k{};
        std::copy_n(ha.begin(), fa, k.begin());
        std::copy_n(hb.begin(), fb, k.begin() + static_cast<std::ptrdiff_t>(fa));
        out.add(k, va * vb);
      }
  }
  return out;
}

/// f (x)_p g for symmetric kernels of equal order d; p = 0 is the tensor
/// product and p = d the scalar <f, g>.
inline Tensor contract(const SymmetricKernel& f, const SymmetricKernel& g, std::size_t p) {
  f.require_same_shape(g);
  if (p > f.order())
    throw InvalidArgument("contraction order " + std::to_string(p) + " exceeds kernel order " +
                          std::to_string(f.order()));
  if (p == f.order()) return Tensor::scalar(inner(f, g), f.dim());
  const Tensor tf = f.to_tensor();
  if (&f == &g) return contract(tf, tf, p);
  return contract(tf, g.to_tensor(), p);
}

}  // namespace chaoslab

#endif  // CHAOSLAB_TENSOR_HPP
