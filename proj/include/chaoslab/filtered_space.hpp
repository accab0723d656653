#ifndef CHAOSLAB_FILTERED_SPACE_HPP
#define CHAOSLAB_FILTERED_SPACE_HPP

// Finite filtered Hilbert space. A resolution of the identity on R^n is
// represented diagonally: direction i carries a time stamp tau_i in (0,1] and
// pi_t e_i = 1{tau_i <= t} e_i. Then pi_0 = 0, pi_1 = Id and t -> pi_t is
// non-decreasing.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "chaoslab/error.hpp"
#include "chaoslab/tensor.hpp"

namespace chaoslab {

class FilteredBasis {
 public:
  FilteredBasis() = default;

  FilteredBasis(std::vector<double> times, std::vector<int> channels)
      : times_(std::move(times)), channels_(std::move(channels)) {
    if (times_.empty()) throw InvalidArgument("filtered basis needs at least one direction");
    if (channels_.empty()) channels_.assign(times_.size(), 1);
    if (channels_.size() != times_.size())
      throw InvalidArgument("filtered basis: times and channels differ in length");
    if (times_.size() > kMaxDim)
      throw CapacityError("filtered basis dimension exceeds the dimension cap");
    for (std::size_t i = 0; i < times_.size(); ++i)
      if (!(times_[i] > 0.0 && times_[i] <= 1.0))
        throw InvalidArgument("direction " + std::to_string(i) + ": time must lie in (0,1]");
  }

  explicit FilteredBasis(std::vector<double> times) : FilteredBasis(std::move(times), {}) {}

  std::size_t dim() const noexcept { return times_.size(); }
  double time(std::size_t i) const { return times_.at(i); }
  int channel(std::size_t i) const { return channels_.at(i); }
  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<int>& channels() const noexcept { return channels_; }

  /// pi_t e_i = e_i iff tau_i <= t.
  bool is_early(std::size_t i, double t) const { return times_[i] <= t; }

  /// Sorted distinct time stamps; pi_t only changes at these values.
  std::vector<double> breakpoints() const {
    std::vector<double> b = times_;
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
  }

 private:
  std::vector<double> times_;
  std::vector<int> channels_;
};

enum class ProjectionMode { KeepEarly, KeepRest };

namespace detail {

inline bool all_early(const FilteredBasis& b, const IndexTuple& t, std::size_t first,
                      std::size_t count, double s) {
  for (std::size_t k = first; k < first + count; ++k)
    if (!b.is_early(t[k], s)) return false;
  return true;
}

inline void check_dim(std::size_t dim, const FilteredBasis& b) {
  if (dim != b.dim())
    throw InvalidArgument("dimension mismatch: tensor dim " + std::to_string(dim) +
                          " vs basis dim " + std::to_string(b.dim()));
}

}  // namespace detail

/// KeepEarly applies pi_s^{(x)m}; KeepRest applies pi_1^{(x)m} - pi_s^{(x)m}.
inline Tensor project_tensor(const Tensor& t, const FilteredBasis& basis, double s,
                             ProjectionMode mode) {
  detail::check_dim(t.dim(), basis);
  Tensor out(t.order(), t.dim());
  for (const auto& [key, v] : t.entries()) {
    bool early = detail::all_early(basis, key, 0, t.order(), s);
    if (early == (mode == ProjectionMode::KeepEarly)) out.set(key, v);
  }
  return out;
}

inline SymmetricKernel project_tensor(const SymmetricKernel& f, const FilteredBasis& basis,
                                      double s, ProjectionMode mode) {
  detail::check_dim(f.dim(), basis);
  SymmetricKernel out(f.order(), f.dim());
  for (const auto& [key, v] : f.entries()) {
    bool early = detail::all_early(basis, key, 0, f.order(), s);
    if (early == (mode == ProjectionMode::KeepEarly)) out.set(key, v);
  }
  return out;
}

/// f (x)_p^{pi,s} f: the order-p self-contraction restricted to contracted
/// tuples that are not entirely early, i.e. contracted against
/// (pi_1^{(x)p} - pi_s^{(x)p}).
inline Tensor generalized_contraction(const SymmetricKernel& f, const FilteredBasis& basis,
                                      std::size_t p, double s) {
  detail::check_dim(f.dim(), basis);
  if (p > f.order())
    throw InvalidArgument("contraction order " + std::to_string(p) + " exceeds kernel order");
  const std::size_t free = f.order() - p;
  if (2 * free > kMaxOrder)
    throw CapacityError("generalized contraction result order exceeds the order cap");

  std::map<IndexTuple, std::vector<std::pair<IndexTuple, double>>> by_tail;
  for (const auto& [key, v] : f.entries()) {
    for_each_arrangement(key, f.order(), [&](const IndexTuple& a) {
      if (detail::all_early(basis, a, free, p, s)) return;
      IndexTuple head{}, tail{};
      std::copy_n(a.begin(), free, head.begin());
      std::copy_n(a.begin() + static_cast<std::ptrdiff_t>(free), p, tail.begin());
      by_tail[tail].emplace_back(head, v);
    });
  }

  Tensor out(2 * free, f.dim());
  for (const auto& [tail, heads] : by_tail)
    for (const auto& [ha, va] : heads)
      for (const auto& [hb, vb] : heads) {
        IndexTuple k{};
        std::copy_n(ha.begin(), free, k.begin());
        std::copy_n(hb.begin(), free, k.begin() + static_cast<std::ptrdiff_t>(free));
        out.add(k, va * vb);
      }
  return out;
}

/// Fully orthogonal reproducing family for a diagonal resolution.
struct Generators {
  std::vector<std::vector<double>> vectors;
  std::size_t rank = 0;
};

/// Groups directions by time stamp. Generator j takes the j-th direction of
/// every group that has one, each with weight 1/sqrt(n), so supports are
/// disjoint, times are distinct within a support and sum_j |g_j|^2 = 1.
///
/// For a diagonal resolution the rank is the largest number of directions
/// sharing one time stamp: the increment (pi_t - pi_{t-}) has rank equal to
/// that multiplicity, and each generator contributes at most one dimension
/// to every increment, so no smaller family can reproduce the space.
inline Generators fully_orthogonalize(const FilteredBasis& basis) {
  const std::size_t n = basis.dim();
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[basis.time(i)].push_back(i);

  Generators out;
  for (const auto& [t, members] : groups) out.rank = std::max(out.rank, members.size());
  const double w = 1.0 / std::sqrt(static_cast<double>(n));
  out.vectors.assign(out.rank, std::vector<double>(n, 0.0));
  for (const auto& [t, members] : groups)
    for (std::size_t j = 0; j < members.size(); ++j) out.vectors[j][members[j]] = w;
  return out;
}

/// Step function phi(t) = sum_j |pi_t g_j|^2 and its right-continuous
/// generalized inverse psi(u) = inf{a : phi(a) >= u}.
class TimeChangeMap {
 public:
  TimeChangeMap() = default;
  TimeChangeMap(std::vector<double> breakpoints, std::vector<double> values)
      : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {}

  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double phi(double t) const {
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    if (it == breakpoints_.begin()) return 0.0;
    return values_[static_cast<std::size_t>(it - breakpoints_.begin()) - 1];
  }

  double psi(double u) const {
    if (u <= 0.0) return 0.0;
    for (std::size_t k = 0; k < values_.size(); ++k)
      if (values_[k] >= u) return breakpoints_[k];
    return 1.0;
  }

 private:
  std::vector<double> breakpoints_;
  std::vector<double> values_;
};

/// Reparametrizes time by phi. This is the discrete stand-in for the
/// absolutely continuous reparametrization: the re-stamped resolution
/// satisfies sum_j |pi~_t g_j|^2 = t at every jump value t of phi.
inline std::pair<TimeChangeMap, FilteredBasis> time_change(const FilteredBasis& basis,
                                                           const Generators& gens) {
  const std::size_t n = basis.dim();
  double total = 0.0;
  std::vector<double> weight(n, 0.0);
  for (const auto& g : gens.vectors) {
    if (g.size() != n) throw InvalidArgument("generator dimension does not match the basis");
    for (std::size_t i = 0; i < n; ++i) weight[i] += g[i] * g[i];
  }
  for (double w : weight) total += w;
  if (std::abs(total - 1.0) > 1e-12)
    throw InvalidArgument("generators are not normalized: sum of squared norms is " +
                          std::to_string(total));

  auto bps = basis.breakpoints();
  std::vector<double> values(bps.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto k = static_cast<std::size_t>(std::lower_bound(bps.begin(), bps.end(), basis.time(i)) -
                                      bps.begin());
    values[k] += weight[i];
  }
  for (std::size_t k = 1; k < values.size(); ++k) values[k] += values[k - 1];
  // The last partial sum is 1 up to rounding; pin it so pi~_1 = Id exactly.
  values.back() = 1.0;

  TimeChangeMap map(bps, values);
  std::vector<double> restamped(n);
  for (std::size_t i = 0; i < n; ++i) {
    restamped[i] = map.phi(basis.time(i));
    if (!(restamped[i] > 0.0))
      throw InvalidArgument("generators do not charge the earliest directions; time change "
                            "would map direction " + std::to_string(i) + " to time 0");
  }
  return {map, FilteredBasis(restamped, basis.channels())};
}

}  // namespace chaoslab

#endif  // CHAOSLAB_FILTERED_SPACE_HPP
