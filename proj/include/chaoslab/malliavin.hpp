#ifndef CHAOSLAB_MALLIAVIN_HPP
#define CHAOSLAB_MALLIAVIN_HPP

// Malliavin derivative, predictable projection, Skorohod integral and the
// Clark-Ocone reconstruction for finite chaos expansions.
//
// Adaptedness uses the strict (predictable) convention: component i of an
// adapted field may only depend on coordinates with time stamp < tau_i.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chaoslab/chaos.hpp"
#include "chaoslab/filtered_space.hpp"
#include "chaoslab/tensor.hpp"

namespace chaoslab {

/// H-valued random element: component i is a chaos expansion u_i.
class VectorField {
 public:
  explicit VectorField(std::size_t dim = 1) : components_(dim, ChaosFunctional(dim)) {}

  explicit VectorField(std::vector<ChaosFunctional> components)
      : components_(std::move(components)) {
    detail::require(!components_.empty(), "vector field needs at least one component");
    for (const auto& c : components_)
      detail::require(c.dim() == components_.size(),
                      "vector field components must share the field dimension");
  }

  /// Deterministic field h.
  static VectorField deterministic(std::span<const double> h) {
    VectorField v(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) v.components_[i].set_constant(h[i]);
    return v;
  }

  std::size_t dim() const noexcept { return components_.size(); }
  const ChaosFunctional& operator[](std::size_t i) const { return components_.at(i); }
  ChaosFunctional& operator[](std::size_t i) { return components_.at(i); }
  const std::vector<ChaosFunctional>& components() const noexcept { return components_; }

 private:
  std::vector<ChaosFunctional> components_;
};

/// Order d-1 slice g(rest) = f(i, rest).
inline SymmetricKernel slice(const SymmetricKernel& f, std::size_t i) {
  detail::require(f.order() >= 1, "cannot slice an order-0 kernel");
  SymmetricKernel g(f.order() - 1, f.dim());
  for (const auto& [key, v] : f.entries()) {
    auto first = key.begin();
    auto last = key.begin() + static_cast<std::ptrdiff_t>(f.order());
    auto pos = std::find(first, last, static_cast<Index>(i));
    if (pos == last) continue;
    IndexTuple rest{};
    std::size_t k = 0;
    for (auto it = first; it != last; ++it)
      if (it != pos) rest[k++] = *it;
    g.set(rest, v);
  }
  return g;
}

/// D_i F = sum_q q I_{q-1}(f_q(i, .)).
inline ChaosFunctional partial_derivative(const ChaosFunctional& F, std::size_t i) {
  ChaosFunctional out(F.dim());
  for (const auto& [q, f] : F.kernels())
    out.add(static_cast<double>(q) * slice(f, i));
  return out;
}

inline VectorField derivative(const ChaosFunctional& F) {
  std::vector<ChaosFunctional> comps;
  comps.reserve(F.dim());
  for (std::size_t i = 0; i < F.dim(); ++i) comps.push_back(partial_derivative(F, i));
  return VectorField(std::move(comps));
}

/// D I_d(f): component i is d I_{d-1}(f(i, .)); order 0 gives the zero field.
inline VectorField derivative(const SymmetricKernel& f) {
  if (f.order() == 0) return VectorField(f.dim());
  return derivative(ChaosFunctional::integral(f));
}

/// Component i is replaced by E[u_i | coordinates with time < tau_i].
inline VectorField adapted_projection(const VectorField& v, const FilteredBasis& basis) {
  detail::check_dim(v.dim(), basis);
  std::vector<ChaosFunctional> comps;
  comps.reserve(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) {
    const double ti = basis.time(i);
    ChaosFunctional u(v.dim(), v[i].constant());
    for (const auto& [q, f] : v[i].kernels()) {
      SymmetricKernel kept(q, f.dim());
      for (const auto& [key, c] : f.entries()) {
        bool strictly_earlier = true;
        for (std::size_t k = 0; k < q; ++k)
          if (!(basis.time(key[k]) < ti)) {
            strictly_earlier = false;
            break;
          }
        if (strictly_earlier) kept.set(key, c);
      }
      u.add(kept);
    }
    comps.push_back(std::move(u));
  }
  return VectorField(std::move(comps));
}

/// delta(V)(Z) = sum_i u_i(Z) Z_i - sum_i (D_i u_i)(Z).
/// The second sum is the Wick correction; it vanishes for adapted fields.
inline double skorohod(const VectorField& v, std::span<const double> z) {
  if (z.size() != v.dim())
    throw InvalidArgument("sample dim " + std::to_string(z.size()) + " does not match field dim " +
                          std::to_string(v.dim()));
  double forward = 0.0, correction = 0.0;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    forward += eval_chaos(v[i], z) * z[i];
    if (!v[i].kernels().empty()) correction += eval_chaos(partial_derivative(v[i], i), z);
  }
  return forward - correction;
}

inline double skorohod(const VectorField& v, const GaussianSample& z) {
  return skorohod(v, std::span<const double>(z.z));
}

/// A field with its Wick-correction terms D_i u_i precomputed, for repeated
/// evaluation inside Monte-Carlo loops.
class CompiledField {
 public:
  explicit CompiledField(VectorField v) : field_(std::move(v)) {
    for (std::size_t i = 0; i < field_.dim(); ++i) {
      const auto& u = field_[i];
      if (u.constant() != 0.0 || !u.kernels().empty()) active_.push_back(i);
      if (!u.kernels().empty()) {
        auto du = partial_derivative(u, i);
        if (du.constant() != 0.0 || !du.kernels().empty()) corrections_.push_back(std::move(du));
      }
    }
  }

  const VectorField& field() const noexcept { return field_; }

  double skorohod(std::span<const double> z) const {
    double acc = 0.0;
    for (std::size_t i : active_) acc += eval_chaos(field_[i], z) * z[i];
    for (const auto& c : corrections_) acc -= eval_chaos(c, z);
    return acc;
  }

  double norm_sq(std::span<const double> z) const {
    double acc = 0.0;
    for (std::size_t i : active_) {
      const double u = eval_chaos(field_[i], z);
      acc += u * u;
    }
    return acc;
  }

 private:
  VectorField field_;
  std::vector<std::size_t> active_;
  std::vector<ChaosFunctional> corrections_;
};

/// Coefficients on tuples with two indices sharing a time stamp (in
/// particular repeated indices). In a discrete filtration these tuples are
/// not predictable, so they cannot be reconstructed by an adapted integrand.
inline std::optional<IndexTuple> first_time_diagonal_entry(const SymmetricKernel& f,
                                                           const FilteredBasis& basis) {
  for (const auto& [key, v] : f.entries())
    for (std::size_t a = 0; a < f.order(); ++a)
      for (std::size_t b = a + 1; b < f.order(); ++b)
        if (basis.time(key[a]) == basis.time(key[b])) return key;
  return std::nullopt;
}

/// I_d(f)(Z) - delta(proj{D I_d(f) | adapted})(Z); zero up to rounding.
inline double clark_ocone_residual(const SymmetricKernel& f, const FilteredBasis& basis,
                                   std::span<const double> z) {
  detail::check_dim(f.dim(), basis);
  if (auto bad = first_time_diagonal_entry(f, basis))
    throw InvalidArgument(
        "kernel has a nonzero coefficient on " + tuple_to_string(*bad, f.order(), 1) +
        ", whose indices share a time stamp; exact discrete Clark-Ocone reconstruction needs "
        "kernels that vanish on such diagonals (they carry no mass in continuous time)");
  const double mean = f.order() == 0 ? f.value(IndexTuple{}) : 0.0;
  return eval_integral(f, z) - mean - skorohod(adapted_projection(derivative(f), basis), z);
}

inline double clark_ocone_residual(const SymmetricKernel& f, const FilteredBasis& basis,
                                   const GaussianSample& z) {
  return clark_ocone_residual(f, basis, std::span<const double>(z.z));
}

/// sum_i u_i(Z)^2, the pointwise squared H-norm.
inline double projection_norm_sq(const VectorField& v, std::span<const double> z) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    const double u = eval_chaos(v[i], z);
    acc += u * u;
  }
  return acc;
}

/// Same, restricted to directions with tau_i <= cutoff.
inline double projection_norm_sq(const VectorField& v, const FilteredBasis& basis,
                                  std::span<const double> z, double cutoff) {
  detail::check_dim(v.dim(), basis);
  double acc = 0.0;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    if (!basis.is_early(i, cutoff)) continue;
    const double u = eval_chaos(v[i], z);
    acc += u * u;
  }
  return acc;
}

/// Phi (pi_{t2} - pi_{t1}) h for a scalar functional Phi.
inline VectorField elementary_field(const ChaosFunctional& phi, const FilteredBasis& basis,
                                    double t1, double t2, std::span<const double> h) {
  detail::check_dim(h.size(), basis);
  detail::require(phi.dim() == basis.dim(), "functional dim does not match the basis");
  VectorField v(basis.dim());
  for (std::size_t i = 0; i < basis.dim(); ++i)
    if (basis.time(i) > t1 && basis.time(i) <= t2 && h[i] != 0.0) v[i] = h[i] * phi;
  return v;
}

}  // namespace chaoslab

#endif  // CHAOSLAB_MALLIAVIN_HPP
