#ifndef CHAOSLAB_TRANSPORT_HPP
#define CHAOSLAB_TRANSPORT_HPP

// Unitary equivalence between an abstract filtered space (R^n, pi) and the
// concrete diagonal model built from a fully orthogonal reproducing family.
//
// The abstract resolution is pi_t = U D_t U^T, where U is an orthogonal frame
// and D_t the diagonal resolution of a FilteredBasis. With U = I it is the
// diagonal model itself.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chaoslab/chaos.hpp"
#include "chaoslab/filtered_space.hpp"
#include "chaoslab/malliavin.hpp"
#include "chaoslab/random.hpp"
#include "chaoslab/tensor.hpp"

namespace chaoslab {

class FilteredSpace {
 public:
  explicit FilteredSpace(FilteredBasis basis)
      : FilteredSpace(basis, Eigen::MatrixXd::Identity(basis.dim(), basis.dim())) {}

  FilteredSpace(FilteredBasis basis, Eigen::MatrixXd frame)
      : basis_(std::move(basis)), frame_(std::move(frame)) {
    const auto n = static_cast<Eigen::Index>(basis_.dim());
    if (frame_.rows() != n || frame_.cols() != n)
      throw InvalidArgument("frame must be a square matrix matching the basis dimension");
    const double err =
        (frame_.transpose() * frame_ - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
    if (err > 1e-12) throw InvalidArgument("frame is not orthogonal");
  }

  std::size_t dim() const noexcept { return basis_.dim(); }
  const FilteredBasis& basis() const noexcept { return basis_; }
  const Eigen::MatrixXd& frame() const noexcept { return frame_; }
  std::vector<double> breakpoints() const { return basis_.breakpoints(); }

  /// pi_t as an n x n matrix.
  Eigen::MatrixXd projector(double t) const {
    const auto n = static_cast<Eigen::Index>(dim());
    Eigen::VectorXd diag(n);
    for (Eigen::Index i = 0; i < n; ++i)
      diag[i] = basis_.is_early(static_cast<std::size_t>(i), t) ? 1.0 : 0.0;
    return frame_ * diag.asDiagonal() * frame_.transpose();
  }

  /// Fully orthogonal reproducing family in ambient coordinates.
  std::vector<std::vector<double>> generators() const {
    const auto diag = fully_orthogonalize(basis_);
    std::vector<std::vector<double>> out;
    for (const auto& g : diag.vectors) {
      Eigen::VectorXd v = frame_ * Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
      out.emplace_back(v.data(), v.data() + v.size());
    }
    return out;
  }

 private:
  FilteredBasis basis_;
  Eigen::MatrixXd frame_;
};

/// Columns of q are the images of the concrete basis directions.
struct UnitaryMap {
  Eigen::MatrixXd q;
  FilteredBasis concrete;
  std::vector<double> breakpoints;
};

enum class PushDirection { Forward, Inverse };

/// Applies m to slots [first, first + count) of t.
inline Tensor apply_matrix(const Tensor& t, const Eigen::MatrixXd& m, std::size_t first,
                           std::size_t count) {
  detail::require(static_cast<std::size_t>(m.rows()) == t.dim() &&
                      static_cast<std::size_t>(m.cols()) == t.dim(),
                  "matrix does not match tensor dimension");
  detail::require(first + count <= t.order(), "slot range exceeds tensor order");
  Tensor cur = t;
  for (std::size_t slot = first; slot < first + count; ++slot) {
    Tensor next(t.order(), t.dim());
    for (const auto& [key, v] : cur.entries()) {
      const auto col = static_cast<Eigen::Index>(key[slot]);
      IndexTuple k = key;
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double a = m(r, col);
        if (a == 0.0) continue;
        k[slot] = static_cast<Index>(r);
        next.add(k, a * v);
      }
    }
    cur = std::move(next);
  }
  return cur;
}

inline Tensor apply_matrix(const Tensor& t, const Eigen::MatrixXd& m) {
  return apply_matrix(t, m, 0, t.order());
}

inline Tensor pushforward_kernel(const UnitaryMap& map, const Tensor& f, PushDirection dir) {
  detail::require(static_cast<std::size_t>(map.q.rows()) == f.dim(),
                  "tensor dim does not match the transport");
  return dir == PushDirection::Forward ? apply_matrix(f, map.q)
                                       : apply_matrix(f, Eigen::MatrixXd(map.q.transpose()));
}

inline SymmetricKernel pushforward_kernel(const UnitaryMap& map, const SymmetricKernel& f,
                                          PushDirection dir) {
  return symmetrize(pushforward_kernel(map, f.to_tensor(), dir));
}

/// Concrete model with one channel per generator and one direction per
/// nonzero pi-increment of that generator. Cells whose increment vanishes
/// carry no mass and are dropped.
inline UnitaryMap build_transport(const FilteredSpace& space,
                                  const std::vector<std::vector<double>>& generators) {
  const std::size_t n = space.dim();
  const auto bps = space.breakpoints();
  std::vector<Eigen::MatrixXd> proj;
  proj.reserve(bps.size());
  for (double t : bps) proj.push_back(space.projector(t));

  std::vector<Eigen::VectorXd> gens;
  for (const auto& g : generators) {
    detail::require(g.size() == n, "generator dimension does not match the space");
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
    if (v.norm() == 0.0) throw InvalidArgument("degenerate generator: zero vector");
    gens.push_back(std::move(v));
  }
  for (std::size_t a = 0; a < gens.size(); ++a)
    for (std::size_t b = a + 1; b < gens.size(); ++b)
      for (const auto& ps : proj)
        for (const auto& pt : proj)
          if (std::abs((ps * gens[a]).dot(pt * gens[b])) > 1e-10)
            throw InvalidArgument("generators are not fully orthogonal");

  std::vector<Eigen::VectorXd> cols;
  std::vector<double> times;
  std::vector<int> channels;
  for (std::size_t j = 0; j < gens.size(); ++j) {
    Eigen::VectorXd prev = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < bps.size(); ++k) {
      Eigen::VectorXd cur = proj[k] * gens[j];
      Eigen::VectorXd inc = cur - prev;
      prev = std::move(cur);
      const double len = inc.norm();
      if (len <= 1e-12) continue;
      cols.push_back(inc / len);
      times.push_back(bps[k]);
      channels.push_back(static_cast<int>(j) + 1);
    }
  }
  if (cols.size() != n)
    throw InvalidArgument("generators are not reproducing: " + std::to_string(cols.size()) +
                          " increments for dimension " + std::to_string(n));

  UnitaryMap map{Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)),
                 FilteredBasis(times, channels), bps};
  for (std::size_t c = 0; c < n; ++c) map.q.col(static_cast<Eigen::Index>(c)) = cols[c];
  return map;
}

inline double orthogonality_residual(const UnitaryMap& map) {
  const auto n = map.q.rows();
  return (map.q.transpose() * map.q - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
}

/// max |pi_t Q - Q pi#_t| at time t.
inline double intertwining_residual(const FilteredSpace& space, const UnitaryMap& map, double t) {
  const auto n = static_cast<Eigen::Index>(space.dim());
  Eigen::VectorXd diag(n);
  for (Eigen::Index i = 0; i < n; ++i)
    diag[i] = map.concrete.is_early(static_cast<std::size_t>(i), t) ? 1.0 : 0.0;
  const Eigen::MatrixXd lhs = space.projector(t) * map.q;
  const Eigen::MatrixXd rhs = map.q * diag.asDiagonal();
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

/// Generalized contraction for a non-diagonal resolution, computed directly
/// from the projector matrix: f (x)_p f - f (x)_p (P^{(x)p} on the last p slots of f).
inline Tensor generalized_contraction(const SymmetricKernel& f, const FilteredSpace& space,
                                      std::size_t p, double t) {
  detail::require(f.dim() == space.dim(), "kernel dim does not match the space");
  const Tensor tf = f.to_tensor();
  const std::size_t free = f.order() - p;
  const Tensor early = apply_matrix(tf, space.projector(t), free, p);
  return contract(tf, tf, p) - contract(tf, early, p);
}

/// (pi_1^{(x)m} - pi_t^{(x)m}) t for a non-diagonal resolution.
inline Tensor keep_rest(const Tensor& x, const FilteredSpace& space, double t) {
  return x - apply_matrix(x, space.projector(t));
}

struct TransportResiduals {
  double orthogonality = 0.0;
  double intertwining = 0.0;
  double integral = 0.0;
  double norm = 0.0;
  double conditional = 0.0;
  double filtration = 0.0;

  double max() const {
    return std::max({orthogonality, intertwining, integral, norm, conditional, filtration});
  }
};

/// Checks the abstract/concrete identities for one kernel and sample:
///  - intertwining of pi_t and pi#_t at every breakpoint;
///  - I_d^X(f)(Z) = I_d^{X_T}((T^d)^{-1} f)(Q^T Z);
///  - norm of the late part of every generalized contraction agrees;
///  - E[I_d(f) | F_t] agrees, and is insensitive to late perturbations.
/// `w` is an arbitrary perturbation direction.
inline TransportResiduals verify_transport(const FilteredSpace& space, const UnitaryMap& map,
                                           const SymmetricKernel& f,
                                           std::span<const double> times,
                                           std::span<const double> z, std::span<const double> w) {
  const std::size_t n = space.dim();
  detail::require(f.dim() == n && z.size() == n && w.size() == n,
                  "transport verification: dimension mismatch");
  TransportResiduals res;
  res.orthogonality = orthogonality_residual(map);
  for (double t : map.breakpoints)
    res.intertwining = std::max(res.intertwining, intertwining_residual(space, map, t));

  const SymmetricKernel fc = pushforward_kernel(map, f, PushDirection::Inverse);
  const Eigen::Map<const Eigen::VectorXd> zv(z.data(), static_cast<Eigen::Index>(n));
  const Eigen::VectorXd zc = map.q.transpose() * zv;
  const std::span<const double> zcs(zc.data(), n);
  res.integral = std::abs(eval_integral(f, z) - eval_integral(fc, zcs));

  const std::size_t d = f.order();
  for (double t : times) {
    for (std::size_t r = 1; r <= d && 2 * r <= kMaxOrder; ++r) {
      const double abstract_norm = norm(keep_rest(generalized_contraction(f, space, d - r, t),
                                                  space, t));
      const double concrete_norm = norm(project_tensor(
          generalized_contraction(fc, map.concrete, d - r, t), map.concrete, t,
          ProjectionMode::KeepRest));
      res.norm = std::max(res.norm, std::abs(abstract_norm - concrete_norm));
    }

    const Eigen::MatrixXd pt = space.projector(t);
    const SymmetricKernel abstract_early = symmetrize(apply_matrix(f.to_tensor(), pt));
    const SymmetricKernel concrete_early =
        project_tensor(fc, map.concrete, t, ProjectionMode::KeepEarly);
    const double at_z = eval_integral(concrete_early, zcs);
    res.conditional = std::max(res.conditional, std::abs(eval_integral(abstract_early, z) - at_z));

    const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(n));
    const Eigen::VectorXd zp =
        map.q.transpose() * (zv + (Eigen::MatrixXd::Identity(n, n) - pt) * wv);
    res.filtration = std::max(
        res.filtration,
        std::abs(eval_integral(concrete_early, std::span<const double>(zp.data(), n)) - at_z));
  }
  return res;
}

/// |<T V, pi_t h>(Z) - <T V, pi_t h>(Z + (I - pi_t) w)| for a field V on the
/// concrete model; zero whenever V is adapted there.
inline double transported_pairing_sensitivity(const FilteredSpace& space, const UnitaryMap& map,
                                              const VectorField& v, std::span<const double> h,
                                              double t, std::span<const double> z,
                                              std::span<const double> w) {
  const auto n = static_cast<Eigen::Index>(space.dim());
  const Eigen::MatrixXd pt = space.projector(t);
  const Eigen::VectorXd pth = pt * Eigen::Map<const Eigen::VectorXd>(h.data(), n);
  auto pairing = [&](const Eigen::VectorXd& zamb) {
    const Eigen::VectorXd zc = map.q.transpose() * zamb;
    Eigen::VectorXd u(n);
    for (Eigen::Index i = 0; i < n; ++i)
      u[i] = eval_chaos(v[static_cast<std::size_t>(i)],
                        std::span<const double>(zc.data(), static_cast<std::size_t>(n)));
    return (map.q * u).dot(pth);
  };
  const Eigen::VectorXd z0 = Eigen::Map<const Eigen::VectorXd>(z.data(), n);
  const Eigen::VectorXd z1 =
      z0 + (Eigen::MatrixXd::Identity(n, n) - pt) * Eigen::Map<const Eigen::VectorXd>(w.data(), n);
  return std::abs(pairing(z0) - pairing(z1));
}

/// Orthogonal matrix from the QR factorization of a Gaussian matrix drawn
/// from (seed, stream); column signs fixed so R has a positive diagonal.
inline Eigen::MatrixXd random_orthogonal(std::size_t n, std::uint64_t seed, std::uint64_t stream) {
  const auto g = sample(n * n, seed, stream);
  Eigen::MatrixXd a = Eigen::Map<const Eigen::MatrixXd>(g.z.data(), static_cast<Eigen::Index>(n),
                                                        static_cast<Eigen::Index>(n));
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

}  // namespace chaoslab

#endif  // CHAOSLAB_TRANSPORT_HPP
