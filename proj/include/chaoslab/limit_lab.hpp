#ifndef CHAOSLAB_LIMIT_LAB_HPP
#define CHAOSLAB_LIMIT_LAB_HPP

// Condition checkers for central and stable limit theorems on a fixed Wiener
// chaos, kernel-sequence generators, and Monte-Carlo experiments.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chaoslab/chaos.hpp"
#include "chaoslab/error.hpp"
#include "chaoslab/filtered_space.hpp"
#include "chaoslab/malliavin.hpp"
#include "chaoslab/parallel.hpp"
#include "chaoslab/random.hpp"
#include "chaoslab/statistics.hpp"
#include "chaoslab/tensor.hpp"

namespace chaoslab {

// ---------------------------------------------------------------------------
// Mixing variances

/// Random variance Y >= 0 of a Gaussian mixture with conditional
/// characteristic function exp(-lambda^2 Y / 2). Only constructions that are
/// nonnegative by form are certified: nonnegative constants and sums of
/// squares X(h)^2 = |h|^2 + I_2(h (x) h).
class MixtureLaw {
 public:
  static MixtureLaw constant(double c, std::size_t dim) {
    if (!(c >= 0.0)) throw InvalidArgument("mixture variance constant must be nonnegative");
    return MixtureLaw(ChaosFunctional(dim, c), true);
  }

  static MixtureLaw square_of(std::span<const double> h) {
    detail::require(!h.empty(), "square_of needs a nonempty vector");
    const std::size_t n = h.size();
    double nsq = 0.0;
    SymmetricKernel k(2, n);
    for (std::size_t i = 0; i < n; ++i) {
      nsq += h[i] * h[i];
      for (std::size_t j = i; j < n; ++j)
        if (h[i] * h[j] != 0.0) k.set(make_tuple({i, j}), h[i] * h[j]);
    }
    ChaosFunctional y(n, nsq);
    y.add(k);
    return MixtureLaw(std::move(y), true);
  }

  /// Accepted for reporting only; stable_test rejects it.
  static MixtureLaw uncertified(ChaosFunctional y) { return MixtureLaw(std::move(y), false); }

  MixtureLaw& operator+=(const MixtureLaw& o) {
    y_ += o.y_;
    certified_ = certified_ && o.certified_;
    return *this;
  }

  const ChaosFunctional& y() const noexcept { return y_; }
  bool certified() const noexcept { return certified_; }
  std::size_t dim() const noexcept { return y_.dim(); }

  double value(std::span<const double> z) const { return eval_chaos(y_, z); }

 private:
  MixtureLaw(ChaosFunctional y, bool certified) : y_(std::move(y)), certified_(certified) {}

  ChaosFunctional y_;
  bool certified_;
};

// ---------------------------------------------------------------------------
// Condition reports

struct ConditionReport {
  std::size_t order = 0;
  /// d! |f|^2 = E[I_d(f)^2].
  double variance = 0.0;
  /// |f (x)_{d-r} f| for r = 1..d-1.
  std::vector<double> contraction_norms;
  std::optional<double> fourth_moment;
  /// |E[F^4] - 3 E[F^2]^2|.
  std::optional<double> fourth_moment_excess;
  /// |pi_t^{(x)d} f|.
  std::optional<double> neg_norm;
  /// L^2 distance between E[F^2 | F_t] and Y.
  std::optional<double> norm_distance;
  std::map<std::size_t, double> norm_distance_by_order;
  /// |(pi_1^{(x)2r} - pi_t^{(x)2r})(f (x)_{d-r}^{pi,t} f)| for r = 1..d-1.
  std::vector<double> ascv_norms;
};

inline ConditionReport check_clt_conditions(const SymmetricKernel& f) {
  ConditionReport rep;
  rep.order = f.order();
  rep.variance = detail::factorial(f.order()) * norm_sq(f);
  for (std::size_t r = 1; r < f.order(); ++r) rep.contraction_norms.push_back(norm(contract(f, f, f.order() - r)));
  if (f.order() >= 1) {
    rep.fourth_moment = fourth_moment(f);
    rep.fourth_moment_excess = std::abs(*rep.fourth_moment - 3.0 * rep.variance * rep.variance);
  }
  return rep;
}

inline ConditionReport check_stable_conditions(const SymmetricKernel& f, const FilteredBasis& basis,
                                               double t, const ChaosFunctional& y) {
  detail::check_dim(f.dim(), basis);
  detail::require(y.dim() == f.dim(), "mixing variance dimension does not match the kernel");
  const std::size_t d = f.order();
  detail::require(d >= 1, "stable conditions need a kernel of order >= 1");
  if (y.max_order() > 2 * (d - 1))
    throw InvalidArgument("mixing variance has chaos order " + std::to_string(y.max_order()) +
                          " but a limit of E[F^2 | F_t] for order " + std::to_string(d) +
                          " can only live in chaoses of order <= " + std::to_string(2 * (d - 1)));

  ConditionReport rep = check_clt_conditions(f);
  rep.neg_norm = norm(project_tensor(f, basis, t, ProjectionMode::KeepEarly));

  const ChaosFunctional diff = conditional_second_moment(f, basis, t) - y;
  rep.norm_distance = std::sqrt(second_moment(diff));
  rep.norm_distance_by_order[0] = std::abs(diff.constant());
  for (std::size_t q = 2; q <= 2 * d; q += 2)
    rep.norm_distance_by_order[q] = std::sqrt(detail::factorial(q) * norm_sq(diff.kernel(q)));

  for (std::size_t r = 1; r < d; ++r)
    rep.ascv_norms.push_back(norm(project_tensor(generalized_contraction(f, basis, d - r, t), basis,
                                                 t, ProjectionMode::KeepRest)));
  return rep;
}

/// Split of E[F^2 | F_t] into the generalized-contraction part and the part
/// driven by the early projection pi_t^{(x)d} f:
///   conditional = main + early, exactly, where
///   main  = d!|f|^2 + sum_{r<d} c_r I_{2r}(pi_t^{(x)2r}(f (x)_{d-r}^{pi,t} f))
///   early = sum_{r<=d} c_r I_{2r}((pi_t f) (x)_{d-r} (pi_t f)),
///   c_r = (d-r)! C(d,r)^2.
struct DevDecomposition {
  ChaosFunctional conditional;
  ChaosFunctional main;
  ChaosFunctional early;
};

inline DevDecomposition dev_decomposition(const SymmetricKernel& f, const FilteredBasis& basis,
                                          double t) {
  const std::size_t d = f.order();
  DevDecomposition out{conditional_second_moment(f, basis, t),
                       ChaosFunctional(f.dim(), detail::factorial(d) * norm_sq(f)),
                       ChaosFunctional(f.dim())};
  const SymmetricKernel pf = project_tensor(f, basis, t, ProjectionMode::KeepEarly);
  for (std::size_t r = 1; r <= d; ++r) {
    const double c = detail::factorial(d - r) * detail::binomial(d, r) * detail::binomial(d, r);
    if (r < d)
      out.main.add(c * symmetrize(project_tensor(generalized_contraction(f, basis, d - r, t), basis,
                                                 t, ProjectionMode::KeepEarly)));
    out.early.add(c * symmetrize(contract(pf, pf, d - r)));
  }
  return out;
}

/// For d = 2: E[G^4] - 3 E[G^2]^2 with G = I_2(f_late), f_late the part of f
/// with both indices late; equals 48 |f_late (x)_1 f_late|^2.
inline double late_fourth_cumulant(const SymmetricKernel& f, const FilteredBasis& basis, double t) {
  detail::require(f.order() == 2, "late fourth cumulant is defined for order-2 kernels");
  SymmetricKernel late(2, f.dim());
  for (const auto& [key, v] : f.entries())
    if (!basis.is_early(key[0], t) && !basis.is_early(key[1], t)) late.set(key, v);
  const double var = 2.0 * norm_sq(late);
  return fourth_moment(late) - 3.0 * var * var;
}

// ---------------------------------------------------------------------------
// Discrete square-equality identity

/// Discrete instance: points are (channel a, time atom k), indexed a*K + k,
/// each with a positive weight. f is a symmetric function of m + r points,
/// C and D are sets of time-atom tuples of length m and r.
struct SqEqInstance {
  std::size_t channels = 1;
  std::vector<double> times;
  std::vector<double> weights;
  std::size_t m = 1;
  std::size_t r = 1;
  std::vector<std::vector<std::size_t>> c_cells;
  std::vector<std::vector<std::size_t>> d_cells;
  SymmetricKernel f;
};

struct SqEqResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

/// Both sides of the square-equality identity by brute-force summation.
///
/// The identity rests on the time marginal being non-atomic, so that
/// comparisons between maximal times of disjoint blocks never tie. The
/// discrete surrogate requires distinct time atoms and evaluates f as zero
/// on any tuple in which two points share a time atom; with that the split
/// by "alpha-max below / above the max of xi, gamma" is exhaustive.
inline SqEqResult sqeq_check(const SqEqInstance& in) {
  const std::size_t kt = in.times.size();
  detail::require(in.channels >= 1 && kt >= 1, "sqeq: need at least one channel and one time atom");
  detail::require(in.m >= 1 && in.r >= 1, "sqeq: m and r must be >= 1");
  {
    auto sorted = in.times;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw InvalidArgument("sqeq: time atoms must be pairwise distinct (a repeated atom would "
                            "give the time marginal an atom, which the identity excludes)");
  }
  const std::size_t npts = in.channels * kt;
  detail::require(in.weights.size() == npts, "sqeq: need one weight per (channel, time) point");
  for (double w : in.weights) detail::require(w > 0.0, "sqeq: weights must be positive");
  detail::require(in.f.order() == in.m + in.r && in.f.dim() == npts,
                  "sqeq: f must have order m + r over channels * times points");

  struct Block {
    std::vector<std::size_t> points;
    double weight;
    double max_time;
  };
  auto expand = [&](const std::vector<std::vector<std::size_t>>& cells, std::size_t len) {
    std::vector<Block> out;
    for (const auto& cell : cells) {
      detail::require(cell.size() == len, "sqeq: cell of the wrong length");
      for (auto k : cell) detail::require(k < kt, "sqeq: time index out of range");
      std::vector<std::size_t> a(len, 0);
      for (;;) {
        Block b{std::vector<std::size_t>(len), 1.0, 0.0};
        for (std::size_t j = 0; j < len; ++j) {
          b.points[j] = a[j] * kt + cell[j];
          b.weight *= in.weights[b.points[j]];
          b.max_time = std::max(b.max_time, in.times[cell[j]]);
        }
        out.push_back(std::move(b));
        std::size_t j = 0;
        while (j < len && ++a[j] == in.channels) a[j++] = 0;
        if (j == len) break;
      }
    }
    return out;
  };
  const auto xs = expand(in.c_cells, in.m);
  const auto as = expand(in.d_cells, in.r);

  // value[x][a] = f(xi_x, alpha_a), zero on tied time atoms.
  std::vector<std::vector<double>> value(xs.size(), std::vector<double>(as.size(), 0.0));
  for (std::size_t x = 0; x < xs.size(); ++x)
    for (std::size_t a = 0; a < as.size(); ++a) {
      IndexTuple key{};
      std::vector<std::size_t> time_idx;
      std::size_t k = 0;
      for (auto p : xs[x].points) key[k++] = static_cast<Index>(p);
      for (auto p : as[a].points) key[k++] = static_cast<Index>(p);
      for (std::size_t j = 0; j < k; ++j) time_idx.push_back(key[j] % kt);
      std::sort(time_idx.begin(), time_idx.end());
      if (std::adjacent_find(time_idx.begin(), time_idx.end()) != time_idx.end()) continue;
      value[x][a] = in.f.value(key);
    }

  SqEqResult res;
  detail::CompensatedSum lhs, rhs1, rhs2;
  for (std::size_t x = 0; x < xs.size(); ++x)
    for (std::size_t g = 0; g < xs.size(); ++g) {
      const double top = std::max(xs[x].max_time, xs[g].max_time);
      detail::CompensatedSum full, below;
      for (std::size_t a = 0; a < as.size(); ++a) {
        const double term = value[x][a] * value[g][a] * as[a].weight;
        full += term;
        if (as[a].max_time < top) below += term;
      }
      const double w = xs[x].weight * xs[g].weight;
      lhs += w * full.value() * full.value();
      rhs1 += w * below.value() * below.value();
    }
  for (std::size_t a = 0; a < as.size(); ++a)
    for (std::size_t b = 0; b < as.size(); ++b) {
      const double top = std::max(as[a].max_time, as[b].max_time);
      detail::CompensatedSum below;
      for (std::size_t x = 0; x < xs.size(); ++x)
        if (xs[x].max_time < top) below += value[x][a] * value[x][b] * xs[x].weight;
      rhs2 += as[a].weight * as[b].weight * below.value() * below.value();
    }
  res.lhs = lhs.value();
  rhs1 += rhs2.value();
  res.rhs = rhs1.value();
  res.residual = std::abs(res.lhs - res.rhs);
  return res;
}

// ---------------------------------------------------------------------------
// Kernel sequences

enum class SequenceKind { Mixture, Central, Custom };

struct KernelSequenceSpec {
  SequenceKind kind = SequenceKind::Mixture;
  std::size_t n = 8;
  /// Mixture only: weight of a late band (e_k (x) e_{k+1})_s added to f_n.
  double perturbation = 0.0;
};

struct SequenceInstance {
  SequenceKind kind = SequenceKind::Custom;
  std::size_t n = 0;
  SymmetricKernel f;
  FilteredBasis basis;
  double t = 0.0;
  MixtureLaw y = MixtureLaw::constant(0.0, 1);
  /// Coordinate used as the reference variable Z_0 in stable tests.
  std::size_t reference = 0;
  /// Exact E[exp(i gamma Z_0 + i lambda sqrt(Y) N)] when known.
  std::function<std::complex<double>(double lambda, double gamma)> limit_cf;
};

namespace detail {

// e_0 at time 0.1 (channel 0); e_1..e_n at 0.5 + 0.5 k/n (channel 1).
inline FilteredBasis reference_plus_late(std::size_t n) {
  std::vector<double> times(n + 1);
  std::vector<int> channels(n + 1, 1);
  times[0] = 0.1;
  channels[0] = 0;
  for (std::size_t k = 1; k <= n; ++k)
    times[k] = 0.5 + 0.5 * static_cast<double>(k) / static_cast<double>(n);
  return FilteredBasis(times, channels);
}

// (1/sqrt(n-1)) sum_{k=1}^{n-1} (e_k (x) e_{k+1})_s
inline SymmetricKernel late_band(std::size_t n) {
  SymmetricKernel f(2, n + 1);
  const double c = 0.5 / std::sqrt(static_cast<double>(n - 1));
  for (std::size_t k = 1; k < n; ++k) f.set(make_tuple({k, k + 1}), c);
  return f;
}

}  // namespace detail

/// Mixture: f_n = (1/sqrt n) sum_k (e_0 (x) e_k)_s with t_n = 0.5, so that
/// F_n = Z_0 (Z_1 + ... + Z_n)/sqrt(n) and, for every n,
///   pi_t f_n = 0, E[F_n^2 | F_t] = Z_0^2 = Y, and the late part of
///   f_n (x)_1^{pi,t} f_n vanishes (the contraction over late indices only
///   leaves the (0,0) entry 1/4, which is early).
/// Central: f_n = (1/sqrt(n-1)) sum_k (e_k (x) e_{k+1})_s with t = 0, Y = 1;
/// variance 1 and |f_n (x)_1 f_n|^2 = O(1/n).
inline SequenceInstance generate_sequence(const KernelSequenceSpec& spec) {
  if (spec.kind == SequenceKind::Custom)
    throw InvalidArgument("custom sequences are loaded from a kernel file");
  if (spec.n < 2) throw InvalidArgument("sequence size n must be at least 2");
  const std::size_t n = spec.n;
  SequenceInstance out;
  out.kind = spec.kind;
  out.n = n;
  out.basis = detail::reference_plus_late(n);
  out.reference = 0;

  if (spec.kind == SequenceKind::Mixture) {
    SymmetricKernel f(2, n + 1);
    const double c = 0.5 / std::sqrt(static_cast<double>(n));
    for (std::size_t k = 1; k <= n; ++k) f.set(make_tuple({0, k}), c);
    if (spec.perturbation != 0.0) f += spec.perturbation * detail::late_band(n);
    out.f = std::move(f);
    out.t = 0.5;
    std::vector<double> e0(n + 1, 0.0);
    e0[0] = 1.0;
    out.y = MixtureLaw::square_of(e0);
    // E[exp(i g Z - l^2 Z^2 / 2)] = (1 + l^2)^{-1/2} exp(-g^2 / (2 (1 + l^2)))
    out.limit_cf = [](double lambda, double gamma) {
      const double s = 1.0 + lambda * lambda;
      return std::complex<double>(std::exp(-gamma * gamma / (2.0 * s)) / std::sqrt(s), 0.0);
    };
  } else {
    out.f = detail::late_band(n);
    out.t = 0.0;
    out.y = MixtureLaw::constant(1.0, n + 1);
    out.limit_cf = [](double lambda, double gamma) {
      return std::complex<double>(std::exp(-0.5 * (lambda * lambda + gamma * gamma)), 0.0);
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte-Carlo stable-convergence test

inline const std::vector<double>& default_cf_grid() {
  static const std::vector<double> grid{-3, -2, -1, -0.5, 0, 0.5, 1, 2, 3};
  return grid;
}

/// Decile edges of N(0,1); the conditional residual is measured per bin of Z_0.
inline const std::array<double, 9>& reference_bin_edges() {
  static const std::array<double, 9> edges{-1.2815515655446004, -0.8416212335729143,
                                           -0.5244005127080407, -0.2533471031357997,
                                           0.0,
                                           0.2533471031357997,  0.5244005127080407,
                                           0.8416212335729143,  1.2815515655446004};
  return edges;
}

struct StableTestConfig {
  std::vector<double> lambdas = default_cf_grid();
  std::vector<double> gammas = default_cf_grid();
  std::size_t samples = 100000;
  std::uint64_t seed = 42;
  unsigned lanes = 1;
};

/// One grid cell: `second` is gamma for joint/limit cells and the Z_0 bin
/// index for conditional cells.
struct CfCell {
  double lambda = 0.0;
  double second = 0.0;
  double residual = 0.0;
  double std_error = 0.0;

  bool within(double k_sigma) const { return residual <= k_sigma * std_error; }
};

struct StableTestRow {
  std::size_t n = 0;
  std::size_t samples = 0;
  /// |E^[e^{i g Z0} (e^{i l F} - e^{-l^2 Y/2})]|.
  std::vector<CfCell> joint;
  /// Per Z_0 bin: |E^[e^{i l F} - e^{-l^2 Y/2} | bin]|.
  std::vector<CfCell> conditional;
  /// |E^[e^{i g Z0 + i l F}] - exact limit|, when the limit is known.
  std::vector<CfCell> limit;
  double sup_joint = 0.0;
  double sup_conditional = 0.0;
  double sup_limit = 0.0;
};

inline StableTestRow stable_test(const SequenceInstance& inst, const StableTestConfig& cfg) {
  if (!inst.y.certified())
    throw InvalidArgument("stable test needs a certified nonnegative mixing variance");
  detail::require(inst.y.dim() == inst.f.dim(), "mixing variance dimension mismatch");
  detail::require(cfg.samples >= 2, "stable test needs at least two samples");
  const std::size_t nl = cfg.lambdas.size(), ng = cfg.gammas.size();
  const std::size_t nbins = reference_bin_edges().size() + 1;
  const std::size_t dim = inst.f.dim();
  const std::uint64_t tag = inst.n;

  struct Acc {
    std::vector<ComplexMoments> joint, limit, cond;
  };
  auto blocks = run_blocks(cfg.samples, cfg.lanes, [&](std::size_t begin, std::size_t end) {
    Acc acc{std::vector<ComplexMoments>(nl * ng), std::vector<ComplexMoments>(nl * ng),
            std::vector<ComplexMoments>(nl * nbins)};
    const auto& edges = reference_bin_edges();
    for (std::size_t m = begin; m < end; ++m) {
      const auto z = sample(dim, cfg.seed, derive_stream(tag, m));
      const double x = eval_integral(inst.f, z);
      const double y = inst.y.value(z.z);
      const double z0 = z[inst.reference];
      const auto bin = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), z0) -
                                                edges.begin());
      for (std::size_t a = 0; a < nl; ++a) {
        const double l = cfg.lambdas[a];
        const std::complex<double> cf_f = std::polar(1.0, l * x);
        const double cf_y = std::exp(-0.5 * l * l * y);
        const std::complex<double> gap = cf_f - cf_y;
        acc.cond[a * nbins + bin].push(gap);
        for (std::size_t b = 0; b < ng; ++b) {
          const std::complex<double> w = std::polar(1.0, cfg.gammas[b] * z0);
          acc.joint[a * ng + b].push(w * gap);
          acc.limit[a * ng + b].push(w * cf_f);
        }
      }
    }
    return acc;
  });

  Acc total{std::vector<ComplexMoments>(nl * ng), std::vector<ComplexMoments>(nl * ng),
            std::vector<ComplexMoments>(nl * nbins)};
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < total.joint.size(); ++i) total.joint[i] += b.joint[i];
    for (std::size_t i = 0; i < total.limit.size(); ++i) total.limit[i] += b.limit[i];
    for (std::size_t i = 0; i < total.cond.size(); ++i) total.cond[i] += b.cond[i];
  }

  StableTestRow row;
  row.n = inst.n;
  row.samples = cfg.samples;
  for (std::size_t a = 0; a < nl; ++a) {
    for (std::size_t b = 0; b < ng; ++b) {
      const auto& j = total.joint[a * ng + b];
      row.joint.push_back({cfg.lambdas[a], cfg.gammas[b], std::abs(j.mean()), j.std_error()});
      if (inst.limit_cf) {
        const auto& l = total.limit[a * ng + b];
        row.limit.push_back({cfg.lambdas[a], cfg.gammas[b],
                             std::abs(l.mean() - inst.limit_cf(cfg.lambdas[a], cfg.gammas[b])),
                             l.std_error()});
      }
    }
    for (std::size_t bin = 0; bin < nbins; ++bin) {
      const auto& c = total.cond[a * nbins + bin];
      row.conditional.push_back(
          {cfg.lambdas[a], static_cast<double>(bin), std::abs(c.mean()), c.std_error()});
    }
  }
  for (const auto& c : row.joint) row.sup_joint = std::max(row.sup_joint, c.residual);
  for (const auto& c : row.conditional)
    row.sup_conditional = std::max(row.sup_conditional, c.residual);
  for (const auto& c : row.limit) row.sup_limit = std::max(row.sup_limit, c.residual);
  return row;
}

// ---------------------------------------------------------------------------
// Gradient projection check

struct ProjectionGapResult {
  std::size_t samples = 0;
  /// Mean and standard error of |proj DF|^2 - Y.
  double mean_gap = 0.0;
  double gap_std_error = 0.0;
  /// Mean and standard error of |proj DF|^2 - Y in absolute value.
  double mean_abs_gap = 0.0;
  double abs_gap_std_error = 0.0;
  /// Mean and standard error of the part of |proj DF|^2 on directions <= t.
  double mean_early = 0.0;
  double early_std_error = 0.0;
};

/// Monte-Carlo comparison of |proj{DF | adapted}|^2 with Y.
inline ProjectionGapResult projection_gap(const SequenceInstance& inst, std::size_t samples,
                                          std::uint64_t seed, unsigned lanes) {
  const CompiledField proj(adapted_projection(derivative(inst.f), inst.basis));
  std::vector<std::size_t> early;
  for (std::size_t i = 0; i < inst.basis.dim(); ++i)
    if (inst.basis.is_early(i, inst.t)) early.push_back(i);
  const std::uint64_t tag = (std::uint64_t{1} << 20) + inst.n;

  struct Acc {
    Moments gap, abs_gap, early;
  };
  auto blocks = run_blocks(samples, lanes, [&](std::size_t begin, std::size_t end) {
    Acc acc;
    for (std::size_t m = begin; m < end; ++m) {
      const auto z = sample(inst.f.dim(), seed, derive_stream(tag, m));
      const double total = proj.norm_sq(z.z);
      double part = 0.0;
      for (std::size_t i : early) {
        const double u = eval_chaos(proj.field()[i], z.z);
        part += u * u;
      }
      const double gap = total - inst.y.value(z.z);
      acc.gap.push(gap);
      acc.abs_gap.push(std::abs(gap));
      acc.early.push(part);
    }
    return acc;
  });
  Acc total;
  for (const auto& b : blocks) {
    total.gap += b.gap;
    total.abs_gap += b.abs_gap;
    total.early += b.early;
  }
  return {samples,
          total.gap.mean(),
          total.gap.std_error(),
          total.abs_gap.mean(),
          total.abs_gap.std_error(),
          total.early.mean(),
          total.early.std_error()};
}

/// Draws of I_d(f) in sample order; stream tag (1 << 22) + tag.
inline std::vector<double> sample_integral(const SymmetricKernel& f, std::size_t samples,
                                           std::uint64_t seed, std::uint64_t tag, unsigned lanes) {
  const std::uint64_t stream_tag = (std::uint64_t{1} << 22) + tag;
  auto blocks = run_blocks(samples, lanes, [&](std::size_t begin, std::size_t end) {
    std::vector<double> out;
    out.reserve(end - begin);
    for (std::size_t m = begin; m < end; ++m)
      out.push_back(eval_integral(f, sample(f.dim(), seed, derive_stream(stream_tag, m))));
    return out;
  });
  std::vector<double> all;
  all.reserve(samples);
  for (const auto& b : blocks) all.insert(all.end(), b.begin(), b.end());
  return all;
}

// ---------------------------------------------------------------------------
// Time-changed martingale experiment

struct DdsConfig {
  FilteredBasis basis;
  std::vector<double> h;
  double t1 = 0.25;
  double t2 = 0.75;
  std::vector<double> grid;
  /// Coordinate j giving Phi = Z_j (requires tau_j <= t1); Phi = 1 if empty.
  std::optional<std::size_t> phi_coordinate;
  std::size_t samples = 100000;
  std::uint64_t seed = 42;
  unsigned lanes = 1;
};

struct DdsGridPoint {
  double t = 0.0;
  /// Sample means of M_t^2 and |pi_t u|^2.
  double mean_square = 0.0;
  double mean_norm_sq = 0.0;
  /// Mean and standard error of the paired difference M_t^2 - |pi_t u|^2.
  double gap = 0.0;
  double gap_std_error = 0.0;
};

struct DdsResult {
  std::vector<DdsGridPoint> points;
  /// Correlation of M_1 - M_{t1} with each coordinate j having tau_j <= t1.
  std::vector<std::pair<std::size_t, double>> early_correlations;
  /// Null standard error of a sample correlation, 1/sqrt(M).
  double correlation_std_error = 0.0;
  /// KS distance of the variance-normalized increments from N(0,1).
  double ks_statistic = 0.0;
  std::size_t ks_sample_size = 0;
  /// |(pi_{t2} - pi_{t1}) h|^2.
  double increment_norm_sq = 0.0;
  std::size_t samples = 0;
};

inline std::vector<double> default_dds_grid() {
  return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
}

/// Default layout: e_0 at time 0.05 and e_1..e_n at k/n; h = 1/sqrt(n) on
/// e_1..e_n and 0.3 on e_0.
inline DdsConfig default_dds_config(std::size_t n = 16) {
  DdsConfig cfg;
  std::vector<double> times(n + 1);
  times[0] = 0.05;
  for (std::size_t k = 1; k <= n; ++k) times[k] = static_cast<double>(k) / static_cast<double>(n);
  cfg.basis = FilteredBasis(times);
  cfg.h.assign(n + 1, 1.0 / std::sqrt(static_cast<double>(n)));
  cfg.h[0] = 0.3;
  cfg.grid = default_dds_grid();
  cfg.phi_coordinate = 0;
  return cfg;
}

/// Simulates t -> M_t = delta(pi_t u) for u = Phi (pi_{t2} - pi_{t1}) h.
inline DdsResult dds_experiment(const DdsConfig& cfg) {
  if (!(cfg.t1 >= 0.0 && cfg.t1 < cfg.t2 && cfg.t2 <= 1.0))
    throw InvalidArgument("dds: need 0 <= t1 < t2 <= 1");
  const FilteredBasis& basis = cfg.basis;
  const std::size_t n = basis.dim();
  detail::require(cfg.h.size() == n, "dds: h must match the basis dimension");
  detail::require(cfg.samples >= 2, "dds: need at least two samples");

  ChaosFunctional phi(n, 1.0);
  if (cfg.phi_coordinate) {
    const std::size_t j = *cfg.phi_coordinate;
    detail::require(j < n, "dds: Phi coordinate out of range");
    if (basis.time(j) > cfg.t1)
      throw InvalidArgument("dds: Phi must be measurable at t1 (tau_j <= t1)");
    phi = ChaosFunctional::integral(SymmetricKernel::monomial(n, {j}));
  }

  // Times at which M is observed: t1, then grid points, sorted.
  std::vector<double> grid = cfg.grid;
  std::sort(grid.begin(), grid.end());
  std::vector<CompiledField> fields;
  std::vector<double> window_norm;
  auto window = [&](double t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (basis.time(i) > cfg.t1 && basis.time(i) <= std::min(t, cfg.t2)) acc += cfg.h[i] * cfg.h[i];
    return acc;
  };
  for (double t : grid) {
    fields.emplace_back(elementary_field(phi, basis, cfg.t1, std::min(std::max(t, cfg.t1), cfg.t2), cfg.h));
    window_norm.push_back(window(t));
  }
  const CompiledField terminal(elementary_field(phi, basis, cfg.t1, cfg.t2, cfg.h));
  std::vector<std::size_t> early;
  for (std::size_t j = 0; j < n; ++j)
    if (basis.is_early(j, cfg.t1)) early.push_back(j);

  // Observation points for increments: t1 and grid points in (t1, t2].
  std::vector<std::size_t> inc_points;
  for (std::size_t g = 0; g < grid.size(); ++g)
    if (grid[g] > cfg.t1 && grid[g] <= cfg.t2) inc_points.push_back(g);

  struct Acc {
    std::vector<Moments> square, norm, gap;
    std::vector<Covariation> corr;
    std::vector<double> increments;
  };
  auto blocks = run_blocks(cfg.samples, cfg.lanes, [&](std::size_t begin, std::size_t end) {
    Acc acc{std::vector<Moments>(grid.size()), std::vector<Moments>(grid.size()),
            std::vector<Moments>(grid.size()), std::vector<Covariation>(early.size()), {}};
    std::vector<double> path(grid.size());
    for (std::size_t m = begin; m < end; ++m) {
      const auto z = sample(n, cfg.seed, derive_stream(std::uint64_t{1} << 21, m));
      const double phi_v = eval_chaos(phi, z.z);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const double mt = fields[g].skorohod(z.z);
        const double nsq = fields[g].norm_sq(z.z);
        path[g] = mt;
        acc.square[g].push(mt * mt);
        acc.norm[g].push(nsq);
        acc.gap[g].push(mt * mt - nsq);
      }
      const double incr = terminal.skorohod(z.z);
      for (std::size_t e = 0; e < early.size(); ++e) acc.corr[e].push(incr, z[early[e]]);
      if (phi_v != 0.0) {
        double prev_m = 0.0, prev_w = 0.0;
        for (std::size_t g : inc_points) {
          const double dw = window_norm[g] - prev_w;
          if (dw > 0.0) acc.increments.push_back((path[g] - prev_m) / (std::abs(phi_v) * std::sqrt(dw)));
          prev_m = path[g];
          prev_w = window_norm[g];
        }
      }
    }
    return acc;
  });

  Acc total{std::vector<Moments>(grid.size()), std::vector<Moments>(grid.size()),
            std::vector<Moments>(grid.size()), std::vector<Covariation>(early.size()), {}};
  for (const auto& b : blocks) {
    for (std::size_t g = 0; g < grid.size(); ++g) {
      total.square[g] += b.square[g];
      total.norm[g] += b.norm[g];
      total.gap[g] += b.gap[g];
    }
    for (std::size_t e = 0; e < early.size(); ++e) total.corr[e] += b.corr[e];
    total.increments.insert(total.increments.end(), b.increments.begin(), b.increments.end());
  }

  DdsResult res;
  res.samples = cfg.samples;
  res.increment_norm_sq = window(1.0);
  for (std::size_t g = 0; g < grid.size(); ++g)
    res.points.push_back({grid[g], total.square[g].mean(), total.norm[g].mean(),
                          total.gap[g].mean(), total.gap[g].std_error()});
  for (std::size_t e = 0; e < early.size(); ++e)
    res.early_correlations.emplace_back(early[e], total.corr[e].correlation());
  res.correlation_std_error = 1.0 / std::sqrt(static_cast<double>(cfg.samples));
  res.ks_sample_size = total.increments.size();
  if (!total.increments.empty()) res.ks_statistic = ks_statistic_normal(std::move(total.increments));
  return res;
}

}  // namespace chaoslab

#endif  // CHAOSLAB_LIMIT_LAB_HPP
