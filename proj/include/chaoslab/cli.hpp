#ifndef CHAOSLAB_CLI_HPP
#define CHAOSLAB_CLI_HPP

// Subcommand drivers behind the chaoslab executable. Each command fills an
// ExperimentReport; the exit status is 0 iff every recorded check passed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "chaoslab/chaos.hpp"
#include "chaoslab/error.hpp"
#include "chaoslab/filtered_space.hpp"
#include "chaoslab/kernel_file.hpp"
#include "chaoslab/limit_lab.hpp"
#include "chaoslab/malliavin.hpp"
#include "chaoslab/parallel.hpp"
#include "chaoslab/random.hpp"
#include "chaoslab/report.hpp"
#include "chaoslab/statistics.hpp"
#include "chaoslab/suites.hpp"
#include "chaoslab/transport.hpp"

namespace chaoslab {

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"selftest", "clt",       "stable",     "sqeq",
                                              "dds",      "transport-verify", "clark-ocone"};
  return names;
}

struct RunConfig {
  std::string command;
  std::optional<std::string> kernel;
  std::optional<std::string> kind;
  std::vector<std::size_t> n_list;
  std::optional<double> t;
  std::optional<std::size_t> samples;
  std::uint64_t seed = 42;
  std::optional<double> tol;
  std::string out = "-";
  ReportFormat format = ReportFormat::Json;
  /// Adds wall-clock time to the report (breaks byte-identical reruns).
  bool timing = false;
  /// 0 means lane_count().
  unsigned lanes = 0;
};

/// "8,32,128" -> {8, 32, 128}.
inline std::vector<std::size_t> parse_n_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
      throw InvalidArgument("--n expects a comma-separated list of positive integers, got \"" +
                            text + "\"");
    out.push_back(static_cast<std::size_t>(std::stoull(item)));
    pos = comma + 1;
  }
  return out;
}

namespace detail {

inline SequenceKind parse_kind(const std::string& k) {
  if (k == "mixture") return SequenceKind::Mixture;
  if (k == "central") return SequenceKind::Central;
  if (k == "custom") return SequenceKind::Custom;
  throw InvalidArgument("unknown --kind \"" + k + "\" (expected mixture, central or custom)");
}

inline double z_score(const CfCell& c) {
  if (c.std_error > 0.0) return c.residual / c.std_error;
  return c.residual == 0.0 ? 0.0 : HUGE_VAL;
}

inline double z_score(double value, double se) {
  if (se > 0.0) return std::abs(value) / se;
  return value == 0.0 ? 0.0 : HUGE_VAL;
}

inline bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

inline std::string label(const std::string& metric, std::size_t n) {
  return metric + " (n=" + std::to_string(n) + ")";
}

inline KernelFile load_kernel(const RunConfig& cfg) {
  if (!cfg.kernel) throw InvalidArgument(cfg.command + ": --kernel PATH is required here");
  return parse_kernel_file(*cfg.kernel);
}

inline double tol_or(const RunConfig& cfg, double fallback) { return cfg.tol.value_or(fallback); }

// ---------------------------------------------------------------------------

inline void run_selftest(const RunConfig& cfg, ExperimentReport& rep) {
  for (const auto& s : chaoslab::run_selftest(cfg.seed)) {
    rep.add(s.instances, s.name + "/max_residual", s.max_residual);
    rep.check(s.name, s.max_residual, std::max(s.bound, cfg.tol ? *cfg.tol : 0.0));
  }
  // known values
  const auto e11 = SymmetricKernel::monomial(2, {0, 0});
  const auto e12 = SymmetricKernel::monomial(2, {0, 1});
  rep.check("fourth_moment(e1 e1) = 60", std::abs(fourth_moment(e11) - 60.0), 1e-12);
  rep.check("fourth_moment((e1 e2)_s) = 9", std::abs(fourth_moment(e12) - 9.0), 1e-12);
  const auto kat = Philox4x32::encrypt({0, 0, 0, 0}, {0, 0});
  rep.require("philox known answer", kat == Philox4x32::Counter{0x6627e8d5u, 0xe169c58du,
                                                                 0xbc57ac4cu, 0x9b00dbd8u});
}

inline void run_clt(const RunConfig& cfg, ExperimentReport& rep, unsigned lanes) {
  const std::size_t samples = cfg.samples.value_or(0);
  const double tol = tol_or(cfg, 1e-9);
  std::vector<std::pair<std::size_t, SymmetricKernel>> cases;
  const std::string kind = cfg.kind.value_or(cfg.kernel ? "custom" : "central");
  if (kind == "custom") {
    const auto file = load_kernel(cfg);
    for (const auto& f : file.kernels)
      if (f.order() >= 1) cases.emplace_back(f.order(), f);
  } else {
    const auto sk = parse_kind(kind);
    const auto ns = cfg.n_list.empty() ? std::vector<std::size_t>{16, 64, 256} : cfg.n_list;
    for (std::size_t n : ns) cases.emplace_back(n, generate_sequence({sk, n, 0.0}).f);
  }

  std::vector<double> xs, contractions, excess;
  for (const auto& [n, f] : cases) {
    const auto c = check_clt_conditions(f);
    rep.add(n, "variance", c.variance);
    for (std::size_t r = 1; r <= c.contraction_norms.size(); ++r)
      rep.add(n, "contraction_norm_sq_r" + std::to_string(r),
              c.contraction_norms[r - 1] * c.contraction_norms[r - 1]);
    rep.add(n, "fourth_moment", c.fourth_moment.value_or(0.0));
    rep.add(n, "fourth_moment_excess", c.fourth_moment_excess.value_or(0.0));
    if (samples > 0) {
      // Standardize by the exact variance so the comparison is with N(0,1).
      auto draws = sample_integral(f, samples, cfg.seed, n, lanes);
      const double sd = std::sqrt(c.variance);
      if (sd > 0)
        for (auto& x : draws) x /= sd;
      rep.add(n, "ks_statistic", ks_statistic_normal(std::move(draws)));
    }
    if (kind == "central") {
      rep.check(label("|variance - 1|", n), std::abs(c.variance - 1.0), tol);
      xs.push_back(static_cast<double>(n));
      contractions.push_back(c.contraction_norms.empty() ? 0.0
                                                         : c.contraction_norms[0] * c.contraction_norms[0]);
      excess.push_back(c.fourth_moment_excess.value_or(0.0));
    }
  }
  if (kind == "central" && xs.size() >= 2) {
    rep.require("contraction norm decreasing in n", strictly_decreasing(contractions));
    rep.require("fourth moment excess decreasing in n", strictly_decreasing(excess));
    rep.summary["contraction_decay_exponent"] = number(fitted_decay_exponent(xs, contractions));
    rep.summary["excess_decay_exponent"] = number(fitted_decay_exponent(xs, excess));
  }
}

inline void add_stable_rows(ExperimentReport& rep, std::size_t n, const StableTestRow& row) {
  auto worst = [](const std::vector<CfCell>& cells) {
    double w = 0.0;
    for (const auto& c : cells) w = std::max(w, z_score(c));
    return w;
  };
  rep.add(n, "sup_joint_residual", row.sup_joint);
  rep.add(n, "max_joint_z", worst(row.joint));
  rep.add(n, "sup_conditional_residual", row.sup_conditional);
  rep.add(n, "max_conditional_z", worst(row.conditional));
  rep.add(n, "sup_limit_residual", row.sup_limit);
  rep.add(n, "max_limit_z", worst(row.limit));
}

inline void run_stable(const RunConfig& cfg, ExperimentReport& rep, unsigned lanes) {
  const double tol = tol_or(cfg, 1e-9);
  StableTestConfig sc;
  sc.samples = cfg.samples.value_or(100000);
  sc.seed = cfg.seed;
  sc.lanes = lanes;
  const std::string kind = cfg.kind.value_or(cfg.kernel ? "custom" : "mixture");

  if (kind == "custom") {
    const auto file = load_kernel(cfg);
    const auto t = cfg.t ? cfg.t : file.t;
    if (!t) throw InvalidArgument("stable: custom kernels need t (file field \"t\" or --t)");
    if (!file.y) throw InvalidArgument("stable: custom kernels need a mixing variance Y in the file");
    for (const auto& f : file.kernels) {
      if (f.order() == 0) continue;
      const auto c = check_stable_conditions(f, file.basis, *t, file.y->y());
      const std::size_t n = f.order();
      rep.add(n, "neg_norm", *c.neg_norm);
      rep.add(n, "norm_distance", *c.norm_distance);
      for (std::size_t r = 1; r <= c.ascv_norms.size(); ++r)
        rep.add(n, "ascv_norm_r" + std::to_string(r), c.ascv_norms[r - 1]);
      SequenceInstance inst;
      inst.kind = SequenceKind::Custom;
      inst.n = n;
      inst.f = f;
      inst.basis = file.basis;
      inst.t = *t;
      inst.y = *file.y;
      inst.reference = static_cast<std::size_t>(
          std::min_element(file.basis.times().begin(), file.basis.times().end()) -
          file.basis.times().begin());
      add_stable_rows(rep, n, stable_test(inst, sc));
    }
    return;
  }

  const auto sk = parse_kind(kind);
  const auto ns = cfg.n_list.empty() ? std::vector<std::size_t>{8, 32, 128} : cfg.n_list;
  std::vector<double> ascv;
  for (std::size_t n : ns) {
    auto inst = generate_sequence({sk, n, 0.0});
    if (cfg.t) inst.t = *cfg.t;
    const auto c = check_stable_conditions(inst.f, inst.basis, inst.t, inst.y.y());
    rep.add(n, "neg_norm", *c.neg_norm);
    rep.add(n, "norm_distance", *c.norm_distance);
    rep.add(n, "ascv_norm_r1", c.ascv_norms.at(0));
    const auto row = stable_test(inst, sc);
    add_stable_rows(rep, n, row);
    ascv.push_back(c.ascv_norms.at(0));

    rep.check(label("NEG norm", n), *c.neg_norm, tol);
    rep.check(label("NORM distance", n), *c.norm_distance, tol);
    if (sk == SequenceKind::Mixture) {
      // Exact for every n: F_n given Z_0 is N(0, Z_0^2).
      rep.check(label("asCV norm", n), c.ascv_norms.at(0), tol);
      double zc = 0.0, zj = 0.0, zl = 0.0;
      for (const auto& cell : row.conditional) zc = std::max(zc, z_score(cell));
      for (const auto& cell : row.joint) zj = std::max(zj, z_score(cell));
      for (const auto& cell : row.limit) zl = std::max(zl, z_score(cell));
      rep.check(label("conditional CF residual / stderr", n), zc, 4.0);
      rep.check(label("joint CF residual / stderr", n), zj, 4.0);
      rep.check(label("limit CF residual / stderr", n), zl, 4.0);
    }
  }
  if (sk == SequenceKind::Central && ascv.size() >= 2)
    rep.require("asCV norm decreasing in n", strictly_decreasing(ascv));
}

inline void run_sqeq(const RunConfig& cfg, ExperimentReport& rep) {
  const std::size_t count = cfg.samples.value_or(200);
  const double tol = tol_or(cfg, 1e-10);
  double worst = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = detail::suite_rng(cfg.seed, 8, i);
    const auto in = random_sqeq_instance(rng);
    const auto r = sqeq_check(in);
    rep.add(i, "lhs", r.lhs);
    rep.add(i, "rhs", r.rhs);
    rep.add(i, "residual", r.residual);
    worst = std::max(worst, r.residual);
  }
  rep.check("max sqeq residual", worst, tol);
}

inline void run_dds(const RunConfig& cfg, ExperimentReport& rep, unsigned lanes) {
  const std::size_t n = cfg.n_list.empty() ? 16 : cfg.n_list.front();
  DdsConfig dc = default_dds_config(n);
  dc.samples = cfg.samples.value_or(100000);
  dc.seed = cfg.seed;
  dc.lanes = lanes;
  if (cfg.t) dc.t1 = *cfg.t;
  const auto res = dds_experiment(dc);
  for (const auto& p : res.points) {
    char tag[32];
    std::snprintf(tag, sizeof tag, "@%.4g", p.t);
    rep.add(n, std::string("mean_square") + tag, p.mean_square);
    rep.add(n, std::string("mean_norm_sq") + tag, p.mean_norm_sq);
    rep.add(n, std::string("gap") + tag, p.gap, p.gap_std_error);
    rep.check(std::string("|E M_t^2 - E|pi_t u|^2| / stderr ") + tag,
              z_score(p.gap, p.gap_std_error), 4.0);
  }
  for (const auto& [j, corr] : res.early_correlations) {
    rep.add(n, "early_correlation_e" + std::to_string(j + 1), corr, res.correlation_std_error);
    rep.check("increment vs e" + std::to_string(j + 1) + " correlation / stderr",
              z_score(corr, res.correlation_std_error), 4.0);
  }
  rep.summary["t1"] = dc.t1;
  rep.summary["t2"] = dc.t2;
  rep.summary["increment_norm_sq"] = number(res.increment_norm_sq);
  rep.summary["ks_statistic"] = number(res.ks_statistic);
  rep.summary["ks_sample_size"] = res.ks_sample_size;
}

inline void run_transport(const RunConfig& cfg, ExperimentReport& rep) {
  const double tol = tol_or(cfg, 1e-9);
  TransportResiduals worst;
  auto record = [&](std::size_t n, const TransportResiduals& r) {
    rep.add(n, "orthogonality", r.orthogonality);
    rep.add(n, "intertwining", r.intertwining);
    rep.add(n, "integral", r.integral);
    rep.add(n, "norm", r.norm);
    rep.add(n, "conditional", r.conditional);
    rep.add(n, "filtration", r.filtration);
    worst.orthogonality = std::max(worst.orthogonality, r.orthogonality);
    worst.intertwining = std::max(worst.intertwining, r.intertwining);
    worst.integral = std::max(worst.integral, r.integral);
    worst.norm = std::max(worst.norm, r.norm);
    worst.conditional = std::max(worst.conditional, r.conditional);
    worst.filtration = std::max(worst.filtration, r.filtration);
  };

  if (cfg.kernel) {
    const auto file = load_kernel(cfg);
    const std::size_t n = file.basis.dim();
    const FilteredSpace space(file.basis, random_orthogonal(n, cfg.seed, derive_stream(0x7B, 0)));
    const UnitaryMap map = build_transport(space, space.generators());
    std::vector<double> times = file.basis.breakpoints();
    if (cfg.t) times.push_back(*cfg.t);
    for (std::size_t k = 0; k < file.kernels.size(); ++k) {
      const auto z = sample(n, cfg.seed, derive_stream(0x7C, 2 * k));
      const auto w = sample(n, cfg.seed, derive_stream(0x7C, 2 * k + 1));
      record(file.kernels[k].order(), verify_transport(space, map, file.kernels[k], times, z.z, w.z));
    }
  } else {
    const std::size_t count = cfg.samples.value_or(100);
    for (std::size_t i = 0; i < count; ++i) {
      auto rng = detail::suite_rng(cfg.seed, 9, i);
      const std::size_t n = 1 + rng.below(8), d = 1 + rng.below(3);
      const FilteredBasis basis = random_grid_basis(rng, n);
      const FilteredSpace space(basis, random_orthogonal(n, cfg.seed, derive_stream(0x7A, i)));
      const UnitaryMap map = build_transport(space, space.generators());
      const SymmetricKernel f = random_kernel(rng, d, n);
      std::vector<double> times = basis.breakpoints();
      times.push_back(0.1);
      times.push_back(0.6);
      const auto z = sample(n, cfg.seed, derive_stream((kSuiteTag << 8) + 109, 2 * i));
      const auto w = sample(n, cfg.seed, derive_stream((kSuiteTag << 8) + 109, 2 * i + 1));
      record(i, verify_transport(space, map, f, times, z.z, w.z));
    }
  }
  rep.check("orthogonality", worst.orthogonality, tol);
  rep.check("intertwining", worst.intertwining, tol);
  rep.check("integral identity", worst.integral, tol);
  rep.check("contraction norm identity", worst.norm, tol);
  rep.check("conditional expectation identity", worst.conditional, tol);
  rep.check("filtration sensitivity", worst.filtration, tol);
}

inline void run_clark_ocone(const RunConfig& cfg, ExperimentReport& rep) {
  const double tol = tol_or(cfg, 1e-9);
  double worst = 0.0;
  if (cfg.kernel) {
    const auto file = load_kernel(cfg);
    const std::size_t draws = cfg.samples.value_or(100);
    for (std::size_t k = 0; k < file.kernels.size(); ++k) {
      double m = 0.0;
      for (std::size_t s = 0; s < draws; ++s) {
        const auto z = sample(file.basis.dim(), cfg.seed, derive_stream(0xC0 + k, s));
        m = std::max(m, std::abs(clark_ocone_residual(file.kernels[k], file.basis, z)));
      }
      rep.add(file.kernels[k].order(), "max_residual", m);
      worst = std::max(worst, m);
    }
  } else {
    const std::size_t count = cfg.samples.value_or(100);
    for (std::size_t i = 0; i < count; ++i) {
      const auto s = clark_ocone_suite(cfg.seed ^ (std::uint64_t{i} << 32), 1);
      rep.add(i, "residual", s.max_residual);
      worst = std::max(worst, s.max_residual);
    }
  }
  rep.check("max clark-ocone residual", worst, tol);
}

}  // namespace detail

/// Runs one subcommand, writes its report and returns the exit status.
inline int run_command(const RunConfig& cfg, std::ostream& out) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), cfg.command) == names.end())
    throw InvalidArgument("unknown subcommand \"" + cfg.command + "\"");
  const unsigned lanes = cfg.lanes ? cfg.lanes : lane_count();
  const auto start = std::chrono::steady_clock::now();

  ExperimentReport rep;
  rep.command = cfg.command;
  rep.seed = cfg.seed;
  auto& p = rep.parameters;
  p["kernel"] = cfg.kernel ? nlohmann::ordered_json(*cfg.kernel) : nlohmann::ordered_json(nullptr);
  p["kind"] = cfg.kind ? nlohmann::ordered_json(*cfg.kind) : nlohmann::ordered_json(nullptr);
  p["n"] = cfg.n_list;
  p["t"] = cfg.t ? nlohmann::ordered_json(*cfg.t) : nlohmann::ordered_json(nullptr);
  p["samples"] = cfg.samples ? nlohmann::ordered_json(*cfg.samples) : nlohmann::ordered_json(nullptr);
  p["seed"] = cfg.seed;
  p["tol"] = cfg.tol ? nlohmann::ordered_json(*cfg.tol) : nlohmann::ordered_json(nullptr);
  p["format"] = cfg.format == ReportFormat::Json ? "json" : "csv";

  if (cfg.command == "selftest")
    detail::run_selftest(cfg, rep);
  else if (cfg.command == "clt")
    detail::run_clt(cfg, rep, lanes);
  else if (cfg.command == "stable")
    detail::run_stable(cfg, rep, lanes);
  else if (cfg.command == "sqeq")
    detail::run_sqeq(cfg, rep);
  else if (cfg.command == "dds")
    detail::run_dds(cfg, rep, lanes);
  else if (cfg.command == "transport-verify")
    detail::run_transport(cfg, rep);
  else
    detail::run_clark_ocone(cfg, rep);

  if (cfg.timing)
    rep.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  emit_report(rep, cfg.format, cfg.out, out);
  return rep.passed() ? 0 : 1;
}

}  // namespace chaoslab

#endif  // CHAOSLAB_CLI_HPP
