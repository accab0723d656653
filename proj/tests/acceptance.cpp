// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "chaoslab/chaoslab.hpp"

using namespace chaoslab;

namespace {

constexpr std::uint64_t kSeed = 42;
constexpr std::size_t kSamples = 100000;
// Floor for quantities that vanish identically in exact arithmetic, where the
// Monte-Carlo standard error is itself at rounding level.
constexpr double kRoundoff = 1e-12;

struct Outcome {
  bool ok = true;
  std::string detail;

  void need(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double a, double b = 0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

bool within(double value, double se, double k = 4.0) {
  return std::abs(value) <= k * se + kRoundoff;
}

Outcome suites_ok(const std::vector<SuiteResult>& suites) {
  Outcome o;
  for (const auto& s : suites)
    o.need(s.passed(), s.name + " max residual " + fmt("%.3g", s.max_residual));
  return o;
}

Outcome criterion1() {
  auto o = suites_ok({multiplication_suite(kSeed), early_split_suite(kSeed),
                      special_cases_suite(kSeed), clark_ocone_suite(kSeed),
                      number_operator_suite(kSeed)});
  return o;
}

Outcome criterion2() {
  Outcome o;
  const double a = fourth_moment(SymmetricKernel::monomial(2, {0, 0}));
  const double b = fourth_moment(SymmetricKernel::monomial(2, {0, 1}));
  o.need(std::abs(a - 60.0) <= 1e-12, fmt("E[I2(e1e1)^4] = %.17g", a));
  o.need(std::abs(b - 9.0) <= 1e-12, fmt("E[I2(e1e2)^4] = %.17g", b));
  const auto s = fourth_moment_suite(kSeed);
  o.need(s.passed() && s.instances == 100, "closed form residual " + fmt("%.3g", s.max_residual));
  return o;
}

Outcome criterion3() {
  const auto s = sqeq_suite(kSeed);
  auto o = suites_ok({s});
  o.need(s.instances == 200, "instance count");
  return o;
}

Outcome criterion4() { return suites_ok({transport_suite(kSeed)}); }

Outcome criterion5() {
  Outcome o;
  StableTestConfig cfg;
  cfg.samples = kSamples;
  cfg.seed = kSeed;
  cfg.lanes = lane_count();
  for (std::size_t n : {8u, 32u, 128u}) {
    const auto s = generate_sequence({SequenceKind::Mixture, n});
    const auto rep = check_stable_conditions(s.f, s.basis, s.t, s.y.y());
    const std::string tag = "n=" + std::to_string(n) + " ";
    o.need(*rep.neg_norm == 0.0, tag + "NEG " + fmt("%.3g", *rep.neg_norm));
    o.need(*rep.norm_distance <= kRoundoff, tag + "NORM " + fmt("%.3g", *rep.norm_distance));
    for (double a : rep.ascv_norms) o.need(a == 0.0, tag + "asCV " + fmt("%.3g", a));

    const auto row = stable_test(s, cfg);
    for (const auto& c : row.conditional)
      o.need(c.within(4.0), tag + fmt("conditional cell lambda=%g bin=%g", c.lambda, c.second));
    for (const auto& c : row.joint)
      o.need(c.within(4.0), tag + fmt("joint cell lambda=%g gamma=%g", c.lambda, c.second));
  }
  return o;
}

Outcome criterion6() {
  Outcome o;
  const std::vector<double> ns{16, 64, 256};
  std::vector<double> contraction, excess;
  for (double nd : ns) {
    const auto s = generate_sequence({SequenceKind::Central, static_cast<std::size_t>(nd)});
    const auto rep = check_clt_conditions(s.f);
    o.need(std::abs(rep.variance - 1.0) <= kRoundoff, fmt("variance %.17g at n=%g", rep.variance, nd));
    contraction.push_back(rep.contraction_norms[0] * rep.contraction_norms[0]);
    excess.push_back(*rep.fourth_moment - 3.0);
  }
  for (std::size_t i = 1; i < ns.size(); ++i) {
    o.need(contraction[i] < contraction[i - 1], "contraction not decreasing");
    o.need(excess[i] < excess[i - 1], "fourth moment not decreasing");
  }
  const double slope = fitted_decay_exponent(ns, contraction);
  o.need(slope <= -0.9, fmt("decay exponent %.3f", slope));
  o.need(std::abs(excess.back()) <= 0.1, fmt("m4 - 3 = %.4f at n=256", excess.back()));

  const auto s = generate_sequence({SequenceKind::Central, 256});
  const double ks = ks_statistic_normal(sample_integral(s.f, kSamples, kSeed, 256, lane_count()));
  o.need(ks <= 0.02, fmt("KS %.4f", ks));
  o.detail += (o.detail.empty() ? "" : "; ") + fmt("exponent %.3f, KS %.4f", slope, ks);
  return o;
}

Outcome criterion7() {
  Outcome o;
  const auto s = generate_sequence({SequenceKind::Mixture, 128});
  const auto g = projection_gap(s, kSamples, kSeed, lane_count());
  o.need(within(g.mean_abs_gap, g.abs_gap_std_error),
         fmt("mean |gap| %.3g (se %.3g)", g.mean_abs_gap, g.abs_gap_std_error));
  o.need(within(g.mean_early, g.early_std_error),
         fmt("early part %.3g (se %.3g)", g.mean_early, g.early_std_error));
  return o;
}

Outcome criterion8() {
  Outcome o;
  auto cfg = default_dds_config();
  cfg.samples = kSamples;
  cfg.seed = kSeed;
  cfg.lanes = lane_count();
  const auto r = dds_experiment(cfg);
  for (const auto& p : r.points)
    o.need(within(p.gap, p.gap_std_error), fmt("t=%g gap %.3g", p.t, p.gap));
  for (const auto& [j, c] : r.early_correlations)
    o.need(within(c, r.correlation_std_error), fmt("corr with Z_%g = %.3g", static_cast<double>(j), c));
  o.need(!r.early_correlations.empty(), "no early coordinates");
  return o;
}

Outcome criterion9() {
  Outcome o;
  const std::vector<std::string> lanes{"1", "3", "8"};
  for (const auto& cmd : command_names()) {
    std::string first;
    for (std::size_t i = 0; i < lanes.size(); ++i) {
      // selftest is single-threaded; two runs suffice there.
      if (cmd == "selftest" && i == 2) break;
      setenv("CHAOSLAB_THREADS", lanes[i].c_str(), 1);
      RunConfig cfg;
      cfg.command = cmd;
      cfg.seed = kSeed;
      std::ostringstream os;
      run_command(cfg, os);
      if (i == 0)
        first = os.str();
      else
        o.need(os.str() == first, cmd + " differs with CHAOSLAB_THREADS=" + lanes[i]);
    }
  }
  unsetenv("CHAOSLAB_THREADS");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    double limit_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "exact algebra suite", 10, criterion1},
      {2, "fourth-moment values", 5, criterion2},
      {3, "square-equality identity", 30, criterion3},
      {4, "transport suite", 30, criterion4},
      {5, "mixture stable-limit experiment", 180, criterion5},
      {6, "central limit experiment", 180, criterion6},
      {7, "gradient projection check", 120, criterion7},
      {8, "time-changed martingale suite", 120, criterion8},
      {9, "determinism across lane counts", 600, criterion9},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.limit_seconds) o.need(false, fmt("runtime %.1f s over %.0f s", secs, c.limit_seconds));
    if (!o.ok) ++failed;
    std::printf("%s criterion %d: %s (%.2f s)%s%s\n", o.ok ? "PASS" : "FAIL", c.id, c.title, secs,
                o.detail.empty() ? "" : ": ", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
