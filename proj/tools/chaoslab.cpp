// chaoslab: command-line driver for the chaos laboratory.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "chaoslab/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Wiener-chaos laboratory: kernel checks and Monte-Carlo limit experiments"};
  app.require_subcommand(1);

  chaoslab::RunConfig cfg;
  std::string n_list, format = "json";
  std::optional<std::string> kernel, kind;
  std::optional<double> t, tol;
  std::optional<std::size_t> samples;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--kernel", kernel, "kernel file (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--kind", kind, "sequence kind")
        ->check(CLI::IsMember({"mixture", "central", "custom"}));
    sub->add_option("--n", n_list, "comma-separated list of sizes, e.g. 8,32,128");
    sub->add_option("--t", t, "cutoff time");
    sub->add_option("--samples", samples, "Monte-Carlo samples or random instances");
    sub->add_option("--seed", cfg.seed, "RNG seed")->capture_default_str();
    sub->add_option("--tol", tol, "tolerance for exact identities (default 1e-9)");
    sub->add_option("--out", cfg.out, "report path ('-' for stdout)")->capture_default_str();
    sub->add_option("--format", format, "report format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    sub->add_flag("--timing", cfg.timing, "record wall-clock time in the report");
  };

  const std::pair<const char*, const char*> commands[] = {
      {"selftest", "randomized invariant suites over the exact identities"},
      {"clt", "fourth-moment conditions over an n-list"},
      {"stable", "stable-limit conditions and the characteristic-function test"},
      {"sqeq", "square-equality identity on random discrete instances"},
      {"dds", "time-changed martingale experiment"},
      {"transport-verify", "abstract/concrete transport identities"},
      {"clark-ocone", "predictable representation residuals"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.command = app.get_subcommands().front()->get_name();
    cfg.kernel = kernel;
    cfg.kind = kind;
    cfg.t = t;
    cfg.tol = tol;
    cfg.samples = samples;
    if (!n_list.empty()) cfg.n_list = chaoslab::parse_n_list(n_list);
    cfg.format = format == "csv" ? chaoslab::ReportFormat::Csv : chaoslab::ReportFormat::Json;
    const int status = chaoslab::run_command(cfg, std::cout);
    if (status != 0) std::cerr << "chaoslab " << cfg.command << ": some checks failed\n";
    return status;
  } catch (const std::exception& e) {
    std::cerr << "chaoslab: " << e.what() << '\n';
    return 2;
  }
}
