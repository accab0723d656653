#ifndef CHAOSLAB_REPORT_HPP
#define CHAOSLAB_REPORT_HPP

// Experiment reports: JSON with a versioned schema and stable key order, or
// CSV with one row per (n, metric).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chaoslab/error.hpp"

namespace chaoslab {

inline constexpr const char* kReportSchema = "chaoslab.report/1";

struct Measurement {
  std::size_t n = 0;
  std::string metric;
  double value = 0.0;
  std::optional<double> std_error;

  bool operator==(const Measurement&) const = default;
};

/// A named assertion value <= bound.
struct Check {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool passed = false;

  bool operator==(const Check&) const = default;
};

struct ExperimentReport {
  std::string command;
  std::uint64_t seed = 0;
  nlohmann::ordered_json parameters = nlohmann::ordered_json::object();
  std::vector<Measurement> results;
  std::vector<Check> checks;
  /// Quantities derived across the whole n-list (fitted exponents and the like).
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  std::optional<double> wall_clock_seconds;

  void add(std::size_t n, std::string metric, double value,
           std::optional<double> std_error = std::nullopt) {
    results.push_back({n, std::move(metric), value, std_error});
  }

  bool check(std::string name, double value, double bound) {
    const bool ok = std::isfinite(value) && value <= bound;
    checks.push_back({std::move(name), value, bound, ok});
    return ok;
  }

  /// Records a boolean condition as value 0 (holds) or 1 (fails) against bound 0.
  bool require(std::string name, bool holds) { return check(std::move(name), holds ? 0.0 : 1.0, 0.0); }

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }

  bool operator==(const ExperimentReport& o) const {
    return command == o.command && seed == o.seed && parameters == o.parameters &&
           results == o.results && checks == o.checks && summary == o.summary &&
           wall_clock_seconds == o.wall_clock_seconds;
  }
};

namespace detail {

// Non-finite values have no JSON literal; they are written as strings.
inline nlohmann::ordered_json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double read_number(const nlohmann::ordered_json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::nan("");
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
  }
  throw InvalidArgument("report: expected a number, got " + j.dump());
}

inline std::string format_double(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const ExperimentReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = kReportSchema;
  j["command"] = r.command;
  j["seed"] = r.seed;
  j["parameters"] = r.parameters;
  auto& results = j["results"] = nlohmann::ordered_json::array();
  for (const auto& m : r.results) {
    nlohmann::ordered_json e;
    e["n"] = m.n;
    e["metric"] = m.metric;
    e["value"] = detail::number(m.value);
    e["stderr"] = m.std_error ? detail::number(*m.std_error) : nlohmann::ordered_json(nullptr);
    results.push_back(std::move(e));
  }
  auto& checks = j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : r.checks) {
    nlohmann::ordered_json e;
    e["name"] = c.name;
    e["value"] = detail::number(c.value);
    e["bound"] = detail::number(c.bound);
    e["passed"] = c.passed;
    checks.push_back(std::move(e));
  }
  j["summary"] = r.summary;
  j["passed"] = r.passed();
  if (r.wall_clock_seconds) j["wall_clock_seconds"] = *r.wall_clock_seconds;
  return j;
}

inline ExperimentReport report_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("schema").get<std::string>() != kReportSchema)
      throw InvalidArgument("report: unsupported schema " + j.at("schema").dump());
    ExperimentReport r;
    r.command = j.at("command").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.parameters = j.at("parameters");
    for (const auto& e : j.at("results")) {
      Measurement m{e.at("n").get<std::size_t>(), e.at("metric").get<std::string>(),
                    detail::read_number(e.at("value")), std::nullopt};
      if (!e.at("stderr").is_null()) m.std_error = detail::read_number(e.at("stderr"));
      r.results.push_back(std::move(m));
    }
    for (const auto& e : j.at("checks"))
      r.checks.push_back({e.at("name").get<std::string>(), detail::read_number(e.at("value")),
                          detail::read_number(e.at("bound")), e.at("passed").get<bool>()});
    r.summary = j.at("summary");
    if (j.contains("wall_clock_seconds")) r.wall_clock_seconds = j["wall_clock_seconds"].get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("report: ") + e.what());
  }
}

inline ExperimentReport parse_report(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("report: ") + e.what());
  }
  return report_from_json(j);
}

inline std::string to_csv(const ExperimentReport& r) {
  std::ostringstream os;
  os << "n,metric,value,stderr\n";
  for (const auto& m : r.results)
    os << m.n << ',' << m.metric << ',' << detail::format_double(m.value) << ','
       << (m.std_error ? detail::format_double(*m.std_error) : "") << '\n';
  return os.str();
}

enum class ReportFormat { Json, Csv };

inline std::string render_report(const ExperimentReport& r, ReportFormat fmt) {
  return fmt == ReportFormat::Json ? to_json(r).dump(2) + "\n" : to_csv(r);
}

/// Writes the report to `path`; "-" writes to `fallback`.
inline void emit_report(const ExperimentReport& r, ReportFormat fmt, const std::string& path,
                        std::ostream& fallback) {
  const std::string text = render_report(r, fmt);
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot open report file for writing: " + path);
  out << text;
  out.flush();
  if (!out) throw InvalidArgument("failed writing report file: " + path);
}

}  // namespace chaoslab

#endif  // CHAOSLAB_REPORT_HPP
