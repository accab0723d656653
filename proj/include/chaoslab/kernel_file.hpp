#ifndef CHAOSLAB_KERNEL_FILE_HPP
#define CHAOSLAB_KERNEL_FILE_HPP

// Kernel files (JSON, 1-based indices):
//
//   {
//     "dim": 3,
//     "basis": [{"channel": 1, "time": 0.3}, ...],
//     "kernels": [{"order": 2, "entries": [[1, 2, 0.5], [3, 3, -1.0]]}],
//     "t": 0.5,
//     "Y": {"constant": 1.0, "squares": [[[1, 1.0], [2, 0.5]]]}
//   }
//
// Each entry lists an ascending index tuple followed by the coefficient of
// the symmetric kernel at that tuple. "t" and "Y" are optional; Y is a
// nonnegative constant plus a sum of squares X(h)^2 with h given sparsely.

#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chaoslab/chaos.hpp"
#include "chaoslab/error.hpp"
#include "chaoslab/filtered_space.hpp"
#include "chaoslab/limit_lab.hpp"
#include "chaoslab/tensor.hpp"

namespace chaoslab {

struct KernelFile {
  FilteredBasis basis;
  std::vector<SymmetricKernel> kernels;
  ChaosFunctional functional;
  std::optional<double> t;
  std::optional<MixtureLaw> y;
};

namespace detail {

/// Maps JSON pointers ("/kernels/0/entries/3") to the 1-based line where the
/// value starts. Assumes syntactically valid JSON.
inline std::map<std::string, std::size_t> json_value_lines(const std::string& text) {
  struct Frame {
    bool object;
    std::string key;
    std::size_t index = 0;
    bool expect_key = false;
  };
  std::map<std::string, std::size_t> lines;
  std::vector<Frame> stack;
  std::size_t line = 1;
  auto pointer = [&] {
    std::string p;
    for (const auto& f : stack) p += "/" + (f.object ? f.key : std::to_string(f.index));
    return p;
  };
  auto record = [&] { lines.emplace(pointer(), line); };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
    } else if (c == '"') {
      std::string s;
      const std::size_t start_line = line;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        s += text[i];
      }
      if (!stack.empty() && stack.back().object && stack.back().expect_key) {
        stack.back().key = s;
        stack.back().expect_key = false;
      } else {
        lines.emplace(pointer(), start_line);
      }
    } else if (c == ',') {
      if (stack.empty()) continue;
      if (stack.back().object)
        stack.back().expect_key = true;
      else
        ++stack.back().index;
    } else if (c == '{' || c == '[') {
      record();
      stack.push_back({c == '{', {}, 0, c == '{'});
    } else if (c == '}' || c == ']') {
      if (!stack.empty()) stack.pop_back();
    } else if (c == ':' || c == ' ' || c == '\t' || c == '\r') {
      continue;
    } else {
      record();
      while (i + 1 < text.size() && std::string(",]}\n \t\r").find(text[i + 1]) == std::string::npos)
        ++i;
    }
  }
  return lines;
}

class KernelFileReader {
 public:
  KernelFileReader(std::string source, const std::string& text)
      : source_(std::move(source)), lines_(json_value_lines(text)) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& msg) const {
    std::string p = pointer;
    auto it = lines_.find(p);
    while (it == lines_.end() && !p.empty()) {
      p = p.substr(0, p.rfind('/'));
      it = lines_.find(p);
    }
    const std::size_t line = it == lines_.end() ? 1 : it->second;
    throw InvalidArgument(source_ + ":" + std::to_string(line) + ": " +
                          (pointer.empty() ? "" : pointer + ": ") + msg);
  }

  const nlohmann::json& field(const nlohmann::json& obj, const std::string& ptr,
                              const std::string& key) const {
    if (!obj.is_object()) fail(ptr, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(ptr, "missing field \"" + key + "\"");
    return *it;
  }

  double number(const nlohmann::json& j, const std::string& ptr) const {
    if (!j.is_number()) fail(ptr, "expected a number");
    return j.get<double>();
  }

  std::size_t positive_int(const nlohmann::json& j, const std::string& ptr) const {
    if (!j.is_number_integer() || j.get<long long>() < 1) fail(ptr, "expected a positive integer");
    return static_cast<std::size_t>(j.get<long long>());
  }

  std::size_t index(const nlohmann::json& j, const std::string& ptr, std::size_t dim) const {
    if (!j.is_number_integer()) fail(ptr, "index must be an integer");
    const long long v = j.get<long long>();
    if (v < 1 || static_cast<std::size_t>(v) > dim)
      fail(ptr, "index " + std::to_string(v) + " out of range 1.." + std::to_string(dim));
    return static_cast<std::size_t>(v - 1);
  }

 private:
  std::string source_;
  std::map<std::string, std::size_t> lines_;
};

}  // namespace detail

/// Parses kernel-file text; `source` names the input in diagnostics.
inline KernelFile parse_kernel_text(const std::string& text, const std::string& source = "<input>") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t upto = std::min(e.byte, text.size());
    std::size_t line = 1;
    for (std::size_t i = 0; i + 1 < upto; ++i)
      if (text[i] == '\n') ++line;
    throw InvalidArgument(source + ":" + std::to_string(line) + ": malformed JSON (" + e.what() + ")");
  }
  const detail::KernelFileReader rd(source, text);

  const std::size_t dim = rd.positive_int(rd.field(doc, "", "dim"), "/dim");
  if (dim > kMaxDim)
    throw CapacityError(source + ": dim " + std::to_string(dim) + " exceeds the dimension cap " +
                        std::to_string(kMaxDim));

  const auto& jb = rd.field(doc, "", "basis");
  if (!jb.is_array()) rd.fail("/basis", "expected an array");
  if (jb.size() != dim)
    rd.fail("/basis", "has " + std::to_string(jb.size()) + " directions, expected dim = " +
                          std::to_string(dim));
  std::vector<double> times;
  std::vector<int> channels;
  for (std::size_t i = 0; i < dim; ++i) {
    const std::string p = "/basis/" + std::to_string(i);
    const double t = rd.number(rd.field(jb[i], p, "time"), p + "/time");
    if (!(t > 0.0 && t <= 1.0)) rd.fail(p + "/time", "time must lie in (0,1]");
    times.push_back(t);
    channels.push_back(
        jb[i].contains("channel")
            ? static_cast<int>(rd.positive_int(jb[i]["channel"], p + "/channel"))
            : 1);
  }

  KernelFile out{FilteredBasis(times, channels), {}, ChaosFunctional(dim), std::nullopt,
                 std::nullopt};

  const auto& jk = rd.field(doc, "", "kernels");
  if (!jk.is_array()) rd.fail("/kernels", "expected an array");
  std::map<std::size_t, std::size_t> seen_orders;
  for (std::size_t k = 0; k < jk.size(); ++k) {
    const std::string p = "/kernels/" + std::to_string(k);
    const auto& jo = rd.field(jk[k], p, "order");
    if (!jo.is_number_integer() || jo.get<long long>() < 0) rd.fail(p + "/order", "expected a nonnegative integer");
    const auto order = static_cast<std::size_t>(jo.get<long long>());
    if (order > kMaxOrder)
      rd.fail(p + "/order", "order " + std::to_string(order) + " exceeds the order cap " +
                                std::to_string(kMaxOrder));
    if (auto [it, fresh] = seen_orders.emplace(order, k); !fresh)
      rd.fail(p + "/order", "order " + std::to_string(order) + " already given by kernel " +
                                std::to_string(it->second));

    SymmetricKernel f(order, dim);
    const auto& je = rd.field(jk[k], p, "entries");
    if (!je.is_array()) rd.fail(p + "/entries", "expected an array");
    std::map<IndexTuple, std::size_t> where;
    for (std::size_t e = 0; e < je.size(); ++e) {
      const std::string pe = p + "/entries/" + std::to_string(e);
      const auto& row = je[e];
      if (!row.is_array() || row.size() != order + 1)
        rd.fail(pe, "entry must list " + std::to_string(order) + " indices and a value");
      IndexTuple key{};
      for (std::size_t s = 0; s < order; ++s) {
        key[s] = static_cast<Index>(rd.index(row[s], pe + "/" + std::to_string(s), dim));
        if (s > 0 && key[s] < key[s - 1])
          rd.fail(pe, "index tuple " + tuple_to_string(key, order, 1) + " is not ascending");
      }
      const double v = rd.number(row[order], pe + "/" + std::to_string(order));
      if (!std::isfinite(v)) rd.fail(pe, "coefficient must be finite");
      if (auto [it, fresh] = where.emplace(key, e); !fresh)
        rd.fail(pe, "duplicate tuple " + tuple_to_string(key, order, 1) + " (first given as entry " +
                        std::to_string(it->second) + ")");
      f.set(key, v);
    }
    out.functional.add(f);
    out.kernels.push_back(std::move(f));
  }

  if (doc.contains("t")) {
    const double t = rd.number(doc["t"], "/t");
    if (!(t >= 0.0 && t <= 1.0)) rd.fail("/t", "t must lie in [0,1]");
    out.t = t;
  }

  if (doc.contains("Y")) {
    const auto& jy = doc["Y"];
    if (!jy.is_object()) rd.fail("/Y", "expected an object");
    double c = 0.0;
    if (jy.contains("constant")) {
      c = rd.number(jy["constant"], "/Y/constant");
      if (!(c >= 0.0)) rd.fail("/Y/constant", "constant must be nonnegative");
    }
    MixtureLaw y = MixtureLaw::constant(c, dim);
    if (jy.contains("squares")) {
      const auto& js = jy["squares"];
      if (!js.is_array()) rd.fail("/Y/squares", "expected an array");
      for (std::size_t q = 0; q < js.size(); ++q) {
        const std::string pq = "/Y/squares/" + std::to_string(q);
        if (!js[q].is_array()) rd.fail(pq, "expected an array of [index, value] pairs");
        std::vector<double> h(dim, 0.0);
        for (std::size_t e = 0; e < js[q].size(); ++e) {
          const std::string pe = pq + "/" + std::to_string(e);
          const auto& pair = js[q][e];
          if (!pair.is_array() || pair.size() != 2) rd.fail(pe, "expected [index, value]");
          const std::size_t i = rd.index(pair[0], pe + "/0", dim);
          if (h[i] != 0.0) rd.fail(pe, "duplicate index " + std::to_string(i + 1));
          h[i] = rd.number(pair[1], pe + "/1");
        }
        y += MixtureLaw::square_of(h);
      }
    }
    out.y = std::move(y);
  }
  return out;
}

inline KernelFile parse_kernel_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open kernel file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_kernel_text(ss.str(), path);
}

}  // namespace chaoslab

#endif  // CHAOSLAB_KERNEL_FILE_HPP
