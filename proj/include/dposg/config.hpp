#pragma once

#include "dposg/common.hpp"
#include "dposg/oadam.hpp"
#include "dposg/problems.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace dposg {

enum class Optimizer { Osg, Dposg, Cposg, OAdam, DpOAdam, CpOAdam, RandDpOAdam, Gda };

inline const char* to_string(Optimizer optimizer) {
  switch (optimizer) {
    case Optimizer::Osg: return "osg";
    case Optimizer::Dposg: return "dposg";
    case Optimizer::Cposg: return "cposg";
    case Optimizer::OAdam: return "oadam";
    case Optimizer::DpOAdam: return "dp-oadam";
    case Optimizer::CpOAdam: return "cp-oadam";
    case Optimizer::RandDpOAdam: return "rand-dp-oadam";
    case Optimizer::Gda: return "gda";
  }
  return "dposg";
}

inline Optimizer parse_optimizer(std::string_view name) {
  for (auto candidate : {Optimizer::Osg, Optimizer::Dposg, Optimizer::Cposg, Optimizer::OAdam, Optimizer::DpOAdam,
                         Optimizer::CpOAdam, Optimizer::RandDpOAdam, Optimizer::Gda}) {
    if (name == to_string(candidate)) return candidate;
  }
  throw InvalidArgument("unknown optimizer '" + std::string(name) +
                        "' (expected osg, dposg, cposg, oadam, dp-oadam, cp-oadam, rand-dp-oadam or gda)");
}

inline bool uses_adam(Optimizer optimizer) {
  return optimizer == Optimizer::OAdam || optimizer == Optimizer::DpOAdam || optimizer == Optimizer::CpOAdam ||
         optimizer == Optimizer::RandDpOAdam;
}

/// Run description. Optional fields left empty mean "auto" or "unset".
struct RunConfig {
  std::string problem = "quadratic_saddle";
  ProblemParams problem_params;
  double sigma = 0.0;
  Optimizer optimizer = Optimizer::Dposg;
  int workers = 1;
  int minibatch = 1;
  std::optional<int> total_batch;
  /// ring, complete, identity, random2 or file:<path>; empty picks the
  /// optimizer's default.
  std::string topology;
  std::optional<int> rounds;
  std::optional<double> eta;
  /// Noise level used only to plan t; defaults to sigma.
  std::optional<double> plan_sigma;
  std::int64_t iterations = 0;
  std::uint64_t master_seed = 0;
  std::optional<double> projection_radius;
  std::int64_t metrics_every = 1;
  double tail_fraction = 0.2;
  bool parallel = false;
  std::vector<double> initial_point;
  AdamParams adam;
};

namespace detail {

inline std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r");
  return std::string(text.substr(first, last - first + 1));
}

inline double parse_double(const std::string& key, const std::string& text) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw InvalidArgument("config: '" + key + "' expects a number, got '" + text + "'");
  return value;
}

template <class Int>
Int parse_integer(const std::string& key, const std::string& text) {
  Int value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw InvalidArgument("config: '" + key + "' expects an integer, got '" + text + "'");
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw InvalidArgument("config: '" + key + "' expects true or false, got '" + text + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> values;
  std::string item;
  std::istringstream in(text);
  while (in >> item) {
    std::replace(item.begin(), item.end(), ',', ' ');
    std::istringstream pieces(item);
    std::string piece;
    while (pieces >> piece) values.push_back(parse_double(key, piece));
  }
  return values;
}

inline std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

}  // namespace detail

/// "dim:2, a:1, matrix:1 0 0 1" -> {dim: [2], a: [1], matrix: [1, 0, 0, 1]}
inline ProblemParams parse_problem_params(const std::string& text) {
  ProblemParams params;
  std::istringstream in(text);
  std::string entry;
  while (std::getline(in, entry, ',')) {
    entry = detail::trim(entry);
    if (entry.empty()) continue;
    const auto colon = entry.find(':');
    if (colon == std::string::npos) throw InvalidArgument("config: problem parameter '" + entry + "' lacks ':'");
    const std::string key = detail::trim(entry.substr(0, colon));
    const auto values = detail::parse_list(key, entry.substr(colon + 1));
    if (key.empty() || values.empty()) throw InvalidArgument("config: malformed problem parameter '" + entry + "'");
    params[key] = values;
  }
  return params;
}

inline std::string format_problem_params(const ProblemParams& params) {
  std::string out;
  for (const auto& [key, values] : params) {
    if (!out.empty()) out += ", ";
    out += key + ":";
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? " " : "") + detail::format_double(values[i]);
  }
  return out;
}

/// Applies one `key = value` assignment. Accepts the short aliases M, m, t, N.
inline void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "problem") {
    config.problem = value;
  } else if (key == "problem_params") {
    config.problem_params = parse_problem_params(value);
  } else if (key == "sigma") {
    config.sigma = parse_double(key, value);
  } else if (key == "optimizer") {
    config.optimizer = parse_optimizer(value);
  } else if (key == "workers" || key == "M") {
    config.workers = parse_integer<int>(key, value);
  } else if (key == "minibatch" || key == "m") {
    config.minibatch = parse_integer<int>(key, value);
  } else if (key == "total_batch") {
    config.total_batch = value == "none" ? std::nullopt : std::optional<int>(parse_integer<int>(key, value));
  } else if (key == "topology") {
    config.topology = value;
  } else if (key == "rounds" || key == "t") {
    config.rounds = value == "auto" ? std::nullopt : std::optional<int>(parse_integer<int>(key, value));
  } else if (key == "eta") {
    config.eta = value == "auto" ? std::nullopt : std::optional<double>(parse_double(key, value));
  } else if (key == "plan_sigma") {
    config.plan_sigma = value == "none" ? std::nullopt : std::optional<double>(parse_double(key, value));
  } else if (key == "iterations" || key == "N") {
    config.iterations = parse_integer<std::int64_t>(key, value);
  } else if (key == "master_seed") {
    config.master_seed = parse_integer<std::uint64_t>(key, value);
  } else if (key == "projection_radius") {
    config.projection_radius = value == "none" ? std::nullopt : std::optional<double>(parse_double(key, value));
  } else if (key == "metrics_every") {
    config.metrics_every = parse_integer<std::int64_t>(key, value);
  } else if (key == "tail_fraction") {
    config.tail_fraction = parse_double(key, value);
  } else if (key == "parallel") {
    config.parallel = parse_bool(key, value);
  } else if (key == "initial_point") {
    config.initial_point = parse_list(key, value);
  } else if (key == "adam_beta1") {
    config.adam.beta1 = parse_double(key, value);
  } else if (key == "adam_beta2") {
    config.adam.beta2 = parse_double(key, value);
  } else if (key == "adam_epsilon") {
    config.adam.epsilon = parse_double(key, value);
  } else {
    throw InvalidArgument("config: unknown key '" + key + "'");
  }
}

/// Flat `key = value` text, one key per line, `#` starts a comment.
inline RunConfig parse_config(std::istream& in) {
  RunConfig config;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config line " + std::to_string(line_number) + ": expected 'key = value'");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    if (value.empty()) throw InvalidArgument("config line " + std::to_string(line_number) + ": empty value for '" + key + "'");
    set_config_value(config, key, value);
  }
  return config;
}

inline RunConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file '" + path + "'");
  return parse_config(in);
}

/// Canonical text form; parse_config(format_config(c)) reproduces c.
inline std::string format_config(const RunConfig& c) {
  using detail::format_double;
  std::ostringstream out;
  out << "problem = " << c.problem << '\n';
  if (!c.problem_params.empty()) out << "problem_params = " << format_problem_params(c.problem_params) << '\n';
  out << "sigma = " << format_double(c.sigma) << '\n'
      << "optimizer = " << to_string(c.optimizer) << '\n'
      << "workers = " << c.workers << '\n'
      << "minibatch = " << c.minibatch << '\n'
      << "total_batch = " << (c.total_batch ? std::to_string(*c.total_batch) : "none") << '\n';
  if (!c.topology.empty()) out << "topology = " << c.topology << '\n';
  out << "rounds = " << (c.rounds ? std::to_string(*c.rounds) : "auto") << '\n'
      << "eta = " << (c.eta ? format_double(*c.eta) : "auto") << '\n'
      << "plan_sigma = " << (c.plan_sigma ? format_double(*c.plan_sigma) : "none") << '\n'
      << "iterations = " << c.iterations << '\n'
      << "master_seed = " << c.master_seed << '\n'
      << "projection_radius = " << (c.projection_radius ? format_double(*c.projection_radius) : "none") << '\n'
      << "metrics_every = " << c.metrics_every << '\n'
      << "tail_fraction = " << format_double(c.tail_fraction) << '\n'
      << "parallel = " << (c.parallel ? "true" : "false") << '\n';
  if (!c.initial_point.empty()) {
    out << "initial_point =";
    for (double v : c.initial_point) out << ' ' << format_double(v);
    out << '\n';
  }
  if (uses_adam(c.optimizer)) {
    out << "adam_beta1 = " << format_double(c.adam.beta1) << '\n'
        << "adam_beta2 = " << format_double(c.adam.beta2) << '\n'
        << "adam_epsilon = " << format_double(c.adam.epsilon) << '\n';
  }
  return out.str();
}

}  // namespace dposg
