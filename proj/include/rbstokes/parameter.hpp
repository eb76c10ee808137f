// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbstokes/errors.hpp"

namespace rbstokes {

using Parameter = Eigen::VectorXd;

inline Parameter make_parameter(std::initializer_list<double> values) {
  Parameter mu(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) mu[i++] = v;
  return mu;
}

inline std::string format_parameter(const Parameter& mu) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (i) os << ',';
    os << mu[i];
  }
  return os.str();
}

inline Parameter parse_parameter(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse parameter component '" + item + "'");
    }
  }
  if (values.empty()) throw ConfigError("empty parameter");
  Parameter mu(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) mu[static_cast<Eigen::Index>(i)] = values[i];
  return mu;
}

// SplitMix64; platform-independent so that sampled parameter sets are identical everywhere.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// Compact box D = [lower, upper] in R^n.
class ParameterDomain {
 public:
  ParameterDomain(Parameter lower, Parameter upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() == 0 || lower_.size() != upper_.size())
      throw ConfigError("parameter bounds must be nonempty and of equal length");
    for (Eigen::Index i = 0; i < lower_.size(); ++i) {
      if (!(lower_[i] < upper_[i]))
        throw ConfigError("degenerate parameter axis " + std::to_string(i) + ": lower must be < upper");
    }
  }

  // Keys: n, lower, upper (comma separated).
  static ParameterDomain from_config(const std::map<std::string, std::string>& config) {
    auto get = [&](const std::string& key) -> const std::string& {
      auto it = config.find(key);
      if (it == config.end()) throw ConfigError("missing parameter-domain key '" + key + "'");
      return it->second;
    };
    int n = 0;
    try {
      n = std::stoi(get("n"));
    } catch (const std::invalid_argument&) {
      throw ConfigError("parameter dimension n is not an integer");
    }
    Parameter lo = parse_parameter(get("lower"));
    Parameter hi = parse_parameter(get("upper"));
    if (n <= 0 || lo.size() != n || hi.size() != n)
      throw ConfigError("parameter dimension n does not match the bound lengths");
    return ParameterDomain(lo, hi);
  }

  Eigen::Index dim() const { return lower_.size(); }
  const Parameter& lower() const { return lower_; }
  const Parameter& upper() const { return upper_; }

  bool contains(const Parameter& mu) const {
    if (mu.size() != dim()) return false;
    for (Eigen::Index i = 0; i < dim(); ++i)
      if (!(mu[i] >= lower_[i] && mu[i] <= upper_[i])) return false;
    return true;
  }

  void require(const Parameter& mu) const {
    if (!contains(mu)) throw DomainError("parameter (" + format_parameter(mu) + ") is outside the parameter domain");
  }

  Parameter sample(SplitMix64& rng) const {
    Parameter mu(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) mu[i] = lower_[i] + (upper_[i] - lower_[i]) * rng.uniform();
    return mu;
  }

  std::vector<Parameter> random_sample(std::size_t count, std::uint64_t seed) const {
    SplitMix64 rng(seed);
    std::vector<Parameter> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(sample(rng));
    return out;
  }

  // Tensor grid with `per_axis` equispaced points per axis (endpoints included).
  std::vector<Parameter> tensor_grid(int per_axis) const {
    if (per_axis < 1) throw ConfigError("tensor grid needs at least one point per axis");
    std::vector<Parameter> out;
    const Eigen::Index n = dim();
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    while (true) {
      Parameter mu(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double t = per_axis == 1 ? 0.5 : static_cast<double>(idx[static_cast<std::size_t>(i)]) / (per_axis - 1);
        mu[i] = lower_[i] + t * (upper_[i] - lower_[i]);
      }
      out.push_back(mu);
      Eigen::Index d = 0;
      while (d < n && ++idx[static_cast<std::size_t>(d)] == per_axis) idx[static_cast<std::size_t>(d++)] = 0;
      if (d == n) break;
    }
    return out;
  }

 private:
  Parameter lower_;
  Parameter upper_;
};

}  // namespace rbstokes
