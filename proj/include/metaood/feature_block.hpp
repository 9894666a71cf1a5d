#pragma once

#include <cmath>
#include <string>
#include <vector>

namespace metaood {

/// Named feature values plus the list of sentinel substitutions made while
/// computing them. Undefined ratios and any non-finite result become 0.
struct FeatureBlock {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<std::string> diagnostics;

  void add(const std::string& name, double v) {
    if (!std::isfinite(v)) {
      diagnostics.push_back(name + ": non-finite value replaced by 0");
      v = 0.0;
    }
    names.push_back(name);
    values.push_back(v);
  }

  /// num / den with the sentinel policy: x/0 and 0/0 give 0.
  void add_ratio(const std::string& name, double num, double den) {
    if (den == 0.0) {
      diagnostics.push_back(name + (num == 0.0 ? ": 0/0 replaced by 0" : ": x/0 replaced by 0"));
      names.push_back(name);
      values.push_back(0.0);
      return;
    }
    add(name, num / den);
  }

  /// Appends another block with every name prefixed.
  void append(const FeatureBlock& other, const std::string& prefix = {}) {
    for (std::size_t i = 0; i < other.names.size(); ++i) {
      names.push_back(prefix + other.names[i]);
      values.push_back(other.values[i]);
    }
    for (const auto& d : other.diagnostics) diagnostics.push_back(prefix + d);
  }

  std::size_t size() const { return values.size(); }

  double get(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return values[i];
    throw std::out_of_range("no feature named " + name);
  }
};

}  // namespace metaood
