#pragma once

#include <cstddef>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace scdd {

/// Warning and counter sink passed through the pipeline stages. Stages never
/// print; the caller decides where warnings go.
struct Diagnostics {
  std::vector<std::string> warnings;
  std::map<std::string, std::size_t> counters;
  bool echo = false;  // also print warnings to stderr as they arrive

  void warn(std::string message) {
    if (echo) std::cerr << "warning: " << message << '\n';
    warnings.push_back(std::move(message));
  }
  void add(const std::string& counter, std::size_t n = 1) { counters[counter] += n; }
  std::size_t count(const std::string& counter) const {
    auto it = counters.find(counter);
    return it == counters.end() ? 0 : it->second;
  }
};

inline void warn(Diagnostics* diag, std::string message) {
  if (diag) diag->warn(std::move(message));
}

inline void bump(Diagnostics* diag, const std::string& counter, std::size_t n = 1) {
  if (diag) diag->add(counter, n);
}

}  // namespace scdd
