#include "galerk/report.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace galerk {

void RunReport::add(const std::string& key, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  entries_.emplace_back(key, buf);
}

void RunReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "key,value\n";
  for (const auto& [k, v] : entries_) out << k << ',' << v << '\n';
}

void RunReport::write_text(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "=== " << subcommand_ << " ===\n";
  for (const auto& [k, v] : entries_) out << "  " << k << ": " << v << '\n';
}

Stopwatch::Stopwatch() { restart(); }

void Stopwatch::restart() {
  start_ns_ = std::chrono::duration_cast<std::chrono::nanoseconds>(
                  std::chrono::steady_clock::now().time_since_epoch())
                  .count();
}

double Stopwatch::seconds() const {
  const long long now = std::chrono::duration_cast<std::chrono::nanoseconds>(
                            std::chrono::steady_clock::now().time_since_epoch())
                            .count();
  return 1e-9 * static_cast<double>(now - start_ns_);
}

}  // namespace galerk
