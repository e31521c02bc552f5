#pragma once

#include <string>
#include <utility>
#include <vector>

#include "galerk/types.hpp"

namespace galerk {

/// Run summary of a CLI subcommand: parameters, dof counts, timings and
/// solution summaries, serialized as key,value CSV and readable text.
class RunReport {
 public:
  explicit RunReport(std::string subcommand) : subcommand_(std::move(subcommand)) {
    add("subcommand", subcommand_);
  }

  void add(const std::string& key, const std::string& value) {
    entries_.emplace_back(key, value);
  }
  void add(const std::string& key, double value);
  void add(const std::string& key, int value) {
    add(key, std::to_string(value));
  }
  void add(const std::string& key, Eigen::Index value) {
    add(key, std::to_string(static_cast<long long>(value)));
  }

  const std::string& subcommand() const { return subcommand_; }

  void write_csv(const std::string& path) const;
  void write_text(const std::string& path) const;

 private:
  std::string subcommand_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Wall-clock stopwatch for the T_ass / T_reg / T_sol columns.
class Stopwatch {
 public:
  Stopwatch();
  double seconds() const;
  void restart();

 private:
  long long start_ns_;
};

}  // namespace galerk
