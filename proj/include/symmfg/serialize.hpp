#pragma once

#include <fstream>
#include <string>

#include "symmfg/core.hpp"
#include "symmfg/learn.hpp"
#include "symmfg/symmetry.hpp"

namespace symmfg {

// Text table formats (tab-separated, '#'-prefixed headers, %.17g doubles so
// every value round-trips exactly). Layouts are documented in
// docs/FORMATS.md.

std::string policy_to_text(const Policy& pi);
Policy policy_from_text(const std::string& text);
void save_policy(const Policy& pi, const std::string& path);
Policy load_policy(const std::string& path);

/// Per-agent policy bundle (one extra leading "agent" column).
std::string policy_profile_to_text(std::span<const Policy> policies);
std::vector<Policy> policy_profile_from_text(const std::string& text);

std::string qtable_to_text(const QTable& q);
QTable qtable_from_text(const std::string& text);
void save_qtable(const QTable& q, const std::string& path);
QTable load_qtable(const std::string& path);

std::string grid_function_to_text(const GridFunction& g);
GridFunction grid_function_from_text(const std::string& text);
void save_grid_function(const GridFunction& g, const std::string& path);
GridFunction load_grid_function(const std::string& path);

/// Append-only metric trace writer; every row is flushed, so an
/// interrupted run leaves a valid prefix.
class MetricTraceWriter {
 public:
  explicit MetricTraceWriter(const std::string& path);
  void append(const MetricRow& row);

 private:
  std::ofstream out_;
};

std::string metric_trace_to_text(const MetricTrace& trace);
MetricTrace metric_trace_from_text(const std::string& text);

/// One record per (episode, step, agent): state, action, raw reward.
void append_trajectory_records(std::ostream& out, std::size_t episode, const struct Trajectory& t);
void write_trajectory_header(std::ostream& out);

std::string format_double(double x);

}  // namespace symmfg
