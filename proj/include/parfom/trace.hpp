#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "parfom/problems.hpp"

namespace parfom {

enum class EventKind {
  iterate,      // a method step finished; t is its completion time
  restart,      // copy restarted at a point (never copy N)
  send,         // copy n sent a point to copy n-1 (peer)
  task_update,  // new restart value (an "update"; copy N's only kind)
  arrival,      // message reached copy n from peer
  pause_begin,
  pause_end,
  epoch_begin,
  converged,    // zero subgradient: copy idles
};

std::string to_string(EventKind kind);

struct TraceEvent {
  double t = 0.0;
  int copy = 0;
  EventKind kind = EventKind::iterate;
  double value = 0.0;
  int peer = -2;               // other endpoint of send/arrival, else -2
  std::int64_t point_ref = -1;  // index into SchemeTrace::points for restart/send
};

struct SchemeTrace {
  double eps = 1.0;
  int N = -1;
  double f_x0 = 0.0;
  std::optional<double> f_star;
  std::vector<TraceEvent> events;
  std::vector<Point> points;
  bool complete = false;  // stopped because the eps criterion was met
  std::optional<double> time_to_eps;
  double end_time = 0.0;
  std::int64_t oracle_calls_total = 0;

  int num_copies() const { return N + 2; }
  std::int64_t store_point(const Point& x);
  void log(double t, int copy, EventKind kind, double value, int peer = -2, std::int64_t point_ref = -1);

  /// Restart counts indexed by n + 1.
  std::vector<int> restarts_per_copy() const;
  /// Points each copy restarted at, in order.
  std::vector<Point> restart_points(int copy) const;
  std::vector<double> restart_values(int copy) const;
  /// Update values: f(x0) followed by every task_update value.
  std::vector<double> update_values(int copy) const;
  /// Earliest iterate completion time with value <= threshold.
  std::optional<double> first_time_to(double threshold) const;
};

struct InvariantReport {
  bool ok = true;
  std::vector<std::string> violations;
  void fail(std::string message);
};

/// Update decrements, message topology, copy-N behavior, send cap near the
/// optimum and the per-copy message count. The last two need f*.
InvariantReport check_invariants(const SchemeTrace& trace);

/// One JSON object per event, then a summary object. `extra` is merged into the summary.
void write_trace_jsonl(const SchemeTrace& trace, std::ostream& out,
                       const nlohmann::json& extra = nlohmann::json::object());
nlohmann::json trace_summary(const SchemeTrace& trace);

} // namespace parfom
