#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "parfom/methods.hpp"
#include "parfom/problems.hpp"
#include "parfom/trace.hpp"

namespace parfom {

struct Task {
  double restart_value = 0.0;
  double decrement = 1.0;

  bool fulfills(double value) const { return value <= restart_value - decrement; }
};

/// A point travelling from copy `sender` to `sender - 1`. Carries the oracle
/// output of the point so the receiver can restart without re-evaluating.
struct Message {
  Point point;
  OracleOutput oracle;
  int sender = 0;
  double send_time = 0.0;

  double value() const { return oracle.value; }
};

struct SyncCopy {
  int n = 0;
  Task task;
  std::optional<Message> inbox;
  MethodState method;
  int restart_count = 0;
};

/// Events produced by one copy in one slot, merged into the trace afterwards.
struct EventBuffer {
  struct Entry {
    TraceEvent event;
    std::optional<Point> point;
  };
  std::vector<Entry> entries;
  std::int64_t oracle_calls = 0;

  void log(double t, int copy, EventKind kind, double value, int peer = -2,
           std::optional<Point> point = std::nullopt);
  void flush_into(SchemeTrace& trace);
};

enum class SyncMode { lockstep, sequential };

struct SyncOptions {
  SyncMode mode = SyncMode::lockstep;
  /// Maximum number of time units: periods in lock-step mode, slots in sequential mode.
  std::int64_t budget = 1'000'000;
  /// Lock-step only: one worker thread per copy with a barrier per period.
  bool threaded = false;
};

/// Work of copy N in one period: task check, optional send, one iteration.
/// `t` is the period start; the iteration completes at t + 1.
std::optional<Message> sync_period_top(SyncCopy& copy, const ProblemInstance& problem, double t,
                                       EventBuffer& events);

/// Work of copy n < N in one period: compare own best with the inbox,
/// restart and forward on success, then one iteration. Clears the inbox.
std::optional<Message> sync_period(SyncCopy& copy, const ProblemInstance& problem, double t,
                                   EventBuffer& events);

/// Runs copies -1..N from x0 until some iterate reaches f* + eps (when f* is
/// known) or the budget is spent.
SchemeTrace run_sync(const ProblemInstance& problem, const MethodKind& kind, const Point& x0, double eps,
                     int N, const SyncOptions& options = {});

} // namespace parfom
