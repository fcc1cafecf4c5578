#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <queue>
#include <vector>

#include <json.hpp>

#include "parfom/methods.hpp"
#include "parfom/problems.hpp"
#include "parfom/sync_scheme.hpp"
#include "parfom/trace.hpp"

namespace parfom {

struct DelayModel {
  enum class Transit { deterministic, uniform, single_server };
  enum class Pause { deterministic, uniform };

  Transit transit = Transit::deterministic;
  double tau_transit = 1.0;     // deterministic / uniform
  double service_time = 1.0;    // single_server
  double kappa = 1.0;           // single_server: effective tau = kappa (N + 2) service_time
  Pause pause = Pause::deterministic;
  double tau_pause = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  /// Upper bound on the time between send and arrival for a scheme with copies -1..N.
  double effective_tau_transit(int N) const;
  nlohmann::json to_json() const;
};

enum class AsyncEventKind { step_complete = 0, arrival = 2, pause_end = 3, epoch_begin = 4 };

struct AsyncEvent {
  double time = 0.0;
  AsyncEventKind kind = AsyncEventKind::step_complete;
  std::uint64_t seq = 0;
  int copy = 0;
  std::uint64_t token = 0;
  std::optional<Message> message;  // arrivals
  bool via_server = false;

  bool operator>(const AsyncEvent& other) const;
};

enum class CopyPhase { iterating, paused, epoch_pending, idle };
enum class PauseMode { mid_epoch, epoch_start };

struct InFlightStep {
  MethodState after;
  StepOutcome outcome;
  double remaining = 0.0;      // duration left when suspended
  double completes_at = 0.0;   // valid while running
  bool running = false;
};

struct AsyncCopy {
  int n = 0;
  int epoch_index = 0;
  Task task;
  MethodState method;
  CopyPhase phase = CopyPhase::iterating;
  PauseMode pause_mode = PauseMode::mid_epoch;
  std::optional<Message> pause_candidate;
  double pause_deadline = 0.0;
  std::optional<Message> epoch_point;  // y_n while an epoch begin is pending or paused at its start
  std::optional<InFlightStep> step;
  Point restart_point;
  std::uint64_t step_token = 0;
  std::uint64_t pause_token = 0;
  std::uint64_t epoch_token = 0;
  std::int64_t messages_received = 0;
};

/// FIFO single server; a newer message from a sender replaces its queued one
/// and joins the back of the queue.
class ServerQueue {
public:
  struct Item {
    Message message;
    int receiver = 0;
  };
  /// Returns true when the server was idle and should start on this item now.
  bool enqueue(Message message, int receiver);
  std::optional<Item> pop();
  std::size_t pending() const { return items_.size(); }
  bool busy() const { return busy_; }
  void set_busy(bool busy) { busy_ = busy; }

private:
  std::deque<Item> items_;
  bool busy_ = false;
};

struct AsyncOptions {
  /// Simulation stops once the clock would pass this time.
  double budget = 1e9;
  /// Stop at the first iterate within eps of f* (needs f*).
  bool stop_at_eps = true;
};

class AsyncSimulator {
public:
  AsyncSimulator(const ProblemInstance& problem, const MethodKind& kind, const Point& x0, double eps, int N,
                 DelayModel delays, AsyncOptions options = {});

  /// Schedules an arrival at `receiver` at `time` from outside the scheme.
  void inject_message(int receiver, Message message, double time);
  /// Processes one event. Returns false when the run has ended.
  bool process_next();
  SchemeTrace run();

  double now() const { return now_; }
  const AsyncCopy& copy(int n) const { return copies_.at(n + 1); }
  const SchemeTrace& trace() const { return trace_; }
  bool finished() const { return finished_; }

private:
  void schedule(double time, AsyncEventKind kind, int copy, std::uint64_t token,
                std::optional<Message> message = std::nullopt, bool via_server = false);
  void start_step(AsyncCopy& c);
  void on_step_complete(AsyncCopy& c);
  void on_arrival(AsyncCopy& c, Message message);
  void on_pause_end(AsyncCopy& c);
  void begin_epoch(AsyncCopy& c, const Message& point);
  void begin_pause(AsyncCopy& c, Message message, PauseMode mode);
  void send(AsyncCopy& c, const Message& message);
  void start_service();
  double sample_pause();

  const ProblemInstance& problem_;
  double eps_;
  int N_;
  DelayModel delays_;
  AsyncOptions options_;
  Rng rng_;
  std::vector<AsyncCopy> copies_;
  std::priority_queue<AsyncEvent, std::vector<AsyncEvent>, std::greater<AsyncEvent>> queue_;
  ServerQueue server_;
  SchemeTrace trace_;
  std::optional<double> threshold_;
  double now_ = 0.0;
  std::uint64_t seq_ = 0;
  std::uint64_t next_token_ = 1;
  bool finished_ = false;
};

SchemeTrace run_async(const ProblemInstance& problem, const MethodKind& kind, const Point& x0, double eps, int N,
                      const DelayModel& delays, const AsyncOptions& options = {});

} // namespace parfom
