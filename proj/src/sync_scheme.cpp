#include "parfom/sync_scheme.hpp"

#include <atomic>
#include <barrier>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "parfom/errors.hpp"

namespace parfom {

void EventBuffer::log(double t, int copy, EventKind kind, double value, int peer, std::optional<Point> point) {
  entries.push_back(Entry{TraceEvent{t, copy, kind, value, peer, -1}, std::move(point)});
}

void EventBuffer::flush_into(SchemeTrace& trace) {
  for (auto& entry : entries) {
    TraceEvent e = entry.event;
    if (entry.point) e.point_ref = trace.store_point(*entry.point);
    trace.events.push_back(e);
  }
  trace.oracle_calls_total += oracle_calls;
  entries.clear();
  oracle_calls = 0;
}

namespace {

void iterate_once(SyncCopy& copy, const ProblemInstance& problem, double t, EventBuffer& events) {
  const bool was_converged = copy.method.converged;
  const StepOutcome step = method_step(copy.method, problem);
  events.oracle_calls += step.oracle_calls;
  if (copy.method.converged && !was_converged) events.log(t, copy.n, EventKind::converged, step.new_value);
  events.log(t + 1.0, copy.n, EventKind::iterate, step.new_value);
}

Message make_message(const SyncCopy& copy, double t) {
  return Message{copy.method.best_point, copy.method.best_oracle, copy.n, t};
}

} // namespace

std::optional<Message> sync_period_top(SyncCopy& copy, const ProblemInstance& problem, double t,
                                       EventBuffer& events) {
  std::optional<Message> out;
  const double best = copy.method.best_value();
  if (copy.task.fulfills(best)) {
    copy.task.restart_value = best;
    events.log(t, copy.n, EventKind::task_update, best);
    if (copy.n > -1) {
      out = make_message(copy, t);
      events.log(t, copy.n, EventKind::send, best, copy.n - 1, out->point);
    }
  }
  copy.inbox.reset();
  iterate_once(copy, problem, t, events);
  return out;
}

std::optional<Message> sync_period(SyncCopy& copy, const ProblemInstance& problem, double t,
                                   EventBuffer& events) {
  std::optional<Message> out;
  // Candidate: own best since restart unless the inbox point is strictly
  // better (the same rule the asynchronous scheme applies).
  Message candidate = make_message(copy, t);
  if (copy.inbox && copy.inbox->value() < candidate.value()) candidate = *copy.inbox;
  copy.inbox.reset();

  if (copy.task.fulfills(candidate.value())) {
    const double v = candidate.value();
    copy.method = method_restart(copy.method, problem, candidate.point, candidate.oracle);
    copy.task.restart_value = v;
    ++copy.restart_count;
    events.log(t, copy.n, EventKind::restart, v, -2, candidate.point);
    events.log(t, copy.n, EventKind::task_update, v);
    if (copy.n > -1) {
      out = Message{candidate.point, candidate.oracle, copy.n, t};
      events.log(t, copy.n, EventKind::send, v, copy.n - 1, candidate.point);
    }
  }
  iterate_once(copy, problem, t, events);
  return out;
}

namespace {

bool reached(const EventBuffer& buffer, double threshold) {
  for (const auto& e : buffer.entries) {
    if (e.event.kind == EventKind::iterate && e.event.value <= threshold) return true;
  }
  return false;
}

std::optional<Message> run_copy(SyncCopy& copy, int N, const ProblemInstance& problem, double t,
                                EventBuffer& events) {
  return copy.n == N ? sync_period_top(copy, problem, t, events) : sync_period(copy, problem, t, events);
}

void run_lockstep_serial(std::vector<SyncCopy>& copies, int N, const ProblemInstance& problem,
                         std::int64_t budget, std::optional<double> threshold, SchemeTrace& trace) {
  const int count = N + 2;
  std::vector<std::optional<Message>> outgoing(count);
  EventBuffer buffer;
  for (std::int64_t p = 0; p < budget; ++p) {
    for (int n = N; n >= -1; --n) {
      outgoing[n + 1] = run_copy(copies[n + 1], N, problem, static_cast<double>(p), buffer);
    }
    const bool done = threshold && reached(buffer, *threshold);
    buffer.flush_into(trace);
    // Messages sent this period become readable at the start of the next.
    for (int n = -1; n < N; ++n) {
      if (outgoing[n + 2]) copies[n + 1].inbox = std::move(outgoing[n + 2]);
      outgoing[n + 2].reset();
    }
    trace.end_time = static_cast<double>(p + 1);
    if (done) {
      trace.complete = true;
      trace.time_to_eps = static_cast<double>(p + 1);
      return;
    }
  }
}

void run_lockstep_threaded(std::vector<SyncCopy>& copies, int N, const ProblemInstance& problem,
                           std::int64_t budget, std::optional<double> threshold, SchemeTrace& trace) {
  const int count = N + 2;
  std::vector<std::optional<Message>> outgoing(count);
  std::vector<EventBuffer> buffers(count);
  std::vector<std::exception_ptr> errors(count);
  std::int64_t period = 0;
  bool stop = budget <= 0;

  auto end_of_period = [&]() noexcept {
    bool done = false;
    bool failed = false;
    for (int n = N; n >= -1; --n) {
      if (threshold && reached(buffers[n + 1], *threshold)) done = true;
      if (errors[n + 1]) failed = true;
      buffers[n + 1].flush_into(trace);
    }
    for (int n = -1; n < N; ++n) {
      if (outgoing[n + 2]) copies[n + 1].inbox = std::move(outgoing[n + 2]);
      outgoing[n + 2].reset();
    }
    ++period;
    trace.end_time = static_cast<double>(period);
    if (done) {
      trace.complete = true;
      trace.time_to_eps = static_cast<double>(period);
    }
    stop = done || failed || period >= budget;
  };

  std::barrier barrier(count, end_of_period);
  auto worker = [&](int n) {
    while (!stop) {
      try {
        if (!errors[n + 1]) {
          outgoing[n + 1] = run_copy(copies[n + 1], N, problem, static_cast<double>(period), buffers[n + 1]);
        }
      } catch (...) {
        errors[n + 1] = std::current_exception();
      }
      barrier.arrive_and_wait();
    }
  };
  {
    std::vector<std::jthread> threads;
    threads.reserve(count);
    for (int n = -1; n <= N; ++n) threads.emplace_back(worker, n);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void run_sequential(std::vector<SyncCopy>& copies, int N, const ProblemInstance& problem, std::int64_t budget,
                    std::optional<double> threshold, SchemeTrace& trace) {
  EventBuffer buffer;
  std::int64_t slot = 0;
  while (slot < budget) {
    // One sweep: N, N-1, ..., -1; a message is read later in the same sweep.
    for (int n = N; n >= -1 && slot < budget; --n, ++slot) {
      auto msg = run_copy(copies[n + 1], N, problem, static_cast<double>(slot), buffer);
      if (msg) copies[n].inbox = std::move(msg);
      const bool done = threshold && reached(buffer, *threshold);
      buffer.flush_into(trace);
      trace.end_time = static_cast<double>(slot + 1);
      if (done) {
        trace.complete = true;
        trace.time_to_eps = static_cast<double>(slot + 1);
        return;
      }
    }
  }
}

} // namespace

SchemeTrace run_sync(const ProblemInstance& problem, const MethodKind& kind, const Point& x0, double eps, int N,
                     const SyncOptions& options) {
  if (!(eps > 0.0)) throw ParameterError("run_sync: eps must be positive");
  if (N < -1) throw ParameterError("run_sync: N must be >= -1");
  if (options.budget < 0) throw ParameterError("run_sync: budget must be nonnegative");

  SchemeTrace trace;
  trace.eps = eps;
  trace.N = N;
  if (problem.metadata()) trace.f_star = problem.metadata()->f_star;

  // All copies share the single evaluation at x0.
  const MethodState first = method_init(kind, problem, x0, std::ldexp(eps, -1));
  trace.oracle_calls_total = 1;
  trace.f_x0 = first.best_value();
  std::vector<SyncCopy> copies;
  copies.reserve(N + 2);
  for (int n = -1; n <= N; ++n) {
    SyncCopy c;
    c.n = n;
    c.task = Task{trace.f_x0, std::ldexp(eps, n)};
    c.method = method_restart(first, problem, first.restart_point, first.best_oracle);
    c.method.target_accuracy = std::ldexp(eps, n);
    copies.push_back(std::move(c));
  }

  std::optional<double> threshold;
  if (trace.f_star) {
    threshold = *trace.f_star + eps;
    if (trace.f_x0 <= *threshold) {
      trace.complete = true;
      trace.time_to_eps = 0.0;
      return trace;
    }
  }

  if (options.mode == SyncMode::sequential) {
    run_sequential(copies, N, problem, options.budget, threshold, trace);
  } else if (options.threaded) {
    run_lockstep_threaded(copies, N, problem, options.budget, threshold, trace);
  } else {
    run_lockstep_serial(copies, N, problem, options.budget, threshold, trace);
  }
  return trace;
}

} // namespace parfom
