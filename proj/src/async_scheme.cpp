#include "parfom/async_scheme.hpp"

#include <cmath>
#include <limits>
#include <tuple>

#include "parfom/errors.hpp"

namespace parfom {

void DelayModel::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (transit == Transit::single_server) {
    if (!positive(service_time)) throw ParameterError("single-server service time must be positive");
    if (!positive(kappa)) throw ParameterError("kappa must be positive");
  } else if (!positive(tau_transit)) {
    throw ParameterError("tau_transit must be positive");
  }
  if (!positive(tau_pause)) throw ParameterError("tau_pause must be positive");
}

double DelayModel::effective_tau_transit(int N) const {
  if (transit != Transit::single_server) return tau_transit;
  // Worst case: one queued message per other sender plus the one in service.
  return kappa * (N + 2.0) * service_time;
}

nlohmann::json DelayModel::to_json() const {
  nlohmann::json j;
  switch (transit) {
    case Transit::deterministic: j["transit"] = "deterministic"; j["tau_transit"] = tau_transit; break;
    case Transit::uniform: j["transit"] = "uniform"; j["tau_transit"] = tau_transit; break;
    case Transit::single_server:
      j["transit"] = "single-server";
      j["service_time"] = service_time;
      j["kappa"] = kappa;
      break;
  }
  j["pause"] = pause == Pause::deterministic ? "deterministic" : "uniform";
  j["tau_pause"] = tau_pause;
  j["seed"] = seed;
  return j;
}

bool AsyncEvent::operator>(const AsyncEvent& other) const {
  return std::make_tuple(time, static_cast<int>(kind), seq) >
         std::make_tuple(other.time, static_cast<int>(other.kind), other.seq);
}

bool ServerQueue::enqueue(Message message, int receiver) {
  for (auto it = items_.begin(); it != items_.end(); ++it) {
    if (it->message.sender == message.sender) {
      items_.erase(it);
      break;
    }
  }
  items_.push_back(Item{std::move(message), receiver});
  return !busy_;
}

std::optional<ServerQueue::Item> ServerQueue::pop() {
  if (items_.empty()) return std::nullopt;
  Item item = std::move(items_.front());
  items_.pop_front();
  return item;
}

AsyncSimulator::AsyncSimulator(const ProblemInstance& problem, const MethodKind& kind, const Point& x0,
                               double eps, int N, DelayModel delays, AsyncOptions options)
    : problem_(problem), eps_(eps), N_(N), delays_(delays), options_(options), rng_(delays.seed) {
  if (!(eps > 0.0)) throw ParameterError("run_async: eps must be positive");
  if (N < -1) throw ParameterError("run_async: N must be >= -1");
  delays_.validate();

  trace_.eps = eps;
  trace_.N = N;
  if (problem.metadata()) trace_.f_star = problem.metadata()->f_star;

  const MethodState first = method_init(kind, problem, x0, std::ldexp(eps, -1));
  trace_.oracle_calls_total = 1;
  trace_.f_x0 = first.best_value();
  if (trace_.f_star && options_.stop_at_eps) threshold_ = *trace_.f_star + eps;

  copies_.reserve(N + 2);
  for (int n = -1; n <= N; ++n) {
    AsyncCopy c;
    c.n = n;
    c.task = Task{trace_.f_x0, std::ldexp(eps, n)};
    c.method = method_restart(first, problem, first.restart_point, first.best_oracle);
    c.method.target_accuracy = std::ldexp(eps, n);
    c.restart_point = first.restart_point;
    copies_.push_back(std::move(c));
  }

  if (threshold_ && trace_.f_x0 <= *threshold_) {
    trace_.complete = true;
    trace_.time_to_eps = 0.0;
    finished_ = true;
    return;
  }
  // All copies start at time zero; nothing is sent then.
  for (int n = N; n >= -1; --n) start_step(copies_[n + 1]);
}

void AsyncSimulator::schedule(double time, AsyncEventKind kind, int copy, std::uint64_t token,
                              std::optional<Message> message, bool via_server) {
  queue_.push(AsyncEvent{time, kind, seq_++, copy, token, std::move(message), via_server});
}

double AsyncSimulator::sample_pause() {
  if (delays_.pause == DelayModel::Pause::deterministic) return delays_.tau_pause;
  return delays_.tau_pause * rng_.uniform_open_closed();
}

void AsyncSimulator::start_step(AsyncCopy& c) {
  c.phase = CopyPhase::iterating;
  if (c.step) {
    // Resume a suspended step.
    c.step->completes_at = now_ + c.step->remaining;
    c.step->running = true;
    c.step_token = next_token_++;
    schedule(c.step->completes_at, AsyncEventKind::step_complete, c.n, c.step_token);
    return;
  }
  if (c.method.converged) {
    c.phase = CopyPhase::idle;
    return;
  }
  InFlightStep s;
  s.after = c.method;
  s.outcome = method_step(s.after, problem_);
  if (s.outcome.oracle_calls == 0) {
    c.method = std::move(s.after);
    c.phase = CopyPhase::idle;
    trace_.log(now_, c.n, EventKind::converged, c.method.current_oracle.value);
    return;
  }
  trace_.oracle_calls_total += s.outcome.oracle_calls;
  s.remaining = static_cast<double>(s.outcome.oracle_calls);
  s.completes_at = now_ + s.remaining;
  s.running = true;
  c.step_token = next_token_++;
  schedule(s.completes_at, AsyncEventKind::step_complete, c.n, c.step_token);
  c.step = std::move(s);
}

void AsyncSimulator::send(AsyncCopy& c, const Message& message) {
  trace_.log(now_, c.n, EventKind::send, message.value(), c.n - 1, trace_.store_point(message.point));
  if (delays_.transit == DelayModel::Transit::single_server) {
    if (server_.enqueue(message, c.n - 1)) start_service();
    return;
  }
  double transit = delays_.tau_transit;
  if (delays_.transit == DelayModel::Transit::uniform) transit *= rng_.uniform_open_closed();
  schedule(now_ + transit, AsyncEventKind::arrival, c.n - 1, 0, message);
}

void AsyncSimulator::start_service() {
  auto item = server_.pop();
  if (!item) {
    server_.set_busy(false);
    return;
  }
  server_.set_busy(true);
  schedule(now_ + delays_.service_time, AsyncEventKind::arrival, item->receiver, 0, std::move(item->message), true);
}

void AsyncSimulator::on_step_complete(AsyncCopy& c) {
  InFlightStep s = std::move(*c.step);
  c.step.reset();
  c.method = std::move(s.after);
  trace_.log(now_, c.n, EventKind::iterate, s.outcome.new_value);
  if (threshold_ && s.outcome.new_value <= *threshold_) {
    trace_.complete = true;
    trace_.time_to_eps = now_;
    finished_ = true;
    return;
  }

  const double best = c.method.best_value();
  if (!c.task.fulfills(best)) {
    start_step(c);
    return;
  }
  Message found{c.method.best_point, c.method.best_oracle, c.n, now_};
  if (c.n == N_) {
    // The top copy reports and keeps going without restarting.
    c.task.restart_value = best;
    trace_.log(now_, c.n, EventKind::task_update, best);
    if (c.n > -1) send(c, found);
    start_step(c);
    return;
  }
  c.phase = CopyPhase::epoch_pending;
  c.epoch_point = std::move(found);
  c.epoch_token = next_token_++;
  schedule(now_, AsyncEventKind::epoch_begin, c.n, c.epoch_token);
}

void AsyncSimulator::begin_pause(AsyncCopy& c, Message message, PauseMode mode) {
  c.phase = CopyPhase::paused;
  c.pause_mode = mode;
  c.pause_candidate = std::move(message);
  c.pause_deadline = now_ + sample_pause();
  c.pause_token = next_token_++;
  trace_.log(now_, c.n, EventKind::pause_begin, c.pause_candidate->value());
  schedule(c.pause_deadline, AsyncEventKind::pause_end, c.n, c.pause_token);
}

void AsyncSimulator::on_arrival(AsyncCopy& c, Message message) {
  ++c.messages_received;
  trace_.log(now_, c.n, EventKind::arrival, message.value(), message.sender);
  switch (c.phase) {
    case CopyPhase::iterating:
      if (c.step && c.step->running) {
        c.step->remaining = c.step->completes_at - now_;
        c.step->running = false;
        c.step_token = 0;  // cancels the pending completion
      }
      begin_pause(c, std::move(message), PauseMode::mid_epoch);
      break;
    case CopyPhase::idle:
      begin_pause(c, std::move(message), PauseMode::mid_epoch);
      break;
    case CopyPhase::paused:
      // Overwrite: the old pause is cancelled and a new one begins.
      begin_pause(c, std::move(message), c.pause_mode);
      break;
    case CopyPhase::epoch_pending:
      c.epoch_token = 0;
      begin_pause(c, std::move(message), PauseMode::epoch_start);
      break;
  }
}

void AsyncSimulator::on_pause_end(AsyncCopy& c) {
  Message candidate = std::move(*c.pause_candidate);
  c.pause_candidate.reset();
  trace_.log(now_, c.n, EventKind::pause_end, candidate.value());
  if (c.pause_mode == PauseMode::epoch_start) {
    Message chosen = candidate.value() < c.epoch_point->value() ? std::move(candidate) : *c.epoch_point;
    begin_epoch(c, chosen);
    return;
  }
  if (c.task.fulfills(candidate.value())) {
    c.phase = CopyPhase::epoch_pending;
    c.epoch_point = std::move(candidate);
    c.epoch_token = next_token_++;
    schedule(now_, AsyncEventKind::epoch_begin, c.n, c.epoch_token);
    return;
  }
  start_step(c);
}

void AsyncSimulator::begin_epoch(AsyncCopy& c, const Message& point) {
  c.epoch_point.reset();
  c.step.reset();  // unspent work of an interrupted step is discarded
  c.step_token = 0;
  ++c.epoch_index;
  trace_.log(now_, c.n, EventKind::epoch_begin, point.value());
  c.task.restart_value = point.value();
  c.method = method_restart(c.method, problem_, point.point, point.oracle);
  c.restart_point = point.point;
  trace_.log(now_, c.n, EventKind::restart, point.value(), -2, trace_.store_point(point.point));
  trace_.log(now_, c.n, EventKind::task_update, point.value());
  if (c.n > -1) send(c, Message{point.point, point.oracle, c.n, now_});
  start_step(c);
}

void AsyncSimulator::inject_message(int receiver, Message message, double time) {
  if (receiver < -1 || receiver >= N_) throw ContractViolation("inject_message: receiver must lie in [-1, N)");
  if (time < now_) throw ContractViolation("inject_message: time is in the past");
  schedule(time, AsyncEventKind::arrival, receiver, 0, std::move(message));
}

bool AsyncSimulator::process_next() {
  while (!finished_) {
    if (queue_.empty()) {
      finished_ = true;
      break;
    }
    AsyncEvent ev = queue_.top();
    if (ev.time > options_.budget) {
      finished_ = true;
      break;
    }
    queue_.pop();
    AsyncCopy& c = copies_[ev.copy + 1];
    const bool live = ev.kind == AsyncEventKind::arrival ||
                      (ev.kind == AsyncEventKind::step_complete && ev.token == c.step_token) ||
                      (ev.kind == AsyncEventKind::pause_end && ev.token == c.pause_token) ||
                      (ev.kind == AsyncEventKind::epoch_begin && ev.token == c.epoch_token);
    if (!live) continue;
    now_ = ev.time;
    trace_.end_time = now_;
    switch (ev.kind) {
      case AsyncEventKind::step_complete:
        c.step_token = 0;
        on_step_complete(c);
        break;
      case AsyncEventKind::arrival:
        if (ev.via_server) start_service();
        on_arrival(c, std::move(*ev.message));
        break;
      case AsyncEventKind::pause_end:
        c.pause_token = 0;
        on_pause_end(c);
        break;
      case AsyncEventKind::epoch_begin: {
        c.epoch_token = 0;
        const Message point = *c.epoch_point;
        begin_epoch(c, point);
        break;
      }
    }
    return !finished_;
  }
  return false;
}

SchemeTrace AsyncSimulator::run() {
  while (process_next()) {
  }
  return trace_;
}

SchemeTrace run_async(const ProblemInstance& problem, const MethodKind& kind, const Point& x0, double eps, int N,
                      const DelayModel& delays, const AsyncOptions& options) {
  AsyncSimulator sim(problem, kind, x0, eps, N, delays, options);
  return sim.run();
}

} // namespace parfom
