#include "parfom/trace.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace parfom {

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::iterate: return "iterate";
    case EventKind::restart: return "restart";
    case EventKind::send: return "send";
    case EventKind::task_update: return "task-update";
    case EventKind::arrival: return "arrival";
    case EventKind::pause_begin: return "pause-begin";
    case EventKind::pause_end: return "pause-end";
    case EventKind::epoch_begin: return "epoch-begin";
    case EventKind::converged: return "converged";
  }
  return "unknown";
}

std::int64_t SchemeTrace::store_point(const Point& x) {
  points.push_back(x);
  return static_cast<std::int64_t>(points.size()) - 1;
}

void SchemeTrace::log(double t, int copy, EventKind kind, double value, int peer, std::int64_t point_ref) {
  events.push_back(TraceEvent{t, copy, kind, value, peer, point_ref});
}

std::vector<int> SchemeTrace::restarts_per_copy() const {
  std::vector<int> counts(num_copies(), 0);
  for (const auto& e : events) {
    if (e.kind == EventKind::restart) ++counts[e.copy + 1];
  }
  return counts;
}

std::vector<Point> SchemeTrace::restart_points(int copy) const {
  std::vector<Point> out;
  for (const auto& e : events) {
    if (e.kind == EventKind::restart && e.copy == copy) out.push_back(points.at(e.point_ref));
  }
  return out;
}

std::vector<double> SchemeTrace::restart_values(int copy) const {
  std::vector<double> out;
  for (const auto& e : events) {
    if (e.kind == EventKind::restart && e.copy == copy) out.push_back(e.value);
  }
  return out;
}

std::vector<double> SchemeTrace::update_values(int copy) const {
  std::vector<double> out{f_x0};
  for (const auto& e : events) {
    if (e.kind == EventKind::task_update && e.copy == copy) out.push_back(e.value);
  }
  return out;
}

std::optional<double> SchemeTrace::first_time_to(double threshold) const {
  std::optional<double> best;
  for (const auto& e : events) {
    if (e.kind == EventKind::iterate && e.value <= threshold && (!best || e.t < *best)) best = e.t;
  }
  return best;
}

void InvariantReport::fail(std::string message) {
  ok = false;
  violations.push_back(std::move(message));
}

InvariantReport check_invariants(const SchemeTrace& trace) {
  InvariantReport rep;
  const int copies = trace.num_copies();
  auto where = [](int n) {
    std::ostringstream s;
    s << "copy " << n << ": ";
    return s.str();
  };

  for (int n = -1; n <= trace.N; ++n) {
    const double dec = std::ldexp(trace.eps, n);
    const auto updates = trace.update_values(n);
    for (std::size_t i = 1; i < updates.size(); ++i) {
      if (!(updates[i] <= updates[i - 1] - dec)) {
        std::ostringstream s;
        s << where(n) << "update " << i << " decreased by " << updates[i - 1] - updates[i] << " < " << dec;
        rep.fail(s.str());
      }
    }
  }

  std::vector<int> sends(copies, 0);
  std::vector<int> sends_after_near(copies, -1);  // -1: no near-optimal send yet
  for (const auto& e : trace.events) {
    if (e.kind == EventKind::restart && e.copy == trace.N) rep.fail(where(e.copy) + "top copy restarted");
    if (e.kind == EventKind::arrival && e.copy == trace.N) rep.fail(where(e.copy) + "top copy received a message");
    if (e.kind == EventKind::send || e.kind == EventKind::arrival) {
      const int sender = e.kind == EventKind::send ? e.copy : e.peer;
      const int receiver = e.kind == EventKind::send ? e.peer : e.copy;
      if (sender != receiver + 1 || receiver < -1) {
        std::ostringstream s;
        s << "message from " << sender << " to " << receiver;
        rep.fail(s.str());
      }
    }
    if (e.kind != EventKind::send) continue;
    const int i = e.copy + 1;
    ++sends[i];
    if (!trace.f_star) continue;
    if (sends_after_near[i] >= 0) {
      if (++sends_after_near[i] > 1) rep.fail(where(e.copy) + "more than one send after a near-optimal send");
    } else if (e.value < *trace.f_star + 2.0 * std::ldexp(trace.eps, e.copy)) {
      sends_after_near[i] = 0;
    }
  }

  if (trace.f_star) {
    const double gap = trace.f_x0 - *trace.f_star;
    for (int n = -1; n <= trace.N; ++n) {
      const double cap = std::ceil(gap / std::ldexp(trace.eps, n));
      if (sends[n + 1] > cap) {
        std::ostringstream s;
        s << where(n) << sends[n + 1] << " messages exceed the cap " << cap;
        rep.fail(s.str());
      }
    }
  }
  return rep;
}

namespace {

nlohmann::json number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

} // namespace

nlohmann::json trace_summary(const SchemeTrace& trace) {
  nlohmann::json s;
  s["kind"] = "summary";
  s["eps"] = trace.eps;
  s["N"] = trace.N;
  s["periods"] = trace.end_time;
  s["oracle_calls_total"] = trace.oracle_calls_total;
  s["restarts_per_copy"] = trace.restarts_per_copy();
  s["time_to_eps"] = trace.time_to_eps ? nlohmann::json(*trace.time_to_eps) : nlohmann::json(nullptr);
  s["complete"] = trace.complete;
  return s;
}

void write_trace_jsonl(const SchemeTrace& trace, std::ostream& out, const nlohmann::json& extra) {
  for (const auto& e : trace.events) {
    nlohmann::json j;
    j["t"] = e.t;
    j["copy"] = e.copy;
    j["kind"] = to_string(e.kind);
    j["value"] = number_or_null(e.value);
    if (e.peer != -2) j["peer"] = e.peer;
    out << j.dump() << '\n';
  }
  nlohmann::json s = trace_summary(trace);
  for (const auto& [k, v] : extra.items()) s[k] = v;
  out << s.dump() << '\n';
}

} // namespace parfom
