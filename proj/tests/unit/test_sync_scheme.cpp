#include <doctest.h>

#include <cmath>
#include <map>

#include "helpers.hpp"
#include "parfom/bounds.hpp"
#include "parfom/errors.hpp"
#include "parfom/sync_scheme.hpp"

using namespace parfom;
using parfom::testing::vec;

namespace {

ProblemInstance abs_problem() { return make_norm_power_problem(1, 1.0, 1.0, vec({0.0})); }

SyncCopy make_copy(const ProblemInstance& p, int n, double eps, const Point& x, double restart_value) {
  SyncCopy c;
  c.n = n;
  c.task = Task{restart_value, std::ldexp(eps, n)};
  c.method = method_init(MethodKind::subgrad(), p, x, std::ldexp(eps, n));
  return c;
}

Message message_at(const ProblemInstance& p, const Point& x, int sender) {
  return Message{x, evaluate(p, x), sender, 0.0};
}

int count(const EventBuffer& b, EventKind kind) {
  int k = 0;
  for (const auto& e : b.entries) k += e.event.kind == kind;
  return k;
}

bool same_events(const SchemeTrace& a, const SchemeTrace& b) {
  if (a.events.size() != b.events.size() || a.points.size() != b.points.size()) return false;
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    const auto &x = a.events[i], &y = b.events[i];
    if (x.t != y.t || x.copy != y.copy || x.kind != y.kind || x.value != y.value || x.peer != y.peer ||
        x.point_ref != y.point_ref)
      return false;
  }
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    if (a.points[i] != b.points[i]) return false;
  }
  return a.time_to_eps == b.time_to_eps && a.oracle_calls_total == b.oracle_calls_total;
}

} // namespace

TEST_CASE("task fulfillment is non-strict") {
  const Task t{10.0, 1.0};
  CHECK(t.fulfills(9.0));
  CHECK_FALSE(t.fulfills(9.0001));
  CHECK(t.fulfills(0.0));
}

TEST_CASE("run_sync returns immediately when x0 is already eps-optimal") {
  const auto tr = run_sync(abs_problem(), MethodKind::subgrad(), vec({1.0}), 1.0, 0);
  CHECK(tr.complete);
  CHECK(*tr.time_to_eps == 0.0);
  CHECK(tr.events.empty());
  CHECK(tr.oracle_calls_total == 1);
}

TEST_CASE("run_sync on |x| from 4 with eps = 1/4, N = 2 meets the theorem bound") {
  const auto p = abs_problem();
  const auto tr = run_sync(p, MethodKind::subgrad(), vec({4.0}), 0.25, 2);
  REQUIRE(tr.complete);
  const auto rep = bound_sync_theorem(*p.metadata(), 4.0, 0.25, 2, iteration_bound(*p.metadata(), MethodKind::subgrad()));
  CHECK(*tr.time_to_eps <= rep.total);
  CHECK(check_invariants(tr).ok);
}

TEST_CASE("N = -1 is a single restarted copy") {
  const auto p = abs_problem();
  const auto tr = run_sync(p, MethodKind::subgrad(), vec({4.0}), 0.25, -1);
  REQUIRE(tr.complete);
  for (const auto& e : tr.events) {
    CHECK(e.copy == -1);
    CHECK(e.kind != EventKind::send);
  }
  // Same as plain subgradient steps with eps_bar = eps/2 from 4 (no restart can beat the first hit).
  auto s = method_init(MethodKind::subgrad(), p, vec({4.0}), 0.125);
  long k = 0;
  while (s.best_value() > 0.25) {
    subgrad_step(s, p);
    ++k;
  }
  CHECK(*tr.time_to_eps == static_cast<double>(k));
}

TEST_CASE("top copy: unfulfilled task means one iteration and no message") {
  const auto p = abs_problem();
  auto c = make_copy(p, 1, 0.25, vec({4.0}), 4.0);
  EventBuffer b;
  CHECK_FALSE(sync_period_top(c, p, 0.0, b));
  CHECK(count(b, EventKind::iterate) == 1);
  CHECK(b.oracle_calls == 1);
  CHECK(c.method.current_iterate[0] == 3.5);
}

TEST_CASE("top copy: fulfilled task sends, updates and still iterates") {
  const auto p = abs_problem();
  auto c = make_copy(p, 1, 0.25, vec({4.0}), 4.0);
  EventBuffer b;
  sync_period_top(c, p, 0.0, b);  // best 3.5 now
  b.entries.clear();
  const auto msg = sync_period_top(c, p, 1.0, b);
  REQUIRE(msg);
  CHECK(msg->value() == 3.5);
  CHECK(msg->sender == 1);
  CHECK(c.task.restart_value == 3.5);
  CHECK(c.restart_count == 0);
  CHECK(count(b, EventKind::send) == 1);
  CHECK(count(b, EventKind::task_update) == 1);
  CHECK(count(b, EventKind::iterate) == 1);
  CHECK(count(b, EventKind::restart) == 0);
  // Iteration continues from the current iterate, not from a restart.
  CHECK(c.method.current_iterate[0] == 3.0);

  b.entries.clear();
  const auto second = sync_period_top(c, p, 2.0, b);
  REQUIRE(second);
  CHECK(second->value() <= msg->value() - 0.5);
}

TEST_CASE("lower copy: the three branches") {
  const auto p = abs_problem();
  SUBCASE("empty inbox, unfulfilled") {
    auto c = make_copy(p, 0, 1.0, vec({4.0}), 4.0);
    EventBuffer b;
    CHECK_FALSE(sync_period(c, p, 0.0, b));
    CHECK(count(b, EventKind::iterate) == 1);
    CHECK(count(b, EventKind::restart) == 0);
  }
  SUBCASE("inbox fulfills, own does not") {
    auto c = make_copy(p, 0, 1.0, vec({4.0}), 4.0);
    c.inbox = message_at(p, vec({2.5}), 1);
    EventBuffer b;
    const auto out = sync_period(c, p, 3.0, b);
    REQUIRE(out);
    CHECK(out->point[0] == 2.5);
    CHECK(out->sender == 0);
    CHECK(c.restart_count == 1);
    CHECK(c.method.restart_point[0] == 2.5);
    CHECK(c.task.restart_value == 2.5);
    CHECK_FALSE(c.inbox);
    CHECK(c.method.current_iterate[0] == 1.5);  // first post-restart iteration
  }
  SUBCASE("both fulfill, own smaller") {
    auto c = make_copy(p, 0, 1.0, vec({2.0}), 4.0);
    c.inbox = message_at(p, vec({2.5}), 1);
    EventBuffer b;
    const auto out = sync_period(c, p, 3.0, b);
    REQUIRE(out);
    CHECK(out->point[0] == 2.0);
  }
  SUBCASE("copy -1 restarts but never sends") {
    auto c = make_copy(p, -1, 1.0, vec({4.0}), 4.0);
    c.inbox = message_at(p, vec({1.0}), 0);
    EventBuffer b;
    CHECK_FALSE(sync_period(c, p, 0.0, b));
    CHECK(c.restart_count == 1);
    CHECK(count(b, EventKind::send) == 0);
  }
}

TEST_CASE("lower copy: ties keep the copy's own point") {
  const auto p = abs_problem();
  auto c = make_copy(p, 0, 1.0, vec({2.0}), 4.0);
  c.inbox = message_at(p, vec({-2.0}), 1);
  EventBuffer b;
  auto out = sync_period(c, p, 0.0, b);
  REQUIRE(out);
  CHECK(out->point[0] == 2.0);

  // A strictly better inbox point wins.
  c = make_copy(p, 0, 1.0, vec({2.0}), 4.0);
  c.inbox = message_at(p, vec({-1.9375}), 1);
  out = sync_period(c, p, 0.0, b);
  REQUIRE(out);
  CHECK(out->point[0] == -1.9375);
}

TEST_CASE("lock-step accounting and one-period latency") {
  const auto p = make_norm_power_problem(3, 1.0, 1.0, vec({0.5, -0.5, 1.0}));
  const double eps = std::ldexp(1.0, -7);
  const int N = default_N(eps);
  const auto tr = run_sync(p, MethodKind::subgrad(), vec({5.0, 3.0, -2.0}), eps, N);
  REQUIRE(tr.complete);
  const auto periods = static_cast<long>(*tr.time_to_eps);

  std::map<std::pair<long, int>, int> iterates;
  for (const auto& e : tr.events) {
    if (e.kind == EventKind::iterate) ++iterates[{static_cast<long>(e.t), e.copy}];
  }
  for (long t = 1; t <= periods; ++t) {
    for (int n = -1; n <= N; ++n) CHECK(iterates[{t, n}] == 1);
  }

  // Each received restart point was sent in a strictly earlier period.
  int matched = 0;
  for (const auto& r : tr.events) {
    if (r.kind != EventKind::restart) continue;
    const Point& rp = tr.points[r.point_ref];
    for (const auto& s : tr.events) {
      if (s.kind == EventKind::send && s.copy == r.copy + 1 && tr.points[s.point_ref] == rp && s.t < r.t) {
        CHECK(r.t >= s.t + 1.0);
        ++matched;
        break;
      }
    }
    for (const auto& s : tr.events) {
      if (s.kind == EventKind::send && s.copy == r.copy + 1 && tr.points[s.point_ref] == rp) CHECK(s.t < r.t);
    }
  }
  CHECK(matched > 0);
  CHECK(check_invariants(tr).ok);

  // Total work: the shared initial call plus one call per copy per period.
  CHECK(tr.oracle_calls_total == 1 + periods * (N + 2));
}

TEST_CASE("threaded executor reproduces the serial trace") {
  for (auto method : {MethodTag::subgrad, MethodTag::accel}) {
    const auto p = method == MethodTag::subgrad ? make_piecewise_max_problem(4, 9, 5)
                                                : make_random_least_squares_problem(8, 5, 5, 5);
    const MethodKind kind = method == MethodTag::subgrad ? MethodKind::subgrad()
                                                         : MethodKind::accel(*p.metadata()->smoothness);
    const double eps = 1e-3;
    const Point x0 = Point::Constant(p.dimension(), 3.0);
    SyncOptions serial, threaded;
    threaded.threaded = true;
    const auto a = run_sync(p, kind, x0, eps, default_N(eps), serial);
    const auto b = run_sync(p, kind, x0, eps, default_N(eps), threaded);
    CHECK(a.complete);
    CHECK(same_events(a, b));
    serial.budget = threaded.budget = 7;
    CHECK(same_events(run_sync(p, kind, x0, eps, default_N(eps), serial), run_sync(p, kind, x0, eps, default_N(eps), threaded)));
  }
}

TEST_CASE("sequential mode") {
  const auto p = abs_problem();
  const double eps = 1.0 / 64;
  const int N = default_N(eps);
  SyncOptions seq;
  seq.mode = SyncMode::sequential;
  const auto tr = run_sync(p, MethodKind::subgrad(), vec({4.0}), eps, N, seq);
  REQUIRE(tr.complete);
  CHECK(check_invariants(tr).ok);

  // Slots cycle N, N-1, ..., -1.
  long slot = 0;
  for (const auto& e : tr.events) {
    if (e.kind != EventKind::iterate) continue;
    const long s = static_cast<long>(e.t) - 1;
    CHECK(s == slot);
    CHECK(e.copy == N - static_cast<int>(s % (N + 2)));
    ++slot;
  }
  // Messages are readable within the same sweep.
  bool same_sweep = false;
  for (const auto& r : tr.events) {
    if (r.kind != EventKind::restart) continue;
    for (const auto& s : tr.events) {
      if (s.kind == EventKind::send && s.copy == r.copy + 1 && tr.points[s.point_ref] == tr.points[r.point_ref] &&
          r.t == s.t + 1.0)
        same_sweep = true;
    }
  }
  CHECK(same_sweep);
  const auto rep = bound_sync_theorem(*p.metadata(), 4.0, eps, N, iteration_bound(*p.metadata(), MethodKind::subgrad()));
  CHECK(*tr.time_to_eps <= (N + 2) * rep.total);
}

TEST_CASE("budget exhaustion leaves an incomplete trace") {
  SyncOptions o;
  o.budget = 3;
  const auto tr = run_sync(abs_problem(), MethodKind::subgrad(), vec({40.0}), 0.01, 5, o);
  CHECK_FALSE(tr.complete);
  CHECK_FALSE(tr.time_to_eps);
  CHECK(tr.end_time == 3.0);
}

TEST_CASE("unknown f* runs to the budget") {
  const auto base = abs_problem();
  const ProblemInstance bare(1, base.objective_ptr(), AllSpace{});
  SyncOptions o;
  o.budget = 50;
  const auto tr = run_sync(bare, MethodKind::subgrad(), vec({4.0}), 0.25, 2, o);
  CHECK_FALSE(tr.complete);
  CHECK(tr.end_time == 50.0);
  CHECK(check_invariants(tr).ok);
}

TEST_CASE("run_sync rejects bad parameters") {
  CHECK_THROWS_AS(run_sync(abs_problem(), MethodKind::subgrad(), vec({4.0}), 0.0, 0), ParameterError);
  CHECK_THROWS_AS(run_sync(abs_problem(), MethodKind::subgrad(), vec({4.0}), 1.0, -2), ParameterError);
}

TEST_CASE("sync runs are deterministic") {
  const auto p = make_piecewise_max_problem(3, 6, 9);
  const auto a = run_sync(p, MethodKind::subgrad(), vec({2.0, -1.0, 3.0}), 1e-3, 10);
  const auto b = run_sync(p, MethodKind::subgrad(), vec({2.0, -1.0, 3.0}), 1e-3, 10);
  CHECK(same_events(a, b));
}
