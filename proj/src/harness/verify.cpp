#include "parfom/harness/verify.hpp"

#include <sstream>

namespace parfom::harness {

std::string to_string(CellStatus status) {
  switch (status) {
    case CellStatus::pass: return "pass";
    case CellStatus::fail: return "fail";
    case CellStatus::unverifiable: return "unverifiable";
  }
  return "unknown";
}

VerifyReport verify_bounds(const std::vector<RunSummary>& summaries) {
  VerifyReport report;
  for (const auto& s : summaries) {
    CellVerdict v;
    v.eps = s.eps;
    v.seed = s.seed;
    std::ostringstream detail;
    if (!s.error.empty()) {
      v.status = CellStatus::fail;
      detail << "run failed: " << s.error;
    } else if (!s.invariants_ok) {
      v.status = CellStatus::fail;
      detail << "trace invariant violated";
      if (!s.invariant_violations.empty()) detail << ": " << s.invariant_violations.front();
    } else if (!s.bound_theorem) {
      v.status = CellStatus::unverifiable;
      detail << "no bound (metadata missing)";
    } else if (s.time_to_eps) {
      const bool ok = *s.time_to_eps <= *s.bound_theorem;
      v.status = ok ? CellStatus::pass : CellStatus::fail;
      detail << "measured " << *s.time_to_eps << (ok ? " <= " : " > ") << "bound " << *s.bound_theorem;
    } else if (s.compliant && !*s.compliant) {
      v.status = CellStatus::fail;
      detail << "eps not reached before the bound " << *s.bound_theorem;
    } else {
      v.status = CellStatus::unverifiable;
      detail << "budget ended before eps and before the bound";
    }
    if (v.status == CellStatus::fail && s.theorem_report && !s.theorem_report->terms.empty()) {
      const BoundTerm& t = s.theorem_report->dominant_term();
      detail << "; largest term " << t.label << " = " << t.value;
    }
    v.detail = detail.str();
    switch (v.status) {
      case CellStatus::pass: ++report.passed; break;
      case CellStatus::fail: ++report.failed; break;
      case CellStatus::unverifiable: ++report.unverifiable; break;
    }
    report.cells.push_back(std::move(v));
  }
  return report;
}

} // namespace parfom::harness
