#pragma once

#include <string>
#include <vector>

#include "parfom/harness/grid.hpp"

namespace parfom::harness {

enum class CellStatus { pass, fail, unverifiable };
std::string to_string(CellStatus status);

struct CellVerdict {
  double eps = 0.0;
  std::uint64_t seed = 0;
  CellStatus status = CellStatus::unverifiable;
  std::string detail;  // for failures: the largest term of the violated bound
};

struct VerifyReport {
  std::vector<CellVerdict> cells;
  int passed = 0;
  int failed = 0;
  int unverifiable = 0;

  bool all_pass() const { return failed == 0; }
  /// 0 when nothing failed, 1 otherwise.
  int exit_code() const { return failed == 0 ? 0 : 1; }
};

/// Judges each summary against its stored bound; never re-simulates.
VerifyReport verify_bounds(const std::vector<RunSummary>& summaries);

} // namespace parfom::harness
