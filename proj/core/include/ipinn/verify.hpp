#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ipinn {

struct CriterionResult {
  std::string id;      // stable identifier, e.g. "gradient-check"
  bool pass = false;
  std::string detail;  // measured values and the pinned tolerance
  std::int64_t wall_ms = 0;
};

struct VerifyReport {
  std::string suite;
  std::vector<CriterionResult> results;

  bool all_pass() const;
};

// Suites: autodiff, oracles, bias, lintd, endtoend.
std::vector<std::string> verify_suites();

// Runs one suite; scratch artifacts go under work_dir. Throws UsageError for
// an unknown suite name.
VerifyReport run_verify_suite(const std::string& suite, const std::string& work_dir);

// One "PASS"/"FAIL" line per criterion with measured values and wall time.
void print_report(const VerifyReport& report, std::ostream& out);

}  // namespace ipinn
