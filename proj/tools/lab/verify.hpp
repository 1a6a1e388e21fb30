#pragma once

#include <string>
#include <vector>

#include "lab/config.hpp"

namespace hca::lab {

/// A failed assertion, located as precisely as the check allows (-1 when
/// an index does not apply).
struct CheckFailure {
  std::string mdp_id;
  int state = -1;
  int action = -1;
  int lookahead = -1;
  std::string quantity;
  double got = 0.0;
  double bound = 0.0;
};

struct CheckSummary {
  Check check = Check::MeanEquality;
  bool skipped = false;
  std::string reason;  // why it was skipped
  std::size_t assertions = 0;
  std::size_t failures = 0;
};

struct VerifyResult {
  std::vector<std::string> instances;
  std::vector<CheckSummary> checks;  // in the configured order
  std::vector<CheckFailure> failures;

  bool passed() const { return failures.empty(); }
};

/// The instance set is the figure1 builtin (uniform policy) followed by seeded random
/// MDPs with seeded softmax policies. Independent of `workers`.
VerifyResult run_verify(const VerifyConfig& config, unsigned workers);

Json to_json(const VerifyResult& result, std::size_t max_failures_listed = 200);

}  // namespace hca::lab
