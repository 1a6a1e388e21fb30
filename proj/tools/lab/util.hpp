#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <string>
#include <string_view>

namespace hca::lab {

inline constexpr const char* kToolName = "hca_lab";
inline constexpr const char* kToolVersion = "0.1.0";

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);

/// Runs body(i) for i in [0, count) on up to `workers` threads. Every index
/// runs even if some throw; the exception of the lowest failing index is
/// rethrown, so failures do not depend on scheduling.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body);

enum ExitCode : int { kOk = 0, kUsage = 2, kCapExceeded = 3, kInvariant = 4 };

struct Failure {
  int exit_code = kInvariant;
  std::string kind;  // schema | enumeration_cap | invariant | io
  std::string message;
};

/// Maps an in-flight exception onto the exit-code taxonomy.
Failure classify(const std::exception_ptr& error);

/// One-line JSON record for stderr.
std::string failure_record(const Failure& f);

}  // namespace hca::lab
