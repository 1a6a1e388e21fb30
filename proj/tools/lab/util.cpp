#include "lab/util.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include "hca/errors.hpp"
#include "hca/serialization.hpp"

namespace hca::lab {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto drain = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min<std::size_t>(std::max(1u, workers), count);
  if (n <= 1) {
    drain();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(drain);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Failure classify(const std::exception_ptr& error) {
  try {
    std::rethrow_exception(error);
  } catch (const EnumerationCapExceeded& e) {
    return {kCapExceeded, "enumeration_cap", e.what()};
  } catch (const InvalidArgument& e) {
    return {kUsage, "schema", e.what()};
  } catch (const InvalidModel& e) {
    return {kUsage, "schema", e.what()};
  } catch (const UnreachableConditioning& e) {
    return {kUsage, "schema", e.what()};
  } catch (const Json::exception& e) {
    return {kUsage, "schema", e.what()};
  } catch (const std::filesystem::filesystem_error& e) {
    return {kUsage, "io", e.what()};
  } catch (const std::exception& e) {
    return {kInvariant, "invariant", e.what()};
  } catch (...) {
    return {kInvariant, "invariant", "unknown error"};
  }
}

std::string failure_record(const Failure& f) {
  return Json{{"error", f.kind}, {"exit_code", f.exit_code}, {"message", f.message}}.dump(
      -1, ' ', false, Json::error_handler_t::replace);
}

}  // namespace hca::lab
