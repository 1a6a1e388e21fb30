#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lab/config.hpp"

namespace hca::lab {

struct RunOptions {
  unsigned workers = 1;
  std::string config_sha256;
  Json overrides = Json::object();  // command-line flags that changed the config
};

/// File name and contents, in the order they are written.
using OutputFiles = std::vector<std::pair<std::string, std::string>>;

/// Computes every requested cell and renders report.json, the CSV tables and
/// manifest.json in memory. Nothing touches the disk, so a failure leaves no
/// partial output. The result does not depend on `workers`.
OutputFiles execute_run(const RunConfig& config, const RunOptions& options);

/// Creates `dir` if needed and writes the files.
void write_outputs(const std::filesystem::path& dir, const OutputFiles& files);

}  // namespace hca::lab
