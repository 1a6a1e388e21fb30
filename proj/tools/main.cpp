// hca_lab: config-driven runner for the estimator analyses.
//
//   hca_lab run <config.json>     [--output-dir D] [--samples N] [--seed S] [--workers W]
//   hca_lab verify <config.json>  [--output-dir D] [--seed S] [--workers W]
//   hca_lab validate <mdp.json>
//   hca_lab oracle <mdp.json>     [--policy P] [--lookahead K] [--output-dir D]
//
// Exit codes: 0 ok, 2 bad input, 3 enumeration cap, 4 invariant or check failure.
// Failures print one JSON line on stderr.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "hca/errors.hpp"
#include "hca/oracle.hpp"
#include "hca/serialization.hpp"
#include "lab/config.hpp"
#include "lab/run.hpp"
#include "lab/util.hpp"
#include "lab/verify.hpp"

namespace fs = std::filesystem;
using namespace hca;
using namespace hca::lab;

namespace {

struct Flags {
  std::optional<fs::path> output_dir;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
};

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Json parse_document(const std::string& bytes, const fs::path& path) {
  try {
    return Json::parse(bytes);
  } catch (const Json::parse_error& e) {
    throw InvalidArgument("malformed config: invalid JSON in " + path.string() + ": " + e.what());
  }
}

int cmd_run(const fs::path& config_path, const Flags& flags) {
  const std::string bytes = read_bytes(config_path);
  RunConfig config = parse_run_config(parse_document(bytes, config_path), config_path.parent_path());
  RunOptions options;
  options.workers = flags.workers;
  options.config_sha256 = sha256_hex(bytes);
  if (flags.samples) {
    if (*flags.samples < 2) throw InvalidArgument("--samples must be at least 2");
    config.samples = *flags.samples;
    options.overrides["samples"] = *flags.samples;
  }
  if (flags.seed) {
    config.seed = *flags.seed;
    options.overrides["seed"] = *flags.seed;
  }
  fs::path dir;
  if (flags.output_dir) {
    dir = *flags.output_dir;
  } else if (config.output_dir) {
    dir = config.output_dir->is_relative() ? config_path.parent_path() / *config.output_dir : *config.output_dir;
  } else {
    throw InvalidArgument("no output directory: set output_dir in the config or pass --output-dir");
  }
  const OutputFiles files = execute_run(config, options);
  write_outputs(dir, files);
  Json summary{{"status", "ok"}, {"output_dir", dir.string()}, {"files", Json::array()}};
  for (const auto& [name, _] : files) summary["files"].push_back(name);
  std::cout << summary.dump() << '\n';
  return kOk;
}

int cmd_verify(const fs::path& config_path, const Flags& flags) {
  const std::string bytes = read_bytes(config_path);
  VerifyConfig config = parse_verify_config(parse_document(bytes, config_path));
  if (flags.seed) config.seed = *flags.seed;
  const VerifyResult result = run_verify(config, flags.workers);
  Json doc = lab::to_json(result);
  doc["config_sha256"] = sha256_hex(bytes);
  doc["seed"] = config.seed;
  if (flags.output_dir) {
    fs::create_directories(*flags.output_dir);
    write_json_file(*flags.output_dir / "verify.json", doc);
  }
  std::cout << doc.dump(2) << '\n';
  if (result.passed()) return kOk;
  std::string failed;
  for (const auto& c : result.checks) {
    if (c.failures > 0) failed += (failed.empty() ? "" : ", ") + lab::to_string(c.check);
  }
  std::cerr << failure_record({kInvariant, "check_failed",
                               std::to_string(result.failures.size()) + " assertion(s) failed in: " + failed})
            << '\n';
  return kInvariant;
}

int cmd_validate(const fs::path& mdp_path) {
  const ValidationReport report = validate_mdp(mdp_data_from_json(read_json_file(mdp_path)));
  Json doc{{"valid", report.ok()}, {"violations", Json::array()}};
  for (const auto& v : report.violations) {
    doc["violations"].push_back({{"kind", v.kind}, {"message", v.message}, {"index", v.index}});
  }
  std::cout << doc.dump(2) << '\n';
  if (report.ok()) return kOk;
  std::cerr << failure_record({kUsage, "invalid_model", report.summary()}) << '\n';
  return kUsage;
}

int cmd_oracle(const fs::path& mdp_path, const std::optional<fs::path>& policy_path, std::optional<int> lookahead,
               const Flags& flags) {
  const TabularMDP mdp = load_mdp(mdp_path);
  const Policy pi = policy_path ? policy_from_json(read_json_file(*policy_path))
                                : Policy::uniform(mdp.num_states(), mdp.num_actions());
  if (pi.num_states() != mdp.num_states() || pi.num_actions() != mdp.num_actions()) {
    throw InvalidArgument("policy shape does not match the MDP");
  }
  const Json doc = oracle_to_json(build_oracle(mdp, pi, lookahead.value_or(mdp.horizon())));
  if (flags.output_dir) {
    fs::create_directories(*flags.output_dir);
    write_json_file(*flags.output_dir / "oracle.json", doc);
  } else {
    std::cout << doc.dump(2) << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact and sampled analysis of hindsight advantage estimators"};
  app.require_subcommand(1);
  Flags flags;
  fs::path target;
  std::optional<fs::path> policy_path;
  std::optional<int> lookahead;

  auto add_common = [&](CLI::App* sub, bool sampling) {
    sub->add_option("--output-dir", flags.output_dir, "Directory for output files");
    sub->add_option("--seed", flags.seed, "Override the config seed");
    sub->add_option("--workers", flags.workers, "Worker threads (0 = hardware concurrency)");
    if (sampling) sub->add_option("--samples", flags.samples, "Override the sample count (sampled mode)");
  };
  CLI::App* run = app.add_subcommand("run", "Run the analyses in a config and write report files");
  run->add_option("config", target, "Run config (JSON)")->required();
  add_common(run, true);
  CLI::App* verify = app.add_subcommand("verify", "Check the estimator identities over an instance set");
  verify->add_option("config", target, "Verify config (JSON)")->required();
  add_common(verify, false);
  CLI::App* validate = app.add_subcommand("validate", "Validate an MDP document");
  validate->add_option("mdp", target, "MDP (JSON)")->required();
  CLI::App* oracle = app.add_subcommand("oracle", "Dump values, advantages and hindsight tables");
  oracle->add_option("mdp", target, "MDP (JSON)")->required();
  oracle->add_option("--policy", policy_path, "Policy (JSON); uniform if omitted");
  oracle->add_option("--lookahead", lookahead, "Largest k (default: the horizon)");
  oracle->add_option("--output-dir", flags.output_dir, "Write oracle.json here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << failure_record({kUsage, "usage", e.what()}) << '\n';
    return kUsage;
  }
  if (flags.workers == 0) flags.workers = std::max(1u, std::thread::hardware_concurrency());

  try {
    if (run->parsed()) return cmd_run(target, flags);
    if (verify->parsed()) return cmd_verify(target, flags);
    if (validate->parsed()) return cmd_validate(target);
    return cmd_oracle(target, policy_path, lookahead, flags);
  } catch (...) {
    const Failure f = classify(std::current_exception());
    std::cerr << failure_record(f) << '\n';
    return f.exit_code;
  }
}
