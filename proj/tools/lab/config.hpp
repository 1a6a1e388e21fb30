#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hca/environments.hpp"
#include "hca/estimators.hpp"
#include "hca/perturbation.hpp"
#include "hca/serialization.hpp"

namespace hca::lab {

// Run configuration. One JSON object, unknown fields rejected at every level:
//
// {
//   "environment": {"builtin": "figure1"}
//                | {"builtin": "chain", "length", "slip", "reward_at_end", "discount", "horizon"}
//                | {"builtin": "random", "num_states", "num_actions", "branching", "reward_scale",
//                   "terminal_mass", "discount", "horizon", "seed"}
//                | {"path": "model.json"},
//   "policy": "default" | "uniform" | {"softmax": [[...]]} | {"probs": [[...]]},
//   "value": "exact" | "zero" | {"values": [...]},
//   "estimators": [{"name": "MC", "N": 3}, {"name": "HCA", "K": 3}, {"name": "DELTA_HCA", "N": 3}],
//   "states": [0, ...],
//   "analyses": ["moments", "decomposition", "covariance_check", "update_variance", "perturbation_sweep"],
//   "perturbation": {"target", "mode", "epsilons": [...], "seed"},
//   "mode": "exact" | "sampled",
//   "samples": 100000, "seed": 0,
//   "step_size": 0.1,
//   "enumeration_cap": 10000000,
//   "output_dir": "out"
// }

enum class Analysis { Moments, Decomposition, CovarianceCheck, UpdateVariance, PerturbationSweep };

std::string to_string(Analysis a);

struct EnvironmentSpec {
  std::string kind;  // figure1 | chain | random | file
  std::string id;    // mdp_id used in CSV rows
  Json params;       // the raw object, kept for the report
  std::filesystem::path path;
};

struct PolicySpec {
  std::string kind = "default";  // default | uniform | softmax | probs
  Eigen::MatrixXd matrix;
};

struct ValueSpec {
  std::string kind = "exact";  // exact | zero | explicit
  Eigen::VectorXd values;
};

struct EstimatorSpec {
  EstimatorTag tag = EstimatorTag::MC;
  int depth = 1;  // N, or K for HCA
};

struct PerturbationGrid {
  PerturbTarget target = PerturbTarget::ValueFunction;
  PerturbMode mode = PerturbMode::AdditiveNoise;
  std::vector<double> epsilons;
  std::uint64_t seed = 0;
};

struct RunConfig {
  EnvironmentSpec environment;
  PolicySpec policy;
  ValueSpec value;
  std::vector<EstimatorSpec> estimators;
  std::optional<std::vector<int>> states;
  std::vector<Analysis> analyses{Analysis::Moments};
  std::optional<PerturbationGrid> perturbation;
  bool sampled = false;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  double step_size = 0.1;
  std::size_t enumeration_cap = 10'000'000;
  std::optional<std::filesystem::path> output_dir;

  bool wants(Analysis a) const;
};

/// Throws InvalidArgument ("malformed config: ...") on any schema problem.
/// Relative environment paths resolve against `base_dir`.
RunConfig parse_run_config(const Json& doc, const std::filesystem::path& base_dir = {});

// Verify configuration:
//
// {
//   "figure1": true,
//   "random_instances": 50, "seed": 2024, "max_states": 6,
//   "max_lookahead": 5,
//   "value": "exact" | "zero",
//   "random_values": 3,
//   "checks": ["mean_equality", "variance_ordering", "cross_terms", "covariance_identities",
//              "update_variance", "bayes_identity"],
//   "corrupt_hindsight": false,
//   "enumeration_cap": 10000000
// }

enum class Check { MeanEquality, VarianceOrdering, CrossTerms, CovarianceIdentities, UpdateVariance, BayesIdentity };

std::string to_string(Check c);

struct VerifyConfig {
  bool figure1 = true;
  int random_instances = 50;
  std::uint64_t seed = 2024;
  int max_states = 6;
  int max_lookahead = 5;
  bool exact_value = true;
  int random_values = 3;
  std::vector<Check> checks{Check::MeanEquality,         Check::VarianceOrdering, Check::CrossTerms,
                            Check::CovarianceIdentities, Check::UpdateVariance,   Check::BayesIdentity};
  bool corrupt_hindsight = false;
  std::size_t enumeration_cap = 10'000'000;

  bool wants(Check c) const;
};

VerifyConfig parse_verify_config(const Json& doc);

}  // namespace hca::lab
