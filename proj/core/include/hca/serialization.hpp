#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hca/analysis.hpp"
#include "hca/mdp.hpp"
#include "hca/oracle.hpp"
#include "hca/trajectory.hpp"

namespace hca {

using Json = nlohmann::json;

/// Shortest decimal that parses back to the same double.
std::string format_double(double x);

// MDP documents: num_states, num_actions, discount, horizon, terminal,
// transition[s][a][s'], reward[s][a][s']. Unknown fields are rejected.
Json mdp_to_json(const MdpData& data);
inline Json mdp_to_json(const TabularMDP& mdp) { return mdp_to_json(mdp.data()); }
/// Structural parse only; validate with validate_mdp or TabularMDP.
MdpData mdp_data_from_json(const Json& doc);
TabularMDP mdp_from_json(const Json& doc);

// Policy documents: num_states, num_actions, probs[s][a].
Json policy_to_json(const Policy& policy);
Policy policy_from_json(const Json& doc);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& doc);
TabularMDP load_mdp(const std::filesystem::path& path);
void save_mdp(const std::filesystem::path& path, const TabularMDP& mdp);

/// Oracle export. Masked hindsight slots are null.
Json oracle_to_json(const OracleBundle& bundle);

Json to_json(const MomentReport& report);
Json to_json(const DecompositionReport& report);
Json to_json(const CovarianceCheck& check);
Json to_json(const UpdateVarianceReport& report);

/// {"start": s, "steps": [[a, r, s'], ...], "prob": p}; "prob" only when given.
std::string trajectory_to_jsonl(const Trajectory& traj, std::optional<double> probability = {});
void write_trajectory_jsonl(std::ostream& out, std::span<const WeightedTrajectory> paths);
/// Absorption is recovered from the MDP's terminal flags.
std::pair<Trajectory, std::optional<double>> trajectory_from_jsonl(const std::string& line, const TabularMDP& mdp);

/// One flat row per statistic, for plotting.
struct MomentCsvRow {
  std::string mdp_id;
  int state = 0;
  int action = 0;
  int lookahead = 0;
  std::string estimator;
  std::string statistic;
  double value = 0.0;
  std::optional<double> stderr_value;
};

/// Rows for mean and variance of every action, plus covariance entries.
std::vector<MomentCsvRow> moment_csv_rows(const std::string& mdp_id, const MomentReport& report);
/// Header: mdp_id,s,a,N,estimator,statistic,value,stderr
void write_moment_csv(std::ostream& out, std::span<const MomentCsvRow> rows);

}  // namespace hca
