#pragma once

#include <memory>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "hca/mdp.hpp"
#include "hca/oracle.hpp"
#include "hca/trajectory.hpp"

namespace hca {

enum class EstimatorTag { MC, HCA, DELTA_HCA };

std::string to_string(EstimatorTag tag);
/// Accepts "MC", "HCA", "DELTA_HCA" (also "dHCA"/"δHCA"). Throws InvalidArgument.
EstimatorTag parse_estimator_tag(std::string_view name);

/// Everything an estimator reads besides the trajectory.
struct EstimatorInputs {
  Policy policy;
  ValueFunction v_hat;
  std::shared_ptr<const OracleBundle> oracle;
  int lookahead = 1;   // N for MC and delta-HCA
  int hca_cutoff = 1;  // K, the truncation of the HCA reward sum
  double discount = 1.0;

  /// Inputs with K = N and the oracle's lookahead as N.
  static EstimatorInputs make(const TabularMDP& mdp, Policy policy, ValueFunction v_hat,
                              std::shared_ptr<const OracleBundle> oracle, int lookahead);

  EstimatorInputs with_value(ValueFunction v) const;
  EstimatorInputs with_lookahead(int n) const;
};

struct AdvantageEstimate {
  Eigen::VectorXd per_action;
  int t = 0;
  EstimatorTag tag = EstimatorTag::MC;
};

/// N-step Monte-Carlo advantage in TD-error form:
///   1{A_t = a} / pi(a|S_t) * sum_{k<N} gamma^k delta_{t+k}.
/// Entries for unselected actions (including pi(a|S_t) = 0) are 0.
AdvantageEstimate mc_advantage(const Trajectory& traj, int t, const EstimatorInputs& in);

/// Reward-based hindsight estimator:
///   r(S_t,a) - r(S_t) + sum_{k=1}^{K} gamma^k (p_k(a|S_t,S_{t+k}) / pi(a|S_t) - 1) R_{t+k},
/// with R_{t+k} the reward received on arrival at S_{t+k}. The sum stops at
/// absorption. Throws InvalidArgument if some pi(a|S_t) is 0.
AdvantageEstimate hca_advantage(const Trajectory& traj, int t, const EstimatorInputs& in, int cutoff);

/// TD-error hindsight estimator:
///   1{A_t = a} / pi(a|S_t) delta_t + sum_{k=1}^{N-1} gamma^k p_k(a|S_t,S_{t+k}) / pi(a|S_t) delta_{t+k}.
/// Throws InvalidArgument if some pi(a|S_t) is 0.
AdvantageEstimate delta_hca_advantage(const Trajectory& traj, int t, const EstimatorInputs& in);

/// Dispatch on tag; HCA uses in.hca_cutoff.
AdvantageEstimate estimate(EstimatorTag tag, const Trajectory& traj, int t, const EstimatorInputs& in);

/// Number of steps after t an estimator looks at.
int required_depth(EstimatorTag tag, const EstimatorInputs& in);

}  // namespace hca
