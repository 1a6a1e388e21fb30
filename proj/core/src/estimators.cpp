#include "hca/estimators.hpp"

#include <utility>

#include "hca/errors.hpp"

namespace hca {
namespace {

void require_time(const Trajectory& traj, int t) {
  if (t < 0 || t >= traj.effective_length()) {
    throw InvalidArgument("time index " + std::to_string(t) + " outside the trajectory (length " +
                          std::to_string(traj.effective_length()) + ")");
  }
}

const OracleBundle& require_oracle(const EstimatorInputs& in) {
  if (!in.oracle) throw InvalidArgument("estimator inputs carry no oracle bundle");
  return *in.oracle;
}

void require_full_support(const EstimatorInputs& in, int s, const char* name) {
  for (int a = 0; a < in.policy.num_actions(); ++a) {
    if (in.policy(s, a) <= 0.0) {
      throw InvalidArgument(std::string(name) + " is undefined when pi(" + std::to_string(a) + "|" +
                            std::to_string(s) + ") = 0");
    }
  }
}

}  // namespace

std::string to_string(EstimatorTag tag) {
  switch (tag) {
    case EstimatorTag::MC: return "MC";
    case EstimatorTag::HCA: return "HCA";
    case EstimatorTag::DELTA_HCA: return "DELTA_HCA";
  }
  return "?";
}

EstimatorTag parse_estimator_tag(std::string_view name) {
  if (name == "MC") return EstimatorTag::MC;
  if (name == "HCA") return EstimatorTag::HCA;
  if (name == "DELTA_HCA" || name == "dHCA" || name == "δHCA") return EstimatorTag::DELTA_HCA;
  throw InvalidArgument("unknown estimator '" + std::string(name) + "'");
}

EstimatorInputs EstimatorInputs::make(const TabularMDP& mdp, Policy policy, ValueFunction v_hat,
                                      std::shared_ptr<const OracleBundle> oracle, int lookahead) {
  if (lookahead < 1) throw InvalidArgument("estimator lookahead must be at least 1");
  return EstimatorInputs{std::move(policy), std::move(v_hat), std::move(oracle), lookahead, lookahead,
                         mdp.discount()};
}

EstimatorInputs EstimatorInputs::with_value(ValueFunction v) const {
  EstimatorInputs out = *this;
  out.v_hat = std::move(v);
  return out;
}

EstimatorInputs EstimatorInputs::with_lookahead(int n) const {
  if (n < 1) throw InvalidArgument("estimator lookahead must be at least 1");
  EstimatorInputs out = *this;
  out.lookahead = n;
  out.hca_cutoff = n;
  return out;
}

AdvantageEstimate mc_advantage(const Trajectory& traj, int t, const EstimatorInputs& in) {
  require_time(traj, t);
  if (in.lookahead < 1) throw InvalidArgument("estimator lookahead must be at least 1");
  const int s = traj.state(t);
  const int chosen = traj.action(t);
  double sum = 0.0;
  double weight = 1.0;
  for (int k = 0; k < in.lookahead; ++k) {
    sum += weight * td_error(traj, in.v_hat, in.discount, t + k);
    weight *= in.discount;
  }
  AdvantageEstimate out{Eigen::VectorXd::Zero(in.policy.num_actions()), t, EstimatorTag::MC};
  out.per_action(chosen) = sum / in.policy(s, chosen);
  return out;
}

AdvantageEstimate hca_advantage(const Trajectory& traj, int t, const EstimatorInputs& in, int cutoff) {
  require_time(traj, t);
  const OracleBundle& oracle = require_oracle(in);
  if (cutoff < 1) throw InvalidArgument("HCA cutoff must be at least 1");
  if (cutoff > oracle.hindsight.lookahead()) {
    throw InvalidArgument("HCA cutoff " + std::to_string(cutoff) + " exceeds the hindsight table lookahead " +
                          std::to_string(oracle.hindsight.lookahead()));
  }
  const int s = traj.state(t);
  require_full_support(in, s, "HCA advantage");
  const int num_actions = in.policy.num_actions();

  AdvantageEstimate out{Eigen::VectorXd::Zero(num_actions), t, EstimatorTag::HCA};
  for (int a = 0; a < num_actions; ++a) out.per_action(a) = oracle.r_sa(s, a) - oracle.r_s(s);

  double weight = 1.0;
  for (int k = 1; k <= cutoff; ++k) {
    weight *= in.discount;
    if (traj.absorbed() && t + k > traj.effective_length()) break;
    const double r = traj.reward(t + k);
    const int later = traj.state(t + k);
    for (int a = 0; a < num_actions; ++a) {
      const double ratio = oracle.hindsight.at(k, s, later, a) / in.policy(s, a);
      out.per_action(a) += weight * (ratio - 1.0) * r;
    }
  }
  return out;
}

AdvantageEstimate delta_hca_advantage(const Trajectory& traj, int t, const EstimatorInputs& in) {
  require_time(traj, t);
  const OracleBundle& oracle = require_oracle(in);
  if (in.lookahead < 1) throw InvalidArgument("estimator lookahead must be at least 1");
  if (in.lookahead - 1 > oracle.hindsight.lookahead()) {
    throw InvalidArgument("lookahead " + std::to_string(in.lookahead) + " needs hindsight up to k = " +
                          std::to_string(in.lookahead - 1));
  }
  const int s = traj.state(t);
  require_full_support(in, s, "delta-HCA advantage");
  const int num_actions = in.policy.num_actions();
  const int chosen = traj.action(t);

  AdvantageEstimate out{Eigen::VectorXd::Zero(num_actions), t, EstimatorTag::DELTA_HCA};
  out.per_action(chosen) = td_error(traj, in.v_hat, in.discount, t) / in.policy(s, chosen);

  double weight = 1.0;
  for (int k = 1; k < in.lookahead; ++k) {
    weight *= in.discount;
    const double delta = td_error(traj, in.v_hat, in.discount, t + k);
    if (traj.absorbed() && t + k >= traj.effective_length()) continue;
    const int later = traj.state(t + k);
    for (int a = 0; a < num_actions; ++a) {
      out.per_action(a) += weight * oracle.hindsight.at(k, s, later, a) / in.policy(s, a) * delta;
    }
  }
  return out;
}

AdvantageEstimate estimate(EstimatorTag tag, const Trajectory& traj, int t, const EstimatorInputs& in) {
  switch (tag) {
    case EstimatorTag::MC: return mc_advantage(traj, t, in);
    case EstimatorTag::HCA: return hca_advantage(traj, t, in, in.hca_cutoff);
    case EstimatorTag::DELTA_HCA: return delta_hca_advantage(traj, t, in);
  }
  throw InvalidArgument("unknown estimator tag");
}

int required_depth(EstimatorTag tag, const EstimatorInputs& in) {
  return tag == EstimatorTag::HCA ? in.hca_cutoff : in.lookahead;
}

}  // namespace hca
