#pragma once

#include <vector>

#include <Eigen/Dense>

#include "hca/mdp.hpp"
#include "hca/tensor.hpp"

namespace hca {

struct ExpectedRewards {
  Eigen::MatrixXd r_sa;  // r(s, a) = E[R_{t+1} | S_t = s, A_t = a]
  Eigen::VectorXd r_s;   // r(s)    = E[R_{t+1} | S_t = s]
};

ExpectedRewards expected_rewards(const TabularMDP& mdp, const Policy& policy);

/// Exact V_pi from the policy-averaged linear system on non-terminal states.
/// Throws SingularSystem if the system cannot be solved.
ValueFunction solve_value(const TabularMDP& mdp, const Policy& policy);

struct ActionValues {
  Eigen::MatrixXd q;
  Eigen::MatrixXd adv;  // q - v, broadcast over actions
};

ActionValues q_and_advantage(const TabularMDP& mdp, const Policy& policy, const ValueFunction& v);

/// p_k(s'|s,a) and p_k(s'|s) for k = 1..lookahead under the policy.
class KStepDistributions {
 public:
  KStepDistributions() = default;
  KStepDistributions(std::vector<Tensor3> joint, std::vector<Eigen::MatrixXd> marginal);

  int lookahead() const { return static_cast<int>(joint_.size()); }
  int num_states() const { return joint_.empty() ? 0 : joint_.front().dim0(); }
  int num_actions() const { return joint_.empty() ? 0 : joint_.front().dim1(); }

  /// [s][a][s'] for step k (1-based).
  const Tensor3& joint(int k) const;
  /// [s][s'] for step k (1-based).
  const Eigen::MatrixXd& marginal(int k) const;

 private:
  std::vector<Tensor3> joint_;
  std::vector<Eigen::MatrixXd> marginal_;
};

/// Throws InvalidArgument when lookahead exceeds the MDP horizon.
KStepDistributions kstep_distributions(const TabularMDP& mdp, const Policy& policy, int lookahead);

/// Dense p_k(a|s,s') indexed [k][s][s'][a] with a reachability mask over
/// (k, s, s'). Masked slots hold NaN.
class HindsightTable {
 public:
  HindsightTable() = default;
  HindsightTable(int lookahead, int num_states, int num_actions, std::vector<double> values,
                 std::vector<char> reachable);

  int lookahead() const { return lookahead_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }

  bool reachable(int k, int s, int next) const;
  /// Throws UnreachableConditioning for masked entries.
  double at(int k, int s, int next, int a) const;
  /// Unchecked slot access (NaN when masked).
  double raw(int k, int s, int next, int a) const { return values_[offset(k, s, next) + a]; }

  const std::vector<double>& values() const { return values_; }
  const std::vector<char>& mask() const { return reachable_; }

 private:
  std::size_t offset(int k, int s, int next) const {
    return ((static_cast<std::size_t>(k - 1) * num_states_ + s) * num_states_ + next) * num_actions_;
  }

  int lookahead_ = 0;
  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<double> values_;
  std::vector<char> reachable_;
};

/// Posterior over the first action via Bayes:
/// p_k(a|s,s') = pi(a|s) p_k(s'|s,a) / p_k(s'|s).
HindsightTable hindsight_probabilities(const KStepDistributions& kstep, const Policy& policy);

/// Per-state |E[delta_t | S_t = s]| computed from the model.
Eigen::VectorXd bellman_residuals(const TabularMDP& mdp, const Policy& policy, const ValueFunction& v_hat);
double bellman_residual(const TabularMDP& mdp, const Policy& policy, const ValueFunction& v_hat);

/// Every ground-truth quantity the estimator analyses condition on.
struct OracleBundle {
  ValueFunction v;
  Eigen::MatrixXd q;
  Eigen::MatrixXd adv;
  Eigen::MatrixXd r_sa;
  Eigen::VectorXd r_s;
  KStepDistributions kstep;
  HindsightTable hindsight;
};

OracleBundle build_oracle(const TabularMDP& mdp, const Policy& policy, int lookahead);

struct BayesCheck {
  double max_error = 0.0;
  int k = 0;
  int state = 0;
  int next_state = 0;
  int action = 0;

  bool ok(double tolerance) const { return max_error <= tolerance; }
};

/// Largest |p_k(a|s,s') p_k(s'|s) - pi(a|s) p_k(s'|s,a)| over reachable entries.
BayesCheck check_bayes_identity(const OracleBundle& bundle, const Policy& policy);

}  // namespace hca
