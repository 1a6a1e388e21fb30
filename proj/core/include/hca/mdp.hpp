#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hca/tensor.hpp"

namespace hca {

/// Raw, unvalidated description of a finite MDP. Rewards attach to
/// transitions (s, a, s') and are deterministic given the triple.
struct MdpData {
  int num_states = 0;
  int num_actions = 0;
  Tensor3 transition;  // [s][a][s']
  Tensor3 reward;      // [s][a][s']
  double discount = 1.0;
  std::vector<bool> terminal;
  int horizon = 1;
};

struct Violation {
  std::string kind;
  std::string message;
  std::vector<int> index;  // coordinates the violation refers to, may be empty
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

/// Every invariant violation of `data`. An empty report means the data can
/// be turned into a TabularMDP.
ValidationReport validate_mdp(const MdpData& data);

/// Validated, immutable tabular MDP. Terminal states are absorbing
/// zero-reward self-loops; with discount 1 every state is guaranteed to be
/// absorbed within `horizon` steps.
class TabularMDP {
 public:
  /// Throws InvalidModel listing every violation.
  explicit TabularMDP(MdpData data);

  int num_states() const { return data_.num_states; }
  int num_actions() const { return data_.num_actions; }
  double discount() const { return data_.discount; }
  int horizon() const { return data_.horizon; }
  bool is_terminal(int s) const { return data_.terminal[s]; }

  double transition(int s, int a, int next) const { return data_.transition(s, a, next); }
  double reward(int s, int a, int next) const { return data_.reward(s, a, next); }

  const MdpData& data() const { return data_; }

  /// Same model with a different enumeration/sampling horizon.
  TabularMDP with_horizon(int horizon) const;

 private:
  MdpData data_;
};

ValidationReport validate_mdp(const TabularMDP& mdp);

/// Row-stochastic action distribution per state.
class Policy {
 public:
  explicit Policy(Eigen::MatrixXd probs);

  static Policy uniform(int num_states, int num_actions);

  int num_states() const { return static_cast<int>(probs_.rows()); }
  int num_actions() const { return static_cast<int>(probs_.cols()); }
  double operator()(int s, int a) const { return probs_(s, a); }
  const Eigen::MatrixXd& probs() const { return probs_; }

 private:
  Eigen::MatrixXd probs_;
};

/// Per-state softmax parameterization theta[s][a].
class SoftmaxPolicy {
 public:
  explicit SoftmaxPolicy(Eigen::MatrixXd params);

  int num_states() const { return static_cast<int>(params_.rows()); }
  int num_actions() const { return static_cast<int>(params_.cols()); }
  const Eigen::MatrixXd& params() const { return params_; }

 private:
  Eigen::MatrixXd params_;
};

/// State values of an MDP; exactly zero on terminal states.
class ValueFunction {
 public:
  ValueFunction() = default;
  ValueFunction(const TabularMDP& mdp, Eigen::VectorXd values);

  static ValueFunction zeros(const TabularMDP& mdp);

  int size() const { return static_cast<int>(values_.size()); }
  double operator()(int s) const { return values_(s); }
  const Eigen::VectorXd& values() const { return values_; }
  const std::vector<bool>& terminal() const { return terminal_; }

  /// Returns a copy with non-terminal entries replaced; terminal entries stay 0.
  ValueFunction with_values(Eigen::VectorXd values) const;

 private:
  Eigen::VectorXd values_;
  std::vector<bool> terminal_;
};

/// softmax(theta) row by row, with max-subtraction.
Policy softmax_policy(const SoftmaxPolicy& params);

/// d pi(a|s) / d theta, shaped like theta. Only row s is non-zero:
/// entry [s][b] = pi(a|s) (1{a == b} - pi(b|s)).
Eigen::MatrixXd softmax_gradient(const SoftmaxPolicy& params, int s, int a);

}  // namespace hca
