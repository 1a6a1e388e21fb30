#include "hca/oracle.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "hca/errors.hpp"
#include "hca/tolerances.hpp"

namespace hca {
namespace {

void require_compatible(const TabularMDP& mdp, const Policy& policy) {
  if (policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions()) {
    throw InvalidArgument("policy shape does not match the MDP");
  }
}

// P_pi(s, s') = sum_a pi(a|s) T(s, a, s').
Eigen::MatrixXd policy_transition(const TabularMDP& mdp, const Policy& policy) {
  const int n = mdp.num_states();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const double pa = policy(s, a);
      if (pa == 0.0) continue;
      for (int s2 = 0; s2 < n; ++s2) p(s, s2) += pa * mdp.transition(s, a, s2);
    }
  }
  return p;
}

}  // namespace

ExpectedRewards expected_rewards(const TabularMDP& mdp, const Policy& policy) {
  require_compatible(mdp, policy);
  const int n = mdp.num_states();
  const int m = mdp.num_actions();
  ExpectedRewards out{Eigen::MatrixXd::Zero(n, m), Eigen::VectorXd::Zero(n)};
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < m; ++a) {
      double r = 0.0;
      for (int s2 = 0; s2 < n; ++s2) r += mdp.transition(s, a, s2) * mdp.reward(s, a, s2);
      out.r_sa(s, a) = r;
      out.r_s(s) += policy(s, a) * r;
    }
  }
  return out;
}

ValueFunction solve_value(const TabularMDP& mdp, const Policy& policy) {
  require_compatible(mdp, policy);
  const int n = mdp.num_states();
  const double gamma = mdp.discount();
  const Eigen::MatrixXd p = policy_transition(mdp, policy);
  const Eigen::VectorXd r = expected_rewards(mdp, policy).r_s;

  std::vector<int> live;
  for (int s = 0; s < n; ++s) {
    if (!mdp.is_terminal(s)) live.push_back(s);
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  if (live.empty()) return ValueFunction(mdp, v);

  const int m = static_cast<int>(live.size());
  Eigen::MatrixXd sys(m, m);
  Eigen::VectorXd rhs(m);
  for (int i = 0; i < m; ++i) {
    rhs(i) = r(live[i]);
    for (int j = 0; j < m; ++j) {
      sys(i, j) = (i == j ? 1.0 : 0.0) - gamma * p(live[i], live[j]);
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
  if (!lu.isInvertible()) {
    throw SingularSystem("policy evaluation system is singular; the MDP does not terminate under discount 1");
  }
  Eigen::VectorXd x = lu.solve(rhs);
  for (int iter = 0; iter < 3; ++iter) {
    const Eigen::VectorXd residual = rhs - sys * x;
    if (residual.cwiseAbs().maxCoeff() == 0.0) break;
    x += lu.solve(residual);
  }
  for (int i = 0; i < m; ++i) v(live[i]) = x(i);
  return ValueFunction(mdp, std::move(v));
}

ActionValues q_and_advantage(const TabularMDP& mdp, const Policy& policy, const ValueFunction& v) {
  require_compatible(mdp, policy);
  if (v.size() != mdp.num_states()) throw InvalidArgument("value function size does not match the MDP");
  const int n = mdp.num_states();
  const int m = mdp.num_actions();
  const double gamma = mdp.discount();
  ActionValues out{Eigen::MatrixXd::Zero(n, m), Eigen::MatrixXd::Zero(n, m)};
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < m; ++a) {
      double q = 0.0;
      for (int s2 = 0; s2 < n; ++s2) {
        const double t = mdp.transition(s, a, s2);
        if (t != 0.0) q += t * (mdp.reward(s, a, s2) + gamma * v(s2));
      }
      out.q(s, a) = q;
      out.adv(s, a) = q - v(s);
    }
  }
  return out;
}

KStepDistributions::KStepDistributions(std::vector<Tensor3> joint, std::vector<Eigen::MatrixXd> marginal)
    : joint_(std::move(joint)), marginal_(std::move(marginal)) {
  if (joint_.size() != marginal_.size()) throw InvalidArgument("k-step joint/marginal length mismatch");
}

const Tensor3& KStepDistributions::joint(int k) const {
  if (k < 1 || k > lookahead()) throw InvalidArgument("k-step index " + std::to_string(k) + " out of range");
  return joint_[k - 1];
}

const Eigen::MatrixXd& KStepDistributions::marginal(int k) const {
  if (k < 1 || k > lookahead()) throw InvalidArgument("k-step index " + std::to_string(k) + " out of range");
  return marginal_[k - 1];
}

KStepDistributions kstep_distributions(const TabularMDP& mdp, const Policy& policy, int lookahead) {
  require_compatible(mdp, policy);
  if (lookahead < 1) throw InvalidArgument("lookahead must be at least 1");
  if (lookahead > mdp.horizon()) {
    throw InvalidArgument("lookahead " + std::to_string(lookahead) + " exceeds the MDP horizon " +
                          std::to_string(mdp.horizon()));
  }
  const int n = mdp.num_states();
  const int m = mdp.num_actions();
  const Eigen::MatrixXd p = policy_transition(mdp, policy);

  std::vector<Tensor3> joint;
  std::vector<Eigen::MatrixXd> marginal;
  joint.reserve(lookahead);
  marginal.reserve(lookahead);

  Tensor3 first(n, m, n);
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < m; ++a)
      for (int s2 = 0; s2 < n; ++s2) first(s, a, s2) = mdp.transition(s, a, s2);
  joint.push_back(std::move(first));

  for (int k = 2; k <= lookahead; ++k) {
    const Tensor3& prev = joint.back();
    Tensor3 next(n, m, n);
    for (int s = 0; s < n; ++s) {
      for (int a = 0; a < m; ++a) {
        for (int mid = 0; mid < n; ++mid) {
          const double w = prev(s, a, mid);
          if (w == 0.0) continue;
          for (int s2 = 0; s2 < n; ++s2) next(s, a, s2) += w * p(mid, s2);
        }
      }
    }
    joint.push_back(std::move(next));
  }

  for (const Tensor3& j : joint) {
    Eigen::MatrixXd marg = Eigen::MatrixXd::Zero(n, n);
    for (int s = 0; s < n; ++s)
      for (int a = 0; a < m; ++a)
        for (int s2 = 0; s2 < n; ++s2) marg(s, s2) += policy(s, a) * j(s, a, s2);
    marginal.push_back(std::move(marg));
  }
  return KStepDistributions(std::move(joint), std::move(marginal));
}

HindsightTable::HindsightTable(int lookahead, int num_states, int num_actions, std::vector<double> values,
                               std::vector<char> reachable)
    : lookahead_(lookahead),
      num_states_(num_states),
      num_actions_(num_actions),
      values_(std::move(values)),
      reachable_(std::move(reachable)) {
  const std::size_t cells = static_cast<std::size_t>(lookahead) * num_states * num_states;
  if (reachable_.size() != cells || values_.size() != cells * num_actions) {
    throw InvalidArgument("hindsight table storage does not match its shape");
  }
}

bool HindsightTable::reachable(int k, int s, int next) const {
  if (k < 1 || k > lookahead_ || s < 0 || s >= num_states_ || next < 0 || next >= num_states_) {
    throw InvalidArgument("hindsight index out of range");
  }
  return reachable_[offset(k, s, next) / num_actions_] != 0;
}

double HindsightTable::at(int k, int s, int next, int a) const {
  if (a < 0 || a >= num_actions_) throw InvalidArgument("hindsight action out of range");
  if (!reachable(k, s, next)) {
    throw UnreachableConditioning("unreachable conditioning event: p_" + std::to_string(k) + "(" +
                                  std::to_string(next) + "|" + std::to_string(s) + ") = 0");
  }
  return values_[offset(k, s, next) + a];
}

HindsightTable hindsight_probabilities(const KStepDistributions& kstep, const Policy& policy) {
  const int lookahead = kstep.lookahead();
  const int n = kstep.num_states();
  const int m = kstep.num_actions();
  if (policy.num_states() != n || policy.num_actions() != m) {
    throw InvalidArgument("policy shape does not match the k-step distributions");
  }
  const std::size_t cells = static_cast<std::size_t>(lookahead) * n * n;
  std::vector<double> values(cells * m, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> mask(cells, 0);
  for (int k = 1; k <= lookahead; ++k) {
    const Tensor3& joint = kstep.joint(k);
    const Eigen::MatrixXd& marg = kstep.marginal(k);
    for (int s = 0; s < n; ++s) {
      for (int s2 = 0; s2 < n; ++s2) {
        const double denom = marg(s, s2);
        if (!(denom > tol::kReachable)) continue;
        const std::size_t cell = (static_cast<std::size_t>(k - 1) * n + s) * n + s2;
        mask[cell] = 1;
        for (int a = 0; a < m; ++a) values[cell * m + a] = policy(s, a) * joint(s, a, s2) / denom;
      }
    }
  }
  return HindsightTable(lookahead, n, m, std::move(values), std::move(mask));
}

Eigen::VectorXd bellman_residuals(const TabularMDP& mdp, const Policy& policy, const ValueFunction& v_hat) {
  require_compatible(mdp, policy);
  if (v_hat.size() != mdp.num_states()) throw InvalidArgument("value function size does not match the MDP");
  const int n = mdp.num_states();
  const double gamma = mdp.discount();
  Eigen::VectorXd out(n);
  for (int s = 0; s < n; ++s) {
    double expected = 0.0;
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const double pa = policy(s, a);
      if (pa == 0.0) continue;
      for (int s2 = 0; s2 < n; ++s2) {
        const double t = mdp.transition(s, a, s2);
        if (t != 0.0) expected += pa * t * (mdp.reward(s, a, s2) + gamma * v_hat(s2));
      }
    }
    out(s) = std::abs(expected - v_hat(s));
  }
  return out;
}

double bellman_residual(const TabularMDP& mdp, const Policy& policy, const ValueFunction& v_hat) {
  return bellman_residuals(mdp, policy, v_hat).maxCoeff();
}

OracleBundle build_oracle(const TabularMDP& mdp, const Policy& policy, int lookahead) {
  OracleBundle b;
  b.v = solve_value(mdp, policy);
  auto qa = q_and_advantage(mdp, policy, b.v);
  b.q = std::move(qa.q);
  b.adv = std::move(qa.adv);
  auto rewards = expected_rewards(mdp, policy);
  b.r_sa = std::move(rewards.r_sa);
  b.r_s = std::move(rewards.r_s);
  b.kstep = kstep_distributions(mdp, policy, lookahead);
  b.hindsight = hindsight_probabilities(b.kstep, policy);
  return b;
}

BayesCheck check_bayes_identity(const OracleBundle& bundle, const Policy& policy) {
  BayesCheck worst;
  const auto& h = bundle.hindsight;
  for (int k = 1; k <= h.lookahead(); ++k) {
    const Tensor3& joint = bundle.kstep.joint(k);
    const Eigen::MatrixXd& marg = bundle.kstep.marginal(k);
    for (int s = 0; s < h.num_states(); ++s) {
      for (int s2 = 0; s2 < h.num_states(); ++s2) {
        if (!h.reachable(k, s, s2)) continue;
        for (int a = 0; a < h.num_actions(); ++a) {
          const double err = std::abs(h.raw(k, s, s2, a) * marg(s, s2) - policy(s, a) * joint(s, a, s2));
          if (std::isnan(worst.max_error)) return worst;
          if (!(err <= worst.max_error)) worst = {err, k, s, s2, a};
        }
      }
    }
  }
  return worst;
}

}  // namespace hca
