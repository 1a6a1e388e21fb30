#pragma once

// Test-only reference computations. Nothing here calls the library's
// enumeration, estimators or analysis code; paths are walked directly off
// the transition tensor so the checks stay independent of the code under
// test.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "hca/environments.hpp"
#include "hca/mdp.hpp"

namespace hca::testing {

/// A raw path: states[0..L], actions[0..L-1], rewards[1..L] (rewards[0] unused).
struct RawPath {
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  double prob = 1.0;
  bool absorbed = false;
};

/// Calls `visit` on every positive-probability path from s0 of `depth`
/// steps, stopping early on terminal states.
inline void walk_paths(const TabularMDP& mdp, const Policy& pi, int s0, int depth,
                       const std::function<void(const RawPath&)>& visit) {
  RawPath path;
  path.states.push_back(s0);
  path.rewards.push_back(0.0);
  std::function<void(int, double)> rec = [&](int s, double prob) {
    if (mdp.is_terminal(s) || static_cast<int>(path.actions.size()) == depth) {
      path.prob = prob;
      path.absorbed = mdp.is_terminal(s);
      visit(path);
      return;
    }
    for (int a = 0; a < mdp.num_actions(); ++a) {
      if (pi(s, a) <= 0.0) continue;
      for (int s2 = 0; s2 < mdp.num_states(); ++s2) {
        const double t = mdp.transition(s, a, s2);
        if (t <= 0.0) continue;
        path.actions.push_back(a);
        path.states.push_back(s2);
        path.rewards.push_back(mdp.reward(s, a, s2));
        rec(s2, prob * pi(s, a) * t);
        path.actions.pop_back();
        path.states.pop_back();
        path.rewards.pop_back();
      }
    }
  };
  rec(s0, 1.0);
}

/// State at time i with absorbing padding.
inline int path_state(const RawPath& p, int i) {
  return i < static_cast<int>(p.states.size()) ? p.states[i] : p.states.back();
}

inline double path_reward(const RawPath& p, int i) {
  return i < static_cast<int>(p.rewards.size()) ? p.rewards[i] : 0.0;
}

/// P(S_k = s', A_0 = a | S_0 = s) / pi(a|s) by path enumeration, i.e. p_k(s'|s,a).
inline double brute_kstep_joint(const TabularMDP& mdp, const Policy& pi, int s, int a, int k, int s2) {
  if (mdp.is_terminal(s)) return s2 == s ? 1.0 : 0.0;  // self-loop under every action
  double mass = 0.0;
  walk_paths(mdp, pi, s, k, [&](const RawPath& p) {
    if (p.actions.empty() || p.actions[0] != a) return;
    if (path_state(p, k) == s2) mass += p.prob;
  });
  return pi(s, a) > 0.0 ? mass / pi(s, a) : std::nan("");
}

inline double brute_kstep_marginal(const TabularMDP& mdp, const Policy& pi, int s, int k, int s2) {
  double mass = 0.0;
  walk_paths(mdp, pi, s, k, [&](const RawPath& p) {
    if (path_state(p, k) == s2) mass += p.prob;
  });
  return mass;
}

/// Hindsight posterior P(A_0 = a | S_0 = s, S_k = s') directly from path mass.
inline double brute_hindsight(const TabularMDP& mdp, const Policy& pi, int s, int k, int s2, int a) {
  if (mdp.is_terminal(s)) return pi(s, a);
  double joint = 0.0;
  double total = 0.0;
  walk_paths(mdp, pi, s, k, [&](const RawPath& p) {
    if (path_state(p, k) != s2) return;
    total += p.prob;
    if (!p.actions.empty() && p.actions[0] == a) joint += p.prob;
  });
  return joint / total;
}

/// N-step MC advantage in the reward form:
/// 1{A_0=a}/pi(a|s) (sum_{k=1}^{N} g^{k-1} R_k + g^N V(S_N) - V(S_0)).
inline double mc_reward_form(const RawPath& p, const Policy& pi, const Eigen::VectorXd& v, double gamma, int n, int a) {
  if (p.actions.empty() || p.actions[0] != a) return 0.0;
  double ret = 0.0;
  for (int k = 1; k <= n; ++k) ret += std::pow(gamma, k - 1) * path_reward(p, k);
  ret += std::pow(gamma, n) * v(path_state(p, n)) - v(p.states[0]);
  return ret / pi(p.states[0], a);
}

inline double td(const RawPath& p, const Eigen::VectorXd& v, double gamma, int i) {
  return path_reward(p, i + 1) + gamma * v(path_state(p, i + 1)) - v(path_state(p, i));
}

/// Test instance: a random MDP with a random softmax policy.
struct Instance {
  int id;
  TabularMDP mdp;
  SoftmaxPolicy params;
  Policy policy;
};

/// Instances with 3..6 states, 2..3 actions, horizon 6, discount 0.9 or 1.
inline std::vector<Instance> random_instances(int count, std::uint64_t seed, int max_states = 6) {
  std::vector<Instance> out;
  for (int i = 0; i < count; ++i) {
    RandomMdpConfig c;
    c.num_states = 3 + (i % (max_states - 2));
    c.num_actions = 2 + (i % 2);
    c.branching = 2;
    c.terminal_mass = 0.2 + 0.05 * (i % 3);
    c.discount = (i % 3 == 0) ? 1.0 : 0.9;
    c.horizon = 6;
    c.seed = seed * 1000 + i;
    TabularMDP mdp = random_mdp(c);
    SoftmaxPolicy params = random_softmax_params(mdp.num_states(), mdp.num_actions(), 1.0, seed * 7919 + i);
    Policy pi = softmax_policy(params);
    out.push_back({i, std::move(mdp), std::move(params), std::move(pi)});
  }
  return out;
}

}  // namespace hca::testing
