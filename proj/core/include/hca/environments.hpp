#pragma once

#include <cstdint>

#include "hca/mdp.hpp"

namespace hca {

/// Five-state counterexample where reward-based HCA has more variance than
/// Monte-Carlo. From A, action 0 goes to B and action 1 to C (reward +1
/// either way); B and C both lead to D (reward -1), D leads to the terminal
/// T (reward 0). Discount 1, horizon 4. The policy is uniform at A and
/// picks action 0 elsewhere, where actions do not matter.
struct Figure1 {
  enum State : int { A = 0, B = 1, C = 2, D = 3, T = 4 };

  TabularMDP mdp;
  Policy policy;
};

/// Builds the instance and checks its structural constraints (zero total
/// reward on both paths, action-independent first-step expected reward, B/C
/// reveal the action, D does not). Throws Error if any fails.
Figure1 figure1_mdp();

struct RandomMdpConfig {
  int num_states = 5;
  int num_actions = 2;
  int branching = 2;  // successors per (s, a) besides the terminal
  double reward_scale = 1.0;
  double terminal_mass = 0.25;  // probability of jumping to the terminal from any (s, a)
  double discount = 0.9;
  int horizon = 6;
  std::uint64_t seed = 0;
  int max_states = 64;
};

/// Deterministic in the seed. The last state is the only terminal. With
/// discount 1 successors are restricted to higher-indexed states, so every
/// episode ends within num_states - 1 steps. Throws InvalidArgument for an
/// unsatisfiable config.
TabularMDP random_mdp(const RandomMdpConfig& config);

/// Chain 0 .. length-1 with terminal state `length`. Action 0 moves right,
/// action 1 moves left (reflecting at 0); with probability `slip` the move
/// is replaced by a uniformly random direction. Entering the terminal pays
/// `reward_at_end`; every other reward is 0.
TabularMDP chain_mdp(int length, double slip, double reward_at_end, double discount, int horizon);

/// theta with entries uniform in [-scale, scale].
SoftmaxPolicy random_softmax_params(int num_states, int num_actions, double scale, std::uint64_t seed);

/// Non-terminal values uniform in [-scale, scale].
ValueFunction random_value(const TabularMDP& mdp, double scale, std::uint64_t seed);

}  // namespace hca
