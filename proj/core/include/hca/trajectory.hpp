#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hca/mdp.hpp"

namespace hca {

struct Step {
  int action = 0;
  double reward = 0.0;
  int next_state = 0;

  bool operator==(const Step&) const = default;
};

/// S_0, A_0, R_1, S_1, ... up to absorption or a horizon cutoff.
///
/// Time indices past the recorded steps are padded conceptually when the
/// trajectory was absorbed: state(i) stays at the terminal state and
/// reward(i) is 0. Past a horizon cutoff there is no data and accessors
/// throw.
class Trajectory {
 public:
  Trajectory(int start_state, std::vector<Step> steps, bool absorbed);

  int start_state() const { return start_; }
  const std::vector<Step>& steps() const { return steps_; }
  int effective_length() const { return static_cast<int>(steps_.size()); }
  bool absorbed() const { return absorbed_; }

  /// S_i.
  int state(int i) const;
  /// A_i, defined for i < effective_length().
  int action(int i) const;
  /// R_i (reward on arrival at S_i), i >= 1.
  double reward(int i) const;
  /// Whether S_i, R_i are known (recorded or padded).
  bool covers(int i) const { return absorbed_ || i <= effective_length(); }

  bool operator==(const Trajectory&) const = default;

 private:
  int start_;
  std::vector<Step> steps_;
  bool absorbed_;
};

struct WeightedTrajectory {
  Trajectory trajectory;
  double probability;
};

/// Samples actions from pi and successors from the transition rows until
/// absorption or `horizon` steps. Draws are keyed by (seed, index, step), so
/// the result depends on nothing else.
Trajectory sample_trajectory(const TabularMDP& mdp, const Policy& policy, int s0, int horizon, std::uint64_t seed,
                             std::uint64_t index = 0);

struct EnumerationOptions {
  std::size_t cap = 10'000'000;
};

/// Exact number of positive-probability trajectories from s0.
std::size_t count_trajectories(const TabularMDP& mdp, const Policy& policy, int s0, int horizon);

/// Every positive-probability trajectory from s0 of at most `horizon` steps
/// (shorter when absorbed) with its exact probability. Throws
/// EnumerationCapExceeded when the count exceeds options.cap.
std::vector<WeightedTrajectory> enumerate_trajectories(const TabularMDP& mdp, const Policy& policy, int s0,
                                                       int horizon, const EnumerationOptions& options = {});

/// delta_i = R_{i+1} + gamma v(S_{i+1}) - v(S_i); 0 once absorbed.
double td_error(const Trajectory& traj, const ValueFunction& v_hat, double gamma, int i);

/// delta_0 .. delta_{L-1} with L = effective_length().
std::vector<double> td_errors(const Trajectory& traj, const ValueFunction& v_hat, double gamma);

}  // namespace hca
