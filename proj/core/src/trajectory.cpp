#include "hca/trajectory.hpp"

#include <map>
#include <utility>

#include "hca/errors.hpp"
#include "hca/random.hpp"

namespace hca {

Trajectory::Trajectory(int start_state, std::vector<Step> steps, bool absorbed)
    : start_(start_state), steps_(std::move(steps)), absorbed_(absorbed) {}

int Trajectory::state(int i) const {
  if (i < 0 || !covers(i)) throw InvalidArgument("trajectory state index " + std::to_string(i) + " out of range");
  if (i == 0) return start_;
  if (i <= effective_length()) return steps_[i - 1].next_state;
  return steps_.empty() ? start_ : steps_.back().next_state;
}

int Trajectory::action(int i) const {
  if (i < 0 || i >= effective_length()) {
    throw InvalidArgument("trajectory action index " + std::to_string(i) + " out of range");
  }
  return steps_[i].action;
}

double Trajectory::reward(int i) const {
  if (i < 1 || !covers(i)) throw InvalidArgument("trajectory reward index " + std::to_string(i) + " out of range");
  return i <= effective_length() ? steps_[i - 1].reward : 0.0;
}

Trajectory sample_trajectory(const TabularMDP& mdp, const Policy& policy, int s0, int horizon, std::uint64_t seed,
                             std::uint64_t index) {
  if (s0 < 0 || s0 >= mdp.num_states()) throw InvalidArgument("start state out of range");
  const int n = mdp.num_states();
  std::vector<Step> steps;
  std::vector<double> row(n);
  int s = s0;
  for (int i = 0; i < horizon && !mdp.is_terminal(s); ++i) {
    const StepUniforms u = step_uniforms(seed, index, static_cast<std::uint32_t>(i));
    std::vector<double> action_probs(policy.num_actions());
    for (int a = 0; a < policy.num_actions(); ++a) action_probs[a] = policy(s, a);
    const int a = sample_categorical(action_probs, u.action);
    for (int s2 = 0; s2 < n; ++s2) row[s2] = mdp.transition(s, a, s2);
    const int next = sample_categorical(row, u.transition);
    steps.push_back({a, mdp.reward(s, a, next), next});
    s = next;
  }
  return Trajectory(s0, std::move(steps), mdp.is_terminal(s));
}

namespace {

class PathCounter {
 public:
  PathCounter(const TabularMDP& mdp, const Policy& policy, std::size_t saturate)
      : mdp_(mdp), policy_(policy), saturate_(saturate) {}

  std::size_t count(int s, int remaining) {
    if (remaining == 0 || mdp_.is_terminal(s)) return 1;
    const auto key = std::make_pair(s, remaining);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    std::size_t total = 0;
    for (int a = 0; a < mdp_.num_actions() && total <= saturate_; ++a) {
      if (policy_(s, a) <= 0.0) continue;
      for (int s2 = 0; s2 < mdp_.num_states(); ++s2) {
        if (mdp_.transition(s, a, s2) <= 0.0) continue;
        total += count(s2, remaining - 1);
        if (total > saturate_) {
          total = saturate_ + 1;
          break;
        }
      }
    }
    memo_[key] = total;
    return total;
  }

 private:
  const TabularMDP& mdp_;
  const Policy& policy_;
  std::size_t saturate_;
  std::map<std::pair<int, int>, std::size_t> memo_;
};

struct Enumerator {
  const TabularMDP& mdp;
  const Policy& policy;
  int horizon;
  int start;
  std::vector<Step> prefix;
  std::vector<WeightedTrajectory> out;

  void walk(int s, double prob) {
    const bool absorbed = mdp.is_terminal(s);
    if (absorbed || static_cast<int>(prefix.size()) == horizon) {
      out.push_back({Trajectory(start, prefix, absorbed), prob});
      return;
    }
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const double pa = policy(s, a);
      if (pa <= 0.0) continue;
      for (int s2 = 0; s2 < mdp.num_states(); ++s2) {
        const double t = mdp.transition(s, a, s2);
        if (t <= 0.0) continue;
        prefix.push_back({a, mdp.reward(s, a, s2), s2});
        walk(s2, prob * pa * t);
        prefix.pop_back();
      }
    }
  }
};

}  // namespace

std::size_t count_trajectories(const TabularMDP& mdp, const Policy& policy, int s0, int horizon) {
  if (s0 < 0 || s0 >= mdp.num_states()) throw InvalidArgument("start state out of range");
  if (horizon < 0) throw InvalidArgument("horizon must be non-negative");
  PathCounter counter(mdp, policy, static_cast<std::size_t>(-1) / 2);
  return counter.count(s0, horizon);
}

std::vector<WeightedTrajectory> enumerate_trajectories(const TabularMDP& mdp, const Policy& policy, int s0,
                                                       int horizon, const EnumerationOptions& options) {
  if (s0 < 0 || s0 >= mdp.num_states()) throw InvalidArgument("start state out of range");
  if (horizon < 0) throw InvalidArgument("horizon must be non-negative");
  PathCounter counter(mdp, policy, options.cap);
  const std::size_t n = counter.count(s0, horizon);
  if (n > options.cap) {
    throw EnumerationCapExceeded("enumerating from state " + std::to_string(s0) + " over " + std::to_string(horizon) +
                                 " steps exceeds the cap of " + std::to_string(options.cap) +
                                 " trajectories; shrink the instance or the horizon");
  }
  Enumerator e{mdp, policy, horizon, s0, {}, {}};
  e.out.reserve(n);
  e.prefix.reserve(horizon);
  e.walk(s0, 1.0);
  return std::move(e.out);
}

double td_error(const Trajectory& traj, const ValueFunction& v_hat, double gamma, int i) {
  if (i < 0 || !traj.covers(i + 1)) {
    throw InvalidArgument("TD error index " + std::to_string(i) + " beyond the trajectory horizon");
  }
  if (i >= traj.effective_length()) return 0.0;
  return traj.reward(i + 1) + gamma * v_hat(traj.state(i + 1)) - v_hat(traj.state(i));
}

std::vector<double> td_errors(const Trajectory& traj, const ValueFunction& v_hat, double gamma) {
  std::vector<double> out;
  out.reserve(traj.effective_length());
  for (int i = 0; i < traj.effective_length(); ++i) out.push_back(td_error(traj, v_hat, gamma, i));
  return out;
}

}  // namespace hca
