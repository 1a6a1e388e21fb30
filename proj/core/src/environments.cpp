#include "hca/environments.hpp"

#include <cmath>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "hca/errors.hpp"
#include "hca/oracle.hpp"
#include "hca/random.hpp"
#include "hca/trajectory.hpp"

namespace hca {
namespace {

MdpData blank(int num_states, int num_actions, double discount, int horizon) {
  MdpData d;
  d.num_states = num_states;
  d.num_actions = num_actions;
  d.transition = Tensor3(num_states, num_actions, num_states);
  d.reward = Tensor3(num_states, num_actions, num_states);
  d.discount = discount;
  d.terminal.assign(num_states, false);
  d.horizon = horizon;
  return d;
}

void make_terminal(MdpData& d, int s) {
  d.terminal[s] = true;
  for (int a = 0; a < d.num_actions; ++a) d.transition(s, a, s) = 1.0;
}

void caption_check(bool ok, const char* what) {
  if (!ok) throw Error(std::string("figure1 instance violates: ") + what);
}

// Stream ids keep generator draws for different purposes independent.
constexpr std::uint64_t kMdpStream = 1;
constexpr std::uint64_t kPolicyStream = 2;
constexpr std::uint64_t kValueStream = 3;

}  // namespace

Figure1 figure1_mdp() {
  using S = Figure1::State;
  MdpData d = blank(5, 2, 1.0, 4);
  d.transition(S::A, 0, S::B) = 1.0;
  d.reward(S::A, 0, S::B) = 1.0;
  d.transition(S::A, 1, S::C) = 1.0;
  d.reward(S::A, 1, S::C) = 1.0;
  for (int a = 0; a < 2; ++a) {
    d.transition(S::B, a, S::D) = 1.0;
    d.reward(S::B, a, S::D) = -1.0;
    d.transition(S::C, a, S::D) = 1.0;
    d.reward(S::C, a, S::D) = -1.0;
    d.transition(S::D, a, S::T) = 1.0;
  }
  make_terminal(d, S::T);

  // Uniform at A; elsewhere the action has no effect, so a fixed choice
  // keeps one trajectory per state path.
  Eigen::MatrixXd probs(5, 2);
  probs << 0.5, 0.5, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0;
  Figure1 fig{TabularMDP(std::move(d)), Policy(std::move(probs))};

  const auto paths = enumerate_trajectories(fig.mdp, fig.policy, S::A, fig.mdp.horizon());
  std::set<std::vector<int>> state_paths;
  for (const auto& p : paths) {
    double total = 0.0;
    std::vector<int> states{p.trajectory.start_state()};
    for (const auto& step : p.trajectory.steps()) {
      total += step.reward;
      states.push_back(step.next_state);
    }
    state_paths.insert(std::move(states));
    caption_check(p.trajectory.absorbed() && total == 0.0, "total reward along both paths is zero");
  }
  caption_check(state_paths.size() == 2, "exactly two state paths leave A");
  const auto rewards = expected_rewards(fig.mdp, fig.policy);
  caption_check(rewards.r_sa(S::A, 0) == rewards.r_sa(S::A, 1), "first-step expected reward is action-independent");
  const auto h = hindsight_probabilities(kstep_distributions(fig.mdp, fig.policy, 2), fig.policy);
  caption_check(h.at(1, S::A, S::B, 0) == 1.0 && h.at(1, S::A, S::C, 1) == 1.0, "B and C identify the action");
  caption_check(h.at(2, S::A, S::D, 0) == 0.5 && h.at(2, S::A, S::D, 1) == 0.5,
                "D is equally likely under either action");
  return fig;
}

TabularMDP random_mdp(const RandomMdpConfig& c) {
  if (c.num_states < 2) throw InvalidArgument("random MDP needs at least 2 states (one terminal)");
  if (c.num_states > c.max_states) {
    throw InvalidArgument("random MDP state count " + std::to_string(c.num_states) + " exceeds the cap " +
                          std::to_string(c.max_states));
  }
  if (c.num_actions < 1) throw InvalidArgument("random MDP needs at least 1 action");
  if (c.branching < 1) throw InvalidArgument("branching factor must be at least 1");
  if (!(c.terminal_mass >= 0.0 && c.terminal_mass <= 1.0)) throw InvalidArgument("terminal mass outside [0, 1]");
  if (!(std::isfinite(c.reward_scale) && c.reward_scale >= 0.0)) throw InvalidArgument("reward scale must be >= 0");
  if (!(c.discount > 0.0 && c.discount <= 1.0)) throw InvalidArgument("discount outside (0, 1]");
  if (c.horizon < 1) throw InvalidArgument("horizon must be positive");
  if (c.discount == 1.0 && c.horizon < c.num_states - 1) {
    throw InvalidArgument("discount 1 needs horizon >= num_states - 1 to guarantee termination");
  }

  const int n = c.num_states;
  const int terminal = n - 1;
  MdpData d = blank(n, c.num_actions, c.discount, c.horizon);
  make_terminal(d, terminal);
  PhiloxStream rng(c.seed, kMdpStream);

  for (int s = 0; s < terminal; ++s) {
    for (int a = 0; a < c.num_actions; ++a) {
      std::vector<int> candidates;
      for (int s2 = (c.discount == 1.0 ? s + 1 : 0); s2 < terminal; ++s2) candidates.push_back(s2);
      const int picks = std::min<int>(c.branching, static_cast<int>(candidates.size()));
      for (int i = 0; i < picks; ++i) {
        const auto j = i + static_cast<int>(rng.below(candidates.size() - i));
        std::swap(candidates[i], candidates[j]);
      }
      if (picks == 0) {
        d.transition(s, a, terminal) = 1.0;
      } else {
        // Normalized Exp(1) draws: a flat Dirichlet over the chosen successors.
        std::vector<double> w(picks);
        for (double& x : w) x = -std::log1p(-rng.uniform());
        const double total = std::accumulate(w.begin(), w.end(), 0.0);
        d.transition(s, a, terminal) += c.terminal_mass;
        for (int i = 0; i < picks; ++i) {
          d.transition(s, a, candidates[i]) += (1.0 - c.terminal_mass) * (total > 0.0 ? w[i] / total : 1.0 / picks);
        }
      }
      for (int s2 = 0; s2 < n; ++s2) d.reward(s, a, s2) = rng.uniform(-c.reward_scale, c.reward_scale);
    }
  }
  return TabularMDP(std::move(d));
}

TabularMDP chain_mdp(int length, double slip, double reward_at_end, double discount, int horizon) {
  if (length < 2) throw InvalidArgument("chain length must be at least 2");
  if (!(slip >= 0.0 && slip < 1.0)) throw InvalidArgument("slip outside [0, 1)");
  const int terminal = length;
  MdpData d = blank(length + 1, 2, discount, horizon);
  make_terminal(d, terminal);
  const double p_right[2] = {1.0 - 0.5 * slip, 0.5 * slip};
  for (int s = 0; s < length; ++s) {
    const int right = s + 1;
    const int left = s == 0 ? 0 : s - 1;
    for (int a = 0; a < 2; ++a) {
      d.transition(s, a, right) += p_right[a];
      d.transition(s, a, left) += 1.0 - p_right[a];
      if (right == terminal) d.reward(s, a, right) = reward_at_end;
    }
  }
  return TabularMDP(std::move(d));
}

SoftmaxPolicy random_softmax_params(int num_states, int num_actions, double scale, std::uint64_t seed) {
  PhiloxStream rng(seed, kPolicyStream);
  Eigen::MatrixXd theta(num_states, num_actions);
  for (int s = 0; s < num_states; ++s)
    for (int a = 0; a < num_actions; ++a) theta(s, a) = rng.uniform(-scale, scale);
  return SoftmaxPolicy(std::move(theta));
}

ValueFunction random_value(const TabularMDP& mdp, double scale, std::uint64_t seed) {
  PhiloxStream rng(seed, kValueStream);
  Eigen::VectorXd v(mdp.num_states());
  for (int s = 0; s < mdp.num_states(); ++s) {
    const double x = rng.uniform(-scale, scale);
    v(s) = mdp.is_terminal(s) ? 0.0 : x;
  }
  return ValueFunction(mdp, std::move(v));
}

}  // namespace hca
