#include <cmath>

#include <gtest/gtest.h>

#include "hca/environments.hpp"
#include "hca/errors.hpp"
#include "hca/oracle.hpp"
#include "support/oracles.hpp"

namespace hca {
namespace {

// Truncated value series: sum over walked paths of discounted reward.
Eigen::VectorXd value_by_paths(const TabularMDP& mdp, const Policy& pi, int depth) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.num_states());
  for (int s = 0; s < mdp.num_states(); ++s) {
    testing::walk_paths(mdp, pi, s, depth, [&](const testing::RawPath& p) {
      double g = 0.0;
      for (std::size_t i = 1; i < p.rewards.size(); ++i) g += std::pow(mdp.discount(), double(i - 1)) * p.rewards[i];
      v(s) += p.prob * g;
    });
  }
  return v;
}

TEST(SolveValue, Figure1Values) {
  const Figure1 fig = figure1_mdp();
  const ValueFunction v = solve_value(fig.mdp, fig.policy);
  const double expected[] = {0.0, -1.0, -1.0, 0.0, 0.0};
  for (int s = 0; s < 5; ++s) EXPECT_NEAR(v(s), expected[s], 1e-14);
  EXPECT_LE(bellman_residual(fig.mdp, fig.policy, v), 1e-14);
}

TEST(SolveValue, UndiscountedMatchesPathSums) {
  // With gamma = 1 the generated models absorb within S-1 steps, so depth S covers every path.
  for (const auto& inst : testing::random_instances(12, 11)) {
    if (inst.mdp.discount() != 1.0) continue;
    const ValueFunction v = solve_value(inst.mdp, inst.policy);
    const Eigen::VectorXd ref = value_by_paths(inst.mdp, inst.policy, inst.mdp.num_states());
    EXPECT_LE((v.values() - ref).cwiseAbs().maxCoeff(), 1e-12) << "instance " << inst.id;
  }
}

TEST(SolveValue, DiscountedSatisfiesBellman) {
  for (const auto& inst : testing::random_instances(20, 12)) {
    const ValueFunction v = solve_value(inst.mdp, inst.policy);
    EXPECT_LE(bellman_residual(inst.mdp, inst.policy, v), 1e-10) << "instance " << inst.id;
    for (int s = 0; s < inst.mdp.num_states(); ++s) {
      if (inst.mdp.is_terminal(s)) {
        EXPECT_EQ(v(s), 0.0);
      }
    }
  }
}

TEST(SolveValue, SelfLoopClosedForm) {
  // State 0 stays with probability 1/2 paying 1, else exits paying 0:
  // v = 0.5 (1 + g v)  =>  v = 0.5 / (1 - 0.5 g).
  MdpData d;
  d.num_states = 2;
  d.num_actions = 1;
  d.transition = Tensor3(2, 1, 2);
  d.reward = Tensor3(2, 1, 2);
  d.discount = 0.8;
  d.terminal = {false, true};
  d.horizon = 5;
  d.transition(0, 0, 0) = 0.5;
  d.transition(0, 0, 1) = 0.5;
  d.reward(0, 0, 0) = 1.0;
  d.transition(1, 0, 1) = 1.0;
  const TabularMDP mdp(d);
  const ValueFunction v = solve_value(mdp, Policy::uniform(2, 1));
  EXPECT_NEAR(v(0), 0.5 / (1.0 - 0.4), 1e-15);
  EXPECT_EQ(v(1), 0.0);
}

TEST(SolveValue, DiscountedSelfLoopIsGeometric) {
  // One non-terminal state looping on itself with reward r; gamma = 0.5 gives v = 2r.
  MdpData d;
  d.num_states = 2;
  d.num_actions = 1;
  d.transition = Tensor3(2, 1, 2);
  d.reward = Tensor3(2, 1, 2);
  d.discount = 0.5;
  d.terminal = {false, true};
  d.horizon = 4;
  d.transition(0, 0, 0) = 1.0;
  d.reward(0, 0, 0) = 3.25;
  d.transition(1, 0, 1) = 1.0;
  const TabularMDP mdp(d);
  EXPECT_NEAR(solve_value(mdp, Policy::uniform(2, 1))(0), 6.5, 1e-14);
}

TEST(SolveValue, ZeroRewardsGiveZeroValues) {
  auto inst = testing::random_instances(1, 18).front();
  MdpData d = inst.mdp.data();
  d.reward = Tensor3(d.num_states, d.num_actions, d.num_states);
  const TabularMDP mdp(d);
  EXPECT_EQ(solve_value(mdp, inst.policy).values().cwiseAbs().maxCoeff(), 0.0);
}

TEST(QAndAdvantage, TwoArmedBandit) {
  MdpData d;
  d.num_states = 2;
  d.num_actions = 2;
  d.transition = Tensor3(2, 2, 2);
  d.reward = Tensor3(2, 2, 2);
  d.discount = 1.0;
  d.terminal = {false, true};
  d.horizon = 1;
  for (int a = 0; a < 2; ++a) {
    d.transition(0, a, 1) = 1.0;
    d.transition(1, a, 1) = 1.0;
  }
  d.reward(0, 0, 1) = 1.0;
  const TabularMDP mdp(d);
  const Policy pi = Policy::uniform(2, 2);
  const ActionValues av = q_and_advantage(mdp, pi, solve_value(mdp, pi));
  EXPECT_DOUBLE_EQ(av.adv(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(av.adv(0, 1), -0.5);
  const ExpectedRewards er = expected_rewards(mdp, pi);
  EXPECT_EQ(er.r_sa(0, 0), 1.0);
  EXPECT_EQ(er.r_sa(1, 0), 0.0);
  EXPECT_EQ(er.r_sa(1, 1), 0.0);
}

TEST(QAndAdvantage, Figure1AdvantagesAreZero) {
  const Figure1 fig = figure1_mdp();
  const ActionValues av = q_and_advantage(fig.mdp, fig.policy, solve_value(fig.mdp, fig.policy));
  EXPECT_NEAR(av.adv(Figure1::A, 0), 0.0, 1e-15);
  EXPECT_NEAR(av.adv(Figure1::A, 1), 0.0, 1e-15);
}

TEST(BellmanResidual, ZeroValueOnFigure1) {
  const Figure1 fig = figure1_mdp();
  const Eigen::VectorXd r = bellman_residuals(fig.mdp, fig.policy, ValueFunction::zeros(fig.mdp));
  EXPECT_EQ(r(Figure1::B), 1.0);
  EXPECT_EQ(r(Figure1::C), 1.0);
  EXPECT_EQ(r(Figure1::A), 1.0);  // first-step reward +1 is not offset by v(B) = 0 either
  EXPECT_EQ(bellman_residual(fig.mdp, fig.policy, ValueFunction::zeros(fig.mdp)), 1.0);
}

TEST(BellmanResidual, ConstantShiftOnDiscountedChain) {
  const double g = 0.9;
  const double c = 0.4;
  const TabularMDP chain = chain_mdp(5, 0.3, 2.0, g, 10);
  const Policy pi = Policy::uniform(6, 2);
  const ValueFunction v = solve_value(chain, pi);
  Eigen::VectorXd shifted = v.values();
  for (int s = 0; s < 5; ++s) shifted(s) += c;
  const Eigen::VectorXd r = bellman_residuals(chain, pi, v.with_values(shifted));
  // Interior states never reach the terminal in one step.
  for (int s = 0; s < 4; ++s) EXPECT_NEAR(r(s), std::abs(c * (1.0 - g)), 1e-12);
}

TEST(Hindsight, ActionIndependentDynamicsGivePolicy) {
  auto inst = testing::random_instances(3, 19)[2];
  MdpData d = inst.mdp.data();
  for (int s = 0; s < d.num_states; ++s)
    for (int a = 1; a < d.num_actions; ++a)
      for (int s2 = 0; s2 < d.num_states; ++s2) d.transition(s, a, s2) = d.transition(s, 0, s2);
  const TabularMDP mdp(d);
  const OracleBundle b = build_oracle(mdp, inst.policy, 3);
  for (int k = 1; k <= 3; ++k)
    for (int s = 0; s < d.num_states; ++s)
      for (int s2 = 0; s2 < d.num_states; ++s2) {
        if (!b.hindsight.reachable(k, s, s2)) continue;
        for (int a = 0; a < d.num_actions; ++a) EXPECT_NEAR(b.hindsight.at(k, s, s2, a), inst.policy(s, a), 1e-12);
      }
}

TEST(Hindsight, DeterministicPolicyIsOneHot) {
  const auto inst = testing::random_instances(1, 20).front();
  Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(inst.mdp.num_states(), inst.mdp.num_actions());
  probs.col(1).setOnes();
  const Policy pi(probs);
  const OracleBundle b = build_oracle(inst.mdp, pi, 1);
  for (int s = 0; s < inst.mdp.num_states(); ++s)
    for (int s2 = 0; s2 < inst.mdp.num_states(); ++s2) {
      if (!b.hindsight.reachable(1, s, s2)) continue;
      EXPECT_EQ(b.hindsight.at(1, s, s2, 0), 0.0);
      EXPECT_EQ(b.hindsight.at(1, s, s2, 1), 1.0);
    }
}

TEST(QAndAdvantage, AdvantageAveragesToZero) {
  for (const auto& inst : testing::random_instances(20, 13)) {
    const ValueFunction v = solve_value(inst.mdp, inst.policy);
    const ActionValues av = q_and_advantage(inst.mdp, inst.policy, v);
    for (int s = 0; s < inst.mdp.num_states(); ++s) {
      double avg = 0.0;
      for (int a = 0; a < inst.mdp.num_actions(); ++a) avg += inst.policy(s, a) * av.adv(s, a);
      EXPECT_NEAR(avg, 0.0, 1e-12);
    }
  }
}

TEST(KStep, MatchesBruteForceWalk) {
  for (const auto& inst : testing::random_instances(15, 14)) {
    const int depth = std::min(4, inst.mdp.horizon());
    const KStepDistributions ks = kstep_distributions(inst.mdp, inst.policy, depth);
    const int S = inst.mdp.num_states();
    for (int k = 1; k <= depth; ++k) {
      for (int s = 0; s < S; ++s) {
        for (int s2 = 0; s2 < S; ++s2) {
          EXPECT_NEAR(ks.marginal(k)(s, s2), testing::brute_kstep_marginal(inst.mdp, inst.policy, s, k, s2), 1e-12);
          for (int a = 0; a < inst.mdp.num_actions(); ++a) {
            EXPECT_NEAR(ks.joint(k)(s, a, s2), testing::brute_kstep_joint(inst.mdp, inst.policy, s, a, k, s2), 1e-12);
          }
        }
      }
    }
  }
}

TEST(KStep, RowsAreDistributions) {
  for (const auto& inst : testing::random_instances(10, 15)) {
    const KStepDistributions ks = kstep_distributions(inst.mdp, inst.policy, inst.mdp.horizon());
    for (int k = 1; k <= ks.lookahead(); ++k) {
      for (int s = 0; s < ks.num_states(); ++s) {
        EXPECT_NEAR(ks.marginal(k).row(s).sum(), 1.0, 1e-10);
      }
    }
  }
}

TEST(KStep, LookaheadBounds) {
  const Figure1 fig = figure1_mdp();
  EXPECT_THROW(kstep_distributions(fig.mdp, fig.policy, 0), InvalidArgument);
  EXPECT_THROW(kstep_distributions(fig.mdp, fig.policy, fig.mdp.horizon() + 1), InvalidArgument);
}

TEST(Hindsight, Figure1Posteriors) {
  const Figure1 fig = figure1_mdp();
  const OracleBundle b = build_oracle(fig.mdp, fig.policy, 3);
  EXPECT_EQ(b.hindsight.at(1, Figure1::A, Figure1::B, 0), 1.0);
  EXPECT_EQ(b.hindsight.at(1, Figure1::A, Figure1::B, 1), 0.0);
  EXPECT_EQ(b.hindsight.at(1, Figure1::A, Figure1::C, 1), 1.0);
  EXPECT_NEAR(b.hindsight.at(2, Figure1::A, Figure1::D, 0), 0.5, 1e-15);
  EXPECT_FALSE(b.hindsight.reachable(1, Figure1::A, Figure1::D));
  EXPECT_THROW(b.hindsight.at(1, Figure1::A, Figure1::D, 0), UnreachableConditioning);
  EXPECT_TRUE(std::isnan(b.hindsight.raw(1, Figure1::A, Figure1::D, 0)));
}

TEST(Hindsight, MatchesPosteriorFromPathMass) {
  for (const auto& inst : testing::random_instances(12, 16)) {
    const int depth = 3;
    const OracleBundle b = build_oracle(inst.mdp, inst.policy, depth);
    const int S = inst.mdp.num_states();
    for (int k = 1; k <= depth; ++k) {
      for (int s = 0; s < S; ++s) {
        for (int s2 = 0; s2 < S; ++s2) {
          const bool reachable = testing::brute_kstep_marginal(inst.mdp, inst.policy, s, k, s2) > 1e-15;
          ASSERT_EQ(b.hindsight.reachable(k, s, s2), reachable);
          if (!reachable) continue;
          double total = 0.0;
          for (int a = 0; a < inst.mdp.num_actions(); ++a) {
            const double p = b.hindsight.at(k, s, s2, a);
            EXPECT_NEAR(p, testing::brute_hindsight(inst.mdp, inst.policy, s, k, s2, a), 1e-12);
            total += p;
          }
          EXPECT_NEAR(total, 1.0, 1e-12);
        }
      }
    }
  }
}

TEST(Hindsight, BayesIdentityHoldsAndCorruptionIsCaught) {
  for (const auto& inst : testing::random_instances(10, 17)) {
    OracleBundle b = build_oracle(inst.mdp, inst.policy, 4);
    EXPECT_TRUE(check_bayes_identity(b, inst.policy).ok(1e-12)) << "instance " << inst.id;
  }
  const Figure1 fig = figure1_mdp();
  OracleBundle b = build_oracle(fig.mdp, fig.policy, 3);
  std::vector<double> values = b.hindsight.values();
  values[(((2 - 1) * 5 + Figure1::A) * 5 + Figure1::D) * 2 + 0] = 0.9;
  b.hindsight = HindsightTable(3, 5, 2, values, b.hindsight.mask());
  const BayesCheck check = check_bayes_identity(b, fig.policy);
  EXPECT_FALSE(check.ok(1e-12));
  EXPECT_EQ(check.k, 2);
  EXPECT_EQ(check.state, Figure1::A);
  EXPECT_EQ(check.next_state, Figure1::D);
}

TEST(ExpectedRewardsTest, Figure1FirstStepIsActionIndependent) {
  const Figure1 fig = figure1_mdp();
  const ExpectedRewards er = expected_rewards(fig.mdp, fig.policy);
  EXPECT_EQ(er.r_sa(Figure1::A, 0), 1.0);
  EXPECT_EQ(er.r_sa(Figure1::A, 1), 1.0);
  EXPECT_EQ(er.r_s(Figure1::A), 1.0);
  EXPECT_EQ(er.r_s(Figure1::B), -1.0);
}

}  // namespace
}  // namespace hca
