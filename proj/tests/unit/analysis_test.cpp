#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "hca/analysis.hpp"
#include "hca/environments.hpp"
#include "hca/errors.hpp"
#include "hca/random.hpp"
#include "support/oracles.hpp"

namespace hca {
namespace {

EstimatorInputs inputs_for(const TabularMDP& mdp, const Policy& pi, const ValueFunction& v, int n) {
  auto oracle = std::make_shared<const OracleBundle>(build_oracle(mdp, pi, n));
  return EstimatorInputs::make(mdp, pi, v, oracle, n);
}

// delta-HCA value for one raw path, straight from the definition.
double dhca_direct(const TabularMDP& mdp, const Policy& pi, const testing::RawPath& p, const Eigen::VectorXd& v,
                   int n, int a) {
  const int s = p.states[0];
  const double g = mdp.discount();
  double out = (p.actions[0] == a ? 1.0 : 0.0) / pi(s, a) * testing::td(p, v, g, 0);
  for (int k = 1; k < n; ++k) {
    const double d = testing::td(p, v, g, k);
    if (d == 0.0) continue;
    out += std::pow(g, k) * testing::brute_hindsight(mdp, pi, s, k, testing::path_state(p, k), a) / pi(s, a) * d;
  }
  return out;
}

struct Moments {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

template <typename F>
Moments brute_moments(const TabularMDP& mdp, const Policy& pi, int s, int n, F value) {
  const int A = mdp.num_actions();
  Moments m{Eigen::VectorXd::Zero(A), Eigen::VectorXd::Zero(A)};
  Eigen::VectorXd second = Eigen::VectorXd::Zero(A);
  testing::walk_paths(mdp, pi, s, n, [&](const testing::RawPath& p) {
    for (int a = 0; a < A; ++a) {
      const double x = value(p, a);
      m.mean(a) += p.prob * x;
      second(a) += p.prob * x * x;
    }
  });
  m.var = second - m.mean.cwiseProduct(m.mean);
  return m;
}

TEST(ExactMoments, Figure1Variances) {
  const Figure1 fig = figure1_mdp();
  const ValueFunction v = solve_value(fig.mdp, fig.policy);
  const EstimatorInputs in = inputs_for(fig.mdp, fig.policy, v, 3);
  const auto mc = exact_moments(fig.mdp, fig.policy, Figure1::A, in, EstimatorTag::MC);
  const auto hca = exact_moments(fig.mdp, fig.policy, Figure1::A, in, EstimatorTag::HCA);
  const auto dh = exact_moments(fig.mdp, fig.policy, Figure1::A, in, EstimatorTag::DELTA_HCA);
  for (int a = 0; a < 2; ++a) {
    EXPECT_NEAR(mc.variance(a), 0.0, 1e-12);
    EXPECT_NEAR(hca.variance(a), 1.0, 1e-12);
    EXPECT_NEAR(dh.variance(a), 0.0, 1e-12);
    EXPECT_NEAR(hca.mean(a), 0.0, 1e-12);
  }
  EXPECT_THROW(exact_moments(fig.mdp, fig.policy, Figure1::T, in, EstimatorTag::MC), InvalidArgument);
}

TEST(ExactMoments, MatchBruteForce) {
  for (const auto& inst : testing::random_instances(10, 41)) {
    const ValueFunction v = random_value(inst.mdp, 1.5, 4100 + inst.id);
    for (int n : {1, 3}) {
      const EstimatorInputs in = inputs_for(inst.mdp, inst.policy, v, n);
      for (int s = 0; s < inst.mdp.num_states(); ++s) {
        if (inst.mdp.is_terminal(s)) continue;
        const auto mc = exact_moments(inst.mdp, inst.policy, s, in, EstimatorTag::MC);
        const auto mc_ref = brute_moments(inst.mdp, inst.policy, s, n, [&](const testing::RawPath& p, int a) {
          return testing::mc_reward_form(p, inst.policy, v.values(), inst.mdp.discount(), n, a);
        });
        const auto dh = exact_moments(inst.mdp, inst.policy, s, in, EstimatorTag::DELTA_HCA);
        const auto dh_ref = brute_moments(inst.mdp, inst.policy, s, n, [&](const testing::RawPath& p, int a) {
          return dhca_direct(inst.mdp, inst.policy, p, v.values(), n, a);
        });
        EXPECT_LE((mc.mean - mc_ref.mean).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LE((mc.variance - mc_ref.var).cwiseAbs().maxCoeff(), 1e-11);
        EXPECT_LE((dh.mean - dh_ref.mean).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LE((dh.variance - dh_ref.var).cwiseAbs().maxCoeff(), 1e-11);
      }
    }
  }
}

TEST(ExactMoments, UnbiasedWithTrueValue) {
  for (const auto& inst : testing::random_instances(10, 42)) {
    const ValueFunction v = solve_value(inst.mdp, inst.policy);
    const EstimatorInputs base = inputs_for(inst.mdp, inst.policy, v, 4);
    for (int n = 1; n <= 4; ++n) {
      const EstimatorInputs in = base.with_lookahead(n);
      for (int s = 0; s < inst.mdp.num_states(); ++s) {
        if (inst.mdp.is_terminal(s)) continue;
        for (auto tag : {EstimatorTag::MC, EstimatorTag::DELTA_HCA}) {
          const auto m = exact_moments(inst.mdp, inst.policy, s, in, tag);
          for (int a = 0; a < inst.mdp.num_actions(); ++a) {
            EXPECT_NEAR(m.mean(a), base.oracle->adv(s, a), 1e-10) << to_string(tag) << " s=" << s << " N=" << n;
          }
        }
      }
    }
  }
}

TEST(ExactMoments, MeansAgreeForAnyValue) {
  for (const auto& inst : testing::random_instances(8, 43)) {
    const ValueFunction v = random_value(inst.mdp, 2.0, 4300 + inst.id);
    for (int n = 1; n <= 4; ++n) {
      const EstimatorInputs in = inputs_for(inst.mdp, inst.policy, v, n);
      for (int s = 0; s < inst.mdp.num_states(); ++s) {
        if (inst.mdp.is_terminal(s)) continue;
        const auto mc = exact_moments(inst.mdp, inst.policy, s, in, EstimatorTag::MC);
        const auto dh = exact_moments(inst.mdp, inst.policy, s, in, EstimatorTag::DELTA_HCA);
        EXPECT_LE((mc.mean - dh.mean).cwiseAbs().maxCoeff(), 1e-10);
      }
    }
  }
}

TEST(Decomposition, TotalsMatchExactVariance) {
  for (const auto& inst : testing::random_instances(8, 44)) {
    const ValueFunction v = random_value(inst.mdp, 1.0, 4400 + inst.id);
    const EstimatorInputs in = inputs_for(inst.mdp, inst.policy, v, 3);
    for (auto tag : {EstimatorTag::MC, EstimatorTag::DELTA_HCA}) {
      const auto m = exact_moments(inst.mdp, inst.policy, 0, in, tag);
      const auto d = variance_decomposition(inst.mdp, inst.policy, 0, in, tag);
      ASSERT_EQ(d.size(), static_cast<std::size_t>(inst.mdp.num_actions()));
      for (const auto& rep : d) {
        EXPECT_NEAR(rep.total, m.variance(rep.action), 1e-10);
        EXPECT_EQ(rep.cross_terms.diagonal().cwiseAbs().maxCoeff(), 0.0);
      }
    }
  }
  const Figure1 fig = figure1_mdp();
  EXPECT_THROW(variance_decomposition(fig.mdp, fig.policy, 0,
                                      inputs_for(fig.mdp, fig.policy, ValueFunction::zeros(fig.mdp), 2),
                                      EstimatorTag::HCA),
               InvalidArgument);
}

TEST(Decomposition, CrossTermsVanishWithTrueValue) {
  for (const auto& inst : testing::random_instances(10, 45)) {
    const ValueFunction v = solve_value(inst.mdp, inst.policy);
    const EstimatorInputs in = inputs_for(inst.mdp, inst.policy, v, 4);
    for (auto tag : {EstimatorTag::MC, EstimatorTag::DELTA_HCA}) {
      for (const auto& rep : variance_decomposition(inst.mdp, inst.policy, 0, in, tag)) {
        EXPECT_LE(rep.max_abs_cross_term(), 1e-10);
        EXPECT_NEAR(rep.diagonal_total(), rep.total, 1e-10);
      }
    }
  }
}

TEST(Decomposition, CrossTermsAppearWithWrongValue) {
  // Not a theorem; a guard against a decomposition that is identically zero.
  double worst = 0.0;
  for (const auto& inst : testing::random_instances(5, 46)) {
    const EstimatorInputs in = inputs_for(inst.mdp, inst.policy, random_value(inst.mdp, 3.0, 46), 3);
    for (const auto& rep : variance_decomposition(inst.mdp, inst.policy, 0, in, EstimatorTag::MC))
      worst = std::max(worst, rep.max_abs_cross_term());
  }
  EXPECT_GT(worst, 1e-3);
}

TEST(CovarianceCheckTest, IdentitiesHoldWithTrueValue) {
  for (const auto& inst : testing::random_instances(10, 47)) {
    const ValueFunction v = solve_value(inst.mdp, inst.policy);
    for (int n = 1; n <= 4; ++n) {
      const EstimatorInputs in = inputs_for(inst.mdp, inst.policy, v, n);
      const auto check = cross_action_covariance_check(inst.mdp, inst.policy, 0, in);
      EXPECT_TRUE(check.passed()) << "instance " << inst.id << " N=" << n;
      const int A = inst.mdp.num_actions();
      EXPECT_EQ(check.pairs.size(), static_cast<std::size_t>(A * (A - 1) / 2));
    }
  }
}

TEST(CovarianceCheckTest, RequiresTrueValue) {
  const auto inst = testing::random_instances(1, 48).front();
  const EstimatorInputs in = inputs_for(inst.mdp, inst.policy, random_value(inst.mdp, 1.0, 48), 2);
  EXPECT_THROW(cross_action_covariance_check(inst.mdp, inst.policy, 0, in), PreconditionUnmet);
}

TEST(UpdateVariance, DirectMatchesAssemblyAndBruteForce) {
  for (const auto& inst : testing::random_instances(10, 49)) {
    const ValueFunction v = solve_value(inst.mdp, inst.policy);
    const EstimatorInputs in = inputs_for(inst.mdp, inst.policy, v, 3);
    const PGConfig pg(0.1, inst.params);
    const int A = inst.mdp.num_actions();
    for (auto tag : {EstimatorTag::MC, EstimatorTag::DELTA_HCA}) {
      const auto r = pg_update_variance(inst.mdp, pg, 0, in, tag);
      EXPECT_LE(r.max_discrepancy, 1e-10);
      EXPECT_NEAR(r.step_variance_trace, 0.01 * r.total_trace, 1e-15 + 1e-12 * r.total_trace);

      // Independent: Delta_b = sum_a A_hat(a) pi(a) (1{a=b} - pi(b)).
      Eigen::VectorXd first = Eigen::VectorXd::Zero(A);
      Eigen::VectorXd second = Eigen::VectorXd::Zero(A);
      testing::walk_paths(inst.mdp, inst.policy, 0, 3, [&](const testing::RawPath& p) {
        for (int b = 0; b < A; ++b) {
          double delta = 0.0;
          for (int a = 0; a < A; ++a) {
            const double x = tag == EstimatorTag::MC
                                 ? testing::mc_reward_form(p, inst.policy, v.values(), inst.mdp.discount(), 3, a)
                                 : dhca_direct(inst.mdp, inst.policy, p, v.values(), 3, a);
            delta += x * inst.policy(0, a) * ((a == b ? 1.0 : 0.0) - inst.policy(0, b));
          }
          first(b) += p.prob * delta;
          second(b) += p.prob * delta * delta;
        }
      });
      for (int b = 0; b < A; ++b) {
        EXPECT_NEAR(r.per_coordinate_variance(0, b), second(b) - first(b) * first(b), 1e-11);
      }
      EXPECT_EQ(r.per_coordinate_variance.bottomRows(inst.mdp.num_states() - 1).cwiseAbs().maxCoeff(), 0.0);
    }
  }
}

TEST(UpdateVariance, RejectsMismatchedPolicy) {
  const auto inst = testing::random_instances(1, 50).front();
  const EstimatorInputs in = inputs_for(inst.mdp, inst.policy, solve_value(inst.mdp, inst.policy), 2);
  const PGConfig other(0.1, SoftmaxPolicy(Eigen::MatrixXd::Zero(inst.mdp.num_states(), inst.mdp.num_actions())));
  EXPECT_THROW(pg_update_variance(inst.mdp, other, 0, in, EstimatorTag::MC), InvalidArgument);
  EXPECT_THROW(PGConfig(0.0, inst.params), InvalidArgument);
}

TEST(EmpiricalMoments, SmallSample) {
  std::vector<AdvantageEstimate> xs;
  for (double x : {1.0, 2.0, 3.0, 4.0}) xs.push_back({Eigen::VectorXd::Constant(1, x), 0, EstimatorTag::MC});
  const auto m = empirical_moments(xs);
  EXPECT_DOUBLE_EQ(m.mean(0), 2.5);
  EXPECT_DOUBLE_EQ(m.variance(0), 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.mean_stderr(0), std::sqrt(5.0 / 12.0));
  EXPECT_EQ(m.sample_count, 4u);
  EXPECT_THROW(empirical_moments(std::span<const AdvantageEstimate>(xs.data(), 1)), InvalidArgument);
}

TEST(EmpiricalMoments, VarianceStandardErrorIsCalibrated) {
  // Spread of s^2 over many batches versus the reported standard error.
  PhiloxStream rng(3, 0);
  const int batches = 1000;
  const int n = 400;
  double sum = 0.0;
  double sum_sq = 0.0;
  double se_sum = 0.0;
  for (int b = 0; b < batches; ++b) {
    std::vector<AdvantageEstimate> xs;
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform();
      xs.push_back({Eigen::VectorXd::Constant(1, -std::log1p(-u)), 0, EstimatorTag::MC});  // Exp(1)
    }
    const auto m = empirical_moments(xs);
    sum += m.variance(0);
    sum_sq += m.variance(0) * m.variance(0);
    se_sum += m.variance_stderr(0);
  }
  const double spread = std::sqrt(sum_sq / batches - (sum / batches) * (sum / batches));
  EXPECT_NEAR(sum / batches, 1.0, 0.05);
  // The plug-in fourth moment is biased low for heavy tails, so allow 15 %.
  EXPECT_NEAR(se_sum / batches / spread, 1.0, 0.15);
}

}  // namespace
}  // namespace hca
