#include "lab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include "hca/analysis.hpp"
#include "hca/environments.hpp"
#include "hca/errors.hpp"
#include "hca/oracle.hpp"
#include "hca/tolerances.hpp"
#include "lab/util.hpp"

namespace hca::lab {
namespace {

struct Instance {
  std::string id;
  std::uint64_t index = 0;
  TabularMDP mdp;
  SoftmaxPolicy params;
  Policy policy;
};

std::vector<Instance> instance_set(const VerifyConfig& c) {
  std::vector<Instance> out;
  if (c.figure1) {
    Figure1 fig = figure1_mdp();
    SoftmaxPolicy zeros(Eigen::MatrixXd::Zero(5, 2));
    out.push_back({"figure1", 0, std::move(fig.mdp), zeros, softmax_policy(zeros)});
  }
  const int span = std::max(1, c.max_states - 2);
  for (int i = 0; i < c.random_instances; ++i) {
    RandomMdpConfig rc;
    rc.num_states = 3 + i % span;
    rc.num_actions = 2 + i % 2;
    rc.branching = 2;
    rc.terminal_mass = 0.2 + 0.05 * (i % 3);
    rc.discount = i % 3 == 0 ? 1.0 : 0.9;
    rc.horizon = 6;
    rc.seed = c.seed * 1000 + i;
    TabularMDP mdp = random_mdp(rc);
    SoftmaxPolicy params = random_softmax_params(mdp.num_states(), mdp.num_actions(), 1.0, c.seed * 7919 + i);
    Policy pi = softmax_policy(params);
    out.push_back({"random_" + std::to_string(i), static_cast<std::uint64_t>(i) + 1, std::move(mdp), std::move(params), std::move(pi)});
  }
  return out;
}

// Swaps probability mass between two actions of the first reachable
// (k, s, s') row whose entries differ, so the row stays a distribution but
// Bayes' rule no longer holds.
OracleBundle corrupt(OracleBundle bundle) {
  const HindsightTable& h = bundle.hindsight;
  std::vector<double> values = h.values();
  for (int k = 1; k <= h.lookahead(); ++k) {
    for (int s = 0; s < h.num_states(); ++s) {
      for (int s2 = 0; s2 < h.num_states(); ++s2) {
        if (!h.reachable(k, s, s2)) continue;
        const std::size_t base =
            ((static_cast<std::size_t>(k - 1) * h.num_states() + s) * h.num_states() + s2) * h.num_actions();
        if (values[base] == values[base + 1]) continue;
        std::swap(values[base], values[base + 1]);
        bundle.hindsight = HindsightTable(h.lookahead(), h.num_states(), h.num_actions(), values, h.mask());
        return bundle;
      }
    }
  }
  throw Error("no hindsight entry can be corrupted");
}

// The corrupted instance when corrupt_hindsight is set.
std::string first_instance_id(const VerifyConfig& config) { return config.figure1 ? "figure1" : "random_0"; }

struct Tally {
  std::map<Check, std::size_t> assertions;
  std::vector<std::pair<Check, CheckFailure>> failures;
  std::map<Check, std::string> skipped;

  void assert_le(Check c, const CheckFailure& where, double got, double bound) {
    ++assertions[c];
    if (!(got <= bound)) {
      CheckFailure f = where;
      f.got = got;
      f.bound = bound;
      failures.emplace_back(c, std::move(f));
    }
  }
};

CheckFailure at(const Instance& inst, int s, int a, int n, std::string quantity) {
  return {inst.id, s, a, n, std::move(quantity), 0.0, 0.0};
}

Tally verify_instance(const VerifyConfig& config, const Instance& inst) {
  Tally t;
  const TabularMDP& mdp = inst.mdp;
  const Policy& pi = inst.policy;
  const int max_n = std::min(config.max_lookahead, mdp.horizon());
  OracleBundle bundle = build_oracle(mdp, pi, max_n);
  if (config.corrupt_hindsight && inst.id == first_instance_id(config)) bundle = corrupt(std::move(bundle));
  const auto oracle = std::make_shared<const OracleBundle>(std::move(bundle));

  if (config.wants(Check::BayesIdentity)) {
    const BayesCheck b = check_bayes_identity(*oracle, pi);
    t.assert_le(Check::BayesIdentity, at(inst, b.state, b.action, b.k, "bayes_identity"), b.max_error, tol::kBayes);
  }

  const ValueFunction v_hat = config.exact_value ? oracle->v : ValueFunction::zeros(mdp);
  const double residual = bellman_residual(mdp, pi, v_hat);
  const bool exact_v = residual <= tol::kBellman;
  if (!exact_v) {
    const std::string why = "precondition unmet, skipped: bellman residual " + format_double(residual) + " > " +
                            format_double(tol::kBellman);
    for (Check c : {Check::VarianceOrdering, Check::CrossTerms, Check::CovarianceIdentities}) t.skipped[c] = why;
  }

  std::vector<ValueFunction> values{v_hat};
  for (int j = 0; j < config.random_values; ++j) {
    values.push_back(random_value(mdp, 2.0, (config.seed * 104729 + inst.index) * 31 + static_cast<std::uint64_t>(j)));
  }
  const EnumerationOptions opts{config.enumeration_cap};
  const EstimatorInputs base = EstimatorInputs::make(mdp, pi, v_hat, oracle, max_n);
  const int num_actions = mdp.num_actions();

  for (int s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (int n = 1; n <= max_n; ++n) {
      const EstimatorInputs in = base.with_lookahead(n);
      const auto paths = enumerate_trajectories(mdp, pi, s, n, opts);

      if (config.wants(Check::MeanEquality)) {
        for (const auto& v : values) {
          const EstimatorInputs iv = in.with_value(v);
          const MomentReport mc = exact_moments(paths, iv, EstimatorTag::MC);
          const MomentReport dh = exact_moments(paths, iv, EstimatorTag::DELTA_HCA);
          for (int a = 0; a < num_actions; ++a) {
            t.assert_le(Check::MeanEquality, at(inst, s, a, n, "|E[dHCA] - E[MC]|"), std::abs(dh.mean(a) - mc.mean(a)),
                        tol::kIdentity);
          }
        }
      }
      if (!exact_v) {
        if (config.wants(Check::UpdateVariance)) {
          const PGConfig pg(1.0, inst.params);
          for (EstimatorTag tag : {EstimatorTag::MC, EstimatorTag::DELTA_HCA}) {
            const auto u = pg_update_variance(mdp, pg, s, in, tag, opts);
            t.assert_le(Check::UpdateVariance, at(inst, s, -1, n, "update variance assembly gap " + to_string(tag)),
                        u.max_discrepancy, tol::kIdentity);
          }
        }
        continue;
      }

      const MomentReport mc = exact_moments(paths, in, EstimatorTag::MC);
      const MomentReport dh = exact_moments(paths, in, EstimatorTag::DELTA_HCA);
      if (config.wants(Check::VarianceOrdering)) {
        for (int a = 0; a < num_actions; ++a) {
          t.assert_le(Check::VarianceOrdering, at(inst, s, a, n, "Var[dHCA] - Var[MC]"),
                      dh.variance(a) - mc.variance(a), tol::kIdentity);
        }
      }
      if (config.wants(Check::CrossTerms)) {
        for (EstimatorTag tag : {EstimatorTag::MC, EstimatorTag::DELTA_HCA}) {
          const MomentReport& m = tag == EstimatorTag::MC ? mc : dh;
          for (const auto& d : variance_decomposition(mdp, pi, s, in, tag, opts)) {
            t.assert_le(Check::CrossTerms, at(inst, s, d.action, n, "max |cross term| " + to_string(tag)),
                        d.max_abs_cross_term(), tol::kIdentity);
            t.assert_le(Check::CrossTerms, at(inst, s, d.action, n, "|Var - sum of per-k terms| " + to_string(tag)),
                        std::abs(m.variance(d.action) - d.diagonal_total()), tol::kIdentity);
          }
        }
      }
      if (config.wants(Check::CovarianceIdentities)) {
        const CovarianceCheck c = cross_action_covariance_check(mdp, pi, s, in, opts);
        for (const auto& p : c.pairs) {
          t.assert_le(Check::CovarianceIdentities, at(inst, s, p.a, n, "|Cov[MC] + A(a)A(b)| with b=" + std::to_string(p.b)),
                      std::abs(p.mc_covariance - p.mc_expected), tol::kIdentity);
          t.assert_le(Check::CovarianceIdentities,
                      at(inst, s, p.a, n, "|Cov[dHCA] - closed form| with b=" + std::to_string(p.b)),
                      std::abs(p.dhca_covariance - p.dhca_closed_form), tol::kIdentity);
          t.assert_le(Check::CovarianceIdentities, at(inst, s, p.a, n, "Cov[MC] - Cov[dHCA] with b=" + std::to_string(p.b)),
                      p.mc_covariance - p.dhca_covariance, tol::kIdentity);
        }
      }
      if (config.wants(Check::UpdateVariance)) {
        const PGConfig pg(1.0, inst.params);
        const auto umc = pg_update_variance(mdp, pg, s, in, EstimatorTag::MC, opts);
        const auto udh = pg_update_variance(mdp, pg, s, in, EstimatorTag::DELTA_HCA, opts);
        t.assert_le(Check::UpdateVariance, at(inst, s, -1, n, "update variance assembly gap MC"), umc.max_discrepancy,
                    tol::kIdentity);
        t.assert_le(Check::UpdateVariance, at(inst, s, -1, n, "update variance assembly gap DELTA_HCA"),
                    udh.max_discrepancy, tol::kIdentity);
        if (num_actions == 2) {
          t.assert_le(Check::UpdateVariance, at(inst, s, -1, n, "update trace dHCA - MC"),
                      udh.total_trace - umc.total_trace, tol::kIdentity);
        }
      }
    }
  }
  return t;
}

}  // namespace

VerifyResult run_verify(const VerifyConfig& config, unsigned workers) {
  const std::vector<Instance> instances = instance_set(config);
  std::vector<Tally> tallies(instances.size());
  parallel_for(instances.size(), workers, [&](std::size_t i) { tallies[i] = verify_instance(config, instances[i]); });

  VerifyResult result;
  for (const auto& inst : instances) result.instances.push_back(inst.id);
  for (Check c : config.checks) {
    CheckSummary summary;
    summary.check = c;
    for (const auto& t : tallies) {
      if (auto it = t.assertions.find(c); it != t.assertions.end()) summary.assertions += it->second;
      if (auto it = t.skipped.find(c); it != t.skipped.end()) {
        summary.skipped = true;
        summary.reason = it->second;
      }
      for (const auto& [check, f] : t.failures) {
        if (check == c) ++summary.failures;
      }
    }
    result.checks.push_back(summary);
  }
  for (const auto& t : tallies) {
    for (const auto& [check, f] : t.failures) result.failures.push_back(f);
  }
  return result;
}

Json to_json(const VerifyResult& r, std::size_t max_failures_listed) {
  Json doc;
  doc["tool"] = kToolName;
  doc["version"] = kToolVersion;
  doc["passed"] = r.passed();
  doc["instances"] = r.instances.size();
  Json checks = Json::array();
  for (const auto& c : r.checks) {
    Json entry{{"check", to_string(c.check)}, {"assertions", c.assertions}, {"failures", c.failures}};
    if (c.failures > 0) {
      entry["status"] = "failed";
    } else if (c.skipped && c.assertions == 0) {
      entry["status"] = "skipped";
    } else {
      entry["status"] = "passed";
    }
    if (c.skipped) entry["note"] = c.reason;
    checks.push_back(std::move(entry));
  }
  doc["checks"] = std::move(checks);
  Json failures = Json::array();
  for (std::size_t i = 0; i < r.failures.size() && i < max_failures_listed; ++i) {
    const auto& f = r.failures[i];
    failures.push_back({{"mdp_id", f.mdp_id},
                        {"s", f.state},
                        {"a", f.action},
                        {"N", f.lookahead},
                        {"quantity", f.quantity},
                        {"got", f.got},
                        {"bound", f.bound}});
  }
  doc["failure_count"] = r.failures.size();
  doc["failures"] = std::move(failures);
  return doc;
}

}  // namespace hca::lab
