#include "hca/analysis.hpp"

#include <cmath>
#include <utility>

#include "hca/errors.hpp"
#include "hca/oracle.hpp"
#include "hca/tolerances.hpp"

namespace hca {
namespace {

std::vector<WeightedTrajectory> enumerate_from(const TabularMDP& mdp, const Policy& policy, int s, int depth,
                                               const EnumerationOptions& options) {
  if (s < 0 || s >= mdp.num_states()) throw InvalidArgument("state " + std::to_string(s) + " out of range");
  if (mdp.is_terminal(s)) throw InvalidArgument("state " + std::to_string(s) + " is terminal; no action is taken there");
  return enumerate_trajectories(mdp, policy, s, depth, options);
}

// Weighted mean and covariance of row vectors `xs`.
void weighted_moments(const std::vector<Eigen::VectorXd>& xs, std::span<const WeightedTrajectory> paths,
                      Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
  const Eigen::Index dim = xs.front().size();
  mean = Eigen::VectorXd::Zero(dim);
  for (std::size_t i = 0; i < xs.size(); ++i) mean += paths[i].probability * xs[i];
  cov = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Eigen::VectorXd d = xs[i] - mean;
    for (Eigen::Index a = 0; a < dim; ++a)
      for (Eigen::Index b = a; b < dim; ++b) cov(a, b) += paths[i].probability * d(a) * d(b);
  }
  for (Eigen::Index a = 0; a < dim; ++a)
    for (Eigen::Index b = 0; b < a; ++b) cov(a, b) = cov(b, a);
}

// X_k = w_k delta_k for k = 0..N-1, for action a at t = 0.
Eigen::VectorXd term_values(const Trajectory& traj, const EstimatorInputs& in, EstimatorTag tag, int a) {
  const int s = traj.state(0);
  const double pi = in.policy(s, a);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(in.lookahead);
  const bool chosen = traj.action(0) == a;
  for (int k = 0; k < in.lookahead; ++k) {
    const double delta = td_error(traj, in.v_hat, in.discount, k);
    if (k == 0 || tag == EstimatorTag::MC) {
      x(k) = chosen ? delta / pi : 0.0;
    } else if (!(traj.absorbed() && k >= traj.effective_length())) {
      x(k) = in.oracle->hindsight.at(k, s, traj.state(k), a) / pi * delta;
    }
  }
  return x;
}

}  // namespace

MomentReport exact_moments(const TabularMDP& mdp, const Policy& policy, int s, const EstimatorInputs& in,
                           EstimatorTag tag, const EnumerationOptions& options) {
  const auto paths = enumerate_from(mdp, policy, s, required_depth(tag, in), options);
  return exact_moments(paths, in, tag);
}

MomentReport exact_moments(std::span<const WeightedTrajectory> paths, const EstimatorInputs& in, EstimatorTag tag) {
  if (paths.empty()) throw InvalidArgument("exact_moments needs at least one trajectory");
  std::vector<Eigen::VectorXd> xs;
  xs.reserve(paths.size());
  for (const auto& p : paths) xs.push_back(estimate(tag, p.trajectory, 0, in).per_action);

  MomentReport r;
  weighted_moments(xs, paths, r.mean, r.covariance);
  r.variance = r.covariance.diagonal();
  r.mode = MomentMode::Exact;
  r.state = paths.front().trajectory.start_state();
  r.t = 0;
  r.lookahead = required_depth(tag, in);
  r.tag = tag;
  return r;
}

MomentReport empirical_moments(std::span<const AdvantageEstimate> samples, int state, int lookahead) {
  if (samples.size() < 2) throw InvalidArgument("empirical_moments needs at least two samples");
  const auto n = static_cast<double>(samples.size());
  const Eigen::Index dim = samples.front().per_action.size();

  MomentReport r;
  r.mean = Eigen::VectorXd::Zero(dim);
  for (const auto& x : samples) {
    if (x.per_action.size() != dim) throw InvalidArgument("samples have inconsistent action counts");
    r.mean += x.per_action;
  }
  r.mean /= n;

  r.covariance = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd m4 = Eigen::VectorXd::Zero(dim);
  for (const auto& x : samples) {
    const Eigen::VectorXd d = x.per_action - r.mean;
    r.covariance += d * d.transpose();
    m4 += d.array().pow(4).matrix();
  }
  r.covariance /= (n - 1.0);
  r.covariance = 0.5 * (r.covariance + r.covariance.transpose());
  m4 /= n;
  r.variance = r.covariance.diagonal();

  r.mean_stderr = (r.variance.array() / n).sqrt().matrix();
  r.variance_stderr.resize(dim);
  for (Eigen::Index a = 0; a < dim; ++a) {
    const double s2 = r.variance(a);
    const double var_of_var = m4(a) / n - s2 * s2 * (n - 3.0) / (n * (n - 1.0));
    r.variance_stderr(a) = std::sqrt(std::max(var_of_var, 0.0));
  }
  r.mode = MomentMode::Empirical;
  r.sample_count = samples.size();
  r.state = state;
  r.t = samples.front().t;
  r.lookahead = lookahead;
  r.tag = samples.front().tag;
  return r;
}

double DecompositionReport::max_abs_cross_term() const {
  return cross_terms.size() == 0 ? 0.0 : cross_terms.cwiseAbs().maxCoeff();
}

double DecompositionReport::diagonal_total() const {
  double total = 0.0;
  double w = 1.0;
  for (Eigen::Index k = 0; k < per_k_variance.size(); ++k) {
    total += w * per_k_variance(k);
    w *= discount * discount;
  }
  return total;
}

std::vector<DecompositionReport> variance_decomposition(const TabularMDP& mdp, const Policy& policy, int s,
                                                        const EstimatorInputs& in, EstimatorTag tag,
                                                        const EnumerationOptions& options) {
  if (tag == EstimatorTag::HCA) {
    throw InvalidArgument("variance decomposition is defined for the TD-error estimators (MC, DELTA_HCA)");
  }
  if (tag == EstimatorTag::DELTA_HCA && !in.oracle) throw InvalidArgument("estimator inputs carry no oracle bundle");
  const auto paths = enumerate_from(mdp, policy, s, in.lookahead, options);
  const int n = in.lookahead;

  std::vector<DecompositionReport> out;
  for (int a = 0; a < in.policy.num_actions(); ++a) {
    if (tag == EstimatorTag::DELTA_HCA && in.policy(s, a) <= 0.0) {
      throw InvalidArgument("delta-HCA terms are undefined when pi(a|s) = 0");
    }
    std::vector<Eigen::VectorXd> xs;
    xs.reserve(paths.size());
    for (const auto& p : paths) {
      xs.push_back(in.policy(s, a) > 0.0 ? term_values(p.trajectory, in, tag, a) : Eigen::VectorXd::Zero(n));
    }
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    weighted_moments(xs, paths, mean, cov);

    DecompositionReport d;
    d.action = a;
    d.discount = in.discount;
    d.per_k_variance = cov.diagonal();
    d.cross_terms = cov;
    d.cross_terms.diagonal().setZero();
    double total = 0.0;
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j) total += std::pow(in.discount, k + j) * cov(k, j);
    d.total = total;
    out.push_back(std::move(d));
  }
  return out;
}

bool CovarianceCheck::passed() const {
  for (const auto& p : pairs) {
    if (!p.mc_matches || !p.closed_form_matches || !p.ordering_holds) return false;
  }
  return true;
}

CovarianceCheck cross_action_covariance_check(const TabularMDP& mdp, const Policy& policy, int s,
                                              const EstimatorInputs& in, const EnumerationOptions& options) {
  if (!in.oracle) throw InvalidArgument("estimator inputs carry no oracle bundle");
  const double residual = bellman_residual(mdp, policy, in.v_hat);
  if (!(residual <= tol::kBellman)) {
    throw PreconditionUnmet("cross-action covariance identities need v_hat = V_pi; Bellman residual is " +
                            std::to_string(residual));
  }
  const auto paths = enumerate_from(mdp, policy, s, in.lookahead, options);
  const MomentReport mc = exact_moments(paths, in, EstimatorTag::MC);
  const MomentReport dhca = exact_moments(paths, in, EstimatorTag::DELTA_HCA);
  const int num_actions = in.policy.num_actions();
  const auto& adv = in.oracle->adv;

  // sum_{k>=1} gamma^{2k} E[p_k(a) / pi(a) * p_k(b) / pi(b) * delta_k^2]
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(num_actions, num_actions);
  for (const auto& p : paths) {
    const Trajectory& traj = p.trajectory;
    double w = 1.0;
    for (int k = 1; k < in.lookahead; ++k) {
      w *= in.discount * in.discount;
      if (traj.absorbed() && k >= traj.effective_length()) break;
      const double delta = td_error(traj, in.v_hat, in.discount, k);
      const int later = traj.state(k);
      for (int a = 0; a < num_actions; ++a) {
        const double ra = in.oracle->hindsight.at(k, s, later, a) / in.policy(s, a);
        for (int b = 0; b < num_actions; ++b) {
          const double rb = in.oracle->hindsight.at(k, s, later, b) / in.policy(s, b);
          second(a, b) += p.probability * w * ra * rb * delta * delta;
        }
      }
    }
  }

  CovarianceCheck check;
  check.state = s;
  check.lookahead = in.lookahead;
  check.bellman_residual = residual;
  check.mc_covariance = mc.covariance;
  check.dhca_covariance = dhca.covariance;
  for (int a = 0; a < num_actions; ++a) {
    for (int b = a + 1; b < num_actions; ++b) {
      CovariancePair pair;
      pair.a = a;
      pair.b = b;
      pair.mc_covariance = mc.covariance(a, b);
      pair.mc_expected = -adv(s, a) * adv(s, b);
      pair.dhca_covariance = dhca.covariance(a, b);
      pair.dhca_closed_form = second(a, b) - adv(s, a) * adv(s, b);
      pair.mc_matches = std::abs(pair.mc_covariance - pair.mc_expected) <= tol::kIdentity;
      pair.closed_form_matches = std::abs(pair.dhca_covariance - pair.dhca_closed_form) <= tol::kIdentity;
      pair.ordering_holds = pair.dhca_covariance >= pair.mc_covariance - tol::kIdentity;
      check.pairs.push_back(pair);
    }
  }
  return check;
}

PGConfig::PGConfig(double step_size, SoftmaxPolicy params) : step_size_(step_size), params_(std::move(params)) {
  if (!std::isfinite(step_size_) || step_size_ <= 0.0) {
    throw InvalidArgument("policy-gradient step size must be finite and positive");
  }
}

UpdateVarianceReport pg_update_variance(const TabularMDP& mdp, const PGConfig& pg, int s, const EstimatorInputs& in,
                                        EstimatorTag tag, const EnumerationOptions& options) {
  const Policy pi = softmax_policy(pg.params());
  if (pi.num_states() != in.policy.num_states() || pi.num_actions() != in.policy.num_actions() ||
      (pi.probs() - in.policy.probs()).cwiseAbs().maxCoeff() > tol::kPolicyMatch) {
    throw InvalidArgument("estimator policy is not the softmax of the policy-gradient parameters");
  }
  const int num_states = pi.num_states();
  const int num_actions = pi.num_actions();
  const auto paths = enumerate_from(mdp, in.policy, s, required_depth(tag, in), options);

  // grads(a, b) = d pi(a|s) / d theta[s][b]; every other row of theta has zero gradient.
  Eigen::MatrixXd grads(num_actions, num_actions);
  for (int a = 0; a < num_actions; ++a) grads.row(a) = softmax_gradient(pg.params(), s, a).row(s);

  std::vector<Eigen::VectorXd> estimates;
  std::vector<Eigen::VectorXd> updates;
  estimates.reserve(paths.size());
  updates.reserve(paths.size());
  for (const auto& p : paths) {
    Eigen::VectorXd x = estimate(tag, p.trajectory, 0, in).per_action;
    updates.push_back(grads.transpose() * x);
    estimates.push_back(std::move(x));
  }

  Eigen::VectorXd mean;
  Eigen::MatrixXd update_cov;
  weighted_moments(updates, paths, mean, update_cov);
  Eigen::MatrixXd adv_cov;
  weighted_moments(estimates, paths, mean, adv_cov);

  UpdateVarianceReport r;
  r.state = s;
  r.tag = tag;
  r.step_size = pg.step_size();
  r.per_coordinate_variance = Eigen::MatrixXd::Zero(num_states, num_actions);
  r.assembled_variance = Eigen::MatrixXd::Zero(num_states, num_actions);
  r.variance_part = Eigen::MatrixXd::Zero(num_states, num_actions);
  r.covariance_part = Eigen::MatrixXd::Zero(num_states, num_actions);
  for (int b = 0; b < num_actions; ++b) {
    double var_part = 0.0;
    double cov_part = 0.0;
    for (int a = 0; a < num_actions; ++a) {
      var_part += grads(a, b) * grads(a, b) * adv_cov(a, a);
      for (int a2 = a + 1; a2 < num_actions; ++a2) cov_part += 2.0 * grads(a, b) * grads(a2, b) * adv_cov(a, a2);
    }
    r.per_coordinate_variance(s, b) = update_cov(b, b);
    r.variance_part(s, b) = var_part;
    r.covariance_part(s, b) = cov_part;
    r.assembled_variance(s, b) = var_part + cov_part;
  }
  r.total_trace = r.per_coordinate_variance.sum();
  r.max_discrepancy = (r.per_coordinate_variance - r.assembled_variance).cwiseAbs().maxCoeff();
  r.step_variance_trace = pg.step_size() * pg.step_size() * r.total_trace;
  return r;
}

}  // namespace hca
