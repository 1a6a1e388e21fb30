#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hca/estimators.hpp"
#include "hca/mdp.hpp"
#include "hca/trajectory.hpp"

namespace hca {

enum class MomentMode { Exact, Empirical };

/// Mean, variance and cross-action covariance of an advantage estimator
/// conditioned on S_t = state.
struct MomentReport {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  Eigen::MatrixXd covariance;
  MomentMode mode = MomentMode::Exact;
  // Empirical mode only.
  std::size_t sample_count = 0;
  Eigen::VectorXd mean_stderr;
  Eigen::VectorXd variance_stderr;
  // Conditioning.
  int state = -1;
  int t = 0;
  int lookahead = 0;
  EstimatorTag tag = EstimatorTag::MC;
};

/// Exact moments by enumerating every trajectory from `s` to the depth the
/// estimator reads. Conditioning on S_t = s is realized at t = 0 (Markov).
MomentReport exact_moments(const TabularMDP& mdp, const Policy& policy, int s, const EstimatorInputs& in,
                           EstimatorTag tag, const EnumerationOptions& options = {});

/// Same, over a caller-supplied enumeration (all starting at the same state,
/// at least as deep as the estimator reads).
MomentReport exact_moments(std::span<const WeightedTrajectory> paths, const EstimatorInputs& in, EstimatorTag tag);

/// Unbiased sample moments. The variance standard error uses the exact
/// finite-sample variance of the unbiased sample variance with plug-in
/// central moments: Var(s^2) = m4/n - s^4 (n-3) / (n (n-1)).
/// Throws InvalidArgument with fewer than two samples.
MomentReport empirical_moments(std::span<const AdvantageEstimate> samples, int state = -1, int lookahead = 0);

/// Split of one action's estimator into its per-k TD-error terms
/// X_k = w_k delta_{t+k}, with Var(estimator) = sum_{k,j} gamma^{k+j} cov(X_k, X_j).
struct DecompositionReport {
  int action = 0;
  Eigen::VectorXd per_k_variance;  // Var(X_k), k = 0..N-1
  Eigen::MatrixXd cross_terms;     // cov(X_k, X_j) for k != j; zero diagonal
  double total = 0.0;              // sum_k gamma^{2k} Var(X_k) + 2 sum_{k<j} gamma^{k+j} cov(X_k, X_j)
  double discount = 1.0;

  double max_abs_cross_term() const;
  /// sum_k gamma^{2k} Var(X_k)
  double diagonal_total() const;
};

/// One report per action. Defined for the TD-error estimators (MC, DELTA_HCA);
/// HCA throws InvalidArgument.
std::vector<DecompositionReport> variance_decomposition(const TabularMDP& mdp, const Policy& policy, int s,
                                                        const EstimatorInputs& in, EstimatorTag tag,
                                                        const EnumerationOptions& options = {});

struct CovariancePair {
  int a = 0;
  int b = 0;
  double mc_covariance = 0.0;
  double mc_expected = 0.0;  // -A(a,s) A(b,s)
  double dhca_covariance = 0.0;
  double dhca_closed_form = 0.0;
  bool mc_matches = false;
  bool closed_form_matches = false;
  bool ordering_holds = false;  // dhca >= mc - tol
};

struct CovarianceCheck {
  int state = 0;
  int lookahead = 0;
  double bellman_residual = 0.0;
  Eigen::MatrixXd mc_covariance;
  Eigen::MatrixXd dhca_covariance;
  std::vector<CovariancePair> pairs;

  bool passed() const;
};

/// Cross-action covariance identities for MC and delta-HCA. Requires
/// bellman_residual(v_hat) <= tol::kBellman, otherwise throws
/// PreconditionUnmet naming the residual.
CovarianceCheck cross_action_covariance_check(const TabularMDP& mdp, const Policy& policy, int s,
                                              const EstimatorInputs& in, const EnumerationOptions& options = {});

class PGConfig {
 public:
  PGConfig(double step_size, SoftmaxPolicy params);

  double step_size() const { return step_size_; }
  const SoftmaxPolicy& params() const { return params_; }

 private:
  double step_size_;
  SoftmaxPolicy params_;
};

/// Variance of Delta = sum_a A_hat(a) grad pi(a|s), per coordinate of theta.
struct UpdateVarianceReport {
  int state = 0;
  EstimatorTag tag = EstimatorTag::MC;
  Eigen::MatrixXd per_coordinate_variance;  // direct enumeration of Delta
  Eigen::MatrixXd assembled_variance;       // from per-action (co)variances
  Eigen::MatrixXd variance_part;            // sum_a grad^2 Var(A_hat(a))
  Eigen::MatrixXd covariance_part;          // 2 sum_{a<a'} grad grad' cov
  double total_trace = 0.0;
  double max_discrepancy = 0.0;  // max |direct - assembled|
  double step_size = 0.0;
  double step_variance_trace = 0.0;  // alpha^2 * total_trace
};

/// inputs.policy must equal softmax(pg.params()) within tol::kPolicyMatch.
UpdateVarianceReport pg_update_variance(const TabularMDP& mdp, const PGConfig& pg, int s, const EstimatorInputs& in,
                                        EstimatorTag tag, const EnumerationOptions& options = {});

}  // namespace hca
