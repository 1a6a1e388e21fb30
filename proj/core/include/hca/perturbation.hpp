#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hca/analysis.hpp"
#include "hca/estimators.hpp"
#include "hca/oracle.hpp"

namespace hca {

enum class PerturbTarget { ValueFunction, HindsightTable };
enum class PerturbMode { AdditiveNoise, SystematicShift };

std::string to_string(PerturbTarget target);
std::string to_string(PerturbMode mode);
PerturbTarget parse_perturb_target(const std::string& name);
PerturbMode parse_perturb_mode(const std::string& name);

/// Controlled error injected into v_hat or the hindsight table. epsilon = 0
/// reproduces the input bit-for-bit.
struct PerturbSpec {
  double epsilon = 0.0;
  PerturbTarget target = PerturbTarget::ValueFunction;
  PerturbMode mode = PerturbMode::AdditiveNoise;
  std::uint64_t seed = 0;
};

/// additive_noise: + U[-eps, eps] per non-terminal state.
/// systematic_shift: + eps on every non-terminal state.
ValueFunction perturb_value(const ValueFunction& v, const PerturbSpec& spec);

/// For every reachable (k, s, s'): additive_noise adds U[-eps, eps] to each
/// action entry, systematic_shift adds eps to action 0; entries are then
/// clipped at 0 and renormalized. The mask and every other field of the
/// bundle are untouched.
OracleBundle perturb_hindsight(const OracleBundle& bundle, const PerturbSpec& spec);

struct CurveRow {
  double epsilon = 0.0;
  PerturbTarget target = PerturbTarget::ValueFunction;
  PerturbMode mode = PerturbMode::AdditiveNoise;
  EstimatorTag tag = EstimatorTag::MC;
  int state = 0;
  int action = 0;
  double mean = 0.0;
  double bias = 0.0;  // mean - A_pi(a, s) of the unperturbed oracle
  double variance = 0.0;
};

/// Exact moments at every grid point for every estimator, sorted by epsilon
/// (stable in grid order otherwise).
std::vector<CurveRow> sweep(const TabularMDP& mdp, const Policy& policy, int s, const EstimatorInputs& in,
                            std::span<const PerturbSpec> grid, std::span<const EstimatorTag> tags,
                            const EnumerationOptions& options = {});

/// Header: epsilon,target,mode,estimator,state,action,bias,variance
void write_curve_csv(std::ostream& out, std::span<const CurveRow> rows);

}  // namespace hca
