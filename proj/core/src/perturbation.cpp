#include "hca/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <utility>

#include "hca/errors.hpp"
#include "hca/random.hpp"
#include "hca/serialization.hpp"

namespace hca {
namespace {

void require_epsilon(const PerturbSpec& spec) {
  if (!(std::isfinite(spec.epsilon) && spec.epsilon >= 0.0)) throw InvalidArgument("perturbation epsilon must be >= 0");
}

}  // namespace

std::string to_string(PerturbTarget target) {
  return target == PerturbTarget::ValueFunction ? "value_function" : "hindsight_table";
}

std::string to_string(PerturbMode mode) {
  return mode == PerturbMode::AdditiveNoise ? "additive_noise" : "systematic_shift";
}

PerturbTarget parse_perturb_target(const std::string& name) {
  if (name == "value_function") return PerturbTarget::ValueFunction;
  if (name == "hindsight_table") return PerturbTarget::HindsightTable;
  throw InvalidArgument("unknown perturbation target '" + name + "'");
}

PerturbMode parse_perturb_mode(const std::string& name) {
  if (name == "additive_noise") return PerturbMode::AdditiveNoise;
  if (name == "systematic_shift") return PerturbMode::SystematicShift;
  throw InvalidArgument("unknown perturbation mode '" + name + "'");
}

ValueFunction perturb_value(const ValueFunction& v, const PerturbSpec& spec) {
  require_epsilon(spec);
  if (spec.target != PerturbTarget::ValueFunction) throw InvalidArgument("perturb_value needs target value_function");
  if (spec.epsilon == 0.0) return v;
  PhiloxStream rng(spec.seed, 0);
  Eigen::VectorXd values = v.values();
  for (int s = 0; s < v.size(); ++s) {
    const double noise = spec.mode == PerturbMode::AdditiveNoise ? rng.uniform(-spec.epsilon, spec.epsilon)
                                                                 : spec.epsilon;
    if (!v.terminal()[s]) values(s) += noise;
  }
  return v.with_values(std::move(values));
}

OracleBundle perturb_hindsight(const OracleBundle& bundle, const PerturbSpec& spec) {
  require_epsilon(spec);
  if (spec.target != PerturbTarget::HindsightTable) {
    throw InvalidArgument("perturb_hindsight needs target hindsight_table");
  }
  if (spec.epsilon == 0.0) return bundle;
  const HindsightTable& h = bundle.hindsight;
  std::vector<double> values = h.values();
  PhiloxStream rng(spec.seed, 0);
  const int m = h.num_actions();
  for (int k = 1; k <= h.lookahead(); ++k) {
    for (int s = 0; s < h.num_states(); ++s) {
      for (int s2 = 0; s2 < h.num_states(); ++s2) {
        if (!h.reachable(k, s, s2)) continue;
        const std::size_t base = ((static_cast<std::size_t>(k - 1) * h.num_states() + s) * h.num_states() + s2) * m;
        double total = 0.0;
        for (int a = 0; a < m; ++a) {
          double x = values[base + a];
          if (spec.mode == PerturbMode::AdditiveNoise) {
            x += rng.uniform(-spec.epsilon, spec.epsilon);
          } else if (a == 0) {
            x += spec.epsilon;
          }
          values[base + a] = std::max(x, 0.0);
          total += values[base + a];
        }
        if (total > 0.0) {
          for (int a = 0; a < m; ++a) values[base + a] /= total;
        } else {
          for (int a = 0; a < m; ++a) values[base + a] = 1.0 / m;
        }
      }
    }
  }
  OracleBundle out = bundle;
  out.hindsight = HindsightTable(h.lookahead(), h.num_states(), m, std::move(values), h.mask());
  return out;
}

std::vector<CurveRow> sweep(const TabularMDP& mdp, const Policy& policy, int s, const EstimatorInputs& in,
                            std::span<const PerturbSpec> grid, std::span<const EstimatorTag> tags,
                            const EnumerationOptions& options) {
  if (!in.oracle) throw InvalidArgument("estimator inputs carry no oracle bundle");
  std::vector<PerturbSpec> order(grid.begin(), grid.end());
  std::stable_sort(order.begin(), order.end(),
                   [](const PerturbSpec& a, const PerturbSpec& b) { return a.epsilon < b.epsilon; });

  std::vector<CurveRow> rows;
  for (const PerturbSpec& spec : order) {
    EstimatorInputs perturbed = in;
    if (spec.target == PerturbTarget::ValueFunction) {
      perturbed.v_hat = perturb_value(in.v_hat, spec);
    } else if (spec.epsilon != 0.0) {
      perturbed.oracle = std::make_shared<const OracleBundle>(perturb_hindsight(*in.oracle, spec));
    }
    for (EstimatorTag tag : tags) {
      const MomentReport m = exact_moments(mdp, policy, s, perturbed, tag, options);
      for (int a = 0; a < m.mean.size(); ++a) {
        rows.push_back({spec.epsilon, spec.target, spec.mode, tag, s, a, m.mean(a), m.mean(a) - in.oracle->adv(s, a),
                        m.variance(a)});
      }
    }
  }
  return rows;
}

void write_curve_csv(std::ostream& out, std::span<const CurveRow> rows) {
  out << "epsilon,target,mode,estimator,state,action,bias,variance\n";
  for (const auto& r : rows) {
    out << format_double(r.epsilon) << ',' << to_string(r.target) << ',' << to_string(r.mode) << ','
        << to_string(r.tag) << ',' << r.state << ',' << r.action << ',' << format_double(r.bias) << ','
        << format_double(r.variance) << '\n';
  }
}

}  // namespace hca
