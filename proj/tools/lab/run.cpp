#include "lab/run.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "hca/analysis.hpp"
#include "hca/environments.hpp"
#include "hca/errors.hpp"
#include "hca/oracle.hpp"
#include "hca/perturbation.hpp"
#include "lab/util.hpp"

namespace hca::lab {
namespace {

struct Environment {
  TabularMDP mdp;
  Policy default_policy;
};

Environment build_environment(const EnvironmentSpec& spec) {
  if (spec.kind == "figure1") {
    Figure1 fig = figure1_mdp();
    return {std::move(fig.mdp), std::move(fig.policy)};
  }
  TabularMDP mdp = [&] {
    const Json& p = spec.params;
    if (spec.kind == "chain") {
      return chain_mdp(p["length"].get<int>(), p["slip"].get<double>(), p["reward_at_end"].get<double>(),
                       p["discount"].get<double>(), p["horizon"].get<int>());
    }
    if (spec.kind == "random") {
      RandomMdpConfig c;
      c.num_states = p.value("num_states", c.num_states);
      c.num_actions = p.value("num_actions", c.num_actions);
      c.branching = p.value("branching", c.branching);
      c.reward_scale = p.value("reward_scale", c.reward_scale);
      c.terminal_mass = p.value("terminal_mass", c.terminal_mass);
      c.discount = p.value("discount", c.discount);
      c.horizon = p.value("horizon", c.horizon);
      c.seed = p.value("seed", c.seed);
      return random_mdp(c);
    }
    return load_mdp(spec.path);
  }();
  Policy uniform = Policy::uniform(mdp.num_states(), mdp.num_actions());
  return {std::move(mdp), std::move(uniform)};
}

void require_shape(const Eigen::MatrixXd& m, const TabularMDP& mdp, const char* what) {
  if (m.rows() != mdp.num_states() || m.cols() != mdp.num_actions()) {
    throw InvalidArgument(std::string("policy.") + what + " must be " + std::to_string(mdp.num_states()) + " x " +
                          std::to_string(mdp.num_actions()));
  }
}

Policy build_policy(const PolicySpec& spec, const Environment& env) {
  if (spec.kind == "default") return env.default_policy;
  if (spec.kind == "uniform") return Policy::uniform(env.mdp.num_states(), env.mdp.num_actions());
  require_shape(spec.matrix, env.mdp, spec.kind.c_str());
  if (spec.kind == "softmax") return softmax_policy(SoftmaxPolicy(spec.matrix));
  return Policy(spec.matrix);
}

// Parameters whose softmax reproduces the policy, for the update-variance analysis.
SoftmaxPolicy softmax_params_for(const PolicySpec& spec, const Policy& pi) {
  if (spec.kind == "softmax") return SoftmaxPolicy(spec.matrix);
  if ((pi.probs().array() <= 0.0).any()) {
    throw InvalidArgument("update_variance needs a softmax-representable policy (all probabilities > 0)");
  }
  return SoftmaxPolicy(pi.probs().array().log().matrix());
}

ValueFunction build_value(const ValueSpec& spec, const TabularMDP& mdp, const OracleBundle& oracle) {
  if (spec.kind == "exact") return oracle.v;
  if (spec.kind == "zero") return ValueFunction::zeros(mdp);
  if (spec.values.size() != mdp.num_states()) {
    throw InvalidArgument("value.values must have " + std::to_string(mdp.num_states()) + " entries");
  }
  return ValueFunction(mdp, spec.values);
}

struct Cell {
  int state = 0;
  EstimatorSpec estimator;
};

struct CellResult {
  Json report;
  std::vector<MomentCsvRow> moment_rows;
  std::vector<MomentCsvRow> decomposition_rows;
  std::vector<CurveRow> curve_rows;
};

const char* depth_key(EstimatorTag tag) { return tag == EstimatorTag::HCA ? "K" : "N"; }

std::string csv_text(const std::vector<MomentCsvRow>& rows) {
  std::ostringstream out;
  write_moment_csv(out, rows);
  return out.str();
}

struct Context {
  const RunConfig& config;
  const TabularMDP& mdp;
  const Policy& pi;
  const EstimatorInputs& base;
  const std::optional<SoftmaxPolicy>& params;
  EnumerationOptions options;
};

MomentReport sampled_moments(const Context& ctx, int s, EstimatorTag tag, const EstimatorInputs& in) {
  const int depth = required_depth(tag, in);
  std::vector<AdvantageEstimate> estimates;
  estimates.reserve(ctx.config.samples);
  for (std::size_t i = 0; i < ctx.config.samples; ++i) {
    const Trajectory traj = sample_trajectory(ctx.mdp, ctx.pi, s, depth, ctx.config.seed, i);
    estimates.push_back(estimate(tag, traj, 0, in));
  }
  MomentReport r = empirical_moments(estimates, s, depth);
  r.tag = tag;
  r.lookahead = in.lookahead;
  return r;
}

CellResult run_cell(const Context& ctx, const Cell& cell) {
  const RunConfig& config = ctx.config;
  const EstimatorTag tag = cell.estimator.tag;
  const EstimatorInputs in = ctx.base.with_lookahead(cell.estimator.depth);
  const std::string& id = config.environment.id;

  CellResult out;
  Json& rep = out.report;
  rep["state"] = cell.state;
  rep["estimator"] = to_string(tag);
  rep[depth_key(tag)] = cell.estimator.depth;

  if (config.wants(Analysis::Moments)) {
    const MomentReport m = config.sampled ? sampled_moments(ctx, cell.state, tag, in)
                                          : exact_moments(ctx.mdp, ctx.pi, cell.state, in, tag, ctx.options);
    rep["moments"] = to_json(m);
    out.moment_rows = moment_csv_rows(id, m);
  }
  if (config.wants(Analysis::Decomposition)) {
    if (tag == EstimatorTag::HCA) {
      rep["decomposition"] = Json{{"skipped", "defined for the TD-error estimators only"}};
    } else {
      Json list = Json::array();
      for (const auto& d : variance_decomposition(ctx.mdp, ctx.pi, cell.state, in, tag, ctx.options)) {
        list.push_back(to_json(d));
        for (Eigen::Index k = 0; k < d.per_k_variance.size(); ++k) {
          out.decomposition_rows.push_back({id, cell.state, d.action, in.lookahead, to_string(tag),
                                            "per_k_variance_" + std::to_string(k), d.per_k_variance(k), {}});
        }
        out.decomposition_rows.push_back(
            {id, cell.state, d.action, in.lookahead, to_string(tag), "max_abs_cross_term", d.max_abs_cross_term(), {}});
        out.decomposition_rows.push_back(
            {id, cell.state, d.action, in.lookahead, to_string(tag), "total", d.total, {}});
      }
      rep["decomposition"] = std::move(list);
    }
  }
  if (config.wants(Analysis::UpdateVariance)) {
    const PGConfig pg(config.step_size, *ctx.params);
    rep["update_variance"] = to_json(pg_update_variance(ctx.mdp, pg, cell.state, in, tag, ctx.options));
  }
  if (config.wants(Analysis::PerturbationSweep)) {
    const PerturbationGrid& g = *config.perturbation;
    std::vector<PerturbSpec> grid;
    for (double eps : g.epsilons) grid.push_back({eps, g.target, g.mode, g.seed});
    const EstimatorTag tags[] = {tag};
    out.curve_rows = sweep(ctx.mdp, ctx.pi, cell.state, in, grid, tags, ctx.options);
  }
  return out;
}

Json covariance_entry(const Context& ctx, int s, int n) {
  Json entry{{"state", s}, {"N", n}};
  try {
    entry["check"] = to_json(cross_action_covariance_check(ctx.mdp, ctx.pi, s, ctx.base.with_lookahead(n), ctx.options));
    entry["status"] = "computed";
  } catch (const PreconditionUnmet& e) {
    entry["status"] = "precondition unmet, skipped";
    entry["reason"] = e.what();
  }
  return entry;
}

}  // namespace

OutputFiles execute_run(const RunConfig& config, const RunOptions& options) {
  const Environment env = build_environment(config.environment);
  const TabularMDP& mdp = env.mdp;
  const Policy pi = build_policy(config.policy, env);
  if (pi.num_states() != mdp.num_states() || pi.num_actions() != mdp.num_actions()) {
    throw InvalidArgument("policy shape does not match the environment");
  }
  std::optional<SoftmaxPolicy> params;
  if (config.wants(Analysis::UpdateVariance)) params = softmax_params_for(config.policy, pi);

  const std::vector<int> states = config.states.value_or(std::vector<int>{0});
  for (int s : states) {
    if (s < 0 || s >= mdp.num_states()) throw InvalidArgument("state " + std::to_string(s) + " out of range");
    if (mdp.is_terminal(s)) throw InvalidArgument("state " + std::to_string(s) + " is terminal");
  }

  int lookahead = 1;
  for (const auto& e : config.estimators) lookahead = std::max(lookahead, e.depth);
  if (lookahead > mdp.horizon()) {
    throw InvalidArgument("estimator depth " + std::to_string(lookahead) + " exceeds the horizon " +
                          std::to_string(mdp.horizon()));
  }
  const auto oracle = std::make_shared<const OracleBundle>(build_oracle(mdp, pi, lookahead));
  const ValueFunction v_hat = build_value(config.value, mdp, *oracle);
  const EstimatorInputs base = EstimatorInputs::make(mdp, pi, v_hat, oracle, lookahead);
  const Context ctx{config, mdp, pi, base, params, EnumerationOptions{config.enumeration_cap}};

  std::vector<Cell> cells;
  for (int s : states) {
    for (const auto& e : config.estimators) cells.push_back({s, e});
  }
  std::vector<CellResult> results(cells.size());
  parallel_for(cells.size(), options.workers, [&](std::size_t i) { results[i] = run_cell(ctx, cells[i]); });

  // Covariance checks pair MC with delta-HCA at each (state, N).
  std::vector<std::pair<int, int>> cov_keys;
  if (config.wants(Analysis::CovarianceCheck)) {
    for (int s : states) {
      std::set<int> seen;
      for (const auto& e : config.estimators) {
        if (e.tag != EstimatorTag::HCA && seen.insert(e.depth).second) cov_keys.emplace_back(s, e.depth);
      }
    }
  }
  std::vector<Json> cov(cov_keys.size());
  parallel_for(cov_keys.size(), options.workers,
               [&](std::size_t i) { cov[i] = covariance_entry(ctx, cov_keys[i].first, cov_keys[i].second); });

  Json report;
  report["tool"] = kToolName;
  report["version"] = kToolVersion;
  report["mdp_id"] = config.environment.id;
  report["mode"] = config.sampled ? "sampled" : "exact";
  report["value"] = config.value.kind;
  report["bellman_residual"] = bellman_residual(mdp, pi, v_hat);
  report["policy"] = policy_to_json(pi);
  Json cell_docs = Json::array();
  std::vector<MomentCsvRow> moment_rows, decomposition_rows;
  std::vector<CurveRow> curve_rows;
  for (auto& r : results) {
    cell_docs.push_back(std::move(r.report));
    moment_rows.insert(moment_rows.end(), r.moment_rows.begin(), r.moment_rows.end());
    decomposition_rows.insert(decomposition_rows.end(), r.decomposition_rows.begin(), r.decomposition_rows.end());
    curve_rows.insert(curve_rows.end(), r.curve_rows.begin(), r.curve_rows.end());
  }
  report["cells"] = std::move(cell_docs);
  if (config.wants(Analysis::CovarianceCheck)) report["covariance_checks"] = cov;
  if (config.wants(Analysis::PerturbationSweep)) {
    Json rows = Json::array();
    for (const auto& r : curve_rows) {
      rows.push_back({{"epsilon", r.epsilon},
                      {"target", to_string(r.target)},
                      {"mode", to_string(r.mode)},
                      {"estimator", to_string(r.tag)},
                      {"state", r.state},
                      {"action", r.action},
                      {"mean", r.mean},
                      {"bias", r.bias},
                      {"variance", r.variance}});
    }
    report["perturbation"] = std::move(rows);
  }

  OutputFiles files;
  files.emplace_back("report.json", report.dump(2) + "\n");
  if (config.wants(Analysis::Moments)) files.emplace_back("moments.csv", csv_text(moment_rows));
  if (config.wants(Analysis::Decomposition)) files.emplace_back("decomposition.csv", csv_text(decomposition_rows));
  if (config.wants(Analysis::PerturbationSweep)) {
    std::ostringstream out;
    write_curve_csv(out, curve_rows);
    files.emplace_back("perturbation.csv", out.str());
  }

  Json manifest;
  manifest["tool"] = kToolName;
  manifest["version"] = kToolVersion;
  manifest["config_sha256"] = options.config_sha256;
  manifest["overrides"] = options.overrides;
  manifest["mode"] = config.sampled ? "sampled" : "exact";
  Json seeds;
  seeds["sampling"] = config.seed;
  if (config.perturbation) seeds["perturbation"] = config.perturbation->seed;
  if (config.environment.kind == "random") seeds["environment"] = config.environment.params.value("seed", 0ULL);
  manifest["seeds"] = std::move(seeds);
  if (config.sampled) manifest["samples"] = config.samples;
  Json outputs = Json::array();
  for (const auto& [name, body] : files) outputs.push_back({{"file", name}, {"sha256", sha256_hex(body)}});
  manifest["outputs"] = std::move(outputs);
  files.emplace_back("manifest.json", manifest.dump(2) + "\n");
  return files;
}

void write_outputs(const std::filesystem::path& dir, const OutputFiles& files) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, body] : files) {
    std::ofstream out(dir / name, std::ios::binary);
    out << body;
    if (!out) throw Error("cannot write " + (dir / name).string());
  }
}

}  // namespace hca::lab
