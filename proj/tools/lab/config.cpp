#include "lab/config.hpp"

#include <algorithm>
#include <set>

#include "hca/errors.hpp"

namespace hca::lab {
namespace {

[[noreturn]] void bad(const std::string& what) { throw InvalidArgument("malformed config: " + what); }

void only_keys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) bad(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) bad("unknown field '" + key + "' in " + where);
  }
}

const Json* find(const Json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const Json& need(const Json& obj, const char* key, const std::string& where) {
  const Json* j = find(obj, key);
  if (!j) bad("missing field '" + std::string(key) + "' in " + where);
  return *j;
}

double number(const Json& j, const std::string& name) {
  if (!j.is_number()) bad(name + " must be a number");
  return j.get<double>();
}

long long integer(const Json& j, const std::string& name, long long lo, long long hi) {
  if (!j.is_number_integer()) bad(name + " must be an integer");
  const auto v = j.get<long long>();
  if (v < lo || v > hi) bad(name + " out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

std::uint64_t seed_value(const Json& j, const std::string& name) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    bad(name + " must be a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

bool boolean(const Json& j, const std::string& name) {
  if (!j.is_boolean()) bad(name + " must be true or false");
  return j.get<bool>();
}

std::string text(const Json& j, const std::string& name) {
  if (!j.is_string()) bad(name + " must be a string");
  return j.get<std::string>();
}

Eigen::MatrixXd matrix(const Json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty()) bad(name + " must be a non-empty 2-D array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != cols) bad(name + " rows differ in length");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = number(j[r][c], name);
  }
  return m;
}

EnvironmentSpec parse_environment(const Json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) bad("environment must be an object");
  EnvironmentSpec env;
  env.params = j;
  if (const Json* path = find(j, "path")) {
    only_keys(j, {"path", "id"}, "environment");
    env.kind = "file";
    env.path = text(*path, "environment.path");
    if (env.path.is_relative() && !base_dir.empty()) env.path = base_dir / env.path;
    env.id = find(j, "id") ? text(j["id"], "environment.id") : env.path.stem().string();
    return env;
  }
  env.kind = text(need(j, "builtin", "environment"), "environment.builtin");
  if (env.kind == "figure1") {
    only_keys(j, {"builtin", "id"}, "environment");
  } else if (env.kind == "chain") {
    only_keys(j, {"builtin", "id", "length", "slip", "reward_at_end", "discount", "horizon"}, "environment");
    integer(need(j, "length", "environment"), "environment.length", 2, 1000);
    number(need(j, "slip", "environment"), "environment.slip");
    number(need(j, "reward_at_end", "environment"), "environment.reward_at_end");
    number(need(j, "discount", "environment"), "environment.discount");
    integer(need(j, "horizon", "environment"), "environment.horizon", 1, 1000);
  } else if (env.kind == "random") {
    only_keys(j,
              {"builtin", "id", "num_states", "num_actions", "branching", "reward_scale", "terminal_mass", "discount",
               "horizon", "seed"},
              "environment");
    for (const char* k : {"num_states", "num_actions", "branching", "horizon"}) {
      if (find(j, k)) integer(j[k], std::string("environment.") + k, 1, 1000);
    }
    for (const char* k : {"reward_scale", "terminal_mass", "discount"}) {
      if (find(j, k)) number(j[k], std::string("environment.") + k);
    }
    if (find(j, "seed")) seed_value(j["seed"], "environment.seed");
  } else {
    bad("unknown builtin environment '" + env.kind + "' (figure1, chain, random)");
  }
  env.id = find(j, "id") ? text(j["id"], "environment.id") : env.kind;
  return env;
}

PolicySpec parse_policy(const Json& j) {
  PolicySpec p;
  if (j.is_string()) {
    p.kind = j.get<std::string>();
    if (p.kind != "default" && p.kind != "uniform") bad("policy must be \"default\", \"uniform\" or an object");
    return p;
  }
  if (!j.is_object() || j.size() != 1) bad("policy object must have exactly one of softmax, probs");
  if (const Json* s = find(j, "softmax")) {
    p.kind = "softmax";
    p.matrix = matrix(*s, "policy.softmax");
  } else if (const Json* pr = find(j, "probs")) {
    p.kind = "probs";
    p.matrix = matrix(*pr, "policy.probs");
  } else {
    bad("policy object must have exactly one of softmax, probs");
  }
  return p;
}

ValueSpec parse_value(const Json& j) {
  ValueSpec v;
  if (j.is_string()) {
    v.kind = j.get<std::string>();
    if (v.kind != "exact" && v.kind != "zero") bad("value must be \"exact\", \"zero\" or {\"values\": [...]}");
    return v;
  }
  only_keys(j, {"values"}, "value");
  const Json& vals = need(j, "values", "value");
  if (!vals.is_array() || vals.empty()) bad("value.values must be a non-empty array");
  v.kind = "explicit";
  v.values.resize(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) v.values(static_cast<Eigen::Index>(i)) = number(vals[i], "value.values");
  return v;
}

EstimatorSpec parse_estimator(const Json& j) {
  only_keys(j, {"name", "N", "K"}, "estimator");
  EstimatorSpec e;
  try {
    e.tag = parse_estimator_tag(text(need(j, "name", "estimator"), "estimator.name"));
  } catch (const InvalidArgument&) {
    bad("unknown estimator '" + j["name"].get<std::string>() + "' (MC, HCA, DELTA_HCA)");
  }
  const char* key = e.tag == EstimatorTag::HCA ? "K" : "N";
  const char* other = e.tag == EstimatorTag::HCA ? "N" : "K";
  if (find(j, other)) bad(std::string("estimator ") + to_string(e.tag) + " takes " + key + ", not " + other);
  e.depth = static_cast<int>(integer(need(j, key, "estimator"), std::string("estimator.") + key, 1, 64));
  return e;
}

Analysis parse_analysis(const Json& j) {
  const std::string name = text(j, "analyses[]");
  for (Analysis a : {Analysis::Moments, Analysis::Decomposition, Analysis::CovarianceCheck, Analysis::UpdateVariance,
                     Analysis::PerturbationSweep}) {
    if (to_string(a) == name) return a;
  }
  bad("unknown analysis '" + name + "'");
}

PerturbationGrid parse_perturbation(const Json& j) {
  only_keys(j, {"target", "mode", "epsilons", "seed"}, "perturbation");
  PerturbationGrid g;
  try {
    g.target = parse_perturb_target(text(need(j, "target", "perturbation"), "perturbation.target"));
    g.mode = parse_perturb_mode(text(need(j, "mode", "perturbation"), "perturbation.mode"));
  } catch (const InvalidArgument& e) {
    bad(e.what());
  }
  const Json& eps = need(j, "epsilons", "perturbation");
  if (!eps.is_array() || eps.empty()) bad("perturbation.epsilons must be a non-empty array");
  for (const auto& e : eps) {
    const double x = number(e, "perturbation.epsilons");
    if (!(x >= 0.0) || !std::isfinite(x)) bad("perturbation.epsilons must be finite and >= 0");
    g.epsilons.push_back(x);
  }
  if (find(j, "seed")) g.seed = seed_value(j["seed"], "perturbation.seed");
  return g;
}

Check parse_check(const Json& j) {
  const std::string name = text(j, "checks[]");
  for (Check c : {Check::MeanEquality, Check::VarianceOrdering, Check::CrossTerms, Check::CovarianceIdentities,
                  Check::UpdateVariance, Check::BayesIdentity}) {
    if (to_string(c) == name) return c;
  }
  bad("unknown check '" + name + "'");
}

}  // namespace

std::string to_string(Analysis a) {
  switch (a) {
    case Analysis::Moments: return "moments";
    case Analysis::Decomposition: return "decomposition";
    case Analysis::CovarianceCheck: return "covariance_check";
    case Analysis::UpdateVariance: return "update_variance";
    case Analysis::PerturbationSweep: return "perturbation_sweep";
  }
  return "?";
}

std::string to_string(Check c) {
  switch (c) {
    case Check::MeanEquality: return "mean_equality";
    case Check::VarianceOrdering: return "variance_ordering";
    case Check::CrossTerms: return "cross_terms";
    case Check::CovarianceIdentities: return "covariance_identities";
    case Check::UpdateVariance: return "update_variance";
    case Check::BayesIdentity: return "bayes_identity";
  }
  return "?";
}

bool RunConfig::wants(Analysis a) const { return std::find(analyses.begin(), analyses.end(), a) != analyses.end(); }

bool VerifyConfig::wants(Check c) const { return std::find(checks.begin(), checks.end(), c) != checks.end(); }

RunConfig parse_run_config(const Json& doc, const std::filesystem::path& base_dir) {
  only_keys(doc,
            {"environment", "policy", "value", "estimators", "states", "analyses", "perturbation", "mode", "samples",
             "seed", "step_size", "enumeration_cap", "output_dir"},
            "config");
  RunConfig c;
  c.environment = parse_environment(need(doc, "environment", "config"), base_dir);
  if (const Json* p = find(doc, "policy")) c.policy = parse_policy(*p);
  if (const Json* v = find(doc, "value")) c.value = parse_value(*v);

  const Json& ests = need(doc, "estimators", "config");
  if (!ests.is_array() || ests.empty()) bad("estimators must be a non-empty array");
  for (const auto& e : ests) c.estimators.push_back(parse_estimator(e));

  if (const Json* s = find(doc, "states")) {
    if (!s->is_array() || s->empty()) bad("states must be a non-empty array");
    std::vector<int> states;
    for (const auto& x : *s) states.push_back(static_cast<int>(integer(x, "states[]", 0, 1 << 20)));
    c.states = std::move(states);
  }
  if (const Json* a = find(doc, "analyses")) {
    if (!a->is_array() || a->empty()) bad("analyses must be a non-empty array");
    c.analyses.clear();
    for (const auto& x : *a) c.analyses.push_back(parse_analysis(x));
  }
  if (const Json* p = find(doc, "perturbation")) c.perturbation = parse_perturbation(*p);
  if (c.wants(Analysis::PerturbationSweep) && !c.perturbation) {
    bad("analysis perturbation_sweep needs a perturbation block");
  }
  if (const Json* m = find(doc, "mode")) {
    const std::string mode = text(*m, "mode");
    if (mode != "exact" && mode != "sampled") bad("mode must be \"exact\" or \"sampled\"");
    c.sampled = mode == "sampled";
  }
  if (const Json* n = find(doc, "samples")) c.samples = static_cast<std::size_t>(integer(*n, "samples", 2, 1'000'000'000));
  if (const Json* s = find(doc, "seed")) c.seed = seed_value(*s, "seed");
  if (const Json* a = find(doc, "step_size")) {
    c.step_size = number(*a, "step_size");
    if (!(c.step_size > 0.0) || !std::isfinite(c.step_size)) bad("step_size must be finite and positive");
  }
  if (const Json* cap = find(doc, "enumeration_cap")) {
    c.enumeration_cap = static_cast<std::size_t>(integer(*cap, "enumeration_cap", 1, 1'000'000'000'000LL));
  }
  if (const Json* o = find(doc, "output_dir")) c.output_dir = text(*o, "output_dir");
  if (c.sampled && (c.wants(Analysis::Decomposition) || c.wants(Analysis::CovarianceCheck) ||
                    c.wants(Analysis::UpdateVariance) || c.wants(Analysis::PerturbationSweep))) {
    bad("sampled mode supports only the moments analysis");
  }
  return c;
}

VerifyConfig parse_verify_config(const Json& doc) {
  only_keys(doc,
            {"figure1", "random_instances", "seed", "max_states", "max_lookahead", "value", "random_values", "checks",
             "corrupt_hindsight", "enumeration_cap"},
            "config");
  VerifyConfig c;
  if (const Json* f = find(doc, "figure1")) c.figure1 = boolean(*f, "figure1");
  if (const Json* n = find(doc, "random_instances")) c.random_instances = static_cast<int>(integer(*n, "random_instances", 0, 100000));
  if (const Json* s = find(doc, "seed")) c.seed = seed_value(*s, "seed");
  if (const Json* m = find(doc, "max_states")) c.max_states = static_cast<int>(integer(*m, "max_states", 3, 12));
  if (const Json* n = find(doc, "max_lookahead")) c.max_lookahead = static_cast<int>(integer(*n, "max_lookahead", 1, 16));
  if (const Json* v = find(doc, "value")) {
    const std::string kind = text(*v, "value");
    if (kind != "exact" && kind != "zero") bad("value must be \"exact\" or \"zero\"");
    c.exact_value = kind == "exact";
  }
  if (const Json* r = find(doc, "random_values")) c.random_values = static_cast<int>(integer(*r, "random_values", 0, 100));
  if (const Json* ch = find(doc, "checks")) {
    if (!ch->is_array()) bad("checks must be an array");
    c.checks.clear();
    for (const auto& x : *ch) c.checks.push_back(parse_check(x));
  }
  if (const Json* x = find(doc, "corrupt_hindsight")) c.corrupt_hindsight = boolean(*x, "corrupt_hindsight");
  if (const Json* cap = find(doc, "enumeration_cap")) {
    c.enumeration_cap = static_cast<std::size_t>(integer(*cap, "enumeration_cap", 1, 1'000'000'000'000LL));
  }
  return c;
}

}  // namespace hca::lab
