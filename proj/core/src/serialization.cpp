#include "hca/serialization.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "hca/errors.hpp"

namespace hca {
namespace {

Json vec_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json mat_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Json tensor_json(const Tensor3& t) {
  Json out = Json::array();
  for (int i = 0; i < t.dim0(); ++i) {
    Json plane = Json::array();
    for (int j = 0; j < t.dim1(); ++j) {
      Json row = Json::array();
      for (int k = 0; k < t.dim2(); ++k) row.push_back(t(i, j, k));
      plane.push_back(std::move(row));
    }
    out.push_back(std::move(plane));
  }
  return out;
}

[[noreturn]] void schema_error(const std::string& what) { throw InvalidArgument("malformed document: " + what); }

void reject_unknown(const Json& doc, std::initializer_list<const char*> allowed, const char* what) {
  if (!doc.is_object()) schema_error(std::string(what) + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : doc.items()) {
    if (!ok.count(key)) schema_error(std::string("unknown field '") + key + "' in " + what);
  }
}

const Json& field(const Json& doc, const char* name) {
  auto it = doc.find(name);
  if (it == doc.end()) schema_error(std::string("missing field '") + name + "'");
  return *it;
}

double as_double(const Json& j, const std::string& where) {
  if (!j.is_number()) schema_error(where + " must be a number");
  return j.get<double>();
}

int as_int(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) schema_error(where + " must be an integer");
  return j.get<int>();
}

Tensor3 tensor_from_json(const Json& j, int d0, int d1, int d2, const char* name) {
  Tensor3 t(d0, d1, d2);
  if (!j.is_array() || static_cast<int>(j.size()) != d0) schema_error(std::string(name) + " has the wrong shape");
  for (int i = 0; i < d0; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != d1) schema_error(std::string(name) + " has the wrong shape");
    for (int k = 0; k < d1; ++k) {
      const Json& row = j[i][k];
      if (!row.is_array() || static_cast<int>(row.size()) != d2) schema_error(std::string(name) + " has the wrong shape");
      for (int l = 0; l < d2; ++l) t(i, k, l) = as_double(row[l], name);
    }
  }
  return t;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

Json mdp_to_json(const MdpData& d) {
  Json doc;
  doc["num_states"] = d.num_states;
  doc["num_actions"] = d.num_actions;
  doc["discount"] = d.discount;
  doc["horizon"] = d.horizon;
  Json term = Json::array();
  for (bool t : d.terminal) term.push_back(t);
  doc["terminal"] = std::move(term);
  doc["transition"] = tensor_json(d.transition);
  doc["reward"] = tensor_json(d.reward);
  return doc;
}

MdpData mdp_data_from_json(const Json& doc) {
  reject_unknown(doc, {"num_states", "num_actions", "discount", "horizon", "terminal", "transition", "reward"}, "MDP");
  MdpData d;
  d.num_states = as_int(field(doc, "num_states"), "num_states");
  d.num_actions = as_int(field(doc, "num_actions"), "num_actions");
  if (d.num_states <= 0 || d.num_actions <= 0) schema_error("num_states and num_actions must be positive");
  d.discount = as_double(field(doc, "discount"), "discount");
  d.horizon = as_int(field(doc, "horizon"), "horizon");
  const Json& term = field(doc, "terminal");
  if (!term.is_array() || static_cast<int>(term.size()) != d.num_states) schema_error("terminal has the wrong shape");
  for (const auto& t : term) {
    if (!t.is_boolean()) schema_error("terminal entries must be booleans");
    d.terminal.push_back(t.get<bool>());
  }
  d.transition = tensor_from_json(field(doc, "transition"), d.num_states, d.num_actions, d.num_states, "transition");
  d.reward = tensor_from_json(field(doc, "reward"), d.num_states, d.num_actions, d.num_states, "reward");
  return d;
}

TabularMDP mdp_from_json(const Json& doc) { return TabularMDP(mdp_data_from_json(doc)); }

Json policy_to_json(const Policy& policy) {
  Json doc;
  doc["num_states"] = policy.num_states();
  doc["num_actions"] = policy.num_actions();
  doc["probs"] = mat_json(policy.probs());
  return doc;
}

Policy policy_from_json(const Json& doc) {
  reject_unknown(doc, {"num_states", "num_actions", "probs"}, "policy");
  const int n = as_int(field(doc, "num_states"), "num_states");
  const int m = as_int(field(doc, "num_actions"), "num_actions");
  const Json& probs = field(doc, "probs");
  if (n <= 0 || m <= 0 || !probs.is_array() || static_cast<int>(probs.size()) != n) schema_error("probs has the wrong shape");
  Eigen::MatrixXd p(n, m);
  for (int s = 0; s < n; ++s) {
    if (!probs[s].is_array() || static_cast<int>(probs[s].size()) != m) schema_error("probs has the wrong shape");
    for (int a = 0; a < m; ++a) p(s, a) = as_double(probs[s][a], "probs");
  }
  return Policy(std::move(p));
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidArgument("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& doc) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

TabularMDP load_mdp(const std::filesystem::path& path) { return mdp_from_json(read_json_file(path)); }

void save_mdp(const std::filesystem::path& path, const TabularMDP& mdp) { write_json_file(path, mdp_to_json(mdp)); }

Json oracle_to_json(const OracleBundle& b) {
  Json doc;
  doc["v"] = vec_json(b.v.values());
  doc["q"] = mat_json(b.q);
  doc["adv"] = mat_json(b.adv);
  doc["r_sa"] = mat_json(b.r_sa);
  doc["r_s"] = vec_json(b.r_s);
  doc["lookahead"] = b.kstep.lookahead();
  Json joint = Json::array();
  Json marginal = Json::array();
  for (int k = 1; k <= b.kstep.lookahead(); ++k) {
    joint.push_back(tensor_json(b.kstep.joint(k)));
    marginal.push_back(mat_json(b.kstep.marginal(k)));
  }
  doc["kstep_joint"] = std::move(joint);
  doc["kstep_marginal"] = std::move(marginal);

  const auto& h = b.hindsight;
  Json hindsight = Json::array();
  Json mask = Json::array();
  for (int k = 1; k <= h.lookahead(); ++k) {
    Json hk = Json::array();
    Json mk = Json::array();
    for (int s = 0; s < h.num_states(); ++s) {
      Json hs = Json::array();
      Json ms = Json::array();
      for (int s2 = 0; s2 < h.num_states(); ++s2) {
        const bool reachable = h.reachable(k, s, s2);
        ms.push_back(reachable);
        if (!reachable) {
          hs.push_back(nullptr);
          continue;
        }
        Json row = Json::array();
        for (int a = 0; a < h.num_actions(); ++a) row.push_back(h.raw(k, s, s2, a));
        hs.push_back(std::move(row));
      }
      hk.push_back(std::move(hs));
      mk.push_back(std::move(ms));
    }
    hindsight.push_back(std::move(hk));
    mask.push_back(std::move(mk));
  }
  doc["hindsight"] = std::move(hindsight);
  doc["reachable"] = std::move(mask);
  return doc;
}

Json to_json(const MomentReport& r) {
  Json doc;
  doc["mode"] = r.mode == MomentMode::Exact ? "exact" : "empirical";
  doc["estimator"] = to_string(r.tag);
  doc["state"] = r.state;
  doc["t"] = r.t;
  doc["N"] = r.lookahead;
  doc["mean"] = vec_json(r.mean);
  doc["variance"] = vec_json(r.variance);
  doc["covariance"] = mat_json(r.covariance);
  if (r.mode == MomentMode::Empirical) {
    doc["sample_count"] = r.sample_count;
    doc["mean_stderr"] = vec_json(r.mean_stderr);
    doc["variance_stderr"] = vec_json(r.variance_stderr);
  }
  return doc;
}

Json to_json(const DecompositionReport& r) {
  Json doc;
  doc["action"] = r.action;
  doc["per_k_variance"] = vec_json(r.per_k_variance);
  doc["cross_terms"] = mat_json(r.cross_terms);
  doc["total"] = r.total;
  doc["max_abs_cross_term"] = r.max_abs_cross_term();
  return doc;
}

Json to_json(const CovarianceCheck& c) {
  Json doc;
  doc["state"] = c.state;
  doc["N"] = c.lookahead;
  doc["bellman_residual"] = c.bellman_residual;
  doc["mc_covariance"] = mat_json(c.mc_covariance);
  doc["dhca_covariance"] = mat_json(c.dhca_covariance);
  Json pairs = Json::array();
  for (const auto& p : c.pairs) {
    pairs.push_back({{"a", p.a},
                     {"b", p.b},
                     {"mc_covariance", p.mc_covariance},
                     {"mc_expected", p.mc_expected},
                     {"dhca_covariance", p.dhca_covariance},
                     {"dhca_closed_form", p.dhca_closed_form},
                     {"mc_matches", p.mc_matches},
                     {"closed_form_matches", p.closed_form_matches},
                     {"ordering_holds", p.ordering_holds}});
  }
  doc["pairs"] = std::move(pairs);
  doc["passed"] = c.passed();
  return doc;
}

Json to_json(const UpdateVarianceReport& r) {
  Json doc;
  doc["state"] = r.state;
  doc["estimator"] = to_string(r.tag);
  doc["per_coordinate_variance"] = mat_json(r.per_coordinate_variance);
  doc["assembled_variance"] = mat_json(r.assembled_variance);
  doc["variance_part"] = mat_json(r.variance_part);
  doc["covariance_part"] = mat_json(r.covariance_part);
  doc["total_trace"] = r.total_trace;
  doc["max_discrepancy"] = r.max_discrepancy;
  doc["step_size"] = r.step_size;
  doc["step_variance_trace"] = r.step_variance_trace;
  return doc;
}

std::string trajectory_to_jsonl(const Trajectory& traj, std::optional<double> probability) {
  Json doc;
  doc["start"] = traj.start_state();
  Json steps = Json::array();
  for (const auto& s : traj.steps()) steps.push_back(Json::array({s.action, s.reward, s.next_state}));
  doc["steps"] = std::move(steps);
  if (probability) doc["prob"] = *probability;
  return doc.dump();
}

void write_trajectory_jsonl(std::ostream& out, std::span<const WeightedTrajectory> paths) {
  for (const auto& p : paths) out << trajectory_to_jsonl(p.trajectory, p.probability) << '\n';
}

std::pair<Trajectory, std::optional<double>> trajectory_from_jsonl(const std::string& line, const TabularMDP& mdp) {
  Json doc;
  try {
    doc = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw InvalidArgument(std::string("invalid trajectory line: ") + e.what());
  }
  reject_unknown(doc, {"start", "steps", "prob"}, "trajectory");
  const int start = as_int(field(doc, "start"), "start");
  if (start < 0 || start >= mdp.num_states()) schema_error("start state out of range");
  std::vector<Step> steps;
  int s = start;
  for (const auto& st : field(doc, "steps")) {
    if (!st.is_array() || st.size() != 3) schema_error("steps must be [action, reward, next_state] triples");
    Step step{as_int(st[0], "action"), as_double(st[1], "reward"), as_int(st[2], "next_state")};
    if (step.action < 0 || step.action >= mdp.num_actions() || step.next_state < 0 ||
        step.next_state >= mdp.num_states() || mdp.transition(s, step.action, step.next_state) <= 0.0) {
      schema_error("step is not a positive-probability transition of the MDP");
    }
    s = step.next_state;
    steps.push_back(step);
  }
  std::optional<double> prob;
  if (auto it = doc.find("prob"); it != doc.end()) prob = as_double(*it, "prob");
  return {Trajectory(start, std::move(steps), mdp.is_terminal(s)), prob};
}

std::vector<MomentCsvRow> moment_csv_rows(const std::string& mdp_id, const MomentReport& r) {
  std::vector<MomentCsvRow> rows;
  const bool empirical = r.mode == MomentMode::Empirical;
  const std::string est = to_string(r.tag);
  for (int a = 0; a < r.mean.size(); ++a) {
    MomentCsvRow mean{mdp_id, r.state, a, r.lookahead, est, "mean", r.mean(a), {}};
    MomentCsvRow var{mdp_id, r.state, a, r.lookahead, est, "variance", r.variance(a), {}};
    if (empirical) {
      mean.stderr_value = r.mean_stderr(a);
      var.stderr_value = r.variance_stderr(a);
    }
    rows.push_back(std::move(mean));
    rows.push_back(std::move(var));
    for (int b = 0; b < r.mean.size(); ++b) {
      if (b == a) continue;
      rows.push_back({mdp_id, r.state, a, r.lookahead, est, "covariance_with_" + std::to_string(b),
                      r.covariance(a, b), {}});
    }
  }
  return rows;
}

void write_moment_csv(std::ostream& out, std::span<const MomentCsvRow> rows) {
  out << "mdp_id,s,a,N,estimator,statistic,value,stderr\n";
  for (const auto& r : rows) {
    out << r.mdp_id << ',' << r.state << ',' << r.action << ',' << r.lookahead << ',' << r.estimator << ','
        << r.statistic << ',' << format_double(r.value) << ',';
    if (r.stderr_value) out << format_double(*r.stderr_value);
    out << '\n';
  }
}

}  // namespace hca
