#include "hca/mdp.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "hca/errors.hpp"
#include "hca/tolerances.hpp"

namespace hca {
namespace {

std::string coords(std::initializer_list<int> idx) {
  std::ostringstream os;
  os << '(';
  bool first = true;
  for (int i : idx) {
    if (!first) os << ", ";
    os << i;
    first = false;
  }
  os << ')';
  return os.str();
}

void check_row(const Eigen::MatrixXd& m, const char* what) {
  for (Eigen::Index s = 0; s < m.rows(); ++s) {
    double sum = 0.0;
    for (Eigen::Index a = 0; a < m.cols(); ++a) {
      double p = m(s, a);
      if (!std::isfinite(p) || p < 0.0) {
        std::ostringstream os;
        os << what << " entry (" << s << ", " << a << ") = " << p
           << " is not a probability";
        throw InvalidArgument(os.str());
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > tol::kRowSum) {
      std::ostringstream os;
      os << what << " row " << s << " sums to " << sum;
      throw InvalidArgument(os.str());
    }
  }
}

// ok[s] after h rounds: every path from s of length <= h that follows a
// positive-probability transition (under any action) reaches a terminal.
std::vector<bool> guaranteed_absorption(const MdpData& d) {
  const int n = d.num_states;
  std::vector<bool> ok(d.terminal.begin(), d.terminal.end());
  for (int h = 0; h < d.horizon; ++h) {
    std::vector<bool> next(ok);
    for (int s = 0; s < n; ++s) {
      if (d.terminal[s]) continue;
      bool all = true;
      for (int a = 0; a < d.num_actions && all; ++a) {
        for (int s2 = 0; s2 < n; ++s2) {
          if (d.transition(s, a, s2) > 0.0 && !ok[s2]) {
            all = false;
            break;
          }
        }
      }
      next[s] = all;
    }
    if (next == ok) break;
    ok = std::move(next);
  }
  return ok;
}

}  // namespace

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].kind << ": " << violations[i].message;
  }
  return os.str();
}

ValidationReport validate_mdp(const MdpData& d) {
  ValidationReport report;
  auto add = [&](std::string kind, std::string msg, std::vector<int> idx = {}) {
    report.violations.push_back({std::move(kind), std::move(msg), std::move(idx)});
  };

  if (d.num_states <= 0 || d.num_actions <= 0) {
    add("shape", "num_states and num_actions must be positive");
    return report;
  }
  const int n = d.num_states;
  const int m = d.num_actions;
  auto shape_ok = [&](const Tensor3& t) {
    return t.dim0() == n && t.dim1() == m && t.dim2() == n;
  };
  if (!shape_ok(d.transition)) add("shape", "transition tensor must be [num_states][num_actions][num_states]");
  if (!shape_ok(d.reward)) add("shape", "reward tensor must be [num_states][num_actions][num_states]");
  if (static_cast<int>(d.terminal.size()) != n) add("shape", "terminal must have one flag per state");
  if (!report.ok()) return report;

  if (!(d.discount > 0.0 && d.discount <= 1.0)) {
    std::ostringstream os;
    os << "discount " << d.discount << " outside (0, 1]";
    add("discount", os.str());
  }
  if (d.horizon <= 0) add("horizon", "horizon must be positive");

  bool rows_valid = true;
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < m; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < n; ++s2) {
        double p = d.transition(s, a, s2);
        if (!std::isfinite(p) || p < 0.0) {
          add("probability", "transition " + coords({s, a, s2}) + " is negative or non-finite", {s, a, s2});
          rows_valid = false;
        }
        if (!std::isfinite(d.reward(s, a, s2))) {
          add("reward", "reward " + coords({s, a, s2}) + " is non-finite", {s, a, s2});
        }
        sum += p;
      }
      if (d.terminal[s]) {
        if (d.transition(s, a, s) != 1.0) {
          add("terminal", "terminal state " + std::to_string(s) + " does not self-loop with probability 1 under action " + std::to_string(a), {s, a});
          rows_valid = false;
        }
        for (int s2 = 0; s2 < n; ++s2) {
          if (d.reward(s, a, s2) != 0.0) {
            add("terminal", "terminal transition " + coords({s, a, s2}) + " has non-zero reward", {s, a, s2});
          }
        }
      } else if (std::abs(sum - 1.0) > tol::kRowSum) {
        std::ostringstream os;
        os << "transition row " << coords({s, a}) << " sums to " << sum;
        add("row_sum", os.str(), {s, a});
        rows_valid = false;
      }
    }
  }

  if (d.discount == 1.0 && rows_valid && d.horizon > 0) {
    auto ok = guaranteed_absorption(d);
    for (int s = 0; s < n; ++s) {
      if (!ok[s]) {
        add("termination",
            "non-terminating under γ=1: state " + std::to_string(s) +
                " is not absorbed within " + std::to_string(d.horizon) + " steps with probability 1",
            {s});
      }
    }
  }
  return report;
}

TabularMDP::TabularMDP(MdpData data) : data_(std::move(data)) {
  auto report = validate_mdp(data_);
  if (!report.ok()) throw InvalidModel(report.summary());
}

TabularMDP TabularMDP::with_horizon(int horizon) const {
  MdpData d = data_;
  d.horizon = horizon;
  return TabularMDP(std::move(d));
}

ValidationReport validate_mdp(const TabularMDP& mdp) { return validate_mdp(mdp.data()); }

Policy::Policy(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
  if (probs_.rows() == 0 || probs_.cols() == 0) throw InvalidArgument("policy must be non-empty");
  check_row(probs_, "policy");
}

Policy Policy::uniform(int num_states, int num_actions) {
  return Policy(Eigen::MatrixXd::Constant(num_states, num_actions, 1.0 / num_actions));
}

SoftmaxPolicy::SoftmaxPolicy(Eigen::MatrixXd params) : params_(std::move(params)) {
  if (params_.rows() == 0 || params_.cols() == 0) throw InvalidArgument("softmax parameters must be non-empty");
  for (Eigen::Index s = 0; s < params_.rows(); ++s) {
    for (Eigen::Index a = 0; a < params_.cols(); ++a) {
      if (!std::isfinite(params_(s, a))) {
        std::ostringstream os;
        os << "non-finite softmax parameter at (" << s << ", " << a << ")";
        throw InvalidArgument(os.str());
      }
    }
  }
}

ValueFunction::ValueFunction(const TabularMDP& mdp, Eigen::VectorXd values)
    : values_(std::move(values)), terminal_(mdp.data().terminal) {
  if (values_.size() != mdp.num_states()) throw InvalidArgument("value function size does not match the MDP");
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (!std::isfinite(values_(s))) throw InvalidArgument("non-finite value at state " + std::to_string(s));
    if (terminal_[s] && values_(s) != 0.0) {
      throw InvalidArgument("value at terminal state " + std::to_string(s) + " must be 0");
    }
  }
}

ValueFunction ValueFunction::zeros(const TabularMDP& mdp) {
  return ValueFunction(mdp, Eigen::VectorXd::Zero(mdp.num_states()));
}

ValueFunction ValueFunction::with_values(Eigen::VectorXd values) const {
  if (values.size() != values_.size()) throw InvalidArgument("value function size mismatch");
  ValueFunction out = *this;
  for (int s = 0; s < size(); ++s) {
    if (!std::isfinite(values(s))) throw InvalidArgument("non-finite value at state " + std::to_string(s));
    out.values_(s) = terminal_[s] ? 0.0 : values(s);
  }
  return out;
}

Policy softmax_policy(const SoftmaxPolicy& params) {
  const auto& theta = params.params();
  Eigen::MatrixXd probs(theta.rows(), theta.cols());
  for (Eigen::Index s = 0; s < theta.rows(); ++s) {
    const double mx = theta.row(s).maxCoeff();
    double z = 0.0;
    for (Eigen::Index a = 0; a < theta.cols(); ++a) {
      probs(s, a) = std::exp(theta(s, a) - mx);
      z += probs(s, a);
    }
    probs.row(s) /= z;
  }
  return Policy(std::move(probs));
}

Eigen::MatrixXd softmax_gradient(const SoftmaxPolicy& params, int s, int a) {
  if (s < 0 || s >= params.num_states() || a < 0 || a >= params.num_actions()) {
    throw InvalidArgument("softmax_gradient index (" + std::to_string(s) + ", " + std::to_string(a) + ") out of range");
  }
  const Policy pi = softmax_policy(params);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(params.num_states(), params.num_actions());
  const double pa = pi(s, a);
  for (int b = 0; b < params.num_actions(); ++b) {
    grad(s, b) = pa * ((a == b ? 1.0 : 0.0) - pi(s, b));
  }
  return grad;
}

}  // namespace hca
