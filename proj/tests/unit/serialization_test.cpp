#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "hca/environments.hpp"
#include "hca/errors.hpp"
#include "hca/serialization.hpp"
#include "support/oracles.hpp"

namespace hca {
namespace {

bool bit_identical(const MdpData& a, const MdpData& b) {
  const auto same = [](const Tensor3& x, const Tensor3& y) {
    return x.dim0() == y.dim0() && x.dim1() == y.dim1() && x.dim2() == y.dim2() &&
           std::memcmp(x.data().data(), y.data().data(), sizeof(double) * x.dim0() * x.dim1() * x.dim2()) == 0;
  };
  return a.num_states == b.num_states && a.num_actions == b.num_actions && same(a.transition, b.transition) &&
         same(a.reward, b.reward) && std::memcmp(&a.discount, &b.discount, sizeof(double)) == 0 &&
         a.terminal == b.terminal && a.horizon == b.horizon;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("hca_serialization_" + name);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(-2.5e-300), "-2.5e-300");
  for (double x : {1.0 / 3.0, 2.0 / 3.0, std::numeric_limits<double>::denorm_min(), 12345.678901234567}) {
    EXPECT_EQ(std::strtod(format_double(x).c_str(), nullptr), x);
  }
}

TEST(MdpJson, RoundTripIsBitIdentical) {
  for (const auto& inst : testing::random_instances(20, 71)) {
    const Json doc = mdp_to_json(inst.mdp);
    const MdpData back = mdp_data_from_json(Json::parse(doc.dump()));
    EXPECT_TRUE(bit_identical(back, inst.mdp.data())) << "instance " << inst.id;
  }
}

TEST(MdpJson, FileRoundTripIsStable) {
  const auto path = temp_file("mdp.json");
  const Figure1 fig = figure1_mdp();
  save_mdp(path, fig.mdp);
  const TabularMDP loaded = load_mdp(path);
  const auto path2 = temp_file("mdp2.json");
  save_mdp(path2, loaded);
  std::ifstream a(path), b(path2);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_TRUE(bit_identical(loaded.data(), fig.mdp.data()));
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST(MdpJson, StrictSchema) {
  const Figure1 fig = figure1_mdp();
  Json doc = mdp_to_json(fig.mdp);
  Json extra = doc;
  extra["comment"] = "hi";
  EXPECT_THROW(mdp_data_from_json(extra), InvalidArgument);
  Json missing = doc;
  missing.erase("horizon");
  EXPECT_THROW(mdp_data_from_json(missing), InvalidArgument);
  Json shape = doc;
  shape["transition"][0].erase(1);
  EXPECT_THROW(mdp_data_from_json(shape), InvalidArgument);
  Json bad = doc;
  bad["transition"][0][0][1] = 0.5;  // row sum 0.5
  EXPECT_NO_THROW(mdp_data_from_json(bad));
  EXPECT_THROW(mdp_from_json(bad), InvalidModel);
}

TEST(PolicyJson, RoundTrip) {
  for (const auto& inst : testing::random_instances(5, 72)) {
    const Policy back = policy_from_json(Json::parse(policy_to_json(inst.policy).dump()));
    EXPECT_EQ(back.probs(), inst.policy.probs());
  }
  EXPECT_THROW(policy_from_json(Json{{"num_states", 1}, {"num_actions", 2}, {"probs", {{0.4, 0.4}}}}),
               InvalidArgument);
}

TEST(OracleJson, MaskedSlotsAreNull) {
  const Figure1 fig = figure1_mdp();
  const Json doc = oracle_to_json(build_oracle(fig.mdp, fig.policy, 2));
  EXPECT_EQ(doc.at("lookahead"), 2);
  EXPECT_TRUE(doc.at("hindsight")[0][Figure1::A][Figure1::D].is_null());
  EXPECT_EQ(doc.at("hindsight")[0][Figure1::A][Figure1::B][0].get<double>(), 1.0);
  EXPECT_EQ(doc.at("reachable")[1][Figure1::A][Figure1::D], true);
  EXPECT_EQ(doc.at("v")[Figure1::B].get<double>(), -1.0);
}

TEST(TrajectoryJsonl, RoundTrip) {
  const auto inst = testing::random_instances(1, 73).front();
  const auto paths = enumerate_trajectories(inst.mdp, inst.policy, 0, 3);
  std::ostringstream out;
  write_trajectory_jsonl(out, paths);
  std::istringstream in(out.str());
  std::string line;
  std::size_t i = 0;
  while (std::getline(in, line)) {
    const auto [traj, prob] = trajectory_from_jsonl(line, inst.mdp);
    ASSERT_LT(i, paths.size());
    EXPECT_EQ(traj, paths[i].trajectory);
    ASSERT_TRUE(prob.has_value());
    EXPECT_EQ(*prob, paths[i].probability);
    ++i;
  }
  EXPECT_EQ(i, paths.size());
}

TEST(TrajectoryJsonl, RejectsImpossibleSteps) {
  const Figure1 fig = figure1_mdp();
  EXPECT_THROW(trajectory_from_jsonl(R"({"start":0,"steps":[[0,1,2]]})", fig.mdp), InvalidArgument);
  EXPECT_THROW(trajectory_from_jsonl(R"({"start":0,"steps":[[0,1,1]],"extra":1})", fig.mdp), InvalidArgument);
  EXPECT_THROW(trajectory_from_jsonl("{not json", fig.mdp), InvalidArgument);
  const auto [t, p] = trajectory_from_jsonl(R"({"start":0,"steps":[[1,1,2],[0,-1,3],[0,0,4]]})", fig.mdp);
  EXPECT_TRUE(t.absorbed());
  EXPECT_FALSE(p.has_value());
}

TEST(MomentCsv, RowsAndHeader) {
  MomentReport r;
  r.mean = Eigen::Vector2d(0.5, -0.5);
  r.variance = Eigen::Vector2d(1.0, 2.0);
  r.covariance = (Eigen::Matrix2d() << 1.0, -0.25, -0.25, 2.0).finished();
  r.state = 0;
  r.lookahead = 3;
  r.tag = EstimatorTag::DELTA_HCA;
  const auto rows = moment_csv_rows("fig", r);
  ASSERT_EQ(rows.size(), 6u);
  std::ostringstream out;
  write_moment_csv(out, rows);
  EXPECT_EQ(out.str(),
            "mdp_id,s,a,N,estimator,statistic,value,stderr\n"
            "fig,0,0,3,DELTA_HCA,mean,0.5,\n"
            "fig,0,0,3,DELTA_HCA,variance,1,\n"
            "fig,0,0,3,DELTA_HCA,covariance_with_1,-0.25,\n"
            "fig,0,1,3,DELTA_HCA,mean,-0.5,\n"
            "fig,0,1,3,DELTA_HCA,variance,2,\n"
            "fig,0,1,3,DELTA_HCA,covariance_with_0,-0.25,\n");
}

TEST(ReportJson, MomentReportFields) {
  const Figure1 fig = figure1_mdp();
  const auto oracle = std::make_shared<const OracleBundle>(build_oracle(fig.mdp, fig.policy, 3));
  const auto in = EstimatorInputs::make(fig.mdp, fig.policy, oracle->v, oracle, 3);
  const Json doc = to_json(exact_moments(fig.mdp, fig.policy, Figure1::A, in, EstimatorTag::HCA));
  EXPECT_EQ(doc.at("mode"), "exact");
  EXPECT_EQ(doc.at("estimator"), "HCA");
  EXPECT_NEAR(doc.at("variance")[0].get<double>(), 1.0, 1e-12);
  EXPECT_FALSE(doc.contains("sample_count"));
}

}  // namespace
}  // namespace hca
