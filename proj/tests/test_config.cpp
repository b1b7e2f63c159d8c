#include <gtest/gtest.h>

#include <string>

#include "scale/config.hpp"
#include "scale/errors.hpp"

using namespace scale;

namespace {

const char* kMinimal = R"({
  "schema_version": 1,
  "problem": {"type": "mlp"},
  "optimizer": {"method": "scale"},
  "steps": 10
})";

std::string error_of(const std::string& text) {
  try {
    parse_experiment_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, MinimalUsesDefaults) {
  const ExperimentConfig c = parse_experiment_config(kMinimal);
  ASSERT_TRUE(std::holds_alternative<MlpSpec>(c.problem));
  EXPECT_EQ(std::get<MlpSpec>(c.problem), MlpSpec{});
  EXPECT_EQ(c.optimizer.method, Method::Scale);
  EXPECT_EQ(c.optimizer.last_beta, 0.9);
  EXPECT_EQ(c.optimizer.vector_rule, VectorRule::AdamForVectors);
  EXPECT_EQ(c.warmup_frac, 0.1);
  EXPECT_EQ(c.floor_frac, 0.1);
  EXPECT_EQ(c.steps, 10);
  EXPECT_EQ(c.variance.protocol.small_batch, 32u);
  EXPECT_EQ(c.variance.protocol.large_batch, 512u);
  EXPECT_EQ(c.variance.protocol.window, 50u);
  const LrSchedule s = schedule_of(c);
  EXPECT_EQ(s.total_steps, 10);
  EXPECT_EQ(s.peak, c.optimizer.peak_lr);
}

TEST(Config, RoundTripEveryField) {
  ExperimentConfig c;
  NoisyQuadratic q;
  q.layers = {{"a", BlockRole::Embedding, 2, 3, 1.5, 0.25}, {"b", BlockRole::OutputHead, 3, 4, 0.5, 9.0}};
  q.init_scale = 0.3;
  q.reference_batch = 16;
  c.problem = q;
  c.optimizer.method = Method::SgdM;
  c.optimizer.norm = NormKind::RowWise;
  c.optimizer.peak_lr = 0.123456789012345;
  c.optimizer.beta1 = 0.8;
  c.optimizer.beta2 = 0.95;
  c.optimizer.eps = 1e-10;
  c.optimizer.bias_correction = false;
  c.optimizer.beta_per_layer = {{"a", 0.0}, {"b", 0.9}};
  c.optimizer.last_beta = 0.7;
  c.optimizer.vector_rule = VectorRule::SameAsMatrices;
  c.optimizer.lr_scaling = true;
  c.optimizer.lr_multipliers = {{"b", 2.0}};
  c.optimizer.ns = {4, 3.0, -3.2, 1.2};
  c.warmup_frac = 0.05;
  c.floor_frac = 0.2;
  c.steps = 777;
  c.seeds = {3, 1, 4};
  c.output = "runs/x";
  c.variance = {{8, 64, 5}, 3, 7};
  const ExperimentConfig back = parse_experiment_config(to_json(c));
  EXPECT_TRUE(back == c);
  EXPECT_EQ(to_json(back), to_json(c));

  ExperimentConfig m;
  MlpSpec spec;
  spec.hidden = {7, 5};
  spec.biases = false;
  spec.data_seed = 99;
  m.problem = spec;
  m.steps = 5;
  EXPECT_TRUE(parse_experiment_config(to_json(m)) == m);
}

TEST(Config, UnknownKeysAreNamed) {
  std::string text = kMinimal;
  text.insert(text.find("\"steps\""), "\"stpes\": 3,\n  ");
  EXPECT_NE(error_of(text).find("$.stpes"), std::string::npos) << error_of(text);

  const std::string nested = R"({"schema_version":1,"problem":{"type":"mlp","hiden":[3]},
                                 "optimizer":{"method":"scale"},"steps":1})";
  EXPECT_NE(error_of(nested).find("$.problem.hiden"), std::string::npos) << error_of(nested);
}

TEST(Config, MalformedJsonNamesByteOffset) {
  const std::string bad = R"({"schema_version": 1, "steps": })";
  const std::string msg = error_of(bad);
  EXPECT_NE(msg.find("byte " + std::to_string(bad.size())), std::string::npos) << msg;
  EXPECT_THROW(load_experiment_config(std::string(SCALE_OPT_SOURCE_DIR) + "/tests/data/malformed.json"),
               ConfigError);
}

TEST(Config, InvalidValuesRejected) {
  auto with = [](const std::string& opt) {
    return std::string(R"({"schema_version":1,"problem":{"type":"mlp"},"optimizer":)") + opt +
           R"(,"steps":10})";
  };
  EXPECT_FALSE(error_of(with(R"({"method":"lion"})")).empty());
  EXPECT_FALSE(error_of(with(R"({"method":"adam","beta1":1.0})")).empty());
  EXPECT_FALSE(error_of(with(R"({"method":"scale","peak_lr":"fast"})")).empty());
  EXPECT_FALSE(error_of(with(R"({"method":"normalized_sgd","norm":"frobenius"})")).empty());
  EXPECT_FALSE(error_of(R"({"schema_version":2,"problem":{"type":"mlp"},"optimizer":{"method":"sgd"},"steps":1})").empty());
  EXPECT_FALSE(error_of(R"({"schema_version":1,"problem":{"type":"mlp"},"optimizer":{"method":"sgd"}})").empty());
  EXPECT_FALSE(error_of(R"({"schema_version":1,"problem":{"type":"mlp"},"optimizer":{"method":"sgd"},"steps":0})").empty());
  EXPECT_FALSE(error_of(R"({"schema_version":1,"problem":{"type":"cnn"},"optimizer":{"method":"sgd"},"steps":1})").empty());
  EXPECT_FALSE(error_of("").empty());
}

TEST(Config, SgdmNeedsBetaForEveryBlock) {
  const std::string text = R"({"schema_version":1,
    "problem":{"type":"quadratic","layers":[
      {"name":"a","role":"hidden","rows":2,"cols":2,"curvature":1,"noise_sigma":0},
      {"name":"b","role":"output_head","rows":2,"cols":2,"curvature":1,"noise_sigma":0}]},
    "optimizer":{"method":"sgdm","beta_per_layer":{"a":0.5}},"steps":1})";
  EXPECT_FALSE(error_of(text).empty());
}

TEST(Config, ShippedConfigsLoad) {
  for (const char* name : {"quadratic_scale", "mlp_scale", "mlp_adam", "mlp_sgd", "mlp_variance",
                           "quadratic_last_layer_momentum"}) {
    const std::string path = std::string(SCALE_OPT_SOURCE_DIR) + "/configs/" + name + ".json";
    EXPECT_NO_THROW(load_experiment_config(path)) << name;
  }
}

TEST(Config, MakeProblemMatchesVariant) {
  const ExperimentConfig c = parse_experiment_config(kMinimal);
  const auto p = make_problem(c);
  EXPECT_NE(dynamic_cast<const MlpProblem*>(p.get()), nullptr);
}
