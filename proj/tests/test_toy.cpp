#include <gtest/gtest.h>

#include <cmath>

#include "inforeasoner/toy.hpp"

using namespace inforeasoner;

namespace {

GRPOConfig short_run(std::size_t steps) {
  GRPOConfig c;
  c.steps = steps;
  return c;
}

IGConfig ig_cfg() { return IGConfig{}; }

}  // namespace

TEST(SyntheticEnv, Layout) {
  const auto env = SyntheticRetrievalEnv::standard();
  EXPECT_NO_THROW(env.validate());
  EXPECT_EQ(env.actions(), 4u);
  EXPECT_EQ(env.answer_action(), 3u);
  // channel 0 carries the most information about the label
  const double i0 = expected_ig(env.prior, env.channels[0]);
  const double i1 = expected_ig(env.prior, env.channels[1]);
  EXPECT_GT(i0, i1);
  EXPECT_NEAR(expected_ig(env.prior, env.channels[2]), 0.0, 1e-15);

  SyntheticRetrievalEnv bad = env;
  bad.channels.resize(1);
  EXPECT_THROW(bad.validate(), Error);
}

TEST(ToyIg, ClosedForm) {
  const auto env = SyntheticRetrievalEnv::standard();
  const auto est = toy_ig_estimator(env, ig_cfg());
  // observing the true label through the 0.9 channel: posterior 0.9 on it
  const auto r = est("q", "Doc 1 (Title: \"channel-0\") observation 2", "label-2", 0);
  EXPECT_NEAR(r.ig_value, std::log(0.9 / 0.25), 1e-12);
  const auto miss = est("q", "Doc 1 (Title: \"channel-0\") observation 1", "label-2", 0);
  EXPECT_NEAR(miss.ig_value, std::log((0.1 / 3) / 0.25), 1e-12);
  EXPECT_NEAR(est("q", "channel-2 observation 0", "label-0", 0).ig_value, 0.0, 1e-12);
  EXPECT_THROW(est("q", "nothing useful", "label-0", 0), Error);
}

TEST(ToyAgent, EpisodeShape) {
  const auto env = SyntheticRetrievalEnv::standard();
  ToyPolicy always_query{{20.0, -20.0, -20.0, -20.0}};
  ToyAgent agent(env, always_query);
  ToyChannelEnvironment chan(env, 1, 5);
  RolloutConfig rc;
  const auto traj = run_rollout(agent, chan, "toy question", rc, 3, std::string("label-1"));
  ASSERT_EQ(traj.steps.size(), 2u);
  EXPECT_EQ(traj.steps[0].action, Action::search("channel-0"));
  EXPECT_TRUE(traj.predicted);
  EXPECT_EQ(agent.decision_counts(), (std::vector<double>{1, 0, 0, 0}));

  ToyPolicy always_answer{{-20.0, -20.0, -20.0, 20.0}};
  ToyAgent direct(env, always_answer);
  const auto d = run_rollout(direct, chan, "toy question", rc, 3);
  EXPECT_EQ(d.steps.size(), 1u);
  EXPECT_EQ(d.search_steps(), 0u);
}

TEST(ToyTrain, LogShapeAndDeterminism) {
  const auto env = SyntheticRetrievalEnv::standard();
  const auto est = toy_ig_estimator(env, ig_cfg());
  const auto a = toy_train(env, est, short_run(50), 0.6, 1);
  const auto b = toy_train(env, est, short_run(50), 0.6, 1);
  ASSERT_EQ(a.records.size(), 50u);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].step, i + 1);
    EXPECT_EQ(a.records[i].composite, b.records[i].composite);
    EXPECT_EQ(a.records[i].entropy, b.records[i].entropy);
    EXPECT_GE(a.records[i].em, 0.0);
    EXPECT_LE(a.records[i].em, 1.0);
    EXPECT_GE(a.records[i].episode_len, 1.0);
    EXPECT_LE(a.records[i].episode_len, 2.0);
  }
  EXPECT_EQ(a.final_policy.logits, b.final_policy.logits);
  const auto c = toy_train(env, est, short_run(50), 0.6, 2);
  EXPECT_NE(a.final_policy.logits, c.final_policy.logits);
}

TEST(ToyTrain, UninformativeEnvironmentStaysFlat) {
  const auto env = SyntheticRetrievalEnv::uninformative();
  const auto est = toy_ig_estimator(env, ig_cfg());
  ToyTrainOptions opts;
  opts.initial_logits.assign(env.actions(), 0.0);
  const auto log = toy_train(env, est, short_run(300), 0.0, 4, opts);
  EXPECT_GT(log.records.back().entropy, 0.9 * std::log(4.0));
}

TEST(ToyTrain, InformationGainSpeedsUpLearning) {
  const auto env = SyntheticRetrievalEnv::standard();
  const auto est = toy_ig_estimator(env, ig_cfg());
  const auto with_ig = toy_train(env, est, short_run(400), 0.6, 3);
  const auto without = toy_train(env, est, short_run(400), 0.0, 3);
  EXPECT_GT(with_ig.records.back().p_informative, without.records.back().p_informative);
  EXPECT_GT(with_ig.records.back().p_informative, with_ig.records.front().p_informative);
}

TEST(ToyTrain, Validation) {
  const auto env = SyntheticRetrievalEnv::standard();
  const auto est = toy_ig_estimator(env, ig_cfg());
  ToyTrainOptions opts;
  opts.initial_logits = {0.0, 0.0};
  EXPECT_THROW(toy_train(env, est, short_run(1), 0.6, 1, opts), Error);
}
