#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "inforeasoner/belief.hpp"

using namespace inforeasoner;
using Matrix = std::vector<std::vector<double>>;

namespace {

// Mutual information from the joint table, no Bayes updates involved.
double mutual_information(const BeliefState& b, const ObservationChannel& ch) {
  double mi = 0.0;
  for (std::size_t o = 0; o < ch.symbols(); ++o) {
    double po = 0.0;
    for (std::size_t y = 0; y < b.size(); ++y) po += b[y] * ch.likelihood(y, o);
    for (std::size_t y = 0; y < b.size(); ++y) {
      const double joint = b[y] * ch.likelihood(y, o);
      if (joint > 0.0) mi += joint * std::log(ch.likelihood(y, o) / po);
    }
  }
  return mi;
}

double binary_entropy(double p) { return -p * std::log(p) - (1 - p) * std::log(1 - p); }

void expect_probs(const BeliefState& b, std::vector<double> want, double tol = 1e-12) {
  ASSERT_EQ(b.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(b[i], want[i], tol) << "index " << i;
}

}  // namespace

TEST(NormalizeBelief, Examples) {
  expect_probs(normalize_belief({2, 2}), {0.5, 0.5});
  expect_probs(normalize_belief({1, 0, 0}), {1, 0, 0});
  try {
    normalize_belief({0, 0});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_distribution);
  }
  EXPECT_THROW(normalize_belief({1, -1, 2}), Error);
  EXPECT_THROW(normalize_belief(std::span<const double>{}), Error);
}

TEST(BeliefState, RejectsInvalidVectors) {
  EXPECT_THROW(BeliefState::from_probs({0.5, 0.4}), Error);
  EXPECT_THROW(BeliefState::from_probs({}), Error);
  EXPECT_THROW(BeliefState::from_probs({1.5, -0.5}), Error);
  EXPECT_NO_THROW(BeliefState::from_probs({0.5, 0.5 + 5e-10}));
}

TEST(ObservationChannel, RejectsNonStochasticRows) {
  EXPECT_THROW(ObservationChannel(Matrix{{0.5, 0.4}, {0.5, 0.5}}), Error);
  EXPECT_THROW(ObservationChannel(Matrix{{1.0}, {0.5, 0.5}}), Error);
  EXPECT_THROW(GarblingKernel(Matrix{{0.2, 0.2}}), Error);
}

TEST(BayesUpdate, Examples) {
  const auto half = BeliefState::uniform(2);
  expect_probs(bayes_update(half, ObservationChannel({{1, 0}, {0, 1}}), 0), {1, 0});
  expect_probs(bayes_update(BeliefState::degenerate(2, 0), ObservationChannel({{0.3, 0.7}, {0.6, 0.4}}), 1), {1, 0});
  expect_probs(bayes_update(half, ObservationChannel({{0.9, 0.1}, {0.1, 0.9}}), 0), {0.45 / 0.5, 0.05 / 0.5});
}

TEST(BayesUpdate, ImpossibleObservationAndShapeErrors) {
  const ObservationChannel noiseless({{1, 0}, {0, 1}});
  try {
    bayes_update(BeliefState::degenerate(2, 0), noiseless, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::impossible_observation);
  }
  EXPECT_THROW(bayes_update(BeliefState::uniform(3), noiseless, 0), Error);
  EXPECT_THROW(bayes_update(BeliefState::uniform(2), noiseless, 2), Error);
}

TEST(Shannon, Examples) {
  EXPECT_EQ(shannon_uncertainty(BeliefState::from_probs({1, 0})), 0.0);
  EXPECT_NEAR(shannon_uncertainty(BeliefState::uniform(2)), std::log(2.0), 1e-15);
  EXPECT_NEAR(shannon_uncertainty(BeliefState::from_probs({0.9, 0.1})), 0.3250829733914482, 1e-12);
}

TEST(RealizedIG, Examples) {
  EXPECT_NEAR(realized_ig(BeliefState::uniform(2), BeliefState::degenerate(2, 0)), std::log(2.0), 1e-15);
  const auto b = BeliefState::from_probs({0.3, 0.7});
  EXPECT_EQ(realized_ig(b, b), 0.0);
  EXPECT_NEAR(realized_ig(BeliefState::from_probs({0.9, 0.1}), BeliefState::uniform(2)),
              binary_entropy(0.1) - std::log(2.0), 1e-12);
  EXPECT_LT(realized_ig(BeliefState::from_probs({0.9, 0.1}), BeliefState::uniform(2)), -0.368);
}

TEST(ExpectedIG, Examples) {
  const auto half = BeliefState::uniform(2);
  EXPECT_NEAR(expected_ig(half, ObservationChannel({{1, 0}, {0, 1}})), std::log(2.0), 1e-12);
  EXPECT_NEAR(expected_ig(half, ObservationChannel::uninformative(2, {0.3, 0.7})), 0.0, 1e-15);
  EXPECT_NEAR(expected_ig(half, ObservationChannel({{0.9, 0.1}, {0.1, 0.9}})), std::log(2.0) - binary_entropy(0.1),
              1e-12);
}

TEST(GarbleChannel, Examples) {
  const ObservationChannel ch({{0.7, 0.2, 0.1}, {0.1, 0.1, 0.8}});
  const auto same = garble_channel(ch, GarblingKernel::identity(3));
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t o = 0; o < 3; ++o) EXPECT_NEAR(same.likelihood(x, o), ch.likelihood(x, o), 1e-15);

  const auto flat = garble_channel(ch, GarblingKernel({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}));
  EXPECT_EQ(flat.row(0)[0], flat.row(1)[0]);
  EXPECT_NEAR(expected_ig(BeliefState::uniform(2), flat), 0.0, 1e-15);

  const auto flipped = garble_channel(ObservationChannel({{1, 0}, {0, 1}}), GarblingKernel({{0.8, 0.2}, {0.2, 0.8}}));
  EXPECT_NEAR(flipped.likelihood(0, 0), 0.8, 1e-15);
  EXPECT_NEAR(flipped.likelihood(0, 1), 0.2, 1e-15);
  EXPECT_NEAR(flipped.likelihood(1, 0), 0.2, 1e-15);
  EXPECT_NEAR(flipped.likelihood(1, 1), 0.8, 1e-15);

  EXPECT_THROW(garble_channel(ch, GarblingKernel::identity(2)), Error);
}

TEST(Trajectory, EmptyHorizon) {
  const auto b0 = BeliefState::from_probs({0.2, 0.8});
  const auto t = simulate_belief_trajectory(b0, {}, 1, 3);
  EXPECT_TRUE(t.igs.empty());
  ASSERT_EQ(t.beliefs.size(), 1u);
  EXPECT_EQ(t.beliefs[0], b0);
}

TEST(Trajectory, UninformativeChannelsLeaveBeliefFixed) {
  const auto b0 = BeliefState::from_probs({0.2, 0.3, 0.5});
  std::vector<ObservationChannel> chs(4, ObservationChannel::uninformative(3, {0.25, 0.75}));
  const auto t = simulate_belief_trajectory(b0, chs, 2, 11);
  for (const auto& b : t.beliefs) expect_probs(b, {0.2, 0.3, 0.5}, 1e-15);
  for (double g : t.igs) EXPECT_NEAR(g, 0.0, 1e-15);
}

TEST(Trajectory, SeededTwoStepTelescopes) {
  const auto b0 = BeliefState::from_probs({0.5, 0.3, 0.2});
  const std::vector<ObservationChannel> chs{ObservationChannel({{0.6, 0.4}, {0.3, 0.7}, {0.5, 0.5}}),
                                            ObservationChannel({{0.2, 0.3, 0.5}, {0.6, 0.2, 0.2}, {0.1, 0.1, 0.8}})};
  const auto t = simulate_belief_trajectory(b0, chs, 1, 7, {}, 0.95);
  ASSERT_EQ(t.igs.size(), 2u);
  ASSERT_EQ(t.beliefs.size(), 3u);
  EXPECT_EQ(t.discount, 0.95);

  // Recompute the whole trajectory by hand from the recorded observations.
  std::vector<double> b(b0.probs().begin(), b0.probs().end());
  auto entropy = [](const std::vector<double>& p) {
    double h = 0.0;
    for (double x : p)
      if (x > 0) h -= x * std::log(x);
    return h;
  };
  const double h0 = entropy(b);
  for (std::size_t s = 0; s < 2; ++s) {
    double z = 0.0;
    for (std::size_t y = 0; y < 3; ++y) z += (b[y] *= chs[s].likelihood(y, t.observations[s]));
    for (double& x : b) x /= z;
    for (std::size_t y = 0; y < 3; ++y) EXPECT_NEAR(t.beliefs[s + 1][y], b[y], 1e-14);
  }
  EXPECT_NEAR(t.igs[0] + t.igs[1], h0 - entropy(b), 1e-12);

  const auto again = simulate_belief_trajectory(b0, chs, 1, 7, {}, 0.95);
  EXPECT_EQ(again.observations, t.observations);
}

TEST(Axioms, ShannonPasses) {
  const auto rep = check_axioms(UncertaintyFunctional{}, 500, 3);
  EXPECT_EQ(rep.trials, 500u);
  EXPECT_TRUE(rep.passed());
  EXPECT_EQ(rep.minimality_violation, 0.0);
  EXPECT_NEAR(shannon_uncertainty(normalize_belief({0.5, 0.5})), std::log(2.0), 1e-15);
  EXPECT_THROW(check_axioms(UncertaintyFunctional{}, 0, 1), Error);
}

// ---------------------------------------------------------------------------
// Property tests over random instances.

class BeliefProperties : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(BeliefProperties, ExpectedGainIsMutualInformation) {
  Rng rng(GetParam());
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 1 + rng() % 6, l = 1 + rng() % 6;
    const auto b = random_belief(k, rng, 0.2);
    const auto ch = random_channel(k, l, rng, 0.2);
    const double eig = expected_ig(b, ch);
    EXPECT_NEAR(eig, mutual_information(b, ch), 1e-12);
    EXPECT_GE(eig, -1e-9);
    EXPECT_LE(eig, shannon_uncertainty(b) + 1e-12);
  }
}

TEST_P(BeliefProperties, UpdatePreservesNormalizationAndFixesDegenerates) {
  Rng rng(GetParam());
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 1 + rng() % 6, l = 1 + rng() % 6;
    const auto b = random_belief(k, rng, 0.3);
    const auto ch = random_channel(k, l, rng, 0.3);
    for (std::size_t o = 0; o < l; ++o) {
      if (ch.marginal(b, o) <= 0.0) {
        EXPECT_THROW(bayes_update(b, ch, o), Error);
        continue;
      }
      const auto post = bayes_update(b, ch, o);
      EXPECT_NEAR(std::accumulate(post.probs().begin(), post.probs().end(), 0.0), 1.0, 1e-12);
      for (double p : post.probs()) EXPECT_GE(p, 0.0);
    }
    const std::size_t at = rng() % k;
    const auto deg = BeliefState::degenerate(k, at);
    for (std::size_t o = 0; o < l; ++o) {
      if (ch.likelihood(at, o) > 0.0) {
        EXPECT_EQ(bayes_update(deg, ch, o), deg);
      }
    }
  }
}

TEST_P(BeliefProperties, ShannonIsPermutationInvariantAndBounded) {
  Rng rng(GetParam());
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 1 + rng() % 8;
    auto p = random_simplex(k, rng, 0.2);
    const double h = shannon_uncertainty(BeliefState::from_probs(p));
    std::shuffle(p.begin(), p.end(), rng);
    EXPECT_NEAR(shannon_uncertainty(BeliefState::from_probs(p)), h, 1e-13);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log(static_cast<double>(k)) + 1e-12);
  }
}

TEST_P(BeliefProperties, GarblingNeverIncreasesExpectedGain) {
  Rng rng(GetParam());
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 1 + rng() % 6, l = 1 + rng() % 6, l2 = 1 + rng() % 6;
    const auto b = random_belief(k, rng, 0.2);
    const auto ch = random_channel(k, l, rng, 0.2);
    const auto g = random_kernel(l, l2, rng, 0.2);
    const auto garbled = garble_channel(ch, g);
    for (std::size_t y = 0; y < k; ++y) {
      EXPECT_NEAR(std::accumulate(garbled.row(y).begin(), garbled.row(y).end(), 0.0), 1.0, 1e-12);
    }
    EXPECT_LE(expected_ig(b, garbled), expected_ig(b, ch) + 1e-9);
  }
}

TEST_P(BeliefProperties, TrajectoriesTelescope) {
  Rng rng(GetParam());
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = 1 + rng() % 6;
    std::vector<ObservationChannel> chs;
    for (int s = 0; s < 8; ++s) chs.push_back(random_channel(k, 1 + rng() % 6, rng, 0.1));
    const auto b0 = random_belief(k, rng);
    const std::size_t y = sample_index(b0.probs(), rng);
    const auto traj = simulate_belief_trajectory(b0, chs, y, rng());
    ASSERT_EQ(traj.igs.size() + 1, traj.beliefs.size());
    double sum = 0.0;
    for (double g : traj.igs) sum += g;
    EXPECT_NEAR(sum, shannon_uncertainty(b0) - shannon_uncertainty(traj.beliefs.back()), 1e-9);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, BeliefProperties, ::testing::Values(1u, 2u, 3u, 42u));

TEST(Propositions, SuitePassesAndIsDeterministic) {
  const auto a = check_propositions(300, 5);
  const auto b = check_propositions(300, 5);
  EXPECT_TRUE(a.passed());
  EXPECT_EQ(a.instances, 300u);
  EXPECT_GE(a.min_eig, -1e-9);
  EXPECT_EQ(a.min_eig, b.min_eig);
  EXPECT_EQ(a.max_telescoping_error, b.max_telescoping_error);
}
