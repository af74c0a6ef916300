#pragma once

// Desk-scale GRPO training loop. A latent label is drawn per question; the
// agent either answers straight away or issues one query to a noisy channel
// and then commits to the argmax of its posterior. Episodes run through the
// rollout harness as tagged text, so parsing, scoring and the composite
// reward are the same code paths used for real policies.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "inforeasoner/belief.hpp"
#include "inforeasoner/grpo.hpp"
#include "inforeasoner/random.hpp"
#include "inforeasoner/reward.hpp"
#include "inforeasoner/rollout.hpp"

namespace inforeasoner {

struct SyntheticRetrievalEnv {
  BeliefState prior = BeliefState::uniform(4);
  std::vector<ObservationChannel> channels;
  std::size_t informative_channel = 0;

  std::size_t labels() const { return prior.size(); }
  /// Query channels plus one direct-answer action (the last index).
  std::size_t actions() const { return channels.size() + 1; }
  std::size_t answer_action() const { return channels.size(); }

  static std::string label_text(std::size_t y) { return "label-" + std::to_string(y); }
  static std::string channel_query(std::size_t c) { return "channel-" + std::to_string(c); }

  void validate() const {
    if (channels.size() < 2) throw Error(ErrorKind::invalid_input, "toy environment needs >= 2 query channels");
    for (const auto& ch : channels) {
      if (ch.hypotheses() != labels()) throw Error(ErrorKind::dimension_mismatch, "channel K differs from prior");
    }
    if (informative_channel >= channels.size()) throw Error(ErrorKind::invalid_input, "bad informative channel");
  }

  /// Four labels, uniform prior; channel 0 reports the label with accuracy
  /// 0.9, channel 1 with 0.4, channel 2 is pure noise.
  static SyntheticRetrievalEnv standard() {
    SyntheticRetrievalEnv env;
    env.prior = BeliefState::uniform(4);
    env.channels = {ObservationChannel::symmetric(4, 0.9, channel_query(0)),
                    ObservationChannel::symmetric(4, 0.4, channel_query(1)),
                    ObservationChannel::uninformative(4, {0.25, 0.25, 0.25, 0.25}, channel_query(2))};
    env.informative_channel = 0;
    return env;
  }

  /// Same layout with every channel uninformative.
  static SyntheticRetrievalEnv uninformative() {
    SyntheticRetrievalEnv env = standard();
    for (std::size_t c = 0; c < env.channels.size(); ++c) {
      env.channels[c] = ObservationChannel::uninformative(4, {0.25, 0.25, 0.25, 0.25}, channel_query(c));
    }
    return env;
  }
};

namespace detail {

inline std::optional<std::pair<std::size_t, std::size_t>> parse_toy_evidence(const std::string& evidence) {
  const auto c = evidence.find("channel-");
  const auto o = evidence.find("observation ");
  if (c == std::string::npos || o == std::string::npos) return std::nullopt;
  try {
    return std::pair{static_cast<std::size_t>(std::stoul(evidence.substr(c + 8))),
                     static_cast<std::size_t>(std::stoul(evidence.substr(o + 12)))};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline std::size_t argmax_random_ties(std::span<const double> v, Rng& rng) {
  const double mx = *std::max_element(v.begin(), v.end());
  std::vector<std::size_t> best;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] >= mx - 1e-12) best.push_back(i);
  }
  return best[std::uniform_int_distribution<std::size_t>(0, best.size() - 1)(rng)];
}

}  // namespace detail

/// Retrieval environment for one episode: answers "channel-c" queries with an
/// observation drawn from channel c given the episode's true label.
class ToyChannelEnvironment final : public RetrievalEnvironment {
 public:
  ToyChannelEnvironment(const SyntheticRetrievalEnv& env, std::size_t true_label, std::uint64_t seed)
      : env_(env), true_label_(true_label), rng_(seed) {}

  std::vector<Document> search(const std::string& query, std::size_t) override {
    const auto pos = query.find("channel-");
    if (pos == std::string::npos) return {};
    const std::size_t c = std::stoul(query.substr(pos + 8));
    if (c >= env_.channels.size()) return {};
    const std::size_t obs = sample_index(env_.channels[c].row(true_label_), rng_);
    return {Document{SyntheticRetrievalEnv::channel_query(c), "observation " + std::to_string(obs)}};
  }

 private:
  const SyntheticRetrievalEnv& env_;
  std::size_t true_label_;
  Rng rng_;
};

/// Softmax agent: its first decision is sampled from the policy; after a query
/// it answers with the posterior argmax (not a policy decision).
class ToyAgent final : public Policy {
 public:
  ToyAgent(const SyntheticRetrievalEnv& env, const ToyPolicy& policy) : env_(env), policy_(policy) {}

  std::string next(const std::string& context, std::size_t call, std::uint64_t seed) override {
    Rng rng(seed);
    if (call == 0) {
      const auto probs = policy_.probs();
      const std::size_t a = sample_index(probs, rng);
      decisions_.push_back(a);
      if (a != env_.answer_action()) {
        return "<think> query </think><search> " + SyntheticRetrievalEnv::channel_query(a) + " </search>";
      }
      return answer(env_.prior, rng);
    }
    BeliefState belief = env_.prior;
    const auto open = context.rfind("<information>");
    if (open != std::string::npos) {
      if (auto ev = detail::parse_toy_evidence(context.substr(open))) {
        belief = bayes_update(env_.prior, env_.channels.at(ev->first), ev->second);
      }
    }
    return answer(belief, rng);
  }

  /// Per-action counts of the sampled policy decisions.
  std::vector<double> decision_counts() const {
    std::vector<double> c(env_.actions(), 0.0);
    for (std::size_t a : decisions_) c[a] += 1.0;
    return c;
  }

 private:
  std::string answer(const BeliefState& b, Rng& rng) const {
    const std::size_t y = detail::argmax_random_ties(b.probs(), rng);
    return "<think> commit </think><answer> " + SyntheticRetrievalEnv::label_text(y) + " </answer>";
  }

  const SyntheticRetrievalEnv& env_;
  const ToyPolicy& policy_;
  std::vector<std::size_t> decisions_;
};

/// Closed-form step IG for the toy: the evidence names the channel and the
/// observation, so prior and posterior beliefs are exact.
inline StepIgEstimator toy_ig_estimator(const SyntheticRetrievalEnv& env, IGConfig cfg) {
  return [&env, cfg](const std::string&, const std::string& evidence, const std::string& golden, std::uint64_t) {
    auto ev = detail::parse_toy_evidence(evidence);
    if (!ev) throw Error(ErrorKind::invalid_input, "toy evidence not understood: " + evidence);
    const BeliefState post = bayes_update(env.prior, env.channels.at(ev->first), ev->second);
    ClassDistribution b{{env.prior.probs().begin(), env.prior.probs().end()}, std::nullopt, ContextTag::prior_B};
    ClassDistribution c{{post.probs().begin(), post.probs().end()}, std::nullopt, ContextTag::posterior_C};
    for (std::size_t y = 0; y < env.labels(); ++y) {
      if (SyntheticRetrievalEnv::label_text(y) == golden) {
        b.golden_index = y;
        c.golden_index = y;
      }
    }
    return compute_ig(b, c, cfg);
  };
}

struct TrainingRecord {
  std::size_t step = 0;
  double em = 0.0;
  double ig = 0.0;
  double composite = 0.0;
  double entropy = 0.0;
  double episode_len = 0.0;
  double p_informative = 0.0;
};

struct TrainingLog {
  std::vector<TrainingRecord> records;
  ToyPolicy final_policy;

  /// First step (1-based count of updates) after which P(informative) exceeds
  /// `threshold`, if any.
  std::optional<std::size_t> updates_to_threshold(double threshold = 0.9) const {
    for (const auto& r : records) {
      if (r.p_informative > threshold) return r.step;
    }
    return std::nullopt;
  }

  double peak_entropy() const {
    double m = 0.0;
    for (const auto& r : records) m = std::max(m, r.entropy);
    return m;
  }
};

struct ToyTrainOptions {
  // Initial logits; empty means "prefers answering directly" (answer logit 1.5).
  std::vector<double> initial_logits;
  RolloutConfig rollout{};
};

/// Per update: draw a label, run G episodes, score them with the composite
/// reward, standardize within the group, and ascend the clipped objective for
/// cfg.update_epochs gradient steps. The reference policy is the initial one.
inline TrainingLog toy_train(const SyntheticRetrievalEnv& env, const StepIgEstimator& ig_estimator,
                             const GRPOConfig& cfg, double lambda, std::uint64_t seed, ToyTrainOptions opts = {}) {
  env.validate();
  cfg.validate();
  ToyPolicy policy;
  if (opts.initial_logits.empty()) {
    policy.logits.assign(env.actions(), 0.0);
    policy.logits[env.answer_action()] = 1.5;
  } else {
    if (opts.initial_logits.size() != env.actions()) throw Error(ErrorKind::dimension_mismatch, "initial logits");
    policy.logits = opts.initial_logits;
  }
  const std::vector<double> ref = policy.logits;
  IGConfig igc;
  igc.lambda = lambda;
  opts.rollout.group_size = cfg.group_size;
  opts.rollout.max_turns = std::max<std::size_t>(opts.rollout.max_turns, 2);

  TrainingLog log;
  log.records.reserve(cfg.steps);
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const std::uint64_t step_seed = sub_seed(seed, step);
    Rng label_rng(sub_seed(step_seed, 0));
    const std::size_t y = sample_index(env.prior.probs(), label_rng);
    const std::string golden = SyntheticRetrievalEnv::label_text(y);

    std::vector<double> rewards;
    std::vector<std::vector<double>> counts;
    TrainingRecord rec;
    rec.step = step;
    double ig_sum = 0.0;
    std::size_t ig_n = 0;
    for (std::size_t i = 0; i < cfg.group_size; ++i) {
      const std::uint64_t ep_seed = sub_seed(step_seed, 1 + i);
      ToyAgent agent(env, policy);
      ToyChannelEnvironment channel_env(env, y, sub_seed(ep_seed, 1));
      Trajectory traj = run_rollout(agent, channel_env, "toy question", opts.rollout, sub_seed(ep_seed, 0));
      score_trajectory(traj, golden, ig_estimator, igc, sub_seed(ep_seed, 2));
      rewards.push_back(traj.composite);
      counts.push_back(agent.decision_counts());
      rec.em += traj.em;
      rec.composite += traj.composite;
      rec.episode_len += static_cast<double>(traj.steps.size());
      for (double g : traj.step_igs) {
        ig_sum += g;
        ++ig_n;
      }
    }
    const double g = static_cast<double>(cfg.group_size);
    rec.em /= g;
    rec.composite /= g;
    rec.episode_len /= g;
    rec.ig = ig_n ? ig_sum / static_cast<double>(ig_n) : 0.0;

    const auto adv = group_advantages(rewards, cfg.adv_eps);
    std::vector<double> old_lp;
    for (const auto& c : counts) old_lp.push_back(policy.episode_logprob(c));
    const ToyGrpoObjective objective(counts, old_lp, adv, ref, cfg.clip_eps, cfg.kl_coef);
    for (std::size_t e = 0; e < cfg.update_epochs; ++e) {
      const auto grad = objective.gradient(policy.logits);
      for (std::size_t a = 0; a < grad.size(); ++a) policy.logits[a] += cfg.learning_rate * grad[a];
    }
    rec.entropy = policy.entropy();
    rec.p_informative = policy.probs()[env.informative_channel];
    log.records.push_back(rec);
  }
  log.final_policy = policy;
  return log;
}

}  // namespace inforeasoner
