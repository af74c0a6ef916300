#pragma once

// Semantic belief over answer classes, semantic entropy, the two information
// gain variants, the per-step estimator that samples answers with and without
// evidence, and the composite trajectory reward.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "inforeasoner/cluster.hpp"
#include "inforeasoner/error.hpp"
#include "inforeasoner/random.hpp"

namespace inforeasoner {

enum class IGVariant { golden_logratio, entropy_diff };
enum class MassMode { raw_likelihood, length_normalized, frequency };

inline const char* to_string(IGVariant v) { return v == IGVariant::golden_logratio ? "golden_logratio" : "entropy_diff"; }

inline const char* to_string(MassMode m) {
  switch (m) {
    case MassMode::raw_likelihood: return "raw_likelihood";
    case MassMode::length_normalized: return "length_normalized";
    case MassMode::frequency: return "frequency";
  }
  return "raw_likelihood";
}

inline IGVariant variant_from_string(const std::string& s) {
  if (s == "golden_logratio") return IGVariant::golden_logratio;
  if (s == "entropy_diff") return IGVariant::entropy_diff;
  throw Error(ErrorKind::invalid_input, "unknown IG variant: " + s);
}

inline MassMode mass_mode_from_string(const std::string& s) {
  if (s == "raw_likelihood") return MassMode::raw_likelihood;
  if (s == "length_normalized") return MassMode::length_normalized;
  if (s == "frequency") return MassMode::frequency;
  throw Error(ErrorKind::invalid_input, "unknown mass mode: " + s);
}

struct IGConfig {
  std::size_t samples_per_context = 12;
  double tau = 0.5;
  double lambda = 0.6;
  IGVariant variant = IGVariant::golden_logratio;
  MassMode mass_mode = MassMode::raw_likelihood;
  double prob_floor = 1e-6;
  double temperature = 1.0;

  void validate() const {
    if (samples_per_context < 2) throw Error(ErrorKind::invalid_input, "samples_per_context must be >= 2");
    check_tau(tau);
    if (!(lambda >= 0.0)) throw Error(ErrorKind::invalid_input, "lambda must be >= 0");
    if (!(prob_floor > 0.0 && prob_floor <= 1e-2)) throw Error(ErrorKind::invalid_input, "prob_floor must be in (0, 1e-2]");
    if (!(temperature > 0.0)) throw Error(ErrorKind::invalid_input, "temperature must be > 0");
  }
};

struct ClassDistribution {
  std::vector<double> probs;
  std::optional<std::size_t> golden_index;
  ContextTag context = ContextTag::prior_B;
};

namespace detail {

inline double sample_weight(const AnswerSample& s, MassMode mode) {
  switch (mode) {
    case MassMode::frequency: return 0.0;
    case MassMode::raw_likelihood:
      if (!s.total_logprob) throw Error(ErrorKind::missing_likelihood, "sample \"" + s.text + "\" has no logprob");
      return *s.total_logprob;
    case MassMode::length_normalized:
      if (!s.total_logprob || !s.token_logprobs || s.token_logprobs->empty()) {
        throw Error(ErrorKind::missing_likelihood, "length normalization needs token logprobs for \"" + s.text + "\"");
      }
      return *s.total_logprob / static_cast<double>(s.token_logprobs->size());
  }
  return 0.0;
}

}  // namespace detail

/// Class masses sum_{s in c} exp(weight(s)), renormalized over the sampled
/// classes. Computed in log space.
inline ClassDistribution class_probabilities(const SemanticPartition& partition, std::span<const AnswerSample> samples,
                                             MassMode mode) {
  if (!partition.is_partition_of(samples.size())) {
    throw Error(ErrorKind::invalid_input, "partition does not cover the samples");
  }
  std::vector<double> logmass;
  logmass.reserve(partition.size());
  for (const auto& cls : partition.classes) {
    std::vector<double> w;
    w.reserve(cls.size());
    for (std::size_t i : cls) w.push_back(detail::sample_weight(samples[i], mode));
    logmass.push_back(log_sum_exp(w));
  }
  const double z = log_sum_exp(logmass);
  ClassDistribution dist;
  dist.context = samples.front().context;
  dist.probs.reserve(logmass.size());
  for (double lm : logmass) dist.probs.push_back(std::exp(lm - z));
  return dist;
}

inline double semantic_entropy(const ClassDistribution& dist) {
  double h = 0.0;
  for (double p : dist.probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

struct IGResult {
  double ig_value = 0.0;
  IGVariant variant = IGVariant::golden_logratio;
  double entropy_prior = 0.0;
  double entropy_post = 0.0;
  std::optional<double> p_golden_prior;
  std::optional<double> p_golden_post;
  bool golden_missing_prior = false;
  bool golden_missing_post = false;
  std::vector<std::string> warnings;
};

inline IGResult compute_ig(const ClassDistribution& prior, const ClassDistribution& post, const IGConfig& cfg) {
  IGResult r;
  r.variant = cfg.variant;
  r.entropy_prior = semantic_entropy(prior);
  r.entropy_post = semantic_entropy(post);
  if (prior.golden_index) r.p_golden_prior = prior.probs.at(*prior.golden_index);
  if (post.golden_index) r.p_golden_post = post.probs.at(*post.golden_index);
  r.golden_missing_prior = !prior.golden_index;
  r.golden_missing_post = !post.golden_index;
  if (cfg.variant == IGVariant::entropy_diff) {
    r.ig_value = r.entropy_prior - r.entropy_post;
  } else {
    const double pb = std::max(r.p_golden_prior.value_or(cfg.prob_floor), cfg.prob_floor);
    const double pc = std::max(r.p_golden_post.value_or(cfg.prob_floor), cfg.prob_floor);
    r.ig_value = std::log(pc) - std::log(pb);
    if (r.golden_missing_prior) r.warnings.emplace_back("golden class absent from prior samples; floored");
    if (r.golden_missing_post) r.warnings.emplace_back("golden class absent from posterior samples; floored");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Sampling-based estimator.

/// Draws n answers for a prompt. Implementations must be safe for concurrent
/// use; stubs are expected to be deterministic in `seed`.
class GenerationOracle {
 public:
  virtual ~GenerationOracle() = default;
  virtual std::vector<AnswerSample> generate(const std::string& prompt, std::size_t n, double temperature,
                                             std::uint64_t seed) = 0;
};

inline std::string prior_prompt(const std::string& question) {
  return "Answer the question based on your own knowledge. Only give me the answer and do not output any other "
         "words.\nQuestion: " +
         question;
}

inline std::string posterior_prompt(const std::string& question, const std::string& documents) {
  return "Answer the question based on the given document. Only give me the answer and do not output any other "
         "words.\nThe following are given documents. " +
         documents + "\nQuestion: " + question;
}

struct ContextEstimate {
  std::vector<AnswerSample> samples;
  SemanticPartition partition;
  ClassDistribution dist;
  GoldenMatch golden;
};

/// Partition, class distribution and golden class for one context's samples.
inline ContextEstimate estimate_context(std::vector<AnswerSample> samples, ContextTag ctx, const std::string& question,
                                        const std::string& golden, EntailmentJudge& judge, const IGConfig& cfg) {
  ContextEstimate est;
  for (auto& s : samples) {
    s.context = ctx;
    s.validate();
  }
  est.samples = std::move(samples);
  est.partition = build_partition(est.samples, judge, question, cfg.tau);
  est.dist = class_probabilities(est.partition, est.samples, cfg.mass_mode);
  est.dist.context = ctx;
  if (!golden.empty()) {
    est.golden = find_golden_class(est.partition, est.samples, golden, judge, question, cfg.tau);
    est.dist.golden_index = est.golden.index;
  }
  return est;
}

/// IG between two already-drawn sample sets.
inline IGResult ig_from_samples(std::vector<AnswerSample> prior, std::vector<AnswerSample> post,
                                const std::string& question, const std::string& golden, EntailmentJudge& judge,
                                const IGConfig& cfg) {
  cfg.validate();
  if (cfg.variant == IGVariant::golden_logratio && trim(golden).empty()) {
    throw Error(ErrorKind::invalid_input, "golden_logratio needs a golden answer");
  }
  const auto b = estimate_context(std::move(prior), ContextTag::prior_B, question, golden, judge, cfg);
  const auto c = estimate_context(std::move(post), ContextTag::posterior_C, question, golden, judge, cfg);
  IGResult r = compute_ig(b.dist, c.dist, cfg);
  if (b.golden.ambiguous()) r.warnings.emplace_back("golden answer matched several prior classes");
  if (c.golden.ambiguous()) r.warnings.emplace_back("golden answer matched several posterior classes");
  return r;
}

namespace detail {

inline std::vector<AnswerSample> sample_phase(GenerationOracle& sampler, const std::string& prompt, const IGConfig& cfg,
                                              std::uint64_t seed, const char* phase) {
  try {
    auto out = sampler.generate(prompt, cfg.samples_per_context, cfg.temperature, seed);
    if (out.size() != cfg.samples_per_context) {
      throw Error(ErrorKind::protocol, "sampler returned " + std::to_string(out.size()) + " samples, expected " +
                                           std::to_string(cfg.samples_per_context));
    }
    return out;
  } catch (const Error& e) {
    if (!e.is_transport()) throw;
    throw Error(e.kind(), std::string(e.what()) + " [phase: " + phase + "]");
  }
}

}  // namespace detail

/// Samples M answers without and with the evidence, clusters each set, and
/// compares the resulting class distributions. The two phases use sub-seeds
/// 0 (prior) and 1 (posterior) of `seed`.
inline IGResult estimate_step_ig(const std::string& question, const std::string& evidence, const std::string& golden,
                                 GenerationOracle& sampler, EntailmentJudge& judge, const IGConfig& cfg,
                                 std::uint64_t seed = 0) {
  cfg.validate();
  auto prior = detail::sample_phase(sampler, prior_prompt(question), cfg, sub_seed(seed, 0), "prior");
  auto post = detail::sample_phase(sampler, posterior_prompt(question, evidence), cfg, sub_seed(seed, 1), "posterior");
  return ig_from_samples(std::move(prior), std::move(post), question, golden, judge, cfg);
}

/// em + lambda * mean(step_igs); no retrieval steps means no IG term.
inline double composite_reward(int em, std::span<const double> step_igs, double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorKind::invalid_input, "lambda must be >= 0");
  if (em != 0 && em != 1) throw Error(ErrorKind::invalid_input, "em must be 0 or 1");
  if (step_igs.empty()) return static_cast<double>(em);
  double sum = 0.0;
  for (double g : step_igs) sum += g;
  return static_cast<double>(em) + lambda * (sum / static_cast<double>(step_igs.size()));
}

inline double composite_reward(int em, std::initializer_list<double> step_igs, double lambda) {
  return composite_reward(em, std::span<const double>(step_igs.begin(), step_igs.size()), lambda);
}

}  // namespace inforeasoner
