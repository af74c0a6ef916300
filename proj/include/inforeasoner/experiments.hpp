#pragma once

// Synthetic answer generators with known class distributions, the closed-form
// IG they imply, the group-size sensitivity study (bootstrap subsampling from
// a fixed oracle pool), and the evidence-combination study.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "inforeasoner/belief.hpp"
#include "inforeasoner/cluster.hpp"
#include "inforeasoner/random.hpp"
#include "inforeasoner/reward.hpp"

namespace inforeasoner {

namespace detail {

inline void check_distribution(const std::vector<double>& p, std::size_t k, const char* what) {
  if (p.size() != k) throw Error(ErrorKind::dimension_mismatch, std::string(what) + " has the wrong number of classes");
  check_stochastic_row(p, what);
}

}  // namespace detail

/// Answers drawn from a fixed class distribution. Each class has one canonical
/// string; with surface variants on, a draw may come out as "The X" or "X."
/// (equal to X after answer normalization).
struct AnswerDistribution {
  std::vector<std::string> vocabulary;
  double noise = 0.0;  // std-dev of the logprob jitter, nats
  bool surface_variants = false;

  std::vector<AnswerSample> draw(const std::vector<double>& probs, std::size_t n, ContextTag ctx, Rng& rng) const {
    std::normal_distribution<double> jitter(0.0, 1.0);
    std::vector<AnswerSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = sample_index(probs, rng);
      std::string text = vocabulary[c];
      if (surface_variants) {
        switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
          case 1: text = "The " + text; break;
          case 2: text += "."; break;
          default: break;
        }
      }
      double lp = std::log(probs[c]);
      if (noise > 0.0) lp += noise * jitter(rng);
      out.push_back(AnswerSample{std::move(text), std::nullopt, std::min(lp, 0.0), ctx});
    }
    return out;
  }
};

struct SyntheticAnswerGenerator {
  std::vector<double> prior;      // class distribution without evidence
  std::vector<double> posterior;  // class distribution with evidence
  AnswerDistribution answers;
  std::size_t golden_class = 0;

  std::size_t classes() const noexcept { return answers.vocabulary.size(); }
  const std::string& golden() const { return answers.vocabulary.at(golden_class); }

  void validate() const {
    const std::size_t k = classes();
    if (k == 0) throw Error(ErrorKind::invalid_input, "empty vocabulary");
    detail::check_distribution(prior, k, "prior class distribution");
    detail::check_distribution(posterior, k, "posterior class distribution");
    if (golden_class >= k) throw Error(ErrorKind::invalid_input, "golden class out of range");
    std::map<std::string, int> seen;
    for (const auto& v : answers.vocabulary) {
      if (seen[normalize_answer(v)]++) throw Error(ErrorKind::invalid_input, "vocabulary entries collide: " + v);
    }
  }

  const std::vector<double>& probs(ContextTag ctx) const {
    return ctx == ContextTag::prior_B ? prior : posterior;
  }

  std::vector<AnswerSample> draw(ContextTag ctx, std::size_t n, Rng& rng) const {
    return answers.draw(probs(ctx), n, ctx, rng);
  }

  /// One noiseless sample per supported class with logprob ln p(c).
  std::vector<AnswerSample> enumerate_support(ContextTag ctx) const {
    std::vector<AnswerSample> out;
    const auto& p = probs(ctx);
    for (std::size_t c = 0; c < p.size(); ++c) {
      if (p[c] > 0.0) out.push_back(AnswerSample{answers.vocabulary[c], std::nullopt, std::log(p[c]), ctx});
    }
    return out;
  }
};

/// IG evaluated directly on the generator's true distributions.
inline double closed_form_ig(const SyntheticAnswerGenerator& gen, IGVariant variant, double prob_floor = 1e-6) {
  gen.validate();
  ClassDistribution b{gen.prior, gen.golden_class, ContextTag::prior_B};
  ClassDistribution c{gen.posterior, gen.golden_class, ContextTag::posterior_C};
  if (gen.prior[gen.golden_class] == 0.0) b.golden_index.reset();
  if (gen.posterior[gen.golden_class] == 0.0) c.golden_index.reset();
  IGConfig cfg;
  cfg.variant = variant;
  cfg.prob_floor = prob_floor;
  return compute_ig(b, c, cfg).ig_value;
}

/// Generation oracle whose answer distribution depends on which marker strings
/// appear in the prompt. The rule with the most markers, all present, wins;
/// otherwise the default distribution is used. Pure given the seed.
class ScenarioSampler final : public GenerationOracle {
 public:
  struct Rule {
    std::vector<std::string> markers;
    std::vector<double> probs;
  };

  ScenarioSampler(AnswerDistribution answers, std::vector<double> default_probs, std::vector<Rule> rules = {})
      : answers_(std::move(answers)), default_(std::move(default_probs)), rules_(std::move(rules)) {
    detail::check_distribution(default_, answers_.vocabulary.size(), "default distribution");
    for (const auto& r : rules_) detail::check_distribution(r.probs, answers_.vocabulary.size(), "rule distribution");
  }

  /// Prior distribution for plain prompts, posterior when `marker` is present.
  static ScenarioSampler from_generator(const SyntheticAnswerGenerator& gen, std::string marker) {
    gen.validate();
    return ScenarioSampler(gen.answers, gen.prior, {Rule{{std::move(marker)}, gen.posterior}});
  }

  const std::vector<double>& distribution_for(const std::string& prompt) const {
    const std::vector<double>* best = &default_;
    std::size_t best_n = 0;
    for (const auto& r : rules_) {
      const bool all = std::all_of(r.markers.begin(), r.markers.end(),
                                   [&](const std::string& m) { return prompt.find(m) != std::string::npos; });
      if (all && r.markers.size() > best_n) {
        best = &r.probs;
        best_n = r.markers.size();
      }
    }
    return *best;
  }

  std::vector<AnswerSample> generate(const std::string& prompt, std::size_t n, double, std::uint64_t seed) override {
    Rng rng(seed);
    return answers_.draw(distribution_for(prompt), n, ContextTag::prior_B, rng);
  }

 private:
  AnswerDistribution answers_;
  std::vector<double> default_;
  std::vector<Rule> rules_;
};

// ---------------------------------------------------------------------------
// Small statistics helpers.

/// Ranks starting at 1; ties share their average rank.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::invalid_input, "spearman needs paired data");
  return pearson(average_ranks(x), average_ranks(y));
}

/// Least-squares slope of ln y against ln x. Non-positive y are skipped.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < 2) throw Error(ErrorKind::invalid_input, "not enough positive points for a log-log fit");
  const double n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

/// Linear-interpolated quantile, q in [0,1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw Error(ErrorKind::invalid_input, "quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// ---------------------------------------------------------------------------
// Group-size sensitivity.

struct SensitivityRow {
  std::size_t m = 0;
  double mae = 0.0;             // against the closed form
  double ci_low = 0.0;          // 2.5% / 97.5% percentiles of replicate |error|
  double ci_high = 0.0;
  double mae_vs_oracle = 0.0;   // against the estimate on the full pool
};

struct SensitivityReport {
  std::vector<SensitivityRow> rows;
  std::size_t oracle_n = 64;
  std::size_t bootstrap_reps = 200;
  double closed_form = 0.0;
  double oracle_estimate = 0.0;

  std::vector<double> ms() const {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(static_cast<double>(r.m));
    return v;
  }
  std::vector<double> maes() const {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.mae);
    return v;
  }
  const SensitivityRow* row(std::size_t m) const {
    for (const auto& r : rows)
      if (r.m == m) return &r;
    return nullptr;
  }
};

inline std::vector<std::size_t> default_m_grid() {
  std::vector<std::size_t> g;
  for (std::size_t m = 4; m <= 60; m += 4) g.push_back(m);
  return g;
}

/// Draws an oracle pool of `oracle_n` answers per context, then for every M
/// subsamples M answers per context without replacement `reps` times and
/// scores the IG estimate against the closed form and the full-pool estimate.
inline SensitivityReport sensitivity_curve(const SyntheticAnswerGenerator& gen, std::vector<std::size_t> m_grid,
                                           std::size_t oracle_n, std::size_t reps, std::uint64_t seed,
                                           IGConfig cfg) {
  gen.validate();
  if (m_grid.empty()) throw Error(ErrorKind::invalid_input, "empty M grid");
  if (reps == 0) throw Error(ErrorKind::invalid_input, "bootstrap_reps must be >= 1");
  std::sort(m_grid.begin(), m_grid.end());
  for (std::size_t m : m_grid) {
    if (m > oracle_n) throw Error(ErrorKind::invalid_input, "M=" + std::to_string(m) + " exceeds oracle pool size");
    if (m < 2) throw Error(ErrorKind::invalid_input, "M must be >= 2");
  }
  const std::string question = "synthetic question";
  EntailmentJudge judge(std::make_shared<NormalizedMatchOracle>());

  Rng pool_rng_b(sub_seed(seed, 0));
  Rng pool_rng_c(sub_seed(seed, 1));
  const auto pool_b = gen.draw(ContextTag::prior_B, oracle_n, pool_rng_b);
  const auto pool_c = gen.draw(ContextTag::posterior_C, oracle_n, pool_rng_c);

  SensitivityReport rep;
  rep.oracle_n = oracle_n;
  rep.bootstrap_reps = reps;
  rep.closed_form = closed_form_ig(gen, cfg.variant, cfg.prob_floor);
  IGConfig pool_cfg = cfg;
  pool_cfg.samples_per_context = oracle_n;
  rep.oracle_estimate = ig_from_samples(pool_b, pool_c, question, gen.golden(), judge, pool_cfg).ig_value;

  auto subsample = [](const std::vector<AnswerSample>& pool, std::size_t m, Rng& rng) {
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>(i, idx.size() - 1)(rng);
      std::swap(idx[i], idx[j]);
    }
    std::vector<AnswerSample> out;
    out.reserve(m);
    for (std::size_t i = 0; i < m; ++i) out.push_back(pool[idx[i]]);
    return out;
  };

  for (std::size_t gi = 0; gi < m_grid.size(); ++gi) {
    const std::size_t m = m_grid[gi];
    IGConfig mc = cfg;
    mc.samples_per_context = m;
    std::vector<double> err_closed(reps), err_oracle(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      // Same stream per replicate across the grid: the M-subsample is a
      // prefix of one permutation, so neighbouring M share most draws.
      Rng rng_b(sub_seed(sub_seed(seed, 2), r));
      Rng rng_c(sub_seed(sub_seed(seed, 3), r));
      auto b = subsample(pool_b, m, rng_b);
      auto c = subsample(pool_c, m, rng_c);
      const double est = ig_from_samples(std::move(b), std::move(c), question, gen.golden(), judge, mc).ig_value;
      err_closed[r] = std::abs(est - rep.closed_form);
      err_oracle[r] = std::abs(est - rep.oracle_estimate);
    }
    SensitivityRow row;
    row.m = m;
    row.mae = std::accumulate(err_closed.begin(), err_closed.end(), 0.0) / static_cast<double>(reps);
    row.mae_vs_oracle = std::accumulate(err_oracle.begin(), err_oracle.end(), 0.0) / static_cast<double>(reps);
    row.ci_low = quantile(err_closed, 0.025);
    row.ci_high = quantile(err_closed, 0.975);
    rep.rows.push_back(row);
  }
  return rep;
}

/// Generator used by the sensitivity study: three city answers, the golden one
/// likely but not certain without evidence and dominant with it.
inline SyntheticAnswerGenerator sensitivity_generator() {
  SyntheticAnswerGenerator gen;
  gen.answers.vocabulary = {"Bolton, England", "Manchester, England", "London, England"};
  gen.answers.surface_variants = true;
  gen.prior = {0.55, 0.27, 0.18};
  gen.posterior = {0.9, 0.06, 0.04};
  gen.golden_class = 0;
  return gen;
}

/// Frequency masses: the sampled class frequencies are consistent estimates
/// of the generator's class probabilities. Likelihood-summed masses count a
/// duplicated answer once per copy and converge to a different distribution.
inline IGConfig sensitivity_ig_config() {
  IGConfig cfg;
  cfg.variant = IGVariant::golden_logratio;
  cfg.mass_mode = MassMode::frequency;
  return cfg;
}

// ---------------------------------------------------------------------------
// Evidence combination.

struct BoxSummary {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;

  static BoxSummary of(const std::vector<double>& v) {
    return {quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75)};
  }
};

struct CombinationReport {
  std::vector<double> a_only, b_only, sum, combined;

  BoxSummary summary_a() const { return BoxSummary::of(a_only); }
  BoxSummary summary_b() const { return BoxSummary::of(b_only); }
  BoxSummary summary_sum() const { return BoxSummary::of(sum); }
  BoxSummary summary_combined() const { return BoxSummary::of(combined); }
};

/// IG with evidence A, with B, and with A and B together, over `reps` seeded
/// repetitions. The naive sum IG(A) + IG(B) is reported alongside.
inline CombinationReport evidence_combination(const std::string& question, const std::string& doc_a,
                                              const std::string& doc_b, const std::string& golden,
                                              GenerationOracle& sampler, EntailmentJudge& judge, const IGConfig& cfg,
                                              std::size_t reps, std::uint64_t seed) {
  if (reps == 0) throw Error(ErrorKind::invalid_input, "reps must be >= 1");
  CombinationReport out;
  const std::string both = doc_a + "\n" + doc_b;
  for (std::size_t r = 0; r < reps; ++r) {
    const std::uint64_t s = sub_seed(seed, r);
    const double a = estimate_step_ig(question, doc_a, golden, sampler, judge, cfg, sub_seed(s, 0)).ig_value;
    const double b = estimate_step_ig(question, doc_b, golden, sampler, judge, cfg, sub_seed(s, 1)).ig_value;
    const double ab = estimate_step_ig(question, both, golden, sampler, judge, cfg, sub_seed(s, 2)).ig_value;
    out.a_only.push_back(a);
    out.b_only.push_back(b);
    out.sum.push_back(a + b);
    out.combined.push_back(ab);
  }
  return out;
}

/// Two-hop scenario: document A names the band behind an album, document B
/// names the city where that band formed. Neither alone pins down the city.
struct TwoHopScenario {
  std::string question = "In what city was the band behind the album Love Bites formed?";
  std::string doc_a =
      "Doc 1 (Title: \"Love Bites (album)\") Love Bites is the second studio album by English punk rock band "
      "Buzzcocks, released in 1978.";
  std::string doc_b =
      "Doc 1 (Title: \"Buzzcocks\") Buzzcocks are an English punk rock band, formed in Bolton, England, in 1976 by "
      "Pete Shelley and Howard Devoto.";
  std::string golden = "Bolton, England";

  /// Classes: golden first, then distractor cities.
  AnswerDistribution answers() const {
    return AnswerDistribution{{"Bolton, England", "Manchester, England", "London, England", "Liverpool, England",
                               "Sheffield, England"},
                              0.1,
                              true};
  }

  ScenarioSampler sampler() const {
    return ScenarioSampler(answers(), {0.20, 0.30, 0.25, 0.15, 0.10},
                           {{{"Love Bites is the second"}, {0.25, 0.40, 0.15, 0.10, 0.10}},
                            {{"formed in Bolton"}, {0.30, 0.25, 0.25, 0.10, 0.10}},
                            {{"Love Bites is the second", "formed in Bolton"}, {0.90, 0.04, 0.03, 0.02, 0.01}}});
  }
};

}  // namespace inforeasoner
