#pragma once

// Semantic clustering of sampled answers: an edge joins two answers when an
// entailment judge scores both directions above tau, and the semantic classes
// are the connected components of that graph.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "inforeasoner/error.hpp"
#include "inforeasoner/text.hpp"

namespace inforeasoner {

enum class ContextTag { prior_B, posterior_C };

inline const char* to_string(ContextTag c) { return c == ContextTag::prior_B ? "B" : "C"; }

inline ContextTag context_from_string(const std::string& s) {
  if (s == "B") return ContextTag::prior_B;
  if (s == "C") return ContextTag::posterior_C;
  throw Error(ErrorKind::invalid_input, "context must be \"B\" or \"C\", got \"" + s + "\"");
}

/// One sampled answer with its sequence log-likelihood (nats).
struct AnswerSample {
  std::string text;
  std::optional<std::vector<double>> token_logprobs;
  std::optional<double> total_logprob;
  ContextTag context = ContextTag::prior_B;

  /// Sample whose total is the sum of its token log-probabilities.
  static AnswerSample from_tokens(std::string text, std::vector<double> tokens, ContextTag ctx) {
    double total = 0.0;
    for (double t : tokens) total += t;
    return AnswerSample{std::move(text), std::move(tokens), total, ctx};
  }

  void validate() const {
    if (total_logprob) {
      if (!std::isfinite(*total_logprob) || *total_logprob > 0.0) {
        throw Error(ErrorKind::invalid_input, "total_logprob must be finite and <= 0");
      }
      if (token_logprobs) {
        double s = 0.0;
        for (double t : *token_logprobs) s += t;
        if (std::abs(s - *total_logprob) > 1e-6) {
          throw Error(ErrorKind::invalid_input, "total_logprob disagrees with token_logprobs");
        }
      }
    }
  }

  friend bool operator==(const AnswerSample&, const AnswerSample&) = default;
};

enum class OracleKind { stub_exact, stub_normalized, stub_table, remote };

/// Scores P(premise entails hypothesis | question) in [0, 1].
class EntailmentOracle {
 public:
  virtual ~EntailmentOracle() = default;
  virtual double entail(const std::string& question, const std::string& premise, const std::string& hypothesis) = 0;
  virtual OracleKind kind() const noexcept = 0;
};

class ExactMatchOracle final : public EntailmentOracle {
 public:
  double entail(const std::string&, const std::string& p, const std::string& h) override { return p == h ? 1.0 : 0.0; }
  OracleKind kind() const noexcept override { return OracleKind::stub_exact; }
};

/// Equality after normalize_answer.
class NormalizedMatchOracle final : public EntailmentOracle {
 public:
  double entail(const std::string&, const std::string& p, const std::string& h) override {
    return normalize_answer(p) == normalize_answer(h) ? 1.0 : 0.0;
  }
  OracleKind kind() const noexcept override { return OracleKind::stub_normalized; }
};

/// Directional scores looked up by (premise, hypothesis); unlisted pairs
/// score 1 when the strings are equal and 0 otherwise.
class TableOracle final : public EntailmentOracle {
 public:
  TableOracle() = default;

  void set(const std::string& premise, const std::string& hypothesis, double p) { table_[{premise, hypothesis}] = p; }
  void set_both(const std::string& a, const std::string& b, double p) {
    set(a, b, p);
    set(b, a, p);
  }

  double entail(const std::string&, const std::string& p, const std::string& h) override {
    if (auto it = table_.find({p, h}); it != table_.end()) return it->second;
    return p == h ? 1.0 : 0.0;
  }
  OracleKind kind() const noexcept override { return OracleKind::stub_table; }

 private:
  std::map<std::pair<std::string, std::string>, double> table_;
};

/// Thread-safe memo of directional judgments keyed on (question, premise, hypothesis).
class JudgmentCache {
 public:
  using Key = std::tuple<std::string, std::string, std::string>;

  std::optional<double> find(const Key& key) const {
    std::shared_lock lock(mu_);
    if (auto it = map_.find(key); it != map_.end()) return it->second;
    return std::nullopt;
  }

  void insert(const Key& key, double value) {
    std::unique_lock lock(mu_);
    map_.emplace(key, value);
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return map_.size();
  }

 private:
  mutable std::shared_mutex mu_;
  std::map<Key, double> map_;
};

/// An oracle plus its judgment cache. Counts the calls that reach the oracle.
class EntailmentJudge {
 public:
  explicit EntailmentJudge(std::shared_ptr<EntailmentOracle> oracle) : oracle_(std::move(oracle)) {
    if (!oracle_) throw Error(ErrorKind::invalid_input, "null entailment oracle");
  }

  /// Directional score for trimmed strings; served from cache when possible.
  double score(const std::string& question, const std::string& premise, const std::string& hypothesis) {
    JudgmentCache::Key key{question, trim(premise), trim(hypothesis)};
    if (auto hit = cache_.find(key)) return *hit;
    double p = 0.0;
    try {
      ++calls_;
      p = oracle_->entail(std::get<0>(key), std::get<1>(key), std::get<2>(key));
    } catch (const Error& e) {
      if (!e.is_transport()) throw;
      throw Error(e.kind(), std::string(e.what()) + " [pair: \"" + std::get<1>(key) + "\" => \"" + std::get<2>(key) + "\"]");
    }
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::protocol, "entailment score outside [0,1]");
    cache_.insert(key, p);
    return p;
  }

  std::size_t oracle_calls() const noexcept { return calls_.load(); }
  const JudgmentCache& cache() const noexcept { return cache_; }
  OracleKind kind() const noexcept { return oracle_->kind(); }

 private:
  std::shared_ptr<EntailmentOracle> oracle_;
  JudgmentCache cache_;
  std::atomic<std::size_t> calls_{0};
};

inline void check_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::invalid_input, "tau must lie in (0,1)");
}

/// Bidirectional entailment: both directions must score strictly above tau.
inline bool judge_pair(EntailmentJudge& judge, const std::string& question, const std::string& a, const std::string& b,
                       double tau) {
  check_tau(tau);
  return judge.score(question, a, b) > tau && judge.score(question, b, a) > tau;
}

// ---------------------------------------------------------------------------

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> rank_;
};

/// Components of an undirected graph on n nodes, each sorted, ordered by
/// smallest member.
inline std::vector<std::vector<std::size_t>> connected_components(
    std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges) {
  UnionFind uf(n);
  for (auto [a, b] : edges) uf.unite(a, b);
  std::vector<std::vector<std::size_t>> classes;
  std::vector<std::size_t> slot(n, std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = uf.find(i);
    if (slot[root] == std::numeric_limits<std::size_t>::max()) {
      slot[root] = classes.size();
      classes.emplace_back();
    }
    classes[slot[root]].push_back(i);
  }
  return classes;
}

struct SemanticPartition {
  std::vector<std::vector<std::size_t>> classes;
  // log sum_{s in class} exp(total_logprob(s)); a sample without a logprob
  // contributes weight 1 (log 0).
  std::vector<double> class_logmass;
  double tau = 0.5;

  std::size_t size() const noexcept { return classes.size(); }

  /// Class index of each sample.
  std::vector<std::size_t> labels(std::size_t m) const {
    std::vector<std::size_t> out(m, std::numeric_limits<std::size_t>::max());
    for (std::size_t c = 0; c < classes.size(); ++c) {
      for (std::size_t i : classes[c]) out[i] = c;
    }
    return out;
  }

  /// Disjoint, covering, non-empty.
  bool is_partition_of(std::size_t m) const {
    std::vector<int> seen(m, 0);
    for (const auto& c : classes) {
      if (c.empty()) return false;
      for (std::size_t i : c) {
        if (i >= m || seen[i]++) return false;
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; });
  }
};

inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

struct PartitionOptions {
  // Threads used to issue directional judgments; results do not depend on it.
  std::size_t workers = 1;
};

inline SemanticPartition build_partition(std::span<const AnswerSample> samples, EntailmentJudge& judge,
                                         const std::string& question, double tau, PartitionOptions opts = {}) {
  check_tau(tau);
  if (samples.empty()) throw Error(ErrorKind::invalid_input, "cannot partition an empty sample list");
  const ContextTag ctx = samples.front().context;
  for (const auto& s : samples) {
    if (s.context != ctx) throw Error(ErrorKind::invalid_input, "samples mix prior and posterior contexts");
  }
  const std::size_t m = samples.size();

  // Judgments depend only on the text, so the graph is built over distinct
  // texts and then expanded to sample instances. This yields the same
  // components as judging every instance pair.
  std::vector<std::string> unique;
  std::vector<std::vector<std::size_t>> instances;
  {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < m; ++i) {
      auto [it, fresh] = index.try_emplace(trim(samples[i].text), unique.size());
      if (fresh) {
        unique.push_back(it->first);
        instances.emplace_back();
      }
      instances[it->second].push_back(i);
    }
  }
  const std::size_t u = unique.size();

  // Warm the cache concurrently when asked; the graph is assembled afterwards.
  if (opts.workers > 1 && m > 1) {
    std::vector<std::pair<std::size_t, std::size_t>> directed;
    for (std::size_t a = 0; a < u; ++a)
      for (std::size_t b = 0; b < u; ++b)
        if (a != b || instances[a].size() > 1) directed.emplace_back(a, b);
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> failures(opts.workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < opts.workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t k = next++; k < directed.size(); k = next++) {
              judge.score(question, unique[directed[k].first], unique[directed[k].second]);
            }
          } catch (...) {
            failures[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& f : failures)
      if (f) std::rethrow_exception(f);
  }

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t a = 0; a < u; ++a) {
    const auto& ia = instances[a];
    if (ia.size() > 1 && judge_pair(judge, question, unique[a], unique[a], tau)) {
      for (std::size_t k = 1; k < ia.size(); ++k) edges.emplace_back(ia[0], ia[k]);
    }
    for (std::size_t b = a + 1; b < u; ++b) {
      if (!judge_pair(judge, question, unique[a], unique[b], tau)) continue;
      const auto& ib = instances[b];
      for (std::size_t i : ia) edges.emplace_back(i, ib[0]);
      for (std::size_t j : ib) edges.emplace_back(ia[0], j);
    }
  }
  SemanticPartition part;
  part.tau = tau;
  part.classes = connected_components(m, edges);
  for (const auto& cls : part.classes) {
    std::vector<double> lp;
    lp.reserve(cls.size());
    for (std::size_t i : cls) lp.push_back(samples[i].total_logprob.value_or(0.0));
    part.class_logmass.push_back(log_sum_exp(lp));
  }
  return part;
}

struct GoldenMatch {
  std::optional<std::size_t> index;
  std::vector<std::size_t> candidates;  // every class that matched
  bool ambiguous() const noexcept { return candidates.size() > 1; }
};

/// Class containing an answer bidirectionally entailed with `golden`. When
/// several classes match, the one with the largest log-mass wins and the
/// result is flagged ambiguous.
inline GoldenMatch find_golden_class(const SemanticPartition& partition, std::span<const AnswerSample> samples,
                                     const std::string& golden, EntailmentJudge& judge, const std::string& question,
                                     double tau) {
  if (trim(golden).empty()) throw Error(ErrorKind::invalid_input, "golden answer is empty");
  GoldenMatch out;
  for (std::size_t c = 0; c < partition.classes.size(); ++c) {
    for (std::size_t i : partition.classes[c]) {
      if (judge_pair(judge, question, samples[i].text, golden, tau)) {
        out.candidates.push_back(c);
        break;
      }
    }
  }
  if (!out.candidates.empty()) {
    out.index = *std::max_element(out.candidates.begin(), out.candidates.end(), [&](std::size_t a, std::size_t b) {
      return partition.class_logmass[a] < partition.class_logmass[b];
    });
  }
  return out;
}

}  // namespace inforeasoner
