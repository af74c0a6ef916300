#pragma once

// Agentic search loop: parses <think>/<search>/<answer> tagged model output,
// queries a retrieval environment, feeds evidence back inside <information>
// tags, and records the trajectory for post-hoc scoring.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "inforeasoner/error.hpp"
#include "inforeasoner/random.hpp"
#include "inforeasoner/reward.hpp"
#include "inforeasoner/text.hpp"

namespace inforeasoner {

enum class ActionKind { search, answer, invalid };

inline const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::search: return "search";
    case ActionKind::answer: return "answer";
    case ActionKind::invalid: return "invalid";
  }
  return "invalid";
}

inline ActionKind action_kind_from_string(const std::string& s) {
  if (s == "search") return ActionKind::search;
  if (s == "answer") return ActionKind::answer;
  if (s == "invalid") return ActionKind::invalid;
  throw Error(ErrorKind::invalid_input, "unknown action kind: " + s);
}

/// search(query), answer(text), or invalid(raw output).
struct Action {
  ActionKind kind = ActionKind::invalid;
  std::string content;

  static Action search(std::string q) { return {ActionKind::search, std::move(q)}; }
  static Action answer(std::string a) { return {ActionKind::answer, std::move(a)}; }
  static Action invalid(std::string raw) { return {ActionKind::invalid, std::move(raw)}; }

  friend bool operator==(const Action&, const Action&) = default;
};

struct ParsedOutput {
  std::string think;
  Action action;
};

namespace detail {

struct TagSpan {
  std::size_t open = std::string::npos;  // position of '<' of the opening tag
  std::size_t end = std::string::npos;   // one past the closing tag
  std::string inner;
};

inline std::optional<TagSpan> find_complete_tag(std::string_view text, std::string_view tag, std::size_t from) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  const std::size_t o = text.find(open, from);
  if (o == std::string_view::npos) return std::nullopt;
  const std::size_t c = text.find(close, o + open.size());
  if (c == std::string_view::npos) return std::nullopt;
  return TagSpan{o, c + close.size(), std::string(text.substr(o + open.size(), c - o - open.size()))};
}

}  // namespace detail

/// First complete think block, then the first complete search or answer tag
/// after it. Never throws; malformed output is an invalid action.
inline ParsedOutput parse_action(std::string_view output) {
  ParsedOutput out;
  std::size_t from = 0;
  if (auto think = detail::find_complete_tag(output, "think", 0)) {
    out.think = trim(think->inner);
    from = think->end;
  }
  auto search = detail::find_complete_tag(output, "search", from);
  auto answer = detail::find_complete_tag(output, "answer", from);
  if (search && (!answer || search->open < answer->open)) {
    out.action = Action::search(trim(search->inner));
  } else if (answer) {
    out.action = Action::answer(trim(answer->inner));
  } else {
    out.action = Action::invalid(std::string(output));
  }
  return out;
}

inline std::string render_action(const Action& a, const std::string& think = {}) {
  std::string out;
  if (!think.empty()) out += "<think> " + think + " </think>\n";
  switch (a.kind) {
    case ActionKind::search: out += "<search> " + a.content + " </search>"; break;
    case ActionKind::answer: out += "<answer> " + a.content + " </answer>"; break;
    case ActionKind::invalid: out += a.content; break;
  }
  return out;
}

inline int exact_match(std::string_view predicted, std::string_view golden) {
  return normalize_answer(predicted) == normalize_answer(golden) ? 1 : 0;
}

// ---------------------------------------------------------------------------

struct Document {
  std::string title;
  std::string text;
  friend bool operator==(const Document&, const Document&) = default;
};

class RetrievalEnvironment {
 public:
  virtual ~RetrievalEnvironment() = default;
  virtual std::vector<Document> search(const std::string& query, std::size_t top_k) = 0;
};

/// Returns, in insertion order, every document whose key occurs in the query
/// (case-insensitive).
class StubEnvironment final : public RetrievalEnvironment {
 public:
  void add(std::string key, Document doc) { entries_.emplace_back(lower(key), std::move(doc)); }

  std::vector<Document> search(const std::string& query, std::size_t top_k) override {
    const std::string q = lower(query);
    std::vector<Document> out;
    for (const auto& [key, doc] : entries_) {
      if (out.size() >= top_k) break;
      if (q.find(key) != std::string::npos) out.push_back(doc);
    }
    return out;
  }

 private:
  static std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  }
  std::vector<std::pair<std::string, Document>> entries_;
};

/// Produces the next model output given the full context so far. `call` is the
/// 0-based index of this call within the rollout.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string next(const std::string& context, std::size_t call, std::uint64_t seed) = 0;
};

/// Replays fixed outputs; past the end of the script it emits an empty string.
class ScriptedPolicy final : public Policy {
 public:
  explicit ScriptedPolicy(std::vector<std::string> script) : script_(std::move(script)) {}
  std::string next(const std::string&, std::size_t call, std::uint64_t) override {
    return call < script_.size() ? script_[call] : std::string{};
  }

 private:
  std::vector<std::string> script_;
};

struct RolloutConfig {
  std::size_t max_turns = 2;
  std::size_t top_k = 3;
  std::size_t max_observation_chars = 2000;
  std::size_t group_size = 3;
  std::size_t max_invalid_retries = 2;

  void validate() const {
    if (max_turns == 0 || top_k == 0 || max_observation_chars == 0 || group_size == 0) {
      throw Error(ErrorKind::invalid_input, "rollout counts must be >= 1");
    }
  }
};

struct TrajectoryStep {
  std::size_t turn = 0;
  std::string output;  // verbatim model output
  std::string think;
  Action action;
  std::vector<std::string> evidence;
  bool evidence_truncated = false;
  std::optional<double> ig;

  friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct Trajectory {
  std::string question;
  std::vector<TrajectoryStep> steps;
  std::optional<std::string> predicted;
  int em = 0;
  std::vector<double> step_igs;
  double composite = 0.0;
  bool truncated_by_max_turns = false;

  std::size_t search_steps() const {
    return static_cast<std::size_t>(std::count_if(steps.begin(), steps.end(), [](const TrajectoryStep& s) {
      return s.action.kind == ActionKind::search;
    }));
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Environment failure during a rollout; carries the steps recorded so far.
class RolloutError : public Error {
 public:
  RolloutError(const Error& cause, Trajectory partial)
      : Error(ErrorKind::env_unavailable, cause.what()), partial_(std::move(partial)) {}
  const Trajectory& partial() const noexcept { return partial_; }

 private:
  Trajectory partial_;
};

inline std::string system_prompt(const std::string& question) {
  return "Answer the given question. You must conduct reasoning inside <think> and </think> first every time you get "
         "new information. After reasoning, if you find you lack some knowledge, you can call a search engine by "
         "<search> query </search>, and it will return the top searched results between <information> and "
         "</information>. You can search as many times as you want. If you find no further external knowledge "
         "needed, you can directly provide the answer inside <answer> and </answer> without detailed illustrations. "
         "For example, <answer> xxx </answer>. Question: " +
         question + ".\n";
}

inline constexpr std::string_view kInvalidActionPrompt =
    "\nMy previous action is invalid. If I want to search, I should put the query between <search> and </search>. "
    "If I want to give the final answer, I should put the answer between <answer> and </answer>. Let me try again.\n";

/// One string per document, "Doc i (Title: ...) text", cut so the total length
/// stays within `budget` characters.
inline std::vector<std::string> render_evidence(const std::vector<Document>& docs, std::size_t budget,
                                                bool* truncated) {
  std::vector<std::string> out;
  std::size_t used = 0;
  *truncated = false;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    std::string s = "Doc " + std::to_string(i + 1) + " (Title: \"" + docs[i].title + "\") " + docs[i].text;
    if (used + s.size() > budget) {
      s.resize(budget - used);
      *truncated = true;
      if (!s.empty()) out.push_back(std::move(s));
      break;
    }
    used += s.size();
    out.push_back(std::move(s));
  }
  return out;
}

inline std::string join_evidence(const std::vector<std::string>& evidence) {
  std::string s;
  for (std::size_t i = 0; i < evidence.size(); ++i) {
    if (i) s += "\n";
    s += evidence[i];
  }
  return s;
}

inline std::string information_block(const std::vector<std::string>& evidence) {
  return "\n<information>" + join_evidence(evidence) + "</information>\n";
}

/// Runs at most cfg.max_turns action turns. The answer turn counts as a turn.
inline Trajectory run_rollout(Policy& policy, RetrievalEnvironment& env, const std::string& question,
                              const RolloutConfig& cfg, std::uint64_t seed = 0,
                              const std::optional<std::string>& golden = std::nullopt) {
  cfg.validate();
  if (trim(question).empty()) throw Error(ErrorKind::invalid_input, "question is empty");
  Trajectory traj;
  traj.question = question;
  std::string context = system_prompt(question);
  std::size_t call = 0;
  bool done = false;
  for (std::size_t turn = 1; turn <= cfg.max_turns && !done; ++turn) {
    for (std::size_t attempt = 0;; ++attempt) {
      std::string output = policy.next(context, call, sub_seed(seed, call));
      ++call;
      context += output;
      ParsedOutput parsed = parse_action(output);
      TrajectoryStep step{turn, std::move(output), std::move(parsed.think), std::move(parsed.action), {}, false, {}};

      if (step.action.kind == ActionKind::invalid) {
        traj.steps.push_back(std::move(step));
        if (attempt < cfg.max_invalid_retries) {
          context += kInvalidActionPrompt;
          continue;
        }
        done = true;
        break;
      }
      if (step.action.kind == ActionKind::answer) {
        traj.predicted = step.action.content;
        traj.steps.push_back(std::move(step));
        done = true;
        break;
      }
      std::vector<Document> docs;
      try {
        docs = env.search(step.action.content, cfg.top_k);
      } catch (const Error& e) {
        traj.steps.push_back(std::move(step));
        throw RolloutError(e, std::move(traj));
      }
      step.evidence = render_evidence(docs, cfg.max_observation_chars, &step.evidence_truncated);
      context += information_block(step.evidence);
      traj.steps.push_back(std::move(step));
      break;
    }
  }
  traj.truncated_by_max_turns = !traj.predicted.has_value();
  if (golden && traj.predicted) traj.em = exact_match(*traj.predicted, *golden);
  return traj;
}

/// G independent rollouts with per-index sub-seeds, ordered by index.
inline std::vector<Trajectory> run_group(Policy& policy, RetrievalEnvironment& env, const std::string& question,
                                         const RolloutConfig& cfg, std::uint64_t seed,
                                         const std::optional<std::string>& golden = std::nullopt) {
  std::vector<Trajectory> group;
  group.reserve(cfg.group_size);
  for (std::size_t i = 0; i < cfg.group_size; ++i) {
    group.push_back(run_rollout(policy, env, question, cfg, sub_seed(seed, i), golden));
  }
  return group;
}

// ---------------------------------------------------------------------------

/// (question, evidence, golden, seed) -> IG for one retrieval step.
using StepIgEstimator = std::function<IGResult(const std::string&, const std::string&, const std::string&, std::uint64_t)>;

inline StepIgEstimator make_step_estimator(GenerationOracle& sampler, EntailmentJudge& judge, IGConfig cfg) {
  return [&sampler, &judge, cfg](const std::string& q, const std::string& ev, const std::string& golden,
                                 std::uint64_t seed) { return estimate_step_ig(q, ev, golden, sampler, judge, cfg, seed); };
}

struct ScoreOutcome {
  std::vector<std::string> warnings;
};

/// Fills em, per-step IG, and the composite reward. Re-scoring overwrites.
/// A step whose estimator fails keeps no IG and is left out of the mean.
inline ScoreOutcome score_trajectory(Trajectory& traj, const std::string& golden, const StepIgEstimator& estimator,
                                     const IGConfig& cfg, std::uint64_t seed = 0) {
  ScoreOutcome out;
  traj.em = traj.predicted ? exact_match(*traj.predicted, golden) : 0;
  traj.step_igs.clear();
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    auto& step = traj.steps[i];
    step.ig.reset();
    if (step.action.kind != ActionKind::search) continue;
    try {
      const IGResult r = estimator(traj.question, join_evidence(step.evidence), golden, sub_seed(seed, i));
      step.ig = r.ig_value;
      traj.step_igs.push_back(r.ig_value);
      for (const auto& w : r.warnings) out.warnings.push_back("step " + std::to_string(i) + ": " + w);
    } catch (const Error& e) {
      out.warnings.push_back("step " + std::to_string(i) + ": IG unavailable (" + e.what() + ")");
    }
  }
  traj.composite = composite_reward(traj.em, traj.step_igs, cfg.lambda);
  return out;
}

}  // namespace inforeasoner
