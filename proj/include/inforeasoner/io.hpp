#pragma once

// File formats: samples.jsonl, trajectory.jsonl, rewards.jsonl, partition
// JSON, the CSV tables, and the run manifest. JSON goes through nlohmann;
// doubles are written shortest-round-trip so parse(render(x)) == x.

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "inforeasoner/cluster.hpp"
#include "inforeasoner/experiments.hpp"
#include "inforeasoner/reward.hpp"
#include "inforeasoner/rollout.hpp"
#include "inforeasoner/toy.hpp"

namespace inforeasoner {

using json = nlohmann::json;

namespace detail {

inline std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) out.push_back(line);
  }
  return out;
}

inline json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::invalid_input, where + ": " + e.what());
  }
}

template <class T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw Error(ErrorKind::invalid_input, where + ": missing field \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::invalid_input, where + ": field \"" + key + "\": " + e.what());
  }
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorKind::invalid_input, "cannot open " + p.string());
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::invalid_input, "cannot write " + p.string());
  return out;
}

inline std::string fmt_num(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// samples.jsonl

inline json to_json(const AnswerSample& s) {
  json j{{"context", to_string(s.context)}, {"text", s.text}};
  if (s.total_logprob) j["logprob"] = *s.total_logprob;
  if (s.token_logprobs) j["token_logprobs"] = *s.token_logprobs;
  return j;
}

inline AnswerSample sample_from_json(const json& j, const std::string& where = "sample") {
  AnswerSample s;
  s.context = context_from_string(detail::field<std::string>(j, "context", where));
  s.text = detail::field<std::string>(j, "text", where);
  if (j.contains("logprob") && !j["logprob"].is_null()) s.total_logprob = detail::field<double>(j, "logprob", where);
  if (j.contains("token_logprobs") && !j["token_logprobs"].is_null()) {
    s.token_logprobs = detail::field<std::vector<double>>(j, "token_logprobs", where);
    if (!s.total_logprob) {
      double t = 0.0;
      for (double v : *s.token_logprobs) t += v;
      s.total_logprob = t;
    }
  }
  s.validate();
  return s;
}

inline std::vector<AnswerSample> read_samples(std::istream& in) {
  std::vector<AnswerSample> out;
  std::size_t n = 0;
  for (const auto& line : detail::read_lines(in)) {
    const std::string where = "samples line " + std::to_string(++n);
    out.push_back(sample_from_json(detail::parse_json(line, where), where));
  }
  return out;
}

inline std::vector<AnswerSample> read_samples(const std::filesystem::path& p) {
  auto in = detail::open_in(p);
  return read_samples(in);
}

inline void write_samples(std::ostream& out, std::span<const AnswerSample> samples) {
  for (const auto& s : samples) out << to_json(s).dump() << '\n';
}

// ---------------------------------------------------------------------------
// trajectory.jsonl

inline json to_json(const Trajectory& t) {
  json steps = json::array();
  for (const auto& s : t.steps) {
    json js{{"turn", s.turn},
            {"output", s.output},
            {"think", s.think},
            {"action", {{"kind", to_string(s.action.kind)}, {"content", s.action.content}}},
            {"evidence", s.evidence},
            {"evidence_truncated", s.evidence_truncated},
            {"ig", nullptr}};
    if (s.ig) js["ig"] = *s.ig;
    steps.push_back(std::move(js));
  }
  json j{{"question", t.question},
         {"steps", std::move(steps)},
         {"predicted", nullptr},
         {"em", t.em},
         {"step_igs", t.step_igs},
         {"composite", t.composite},
         {"truncated_by_max_turns", t.truncated_by_max_turns}};
  if (t.predicted) j["predicted"] = *t.predicted;
  return j;
}

inline Trajectory trajectory_from_json(const json& j, const std::string& where = "trajectory") {
  Trajectory t;
  t.question = detail::field<std::string>(j, "question", where);
  for (const auto& js : detail::field<json>(j, "steps", where)) {
    TrajectoryStep s;
    s.turn = detail::field<std::size_t>(js, "turn", where);
    s.output = detail::field<std::string>(js, "output", where);
    s.think = detail::field<std::string>(js, "think", where);
    const auto ja = detail::field<json>(js, "action", where);
    s.action.kind = action_kind_from_string(detail::field<std::string>(ja, "kind", where));
    s.action.content = detail::field<std::string>(ja, "content", where);
    s.evidence = detail::field<std::vector<std::string>>(js, "evidence", where);
    s.evidence_truncated = detail::field<bool>(js, "evidence_truncated", where);
    if (js.contains("ig") && !js["ig"].is_null()) s.ig = detail::field<double>(js, "ig", where);
    t.steps.push_back(std::move(s));
  }
  if (j.contains("predicted") && !j["predicted"].is_null()) t.predicted = detail::field<std::string>(j, "predicted", where);
  t.em = detail::field<int>(j, "em", where);
  t.step_igs = detail::field<std::vector<double>>(j, "step_igs", where);
  t.composite = detail::field<double>(j, "composite", where);
  t.truncated_by_max_turns = detail::field<bool>(j, "truncated_by_max_turns", where);
  return t;
}

inline std::vector<Trajectory> read_trajectories(std::istream& in) {
  std::vector<Trajectory> out;
  std::size_t n = 0;
  for (const auto& line : detail::read_lines(in)) {
    const std::string where = "trajectory line " + std::to_string(++n);
    out.push_back(trajectory_from_json(detail::parse_json(line, where), where));
  }
  return out;
}

// ---------------------------------------------------------------------------
// rewards.jsonl, partitions

inline json to_json(const IGResult& r) {
  json j{{"ig_value", r.ig_value},
         {"variant", to_string(r.variant)},
         {"entropy_prior", r.entropy_prior},
         {"entropy_post", r.entropy_post},
         {"p_golden_prior", nullptr},
         {"p_golden_post", nullptr},
         {"golden_missing_prior", r.golden_missing_prior},
         {"golden_missing_post", r.golden_missing_post},
         {"warnings", r.warnings}};
  if (r.p_golden_prior) j["p_golden_prior"] = *r.p_golden_prior;
  if (r.p_golden_post) j["p_golden_post"] = *r.p_golden_post;
  return j;
}

inline IGResult ig_result_from_json(const json& j) {
  const std::string where = "reward record";
  IGResult r;
  r.ig_value = detail::field<double>(j, "ig_value", where);
  r.variant = variant_from_string(detail::field<std::string>(j, "variant", where));
  r.entropy_prior = detail::field<double>(j, "entropy_prior", where);
  r.entropy_post = detail::field<double>(j, "entropy_post", where);
  if (!j.value("p_golden_prior", json()).is_null()) r.p_golden_prior = j["p_golden_prior"].get<double>();
  if (!j.value("p_golden_post", json()).is_null()) r.p_golden_post = j["p_golden_post"].get<double>();
  r.golden_missing_prior = detail::field<bool>(j, "golden_missing_prior", where);
  r.golden_missing_post = detail::field<bool>(j, "golden_missing_post", where);
  r.warnings = j.value("warnings", std::vector<std::string>{});
  return r;
}

inline json to_json(const SemanticPartition& p, std::span<const AnswerSample> samples) {
  json classes = json::array();
  for (std::size_t c = 0; c < p.classes.size(); ++c) {
    json texts = json::array();
    for (std::size_t i : p.classes[c]) texts.push_back(samples[i].text);
    classes.push_back({{"members", p.classes[c]}, {"texts", std::move(texts)}, {"log_mass", p.class_logmass[c]}});
  }
  return json{{"tau", p.tau}, {"num_samples", samples.size()}, {"classes", std::move(classes)}};
}

inline json to_json(const ClassDistribution& d) {
  json j{{"context", to_string(d.context)}, {"probs", d.probs}, {"golden_index", nullptr}};
  if (d.golden_index) j["golden_index"] = *d.golden_index;
  return j;
}

// ---------------------------------------------------------------------------
// CSV tables

inline void write_training_csv(std::ostream& out, const TrainingLog& log) {
  out << "step,em,ig,composite,entropy,episode_len\n";
  for (const auto& r : log.records) {
    out << r.step << ',' << detail::fmt_num(r.em) << ',' << detail::fmt_num(r.ig) << ','
        << detail::fmt_num(r.composite) << ',' << detail::fmt_num(r.entropy) << ','
        << detail::fmt_num(r.episode_len) << '\n';
  }
}

inline void write_sensitivity_csv(std::ostream& out, const SensitivityReport& rep, std::uint64_t seed) {
  out << "seed,M,mae,ci_low,ci_high,mae_vs_oracle,oracle_N,bootstrap_reps\n";
  for (const auto& r : rep.rows) {
    out << seed << ',' << r.m << ',' << detail::fmt_num(r.mae) << ',' << detail::fmt_num(r.ci_low) << ','
        << detail::fmt_num(r.ci_high) << ',' << detail::fmt_num(r.mae_vs_oracle) << ',' << rep.oracle_n << ','
        << rep.bootstrap_reps << '\n';
  }
}

/// Minimal CSV reader for the files this library writes (no quoting).
inline std::vector<std::vector<std::string>> read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& line : detail::read_lines(in)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(std::string(trim(cell)));
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline json to_json(const BoxSummary& b) { return json{{"q1", b.q1}, {"median", b.median}, {"q3", b.q3}}; }

inline json to_json(const CombinationReport& r) {
  return json{{"a_only", {{"summary", to_json(r.summary_a())}, {"values", r.a_only}}},
              {"b_only", {{"summary", to_json(r.summary_b())}, {"values", r.b_only}}},
              {"sum", {{"summary", to_json(r.summary_sum())}, {"values", r.sum}}},
              {"combined", {{"summary", to_json(r.summary_combined())}, {"values", r.combined}}}};
}

// ---------------------------------------------------------------------------
// Run manifest

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::invalid_input, "sha256 failed");
  }
  std::string out;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    out += buf;
  }
  return out;
}

inline std::string sha256_file(const std::filesystem::path& p) {
  auto in = detail::open_in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

struct ArtifactEntry {
  std::string path;  // relative to the output directory
  std::string sha256;
};

struct RunManifest {
  std::string run_id;
  std::string timestamp;  // UTC, ISO 8601
  std::string command;
  json config;
  std::uint64_t seed = 0;
  std::vector<ArtifactEntry> artifacts;

  json to_json() const {
    json arts = json::array();
    for (const auto& a : artifacts) arts.push_back({{"path", a.path}, {"sha256", a.sha256}});
    return json{{"run_id", run_id}, {"timestamp", timestamp}, {"command", command},
                {"config", config},  {"seed", seed},           {"artifacts", std::move(arts)}};
  }

  static RunManifest from_json(const json& j) {
    RunManifest m;
    const std::string where = "manifest";
    m.run_id = detail::field<std::string>(j, "run_id", where);
    m.timestamp = detail::field<std::string>(j, "timestamp", where);
    m.command = detail::field<std::string>(j, "command", where);
    m.config = detail::field<json>(j, "config", where);
    m.seed = detail::field<std::uint64_t>(j, "seed", where);
    for (const auto& a : detail::field<json>(j, "artifacts", where)) {
      m.artifacts.push_back({detail::field<std::string>(a, "path", where), detail::field<std::string>(a, "sha256", where)});
    }
    return m;
  }
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Collects output files for one CLI run and writes manifest.json last.
class RunRecorder {
 public:
  RunRecorder(std::filesystem::path dir, std::string command, json config, std::uint64_t seed)
      : dir_(std::move(dir)) {
    manifest_.command = std::move(command);
    manifest_.config = std::move(config);
    manifest_.seed = seed;
    manifest_.timestamp = utc_timestamp();
    const auto ticks = static_cast<std::uint64_t>(std::chrono::system_clock::now().time_since_epoch().count());
    std::ostringstream id;
    id << manifest_.command << '-' << std::hex << std::setw(16) << std::setfill('0') << mix_seed(ticks ^ seed);
    manifest_.run_id = id.str();
    std::filesystem::create_directories(dir_);
  }

  const std::filesystem::path& dir() const noexcept { return dir_; }

  /// Writes `content` to dir/name and records its digest.
  void write(const std::string& name, const std::string& content) {
    auto out = detail::open_out(dir_ / name);
    out << content;
    out.close();
    manifest_.artifacts.push_back({name, sha256_hex(content)});
  }

  const RunManifest& manifest() const noexcept { return manifest_; }

  std::filesystem::path finish() {
    const auto path = dir_ / "manifest.json";
    auto out = detail::open_out(path);
    out << manifest_.to_json().dump(2) << '\n';
    return path;
  }

 private:
  std::filesystem::path dir_;
  RunManifest manifest_;
};

}  // namespace inforeasoner
