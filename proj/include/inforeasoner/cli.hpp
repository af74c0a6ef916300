#pragma once

// Command-line front end. run_cli() is the whole program minus main(), so
// tests can drive it with argument vectors and capture its streams.
//
// Exit codes: 0 success, 1 validation/usage error (or a failed check),
// 2 oracle or transport error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "inforeasoner/inforeasoner.hpp"

namespace inforeasoner {

namespace cli_detail {

struct EndpointFlags {
  int timeout_ms = 30000;
  int retries = 2;
  std::string auth_env;
  std::string nli_layout = "context_prepended";

  void add(CLI::App* app) {
    app->add_option("--timeout-ms", timeout_ms, "HTTP timeout per request");
    app->add_option("--retries", retries, "HTTP retries on transport errors and 5xx");
    app->add_option("--auth-env", auth_env, "environment variable holding a bearer token");
    app->add_option("--nli-layout", nli_layout, "context_prepended | separate_field");
  }

  OracleEndpointConfig endpoint(const std::string& url) const {
    OracleEndpointConfig ep;
    ep.base_url = url;
    ep.timeout_ms = timeout_ms;
    ep.max_retries = retries;
    ep.auth_env_var = auth_env;
    ep.nli_layout = nli_layout_from_string(nli_layout);
    ep.validate();
    return ep;
  }

  json to_json() const {
    return {{"timeout_ms", timeout_ms}, {"retries", retries}, {"auth_env", auth_env}, {"nli_layout", nli_layout}};
  }
};

/// "stub:exact", "stub:normalized", or an http:// URL of an entailment server.
inline std::shared_ptr<EntailmentOracle> make_entailment_oracle(const std::string& which, const EndpointFlags& ep) {
  if (which == "stub:exact") return std::make_shared<ExactMatchOracle>();
  if (which == "stub:normalized") return std::make_shared<NormalizedMatchOracle>();
  if (which.rfind("http://", 0) == 0) return std::make_shared<RemoteEntailmentOracle>(ep.endpoint(which));
  throw Error(ErrorKind::invalid_input, "unknown oracle \"" + which + "\" (stub:exact, stub:normalized, or http://...)");
}

struct IgFlags {
  IGConfig cfg;
  std::string variant = "golden_logratio";
  std::string mass_mode = "raw_likelihood";

  void add(CLI::App* app) {
    app->add_option("--tau", cfg.tau, "bidirectional entailment threshold");
    app->add_option("--lambda", cfg.lambda, "IG coefficient in the composite reward");
    app->add_option("--variant", variant, "golden_logratio | entropy_diff");
    app->add_option("--mass-mode", mass_mode, "raw_likelihood | length_normalized | frequency");
    app->add_option("--samples-per-context,-M", cfg.samples_per_context, "answers sampled per context");
    app->add_option("--prob-floor", cfg.prob_floor, "floor for a missing golden class");
    app->add_option("--temperature", cfg.temperature, "sampling temperature");
  }

  IGConfig resolve() {
    cfg.variant = variant_from_string(variant);
    cfg.mass_mode = mass_mode_from_string(mass_mode);
    cfg.validate();
    return cfg;
  }

  json to_json() const {
    return {{"tau", cfg.tau},
            {"lambda", cfg.lambda},
            {"variant", variant},
            {"mass_mode", mass_mode},
            {"samples_per_context", cfg.samples_per_context},
            {"prob_floor", cfg.prob_floor},
            {"temperature", cfg.temperature}};
  }
};

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::invalid_input, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<AnswerSample> only_context(const std::vector<AnswerSample>& all, ContextTag ctx) {
  std::vector<AnswerSample> out;
  for (const auto& s : all)
    if (s.context == ctx) out.push_back(s);
  return out;
}

}  // namespace cli_detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"information-gain rewards for retrieval agents"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string out_dir = "runs";
  app.add_option("--out", out_dir, "directory for artifacts and manifest.json");

  EndpointFlags ep;
  IgFlags igf;
  std::uint64_t seed = 0;

  // cluster
  auto* cluster = app.add_subcommand("cluster", "partition answer samples into semantic classes");
  std::string samples_path, oracle = "stub:normalized", question, context = "all";
  double tau = 0.5;
  std::size_t workers = 1;
  cluster->add_option("--samples", samples_path, "samples.jsonl")->required();
  cluster->add_option("--oracle", oracle, "stub:exact | stub:normalized | http://host:port");
  cluster->add_option("--tau", tau, "bidirectional entailment threshold");
  cluster->add_option("--question", question, "question passed to the entailment judge");
  cluster->add_option("--context", context, "B | C | all");
  cluster->add_option("--workers", workers, "parallel judge calls");
  ep.add(cluster);

  // ig
  auto* ig = app.add_subcommand("ig", "information gain of one retrieval step");
  std::string golden, evidence, evidence_file, gen_url;
  ig->add_option("--samples", samples_path, "samples.jsonl holding both contexts");
  ig->add_option("--question", question, "question")->required();
  ig->add_option("--golden", golden, "ground-truth answer");
  ig->add_option("--oracle", oracle, "entailment oracle");
  ig->add_option("--evidence", evidence, "evidence text (with --generator)");
  ig->add_option("--evidence-file", evidence_file, "evidence file (with --generator)");
  ig->add_option("--generator", gen_url, "http://host:port of a generation server");
  ig->add_option("--seed", seed, "seed (required with --generator)");
  igf.add(ig);
  ep.add(ig);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "belief-state property suites");
  std::string suite = "props";
  std::size_t trials = 1000;
  simulate->add_option("suite", suite, "props | axioms")->check(CLI::IsMember({"props", "axioms"}));
  simulate->add_option("--trials", trials, "random instances");
  simulate->add_option("--seed", seed, "seed")->required();

  // rollout
  auto* rollout = app.add_subcommand("rollout", "run a scripted rollout against a document store or search server");
  std::string script_path, docs_path, search_url;
  RolloutConfig rcfg;
  rollout->add_option("--script", script_path, "JSON array of policy outputs")->required();
  rollout->add_option("--docs", docs_path, "jsonl of {key, title, text} for the stub search engine");
  rollout->add_option("--search", search_url, "http://host:port of a search server");
  rollout->add_option("--question", question, "question")->required();
  rollout->add_option("--golden", golden, "ground-truth answer");
  rollout->add_option("--max-turns", rcfg.max_turns, "action turns including the answer turn");
  rollout->add_option("--top-k", rcfg.top_k, "documents per search");
  rollout->add_option("--max-observation-chars", rcfg.max_observation_chars, "evidence budget per search");
  rollout->add_option("--seed", seed, "seed")->required();
  ep.add(rollout);

  // grpo-toy
  auto* grpo = app.add_subcommand("grpo-toy", "GRPO on the synthetic retrieval bandit");
  double lambda = 0.6;
  std::size_t seeds = 5;
  GRPOConfig gcfg;
  grpo->add_option("--lambda", lambda, "IG coefficient");
  grpo->add_option("--seeds", seeds, "independent training runs");
  grpo->add_option("--steps", gcfg.steps, "updates per run");
  grpo->add_option("--group-size", gcfg.group_size, "episodes per group");
  grpo->add_option("--lr", gcfg.learning_rate, "learning rate");
  grpo->add_option("--clip-eps", gcfg.clip_eps, "ratio clip");
  grpo->add_option("--kl-coef", gcfg.kl_coef, "KL penalty");
  grpo->add_option("--seed", seed, "base seed")->required();

  // sensitivity
  auto* sens = app.add_subcommand("sensitivity", "IG estimation error against group size M");
  std::size_t oracle_n = 64, reps = 200;
  std::vector<std::size_t> m_grid = default_m_grid();
  sens->add_option("--oracle-n", oracle_n, "oracle pool size per context");
  sens->add_option("--reps", reps, "bootstrap replicates per M");
  sens->add_option("--m-grid", m_grid, "group sizes")->delimiter(',');
  sens->add_option("--seeds", seeds, "independent seeds starting at --seed");
  sens->add_option("--seed", seed, "base seed")->required();

  // combine
  auto* combine = app.add_subcommand("combine", "IG of two documents alone and together");
  std::string doc_a_path, doc_b_path;
  std::size_t combine_reps = 50;
  combine->add_option("--reps", combine_reps, "seeded repetitions");
  combine->add_option("--doc-a", doc_a_path, "first document (with --generator)");
  combine->add_option("--doc-b", doc_b_path, "second document (with --generator)");
  combine->add_option("--question", question, "question (with --generator)");
  combine->add_option("--golden", golden, "golden answer (with --generator)");
  combine->add_option("--generator", gen_url, "http://host:port; omitted means the built-in two-hop stub");
  combine->add_option("--oracle", oracle, "entailment oracle");
  combine->add_option("--seed", seed, "seed")->required();
  igf.add(combine);
  ep.add(combine);

  // report
  auto* report = app.add_subcommand("report", "summarize artifacts in a run directory");
  std::string report_dir;
  report->add_option("dir", report_dir, "run directory")->required();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "cluster") {
      const auto all = read_samples(std::filesystem::path(samples_path));
      EntailmentJudge judge(make_entailment_oracle(oracle, ep));
      auto partition_json = [&](ContextTag ctx) -> json {
        const auto picked = only_context(all, ctx);
        if (picked.empty()) return nullptr;
        return to_json(build_partition(picked, judge, question, tau, PartitionOptions{workers}), picked);
      };
      json j;
      if (context == "all") {
        // One partition per context; a context absent from the file is null.
        j = {{"B", partition_json(ContextTag::prior_B)}, {"C", partition_json(ContextTag::posterior_C)}};
        if (j["B"].is_null() && j["C"].is_null()) throw Error(ErrorKind::invalid_input, "no samples to cluster");
      } else {
        j = partition_json(context_from_string(context));
        if (j.is_null()) throw Error(ErrorKind::invalid_input, "no " + context + " samples to cluster");
      }
      j["oracle_calls"] = judge.oracle_calls();
      const std::string text = j.dump(2);
      out << text << '\n';
      RunRecorder rec(out_dir, command,
                      {{"samples", samples_path}, {"oracle", oracle}, {"tau", tau}, {"question", question},
                       {"context", context}, {"endpoint", ep.to_json()}},
                      0);
      rec.write("partition.json", text + "\n");
      rec.finish();
      return 0;
    }

    if (command == "ig") {
      const IGConfig cfg = igf.resolve();
      EntailmentJudge judge(make_entailment_oracle(oracle, ep));
      IGResult r;
      if (!samples_path.empty()) {
        const auto all = read_samples(std::filesystem::path(samples_path));
        auto b = only_context(all, ContextTag::prior_B);
        auto c = only_context(all, ContextTag::posterior_C);
        if (b.empty() || c.empty()) throw Error(ErrorKind::invalid_input, "samples need both B and C contexts");
        r = ig_from_samples(std::move(b), std::move(c), question, golden, judge, cfg);
      } else {
        if (gen_url.empty()) throw Error(ErrorKind::invalid_input, "give --samples or --generator");
        if (!ig->count("--seed")) throw Error(ErrorKind::invalid_input, "--seed is required with --generator");
        const std::string ev = evidence_file.empty() ? evidence : read_text(evidence_file);
        RemoteGenerationOracle gen(ep.endpoint(gen_url), cfg.mass_mode != MassMode::frequency);
        r = estimate_step_ig(question, ev, golden, gen, judge, cfg, seed);
      }
      const std::string line = to_json(r).dump();
      out << line << '\n';
      for (const auto& w : r.warnings) err << "warning: " << w << '\n';
      json conf = igf.to_json();
      conf.update({{"samples", samples_path}, {"question", question}, {"golden", golden}, {"oracle", oracle},
                   {"generator", gen_url}, {"evidence", evidence}, {"evidence_file", evidence_file},
                   {"endpoint", ep.to_json()}});
      RunRecorder rec(out_dir, command, conf, seed);
      rec.write("rewards.jsonl", line + "\n");
      rec.finish();
      return 0;
    }

    if (command == "simulate") {
      json j;
      bool ok = false;
      if (suite == "props") {
        const auto p = check_propositions(trials, seed);
        j = {{"suite", "props"},
             {"instances", p.instances},
             {"min_eig", p.min_eig},
             {"max_uninformative_eig", p.max_uninformative_eig},
             {"max_telescoping_error", p.max_telescoping_error},
             {"max_blackwell_violation", p.max_blackwell_violation},
             {"failures", p.failures}};
        ok = p.passed();
      }
      // The axiom suite runs in both modes; props reports it alongside.
      const auto a = check_axioms(UncertaintyFunctional{}, trials, sub_seed(seed, 1));
      j["axioms"] = {{"trials", a.trials},
                     {"minimality_violation", a.minimality_violation},
                     {"concavity_violation", a.concavity_violation},
                     {"monotonicity_violation", a.monotonicity_violation},
                     {"passed", a.passed()}};
      if (suite == "axioms") {
        j["suite"] = "axioms";
        ok = a.passed();
      } else {
        ok = ok && a.passed();
      }
      j["passed"] = ok;
      const std::string text = j.dump(2);
      out << text << '\n';
      RunRecorder rec(out_dir, command, {{"suite", suite}, {"trials", trials}}, seed);
      rec.write("simulate.json", text + "\n");
      rec.finish();
      return ok ? 0 : 1;
    }

    if (command == "rollout") {
      const auto script = detail::parse_json(read_text(script_path), script_path);
      if (!script.is_array()) throw Error(ErrorKind::invalid_input, "script must be a JSON array of strings");
      ScriptedPolicy policy(script.get<std::vector<std::string>>());
      std::unique_ptr<RetrievalEnvironment> env;
      if (!search_url.empty()) {
        env = std::make_unique<RemoteSearchEnvironment>(ep.endpoint(search_url));
      } else {
        auto stub = std::make_unique<StubEnvironment>();
        if (!docs_path.empty()) {
          std::ifstream in(docs_path);
          if (!in) throw Error(ErrorKind::invalid_input, "cannot open " + docs_path);
          std::size_t n = 0;
          for (const auto& line : detail::read_lines(in)) {
            const std::string where = docs_path + " line " + std::to_string(++n);
            const auto d = detail::parse_json(line, where);
            stub->add(detail::field<std::string>(d, "key", where),
                      {d.value("title", std::string{}), detail::field<std::string>(d, "text", where)});
          }
        }
        env = std::move(stub);
      }
      std::optional<std::string> g;
      if (!golden.empty()) g = golden;
      Trajectory t;
      try {
        t = run_rollout(policy, *env, question, rcfg, seed, g);
      } catch (const RolloutError& e) {
        err << "partial trajectory: " << to_json(e.partial()).dump() << '\n';
        throw;
      }
      if (g) t.composite = t.em;
      const std::string line = to_json(t).dump();
      out << line << '\n';
      RunRecorder rec(out_dir, command,
                      {{"script", script_path}, {"docs", docs_path}, {"search", search_url}, {"question", question},
                       {"golden", golden}, {"max_turns", rcfg.max_turns}, {"top_k", rcfg.top_k},
                       {"max_observation_chars", rcfg.max_observation_chars}},
                      seed);
      rec.write("trajectory.jsonl", line + "\n");
      rec.finish();
      return 0;
    }

    if (command == "grpo-toy") {
      gcfg.validate();
      if (seeds == 0) throw Error(ErrorKind::invalid_input, "--seeds must be >= 1");
      const auto env = SyntheticRetrievalEnv::standard();
      RunRecorder rec(out_dir, command,
                      {{"lambda", lambda}, {"seeds", seeds}, {"steps", gcfg.steps}, {"group_size", gcfg.group_size},
                       {"learning_rate", gcfg.learning_rate}, {"clip_eps", gcfg.clip_eps},
                       {"kl_coef", gcfg.kl_coef}, {"update_epochs", gcfg.update_epochs}},
                      seed);
      json summary = json::array();
      for (double lam : {lambda, 0.0}) {
        IGConfig igc;
        igc.lambda = lam;
        const auto est = toy_ig_estimator(env, igc);
        json runs = json::array();
        for (std::size_t s = 0; s < seeds; ++s) {
          const std::uint64_t run_seed = sub_seed(seed, s);
          const auto log = toy_train(env, est, gcfg, lam, run_seed);
          std::ostringstream csv;
          write_training_csv(csv, log);
          std::ostringstream name;
          name << "training_log_lambda" << lam << "_seed" << s << ".csv";
          rec.write(name.str(), csv.str());
          const auto hit = log.updates_to_threshold(0.9);
          runs.push_back({{"seed_index", s},
                          {"updates_to_threshold", hit ? json(*hit) : json(nullptr)},
                          {"final_p_informative", log.final_policy.probs()[env.informative_channel]},
                          {"peak_entropy", log.peak_entropy()},
                          {"final_entropy", log.final_policy.entropy()}});
        }
        summary.push_back({{"lambda", lam}, {"runs", std::move(runs)}});
        if (lambda == 0.0) break;
      }
      const std::string text = summary.dump(2);
      out << text << '\n';
      rec.write("summary.json", text + "\n");
      rec.finish();
      return 0;
    }

    if (command == "sensitivity") {
      if (seeds == 0) throw Error(ErrorKind::invalid_input, "--seeds must be >= 1");
      const auto gen = sensitivity_generator();
      IGConfig cfg = sensitivity_ig_config();
      std::ostringstream csv;
      json summary = json::array();
      for (std::size_t s = 0; s < seeds; ++s) {
        const std::uint64_t sd = seed + s;
        const auto rep = sensitivity_curve(gen, m_grid, oracle_n, reps, sd, cfg);
        std::ostringstream one;
        write_sensitivity_csv(one, rep, sd);
        std::string body = one.str();
        if (s > 0) body = body.substr(body.find('\n') + 1);
        csv << body;
        json row{{"seed", sd}, {"closed_form", rep.closed_form}, {"oracle_estimate", rep.oracle_estimate}};
        if (rep.rows.size() >= 2) {
          row["spearman"] = spearman(rep.ms(), rep.maes());
          row["loglog_slope"] = loglog_slope(rep.ms(), rep.maes());
        }
        summary.push_back(std::move(row));
      }
      out << csv.str();
      err << summary.dump() << '\n';
      RunRecorder rec(out_dir, command,
                      {{"oracle_n", oracle_n}, {"reps", reps}, {"m_grid", m_grid}, {"seeds", seeds}}, seed);
      rec.write("sensitivity.csv", csv.str());
      rec.write("sensitivity_summary.json", summary.dump(2) + "\n");
      rec.finish();
      return 0;
    }

    if (command == "combine") {
      IGConfig cfg = igf.resolve();
      EntailmentJudge judge(make_entailment_oracle(oracle, ep));
      CombinationReport r;
      if (gen_url.empty()) {
        if (!combine->count("--mass-mode")) cfg.mass_mode = MassMode::frequency;
        const TwoHopScenario sc;
        auto sampler = sc.sampler();
        r = evidence_combination(sc.question, sc.doc_a, sc.doc_b, sc.golden, sampler, judge, cfg, combine_reps, seed);
      } else {
        if (doc_a_path.empty() || doc_b_path.empty() || question.empty() || golden.empty()) {
          throw Error(ErrorKind::invalid_input, "--generator needs --doc-a, --doc-b, --question and --golden");
        }
        RemoteGenerationOracle gen(ep.endpoint(gen_url), cfg.mass_mode != MassMode::frequency);
        r = evidence_combination(question, read_text(doc_a_path), read_text(doc_b_path), golden, gen, judge, cfg,
                                 combine_reps, seed);
      }
      const std::string text = to_json(r).dump(2);
      out << text << '\n';
      json conf = igf.to_json();
      conf["mass_mode"] = to_string(cfg.mass_mode);
      conf.update({{"reps", combine_reps}, {"generator", gen_url}, {"doc_a", doc_a_path}, {"doc_b", doc_b_path},
                   {"question", question}, {"golden", golden}, {"oracle", oracle}, {"endpoint", ep.to_json()}});
      RunRecorder rec(out_dir, command, conf, seed);
      rec.write("combination.json", text + "\n");
      rec.finish();
      return 0;
    }

    if (command == "report") {
      namespace fs = std::filesystem;
      const fs::path dir(report_dir);
      if (!fs::is_directory(dir)) throw Error(ErrorKind::invalid_input, report_dir + " is not a directory");
      // Written as it goes so digest lines survive a malformed table later on.
      std::ostream& rep = out;
      if (fs::exists(dir / "manifest.json")) {
        const auto m = RunManifest::from_json(detail::parse_json(read_text((dir / "manifest.json").string()), "manifest"));
        rep << "run " << m.run_id << " (" << m.command << ", seed " << m.seed << ", " << m.timestamp << ")\n";
        for (const auto& a : m.artifacts) {
          const bool same = fs::exists(dir / a.path) && sha256_file(dir / a.path) == a.sha256;
          rep << "  " << a.path << (same ? "  digest ok" : "  DIGEST MISMATCH") << '\n';
        }
      }
      if (fs::exists(dir / "sensitivity.csv")) {
        std::ifstream in(dir / "sensitivity.csv");
        const auto rows = read_csv(in);
        rep << "sensitivity (seed, M, mae, mae_vs_oracle)\n";
        for (std::size_t i = 1; i < rows.size(); ++i) {
          if (rows[i].size() < 6) throw Error(ErrorKind::invalid_input, "short row in sensitivity.csv");
          rep << "  " << rows[i][0] << ' ' << rows[i][1] << ' ' << rows[i][2] << ' ' << rows[i][5] << '\n';
        }
      }
      if (fs::exists(dir / "combination.json")) {
        const auto j = detail::parse_json(read_text((dir / "combination.json").string()), "combination.json");
        rep << "evidence combination medians [q1, q3]\n";
        for (const char* k : {"a_only", "b_only", "sum", "combined"}) {
          const auto& s = j.at(k).at("summary");
          rep << "  " << k << ' ' << s.at("median").get<double>() << " [" << s.at("q1").get<double>() << ", "
              << s.at("q3").get<double>() << "]\n";
        }
      }
      if (fs::exists(dir / "summary.json")) {
        const auto j = detail::parse_json(read_text((dir / "summary.json").string()), "summary.json");
        rep << "toy training (lambda: updates to P(informative) > 0.9 per seed)\n";
        for (const auto& g : j) {
          rep << "  " << g.at("lambda").get<double>() << ':';
          for (const auto& r : g.at("runs")) {
            const auto& u = r.at("updates_to_threshold");
            rep << ' ' << (u.is_null() ? std::string("never") : std::to_string(u.get<std::size_t>()));
          }
          rep << '\n';
        }
      }
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.is_transport() ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace inforeasoner
