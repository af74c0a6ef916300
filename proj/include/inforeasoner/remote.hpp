#pragma once

// HTTP/JSON clients for generation, entailment and search endpoints.
// Plain http only (no TLS build of httplib); put a local proxy in front of
// anything that needs https.

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "inforeasoner/cluster.hpp"
#include "inforeasoner/reward.hpp"
#include "inforeasoner/rollout.hpp"

namespace inforeasoner {

enum class NliLayout { context_prepended, separate_field };

inline const char* to_string(NliLayout l) {
  return l == NliLayout::context_prepended ? "context_prepended" : "separate_field";
}

inline NliLayout nli_layout_from_string(const std::string& s) {
  if (s == "context_prepended") return NliLayout::context_prepended;
  if (s == "separate_field") return NliLayout::separate_field;
  throw Error(ErrorKind::invalid_input, "unknown nli layout: " + s);
}

struct OracleEndpointConfig {
  std::string base_url;  // scheme://host:port
  std::string path;      // request path; empty picks the client's default
  int timeout_ms = 30000;
  int max_retries = 2;
  std::string auth_env_var;  // name of the variable holding a bearer token
  NliLayout nli_layout = NliLayout::context_prepended;
  int backoff_ms = 100;  // first retry delay, doubled per attempt

  void validate() const {
    if (base_url.empty()) throw Error(ErrorKind::invalid_input, "endpoint base_url is empty");
    if (base_url.rfind("https://", 0) == 0) {
      throw Error(ErrorKind::invalid_input, "https endpoints are not supported: " + base_url);
    }
    if (timeout_ms <= 0) throw Error(ErrorKind::invalid_input, "endpoint timeout must be > 0");
    if (max_retries < 0) throw Error(ErrorKind::invalid_input, "endpoint retries must be >= 0");
    if (backoff_ms < 0) throw Error(ErrorKind::invalid_input, "endpoint backoff must be >= 0");
  }
};

namespace detail {

/// POSTs a JSON body and returns the parsed response. Connection failures and
/// 5xx are retried with exponential backoff; other non-200 codes are not.
inline nlohmann::json post_json(const OracleEndpointConfig& ep, const std::string& default_path,
                                const nlohmann::json& body) {
  ep.validate();
  const std::string path = ep.path.empty() ? default_path : ep.path;
  httplib::Headers headers;
  if (!ep.auth_env_var.empty()) {
    if (const char* tok = std::getenv(ep.auth_env_var.c_str()); tok && *tok) {
      headers.emplace("Authorization", std::string("Bearer ") + tok);
    }
  }
  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= ep.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ep.backoff_ms << (attempt - 1)));
    httplib::Client cli(ep.base_url);
    const auto t = std::chrono::milliseconds(ep.timeout_ms);
    cli.set_connection_timeout(t);
    cli.set_read_timeout(t);
    cli.set_write_timeout(t);
    auto res = cli.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server returned " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorKind::protocol, ep.base_url + path + " returned " + std::to_string(res->status));
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::protocol, ep.base_url + path + " sent invalid JSON: " + e.what());
    }
  }
  throw Error(ErrorKind::oracle_unavailable, ep.base_url + path + " unavailable after " +
                                                 std::to_string(ep.max_retries + 1) + " attempts (" + last_error + ")");
}

}  // namespace detail

class RemoteGenerationOracle final : public GenerationOracle {
 public:
  RemoteGenerationOracle(OracleEndpointConfig ep, bool want_logprobs, int max_tokens = 32)
      : ep_(std::move(ep)), want_logprobs_(want_logprobs), max_tokens_(max_tokens) {}

  std::vector<AnswerSample> generate(const std::string& prompt, std::size_t n, double temperature,
                                     std::uint64_t) override {
    if (n == 0) throw Error(ErrorKind::invalid_input, "n must be >= 1");
    const nlohmann::json body{
        {"prompt", prompt}, {"n", n}, {"temperature", temperature}, {"max_tokens", max_tokens_}, {"logprobs", true}};
    const auto res = detail::post_json(ep_, "/generate", body);
    if (!res.contains("samples") || !res["samples"].is_array()) {
      throw Error(ErrorKind::protocol, "generation response has no \"samples\" array");
    }
    std::vector<AnswerSample> out;
    for (const auto& js : res["samples"]) {
      AnswerSample s;
      try {
        s.text = js.at("text").get<std::string>();
        if (js.contains("token_logprobs") && !js["token_logprobs"].is_null()) {
          s.token_logprobs = js["token_logprobs"].get<std::vector<double>>();
        }
        if (js.contains("logprob") && !js["logprob"].is_null()) {
          s.total_logprob = js["logprob"].get<double>();
        } else if (s.token_logprobs) {
          double t = 0.0;
          for (double v : *s.token_logprobs) t += v;
          s.total_logprob = t;
        }
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::protocol, std::string("malformed generation sample: ") + e.what());
      }
      if (want_logprobs_ && !s.total_logprob) {
        throw Error(ErrorKind::capability,
                    "generation endpoint returned no logprobs; rerun with mass_mode=frequency");
      }
      out.push_back(std::move(s));
    }
    if (out.size() != n) {
      throw Error(ErrorKind::protocol,
                  "generation endpoint returned " + std::to_string(out.size()) + " samples, expected " + std::to_string(n));
    }
    return out;
  }

 private:
  OracleEndpointConfig ep_;
  bool want_logprobs_;
  int max_tokens_;
};

class RemoteEntailmentOracle final : public EntailmentOracle {
 public:
  explicit RemoteEntailmentOracle(OracleEndpointConfig ep) : ep_(std::move(ep)) {}

  static nlohmann::json request_body(NliLayout layout, const std::string& question, const std::string& premise,
                                     const std::string& hypothesis) {
    if (layout == NliLayout::separate_field) {
      return {{"context", question}, {"premise", premise}, {"hypothesis", hypothesis}};
    }
    return {{"premise", question + " " + premise}, {"hypothesis", hypothesis}};
  }

  double entail(const std::string& question, const std::string& premise, const std::string& hypothesis) override {
    if (premise.empty() || hypothesis.empty()) throw Error(ErrorKind::invalid_input, "entailment strings must be non-empty");
    const auto res = detail::post_json(ep_, "/entail", request_body(ep_.nli_layout, question, premise, hypothesis));
    if (!res.contains("entailment") || !res["entailment"].is_number()) {
      throw Error(ErrorKind::protocol, "entailment response has no numeric \"entailment\"");
    }
    const double p = res["entailment"].get<double>();
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::protocol, "entailment " + std::to_string(p) + " outside [0,1]");
    return p;
  }

  OracleKind kind() const noexcept override { return OracleKind::remote; }

 private:
  OracleEndpointConfig ep_;
};

/// {query, top_k} -> {documents: [{title, text}]}
class RemoteSearchEnvironment final : public RetrievalEnvironment {
 public:
  explicit RemoteSearchEnvironment(OracleEndpointConfig ep) : ep_(std::move(ep)) {}

  std::vector<Document> search(const std::string& query, std::size_t top_k) override {
    const auto res = detail::post_json(ep_, "/search", {{"query", query}, {"top_k", top_k}});
    if (!res.contains("documents") || !res["documents"].is_array()) {
      throw Error(ErrorKind::protocol, "search response has no \"documents\" array");
    }
    std::vector<Document> out;
    try {
      for (const auto& d : res["documents"]) {
        out.push_back({d.value("title", std::string{}), d.at("text").get<std::string>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::protocol, std::string("malformed search document: ") + e.what());
    }
    return out;
  }

 private:
  OracleEndpointConfig ep_;
};

}  // namespace inforeasoner
