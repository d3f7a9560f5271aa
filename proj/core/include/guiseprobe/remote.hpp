#pragma once

#include <string>

#include "guiseprobe/provider.hpp"

namespace gp {

struct RemoteConfig {
  std::string endpoint;  // e.g. "http://127.0.0.1:8089"
  std::string model;
  std::string api_key;   // sent as a bearer token; never logged
  int max_retries = 3;
  int backoff_ms = 100;
  int timeout_s = 30;
};

// Native wire format: POST /v1/score with
//   {model, prefix, continuation, media: [{url|b64, mime}]?}
// expecting {tokens: [{text, logprob}], total_logprob}.
class RemoteScoreProvider : public Provider {
 public:
  explicit RemoteScoreProvider(RemoteConfig config);

  LogProbResult score(const ScoringRequest& request) const override;
  const ProviderId& id() const override { return id_; }

 private:
  RemoteConfig config_;
  ProviderId id_;
};

// Adapter for echo-style completion APIs: POST /v1/completions with
//   {model, prompt, max_tokens: 0, echo: true, logprobs: 0}
// and sums the echoed token logprobs whose text offset falls inside the
// continuation. Media are not supported.
class EchoCompletionsProvider : public Provider {
 public:
  explicit EchoCompletionsProvider(RemoteConfig config);

  LogProbResult score(const ScoringRequest& request) const override;
  const ProviderId& id() const override { return id_; }

 private:
  RemoteConfig config_;
  ProviderId id_;
};

}  // namespace gp
