#include "guiseprobe/remote.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "guiseprobe/digest.hpp"
#include "guiseprobe/errors.hpp"
#include "guiseprobe/fsutil.hpp"

namespace gp {
namespace {

std::string base64_encode(std::string_view bytes) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 2 < bytes.size()) {
    unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                 (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                 static_cast<unsigned char>(bytes[i + 2]);
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += alphabet[(v >> 6) & 63];
    out += alphabet[v & 63];
    i += 3;
  }
  if (i + 1 == bytes.size()) {
    unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                 (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += alphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::string guess_mime(const std::string& locator) {
  namespace fs = std::filesystem;
  std::string ext = fs::path(locator).extension().string();
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".gif") return "image/gif";
  return "application/octet-stream";
}

nlohmann::json media_to_json(const std::vector<MediaRef>& media) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& ref : media) {
    nlohmann::json item;
    item["mime"] = guess_mime(ref.locator);
    std::ifstream in(ref.locator, std::ios::binary);
    if (in) {
      std::string bytes((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
      item["b64"] = base64_encode(bytes);
    } else {
      item["url"] = ref.locator;
    }
    out.push_back(std::move(item));
  }
  return out;
}

// POSTs with retry/backoff on transport failures and 5xx responses.
// 4xx responses and retry exhaustion raise ProviderError.
nlohmann::json post_json(const RemoteConfig& config, const std::string& path,
                         const nlohmann::json& body) {
  std::string last_error;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(config.backoff_ms * (1 << (attempt - 1))));
    }
    // One client per call so concurrent scoring never shares a connection.
    httplib::Client client(config.endpoint);
    client.set_connection_timeout(config.timeout_s);
    client.set_read_timeout(config.timeout_s);
    httplib::Headers headers;
    if (!config.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + config.api_key);
    }
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server error " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw ProviderError("remote " + path + " returned status " +
                          std::to_string(res->status) + ": " + res->body);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError("remote " + path + " returned malformed JSON: " +
                          e.what());
    }
  }
  throw ProviderError("remote " + path + " failed after " +
                      std::to_string(config.max_retries + 1) +
                      " attempts: " + last_error);
}

ProviderId make_remote_id(const RemoteConfig& config, const char* flavor) {
  ProviderId id;
  id.kind = BackendKind::remote;
  id.model = config.model;
  Fnv1a64 hash;
  hash.update(config.endpoint).update("\x1f").update(config.model);
  hash.update("\x1f").update(flavor);
  id.digest = hash.hex();
  return id;
}

}  // namespace

RemoteScoreProvider::RemoteScoreProvider(RemoteConfig config)
    : config_(std::move(config)), id_(make_remote_id(config_, "score")) {}

LogProbResult RemoteScoreProvider::score(const ScoringRequest& request) const {
  nlohmann::json body;
  body["model"] = config_.model;
  body["prefix"] = request.prefix;
  body["continuation"] = request.continuation;
  if (!request.media.empty()) body["media"] = media_to_json(request.media);

  nlohmann::json response = post_json(config_, "/v1/score", body);
  if (!response.contains("tokens") && !response.contains("total_logprob")) {
    throw ProviderError("remote response missing logprobs");
  }
  LogProbResult result;
  try {
    if (response.contains("tokens")) {
      for (const auto& t : response["tokens"]) {
        result.per_token.push_back({t.at("text").get<std::string>(),
                                    t.at("logprob").get<double>()});
      }
    }
    if (response.contains("total_logprob")) {
      result.total_logprob = response["total_logprob"].get<double>();
    } else {
      for (const auto& t : result.per_token) {
        result.total_logprob += t.logprob;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("remote response missing logprobs: ") +
                        e.what());
  }
  validate_logprob_result(result);
  return result;
}

EchoCompletionsProvider::EchoCompletionsProvider(RemoteConfig config)
    : config_(std::move(config)), id_(make_remote_id(config_, "echo")) {}

LogProbResult EchoCompletionsProvider::score(
    const ScoringRequest& request) const {
  if (!request.media.empty()) {
    throw ProviderError("echo completions adapter does not support media");
  }
  nlohmann::json body;
  body["model"] = config_.model;
  body["prompt"] = request.prefix + request.continuation;
  body["max_tokens"] = 0;
  body["echo"] = true;
  body["logprobs"] = 0;

  nlohmann::json response = post_json(config_, "/v1/completions", body);
  try {
    const auto& choice = response.at("choices").at(0);
    const auto& lp = choice.at("logprobs");
    const auto& tokens = lp.at("tokens");
    const auto& token_logprobs = lp.at("token_logprobs");
    const auto& offsets = lp.at("text_offset");
    LogProbResult result;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (offsets.at(i).get<std::size_t>() < request.prefix.size()) continue;
      if (token_logprobs.at(i).is_null()) {
        throw ProviderError(
            "echo response has no logprob for a continuation token");
      }
      const double v = token_logprobs.at(i).get<double>();
      result.per_token.push_back({tokens.at(i).get<std::string>(), v});
      result.total_logprob += v;
    }
    if (result.per_token.empty()) {
      throw ProviderError("echo response covered no continuation tokens");
    }
    validate_logprob_result(result);
    return result;
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("echo response missing logprobs: ") +
                        e.what());
  }
}

}  // namespace gp
