#include "guiseprobe/provider.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>

#include <nlohmann/json.hpp>

#include "guiseprobe/digest.hpp"
#include "guiseprobe/errors.hpp"
#include "guiseprobe/fsutil.hpp"

namespace gp {

const char* to_string(BackendKind kind) {
  return kind == BackendKind::toy ? "toy" : "remote";
}

MediaRef MediaRef::from_file(const std::string& path) {
  return MediaRef{path, digest_file(path)};
}

void validate_logprob_result(const LogProbResult& result) {
  if (!std::isfinite(result.total_logprob) &&
      result.total_logprob != -std::numeric_limits<double>::infinity()) {
    throw ProviderError("logprob result is NaN or +inf");
  }
  if (result.total_logprob > 1e-9) {
    throw ProviderError("total_logprob must be <= 0, got " +
                        std::to_string(result.total_logprob));
  }
  if (!result.per_token.empty()) {
    double sum = 0.0;
    for (const auto& t : result.per_token) sum += t.logprob;
    if (std::abs(sum - result.total_logprob) > 1e-9) {
      throw ProviderError("total_logprob does not match per-token sum");
    }
  }
}

namespace {

std::uint64_t checksum(const LogProbResult& result) {
  Fnv1a64 hash;
  hash.update(result.total_logprob);
  for (const auto& t : result.per_token) {
    hash.update(t.text).update("\x1f").update(t.logprob);
  }
  return hash.value();
}

nlohmann::ordered_json result_to_json(const LogProbResult& result) {
  nlohmann::ordered_json tokens = nlohmann::ordered_json::array();
  for (const auto& t : result.per_token) {
    tokens.push_back({{"text", t.text}, {"logprob", t.logprob}});
  }
  return {{"total_logprob", result.total_logprob},
          {"per_token", std::move(tokens)}};
}

LogProbResult result_from_json(const nlohmann::json& j) {
  LogProbResult result;
  result.total_logprob = j.at("total_logprob").get<double>();
  for (const auto& t : j.at("per_token")) {
    result.per_token.push_back(
        {t.at("text").get<std::string>(), t.at("logprob").get<double>()});
  }
  return result;
}

}  // namespace

CachedProvider::CachedProvider(const Provider& inner, std::string cache_dir)
    : inner_(inner), cache_dir_(std::move(cache_dir)) {
  std::error_code ec;
  std::filesystem::create_directories(cache_dir_, ec);
  if (ec && !std::filesystem::is_directory(cache_dir_)) {
    throw ValidationError("cannot create cache directory: " + cache_dir_);
  }
}

std::string CachedProvider::entry_path(const ScoringRequest& request) const {
  const ProviderId& pid = inner_.id();
  Fnv1a64 hash;
  hash.update(to_string(pid.kind)).update("\x1f");
  hash.update(pid.model).update("\x1f");
  hash.update(pid.digest).update("\x1f");
  hash.update(request.prefix).update("\x1f");
  hash.update(request.continuation).update("\x1f");
  for (const auto& m : request.media) hash.update(m.digest).update("\x1e");
  return (std::filesystem::path(cache_dir_) / (hash.hex() + ".json")).string();
}

LogProbResult CachedProvider::score(const ScoringRequest& request) const {
  const std::string path = entry_path(request);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (std::filesystem::exists(path)) {
      try {
        nlohmann::json entry = nlohmann::json::parse(read_file(path));
        LogProbResult result = result_from_json(entry.at("result"));
        const std::string stored = entry.at("checksum").get<std::string>();
        Fnv1a64 expect;
        expect.update(checksum(result));
        if (stored != expect.hex()) throw Error("checksum mismatch");
        ++hits_;
        return result;
      } catch (const std::exception& e) {
        std::cerr << "guiseprobe: warning: corrupt cache entry " << path
                  << " (" << e.what() << "), recomputing\n";
      }
    }
  }
  LogProbResult result = inner_.score(request);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    ++misses_;
    nlohmann::ordered_json entry;
    entry["key"] = std::filesystem::path(path).stem().string();
    entry["prefix"] = request.prefix;
    entry["continuation"] = request.continuation;
    nlohmann::ordered_json media = nlohmann::ordered_json::array();
    for (const auto& m : request.media) media.push_back(m.digest);
    entry["media"] = std::move(media);
    Fnv1a64 sum;
    sum.update(checksum(result));
    entry["checksum"] = sum.hex();
    entry["result"] = result_to_json(result);
    write_file_atomic(path, entry.dump() + "\n");
  }
  return result;
}

std::size_t CachedProvider::hits() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return hits_;
}

std::size_t CachedProvider::misses() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return misses_;
}

}  // namespace gp
