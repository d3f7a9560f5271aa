#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace gp {

// Opaque media reference. The digest identifies content; the toy backend
// maps digests to reserved vocab tokens, remote backends receive the
// locator (or its base64 content).
struct MediaRef {
  std::string locator;
  std::string digest;

  // Computes the digest from file content.
  static MediaRef from_file(const std::string& path);
};

struct ScoringRequest {
  std::string prefix;        // the formatted prompt f(x)
  std::string continuation;  // the attribute text, leading separator included
  std::vector<MediaRef> media;
};

struct TokenLogProb {
  std::string text;
  double logprob = 0.0;
};

struct LogProbResult {
  double total_logprob = 0.0;  // natural log of p(continuation | prefix)
  std::vector<TokenLogProb> per_token;
};

enum class BackendKind { toy, remote };

const char* to_string(BackendKind kind);

// Stable identity of a scoring backend; part of cache keys and report
// provenance.
struct ProviderId {
  BackendKind kind = BackendKind::toy;
  std::string model;
  std::string digest;  // parameter digest (toy) or endpoint identity (remote)
};

class Provider {
 public:
  virtual ~Provider() = default;

  // Must be safe to call concurrently.
  virtual LogProbResult score(const ScoringRequest& request) const = 0;
  virtual const ProviderId& id() const = 0;
};

// Validates the LogProbResult invariants (total <= 0, total == sum of
// per-token logprobs within 1e-9). Throws ProviderError.
void validate_logprob_result(const LogProbResult& result);

// On-disk cache wrapper: one file per entry in a content-addressed
// directory. Cache hits are bit-exact; corrupt entries are treated as
// misses, recomputed, and rewritten with a warning on stderr.
class CachedProvider : public Provider {
 public:
  CachedProvider(const Provider& inner, std::string cache_dir);

  LogProbResult score(const ScoringRequest& request) const override;
  const ProviderId& id() const override { return inner_.id(); }

  std::size_t hits() const;
  std::size_t misses() const;

 private:
  std::string entry_path(const ScoringRequest& request) const;

  const Provider& inner_;
  std::string cache_dir_;
  mutable std::mutex mutex_;
  mutable std::size_t hits_ = 0;
  mutable std::size_t misses_ = 0;
};

}  // namespace gp
