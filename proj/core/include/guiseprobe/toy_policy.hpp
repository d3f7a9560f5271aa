#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "guiseprobe/provider.hpp"

namespace gp {

// Fixed vocab positions of the special tokens.
inline constexpr std::size_t kBosId = 0;
inline constexpr std::size_t kEosId = 1;
inline constexpr std::size_t kUnkId = 2;

inline constexpr const char* kBosToken = "<bos>";
inline constexpr const char* kEosToken = "<eos>";
inline constexpr const char* kUnkToken = "<unk>";

// Dense order-m n-gram policy. One logits row of size V per m-token
// context; contexts are BOS-padded histories, indexed in row-major order
// with the most recent token varying fastest.
struct ToyPolicyParams {
  int order = 1;                    // m in [0, 2]
  std::vector<std::string> vocab;   // [0]=<bos>, [1]=<eos>, [2]=<unk>
  std::vector<double> logits;       // V^m rows by V columns, flattened

  std::size_t vocab_size() const { return vocab.size(); }
  std::size_t context_count() const;
  double* row(std::size_t context) { return logits.data() + context * vocab.size(); }
  const double* row(std::size_t context) const {
    return logits.data() + context * vocab.size();
  }

  // Throws ValidationError if the invariants do not hold.
  void validate() const;
  std::string digest() const;

  // Uniform logits over the non-special tokens (specials are planted at a
  // large negative logit so they carry no probability mass).
  static ToyPolicyParams uniform(const std::vector<std::string>& tokens,
                                 int order);
  // Seeded standard-normal logits over the full table.
  static ToyPolicyParams random(std::size_t vocab_size, int order,
                                std::uint64_t seed);
};

// Lowercased whitespace tokenization; out-of-vocab words map to <unk>.
std::vector<std::size_t> toy_tokenize(const ToyPolicyParams& params,
                                      const std::string& text);

// Walks the context id across a token sequence starting from the BOS-padded
// initial context.
std::size_t toy_initial_context(const ToyPolicyParams& params);
std::size_t toy_advance_context(const ToyPolicyParams& params,
                                std::size_t context, std::size_t token);

// Row log-softmax / softmax of the given context.
std::vector<double> toy_log_softmax_row(const ToyPolicyParams& params,
                                        std::size_t context);
std::vector<double> toy_softmax_row(const ToyPolicyParams& params,
                                    std::size_t context);

// log p(continuation | prefix): sum of stepwise conditional logprobs.
double toy_sequence_logprob(const ToyPolicyParams& params,
                            const std::vector<std::size_t>& prefix_tokens,
                            const std::vector<std::size_t>& continuation_tokens);

// d log p(continuation | prefix) / d logits, same shape as the logits
// table. Rows off the context path are zero;  each step contributes
// one-hot(token) - softmax(row).
std::vector<double> toy_logprob_grad(
    const ToyPolicyParams& params,
    const std::vector<std::size_t>& prefix_tokens,
    const std::vector<std::size_t>& continuation_tokens);

struct SampleResult {
  std::vector<std::size_t> tokens;  // body tokens, <eos> excluded
  std::string text;                 // tokens joined with single spaces
  bool ended_with_eos = false;
};

// Categorical sampling from softmax rows until <eos> or max_len tokens.
// Deterministic for a fixed (params, prefix, max_len, seed).
SampleResult toy_sample(const ToyPolicyParams& params,
                        const std::string& prefix, std::size_t max_len,
                        std::uint64_t seed);
// Same, drawing from a caller-owned generator (for sequential use inside a
// training loop).
SampleResult toy_sample(const ToyPolicyParams& params,
                        const std::string& prefix, std::size_t max_len,
                        std::mt19937_64& rng);

// Versioned JSON serialization; round-trips bit-exactly.
void save_toy_policy(const ToyPolicyParams& params, const std::string& path);
ToyPolicyParams load_toy_policy(const std::string& path);

// Scoring backend over a toy policy. Media are supported only when a
// digest -> reserved-token map is supplied; mapped tokens are prepended to
// the prefix token sequence.
class ToyProvider : public Provider {
 public:
  explicit ToyProvider(ToyPolicyParams params, std::string model_name = "toy",
                       std::map<std::string, std::string> media_tokens = {});

  LogProbResult score(const ScoringRequest& request) const override;
  const ProviderId& id() const override { return id_; }

  const ToyPolicyParams& params() const { return params_; }

 private:
  ToyPolicyParams params_;
  std::map<std::string, std::string> media_tokens_;  // media digest -> token
  ProviderId id_;
};

}  // namespace gp
