#include "guiseprobe/toy_policy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "guiseprobe/digest.hpp"
#include "guiseprobe/errors.hpp"
#include "guiseprobe/fsutil.hpp"

namespace gp {
namespace {

constexpr double kNegLargeLogit = -1e9;

std::unordered_map<std::string, std::size_t> vocab_index(
    const std::vector<std::string>& vocab) {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], i);
  return index;
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Uniform double in [0, 1) with 53 bits of the generator's output.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::size_t ToyPolicyParams::context_count() const {
  std::size_t n = 1;
  for (int i = 0; i < order; ++i) n *= vocab.size();
  return n;
}

void ToyPolicyParams::validate() const {
  if (order < 0 || order > 2) {
    throw ValidationError("toy policy order must be in [0, 2], got " +
                          std::to_string(order));
  }
  if (vocab.size() < 2) {
    throw ValidationError("toy policy vocab must have at least 2 tokens");
  }
  if (vocab.size() <= kUnkId || vocab[kBosId] != kBosToken ||
      vocab[kEosId] != kEosToken || vocab[kUnkId] != kUnkToken) {
    throw ValidationError(
        "toy policy vocab must start with <bos>, <eos>, <unk>");
  }
  if (logits.size() != context_count() * vocab.size()) {
    throw ValidationError("toy policy logits table has wrong size: expected " +
                          std::to_string(context_count() * vocab.size()) +
                          ", got " + std::to_string(logits.size()));
  }
  for (double v : logits) {
    if (!std::isfinite(v)) {
      throw ValidationError("toy policy logits must be finite");
    }
  }
}

std::string ToyPolicyParams::digest() const {
  Fnv1a64 hash;
  hash.update(static_cast<std::uint64_t>(order));
  for (const auto& t : vocab) hash.update(t).update("\x1f");
  for (double v : logits) hash.update(v);
  return hash.hex();
}

ToyPolicyParams ToyPolicyParams::uniform(
    const std::vector<std::string>& tokens, int order) {
  ToyPolicyParams params;
  params.order = order;
  params.vocab = {kBosToken, kEosToken, kUnkToken};
  for (const auto& t : tokens) params.vocab.push_back(lowercase(t));
  const std::size_t v = params.vocab.size();
  params.logits.assign(params.context_count() * v, 0.0);
  for (std::size_t ctx = 0; ctx < params.context_count(); ++ctx) {
    double* row = params.row(ctx);
    row[kBosId] = kNegLargeLogit;
    row[kEosId] = kNegLargeLogit;
    row[kUnkId] = kNegLargeLogit;
  }
  params.validate();
  return params;
}

ToyPolicyParams ToyPolicyParams::random(std::size_t vocab_size, int order,
                                        std::uint64_t seed) {
  if (vocab_size < 4) {
    throw ValidationError("random toy policy needs vocab size >= 4");
  }
  ToyPolicyParams params;
  params.order = order;
  params.vocab = {kBosToken, kEosToken, kUnkToken};
  for (std::size_t i = 3; i < vocab_size; ++i) {
    params.vocab.push_back("t" + std::to_string(i - 3));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  params.logits.resize(params.context_count() * vocab_size);
  for (double& v : params.logits) v = normal(rng);
  params.validate();
  return params;
}

std::vector<std::size_t> toy_tokenize(const ToyPolicyParams& params,
                                      const std::string& text) {
  auto index = vocab_index(params.vocab);
  std::vector<std::size_t> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    std::size_t start = i;
    while (i < text.size() &&
           !std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    if (i > start) {
      std::string word = lowercase(text.substr(start, i - start));
      auto it = index.find(word);
      tokens.push_back(it != index.end() ? it->second : kUnkId);
    }
  }
  return tokens;
}

std::size_t toy_initial_context(const ToyPolicyParams& params) {
  // BOS-padded history; <bos> has index 0, so the initial context id is 0.
  (void)params;
  return 0;
}

std::size_t toy_advance_context(const ToyPolicyParams& params,
                                std::size_t context, std::size_t token) {
  if (params.order == 0) return 0;
  return (context * params.vocab.size() + token) % params.context_count();
}

std::vector<double> toy_log_softmax_row(const ToyPolicyParams& params,
                                        std::size_t context) {
  const double* row = params.row(context);
  const std::size_t v = params.vocab.size();
  double max = row[0];
  for (std::size_t i = 1; i < v; ++i) max = std::max(max, row[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < v; ++i) sum += std::exp(row[i] - max);
  const double log_z = max + std::log(sum);
  std::vector<double> out(v);
  for (std::size_t i = 0; i < v; ++i) out[i] = row[i] - log_z;
  return out;
}

std::vector<double> toy_softmax_row(const ToyPolicyParams& params,
                                    std::size_t context) {
  std::vector<double> out = toy_log_softmax_row(params, context);
  for (double& x : out) x = std::exp(x);
  return out;
}

double toy_sequence_logprob(
    const ToyPolicyParams& params,
    const std::vector<std::size_t>& prefix_tokens,
    const std::vector<std::size_t>& continuation_tokens) {
  std::size_t ctx = toy_initial_context(params);
  for (std::size_t tok : prefix_tokens) {
    ctx = toy_advance_context(params, ctx, tok);
  }
  double total = 0.0;
  for (std::size_t tok : continuation_tokens) {
    total += toy_log_softmax_row(params, ctx)[tok];
    ctx = toy_advance_context(params, ctx, tok);
  }
  return total;
}

std::vector<double> toy_logprob_grad(
    const ToyPolicyParams& params,
    const std::vector<std::size_t>& prefix_tokens,
    const std::vector<std::size_t>& continuation_tokens) {
  std::vector<double> grad(params.logits.size(), 0.0);
  const std::size_t v = params.vocab.size();
  std::size_t ctx = toy_initial_context(params);
  for (std::size_t tok : prefix_tokens) {
    ctx = toy_advance_context(params, ctx, tok);
  }
  for (std::size_t tok : continuation_tokens) {
    std::vector<double> p = toy_softmax_row(params, ctx);
    double* row = grad.data() + ctx * v;
    for (std::size_t i = 0; i < v; ++i) row[i] -= p[i];
    row[tok] += 1.0;
    ctx = toy_advance_context(params, ctx, tok);
  }
  return grad;
}

SampleResult toy_sample(const ToyPolicyParams& params,
                        const std::string& prefix, std::size_t max_len,
                        std::mt19937_64& rng) {
  SampleResult result;
  std::size_t ctx = toy_initial_context(params);
  for (std::size_t tok : toy_tokenize(params, prefix)) {
    ctx = toy_advance_context(params, ctx, tok);
  }
  for (std::size_t step = 0; step < max_len; ++step) {
    std::vector<double> p = toy_softmax_row(params, ctx);
    const double u = uniform01(rng);
    double acc = 0.0;
    std::size_t pick = 0;
    bool picked = false;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] <= 0.0) continue;
      acc += p[i];
      pick = i;
      if (u < acc) {
        picked = true;
        break;
      }
    }
    (void)picked;  // rounding can leave acc slightly below 1; keep last pick
    if (pick == kEosId) {
      result.ended_with_eos = true;
      break;
    }
    result.tokens.push_back(pick);
    ctx = toy_advance_context(params, ctx, pick);
  }
  for (std::size_t i = 0; i < result.tokens.size(); ++i) {
    if (i > 0) result.text += ' ';
    result.text += params.vocab[result.tokens[i]];
  }
  return result;
}

SampleResult toy_sample(const ToyPolicyParams& params,
                        const std::string& prefix, std::size_t max_len,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return toy_sample(params, prefix, max_len, rng);
}

void save_toy_policy(const ToyPolicyParams& params, const std::string& path) {
  params.validate();
  nlohmann::ordered_json j;
  j["format"] = "guiseprobe-toy-policy";
  j["version"] = 1;
  j["order"] = params.order;
  j["vocab"] = params.vocab;
  const std::size_t v = params.vocab.size();
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t ctx = 0; ctx < params.context_count(); ++ctx) {
    rows.push_back(std::vector<double>(params.row(ctx), params.row(ctx) + v));
  }
  j["logits"] = std::move(rows);
  write_file_atomic(path, j.dump(2) + "\n");
}

ToyPolicyParams load_toy_policy(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": malformed policy file: " + e.what());
  }
  if (j.value("format", "") != "guiseprobe-toy-policy") {
    throw ValidationError(path + ": not a toy policy file");
  }
  if (j.value("version", 0) != 1) {
    throw ValidationError(path + ": unsupported policy file version");
  }
  ToyPolicyParams params;
  try {
    params.order = j.at("order").get<int>();
    params.vocab = j.at("vocab").get<std::vector<std::string>>();
    for (const auto& row : j.at("logits")) {
      auto values = row.get<std::vector<double>>();
      params.logits.insert(params.logits.end(), values.begin(), values.end());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": malformed policy file: " + e.what());
  }
  params.validate();
  return params;
}

ToyProvider::ToyProvider(ToyPolicyParams params, std::string model_name,
                         std::map<std::string, std::string> media_tokens)
    : params_(std::move(params)), media_tokens_(std::move(media_tokens)) {
  params_.validate();
  auto index = vocab_index(params_.vocab);
  for (const auto& [digest, token] : media_tokens_) {
    if (!index.contains(token)) {
      throw ValidationError("media token '" + token + "' not in vocab");
    }
  }
  id_.kind = BackendKind::toy;
  id_.model = std::move(model_name);
  id_.digest = params_.digest();
}

LogProbResult ToyProvider::score(const ScoringRequest& request) const {
  std::vector<std::size_t> prefix_tokens;
  if (!request.media.empty()) {
    if (media_tokens_.empty()) {
      throw ProviderError("toy provider has no media-token mapping");
    }
    auto index = vocab_index(params_.vocab);
    for (const auto& ref : request.media) {
      auto it = media_tokens_.find(ref.digest);
      if (it == media_tokens_.end()) {
        throw ProviderError("no media token mapped for digest " + ref.digest +
                            " (" + ref.locator + ")");
      }
      prefix_tokens.push_back(index.at(it->second));
    }
  }
  for (std::size_t tok : toy_tokenize(params_, request.prefix)) {
    prefix_tokens.push_back(tok);
  }
  std::vector<std::size_t> cont = toy_tokenize(params_, request.continuation);
  if (cont.empty()) {
    throw ValidationError("toy tokenizer produced empty continuation for '" +
                          request.continuation + "'");
  }

  LogProbResult result;
  std::size_t ctx = toy_initial_context(params_);
  for (std::size_t tok : prefix_tokens) {
    ctx = toy_advance_context(params_, ctx, tok);
  }
  for (std::size_t tok : cont) {
    const double lp = toy_log_softmax_row(params_, ctx)[tok];
    result.per_token.push_back({params_.vocab[tok], lp});
    result.total_logprob += lp;
    ctx = toy_advance_context(params_, ctx, tok);
  }
  return result;
}

}  // namespace gp
