#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "guiseprobe/toy_policy.hpp"

namespace gp {

struct PreferenceExample {
  std::string prompt;
  std::string chosen;
  std::string rejected;
};

struct SftExample {
  std::string prompt;
  std::string target;
};

enum class TrainMethod { sft, dpo, orpo, rloo };

const char* to_string(TrainMethod method);
TrainMethod train_method_from_string(const std::string& s);

struct TrainConfig {
  TrainMethod method = TrainMethod::sft;
  double beta = 0.1;        // dpo, rloo
  int k = 4;                // rloo sample count, >= 2
  double learning_rate = 0.05;
  int epochs = 1;
  int batch_size = 4;
  std::uint64_t seed = 0;
  std::size_t max_completion_len = 8;  // rloo, average_reward

  void validate() const;
};

// Deterministic reward over (prompt, completion) pairs.
class RewardProvider {
 public:
  virtual ~RewardProvider() = default;
  virtual double score(const std::string& prompt,
                       const std::string& completion) const = 0;
  virtual std::string id() const = 0;
};

// Reward = number of whitespace tokens in the completion.
class LengthReward : public RewardProvider {
 public:
  double score(const std::string& prompt,
               const std::string& completion) const override;
  std::string id() const override { return "length"; }
};

// Reward = sum of per-word values from a TSV table (word<TAB>value);
// words missing from the table contribute zero.
class KeywordTableReward : public RewardProvider {
 public:
  explicit KeywordTableReward(
      std::vector<std::pair<std::string, double>> table);
  static KeywordTableReward from_file(const std::string& path);

  double score(const std::string& prompt,
               const std::string& completion) const override;
  std::string id() const override { return id_; }

 private:
  std::vector<std::pair<std::string, double>> table_;
  std::string id_;
};

// Gradients share the logits-table layout of ToyPolicyParams.
using Gradient = std::vector<double>;

double grad_norm(const Gradient& grad);

// log(1 - e^x) for x < 0, stable across both the tiny-p and the
// near-one-p regimes. Throws ValidationError for x >= 0.
double log1mexp(double x);

// Per-example losses on raw logprob values; the batch operations below are
// means of these. Exposed so the ratio/odds algebra can be exercised
// directly.
double dpo_pair_loss(double lp_chosen, double lp_chosen_ref,
                     double lp_rejected, double lp_rejected_ref, double beta);
double orpo_pair_loss(double lp_chosen, double lp_rejected);

// Mean negative log-likelihood of targets given prompts, with its gradient.
std::pair<double, Gradient> sft_loss_and_grad(
    const ToyPolicyParams& params, const std::vector<SftExample>& batch);

// Mean over the batch of -log sigmoid(beta * [chosen log-ratio] -
// beta * [rejected log-ratio]) against the frozen reference policy.
// Gradient is with respect to params only.
std::pair<double, Gradient> dpo_loss_and_grad(
    const ToyPolicyParams& params, const ToyPolicyParams& ref_params,
    const std::vector<PreferenceExample>& batch, double beta);

// Mean of -log sigmoid(logit p_c - logit p_r), where logit(p) =
// log p - log(1 - p) with log(1 - p) computed stably from log p.
std::pair<double, Gradient> orpo_loss_and_grad(
    const ToyPolicyParams& params,
    const std::vector<PreferenceExample>& batch);

// R = r(x, y) - beta * [log p(y|x; params) - log p(y|x; ref)].
double shaped_reward(const RewardProvider& reward,
                     const ToyPolicyParams& params,
                     const ToyPolicyParams& ref_params,
                     const std::string& prompt, const std::string& completion,
                     double beta);

struct RlooDiagnostics {
  std::vector<double> rewards;      // shaped R_i
  std::vector<double> advantages;   // leave-one-out baselined
  double advantage_sum = 0.0;       // identically ~0
  double mean_reward = 0.0;
};

// Samples k completions, shapes their rewards, and returns the
// leave-one-out policy-gradient estimate of the reward objective
// (a direction of ascent).
std::pair<Gradient, RlooDiagnostics> rloo_gradient(
    const ToyPolicyParams& params, const ToyPolicyParams& ref_params,
    const RewardProvider& reward, const std::string& prompt, int k,
    double beta, std::mt19937_64& rng,
    std::size_t max_completion_len);
std::pair<Gradient, RlooDiagnostics> rloo_gradient(
    const ToyPolicyParams& params, const ToyPolicyParams& ref_params,
    const RewardProvider& reward, const std::string& prompt, int k,
    double beta, std::uint64_t seed, std::size_t max_completion_len);

struct TrainStep {
  int step = 0;
  int epoch = 0;
  double loss = 0.0;         // objective value (mean shaped reward for rloo)
  double margin_mean = 0.0;  // mean log p_c - log p_r before the update
  double grad_norm = 0.0;
};

struct TrainLog {
  std::vector<TrainStep> steps;
  double initial_margin = 0.0;  // over the full dataset, before training
  double final_margin = 0.0;    // over the full dataset, after training
  std::uint64_t seed = 0;
  std::string config_echo;      // JSON echo of the TrainConfig
};

std::string train_log_to_jsonl(const TrainLog& log);

struct TrainData {
  std::vector<SftExample> sft;            // method == sft
  std::vector<PreferenceExample> prefs;   // dpo, orpo
  std::vector<std::string> prompts;       // rloo
};

std::vector<PreferenceExample> load_preference_data(const std::string& path);
std::vector<SftExample> load_sft_data(const std::string& path);
std::vector<std::string> load_prompt_lines(const std::string& path);

struct TrainResult {
  ToyPolicyParams params;
  TrainLog log;
};

// Plain fixed-rate gradient descent (ascent for rloo) over epochs; the
// reference policy is snapshotted from the initial params. Throws
// DivergenceError when the loss becomes non-finite.
TrainResult train(const TrainConfig& config, const ToyPolicyParams& init,
                  const TrainData& data,
                  const RewardProvider* reward = nullptr);

// Mean raw reward over n sampled generations, round-robin over prompts.
double average_reward(const ToyPolicyParams& params,
                      const RewardProvider& reward,
                      const std::vector<std::string>& prompts, int n,
                      std::uint64_t seed, std::size_t max_len);

}  // namespace gp
