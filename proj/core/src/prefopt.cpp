#include "guiseprobe/prefopt.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "guiseprobe/digest.hpp"
#include "guiseprobe/errors.hpp"

namespace gp {
namespace {

double softplus(double x) {
  // log(1 + e^x)
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    std::size_t start = i;
    while (i < text.size() &&
           !std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    if (i > start) words.push_back(text.substr(start, i - start));
  }
  return words;
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

double sequence_logprob(const ToyPolicyParams& params,
                        const std::string& prompt,
                        const std::string& completion) {
  return toy_sequence_logprob(params, toy_tokenize(params, prompt),
                              toy_tokenize(params, completion));
}

void accumulate(Gradient& into, const Gradient& from, double scale) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += scale * from[i];
}

}  // namespace

const char* to_string(TrainMethod method) {
  switch (method) {
    case TrainMethod::sft: return "sft";
    case TrainMethod::dpo: return "dpo";
    case TrainMethod::orpo: return "orpo";
    case TrainMethod::rloo: return "rloo";
  }
  return "?";
}

TrainMethod train_method_from_string(const std::string& s) {
  if (s == "sft") return TrainMethod::sft;
  if (s == "dpo") return TrainMethod::dpo;
  if (s == "orpo") return TrainMethod::orpo;
  if (s == "rloo") return TrainMethod::rloo;
  throw ValidationError("unknown training method: " + s);
}

void TrainConfig::validate() const {
  if (beta <= 0 && (method == TrainMethod::dpo)) {
    throw ValidationError("beta must be positive for dpo");
  }
  if (beta < 0) throw ValidationError("beta must be non-negative");
  if (method == TrainMethod::rloo && k < 2) {
    throw ValidationError("rloo needs k >= 2");
  }
  if (learning_rate < 0) throw ValidationError("learning rate must be >= 0");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (method == TrainMethod::rloo && max_completion_len < 1) {
    throw ValidationError("rloo needs max completion length >= 1");
  }
}

double LengthReward::score(const std::string& prompt,
                           const std::string& completion) const {
  (void)prompt;
  return static_cast<double>(split_words(completion).size());
}

KeywordTableReward::KeywordTableReward(
    std::vector<std::pair<std::string, double>> table)
    : table_(std::move(table)) {
  Fnv1a64 hash;
  for (const auto& [word, value] : table_) {
    hash.update(word).update("\x1f").update(value);
  }
  id_ = "table:" + hash.hex();
}

KeywordTableReward KeywordTableReward::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open reward table: " + path);
  std::vector<std::pair<std::string, double>> table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": expected 'word\\tvalue'");
    }
    try {
      table.emplace_back(lowercase(line.substr(0, tab)),
                         std::stod(line.substr(tab + 1)));
    } catch (const std::exception&) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": unparseable value");
    }
  }
  if (table.empty()) throw ValidationError(path + ": empty reward table");
  return KeywordTableReward(std::move(table));
}

double KeywordTableReward::score(const std::string& prompt,
                                 const std::string& completion) const {
  (void)prompt;
  double total = 0.0;
  for (const auto& word : split_words(completion)) {
    const std::string w = lowercase(word);
    for (const auto& [key, value] : table_) {
      if (key == w) total += value;
    }
  }
  return total;
}

double grad_norm(const Gradient& grad) {
  double sum = 0.0;
  for (double v : grad) sum += v * v;
  return std::sqrt(sum);
}

double log1mexp(double x) {
  if (x >= 0) {
    throw ValidationError(
        "log1mexp needs a negative log-probability (p < 1), got " +
        std::to_string(x));
  }
  constexpr double kLn2 = 0.6931471805599453;
  if (x > -kLn2) return std::log(-std::expm1(x));
  return std::log1p(-std::exp(x));
}

double dpo_pair_loss(double lp_chosen, double lp_chosen_ref,
                     double lp_rejected, double lp_rejected_ref, double beta) {
  const double z =
      beta * (lp_chosen - lp_chosen_ref) - beta * (lp_rejected - lp_rejected_ref);
  return softplus(-z);
}

double orpo_pair_loss(double lp_chosen, double lp_rejected) {
  const double z = (lp_chosen - log1mexp(lp_chosen)) -
                   (lp_rejected - log1mexp(lp_rejected));
  return softplus(-z);
}

std::pair<double, Gradient> sft_loss_and_grad(
    const ToyPolicyParams& params, const std::vector<SftExample>& batch) {
  if (batch.empty()) throw ValidationError("sft batch is empty");
  double loss = 0.0;
  Gradient grad(params.logits.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    auto prompt_tokens = toy_tokenize(params, ex.prompt);
    auto target_tokens = toy_tokenize(params, ex.target);
    if (target_tokens.empty()) {
      throw ValidationError("sft target tokenizes to nothing: '" + ex.target +
                            "'");
    }
    loss += -toy_sequence_logprob(params, prompt_tokens, target_tokens) * inv_n;
    accumulate(grad, toy_logprob_grad(params, prompt_tokens, target_tokens),
               -inv_n);
  }
  return {loss, std::move(grad)};
}

std::pair<double, Gradient> dpo_loss_and_grad(
    const ToyPolicyParams& params, const ToyPolicyParams& ref_params,
    const std::vector<PreferenceExample>& batch, double beta) {
  if (batch.empty()) throw ValidationError("dpo batch is empty");
  double loss = 0.0;
  Gradient grad(params.logits.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    const double lp_c = sequence_logprob(params, ex.prompt, ex.chosen);
    const double lp_r = sequence_logprob(params, ex.prompt, ex.rejected);
    const double lp_c_ref = sequence_logprob(ref_params, ex.prompt, ex.chosen);
    const double lp_r_ref =
        sequence_logprob(ref_params, ex.prompt, ex.rejected);
    const double z = beta * (lp_c - lp_c_ref) - beta * (lp_r - lp_r_ref);
    loss += softplus(-z) * inv_n;
    // d/dz of -log sigmoid(z) is -sigmoid(-z).
    const double dz = -sigmoid(-z) * inv_n;
    auto prompt_tokens = toy_tokenize(params, ex.prompt);
    accumulate(grad,
               toy_logprob_grad(params, prompt_tokens,
                                toy_tokenize(params, ex.chosen)),
               dz * beta);
    accumulate(grad,
               toy_logprob_grad(params, prompt_tokens,
                                toy_tokenize(params, ex.rejected)),
               -dz * beta);
  }
  return {loss, std::move(grad)};
}

std::pair<double, Gradient> orpo_loss_and_grad(
    const ToyPolicyParams& params,
    const std::vector<PreferenceExample>& batch) {
  if (batch.empty()) throw ValidationError("orpo batch is empty");
  double loss = 0.0;
  Gradient grad(params.logits.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    const double lp_c = sequence_logprob(params, ex.prompt, ex.chosen);
    const double lp_r = sequence_logprob(params, ex.prompt, ex.rejected);
    if (lp_c >= 0 || lp_r >= 0) {
      throw ValidationError(
          "orpo completion has probability 1 (infinite odds) for prompt '" +
          ex.prompt + "'");
    }
    const double z =
        (lp_c - log1mexp(lp_c)) - (lp_r - log1mexp(lp_r));
    loss += softplus(-z) * inv_n;
    const double dz = -sigmoid(-z) * inv_n;
    // d logit(p) / d log p = 1 / (1 - p).
    const double w_c = std::exp(-log1mexp(lp_c));
    const double w_r = std::exp(-log1mexp(lp_r));
    auto prompt_tokens = toy_tokenize(params, ex.prompt);
    accumulate(grad,
               toy_logprob_grad(params, prompt_tokens,
                                toy_tokenize(params, ex.chosen)),
               dz * w_c);
    accumulate(grad,
               toy_logprob_grad(params, prompt_tokens,
                                toy_tokenize(params, ex.rejected)),
               -dz * w_r);
  }
  return {loss, std::move(grad)};
}

double shaped_reward(const RewardProvider& reward,
                     const ToyPolicyParams& params,
                     const ToyPolicyParams& ref_params,
                     const std::string& prompt, const std::string& completion,
                     double beta) {
  const double raw = reward.score(prompt, completion);
  if (beta == 0.0) return raw;
  return raw - beta * (sequence_logprob(params, prompt, completion) -
                       sequence_logprob(ref_params, prompt, completion));
}

namespace {

// The completion steps whose probability defines p(y|x): the sampled body
// plus the terminating <eos> when one was drawn.
std::vector<std::size_t> completion_steps(const SampleResult& sample) {
  std::vector<std::size_t> steps = sample.tokens;
  if (sample.ended_with_eos) steps.push_back(kEosId);
  return steps;
}

}  // namespace

std::pair<Gradient, RlooDiagnostics> rloo_gradient(
    const ToyPolicyParams& params, const ToyPolicyParams& ref_params,
    const RewardProvider& reward, const std::string& prompt, int k,
    double beta, std::mt19937_64& rng, std::size_t max_completion_len) {
  if (k < 2) throw ValidationError("rloo needs k >= 2");
  std::vector<SampleResult> samples;
  samples.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    samples.push_back(toy_sample(params, prompt, max_completion_len, rng));
  }
  bool any_steps = false;
  for (const auto& s : samples) {
    if (!completion_steps(s).empty()) any_steps = true;
  }
  if (!any_steps) {
    throw ValidationError("all rloo samples are empty for prompt '" + prompt +
                          "'");
  }

  RlooDiagnostics diag;
  auto prompt_tokens = toy_tokenize(params, prompt);
  for (const auto& s : samples) {
    const auto steps = completion_steps(s);
    const double lp = toy_sequence_logprob(params, prompt_tokens, steps);
    const double lp_ref =
        toy_sequence_logprob(ref_params, prompt_tokens, steps);
    diag.rewards.push_back(reward.score(prompt, s.text) -
                           beta * (lp - lp_ref));
  }
  double total = 0.0;
  for (double r : diag.rewards) total += r;
  diag.mean_reward = total / static_cast<double>(k);
  for (int i = 0; i < k; ++i) {
    const double others =
        (total - diag.rewards[static_cast<std::size_t>(i)]) /
        static_cast<double>(k - 1);
    diag.advantages.push_back(diag.rewards[static_cast<std::size_t>(i)] -
                              others);
    diag.advantage_sum += diag.advantages.back();
  }

  Gradient grad(params.logits.size(), 0.0);
  const double inv_k = 1.0 / static_cast<double>(k);
  for (int i = 0; i < k; ++i) {
    const auto steps = completion_steps(samples[static_cast<std::size_t>(i)]);
    if (steps.empty()) continue;
    accumulate(grad, toy_logprob_grad(params, prompt_tokens, steps),
               diag.advantages[static_cast<std::size_t>(i)] * inv_k);
  }
  return {std::move(grad), std::move(diag)};
}

std::pair<Gradient, RlooDiagnostics> rloo_gradient(
    const ToyPolicyParams& params, const ToyPolicyParams& ref_params,
    const RewardProvider& reward, const std::string& prompt, int k,
    double beta, std::uint64_t seed, std::size_t max_completion_len) {
  std::mt19937_64 rng(seed);
  return rloo_gradient(params, ref_params, reward, prompt, k, beta, rng,
                       max_completion_len);
}

namespace {

std::string config_to_json(const TrainConfig& config) {
  nlohmann::ordered_json j;
  j["method"] = to_string(config.method);
  j["beta"] = config.beta;
  j["k"] = config.k;
  j["learning_rate"] = config.learning_rate;
  j["epochs"] = config.epochs;
  j["batch_size"] = config.batch_size;
  j["seed"] = config.seed;
  j["max_completion_len"] = config.max_completion_len;
  return j.dump();
}

double preference_margin(const ToyPolicyParams& params,
                         const std::vector<PreferenceExample>& prefs) {
  double sum = 0.0;
  for (const auto& ex : prefs) {
    sum += sequence_logprob(params, ex.prompt, ex.chosen) -
           sequence_logprob(params, ex.prompt, ex.rejected);
  }
  return sum / static_cast<double>(prefs.size());
}

double dataset_objective(const TrainConfig& config,
                         const ToyPolicyParams& params, const TrainData& data,
                         const RewardProvider* reward) {
  switch (config.method) {
    case TrainMethod::sft: {
      double nll = 0.0;
      for (const auto& ex : data.sft) {
        nll -= sequence_logprob(params, ex.prompt, ex.target);
      }
      return -nll / static_cast<double>(data.sft.size());
    }
    case TrainMethod::dpo:
    case TrainMethod::orpo:
      return preference_margin(params, data.prefs);
    case TrainMethod::rloo:
      // Raw-reward sanity value with an evaluation seed decoupled from the
      // training stream.
      return average_reward(params, *reward, data.prompts, 16,
                            config.seed ^ 0x9e3779b97f4a7c15ULL,
                            config.max_completion_len);
  }
  return 0.0;
}

}  // namespace

std::vector<PreferenceExample> load_preference_data(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open preference data: " + path);
  std::vector<PreferenceExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": malformed line: " + e.what());
    }
    PreferenceExample ex;
    for (const char* field : {"prompt", "chosen", "rejected"}) {
      if (!j.contains(field) || !j[field].is_string()) {
        throw ValidationError(path + ":" + std::to_string(lineno) +
                              ": MissingField(" + field + ")");
      }
    }
    ex.prompt = j["prompt"].get<std::string>();
    ex.chosen = j["chosen"].get<std::string>();
    ex.rejected = j["rejected"].get<std::string>();
    if (ex.prompt.empty() || ex.chosen.empty() || ex.rejected.empty()) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": empty field");
    }
    if (ex.chosen == ex.rejected) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": chosen and rejected are identical");
    }
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw ValidationError(path + ": no preference examples");
  return out;
}

std::vector<SftExample> load_sft_data(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open sft data: " + path);
  std::vector<SftExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": malformed line: " + e.what());
    }
    for (const char* field : {"prompt", "target"}) {
      if (!j.contains(field) || !j[field].is_string()) {
        throw ValidationError(path + ":" + std::to_string(lineno) +
                              ": MissingField(" + field + ")");
      }
    }
    SftExample ex{j["prompt"].get<std::string>(),
                  j["target"].get<std::string>()};
    if (ex.target.empty()) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": empty target");
    }
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw ValidationError(path + ": no sft examples");
  return out;
}

std::vector<std::string> load_prompt_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open prompts: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(line);
  }
  if (out.empty()) throw ValidationError(path + ": no prompts");
  return out;
}

std::string train_log_to_jsonl(const TrainLog& log) {
  std::string out;
  {
    nlohmann::ordered_json j;
    j["type"] = "config";
    j["seed"] = log.seed;
    j["config"] = nlohmann::json::parse(log.config_echo);
    out += j.dump() + "\n";
  }
  for (const auto& step : log.steps) {
    nlohmann::ordered_json j;
    j["type"] = "step";
    j["step"] = step.step;
    j["epoch"] = step.epoch;
    j["loss"] = step.loss;
    j["margin_mean"] = step.margin_mean;
    j["grad_norm"] = step.grad_norm;
    out += j.dump() + "\n";
  }
  {
    nlohmann::ordered_json j;
    j["type"] = "summary";
    j["initial_margin"] = log.initial_margin;
    j["final_margin"] = log.final_margin;
    j["steps"] = log.steps.size();
    out += j.dump() + "\n";
  }
  return out;
}

TrainResult train(const TrainConfig& config, const ToyPolicyParams& init,
                  const TrainData& data, const RewardProvider* reward) {
  config.validate();
  init.validate();
  switch (config.method) {
    case TrainMethod::sft:
      if (data.sft.empty()) throw ValidationError("sft needs {prompt, target} data");
      break;
    case TrainMethod::dpo:
    case TrainMethod::orpo:
      if (data.prefs.empty()) {
        throw ValidationError("preference training needs preference triples");
      }
      break;
    case TrainMethod::rloo:
      if (data.prompts.empty()) throw ValidationError("rloo needs prompts");
      if (reward == nullptr) throw ValidationError("rloo needs a reward provider");
      break;
  }

  TrainResult result;
  result.params = init;
  const ToyPolicyParams ref = init;  // frozen reference snapshot
  result.log.seed = config.seed;
  result.log.config_echo = config_to_json(config);
  result.log.initial_margin =
      dataset_objective(config, result.params, data, reward);

  std::mt19937_64 rng(config.seed);
  const std::size_t n = config.method == TrainMethod::sft ? data.sft.size()
                        : config.method == TrainMethod::rloo
                            ? data.prompts.size()
                            : data.prefs.size();
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t begin = 0; begin < n; begin += batch) {
      const std::size_t end = std::min(n, begin + batch);
      double loss = 0.0;
      double margin = 0.0;
      Gradient grad;
      double direction = -1.0;  // descent

      switch (config.method) {
        case TrainMethod::sft: {
          std::vector<SftExample> slice(data.sft.begin() + begin,
                                        data.sft.begin() + end);
          std::tie(loss, grad) = sft_loss_and_grad(result.params, slice);
          margin = -loss;
          break;
        }
        case TrainMethod::dpo:
        case TrainMethod::orpo: {
          std::vector<PreferenceExample> slice(data.prefs.begin() + begin,
                                               data.prefs.begin() + end);
          margin = preference_margin(result.params, slice);
          if (config.method == TrainMethod::dpo) {
            std::tie(loss, grad) =
                dpo_loss_and_grad(result.params, ref, slice, config.beta);
          } else {
            std::tie(loss, grad) = orpo_loss_and_grad(result.params, slice);
          }
          break;
        }
        case TrainMethod::rloo: {
          direction = 1.0;  // ascent on the reward objective
          grad.assign(result.params.logits.size(), 0.0);
          double mean_reward = 0.0;
          const double inv = 1.0 / static_cast<double>(end - begin);
          for (std::size_t i = begin; i < end; ++i) {
            auto [g, diag] =
                rloo_gradient(result.params, ref, *reward, data.prompts[i],
                              config.k, config.beta, rng,
                              config.max_completion_len);
            accumulate(grad, g, inv);
            mean_reward += diag.mean_reward * inv;
          }
          loss = mean_reward;
          margin = mean_reward;
          break;
        }
      }

      if (!std::isfinite(loss)) {
        throw DivergenceError("non-finite loss at step " +
                              std::to_string(step));
      }
      for (std::size_t i = 0; i < grad.size(); ++i) {
        result.params.logits[i] += direction * config.learning_rate * grad[i];
      }
      result.log.steps.push_back(
          {step, epoch, loss, margin, grad_norm(grad)});
      ++step;
    }
  }
  result.log.final_margin =
      dataset_objective(config, result.params, data, reward);
  return result;
}

double average_reward(const ToyPolicyParams& params,
                      const RewardProvider& reward,
                      const std::vector<std::string>& prompts, int n,
                      std::uint64_t seed, std::size_t max_len) {
  if (n < 1) throw ValidationError("average_reward needs n >= 1");
  if (prompts.empty()) throw ValidationError("average_reward needs prompts");
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const std::string& prompt =
        prompts[static_cast<std::size_t>(i) % prompts.size()];
    SampleResult sample = toy_sample(params, prompt, max_len, rng);
    total += reward.score(prompt, sample.text);
  }
  return total / static_cast<double>(n);
}

}  // namespace gp
