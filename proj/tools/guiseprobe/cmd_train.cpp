#include <iostream>
#include <memory>

#include "guiseprobe/errors.hpp"
#include "guiseprobe/fsutil.hpp"
#include "guiseprobe/prefopt.hpp"
#include "guiseprobe/toy_policy.hpp"
#include "commands.hpp"

namespace gptool {
namespace {

gp::ToyPolicyParams make_init(const std::string& spec, std::uint64_t seed,
                              RunContext& ctx) {
  if (spec.rfind("random:", 0) == 0) {
    const std::string dims = spec.substr(7);
    const std::size_t comma = dims.find(',');
    if (comma == std::string::npos) {
      throw gp::ValidationError("--init random takes 'random:<V>,<m>'");
    }
    try {
      const std::size_t v = std::stoul(dims.substr(0, comma));
      const int m = std::stoi(dims.substr(comma + 1));
      return gp::ToyPolicyParams::random(v, m, seed);
    } catch (const std::exception&) {
      throw gp::ValidationError("--init random takes 'random:<V>,<m>'");
    }
  }
  ctx.record_input(spec);
  return gp::load_toy_policy(spec);
}

std::unique_ptr<gp::RewardProvider> make_reward(const std::string& spec,
                                                RunContext& ctx) {
  if (spec == "length") return std::make_unique<gp::LengthReward>();
  if (spec.rfind("table:", 0) == 0) {
    const std::string path = spec.substr(6);
    ctx.record_input(path);
    return std::make_unique<gp::KeywordTableReward>(
        gp::KeywordTableReward::from_file(path));
  }
  throw gp::ValidationError("--reward takes 'length' or 'table:<file>'");
}

}  // namespace

int cmd_train(const TrainArgs& args, RunContext& ctx) {
  if (args.data_path.empty()) throw gp::ValidationError("--data is required");
  if (args.out_path.empty()) throw gp::ValidationError("--out is required");

  gp::TrainConfig config;
  config.method = gp::train_method_from_string(args.method);
  config.beta = args.beta;
  config.k = args.k;
  config.learning_rate = args.lr;
  config.epochs = args.epochs;
  config.batch_size = args.batch_size;
  config.seed = args.seed;
  config.max_completion_len = args.max_len;
  config.validate();
  ctx.set_seed(args.seed);

  gp::TrainData data;
  ctx.record_input(args.data_path);
  switch (config.method) {
    case gp::TrainMethod::sft:
      data.sft = gp::load_sft_data(args.data_path);
      break;
    case gp::TrainMethod::dpo:
    case gp::TrainMethod::orpo:
      data.prefs = gp::load_preference_data(args.data_path);
      break;
    case gp::TrainMethod::rloo:
      data.prompts = gp::load_prompt_lines(args.data_path);
      break;
  }

  std::unique_ptr<gp::RewardProvider> reward;
  if (config.method == gp::TrainMethod::rloo) {
    if (args.reward.empty()) {
      throw gp::ValidationError("--reward is required for rloo");
    }
    reward = make_reward(args.reward, ctx);
  } else if (!args.reward.empty()) {
    throw gp::ValidationError("--reward only applies to rloo");
  }

  gp::ToyPolicyParams init = make_init(args.init, args.seed, ctx);
  gp::TrainResult result = train(config, init, data, reward.get());

  gp::save_toy_policy(result.params, args.out_path);
  const std::string log_path =
      args.log_path.empty() ? args.out_path + ".log.jsonl" : args.log_path;
  gp::write_file_atomic(log_path, gp::train_log_to_jsonl(result.log));
  ctx.write_manifests({args.out_path, log_path});

  std::cerr << "guiseprobe: " << args.method << " finished ("
            << result.log.steps.size() << " steps); margin "
            << result.log.initial_margin << " -> " << result.log.final_margin
            << "\n";
  return 0;
}

}  // namespace gptool
