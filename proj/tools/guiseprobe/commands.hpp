#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "run_context.hpp"

namespace gptool {

struct ProbeArgs {
  std::string provider = "toy";  // toy | remote | echo
  std::string params_path;       // toy policy file
  std::string endpoint;
  std::string model = "default";
  std::string setting = "matched";
  std::string task = "trait";
  std::string corpus_path;
  std::string corpus_x, corpus_y;
  bool strict_count = false;
  std::string identifiers = "builtin";
  std::string media_x, media_y, sae_texts, media_map;
  std::string formats = "builtin:covert-trait";
  std::string attributes_path;
  std::string out_path;
  std::string csv_path;
  std::string cache_dir;
  int concurrency = 1;
  std::string separator = " ";
  std::string quote_style = "none";
  std::optional<double> floor;
};

struct TrainArgs {
  std::string method = "dpo";
  std::string data_path;
  double beta = 0.1;
  int k = 4;
  double lr = 0.05;
  int epochs = 1;
  int batch_size = 4;
  std::uint64_t seed = 0;
  std::size_t max_len = 8;
  std::string reward;  // "length" or "table:<file>" (rloo only)
  std::string init = "random:8,1";
  std::string out_path;
  std::string log_path;
};

struct AnalyzeArgs {
  std::string subcommand;  // trend | topk | buckets | delta | corr
  std::string report_path;
  std::string ratings_path;  // optional override of the report's ratings
  std::string combine_path;  // buckets: second report to average in
  std::string pre_path, post_path;
  std::string delta_a, delta_b;
  int k = 5;
  std::string out_prefix;
};

struct CompareArgs {
  std::string baseline_path;
  std::vector<std::string> report_paths;
  std::vector<std::string> labels;
  std::string out_prefix;
};

int cmd_probe(const ProbeArgs& args, RunContext& ctx);
int cmd_train(const TrainArgs& args, RunContext& ctx);
int cmd_analyze(const AnalyzeArgs& args, RunContext& ctx);
int cmd_compare(const CompareArgs& args, RunContext& ctx);

}  // namespace gptool
