#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>

#include "guiseprobe/errors.hpp"
#include "guiseprobe/version.hpp"
#include "commands.hpp"
#include "run_context.hpp"

namespace {

// Exit codes: 0 ok, 2 validation, 3 provider failure, 4 divergence.
int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const gp::ValidationError& e) {
    std::cerr << "guiseprobe: error: " << e.what() << "\n";
    return 2;
  } catch (const gp::ProviderError& e) {
    std::cerr << "guiseprobe: provider error: " << e.what() << "\n";
    return 3;
  } catch (const gp::DivergenceError& e) {
    std::cerr << "guiseprobe: divergence: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "guiseprobe: unexpected error: " << e.what() << "\n";
    return 1;
  }
}

// Every option the user set, flag-name -> value, echoed into manifests.
std::map<std::string, std::string> effective_config(const CLI::App& app) {
  std::map<std::string, std::string> out;
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->count() == 0) continue;
    std::string joined;
    for (const auto& r : opt->results()) {
      if (!joined.empty()) joined += ',';
      joined += r;
    }
    out[opt->get_name()] = joined.empty() ? "true" : joined;
  }
  for (const CLI::App* sub : app.get_subcommands()) {
    auto nested = effective_config(*sub);
    for (auto& [key, value] : nested) {
      out[sub->get_name() + "." + key] = value;
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"guiseprobe: matched-guise probing and desk-scale preference "
               "optimization"};
  app.set_version_flag("--version", gp::kToolkitVersion);
  app.set_config("--config", "", "key=value config file; flags override it");
  app.require_subcommand(1);

  gptool::ProbeArgs probe;
  CLI::App* probe_cmd =
      app.add_subcommand("probe", "compute association scores");
  probe_cmd->add_option("--provider", probe.provider, "toy|remote|echo")
      ->check(CLI::IsMember({"toy", "remote", "echo"}));
  probe_cmd->add_option("--params", probe.params_path, "toy policy file");
  probe_cmd->add_option("--endpoint", probe.endpoint, "remote endpoint URL");
  probe_cmd->add_option("--model", probe.model, "remote model name");
  probe_cmd->add_option("--setting", probe.setting,
                        "matched|unmatched|overt|mm-overt");
  probe_cmd->add_option("--task", probe.task, "trait|occupation");
  probe_cmd->add_option("--corpus", probe.corpus_path,
                        "matched corpus (JSON-lines with aae/sae)");
  probe_cmd->add_option("--corpus-x", probe.corpus_x, "unmatched X side");
  probe_cmd->add_option("--corpus-y", probe.corpus_y, "unmatched Y side");
  probe_cmd->add_flag("--strict-count", probe.strict_count,
                      "require |X| == |Y| for unmatched corpora");
  probe_cmd->add_option("--identifiers", probe.identifiers,
                        "identifier TSV or 'builtin'");
  probe_cmd->add_option("--media-x", probe.media_x, "X-side media list file");
  probe_cmd->add_option("--media-y", probe.media_y, "Y-side media list file");
  probe_cmd->add_option("--sae-texts", probe.sae_texts,
                        "SAE texts for mm-overt, one per line");
  probe_cmd->add_option("--media-map", probe.media_map,
                        "locator<TAB>token map for the toy backend");
  probe_cmd->add_option("--formats", probe.formats,
                        "builtin:<name> or a format TSV");
  probe_cmd->add_option("--attributes", probe.attributes_path,
                        "attribute TSV (name<TAB>rating)");
  probe_cmd->add_option("--out", probe.out_path, "report JSON path");
  probe_cmd->add_option("--csv", probe.csv_path, "optional CSV flattening");
  probe_cmd->add_option("--cache-dir", probe.cache_dir,
                        "persistent score cache directory");
  probe_cmd->add_option("--concurrency", probe.concurrency,
                        "max concurrent scoring cells");
  probe_cmd->add_option("--separator", probe.separator,
                        "separator joined before the attribute");
  probe_cmd->add_option("--quote-style", probe.quote_style,
                        "none|single|double quoting of the dialogue slot");
  double floor_value = 0.0;
  CLI::Option* floor_opt = probe_cmd->add_option(
      "--floor", floor_value, "clamp logprobs below this value");

  gptool::TrainArgs train;
  CLI::App* train_cmd =
      app.add_subcommand("train", "desk-scale preference optimization");
  train_cmd->add_option("--method", train.method, "sft|dpo|orpo|rloo");
  train_cmd->add_option("--data", train.data_path,
                        "sft/preference JSON-lines or rloo prompt lines");
  train_cmd->add_option("--beta", train.beta, "DPO/RLOO beta");
  train_cmd->add_option("--k", train.k, "RLOO sample count");
  train_cmd->add_option("--lr", train.lr, "learning rate");
  train_cmd->add_option("--epochs", train.epochs, "epochs");
  train_cmd->add_option("--batch-size", train.batch_size, "batch size");
  train_cmd->add_option("--seed", train.seed, "PRNG seed");
  train_cmd->add_option("--max-len", train.max_len,
                        "max sampled completion length (rloo)");
  train_cmd->add_option("--reward", train.reward,
                        "rloo reward: length or table:<file>");
  train_cmd->add_option("--init", train.init,
                        "initial params file or random:<V>,<m>");
  train_cmd->add_option("--out", train.out_path, "trained params path");
  train_cmd->add_option("--log", train.log_path,
                        "train log path (default <out>.log.jsonl)");

  gptool::AnalyzeArgs analyze;
  CLI::App* analyze_cmd =
      app.add_subcommand("analyze", "turn reports into summaries");
  analyze_cmd->require_subcommand(1);
  CLI::App* trend = analyze_cmd->add_subcommand(
      "trend", "quadratic favorability/prestige trend fit");
  trend->add_option("--report", analyze.report_path)->required();
  trend->add_option("--ratings", analyze.ratings_path,
                    "rating TSV override (defaults to the report's)");
  trend->add_option("--out", analyze.out_prefix, "output prefix")->required();
  CLI::App* topk =
      analyze_cmd->add_subcommand("topk", "top-k favorability averages");
  topk->add_option("--report", analyze.report_path)->required();
  topk->add_option("--ratings", analyze.ratings_path);
  topk->add_option("--k", analyze.k, "k (default 5)");
  topk->add_option("--out", analyze.out_prefix)->required();
  CLI::App* buckets = analyze_cmd->add_subcommand(
      "buckets", "low/neutral/high rating-bucket averages");
  buckets->add_option("--report", analyze.report_path)->required();
  buckets->add_option("--ratings", analyze.ratings_path);
  buckets->add_option("--combine", analyze.combine_path,
                      "average with a second report (matched+unmatched)");
  buckets->add_option("--out", analyze.out_prefix)->required();
  CLI::App* delta = analyze_cmd->add_subcommand(
      "delta", "change in association scores between two reports");
  delta->add_option("--pre", analyze.pre_path)->required();
  delta->add_option("--post", analyze.post_path)->required();
  delta->add_option("--out", analyze.out_prefix)->required();
  CLI::App* corr = analyze_cmd->add_subcommand(
      "corr", "Pearson correlation between two delta files");
  corr->add_option("--delta-a", analyze.delta_a)->required();
  corr->add_option("--delta-b", analyze.delta_b)->required();
  corr->add_option("--out", analyze.out_prefix, "optional output prefix");

  gptool::CompareArgs compare;
  CLI::App* compare_cmd = app.add_subcommand(
      "compare", "combined table of reports against a baseline");
  compare_cmd->add_option("--baseline", compare.baseline_path)->required();
  compare_cmd->add_option("reports", compare.report_paths, "report files")
      ->required();
  compare_cmd->add_option("--labels", compare.labels,
                          "row labels (default: file stems)");
  compare_cmd->add_option("--out", compare.out_prefix)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (floor_opt->count() > 0) probe.floor = floor_value;

  gptool::RunContext ctx(argc, argv);
  ctx.set_config(effective_config(app));

  return run_guarded([&]() -> int {
    if (probe_cmd->parsed()) return gptool::cmd_probe(probe, ctx);
    if (train_cmd->parsed()) {
      ctx.set_seed(train.seed);
      return gptool::cmd_train(train, ctx);
    }
    if (analyze_cmd->parsed()) {
      for (CLI::App* sub : {trend, topk, buckets, delta, corr}) {
        if (sub->parsed()) analyze.subcommand = sub->get_name();
      }
      return gptool::cmd_analyze(analyze, ctx);
    }
    if (compare_cmd->parsed()) return gptool::cmd_compare(compare, ctx);
    std::cerr << "guiseprobe: no command\n";
    return 2;
  });
}
