#include <iostream>

#include "guiseprobe/analysis.hpp"
#include "guiseprobe/errors.hpp"
#include "guiseprobe/fsutil.hpp"
#include "guiseprobe/probing.hpp"
#include "commands.hpp"

namespace gptool {
namespace {

gp::AssociationReport load(const std::string& path, RunContext& ctx) {
  ctx.record_input(path);
  return gp::load_report(path);
}

// Ratings come from the report itself unless a TSV override is given.
gp::AttributeSet ratings_for(const gp::AssociationReport& report,
                             const std::string& override_path,
                             RunContext& ctx) {
  if (!override_path.empty()) {
    ctx.record_input(override_path);
    return gp::load_attribute_set(override_path, report.task);
  }
  gp::AttributeSet set;
  set.kind = report.task;
  set.attributes = report.attributes;
  set.digest = report.attribute_digest;
  return set;
}

std::vector<std::pair<double, double>> scatter(
    const gp::AssociationReport& report, const gp::AttributeSet& attrs) {
  std::vector<std::pair<double, double>> points;
  for (const auto& attr : attrs.attributes) {
    auto it = report.final_scores.find(attr.name);
    if (it == report.final_scores.end()) {
      throw gp::ValidationError("report has no score for attribute '" +
                                attr.name + "'");
    }
    points.emplace_back(attr.rating, it->second);
  }
  return points;
}

}  // namespace

int cmd_analyze(const AnalyzeArgs& args, RunContext& ctx) {
  std::vector<std::string> outputs;

  if (args.subcommand == "trend") {
    gp::AssociationReport report = load(args.report_path, ctx);
    gp::AttributeSet attrs = ratings_for(report, args.ratings_path, ctx);
    auto points = scatter(report, attrs);
    gp::FitResult fit = gp::quadratic_fit(points);
    gp::write_file_atomic(args.out_prefix + ".json", gp::fit_to_json(fit));
    gp::write_file_atomic(args.out_prefix + ".csv", gp::fit_to_csv(fit));
    gp::write_file_atomic(args.out_prefix + "_plotdata.csv",
                          gp::trend_plotdata_csv(points, fit));
    outputs = {args.out_prefix + ".json", args.out_prefix + ".csv",
               args.out_prefix + "_plotdata.csv"};
    std::cout << "a=" << fit.a << " b=" << fit.b << " c=" << fit.c
              << " r2=" << fit.r_squared << "\n";
  } else if (args.subcommand == "topk") {
    gp::AssociationReport report = load(args.report_path, ctx);
    gp::AttributeSet attrs = ratings_for(report, args.ratings_path, ctx);
    gp::FavorabilitySummary summary =
        gp::top_k_favorability(report, attrs, args.k);
    gp::write_file_atomic(args.out_prefix + ".json",
                          gp::topk_to_json(summary));
    gp::write_file_atomic(args.out_prefix + ".csv", gp::topk_to_csv(summary));
    outputs = {args.out_prefix + ".json", args.out_prefix + ".csv"};
    std::cout << "aae_top_avg=" << summary.aae_top_avg
              << " sae_top_avg=" << summary.sae_top_avg << "\n";
  } else if (args.subcommand == "buckets") {
    gp::AssociationReport report = load(args.report_path, ctx);
    gp::AttributeSet attrs = ratings_for(report, args.ratings_path, ctx);
    gp::BucketSummary summary;
    if (!args.combine_path.empty()) {
      gp::AssociationReport other = load(args.combine_path, ctx);
      summary = gp::bucket_averages(gp::combined_finals(report, other), attrs);
    } else {
      summary = gp::bucket_averages(report, attrs);
    }
    gp::write_file_atomic(args.out_prefix + ".json",
                          gp::buckets_to_json(summary));
    gp::write_file_atomic(args.out_prefix + ".csv",
                          gp::buckets_to_csv(summary));
    outputs = {args.out_prefix + ".json", args.out_prefix + ".csv"};
    std::cout << "low=" << summary.low_mean << " mid=" << summary.mid_mean
              << " high=" << summary.high_mean << "\n";
  } else if (args.subcommand == "delta") {
    gp::AssociationReport pre = load(args.pre_path, ctx);
    gp::AssociationReport post = load(args.post_path, ctx);
    gp::DeltaSummary summary = gp::delta_stats(pre, post);
    gp::write_file_atomic(args.out_prefix + ".json",
                          gp::delta_to_json(summary));
    gp::write_file_atomic(args.out_prefix + ".csv", gp::delta_to_csv(summary));
    outputs = {args.out_prefix + ".json", args.out_prefix + ".csv"};
    std::cout << gp::format_mean_std(summary.mean, summary.stddev) << "\n";
  } else if (args.subcommand == "corr") {
    ctx.record_input(args.delta_a);
    ctx.record_input(args.delta_b);
    auto a = gp::deltas_from_json(gp::read_file(args.delta_a));
    auto b = gp::deltas_from_json(gp::read_file(args.delta_b));
    if (a.size() != b.size()) {
      throw gp::ValidationError("delta files cover different attribute sets");
    }
    std::vector<double> va, vb;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].first != b[i].first) {
        throw gp::ValidationError("delta files cover different attribute sets");
      }
      va.push_back(a[i].second);
      vb.push_back(b[i].second);
    }
    const double r = gp::pearson(va, vb);
    std::cout << r << "\n";
    if (!args.out_prefix.empty()) {
      gp::write_file_atomic(args.out_prefix + ".json",
                            "{\n  \"pearson_r\": " + std::to_string(r) +
                                ",\n  \"n\": " + std::to_string(va.size()) +
                                "\n}\n");
      outputs = {args.out_prefix + ".json"};
    }
  } else {
    throw gp::ValidationError("unknown analyze subcommand: " + args.subcommand);
  }

  if (!outputs.empty()) ctx.write_manifests(outputs);
  return 0;
}

}  // namespace gptool
