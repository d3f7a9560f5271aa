#include <cstdio>
#include <filesystem>
#include <iostream>

#include <nlohmann/json.hpp>

#include "guiseprobe/analysis.hpp"
#include "guiseprobe/errors.hpp"
#include "guiseprobe/fsutil.hpp"
#include "guiseprobe/probing.hpp"
#include "commands.hpp"

namespace gptool {
namespace {

std::string g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double mean_final(const gp::AssociationReport& report) {
  double sum = 0.0;
  for (const auto& [name, score] : report.final_scores) sum += score;
  return sum / static_cast<double>(report.final_scores.size());
}

}  // namespace

int cmd_compare(const CompareArgs& args, RunContext& ctx) {
  if (args.baseline_path.empty()) {
    throw gp::ValidationError("--baseline is required");
  }
  if (args.report_paths.empty()) {
    throw gp::ValidationError("at least one report is required");
  }
  if (!args.labels.empty() && args.labels.size() != args.report_paths.size()) {
    throw gp::ValidationError("--labels must match the report count");
  }

  ctx.record_input(args.baseline_path);
  gp::AssociationReport baseline = gp::load_report(args.baseline_path);

  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  std::string csv = "model,setting,task,mean_final,delta_mean,delta_std,delta\n";

  auto add_row = [&](const std::string& label,
                     const gp::AssociationReport& report, bool is_baseline) {
    nlohmann::ordered_json row;
    row["model"] = label;
    row["setting"] = gp::to_string(report.setting);
    row["task"] = gp::to_string(report.task);
    row["mean_final"] = mean_final(report);
    if (is_baseline) {
      row["delta_vs_baseline"] = nullptr;
      csv += label + ',' + gp::to_string(report.setting) + ',' +
             gp::to_string(report.task) + ',' + g6(mean_final(report)) +
             ",,,\n";
    } else {
      gp::DeltaSummary delta = gp::delta_stats(baseline, report);
      row["delta_vs_baseline"] = {
          {"mean", delta.mean},
          {"stddev", delta.stddev},
          {"rendered", gp::format_mean_std(delta.mean, delta.stddev)}};
      csv += label + ',' + gp::to_string(report.setting) + ',' +
             gp::to_string(report.task) + ',' + g6(mean_final(report)) + ',' +
             g6(delta.mean) + ',' + g6(delta.stddev) + ",\"" +
             gp::format_mean_std(delta.mean, delta.stddev) + "\"\n";
    }
    rows.push_back(std::move(row));
  };

  add_row("baseline", baseline, true);
  for (std::size_t i = 0; i < args.report_paths.size(); ++i) {
    const std::string& path = args.report_paths[i];
    ctx.record_input(path);
    gp::AssociationReport report = gp::load_report(path);
    const std::string label =
        args.labels.empty() ? std::filesystem::path(path).stem().string()
                            : args.labels[i];
    add_row(label, report, false);
  }

  nlohmann::ordered_json j;
  j["baseline"] = args.baseline_path;
  j["rows"] = std::move(rows);
  gp::write_file_atomic(args.out_prefix + ".json", j.dump(2) + "\n");
  gp::write_file_atomic(args.out_prefix + ".csv", csv);
  ctx.write_manifests({args.out_prefix + ".json", args.out_prefix + ".csv"});
  std::cout << csv;
  return 0;
}

}  // namespace gptool
