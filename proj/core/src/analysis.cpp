#include "guiseprobe/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "guiseprobe/errors.hpp"

namespace gp {
namespace {

std::string format_g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string format_f3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

// Solves a 3x3 linear system by Gaussian elimination with partial pivoting.
std::array<double, 3> solve3(std::array<std::array<double, 4>, 3> m) {
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    }
    std::swap(m[col], m[pivot]);
    if (m[col][col] == 0.0) throw ValidationError("DegenerateFit");
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double factor = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c) m[r][c] -= factor * m[col][c];
    }
  }
  return {m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]};
}

}  // namespace

FitResult quadratic_fit(std::span<const std::pair<double, double>> points) {
  std::set<double> distinct;
  for (const auto& [x, y] : points) distinct.insert(x);
  if (distinct.size() < 3) throw ValidationError("DegenerateFit");

  // Normal equations of the Vandermonde system for y = a x^2 + b x + c.
  double s0 = static_cast<double>(points.size());
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  double t0 = 0, t1 = 0, t2 = 0;
  for (const auto& [x, y] : points) {
    const double x2 = x * x;
    s1 += x;
    s2 += x2;
    s3 += x2 * x;
    s4 += x2 * x2;
    t0 += y;
    t1 += x * y;
    t2 += x2 * y;
  }
  auto [a, b, c] = solve3({{{s4, s3, s2, t2}, {s3, s2, s1, t1}, {s2, s1, s0, t0}}});

  FitResult fit;
  fit.a = a;
  fit.b = b;
  fit.c = c;
  fit.n_points = static_cast<int>(points.size());
  const double y_mean = t0 / s0;
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (const auto& [x, y] : points) {
    const double predicted = a * x * x + b * x + c;
    ss_res += (y - predicted) * (y - predicted);
    ss_tot += (y - y_mean) * (y - y_mean);
  }
  fit.r_squared = ss_tot > 0.0 ? std::max(0.0, 1.0 - ss_res / ss_tot) : 1.0;
  return fit;
}

std::vector<std::pair<double, double>> fit_curve(const FitResult& fit,
                                                 double x_min, double x_max,
                                                 int n) {
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x =
        n == 1 ? x_min
               : x_min + (x_max - x_min) * static_cast<double>(i) /
                             static_cast<double>(n - 1);
    out.emplace_back(x, fit.a * x * x + fit.b * x + fit.c);
  }
  return out;
}

DeltaSummary delta_stats(const std::map<std::string, double>& pre,
                         const std::map<std::string, double>& post) {
  if (pre.size() != post.size()) {
    throw ValidationError("report mismatch: different attribute counts");
  }
  DeltaSummary summary;
  for (const auto& [name, before] : pre) {
    auto it = post.find(name);
    if (it == post.end()) {
      throw ValidationError("report mismatch: attribute '" + name +
                            "' missing from one report");
    }
    summary.deltas.emplace_back(name, it->second - before);
  }
  summary.n = static_cast<int>(summary.deltas.size());
  double sum = 0.0;
  for (const auto& [name, d] : summary.deltas) sum += d;
  summary.mean = sum / static_cast<double>(summary.n);
  if (summary.n > 1) {
    double ss = 0.0;
    for (const auto& [name, d] : summary.deltas) {
      ss += (d - summary.mean) * (d - summary.mean);
    }
    summary.variance = ss / static_cast<double>(summary.n - 1);
    summary.stddev = std::sqrt(summary.variance);
  }
  return summary;
}

DeltaSummary delta_stats(const AssociationReport& pre,
                         const AssociationReport& post) {
  if (pre.setting != post.setting) {
    throw ValidationError("report mismatch: settings differ");
  }
  if (pre.task != post.task) {
    throw ValidationError("report mismatch: tasks differ");
  }
  return delta_stats(pre.final_scores, post.final_scores);
}

std::string format_mean_std(double mean, double stddev) {
  return format_f3(mean) + " ± " + format_f3(stddev);
}

FavorabilitySummary top_k_favorability(const AssociationReport& report,
                                       const AttributeSet& attributes,
                                       int k) {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (static_cast<std::size_t>(k) > attributes.attributes.size()) {
    throw ValidationError("k exceeds attribute count");
  }
  struct Entry {
    std::string name;
    double rating;
    double score;
  };
  std::vector<Entry> entries;
  for (const auto& attr : attributes.attributes) {
    auto it = report.final_scores.find(attr.name);
    if (it == report.final_scores.end()) {
      throw ValidationError("report has no score for attribute '" + attr.name +
                            "'");
    }
    entries.push_back({attr.name, attr.rating, it->second});
  }

  FavorabilitySummary summary;
  summary.k = k;
  auto take = [&](bool largest) {
    std::vector<Entry> sorted = entries;
    std::sort(sorted.begin(), sorted.end(), [&](const Entry& l, const Entry& r) {
      if (l.score != r.score) return largest ? l.score > r.score : l.score < r.score;
      return l.name < r.name;
    });
    double sum = 0.0;
    std::vector<std::string> names;
    for (int i = 0; i < k; ++i) {
      sum += sorted[static_cast<std::size_t>(i)].rating;
      names.push_back(sorted[static_cast<std::size_t>(i)].name);
    }
    return std::make_pair(sum / static_cast<double>(k), names);
  };
  std::tie(summary.aae_top_avg, summary.aae_top) = take(true);
  std::tie(summary.sae_top_avg, summary.sae_top) = take(false);
  return summary;
}

BucketSummary bucket_averages(const std::map<std::string, double>& finals,
                              const AttributeSet& attributes) {
  const std::size_t n = attributes.attributes.size();
  if (n < 3) throw ValidationError("bucket averages need >= 3 attributes");
  struct Entry {
    std::string name;
    double rating;
    double score;
  };
  std::vector<Entry> entries;
  for (const auto& attr : attributes.attributes) {
    auto it = finals.find(attr.name);
    if (it == finals.end()) {
      throw ValidationError("no score for attribute '" + attr.name + "'");
    }
    entries.push_back({attr.name, attr.rating, it->second});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& l, const Entry& r) {
    if (l.rating != r.rating) return l.rating < r.rating;
    return l.name < r.name;
  });

  // Rank terciles; the remainder goes to the lower buckets first.
  const std::size_t base = n / 3;
  const std::size_t rem = n % 3;
  const std::size_t low_n = base + (rem > 0 ? 1 : 0);
  const std::size_t mid_n = base + (rem > 1 ? 1 : 0);
  const std::size_t high_n = base;

  auto bucket_mean = [&](std::size_t begin, std::size_t count) {
    double sum = 0.0;
    for (std::size_t i = begin; i < begin + count; ++i) sum += entries[i].score;
    return sum / static_cast<double>(count);
  };
  BucketSummary summary;
  summary.low_count = static_cast<int>(low_n);
  summary.mid_count = static_cast<int>(mid_n);
  summary.high_count = static_cast<int>(high_n);
  summary.low_mean = bucket_mean(0, low_n);
  summary.mid_mean = bucket_mean(low_n, mid_n);
  summary.high_mean = bucket_mean(low_n + mid_n, high_n);
  summary.low_boundary = entries[low_n - 1].rating;
  summary.mid_boundary = entries[low_n + mid_n - 1].rating;
  return summary;
}

BucketSummary bucket_averages(const AssociationReport& report,
                              const AttributeSet& attributes) {
  return bucket_averages(report.final_scores, attributes);
}

std::map<std::string, double> combined_finals(const AssociationReport& a,
                                              const AssociationReport& b) {
  if (a.final_scores.size() != b.final_scores.size()) {
    throw ValidationError("report mismatch: different attribute counts");
  }
  std::map<std::string, double> out;
  for (const auto& [name, score] : a.final_scores) {
    auto it = b.final_scores.find(name);
    if (it == b.final_scores.end()) {
      throw ValidationError("report mismatch: attribute '" + name +
                            "' missing from one report");
    }
    out[name] = 0.5 * (score + it->second);
  }
  return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw ValidationError("pearson needs two equal-length series of >= 2");
  }
  const double n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= n;
  mean_b /= n;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) {
    throw ValidationError("UndefinedCorrelation");
  }
  return cov / std::sqrt(var_a * var_b);
}

std::string fit_to_json(const FitResult& fit) {
  nlohmann::ordered_json j;
  j["a"] = fit.a;
  j["b"] = fit.b;
  j["c"] = fit.c;
  j["r_squared"] = fit.r_squared;
  j["n_points"] = fit.n_points;
  return j.dump(2) + "\n";
}

std::string delta_to_json(const DeltaSummary& summary) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json deltas;
  for (const auto& [name, d] : summary.deltas) deltas[name] = d;
  j["deltas"] = std::move(deltas);
  j["mean"] = summary.mean;
  j["stddev"] = summary.stddev;
  j["variance"] = summary.variance;
  j["n"] = summary.n;
  j["rendered"] = format_mean_std(summary.mean, summary.stddev);
  return j.dump(2) + "\n";
}

std::string topk_to_json(const FavorabilitySummary& summary) {
  nlohmann::ordered_json j;
  j["k"] = summary.k;
  j["aae_top_avg"] = summary.aae_top_avg;
  j["sae_top_avg"] = summary.sae_top_avg;
  j["aae_top"] = summary.aae_top;
  j["sae_top"] = summary.sae_top;
  return j.dump(2) + "\n";
}

std::string buckets_to_json(const BucketSummary& summary) {
  nlohmann::ordered_json j;
  j["boundaries"] = {{"low_max", summary.low_boundary},
                     {"mid_max", summary.mid_boundary}};
  j["means"] = {{"low", summary.low_mean},
                {"mid", summary.mid_mean},
                {"high", summary.high_mean}};
  j["counts"] = {{"low", summary.low_count},
                 {"mid", summary.mid_count},
                 {"high", summary.high_count}};
  return j.dump(2) + "\n";
}

std::string fit_to_csv(const FitResult& fit) {
  return "a,b,c,r_squared,n_points\n" + format_g6(fit.a) + ',' +
         format_g6(fit.b) + ',' + format_g6(fit.c) + ',' +
         format_g6(fit.r_squared) + ',' + std::to_string(fit.n_points) + '\n';
}

std::string delta_to_csv(const DeltaSummary& summary) {
  std::string out = "attribute,delta\n";
  for (const auto& [name, d] : summary.deltas) {
    out += name + ',' + format_g6(d) + '\n';
  }
  out += "mean," + format_g6(summary.mean) + '\n';
  out += "stddev," + format_g6(summary.stddev) + '\n';
  return out;
}

std::string topk_to_csv(const FavorabilitySummary& summary) {
  std::string out = "side,avg_rating,members\n";
  auto join = [](const std::vector<std::string>& names) {
    std::string s;
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (i > 0) s += ';';
      s += names[i];
    }
    return s;
  };
  out += "aae," + format_g6(summary.aae_top_avg) + ',' +
         join(summary.aae_top) + '\n';
  out += "sae," + format_g6(summary.sae_top_avg) + ',' +
         join(summary.sae_top) + '\n';
  return out;
}

std::string buckets_to_csv(const BucketSummary& summary) {
  std::string out = "bucket,mean_score,count,max_rating\n";
  out += "low," + format_g6(summary.low_mean) + ',' +
         std::to_string(summary.low_count) + ',' +
         format_g6(summary.low_boundary) + '\n';
  out += "mid," + format_g6(summary.mid_mean) + ',' +
         std::to_string(summary.mid_count) + ',' +
         format_g6(summary.mid_boundary) + '\n';
  out += "high," + format_g6(summary.high_mean) + ',' +
         std::to_string(summary.high_count) + ",\n";
  return out;
}

std::string trend_plotdata_csv(
    std::span<const std::pair<double, double>> points, const FitResult& fit) {
  double x_min = points.front().first;
  double x_max = points.front().first;
  for (const auto& [x, y] : points) {
    x_min = std::min(x_min, x);
    x_max = std::max(x_max, x);
  }
  std::string out = "series,x,y\n";
  for (const auto& [x, y] : points) {
    out += "point," + format_g6(x) + ',' + format_g6(y) + '\n';
  }
  for (const auto& [x, y] : fit_curve(fit, x_min, x_max, 100)) {
    out += "fit," + format_g6(x) + ',' + format_g6(y) + '\n';
  }
  return out;
}

std::vector<std::pair<std::string, double>> deltas_from_json(
    const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed delta JSON: ") + e.what());
  }
  if (!j.contains("deltas") || !j["deltas"].is_object()) {
    throw ValidationError("delta JSON has no 'deltas' object");
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [name, value] : j["deltas"].items()) {
    out.emplace_back(name, value.get<double>());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace gp
