#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "guiseprobe/corpus.hpp"
#include "guiseprobe/probing.hpp"

namespace gp {

// Coefficients of y = a x^2 + b x + c fitted by ordinary least squares.
struct FitResult {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double r_squared = 0.0;
  int n_points = 0;
};

// Needs at least 3 distinct x values; throws ValidationError("DegenerateFit")
// otherwise. Exact on noiseless quadratics.
FitResult quadratic_fit(std::span<const std::pair<double, double>> points);

// Evaluates the fitted curve at n evenly spaced x over [x_min, x_max].
std::vector<std::pair<double, double>> fit_curve(const FitResult& fit,
                                                 double x_min, double x_max,
                                                 int n = 100);

struct DeltaSummary {
  std::vector<std::pair<std::string, double>> deltas;  // q_post - q_pre
  double mean = 0.0;
  double stddev = 0.0;    // sample (n-1)
  double variance = 0.0;  // sample
  int n = 0;
};

// Signed per-attribute change between two reports over identical attribute
// sets, settings, and tasks.
DeltaSummary delta_stats(const AssociationReport& pre,
                         const AssociationReport& post);
DeltaSummary delta_stats(const std::map<std::string, double>& pre,
                         const std::map<std::string, double>& post);

// Renders "0.175 ± 0.031" style rows.
std::string format_mean_std(double mean, double stddev);

struct FavorabilitySummary {
  int k = 0;
  double aae_top_avg = 0.0;  // mean rating of the k largest-q attributes
  double sae_top_avg = 0.0;  // mean rating of the k smallest-q attributes
  std::vector<std::string> aae_top;
  std::vector<std::string> sae_top;
};

// Ties in the score ordering break by attribute name ascending.
FavorabilitySummary top_k_favorability(const AssociationReport& report,
                                       const AttributeSet& attributes, int k);

struct BucketSummary {
  // Highest rating inside the low and middle buckets.
  double low_boundary = 0.0;
  double mid_boundary = 0.0;
  double low_mean = 0.0;
  double mid_mean = 0.0;
  double high_mean = 0.0;
  int low_count = 0;
  int mid_count = 0;
  int high_count = 0;
};

// Rank terciles over ratings (remainder assigned low-first); the mean final
// score per bucket.
BucketSummary bucket_averages(const AssociationReport& report,
                              const AttributeSet& attributes);
BucketSummary bucket_averages(const std::map<std::string, double>& finals,
                              const AttributeSet& attributes);

// Per-attribute mean of two reports' final scores (for combining the
// matched and unmatched covert settings).
std::map<std::string, double> combined_finals(const AssociationReport& a,
                                              const AssociationReport& b);

// Sample Pearson correlation; throws ValidationError("UndefinedCorrelation")
// when either side has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

// Serialization of the summaries above, with stable field order.
std::string fit_to_json(const FitResult& fit);
std::string delta_to_json(const DeltaSummary& summary);
std::string topk_to_json(const FavorabilitySummary& summary);
std::string buckets_to_json(const BucketSummary& summary);

std::string fit_to_csv(const FitResult& fit);
std::string delta_to_csv(const DeltaSummary& summary);
std::string topk_to_csv(const FavorabilitySummary& summary);
std::string buckets_to_csv(const BucketSummary& summary);

// Plot-ready data for trend figures: the scatter points plus the fitted
// curve sampled at 100 evenly spaced x. CSV columns: series, x, y.
std::string trend_plotdata_csv(
    std::span<const std::pair<double, double>> points, const FitResult& fit);

// Reads per-attribute deltas back from delta_to_json output (for the
// correlation analysis between two training runs).
std::vector<std::pair<std::string, double>> deltas_from_json(
    const std::string& json_text);

}  // namespace gp
