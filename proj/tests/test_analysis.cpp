#include "guiseprobe/analysis.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "guiseprobe/errors.hpp"
#include "support.hpp"

using namespace gp;

namespace {

AssociationReport report_with(std::vector<std::pair<std::string, double>> finals,
                              ProbeSetting setting = ProbeSetting::matched,
                              AttributeKind task = AttributeKind::trait) {
  AssociationReport r;
  r.setting = setting;
  r.task = task;
  for (const auto& [name, score] : finals) {
    r.attributes.push_back({name, 0.0, task});
    r.final_scores[name] = score;
    r.per_format[name] = {{"f1", score}};
  }
  return r;
}

AttributeSet attrs_with(std::vector<std::pair<std::string, double>> ratings,
                        AttributeKind kind = AttributeKind::trait) {
  AttributeSet set;
  set.kind = kind;
  for (const auto& [name, rating] : ratings) {
    set.attributes.push_back({name, rating, kind});
  }
  return set;
}

}  // namespace

TEST_CASE("quadratic fit") {
  SUBCASE("exact interpolation of y = x^2") {
    std::vector<std::pair<double, double>> pts{
        {-1, 1}, {0, 0}, {1, 1}, {2, 4}};
    FitResult fit = quadratic_fit(pts);
    CHECK(fit.a == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.b == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit.c == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.n_points == 4);
  }
  SUBCASE("constant data collapses to the intercept") {
    std::vector<std::pair<double, double>> pts{{0, 5}, {1, 5}, {2, 5}, {3, 5}};
    FitResult fit = quadratic_fit(pts);
    CHECK(fit.a == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit.b == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit.c == doctest::Approx(5.0).epsilon(1e-12));
  }
  SUBCASE("random instances match the Cramer-rule oracle") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> x_dist(-4.0, 4.0);
    std::uniform_real_distribution<double> y_dist(-10.0, 10.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::pair<double, double>> pts;
      for (int i = 0; i < 20; ++i) pts.emplace_back(x_dist(rng), y_dist(rng));
      FitResult fit = quadratic_fit(pts);
      testutil::OracleFit oracle = testutil::oracle_quadratic_fit(pts);
      CHECK(fit.a == doctest::Approx(oracle.a).epsilon(1e-9));
      CHECK(fit.b == doctest::Approx(oracle.b).epsilon(1e-9));
      CHECK(fit.c == doctest::Approx(oracle.c).epsilon(1e-9));
    }
  }
  SUBCASE("noiseless quadratics are recovered and order-invariant") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> coef(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
      const double a = coef(rng), b = coef(rng), c = coef(rng);
      std::vector<std::pair<double, double>> pts;
      for (int i = 0; i < 12; ++i) {
        const double x = -2.0 + 0.4 * i;
        pts.emplace_back(x, a * x * x + b * x + c);
      }
      FitResult fit = quadratic_fit(pts);
      CHECK(fit.a == doctest::Approx(a).epsilon(1e-9));
      CHECK(fit.b == doctest::Approx(b).epsilon(1e-9));
      CHECK(fit.c == doctest::Approx(c).epsilon(1e-9));
      std::shuffle(pts.begin(), pts.end(), rng);
      FitResult shuffled = quadratic_fit(pts);
      CHECK(shuffled.a == doctest::Approx(fit.a).epsilon(1e-9));
      CHECK(shuffled.b == doctest::Approx(fit.b).epsilon(1e-9));
      CHECK(shuffled.c == doctest::Approx(fit.c).epsilon(1e-9));
    }
  }
  SUBCASE("fewer than 3 distinct x values is degenerate") {
    std::vector<std::pair<double, double>> pts{{1, 1}, {1, 2}, {2, 1}, {2, 2}};
    CHECK_THROWS_WITH_AS(quadratic_fit(pts), doctest::Contains("DegenerateFit"),
                         ValidationError);
  }
}

TEST_CASE("delta stats") {
  SUBCASE("identical reports give zero mean and std") {
    AssociationReport r = report_with({{"a", 0.4}, {"b", -0.2}});
    DeltaSummary d = delta_stats(r, r);
    CHECK(d.mean == 0.0);
    CHECK(d.stddev == 0.0);
    CHECK(d.n == 2);
  }
  SUBCASE("deltas {0.1, 0.3} give mean 0.2 and sample std 0.141421") {
    AssociationReport pre = report_with({{"a", 0.0}, {"b", 0.0}});
    AssociationReport post = report_with({{"a", 0.1}, {"b", 0.3}});
    DeltaSummary d = delta_stats(pre, post);
    CHECK(d.mean == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(d.stddev == doctest::Approx(std::sqrt(0.02)).epsilon(1e-12));
    CHECK(d.stddev == doctest::Approx(0.141421).epsilon(1e-6));
    CHECK(d.variance == doctest::Approx(0.02).epsilon(1e-12));
  }
  SUBCASE("renders the paper-style row") {
    CHECK(format_mean_std(0.175, 0.031) == "0.175 ± 0.031");
    CHECK(format_mean_std(-0.0264, 0.2011) == "-0.026 ± 0.201");
  }
  SUBCASE("direction flip negates deltas and mean, keeps std") {
    AssociationReport pre = report_with({{"a", 0.5}, {"b", 0.1}, {"c", -0.4}});
    AssociationReport post = report_with({{"a", 0.1}, {"b", 0.6}, {"c", 0.0}});
    DeltaSummary fwd = delta_stats(pre, post);
    DeltaSummary rev = delta_stats(post, pre);
    CHECK(fwd.mean == doctest::Approx(-rev.mean).epsilon(1e-12));
    CHECK(fwd.stddev == doctest::Approx(rev.stddev).epsilon(1e-12));
    for (std::size_t i = 0; i < fwd.deltas.size(); ++i) {
      CHECK(fwd.deltas[i].second ==
            doctest::Approx(-rev.deltas[i].second).epsilon(1e-12));
    }
  }
  SUBCASE("mismatched attribute sets are rejected") {
    AssociationReport pre = report_with({{"a", 0.1}, {"b", 0.2}});
    AssociationReport post = report_with({{"a", 0.1}, {"c", 0.2}});
    CHECK_THROWS_AS(delta_stats(pre, post), ValidationError);
  }
  SUBCASE("mismatched settings are rejected") {
    AssociationReport pre = report_with({{"a", 0.1}});
    AssociationReport post = report_with({{"a", 0.2}}, ProbeSetting::overt);
    CHECK_THROWS_AS(delta_stats(pre, post), ValidationError);
  }
}

TEST_CASE("top-k favorability") {
  AttributeSet attrs =
      attrs_with({{"a", 1.0}, {"b", 2.0}, {"c", 3.0}, {"d", 4.0}});
  SUBCASE("spec example: scores 3,2,1,0 with ratings 1,2,3,4 and k=2") {
    AssociationReport r =
        report_with({{"a", 3.0}, {"b", 2.0}, {"c", 1.0}, {"d", 0.0}});
    FavorabilitySummary s = top_k_favorability(r, attrs, 2);
    CHECK(s.aae_top_avg == doctest::Approx(1.5));
    CHECK(s.sae_top_avg == doctest::Approx(3.5));
    CHECK(s.aae_top == std::vector<std::string>{"a", "b"});
    CHECK(s.sae_top == std::vector<std::string>{"d", "c"});
  }
  SUBCASE("ties break by name ascending") {
    AssociationReport r =
        report_with({{"a", 1.0}, {"b", 1.0}, {"c", 1.0}, {"d", 1.0}});
    FavorabilitySummary s = top_k_favorability(r, attrs, 2);
    CHECK(s.aae_top == std::vector<std::string>{"a", "b"});
    CHECK(s.sae_top == std::vector<std::string>{"a", "b"});
  }
  SUBCASE("k equal to n gives the global mean on both sides") {
    AssociationReport r =
        report_with({{"a", 0.5}, {"b", -0.1}, {"c", 0.2}, {"d", 0.9}});
    FavorabilitySummary s = top_k_favorability(r, attrs, 4);
    CHECK(s.aae_top_avg == doctest::Approx(2.5));
    CHECK(s.sae_top_avg == doctest::Approx(2.5));
  }
  SUBCASE("selection is invariant under monotone score transforms") {
    AssociationReport r =
        report_with({{"a", 0.5}, {"b", -0.1}, {"c", 0.2}, {"d", 0.9}});
    AssociationReport t = r;
    for (auto& [name, v] : t.final_scores) v = std::exp(3.0 * v) + 1.0;
    FavorabilitySummary s1 = top_k_favorability(r, attrs, 2);
    FavorabilitySummary s2 = top_k_favorability(t, attrs, 2);
    CHECK(s1.aae_top == s2.aae_top);
    CHECK(s1.sae_top == s2.sae_top);
  }
  SUBCASE("k beyond the attribute count is rejected") {
    AssociationReport r = report_with({{"a", 1.0}});
    CHECK_THROWS_AS(top_k_favorability(r, attrs, 5), ValidationError);
  }
}

TEST_CASE("bucket averages") {
  SUBCASE("six attributes split 2/2/2 with the stated means") {
    AttributeSet attrs = attrs_with({{"a", 1}, {"b", 2}, {"c", 3},
                                     {"d", 4}, {"e", 5}, {"f", 6}});
    AssociationReport r = report_with({{"a", 1}, {"b", 2}, {"c", 3},
                                       {"d", 4}, {"e", 5}, {"f", 6}});
    BucketSummary s = bucket_averages(r, attrs);
    CHECK(s.low_mean == doctest::Approx(1.5));
    CHECK(s.mid_mean == doctest::Approx(3.5));
    CHECK(s.high_mean == doctest::Approx(5.5));
    CHECK(s.low_count == 2);
    CHECK(s.low_boundary == doctest::Approx(2.0));
    CHECK(s.mid_boundary == doctest::Approx(4.0));
  }
  SUBCASE("identical ratings still partition 2/2/2") {
    AttributeSet attrs = attrs_with({{"a", 5}, {"b", 5}, {"c", 5},
                                     {"d", 5}, {"e", 5}, {"f", 5}});
    AssociationReport r = report_with({{"a", 1}, {"b", 2}, {"c", 3},
                                       {"d", 4}, {"e", 5}, {"f", 6}});
    BucketSummary s = bucket_averages(r, attrs);
    CHECK(s.low_count == 2);
    CHECK(s.mid_count == 2);
    CHECK(s.high_count == 2);
    // Rank order falls back to names, so buckets are {a,b}, {c,d}, {e,f}.
    CHECK(s.low_mean == doctest::Approx(1.5));
    CHECK(s.high_mean == doctest::Approx(5.5));
  }
  SUBCASE("seven attributes split 3/2/2") {
    AttributeSet attrs = attrs_with({{"a", 1}, {"b", 2}, {"c", 3}, {"d", 4},
                                     {"e", 5}, {"f", 6}, {"g", 7}});
    AssociationReport r = report_with({{"a", 0}, {"b", 0}, {"c", 0}, {"d", 0},
                                       {"e", 0}, {"f", 0}, {"g", 0}});
    BucketSummary s = bucket_averages(r, attrs);
    CHECK(s.low_count == 3);
    CHECK(s.mid_count == 2);
    CHECK(s.high_count == 2);
  }
  SUBCASE("fewer than three attributes is rejected") {
    AttributeSet attrs = attrs_with({{"a", 1}, {"b", 2}});
    AssociationReport r = report_with({{"a", 0}, {"b", 0}});
    CHECK_THROWS_AS(bucket_averages(r, attrs), ValidationError);
  }
}

TEST_CASE("combined finals average matched and unmatched scores") {
  AssociationReport matched = report_with({{"a", 0.2}, {"b", -0.4}});
  AssociationReport unmatched =
      report_with({{"a", 0.4}, {"b", 0.0}}, ProbeSetting::unmatched);
  auto combined = combined_finals(matched, unmatched);
  CHECK(combined.at("a") == doctest::Approx(0.3));
  CHECK(combined.at("b") == doctest::Approx(-0.2));
}

TEST_CASE("pearson correlation") {
  SUBCASE("identical vectors give 1") {
    std::vector<double> v{0.3, -1.2, 4.5, 2.2};
    CHECK(pearson(v, v) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("negated vectors give -1") {
    std::vector<double> v{0.3, -1.2, 4.5, 2.2};
    std::vector<double> n{-0.3, 1.2, -4.5, -2.2};
    CHECK(pearson(v, n) == doctest::Approx(-1.0).epsilon(1e-12));
  }
  SUBCASE("fixed triple {1,2,3} vs {2,4,7}") {
    // Direct evaluation: centered cross products are 5, variances 2 and
    // 114/9, so r = 5 / sqrt(2 * 114/9) = 15 / sqrt(228).
    std::vector<double> a{1, 2, 3};
    std::vector<double> b{2, 4, 7};
    const double expected = 15.0 / std::sqrt(228.0);
    CHECK(pearson(a, b) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(pearson(a, b) ==
          doctest::Approx(testutil::oracle_pearson(a, b)).epsilon(1e-12));
    CHECK(pearson(a, b) == doctest::Approx(0.993399).epsilon(1e-6));
  }
  SUBCASE("invariant under positive affine transforms") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    std::uniform_real_distribution<double> scale(0.1, 4.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> a, b;
      for (int i = 0; i < 10; ++i) {
        a.push_back(val(rng));
        b.push_back(val(rng));
      }
      const double base = pearson(a, b);
      const double sa = scale(rng), oa = val(rng);
      const double sb = scale(rng), ob = val(rng);
      std::vector<double> a2 = a, b2 = b;
      for (auto& v : a2) v = sa * v + oa;
      for (auto& v : b2) v = sb * v + ob;
      CHECK(pearson(a2, b2) == doctest::Approx(base).epsilon(1e-12));
    }
  }
  SUBCASE("zero variance is undefined") {
    std::vector<double> flat{1.0, 1.0, 1.0};
    std::vector<double> v{1.0, 2.0, 3.0};
    CHECK_THROWS_WITH_AS(pearson(flat, v),
                         doctest::Contains("UndefinedCorrelation"),
                         ValidationError);
  }
}

TEST_CASE("emit round trips and formats") {
  SUBCASE("delta json round-trips the per-attribute deltas exactly") {
    AssociationReport pre = report_with({{"a", 0.123456789012345}, {"b", 0.0}});
    AssociationReport post =
        report_with({{"a", 0.98765432109876}, {"b", -0.5}});
    DeltaSummary d = delta_stats(pre, post);
    auto parsed = deltas_from_json(delta_to_json(d));
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].first == "a");
    CHECK(parsed[0].second == d.deltas[0].second);  // exact
    CHECK(parsed[1].second == d.deltas[1].second);
  }
  SUBCASE("fit csv has a header and one row") {
    FitResult fit{1.5, -2.0, 0.25, 0.99, 12};
    const std::string csv = fit_to_csv(fit);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    CHECK(csv.find("1.5,-2,0.25") != std::string::npos);
  }
  SUBCASE("plotdata contains the points and 100 fitted samples") {
    std::vector<std::pair<double, double>> pts{{0, 0}, {1, 1}, {2, 4}};
    FitResult fit = quadratic_fit(pts);
    const std::string csv = trend_plotdata_csv(pts, fit);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 + 100);
    CHECK(csv.find("series,x,y\n") == 0);
    CHECK(csv.find("point,0,0") != std::string::npos);
    CHECK(csv.find("fit,") != std::string::npos);
  }
}
