#pragma once

// Shared test helpers: stub providers, independent oracles, temp dirs.
// The oracles deliberately re-derive every formula in the plainest way
// possible (raw probabilities, no log-sum-exp, no shared code with the
// library) so they can catch sign and averaging mistakes.

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "guiseprobe/corpus.hpp"
#include "guiseprobe/errors.hpp"
#include "guiseprobe/probing.hpp"
#include "guiseprobe/provider.hpp"
#include "guiseprobe/toy_policy.hpp"

namespace testutil {

// Provider whose scores come from a user function of the full request.
class FnProvider : public gp::Provider {
 public:
  using Fn = std::function<double(const gp::ScoringRequest&)>;

  explicit FnProvider(Fn fn, std::string digest = "stub")
      : fn_(std::move(fn)) {
    id_.kind = gp::BackendKind::toy;
    id_.model = "stub";
    id_.digest = std::move(digest);
  }

  gp::LogProbResult score(const gp::ScoringRequest& request) const override {
    ++calls_;
    const double lp = fn_(request);
    return {lp, {{request.continuation, lp}}};
  }
  const gp::ProviderId& id() const override { return id_; }

  int calls() const { return calls_.load(); }

 private:
  Fn fn_;
  gp::ProviderId id_;
  mutable std::atomic<int> calls_{0};
};

// Counts how many times the wrapped provider is actually consulted.
class CountingProvider : public gp::Provider {
 public:
  explicit CountingProvider(const gp::Provider& inner) : inner_(inner) {}

  gp::LogProbResult score(const gp::ScoringRequest& request) const override {
    ++calls_;
    return inner_.score(request);
  }
  const gp::ProviderId& id() const override { return inner_.id(); }
  int calls() const { return calls_.load(); }

 private:
  const gp::Provider& inner_;
  mutable std::atomic<int> calls_{0};
};

// Keyed stub: probability of an attribute under a rendered prefix.
// Keys are "<prefix>\x1f<continuation>".
class TableProvider : public gp::Provider {
 public:
  TableProvider() {
    id_.kind = gp::BackendKind::toy;
    id_.model = "table-stub";
    id_.digest = "table";
  }

  void set(const std::string& prefix, const std::string& continuation,
           double probability) {
    table_[prefix + '\x1f' + continuation] = std::log(probability);
  }
  void set_logprob(const std::string& prefix, const std::string& continuation,
                   double logprob) {
    table_[prefix + '\x1f' + continuation] = logprob;
  }

  gp::LogProbResult score(const gp::ScoringRequest& request) const override {
    auto it = table_.find(request.prefix + '\x1f' + request.continuation);
    if (it == table_.end()) {
      throw gp::ProviderError("no stub entry for prefix '" + request.prefix +
                              "' continuation '" + request.continuation + "'");
    }
    return {it->second, {{request.continuation, it->second}}};
  }
  const gp::ProviderId& id() const override { return id_; }

 private:
  std::map<std::string, double> table_;
  gp::ProviderId id_;
};

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("guiseprobe_test_" + tag + "_" + std::to_string(::getpid()) +
             "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }
  std::string write(const std::string& name, const std::string& content) const {
    const std::string p = file(name);
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Independent oracles.

// Matched score from raw probabilities: (1/n) sum log(px / py).
inline double oracle_matched(const std::vector<std::pair<double, double>>& p) {
  double sum = 0.0;
  for (const auto& [px, py] : p) sum += std::log(px / py);
  return sum / static_cast<double>(p.size());
}

// Unmatched score from raw probabilities: log(mean px) - log(mean py).
inline double oracle_unmatched(const std::vector<double>& px,
                               const std::vector<double>& py) {
  double mx = 0.0, my = 0.0;
  for (double v : px) mx += v;
  for (double v : py) my += v;
  mx /= static_cast<double>(px.size());
  my /= static_cast<double>(py.size());
  return std::log(mx) - std::log(my);
}

// Stepwise toy walker with naive softmax (exp / sum, no max shift).
inline double oracle_toy_logprob(const gp::ToyPolicyParams& params,
                                 const std::vector<std::size_t>& prefix,
                                 const std::vector<std::size_t>& cont) {
  const std::size_t v = params.vocab.size();
  std::vector<std::size_t> history(static_cast<std::size_t>(params.order),
                                   gp::kBosId);
  auto context_of = [&]() {
    std::size_t ctx = 0;
    for (std::size_t tok : history) ctx = ctx * v + tok;
    return ctx;
  };
  auto push = [&](std::size_t tok) {
    if (params.order == 0) return;
    history.erase(history.begin());
    history.push_back(tok);
  };
  for (std::size_t tok : prefix) push(tok);
  double total = 0.0;
  for (std::size_t tok : cont) {
    const double* row = params.row(context_of());
    double z = 0.0;
    for (std::size_t i = 0; i < v; ++i) z += std::exp(row[i]);
    total += std::log(std::exp(row[tok]) / z);
    push(tok);
  }
  return total;
}

// Central finite differences of f over the logits table.
inline std::vector<double> fd_gradient(
    const gp::ToyPolicyParams& params,
    const std::function<double(const gp::ToyPolicyParams&)>& f,
    double h = 1e-5) {
  std::vector<double> grad(params.logits.size());
  gp::ToyPolicyParams probe = params;
  for (std::size_t i = 0; i < params.logits.size(); ++i) {
    probe.logits[i] = params.logits[i] + h;
    const double up = f(probe);
    probe.logits[i] = params.logits[i] - h;
    const double down = f(probe);
    probe.logits[i] = params.logits[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline double relative_grad_error(const std::vector<double>& analytic,
                                  const std::vector<double>& numeric) {
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    norm += analytic[i] * analytic[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
}

// Quadratic least squares through an explicit Cramer's-rule solve.
struct OracleFit {
  double a, b, c;
};
inline OracleFit oracle_quadratic_fit(
    const std::vector<std::pair<double, double>>& pts) {
  double s0 = static_cast<double>(pts.size());
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0, t0 = 0, t1 = 0, t2 = 0;
  for (auto [x, y] : pts) {
    s1 += x;
    s2 += x * x;
    s3 += x * x * x;
    s4 += x * x * x * x;
    t0 += y;
    t1 += x * y;
    t2 += x * x * y;
  }
  auto det3 = [](double m00, double m01, double m02, double m10, double m11,
                 double m12, double m20, double m21, double m22) {
    return m00 * (m11 * m22 - m12 * m21) - m01 * (m10 * m22 - m12 * m20) +
           m02 * (m10 * m21 - m11 * m20);
  };
  const double d = det3(s4, s3, s2, s3, s2, s1, s2, s1, s0);
  return {det3(t2, s3, s2, t1, s2, s1, t0, s1, s0) / d,
          det3(s4, t2, s2, s3, t1, s1, s2, t0, s0) / d,
          det3(s4, s3, t2, s3, s2, t1, s2, s1, t0) / d};
}

inline double oracle_pearson(const std::vector<double>& a,
                             const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

// ---------------------------------------------------------------------------
// Randomized probing instances on a stub provider.

struct StubInstance {
  gp::MatchedCorpus matched;
  gp::UnmatchedCorpus unmatched;
  gp::FormatSet formats;
  std::string attribute = "kind";
  TableProvider provider;
  // Raw probabilities per format: aligned with the corpus sample order.
  std::vector<std::vector<std::pair<double, double>>> matched_probs;
  std::vector<std::vector<double>> unmatched_px, unmatched_py;
};

inline StubInstance make_stub_instance(std::mt19937_64& rng,
                                       std::size_t max_samples = 5,
                                       std::size_t max_formats = 3) {
  std::uniform_int_distribution<std::size_t> n_dist(1, max_samples);
  std::uniform_int_distribution<std::size_t> f_dist(1, max_formats);
  std::uniform_real_distribution<double> p_dist(0.05, 0.95);

  StubInstance s;
  const std::size_t n = n_dist(rng);
  const std::size_t nf = f_dist(rng);
  s.formats.task = gp::AttributeKind::trait;
  s.formats.setting = gp::FormatSetting::covert;
  for (std::size_t f = 0; f < nf; ++f) {
    s.formats.formats.push_back(
        {"f" + std::to_string(f),
         "fmt" + std::to_string(f) + " says {x} so they are"});
  }
  for (std::size_t i = 0; i < n; ++i) {
    s.matched.pairs.push_back(
        {"x sample " + std::to_string(i), "y sample " + std::to_string(i)});
    s.unmatched.x_texts.push_back(s.matched.pairs.back().aae_text);
    s.unmatched.y_texts.push_back(s.matched.pairs.back().sae_text);
  }
  const std::string continuation = " " + s.attribute;
  s.matched_probs.resize(nf);
  s.unmatched_px.resize(nf);
  s.unmatched_py.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t i = 0; i < n; ++i) {
      const double px = p_dist(rng);
      const double py = p_dist(rng);
      s.matched_probs[f].emplace_back(px, py);
      s.unmatched_px[f].push_back(px);
      s.unmatched_py[f].push_back(py);
      s.provider.set(
          gp::render_prompt(s.formats.formats[f], s.matched.pairs[i].aae_text),
          continuation, px);
      s.provider.set(
          gp::render_prompt(s.formats.formats[f], s.matched.pairs[i].sae_text),
          continuation, py);
    }
  }
  return s;
}

}  // namespace testutil
