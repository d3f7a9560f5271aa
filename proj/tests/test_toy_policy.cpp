#include "guiseprobe/toy_policy.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "guiseprobe/errors.hpp"
#include "support.hpp"

using namespace gp;
using testutil::TempDir;

namespace {

// Plants an exact probability on one token of one context row: the target
// gets log(p) and the other non-special tokens split log((1-p)/(n-1)).
void plant_probability(ToyPolicyParams& params, std::size_t context,
                       std::size_t token, double p) {
  const std::size_t v = params.vocab.size();
  double* row = params.row(context);
  const double rest = std::log((1.0 - p) / static_cast<double>(v - 4));
  for (std::size_t i = 3; i < v; ++i) row[i] = rest;
  row[token] = std::log(p);
}

}  // namespace

TEST_CASE("uniform params score continuations at ln(1/V)") {
  ToyPolicyParams params =
      ToyPolicyParams::uniform({"kind", "mean", "says", "hello"}, 1);
  ToyProvider provider(params);

  SUBCASE("one-token continuation") {
    LogProbResult r = provider.score({"hello says", " kind"});
    CHECK(r.total_logprob == doctest::Approx(std::log(0.25)).epsilon(1e-12));
    CHECK(r.total_logprob == doctest::Approx(-1.386294).epsilon(1e-6));
    REQUIRE(r.per_token.size() == 1);
    CHECK(r.per_token[0].text == "kind");
  }
  SUBCASE("two-token continuation multiplies out") {
    LogProbResult r = provider.score({"hello", " kind mean"});
    CHECK(r.total_logprob ==
          doctest::Approx(-2.0 * std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("per-token sum equals the total") {
    LogProbResult r = provider.score({"hello", " kind mean says"});
    double sum = 0.0;
    for (const auto& t : r.per_token) sum += t.logprob;
    CHECK(sum == doctest::Approx(r.total_logprob).epsilon(1e-15));
  }
}

TEST_CASE("planted logits put the stated probability on a continuation") {
  ToyPolicyParams params =
      ToyPolicyParams::uniform({"kind", "mean", "says", "hello"}, 1);
  auto index_of = [&](const std::string& t) {
    for (std::size_t i = 0; i < params.vocab.size(); ++i) {
      if (params.vocab[i] == t) return i;
    }
    FAIL("token not found");
    return std::size_t{0};
  };
  plant_probability(params, index_of("says"), index_of("kind"), 0.9);
  ToyProvider provider(params);
  LogProbResult r = provider.score({"he says", " kind"});
  CHECK(r.total_logprob == doctest::Approx(std::log(0.9)).epsilon(1e-12));
  CHECK(r.total_logprob == doctest::Approx(-0.105361).epsilon(1e-5));
}

TEST_CASE("row softmax sums to one") {
  for (int order : {0, 1, 2}) {
    ToyPolicyParams params = ToyPolicyParams::random(5, order, 1234 + order);
    for (std::size_t ctx = 0; ctx < params.context_count(); ++ctx) {
      auto p = toy_softmax_row(params, ctx);
      CHECK(std::accumulate(p.begin(), p.end(), 0.0) ==
            doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("scoring matches the exhaustive brute-force walker") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> tok_dist;
  for (int trial = 0; trial < 50; ++trial) {
    const int order = trial % 3;
    const std::size_t v = 4 + trial % 2;  // 4 or 5
    ToyPolicyParams params =
        ToyPolicyParams::random(v, order, 1000 + static_cast<std::uint64_t>(trial));
    std::vector<std::size_t> prefix, cont;
    const std::size_t plen = trial % 4;
    const std::size_t clen = 1 + trial % 4;
    for (std::size_t i = 0; i < plen; ++i) {
      prefix.push_back(tok_dist(rng) % v);
    }
    for (std::size_t i = 0; i < clen; ++i) {
      cont.push_back(tok_dist(rng) % v);
    }
    const double got = toy_sequence_logprob(params, prefix, cont);
    const double want = testutil::oracle_toy_logprob(params, prefix, cont);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("logprob gradient") {
  SUBCASE("uniform row gives one-hot minus uniform") {
    ToyPolicyParams params = ToyPolicyParams::uniform({"a", "b", "c", "d"}, 0);
    std::vector<double> grad = toy_logprob_grad(params, {}, {3});  // token "a"
    CHECK(grad[3] == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(grad[4] == doctest::Approx(-0.25).epsilon(1e-9));
    CHECK(grad[5] == doctest::Approx(-0.25).epsilon(1e-9));
    CHECK(grad[6] == doctest::Approx(-0.25).epsilon(1e-9));
  }
  SUBCASE("matches central finite differences") {
    for (int trial = 0; trial < 5; ++trial) {
      ToyPolicyParams params =
          ToyPolicyParams::random(5, 1, 42 + static_cast<std::uint64_t>(trial));
      const std::vector<std::size_t> prefix{3, 4};
      const std::vector<std::size_t> cont{4, 3, 4};
      auto analytic = toy_logprob_grad(params, prefix, cont);
      auto numeric = testutil::fd_gradient(
          params, [&](const ToyPolicyParams& p) {
            return toy_sequence_logprob(p, prefix, cont);
          });
      CHECK(testutil::relative_grad_error(analytic, numeric) < 1e-6);
    }
  }
  SUBCASE("repeated context rows accumulate additively") {
    ToyPolicyParams params = ToyPolicyParams::random(5, 1, 99);
    // Continuation 3,3 visits row 3 twice: grad = step(3|ctx0) + step(3|3).
    auto both = toy_logprob_grad(params, {}, {3, 3});
    auto first = toy_logprob_grad(params, {}, {3});
    auto second = toy_logprob_grad(params, {3}, {3});
    for (std::size_t i = 0; i < both.size(); ++i) {
      CHECK(both[i] == doctest::Approx(first[i] + second[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("sampling") {
  SUBCASE("forced eos yields an empty body for any seed") {
    ToyPolicyParams params = ToyPolicyParams::uniform({"a", "b"}, 1);
    for (std::size_t ctx = 0; ctx < params.context_count(); ++ctx) {
      plant_probability(params, ctx, kEosId, 1.0 - 1e-12);
    }
    for (std::uint64_t seed : {1ULL, 7ULL, 12345ULL}) {
      SampleResult r = toy_sample(params, "a b", 10, seed);
      CHECK(r.tokens.empty());
      CHECK(r.ended_with_eos);
      CHECK(r.text.empty());
    }
  }
  SUBCASE("same seed reproduces the sequence exactly") {
    ToyPolicyParams params = ToyPolicyParams::random(6, 1, 5);
    SampleResult a = toy_sample(params, "t0 t1", 12, 777);
    SampleResult b = toy_sample(params, "t0 t1", 12, 777);
    CHECK(a.tokens == b.tokens);
    CHECK(a.text == b.text);
    SampleResult c = toy_sample(params, "t0 t1", 12, 778);
    // Different seed virtually always differs on a 12-step draw.
    CHECK(a.tokens != c.tokens);
  }
  SUBCASE("empirical frequencies track the exact distribution within 3 sigma") {
    // Two-token distribution: p(a)=0.3, p(b)=0.7 planted on the BOS row.
    ToyPolicyParams params = ToyPolicyParams::uniform({"a", "b"}, 1);
    double* row = params.row(toy_initial_context(params));
    row[3] = std::log(0.3);
    row[4] = std::log(0.7);
    const int n = 10000;
    std::mt19937_64 rng(2024);
    int count_a = 0;
    for (int i = 0; i < n; ++i) {
      SampleResult r = toy_sample(params, "", 1, rng);
      REQUIRE(r.tokens.size() == 1);
      if (r.tokens[0] == 3) ++count_a;
    }
    const double expect = 0.3 * n;
    const double sigma = std::sqrt(n * 0.3 * 0.7);
    CHECK(std::abs(count_a - expect) < 3.0 * sigma);
  }
}

TEST_CASE("policy serialization round-trips bit-exactly") {
  TempDir dir("policy");
  ToyPolicyParams params = ToyPolicyParams::random(6, 2, 31337);
  const std::string path = dir.file("p.json");
  save_toy_policy(params, path);
  ToyPolicyParams loaded = load_toy_policy(path);
  CHECK(loaded.order == params.order);
  CHECK(loaded.vocab == params.vocab);
  REQUIRE(loaded.logits.size() == params.logits.size());
  for (std::size_t i = 0; i < params.logits.size(); ++i) {
    CHECK(loaded.logits[i] == params.logits[i]);  // exact, not approx
  }
  CHECK(loaded.digest() == params.digest());
}

TEST_CASE("policy validation rejects malformed tables") {
  ToyPolicyParams params = ToyPolicyParams::uniform({"a", "b"}, 1);
  SUBCASE("bad order") {
    params.order = 3;
    CHECK_THROWS_AS(params.validate(), ValidationError);
  }
  SUBCASE("wrong logits size") {
    params.logits.pop_back();
    CHECK_THROWS_AS(params.validate(), ValidationError);
  }
  SUBCASE("non-finite logit") {
    params.logits[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(params.validate(), ValidationError);
  }
  SUBCASE("missing specials") {
    params.vocab[0] = "bos";
    CHECK_THROWS_AS(params.validate(), ValidationError);
  }
}

TEST_CASE("tokenizer lowercases and maps unknown words to <unk>") {
  ToyPolicyParams params = ToyPolicyParams::uniform({"kind", "says"}, 1);
  auto toks = toy_tokenize(params, "He SAYS  kind\tstuff");
  REQUIRE(toks.size() == 4);
  CHECK(toks[0] == kUnkId);  // "he"
  CHECK(params.vocab[toks[1]] == "says");
  CHECK(params.vocab[toks[2]] == "kind");
  CHECK(toks[3] == kUnkId);  // "stuff"
}

TEST_CASE("empty continuation is rejected by the toy provider") {
  ToyPolicyParams params = ToyPolicyParams::uniform({"a", "b"}, 1);
  ToyProvider provider(params);
  CHECK_THROWS_AS(provider.score({"a", "   "}), ValidationError);
}

TEST_CASE("media tokens are prepended via the digest map") {
  ToyPolicyParams params =
      ToyPolicyParams::uniform({"<imga>", "<imgb>", "kind", "hey"}, 2);
  auto index_of = [&](const std::string& t) {
    for (std::size_t i = 0; i < params.vocab.size(); ++i) {
      if (params.vocab[i] == t) return i;
    }
    return std::size_t{0};
  };
  // Context (<imga>, hey) strongly predicts "kind"; (<imgb>, hey) does not.
  const std::size_t v = params.vocab.size();
  const std::size_t ctx_a = index_of("<imga>") * v + index_of("hey");
  const std::size_t ctx_b = index_of("<imgb>") * v + index_of("hey");
  plant_probability(params, ctx_a, index_of("kind"), 0.9);
  plant_probability(params, ctx_b, index_of("kind"), 0.1);

  ToyProvider provider(params, "toy",
                       {{"digest-a", "<imga>"}, {"digest-b", "<imgb>"}});
  MediaRef img_a{"a.jpg", "digest-a"};
  MediaRef img_b{"b.jpg", "digest-b"};
  LogProbResult ra = provider.score({"hey", " kind", {img_a}});
  LogProbResult rb = provider.score({"hey", " kind", {img_b}});
  CHECK(ra.total_logprob == doctest::Approx(std::log(0.9)).epsilon(1e-12));
  CHECK(rb.total_logprob == doctest::Approx(std::log(0.1)).epsilon(1e-12));

  SUBCASE("media without a mapping fails") {
    ToyProvider plain(params);
    CHECK_THROWS_AS(plain.score({"hey", " kind", {img_a}}), ProviderError);
  }
  SUBCASE("unmapped digest fails") {
    CHECK_THROWS_AS(
        provider.score({"hey", " kind", {MediaRef{"c.jpg", "digest-c"}}}),
        ProviderError);
  }
}
