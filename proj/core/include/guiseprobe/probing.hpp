#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "guiseprobe/corpus.hpp"
#include "guiseprobe/provider.hpp"

namespace gp {

enum class ProbeSetting { matched, unmatched, overt, mm_overt };

const char* to_string(ProbeSetting setting);
ProbeSetting probe_setting_from_string(const std::string& s);

enum class QuoteStyle { none, single, double_ };

const char* to_string(QuoteStyle style);
QuoteStyle quote_style_from_string(const std::string& s);

struct ProbeOptions {
  // The attribute is scored as a continuation joined to the rendered
  // prefix by this separator.
  std::string separator = " ";
  QuoteStyle quote_style = QuoteStyle::none;
  // When set, logprobs below the floor (including -inf) are clamped to it
  // instead of failing the run. Recorded in the report.
  std::optional<double> floor;
};

// Renders f(x): substitutes the `{x}` slot, applying the quote style.
std::string render_prompt(const PromptFormat& format, const std::string& x,
                          QuoteStyle quote_style = QuoteStyle::none);

// Scores log p(attribute | rendered prefix [, media]) through the provider,
// applying the floor policy.
double attribute_logprob(const Provider& provider, const std::string& prefix,
                         const std::string& attribute,
                         const ProbeOptions& options,
                         const std::vector<MediaRef>& media = {});

// Matched setting: (1/|X|) sum_i [log p(t|f(x_i)) - log p(t|f(y_i))].
double matched_format_score(const Provider& provider,
                            const PromptFormat& format,
                            const MatchedCorpus& corpus,
                            const std::string& attribute,
                            const ProbeOptions& options = {});

// Unmatched setting: log mean_i p(t|f(x_i)) - log mean_i p(t|f(y_i)),
// averaged in log space via log-sum-exp.
double unmatched_format_score(const Provider& provider,
                              const PromptFormat& format,
                              const UnmatchedCorpus& corpus,
                              const std::string& attribute,
                              const ProbeOptions& options = {});

// Overt setting: the matched formula with explicit group identifiers
// filling the dialogue slot.
double overt_format_score(const Provider& provider, const PromptFormat& format,
                          const IdentifierPairSet& identifiers,
                          const std::string& attribute,
                          const ProbeOptions& options = {});

// Multimodal overt setting: the matched formula over image pairs, each
// conditioning the same SAE-filled prompts on an X-image vs a Y-image.
// Terms are averaged over the text list first, then over image pairs.
double mm_overt_format_score(const Provider& provider,
                             const PromptFormat& format,
                             const std::vector<MediaRef>& media_x,
                             const std::vector<MediaRef>& media_y,
                             const std::vector<std::string>& sae_texts,
                             const std::string& attribute,
                             const ProbeOptions& options = {});

struct FormatScore {
  std::string format_id;
  double score = 0.0;
};

struct AssociationReport {
  std::string toolkit_version;
  ProviderId provider;
  ProbeSetting setting = ProbeSetting::matched;
  AttributeKind task = AttributeKind::trait;
  ProbeOptions options;
  std::vector<Attribute> attributes;  // probe order, with ratings
  std::vector<PromptFormat> formats;
  std::map<std::string, std::string> corpus_digests;
  std::string attribute_digest;
  std::map<std::string, std::vector<FormatScore>> per_format;
  std::map<std::string, double> final_scores;  // q(t; theta), natural log
  std::string created_at;

  // Checks the report's structural invariants (every attribute present
  // exactly once; finals equal the per-format means within 1e-12).
  void validate() const;
};

std::string report_to_json(const AssociationReport& report);
AssociationReport report_from_json(const std::string& json_text);
void save_report(const AssociationReport& report, const std::string& path);
AssociationReport load_report(const std::string& path);

// CSV flattening: attribute, rating, setting, format, score, final.
std::string report_to_csv(const AssociationReport& report);

struct ProbeConfig {
  ProbeSetting setting = ProbeSetting::matched;
  FormatSet formats;
  AttributeSet attributes;
  ProbeOptions options;
  int concurrency = 1;

  // Exactly one group below must be populated, matching the setting.
  std::optional<MatchedCorpus> matched;
  std::optional<UnmatchedCorpus> unmatched;
  std::optional<IdentifierPairSet> identifiers;
  std::vector<MediaRef> media_x;
  std::vector<MediaRef> media_y;
  std::vector<std::string> sae_texts;
};

// Computes the per-format score for every (attribute, format) cell and the
// final q(t) as the mean over formats. Output is independent of request
// scheduling order.
AssociationReport run_probe(const Provider& provider, const ProbeConfig& config);

}  // namespace gp
