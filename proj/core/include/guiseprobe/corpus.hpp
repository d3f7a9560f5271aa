#pragma once

#include <string>
#include <vector>

namespace gp {

// One AAE sample and its semantic SAE translation.
struct DialoguePair {
  std::string aae_text;
  std::string sae_text;
};

// Paired dialect corpus. Pair count on both sides is equal by construction.
struct MatchedCorpus {
  std::vector<DialoguePair> pairs;
  std::string digest;

  std::size_t size() const { return pairs.size(); }
};

// Two unpaired dialect corpora. Counts need not match unless the loader is
// asked to enforce it.
struct UnmatchedCorpus {
  std::vector<std::string> x_texts;
  std::vector<std::string> y_texts;
  std::string digest;
};

enum class AttributeKind { trait, occupation };

const char* to_string(AttributeKind kind);
AttributeKind attribute_kind_from_string(const std::string& s);

// A trait with a favorability rating, or an occupation with a prestige
// rating. Names are kept verbatim.
struct Attribute {
  std::string name;
  double rating = 0.0;
  AttributeKind kind = AttributeKind::trait;
};

struct AttributeSet {
  AttributeKind kind = AttributeKind::trait;
  std::vector<Attribute> attributes;
  std::string digest;

  std::size_t size() const { return attributes.size(); }
};

// Positionally paired group identifiers, e.g. "Black"/"White".
struct IdentifierPairSet {
  std::vector<std::string> x_identifiers;
  std::vector<std::string> y_identifiers;
  std::string digest;

  std::size_t size() const { return x_identifiers.size(); }
};

// A prompt template with exactly one `{x}` dialogue slot. The attribute is
// always scored as the continuation at the end of the rendered template.
struct PromptFormat {
  std::string id;
  std::string prefix_template;
};

enum class FormatSetting { covert, overt, mm_covert, mm_overt };

const char* to_string(FormatSetting setting);

struct FormatSet {
  AttributeKind task = AttributeKind::trait;
  FormatSetting setting = FormatSetting::covert;
  std::vector<PromptFormat> formats;

  std::size_t size() const { return formats.size(); }
};

// Loaders. All throw ValidationError with the offending path and line.

// JSON-lines with string fields `aae` and `sae`, one pair per line.
MatchedCorpus load_matched_corpus(const std::string& path);

// Plain text, one sample per line; blank lines are skipped. With
// strict_count the two files must hold the same number of samples.
UnmatchedCorpus load_unmatched_corpus(const std::string& path_x,
                                      const std::string& path_y,
                                      bool strict_count = false);

// TSV with header `name<TAB>rating`.
AttributeSet load_attribute_set(const std::string& path, AttributeKind kind);

// TSV with header `group_a<TAB>group_b`.
IdentifierPairSet load_identifier_pairs(const std::string& path);

// TSV with header `id<TAB>template`; each template must contain exactly one
// `{x}` placeholder.
FormatSet load_format_set(const std::string& path, AttributeKind task,
                          FormatSetting setting);

// The prompt format sets shipped with the toolkit, byte-exact. Valid names:
// covert-trait, overt-trait, covert-occupation, overt-occupation,
// mm-covert-trait, mm-overt-trait.
FormatSet builtin_prompt_formats(AttributeKind task, FormatSetting setting);
FormatSet builtin_prompt_formats(const std::string& name);

// The shipped overt identifier list, positionally paired as 4 group-A and
// 4 group-B terms.
IdentifierPairSet builtin_identifier_pairs();

void validate_format(const PromptFormat& format);

}  // namespace gp
