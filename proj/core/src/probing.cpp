#include "guiseprobe/probing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "guiseprobe/digest.hpp"
#include "guiseprobe/errors.hpp"
#include "guiseprobe/fsutil.hpp"
#include "guiseprobe/version.hpp"

namespace gp {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log( (1/n) sum_i exp(v_i) ), stable against very negative logprobs.
double log_mean_exp(const std::vector<double>& values) {
  double max = kNegInf;
  for (double v : values) max = std::max(max, v);
  if (max == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max);
  return max + std::log(sum / static_cast<double>(values.size()));
}

double mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

const char* to_string(ProbeSetting setting) {
  switch (setting) {
    case ProbeSetting::matched: return "matched";
    case ProbeSetting::unmatched: return "unmatched";
    case ProbeSetting::overt: return "overt";
    case ProbeSetting::mm_overt: return "mm_overt";
  }
  return "?";
}

ProbeSetting probe_setting_from_string(const std::string& s) {
  if (s == "matched") return ProbeSetting::matched;
  if (s == "unmatched") return ProbeSetting::unmatched;
  if (s == "overt") return ProbeSetting::overt;
  if (s == "mm_overt" || s == "mm-overt") return ProbeSetting::mm_overt;
  throw ValidationError("unknown probe setting: " + s);
}

const char* to_string(QuoteStyle style) {
  switch (style) {
    case QuoteStyle::none: return "none";
    case QuoteStyle::single: return "single";
    case QuoteStyle::double_: return "double";
  }
  return "?";
}

QuoteStyle quote_style_from_string(const std::string& s) {
  if (s == "none") return QuoteStyle::none;
  if (s == "single") return QuoteStyle::single;
  if (s == "double") return QuoteStyle::double_;
  throw ValidationError("unknown quote style: " + s);
}

std::string render_prompt(const PromptFormat& format, const std::string& x,
                          QuoteStyle quote_style) {
  validate_format(format);
  std::string filler;
  switch (quote_style) {
    case QuoteStyle::none: filler = x; break;
    case QuoteStyle::single: filler = "'" + x + "'"; break;
    case QuoteStyle::double_: filler = "\"" + x + "\""; break;
  }
  std::string out = format.prefix_template;
  out.replace(out.find("{x}"), 3, filler);
  return out;
}

double attribute_logprob(const Provider& provider, const std::string& prefix,
                         const std::string& attribute,
                         const ProbeOptions& options,
                         const std::vector<MediaRef>& media) {
  ScoringRequest request{prefix, options.separator + attribute, media};
  double lp = provider.score(request).total_logprob;
  if (options.floor) {
    lp = std::max(lp, *options.floor);
  } else if (lp == kNegInf) {
    throw ValidationError("attribute '" + attribute +
                          "' has -inf logprob under prefix '" + prefix +
                          "'; rerun with a --floor to clamp");
  }
  return lp;
}

double matched_format_score(const Provider& provider,
                            const PromptFormat& format,
                            const MatchedCorpus& corpus,
                            const std::string& attribute,
                            const ProbeOptions& options) {
  if (corpus.pairs.empty()) throw ValidationError("matched corpus is empty");
  double sum = 0.0;
  for (const auto& pair : corpus.pairs) {
    const double lp_x = attribute_logprob(
        provider, render_prompt(format, pair.aae_text, options.quote_style),
        attribute, options);
    const double lp_y = attribute_logprob(
        provider, render_prompt(format, pair.sae_text, options.quote_style),
        attribute, options);
    sum += lp_x - lp_y;
  }
  return sum / static_cast<double>(corpus.pairs.size());
}

double unmatched_format_score(const Provider& provider,
                              const PromptFormat& format,
                              const UnmatchedCorpus& corpus,
                              const std::string& attribute,
                              const ProbeOptions& options) {
  if (corpus.x_texts.empty() || corpus.y_texts.empty()) {
    throw ValidationError("unmatched corpus has an empty side");
  }
  auto side = [&](const std::vector<std::string>& texts) {
    std::vector<double> lps;
    lps.reserve(texts.size());
    for (const auto& text : texts) {
      lps.push_back(attribute_logprob(
          provider, render_prompt(format, text, options.quote_style),
          attribute, options));
    }
    return log_mean_exp(lps);
  };
  return side(corpus.x_texts) - side(corpus.y_texts);
}

double overt_format_score(const Provider& provider, const PromptFormat& format,
                          const IdentifierPairSet& identifiers,
                          const std::string& attribute,
                          const ProbeOptions& options) {
  if (identifiers.x_identifiers.empty() ||
      identifiers.x_identifiers.size() != identifiers.y_identifiers.size()) {
    throw ValidationError("identifier lists must be non-empty and equal length");
  }
  MatchedCorpus as_pairs;
  for (std::size_t i = 0; i < identifiers.x_identifiers.size(); ++i) {
    as_pairs.pairs.push_back(
        {identifiers.x_identifiers[i], identifiers.y_identifiers[i]});
  }
  return matched_format_score(provider, format, as_pairs, attribute, options);
}

double mm_overt_format_score(const Provider& provider,
                             const PromptFormat& format,
                             const std::vector<MediaRef>& media_x,
                             const std::vector<MediaRef>& media_y,
                             const std::vector<std::string>& sae_texts,
                             const std::string& attribute,
                             const ProbeOptions& options) {
  if (media_x.size() != media_y.size() || media_x.empty()) {
    throw ValidationError("MediaCountMismatch(" +
                          std::to_string(media_x.size()) + "," +
                          std::to_string(media_y.size()) + ")");
  }
  if (sae_texts.empty()) throw ValidationError("mm_overt needs SAE texts");
  double pair_sum = 0.0;
  for (std::size_t i = 0; i < media_x.size(); ++i) {
    // Average over texts within one image pair, then over pairs, so every
    // demographic pair carries equal weight.
    double text_sum = 0.0;
    for (const auto& text : sae_texts) {
      const std::string prefix =
          render_prompt(format, text, options.quote_style);
      const double lp_x =
          attribute_logprob(provider, prefix, attribute, options, {media_x[i]});
      const double lp_y =
          attribute_logprob(provider, prefix, attribute, options, {media_y[i]});
      text_sum += lp_x - lp_y;
    }
    pair_sum += text_sum / static_cast<double>(sae_texts.size());
  }
  return pair_sum / static_cast<double>(media_x.size());
}

void AssociationReport::validate() const {
  for (const auto& attr : attributes) {
    auto pf = per_format.find(attr.name);
    if (pf == per_format.end()) {
      throw ValidationError("report missing per-format scores for '" +
                            attr.name + "'");
    }
    auto fin = final_scores.find(attr.name);
    if (fin == final_scores.end()) {
      throw ValidationError("report missing final score for '" + attr.name +
                            "'");
    }
    double sum = 0.0;
    for (const auto& fs : pf->second) sum += fs.score;
    const double avg = sum / static_cast<double>(pf->second.size());
    if (std::abs(avg - fin->second) > 1e-12) {
      throw ValidationError("final score for '" + attr.name +
                            "' is not the mean of per-format scores");
    }
  }
  if (per_format.size() != attributes.size() ||
      final_scores.size() != attributes.size()) {
    throw ValidationError("report has extra attribute entries");
  }
}

namespace {

nlohmann::ordered_json options_to_json(const ProbeOptions& options) {
  nlohmann::ordered_json j;
  j["separator"] = options.separator;
  j["quote_style"] = to_string(options.quote_style);
  if (options.floor) {
    j["floor"] = *options.floor;
  } else {
    j["floor"] = nullptr;
  }
  return j;
}

}  // namespace

std::string report_to_json(const AssociationReport& report) {
  nlohmann::ordered_json j;
  j["toolkit_version"] = report.toolkit_version;
  j["provider"] = {{"kind", to_string(report.provider.kind)},
                   {"model", report.provider.model},
                   {"digest", report.provider.digest}};
  j["setting"] = to_string(report.setting);
  j["task"] = to_string(report.task);
  j["log_base"] = "e";
  j["options"] = options_to_json(report.options);
  if (report.setting == ProbeSetting::mm_overt) {
    j["mm_averaging"] = "texts-then-pairs";
  }
  j["corpus_digests"] = report.corpus_digests;
  j["attribute_digest"] = report.attribute_digest;
  nlohmann::ordered_json attrs = nlohmann::ordered_json::array();
  for (const auto& a : report.attributes) {
    attrs.push_back({{"name", a.name}, {"rating", a.rating}});
  }
  j["attributes"] = std::move(attrs);
  nlohmann::ordered_json formats = nlohmann::ordered_json::array();
  for (const auto& f : report.formats) {
    formats.push_back({{"id", f.id}, {"template", f.prefix_template}});
  }
  j["formats"] = std::move(formats);
  nlohmann::ordered_json per_format;
  for (const auto& attr : report.attributes) {
    nlohmann::ordered_json scores = nlohmann::ordered_json::array();
    for (const auto& fs : report.per_format.at(attr.name)) {
      scores.push_back({{"format", fs.format_id}, {"score", fs.score}});
    }
    per_format[attr.name] = std::move(scores);
  }
  j["per_format"] = std::move(per_format);
  nlohmann::ordered_json finals;
  for (const auto& attr : report.attributes) {
    finals[attr.name] = report.final_scores.at(attr.name);
  }
  j["final"] = std::move(finals);
  j["created_at"] = report.created_at;
  return j.dump(2) + "\n";
}

AssociationReport report_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed report JSON: ") + e.what());
  }
  AssociationReport report;
  try {
    report.toolkit_version = j.at("toolkit_version").get<std::string>();
    const auto& p = j.at("provider");
    report.provider.kind = p.at("kind").get<std::string>() == "toy"
                               ? BackendKind::toy
                               : BackendKind::remote;
    report.provider.model = p.at("model").get<std::string>();
    report.provider.digest = p.at("digest").get<std::string>();
    report.setting =
        probe_setting_from_string(j.at("setting").get<std::string>());
    report.task =
        attribute_kind_from_string(j.at("task").get<std::string>());
    const auto& opts = j.at("options");
    report.options.separator = opts.at("separator").get<std::string>();
    report.options.quote_style =
        quote_style_from_string(opts.at("quote_style").get<std::string>());
    if (!opts.at("floor").is_null()) {
      report.options.floor = opts.at("floor").get<double>();
    }
    report.corpus_digests =
        j.at("corpus_digests").get<std::map<std::string, std::string>>();
    report.attribute_digest = j.at("attribute_digest").get<std::string>();
    for (const auto& a : j.at("attributes")) {
      report.attributes.push_back({a.at("name").get<std::string>(),
                                   a.at("rating").get<double>(), report.task});
    }
    for (const auto& f : j.at("formats")) {
      report.formats.push_back({f.at("id").get<std::string>(),
                                f.at("template").get<std::string>()});
    }
    for (const auto& [attr, scores] : j.at("per_format").items()) {
      std::vector<FormatScore> list;
      for (const auto& s : scores) {
        list.push_back({s.at("format").get<std::string>(),
                        s.at("score").get<double>()});
      }
      report.per_format[attr] = std::move(list);
    }
    for (const auto& [attr, value] : j.at("final").items()) {
      report.final_scores[attr] = value.get<double>();
    }
    report.created_at = j.value("created_at", "");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed report JSON: ") + e.what());
  }
  return report;
}

void save_report(const AssociationReport& report, const std::string& path) {
  write_file_atomic(path, report_to_json(report));
}

AssociationReport load_report(const std::string& path) {
  try {
    return report_from_json(read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::string report_to_csv(const AssociationReport& report) {
  std::string out = "attribute,rating,setting,format,score,final\n";
  for (const auto& attr : report.attributes) {
    const double final_score = report.final_scores.at(attr.name);
    for (const auto& fs : report.per_format.at(attr.name)) {
      out += csv_escape(attr.name) + ',' + format_g6(attr.rating) + ',' +
             to_string(report.setting) + ',' + csv_escape(fs.format_id) + ',' +
             format_g6(fs.score) + ',' + format_g6(final_score) + '\n';
    }
  }
  return out;
}

namespace {

void check_config(const ProbeConfig& config) {
  if (config.formats.formats.empty()) {
    throw ValidationError("probe needs at least one prompt format");
  }
  if (config.attributes.attributes.empty()) {
    throw ValidationError("probe needs a non-empty attribute set");
  }
  auto require = [&](bool ok, const char* expected, const char* got) {
    if (!ok) {
      throw ValidationError(std::string("setting '") +
                            to_string(config.setting) + "' requires " +
                            expected + " but was given " + got);
    }
  };
  switch (config.setting) {
    case ProbeSetting::matched:
      require(config.matched.has_value(), "a matched corpus",
              config.unmatched ? "an unmatched corpus"
                               : (config.identifiers ? "an identifier set"
                                                     : "nothing"));
      break;
    case ProbeSetting::unmatched:
      require(config.unmatched.has_value(), "an unmatched corpus",
              config.matched ? "a matched corpus" : "nothing");
      break;
    case ProbeSetting::overt:
      require(config.identifiers.has_value(), "an identifier set",
              config.matched ? "a matched corpus" : "nothing");
      break;
    case ProbeSetting::mm_overt:
      require(!config.media_x.empty() && !config.sae_texts.empty(),
              "media lists and SAE texts",
              config.matched ? "a matched corpus" : "nothing");
      break;
  }
}

}  // namespace

AssociationReport run_probe(const Provider& provider,
                            const ProbeConfig& config) {
  check_config(config);

  const auto& attrs = config.attributes.attributes;
  const auto& formats = config.formats.formats;
  struct Cell {
    std::size_t attr_index;
    std::size_t format_index;
  };
  std::vector<Cell> cells;
  cells.reserve(attrs.size() * formats.size());
  for (std::size_t a = 0; a < attrs.size(); ++a) {
    for (std::size_t f = 0; f < formats.size(); ++f) {
      cells.push_back({a, f});
    }
  }

  std::vector<double> scores(cells.size(), 0.0);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> completed{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto score_cell = [&](const Cell& cell) {
    const std::string& attribute = attrs[cell.attr_index].name;
    const PromptFormat& format = formats[cell.format_index];
    switch (config.setting) {
      case ProbeSetting::matched:
        return matched_format_score(provider, format, *config.matched,
                                    attribute, config.options);
      case ProbeSetting::unmatched:
        return unmatched_format_score(provider, format, *config.unmatched,
                                      attribute, config.options);
      case ProbeSetting::overt:
        return overt_format_score(provider, format, *config.identifiers,
                                  attribute, config.options);
      case ProbeSetting::mm_overt:
        return mm_overt_format_score(provider, format, config.media_x,
                                     config.media_y, config.sae_texts,
                                     attribute, config.options);
    }
    throw Error("unreachable");
  };

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error) return;
      }
      try {
        scores[i] = score_cell(cells[i]);
        completed.fetch_add(1);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(config.concurrency,
                                                  static_cast<int>(cells.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) {
    try {
      std::rethrow_exception(first_error);
    } catch (const Error& e) {
      throw ProviderError("probe aborted after " +
                          std::to_string(completed.load()) + "/" +
                          std::to_string(cells.size()) + " cells: " + e.what());
    }
  }

  AssociationReport report;
  report.toolkit_version = kToolkitVersion;
  report.provider = provider.id();
  report.setting = config.setting;
  report.task = config.attributes.kind;
  report.options = config.options;
  report.attributes = attrs;
  report.formats = formats;
  report.attribute_digest = config.attributes.digest;
  switch (config.setting) {
    case ProbeSetting::matched:
      report.corpus_digests["matched"] = config.matched->digest;
      break;
    case ProbeSetting::unmatched:
      report.corpus_digests["unmatched"] = config.unmatched->digest;
      break;
    case ProbeSetting::overt:
      report.corpus_digests["identifiers"] = config.identifiers->digest;
      break;
    case ProbeSetting::mm_overt: {
      auto digest_media = [](const std::vector<MediaRef>& refs) {
        Fnv1a64 hash;
        for (const auto& r : refs) hash.update(r.digest).update("\x1e");
        return hash.hex();
      };
      report.corpus_digests["media_x"] = digest_media(config.media_x);
      report.corpus_digests["media_y"] = digest_media(config.media_y);
      Fnv1a64 texts;
      for (const auto& t : config.sae_texts) texts.update(t).update("\x1e");
      report.corpus_digests["sae_texts"] = texts.hex();
      break;
    }
  }

  // Ordered reduction: cells are laid out attribute-major, so the report is
  // identical for any thread count.
  for (std::size_t a = 0; a < attrs.size(); ++a) {
    std::vector<FormatScore> row;
    std::vector<double> values;
    for (std::size_t f = 0; f < formats.size(); ++f) {
      const double s = scores[a * formats.size() + f];
      row.push_back({formats[f].id, s});
      values.push_back(s);
    }
    report.per_format[attrs[a].name] = std::move(row);
    report.final_scores[attrs[a].name] = mean(values);
  }
  report.created_at = utc_timestamp();
  return report;
}

}  // namespace gp
