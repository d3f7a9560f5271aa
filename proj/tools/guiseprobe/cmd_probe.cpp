#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>

#include "guiseprobe/corpus.hpp"
#include "guiseprobe/errors.hpp"
#include "guiseprobe/fsutil.hpp"
#include "guiseprobe/probing.hpp"
#include "guiseprobe/remote.hpp"
#include "guiseprobe/toy_policy.hpp"
#include "commands.hpp"

namespace gptool {
namespace {

std::vector<std::string> read_list(const std::string& path, RunContext& ctx) {
  ctx.record_input(path);
  std::ifstream in(path);
  if (!in) throw gp::ValidationError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(line);
  }
  if (lines.empty()) throw gp::ValidationError(path + ": empty file");
  return lines;
}

// media map file: one `locator<TAB>token` per line; locators are resolved
// to content digests here.
std::map<std::string, std::string> load_media_map(const std::string& path,
                                                  RunContext& ctx) {
  std::map<std::string, std::string> digest_to_token;
  for (const auto& line : read_list(path, ctx)) {
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw gp::ValidationError(path + ": expected 'locator\\ttoken'");
    }
    const std::string locator = line.substr(0, tab);
    gp::MediaRef ref = gp::MediaRef::from_file(locator);
    ctx.record_input(locator);
    digest_to_token[ref.digest] = line.substr(tab + 1);
  }
  return digest_to_token;
}

gp::RemoteConfig remote_config(const ProbeArgs& args) {
  if (args.endpoint.empty()) {
    throw gp::ValidationError("--endpoint is required for remote providers");
  }
  gp::RemoteConfig config;
  config.endpoint = args.endpoint;
  config.model = args.model;
  if (const char* key = std::getenv("GUISEPROBE_API_KEY")) {
    config.api_key = key;
  }
  return config;
}

}  // namespace

int cmd_probe(const ProbeArgs& args, RunContext& ctx) {
  if (args.out_path.empty()) throw gp::ValidationError("--out is required");
  if (args.attributes_path.empty()) {
    throw gp::ValidationError("--attributes is required");
  }

  gp::ProbeConfig config;
  config.setting = gp::probe_setting_from_string(args.setting);
  config.concurrency = args.concurrency;
  config.options.separator = args.separator;
  config.options.quote_style = gp::quote_style_from_string(args.quote_style);
  config.options.floor = args.floor;

  const gp::AttributeKind task = gp::attribute_kind_from_string(args.task);
  ctx.record_input(args.attributes_path);
  config.attributes = gp::load_attribute_set(args.attributes_path, task);

  if (args.formats.rfind("builtin:", 0) == 0) {
    config.formats = gp::builtin_prompt_formats(args.formats.substr(8));
  } else {
    ctx.record_input(args.formats);
    gp::FormatSetting fsetting =
        config.setting == gp::ProbeSetting::overt ? gp::FormatSetting::overt
                                                  : gp::FormatSetting::covert;
    if (config.setting == gp::ProbeSetting::mm_overt) {
      fsetting = gp::FormatSetting::mm_overt;
    }
    config.formats = gp::load_format_set(args.formats, task, fsetting);
  }

  // Data for the chosen setting. Anything incompatible is reported with
  // both sides of the mismatch named.
  switch (config.setting) {
    case gp::ProbeSetting::matched:
      if (args.corpus_path.empty()) {
        throw gp::ValidationError(
            "setting 'matched' requires --corpus (a JSON-lines matched "
            "corpus)");
      }
      ctx.record_input(args.corpus_path);
      config.matched = gp::load_matched_corpus(args.corpus_path);
      break;
    case gp::ProbeSetting::unmatched:
      if (args.corpus_x.empty() || args.corpus_y.empty()) {
        throw gp::ValidationError(
            "setting 'unmatched' requires --corpus-x and --corpus-y");
      }
      ctx.record_input(args.corpus_x);
      ctx.record_input(args.corpus_y);
      config.unmatched = gp::load_unmatched_corpus(args.corpus_x, args.corpus_y,
                                                   args.strict_count);
      break;
    case gp::ProbeSetting::overt:
      if (!args.corpus_path.empty()) {
        throw gp::ValidationError(
            "setting 'overt' is incompatible with --corpus; it uses "
            "--identifiers");
      }
      if (args.identifiers == "builtin") {
        config.identifiers = gp::builtin_identifier_pairs();
      } else {
        ctx.record_input(args.identifiers);
        config.identifiers = gp::load_identifier_pairs(args.identifiers);
      }
      break;
    case gp::ProbeSetting::mm_overt: {
      if (args.media_x.empty() || args.media_y.empty() ||
          args.sae_texts.empty()) {
        throw gp::ValidationError(
            "setting 'mm-overt' requires --media-x, --media-y and "
            "--sae-texts");
      }
      for (const auto& locator : read_list(args.media_x, ctx)) {
        config.media_x.push_back(gp::MediaRef::from_file(locator));
        ctx.record_input(locator);
      }
      for (const auto& locator : read_list(args.media_y, ctx)) {
        config.media_y.push_back(gp::MediaRef::from_file(locator));
        ctx.record_input(locator);
      }
      config.sae_texts = read_list(args.sae_texts, ctx);
      break;
    }
  }

  // Backend construction; the cache wrapper goes on the outside.
  std::unique_ptr<gp::Provider> backend;
  if (args.provider == "toy") {
    if (args.params_path.empty()) {
      throw gp::ValidationError("--params is required for the toy provider");
    }
    ctx.record_input(args.params_path);
    std::map<std::string, std::string> media_tokens;
    if (!args.media_map.empty()) {
      media_tokens = load_media_map(args.media_map, ctx);
    }
    backend = std::make_unique<gp::ToyProvider>(
        gp::load_toy_policy(args.params_path), "toy", std::move(media_tokens));
  } else if (args.provider == "remote") {
    backend = std::make_unique<gp::RemoteScoreProvider>(remote_config(args));
  } else if (args.provider == "echo") {
    backend =
        std::make_unique<gp::EchoCompletionsProvider>(remote_config(args));
  } else {
    throw gp::ValidationError("unknown provider: " + args.provider);
  }

  std::unique_ptr<gp::CachedProvider> cached;
  const gp::Provider* provider = backend.get();
  if (!args.cache_dir.empty()) {
    cached = std::make_unique<gp::CachedProvider>(*backend, args.cache_dir);
    provider = cached.get();
  }

  gp::AssociationReport report = gp::run_probe(*provider, config);
  gp::save_report(report, args.out_path);
  std::vector<std::string> outputs{args.out_path};
  if (!args.csv_path.empty()) {
    gp::write_file_atomic(args.csv_path, gp::report_to_csv(report));
    outputs.push_back(args.csv_path);
  }
  ctx.write_manifests(outputs);
  std::cerr << "guiseprobe: wrote " << args.out_path << " ("
            << report.attributes.size() << " attributes x "
            << report.formats.size() << " formats)\n";
  return 0;
}

}  // namespace gptool
