#include "run_context.hpp"

#include <nlohmann/json.hpp>

#include "guiseprobe/digest.hpp"
#include "guiseprobe/fsutil.hpp"
#include "guiseprobe/version.hpp"

namespace gptool {

RunContext::RunContext(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) argv_.emplace_back(argv[i]);
}

void RunContext::record_input(const std::string& path) {
  inputs_[path] = gp::digest_file(path);
}

void RunContext::set_config(std::map<std::string, std::string> effective) {
  config_ = std::move(effective);
  gp::Fnv1a64 hash;
  for (const auto& [key, value] : config_) {
    hash.update(key).update("\x1f").update(value).update("\x1e");
  }
  config_digest_ = hash.hex();
}

void RunContext::write_manifests(const std::vector<std::string>& outputs) const {
  for (const auto& output : outputs) {
    nlohmann::ordered_json j;
    j["toolkit_version"] = gp::kToolkitVersion;
    j["command"] = argv_;
    j["config"] = config_;
    j["config_digest"] = config_digest_;
    if (seed_) j["seed"] = *seed_;
    j["inputs"] = inputs_;
    j["output"] = output;
    j["outputs"] = outputs;
    gp::write_file_atomic(output + ".manifest.json", j.dump(2) + "\n");
  }
}

}  // namespace gptool
