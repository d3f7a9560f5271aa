#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gptool {

// Provenance for one command invocation. Every output file gets a sibling
// <output>.manifest.json recording the command line, the effective
// configuration, and digests of every input actually read.
class RunContext {
 public:
  RunContext(int argc, char** argv);

  void record_input(const std::string& path);
  void set_config(std::map<std::string, std::string> effective);
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  // Writes one manifest per output, atomically.
  void write_manifests(const std::vector<std::string>& outputs) const;

 private:
  std::vector<std::string> argv_;
  std::map<std::string, std::string> inputs_;  // path -> content digest
  std::map<std::string, std::string> config_;
  std::string config_digest_;
  std::optional<std::uint64_t> seed_;
};

}  // namespace gptool
