#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fbmlan/lanlab.hpp"

namespace fbmlan {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key-value text with [section] headers:
//
//   [model]
//   name = fou
//   theta = 1.0          # lists are comma separated
//
// Keys resolve to "section.key". Later assignments win; overrides win over the file.
class ConfigFile {
 public:
  struct Entry {
    std::string value;
    std::string origin;  // "file.ini:12" or "--set"
  };

  static ConfigFile parse(const std::string& text, const std::string& source = "<config>");
  static ConfigFile load(const std::string& path);

  // "section.key=value".
  void set_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value, const std::string& origin);

  const std::map<std::string, Entry>& entries() const { return entries_; }
  // Diff-able dump of the resolved keys.
  std::string dump() const;

 private:
  std::map<std::string, Entry> entries_;
};

struct SimulateOptions {
  std::size_t paths = 1;
  double x0 = 0.0;
  bool stationary = true;  // false: start at x0 at t = 0
};

struct EstimateOptions {
  std::string input;          // observed path CSV, columns t,x
  std::string method = "auto";  // auto | closed | numeric
  Params theta_init;          // empty: model theta
};

struct RunConfig {
  ExperimentConfig experiment;
  FisherOptions fisher;
  SimulateOptions simulate;
  EstimateOptions estimate;
  int threads = 0;  // 0: OpenMP default
};

// Every key must be known; errors cite the origin of the offending entry.
RunConfig resolve(const ConfigFile& file);
std::vector<std::string> known_keys();
// Every key with its resolved value; parses back to the same RunConfig.
std::string to_text(const RunConfig& c);

}  // namespace fbmlan
