#include "fbmlan/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace fbmlan {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const ConfigFile::Entry& e) {
  const std::string v = trim(e.value);
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError(e.origin + ": " + key + ": expected a number, got '" + e.value + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const ConfigFile::Entry& e) {
  const std::string v = trim(e.value);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError(e.origin + ": " + key + ": expected a non-negative integer, got '" + e.value + "'");
  return out;
}

std::vector<double> to_list(const std::string& key, const ConfigFile::Entry& e) {
  std::vector<double> out;
  std::stringstream ss(e.value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, {item, e.origin}));
  if (out.empty()) throw ConfigError(e.origin + ": " + key + ": empty list");
  return out;
}

bool to_bool(const std::string& key, const ConfigFile::Entry& e) {
  const std::string v = trim(e.value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(e.origin + ": " + key + ": expected true or false, got '" + e.value + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const ConfigFile::Entry&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto str = [&](const char* k, auto member) {
      t[k] = [member](RunConfig& c, const std::string&, const ConfigFile::Entry& e) { member(c) = trim(e.value); };
    };
    auto dbl = [&](const char* k, auto member) {
      t[k] = [member](RunConfig& c, const std::string& key, const ConfigFile::Entry& e) {
        member(c) = to_double(key, e);
      };
    };
    auto uns = [&](const char* k, auto member) {
      t[k] = [member](RunConfig& c, const std::string& key, const ConfigFile::Entry& e) {
        member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(to_uint(key, e));
      };
    };
    auto lst = [&](const char* k, auto member) {
      t[k] = [member](RunConfig& c, const std::string& key, const ConfigFile::Entry& e) {
        member(c) = to_list(key, e);
      };
    };
    str("model.name", [](RunConfig& c) -> std::string& { return c.experiment.model; });
    lst("model.theta", [](RunConfig& c) -> Params& { return c.experiment.theta; });
    dbl("model.sigma", [](RunConfig& c) -> double& { return c.experiment.sigma; });
    dbl("model.H", [](RunConfig& c) -> double& { return c.experiment.H; });

    dbl("grid.T", [](RunConfig& c) -> double& { return c.experiment.T; });
    dbl("grid.dt", [](RunConfig& c) -> double& { return c.experiment.dt; });
    dbl("grid.burnin", [](RunConfig& c) -> double& { return c.experiment.burnin; });

    str("experiment.kind", [](RunConfig& c) -> std::string& { return c.experiment.kind; });
    uns("experiment.replications", [](RunConfig& c) -> std::size_t& { return c.experiment.replications; });
    uns("experiment.seed", [](RunConfig& c) -> std::uint64_t& { return c.experiment.seed; });
    str("experiment.estimator", [](RunConfig& c) -> std::string& { return c.experiment.estimator; });
    lst("experiment.horizons", [](RunConfig& c) -> std::vector<double>& { return c.experiment.horizons; });

    dbl("checks.var_tolerance", [](RunConfig& c) -> double& { return c.experiment.var_tolerance; });
    dbl("checks.ks_alpha", [](RunConfig& c) -> double& { return c.experiment.ks_alpha; });
    dbl("checks.quad_tolerance", [](RunConfig& c) -> double& { return c.experiment.quad_tolerance; });
    dbl("checks.slope_tolerance", [](RunConfig& c) -> double& { return c.experiment.slope_tolerance; });

    str("decay.cov_source", [](RunConfig& c) -> std::string& { return c.experiment.cov_source; });
    dbl("decay.lag_min", [](RunConfig& c) -> double& { return c.experiment.lag_min; });
    dbl("decay.lag_max", [](RunConfig& c) -> double& { return c.experiment.lag_max; });
    dbl("decay.lag_step", [](RunConfig& c) -> double& { return c.experiment.lag_step; });
    dbl("decay.window", [](RunConfig& c) -> double& { return c.experiment.cov_window; });
    dbl("decay.slack", [](RunConfig& c) -> double& { return c.experiment.decay_slack; });

    str("fisher.method", [](RunConfig& c) -> std::string& { return c.fisher.method; });
    dbl("fisher.max_lag", [](RunConfig& c) -> double& { return c.fisher.max_lag; });
    uns("fisher.reps", [](RunConfig& c) -> std::size_t& { return c.fisher.reps; });
    dbl("fisher.window", [](RunConfig& c) -> double& { return c.fisher.window; });

    uns("simulate.paths", [](RunConfig& c) -> std::size_t& { return c.simulate.paths; });
    dbl("simulate.x0", [](RunConfig& c) -> double& { return c.simulate.x0; });
    t["simulate.stationary"] = [](RunConfig& c, const std::string& key, const ConfigFile::Entry& e) {
      c.simulate.stationary = to_bool(key, e);
    };

    str("estimate.input", [](RunConfig& c) -> std::string& { return c.estimate.input; });
    str("estimate.method", [](RunConfig& c) -> std::string& { return c.estimate.method; });
    lst("estimate.theta_init", [](RunConfig& c) -> Params& { return c.estimate.theta_init; });

    t["run.threads"] = [](RunConfig& c, const std::string& key, const ConfigFile::Entry& e) {
      c.threads = static_cast<int>(to_uint(key, e));
    };
    return t;
  }();
  return table;
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text, const std::string& source) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string origin = source + ":" + std::to_string(lineno);
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(origin + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(origin + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ": missing key");
    const std::string full = section.empty() || key.find('.') != std::string::npos ? key : section + "." + key;
    cfg.set(full, trim(line.substr(eq + 1)), origin);
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void ConfigFile::set(const std::string& key, const std::string& value, const std::string& origin) {
  if (!setters().count(key)) throw ConfigError(origin + ": unknown key '" + key + "'");
  entries_[key] = {value, origin};
}

void ConfigFile::set_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("--set " + assignment + ": expected key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), "--set " + assignment);
}

std::string ConfigFile::dump() const {
  std::ostringstream os;
  std::string section;
  for (const auto& [key, e] : entries_) {
    const auto dot = key.find('.');
    const std::string s = key.substr(0, dot);
    if (s != section) {
      if (!section.empty()) os << '\n';
      os << '[' << s << "]\n";
      section = s;
    }
    os << key.substr(dot + 1) << " = " << e.value << '\n';
  }
  return os.str();
}

RunConfig resolve(const ConfigFile& file) {
  RunConfig c;
  for (const auto& [key, e] : file.entries()) setters().at(key)(c, key, e);
  c.fisher.dt = c.experiment.dt;
  c.fisher.seed = Seed{c.experiment.seed ^ 0x9e3779b97f4a7c15ULL, 0};
  return c;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : setters()) out.push_back(k);
  return out;
}

namespace {

// Shortest round-trip form.
std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
  return s;
}

}  // namespace

std::string to_text(const RunConfig& c) {
  const auto& e = c.experiment;
  ConfigFile f;
  const std::string o = "resolved";
  f.set("model.name", e.model, o);
  f.set("model.theta", list(e.theta), o);
  f.set("model.sigma", num(e.sigma), o);
  f.set("model.H", num(e.H), o);
  f.set("grid.T", num(e.T), o);
  f.set("grid.dt", num(e.dt), o);
  f.set("grid.burnin", num(e.burnin), o);
  f.set("experiment.kind", e.kind, o);
  f.set("experiment.replications", std::to_string(e.replications), o);
  f.set("experiment.seed", std::to_string(e.seed), o);
  f.set("experiment.estimator", e.estimator, o);
  f.set("experiment.horizons", list(e.horizons), o);
  f.set("checks.var_tolerance", num(e.var_tolerance), o);
  f.set("checks.ks_alpha", num(e.ks_alpha), o);
  f.set("checks.quad_tolerance", num(e.quad_tolerance), o);
  f.set("checks.slope_tolerance", num(e.slope_tolerance), o);
  f.set("decay.cov_source", e.cov_source, o);
  f.set("decay.lag_min", num(e.lag_min), o);
  f.set("decay.lag_max", num(e.lag_max), o);
  f.set("decay.lag_step", num(e.lag_step), o);
  f.set("decay.window", num(e.cov_window), o);
  f.set("decay.slack", num(e.decay_slack), o);
  f.set("fisher.method", c.fisher.method, o);
  f.set("fisher.max_lag", num(c.fisher.max_lag), o);
  f.set("fisher.reps", std::to_string(c.fisher.reps), o);
  f.set("fisher.window", num(c.fisher.window), o);
  f.set("simulate.paths", std::to_string(c.simulate.paths), o);
  f.set("simulate.x0", num(c.simulate.x0), o);
  f.set("simulate.stationary", c.simulate.stationary ? "true" : "false", o);
  f.set("estimate.input", c.estimate.input, o);
  f.set("estimate.method", c.estimate.method, o);
  if (!c.estimate.theta_init.empty()) f.set("estimate.theta_init", list(c.estimate.theta_init), o);
  f.set("run.threads", std::to_string(c.threads), o);
  return f.dump();
}

}  // namespace fbmlan
