#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fbmlan/config.hpp"
#include "fbmlan/fisher.hpp"
#include "fbmlan/lanlab.hpp"
#include "fbmlan/likelihood.hpp"

using json = nlohmann::json;
using namespace fbmlan;

namespace {

enum Exit { kPass = 0, kAssertion = 1, kConfig = 2, kIo = 3, kNumeric = 4 };

int verbosity = 0;

void log(const std::string& msg) {
  if (verbosity >= 0) std::cerr << msg << '\n';
}

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

RunConfig load_config(const Common& c) {
  ConfigFile f = c.config_path.empty() ? ConfigFile{} : ConfigFile::load(c.config_path);
  for (const auto& s : c.overrides) f.set_override(s);
  if (c.seed) f.set("experiment.seed", std::to_string(*c.seed), "--seed");
  if (c.threads > 0) f.set("run.threads", std::to_string(c.threads), "--threads");
  RunConfig rc = resolve(f);
  if (rc.threads > 0) omp_set_num_threads(rc.threads);
  return rc;
}

std::string out_path(const Common& c, const std::string& name) { return (std::filesystem::path(c.out) / name).string(); }

void write_manifest(const Common& c, const std::string& command, const RunConfig& rc,
                    const std::vector<std::string>& outputs, const json& extra = json::object()) {
  const std::string cfg_text = to_text(rc);
  write_atomic(out_path(c, "config.ini"), cfg_text);
  json m{{"command", command},
         {"seed", rc.experiment.seed},
         {"threads", rc.threads > 0 ? rc.threads : omp_get_max_threads()},
         {"config", cfg_text},
         {"outputs", outputs}};
  m.update(extra);
  write_atomic(out_path(c, "manifest.json"), m.dump(2) + "\n");
}

ObservedPath read_path_csv(const std::string& path, double sigma) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open path file " + path);
  std::string line;
  std::vector<double> t, x;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && !std::isdigit(static_cast<unsigned char>(line[0])) && line[0] != '-'))
      continue;
    std::istringstream ss(line);
    double a = 0.0, b = 0.0;
    char comma = 0;
    if (!(ss >> a >> comma >> b) || comma != ',') throw IoError(path + ":" + std::to_string(lineno) + ": expected t,x");
    t.push_back(a);
    x.push_back(b);
  }
  if (t.size() < 3) throw IoError(path + ": needs at least three rows");
  const double dt = t[1] - t[0];
  for (std::size_t k = 1; k < t.size(); ++k)
    if (std::abs(t[k] - t[0] - static_cast<double>(k) * dt) > 1e-9 * std::max(1.0, t[k]))
      throw IoError(path + ":" + std::to_string(k + 2) + ": times must be equally spaced");
  if (t[0] != 0.0) throw IoError(path + ": first time must be 0");
  ObservedPath obs{Grid(0.0, dt, t.size()), x, sigma, x.front()};
  validate(obs);
  return obs;
}

json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
  return a;
}

int cmd_simulate(const Common& c) {
  const RunConfig rc = load_config(c);
  const auto& e = rc.experiment;
  const auto model = make_model(e.model);
  check_params(*model, e.theta);
  check_sigma(e.sigma);
  if (!(e.H > 0.0 && e.H < 1.0)) throw DomainError("model.H: must lie in (0, 1)");
  const Grid grid = Grid::span(e.T, e.dt);
  std::vector<std::string> outputs;
  for (std::size_t i = 0; i < rc.simulate.paths; ++i) {
    const Seed seed{e.seed, i};
    StatePath p;
    if (rc.simulate.stationary) {
      const double S = e.burnin > 0.0 ? e.burnin : default_burnin(*model, e.theta);
      p = stationary_burnin(*model, e.theta, e.sigma, e.H, grid, S, seed);
    } else {
      p = euler_solve(*model, e.theta, e.sigma, rc.simulate.x0, generate_fbm(grid, e.H, seed));
    }
    char name[32];
    std::snprintf(name, sizeof name, "path_%04zu.csv", i);
    write_atomic(out_path(c, name), to_csv(p));
    outputs.push_back(name);
  }
  write_manifest(c, "simulate", rc, outputs);
  log("wrote " + std::to_string(outputs.size()) + " paths to " + c.out);
  return kPass;
}

int cmd_estimate(const Common& c) {
  const RunConfig rc = load_config(c);
  const auto& e = rc.experiment;
  if (rc.estimate.input.empty()) throw ConfigError("estimate.input: required");
  const auto model = make_model(e.model);
  if (model->exempt_from_dissipativity()) throw DomainError("model: the zero-drift stub cannot be estimated");
  const Params init = rc.estimate.theta_init.empty() ? e.theta : rc.estimate.theta_init;
  check_params(*model, init);
  const ObservedPath obs = read_path_csv(rc.estimate.input, e.sigma);
  const Likelihood lik(obs, model, e.H);

  const auto aff = model->affine();
  const std::string& method = rc.estimate.method;
  if (method != "auto" && method != "closed" && method != "numeric")
    throw ConfigError("estimate.method: expected auto, closed or numeric");
  if (method == "closed" && !aff) throw ConfigError("estimate.method: closed form needs a drift linear in theta");
  Params th;
  std::size_t iterations = 0;
  std::string used;
  if (aff && method != "numeric") {
    th = {mle_linear(lik, aff->basis, aff->offset)};
    used = "closed-form";
    log("estimate: drift is linear in theta, closed-form path");
  } else {
    const auto r = mle_numeric(lik, init);
    th = r.theta;
    iterations = r.iterations;
    used = "numeric";
    log("estimate: numeric maximization, " + std::to_string(iterations) + " iterations");
  }
  const double ll = lik.loglik(init, th).value;
  json j{{"theta_hat", nums(th)},
         {"loglik", ll},
         {"iterations", iterations},
         {"diagnostics",
          {{"method", used},
           {"model", e.model},
           {"theta_init", nums(init)},
           {"H", e.H},
           {"sigma", e.sigma},
           {"T", obs.grid.t_end()},
           {"dt", obs.grid.dt()},
           {"points", obs.grid.size()}}}};
  write_atomic(out_path(c, "estimate.json"), j.dump(2) + "\n");
  write_manifest(c, "estimate", rc, {"estimate.json"});
  std::cout << j.dump(2) << '\n';
  return kPass;
}

int cmd_fisher(const Common& c) {
  const RunConfig rc = load_config(c);
  const auto& e = rc.experiment;
  if (!(e.H > 0.0 && e.H < 0.5)) throw DomainError("model.H: must lie in (0, 1/2)");
  const auto model = make_model(e.model);
  const auto t = fisher_compute(*model, e.theta, e.sigma, e.H, rc.fisher);
  const auto m = static_cast<std::size_t>(t.fisher.I.rows());
  json I = json::array();
  for (std::size_t i = 0; i < m; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m; ++j) row.push_back(t.fisher.I(i, j));
    I.push_back(row);
  }
  json j{{"H", e.H},
         {"theta", nums(e.theta)},
         {"method", t.method},
         {"I", I},
         {"diagnostics", {{"m0", t.fisher.m0}, {"mean_grads", nums(t.mean_grads)}, {"route_gap", t.route_gap}}}};
  write_atomic(out_path(c, "fisher.json"), j.dump(2) + "\n");
  write_manifest(c, "fisher", rc, {"fisher.json"});
  std::cout << j.dump(2) << '\n';
  return kPass;
}

int run_report(const Common& c, RunConfig rc, const std::string& command) {
  const LanReport r = run_experiment(rc.experiment);
  persist_report(r, out_path(c, "report.json"));
  std::vector<std::string> outputs{"report.json"};
  if (!r.theta_hat.empty()) {
    write_atomic(out_path(c, "errors.csv"), errors_csv(r));
    outputs.push_back("errors.csv");
  }
  write_manifest(c, command, rc, outputs, {{"all_passed", r.all_passed()}});
  for (const auto& ch : r.checks) std::cout << (ch.passed ? "PASS " : "FAIL ") << ch.name << ": " << ch.detail << '\n';
  log(command + ": " + std::to_string(r.included) + " of " + std::to_string(r.replications) +
      " replications included, " + std::to_string(r.runtime_seconds) + " s");
  return r.all_passed() ? kPass : kAssertion;
}

int cmd_lan_verify(const Common& c) {
  RunConfig rc = load_config(c);
  if (rc.experiment.kind == "decay") throw ConfigError("experiment.kind: use the decay subcommand for decay");
  return run_report(c, rc, "lan-verify");
}

int cmd_decay(const Common& c) {
  RunConfig rc = load_config(c);
  rc.experiment.kind = "decay";
  return run_report(c, rc, "decay");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fbmlan: drift estimation for fractional SDEs"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("-q,--quiet", [](std::int64_t) { verbosity = -1; }, "Suppress progress messages");

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Config file (INI-like)");
    sub->add_option("--set", common.overrides, "Override, section.key=value")->allow_extra_args(false);
    sub->add_option("--out", common.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", common.seed, "Master seed");
    sub->add_option("--threads", common.threads, "OpenMP threads")->check(CLI::NonNegativeNumber);
  };
  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const Common&);
  };
  const Sub subs[] = {{"simulate", "Simulate observed paths to CSV", cmd_simulate},
                      {"estimate", "MLE from an observed path CSV", cmd_estimate},
                      {"fisher", "Fisher information at theta", cmd_fisher},
                      {"lan-verify", "Monte Carlo LAN experiment", cmd_lan_verify},
                      {"decay", "Covariance decay fit", cmd_decay}};
  int (*chosen)(const Common&) = nullptr;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    add_common(sub);
    sub->callback([&chosen, fn = s.fn] { chosen = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kConfig;
  }

  try {
    return chosen(common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  }
}
