// pexsim: command-line front end for the experiment harness.
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "pex/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Partial exclusion in random environment: simulations and checks"};
  app.set_version_flag("--version", "pexsim 0.3.0");

  std::string command;
  std::string config_path;
  app.add_option("command", command, "env | walk | sep | homog | hdl | check-all")
      ->check(CLI::IsMember({"env", "walk", "sep", "homog", "hdl", "check-all"}));
  app.add_option("--config", config_path, "key = value configuration file");

  const std::map<std::string, std::string> help{
      {"law", "environment law, e.g. iid:1,2 or const:1 or markov:1,2|0.9,0.1;0.1,0.9"},
      {"dims", "torus sides, comma-separated"},
      {"n_grid", "scales N for hdl, comma-separated"},
      {"horizon", "process-time horizon"},
      {"t_grid", "time grid, comma-separated (macroscopic for hdl)"},
      {"replicas", "replicas per environment"},
      {"envs", "number of environments"},
      {"seed", "root seed"},
      {"threads", "worker threads"},
      {"out", "output path prefix (writes PREFIX.json / PREFIX.csv)"},
      {"format", "json | csv | both"},
      {"kind", "walk: alpha|omega; sep: direct|ladder; homog: alpha|omega|corrector"},
      {"profile", "initial profile for hdl: const:RHO or sin[:MEAN:AMP]"},
      {"g", "test functions, ';'-separated, e.g. gaussian_bump:0.5:0.1"},
      {"sigma", "oracle or a number (Sigma = value * I)"},
      {"event_cap", "abort hdl when the projected event count exceeds this"},
      {"x0", "walk start site"},
      {"density", "Binomial density for sep and check-all"},
      {"tol", "semigroup truncation tolerance"}};
  std::map<std::string, std::string> values;
  for (const auto& key : pex::ExperimentConfig::keys()) {
    if (key == "command") continue;
    std::string flag = key;
    for (auto& ch : flag)
      if (ch == '_') ch = '-';
    const std::string names = key == "n_grid" ? "--n-grid,--N-grid" : "--" + flag;
    app.add_option(names, values[key], help.at(key));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  pex::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg.load_file(config_path);
    if (!command.empty()) cfg.set("command", command);
    for (const auto& key : pex::ExperimentConfig::keys()) {
      if (key == "command") continue;
      std::string flag = key;
      for (auto& ch : flag)
        if (ch == '_') ch = '-';
      if (app.get_option("--" + flag)->count() > 0) cfg.set(key, values[key]);
    }
  } catch (const pex::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return 2;
  }
  return pex::run_and_write(cfg, std::cout, std::cerr);
}
