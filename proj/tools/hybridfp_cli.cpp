// Command-line harness: run experiments, verify classes, check invariants,
// sanity-check projections.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "hybridfp/experiment.hpp"
#include "hybridfp/invariants.hpp"

namespace ex = hybridfp::experiment;

namespace {

struct JobResult {
  int code = ex::kPass;
  std::string log;
};

JobResult run_one(const std::string& path, const std::optional<std::string>& out_flag, bool classes_only) {
  JobResult r;
  try {
    const ex::Config cfg = ex::load_config(path);
    ex::Outcome o = ex::run_experiment(cfg, classes_only);
    const std::filesystem::path dir = ex::resolve_out_dir(cfg, out_flag);
    ex::write_outputs(cfg, o, dir);
    r.code = o.exit_code;
    r.log = path + ": " + (o.exit_code == ex::kPass ? "pass" : "FAIL");
    if (!o.failed.empty()) {
      r.log += " (";
      for (std::size_t i = 0; i < o.failed.size(); ++i) r.log += (i ? "," : "") + o.failed[i];
      r.log += ")";
    }
    for (const std::string& f : o.files) r.log += "\n  wrote " + f;
  } catch (const hybridfp::ConfigError& e) {
    r.code = ex::kConfigError;
    r.log = path + ": config error: " + e.what();
  } catch (const hybridfp::Error& e) {
    r.code = ex::kCheckFailed;
    r.log = path + ": error: " + e.what();
  }
  return r;
}

int cmd_run(const std::vector<std::string>& configs, std::size_t jobs, const std::optional<std::string>& out,
            bool classes_only) {
  std::vector<JobResult> results(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) results[i] = run_one(configs[i], out, classes_only);
  };
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, configs.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  int code = ex::kPass;
  for (const JobResult& r : results) {
    (r.code == ex::kPass ? std::cout : std::cerr) << r.log << '\n';
    code = std::max(code, r.code);
  }
  return code;
}

int cmd_project(const std::string& path) {
  try {
    const ex::Config cfg = ex::load_config(path);
    const ex::Outcome o = ex::run_projection_check(cfg);
    std::cout << o.summary.str();
    return o.exit_code;
  } catch (const hybridfp::ConfigError& e) {
    std::cerr << path << ": config error: " << e.what() << '\n';
    return ex::kConfigError;
  } catch (const hybridfp::Error& e) {
    std::cerr << path << ": error: " << e.what() << '\n';
    return ex::kCheckFailed;
  }
}

int cmd_invariants(const std::string& suite, std::uint64_t seed) {
  std::vector<std::string> names;
  if (suite == "all") {
    names = hybridfp::invariants::suite_names();
  } else if (std::find(hybridfp::invariants::suite_names().begin(), hybridfp::invariants::suite_names().end(),
                       suite) != hybridfp::invariants::suite_names().end()) {
    names = {suite};
  } else {
    std::cerr << "unknown suite '" << suite << "'\n";
    return ex::kConfigError;
  }
  int code = ex::kPass;
  for (const std::string& n : names) {
    const auto r = hybridfp::invariants::run_suite(n, seed);
    std::cout << "suite=" << r.name << " status=" << (r.pass ? "pass" : "fail") << " instances=" << r.instances
              << " failures=" << r.failures << " worst_slack=" << ex::num(r.worst);
    if (!r.pass) std::cout << " first_failure=\"" << r.detail << "\"";
    std::cout << '\n';
    if (!r.pass) code = ex::kCheckFailed;
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-point experiments for multivalued hybrid mappings on model spaces"};
  app.require_subcommand(1);

  std::vector<std::string> run_configs;
  std::size_t jobs = 1;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Run one or more experiment configs");
  run->add_option("config", run_configs, "Experiment config file(s)")->required()->check(CLI::ExistingFile);
  run->add_option("--jobs,-j", jobs, "Worker threads for independent configs")->check(CLI::PositiveNumber);
  run->add_option("--out,-o", out_dir, "Output directory (overrides " + std::string(ex::kOutDirEnv) + ")");

  std::string verify_config;
  auto* verify = app.add_subcommand("verify-class", "Run only the class checks of a config");
  verify->add_option("config", verify_config, "Experiment config file")->required()->check(CLI::ExistingFile);
  verify->add_option("--out,-o", out_dir, "Output directory");

  std::string suite = "all";
  std::uint64_t seed = 20240601;
  auto* inv = app.add_subcommand("check-invariants", "Run the seeded geometry property suites");
  inv->add_option("--suite", suite, "geometry, comparison, projection, hausdorff or all");
  inv->add_option("--seed", seed, "Random seed");

  std::string project_config;
  auto* proj = app.add_subcommand("project", "Projection sanity check for a config's domain");
  proj->add_option("config", project_config, "Experiment config file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ex::kConfigError;
  }

  const std::optional<std::string> out = out_dir.empty() ? std::nullopt : std::optional<std::string>(out_dir);
  if (*run) return cmd_run(run_configs, jobs, out, false);
  if (*verify) return cmd_run({verify_config}, 1, out, true);
  if (*inv) return cmd_invariants(suite, seed);
  if (*proj) return cmd_project(project_config);
  return ex::kConfigError;
}
