#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "uplearn/experiment.hpp"

namespace {

struct FlagValues {
  std::string config_path;
  std::string out_dir;
  std::string seeds;
  std::string strategies;
  std::string archs;
  std::optional<double> pi_p;
  std::optional<unsigned> threads;
  std::string grid = "0:1:0.1";
  bool force = false;
};

uplearn::ExperimentConfig build_config(const FlagValues& f) {
  uplearn::ExperimentConfig cfg;
  if (!f.config_path.empty()) cfg = uplearn::load_config_file(f.config_path);
  if (!f.out_dir.empty()) {
    uplearn::set_config_value(cfg, "output_dir", f.out_dir, "flag --out");
  }
  if (!f.seeds.empty()) {
    uplearn::set_config_value(cfg, "seeds", f.seeds, "flag --seeds");
  }
  if (!f.strategies.empty()) {
    uplearn::set_config_value(cfg, "strategies", f.strategies,
                              "flag --strategies");
  }
  if (!f.archs.empty()) {
    uplearn::set_config_value(cfg, "archs", f.archs, "flag --archs");
  }
  if (f.pi_p.has_value()) {
    uplearn::set_config_value(cfg, "sim.pi_p_override", std::to_string(*f.pi_p),
                              "flag --pi-p");
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phased failure-prediction training under mitigated labels"};
  app.require_subcommand(1);

  FlagValues f;
  app.add_option("--config", f.config_path, "key=value config file");
  app.add_option("--out", f.out_dir, "output directory (default: out)");
  app.add_option("--seeds", f.seeds, "comma list of run seeds");
  app.add_option("--strategies", f.strategies,
                 "comma list: offline,certain,naive,uptake,uptake-full");
  app.add_option("--archs", f.archs, "comma list, e.g. linear,mlp:8,recur:4");
  app.add_option("--pi-p", f.pi_p,
                 "fixed positive-class prior instead of the estimate");
  app.add_option("--threads", f.threads,
                 "worker threads (default: UPLEARN_THREADS, else all cores)");

  CLI::App* generate =
      app.add_subcommand("generate", "write the fleet CSVs and manifest");
  generate->add_flag("--force", f.force, "overwrite existing data files");
  CLI::App* run =
      app.add_subcommand("run", "execute the strategy x arch x seed grid");
  CLI::App* sweep =
      app.add_subcommand("sweep", "class-prior sensitivity sweep");
  sweep->add_option("--grid", f.grid,
                    "start:stop:step or comma list (default 0:1:0.1)");
  CLI::App* report =
      app.add_subcommand("report", "re-render reports from stored runs");
  for (CLI::App* sub : {generate, run, sweep, report}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const uplearn::ExperimentConfig cfg = build_config(f);
    const unsigned threads = uplearn::resolve_threads(f.threads);
    if (generate->parsed()) {
      return uplearn::cmd_generate(cfg, f.force, std::cout, std::cerr);
    }
    if (run->parsed()) {
      return uplearn::cmd_run(cfg, threads, std::cout, std::cerr);
    }
    if (sweep->parsed()) {
      return uplearn::cmd_sweep(cfg, f.grid, threads, std::cout, std::cerr);
    }
    return uplearn::cmd_report(cfg, std::cout, std::cerr);
  } catch (const uplearn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
