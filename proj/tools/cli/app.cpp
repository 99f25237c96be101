#include <CLI11.hpp>

#include <iostream>

#include "cli/commands.hpp"
#include "dbctl/errors.hpp"

namespace dbctl::cli {

namespace {

void common_flags(CLI::App* sub, Invocation& inv) {
  sub->add_option("--config", inv.config, "experiment configuration (JSON)")->required();
  sub->add_option("--seed", inv.seed, "override the experiment seed");
  sub->add_option("--out", inv.out, "output directory (overrides the config)");
  sub->add_flag("--json", inv.json_output, "print the JSON report instead of text");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dbctl: data-driven control workbench"};
  app.require_subcommand(1);
  Invocation inv;

  auto* simulate = app.add_subcommand("simulate", "simulate PCPE data and check persistence of excitation");
  common_flags(simulate, inv);
  auto* synth = app.add_subcommand("synth", "synthesize a gain with the configured procedure");
  common_flags(synth, inv);
  auto* verify = app.add_subcommand("verify", "check a gain against data, model and pole spec");
  common_flags(verify, inv);
  verify->add_option("--gain", inv.gain, "gain matrix file (default <out>/K.txt)");
  verify->add_option("--mode", inv.mode, "data | model | poles | all")
      ->check(CLI::IsMember({"data", "model", "poles", "all"}));
  auto* bench = app.add_subcommand("bench", "repeat the procedure over noisy trials");
  common_flags(bench, inv);
  bench->add_option("--trials", inv.trials, "trials per noise level");
  bench->add_option("--threads", inv.threads, "worker threads (0: all cores)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kValidation);
  }

  try {
    if (simulate->parsed()) return cmd_simulate(inv, out, err);
    if (synth->parsed()) return cmd_synth(inv, out, err);
    if (verify->parsed()) return cmd_verify(inv, out, err);
    return cmd_bench(inv, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kValidation);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kValidation);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kNumeric);
  }
}

}  // namespace dbctl::cli
