#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "biopay/app/commands.hpp"
#include "biopay/app/config.hpp"
#include "biopay/app/server.hpp"

using namespace biopay::app;

int main(int argc, char** argv) {
  CLI::App app{"biopay: camera-trap detections paid out to a guardian account"};
  app.require_subcommand(1);

  std::string config_path;
  std::string journal_path;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--journal", journal_path, "ledger journal file (overrides config)");

  auto* serve = app.add_subcommand("serve", "run SMTP and HTTP intake until SIGINT/SIGTERM");
  std::string serve_config;
  serve->add_option("--config", serve_config, "JSON config file")->check(CLI::ExistingFile);

  auto* replay = app.add_subcommand("replay", "run a detection trace through the pipeline");
  std::string trace;
  double speed = 0.0;
  std::string replay_reports;
  replay->add_option("--trace", trace, "JSONL trace")->required();
  replay->add_option("--speed", speed, "time multiplier; 0 runs flat out")->check(CLI::NonNegativeNumber);
  replay->add_option("--reports", replay_reports, "write payments.csv here");

  auto* eval = app.add_subcommand("eval", "evaluate predictions against VOC annotations");
  EvalOptions eval_opts;
  std::string pred, gt, eval_reports;
  std::size_t folds = 0, per_class = 0;
  std::uint64_t seed = 0;
  eval->add_option("--pred", pred, "predictions JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", gt, "directory of VOC XML files")->required()->check(CLI::ExistingDirectory);
  auto* folds_opt = eval->add_option("--folds", folds, "number of folds")->check(CLI::PositiveNumber);
  auto* per_class_opt = eval->add_option("--per-class", per_class, "images per class per fold")->check(CLI::PositiveNumber);
  auto* seed_opt = eval->add_option("--seed", seed, "fold sampling seed");
  eval->add_option("--reports", eval_reports, "report directory");

  auto* ledger_cmd = app.add_subcommand("ledger", "inspect the ledger");
  ledger_cmd->require_subcommand(1);
  auto* balances = ledger_cmd->add_subcommand("balances", "all account balances");
  auto* statement = ledger_cmd->add_subcommand("statement", "transfers for one account");
  std::string account;
  std::optional<std::string> from, to;
  statement->add_option("--account", account, "account id")->required();
  statement->add_option("--from", from, "RFC 3339 start (inclusive)");
  statement->add_option("--to", to, "RFC 3339 end (exclusive)");
  auto* replay_counts = ledger_cmd->add_subcommand("replay-counts", "payment table for species counts");
  std::string counts;
  replay_counts->add_option("--counts", counts, "counts file (JSON or CSV)")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  RunConfig config;
  try {
    std::optional<std::filesystem::path> path;
    if (!serve_config.empty()) path = serve_config;
    else if (!config_path.empty()) path = config_path;
    config = load_config(path);
    if (!journal_path.empty()) config.journal_path = journal_path;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  if (serve->parsed()) return cmd_serve(config, std::cout, std::cerr);
  if (replay->parsed()) {
    ReplayOptions opts;
    opts.trace = trace;
    opts.speed = speed;
    if (!replay_reports.empty()) opts.reports_dir = replay_reports;
    return cmd_replay(config, opts, std::cout, std::cerr);
  }
  if (eval->parsed()) {
    eval_opts.predictions = pred;
    eval_opts.ground_truth_dir = gt;
    if (*folds_opt) eval_opts.folds = folds;
    if (*per_class_opt) eval_opts.per_class = per_class;
    if (*seed_opt) eval_opts.seed = seed;
    if (!eval_reports.empty()) eval_opts.reports_dir = eval_reports;
    return cmd_eval(config, eval_opts, std::cout, std::cerr);
  }
  if (balances->parsed()) return cmd_ledger_balances(config, std::cout, std::cerr);
  if (statement->parsed()) return cmd_ledger_statement(config, account, from, to, std::cout, std::cerr);
  if (replay_counts->parsed()) return cmd_ledger_replay_counts(config, counts, std::cout, std::cerr);
  return kExitUsage;
}
