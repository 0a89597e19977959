#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "biopay/app/config.hpp"
#include "biopay/app/reports.hpp"
#include "biopay/ingest/pipeline.hpp"
#include "biopay/ledger/ledger.hpp"

namespace biopay::app {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Ledger named by the config (journal-backed or in-memory) with the guardian
// and every roster species open.
std::unique_ptr<ledger::Ledger> open_ledger(const RunConfig& config,
                                            util::Clock clock = util::system_now);
void ensure_accounts(ledger::Ledger& ledger, const RunConfig& config);

// Per-species transfer units and amounts paid to the guardian, fewest
// detections first (roster order on ties).
ledger::PaymentTable payments_from_state(const ledger::LedgerState& state,
                                         const std::vector<std::string>& species);

std::unique_ptr<ingest::DetectorBackend> make_backend(const RunConfig& config);
ingest::PipelineOptions pipeline_options(const RunConfig& config);

struct ReplayOptions {
  std::filesystem::path trace;
  double speed = 0.0;
  std::optional<std::filesystem::path> reports_dir;  // payments.csv goes here
  std::size_t checkpoint_every = 1000;               // conservation checks
};

struct ReplaySummary {
  ingest::PipelineStats stats;
  std::size_t warnings = 0;
  std::size_t checkpoints = 0;
  bool conserved = true;
  ledger::PaymentTable payments;
  ledger::LedgerState final_state;
};

int cmd_replay(const RunConfig& config, const ReplayOptions& options, std::ostream& out,
               std::ostream& err, ReplaySummary* summary = nullptr);

struct EvalOptions {
  std::filesystem::path predictions;
  std::filesystem::path ground_truth_dir;
  std::optional<std::size_t> folds;
  std::optional<std::size_t> per_class;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> reports_dir;
};

struct EvalResult {
  ReportBundle bundle;
  std::vector<std::filesystem::path> written;
};

int cmd_eval(const RunConfig& config, const EvalOptions& options, std::ostream& out,
             std::ostream& err, EvalResult* result = nullptr);

// Counts as a JSON object {"species": n, …} (key order kept), a JSON array of
// [species, n] pairs, or CSV lines "species,n" with an optional header.
std::vector<std::pair<std::string, std::uint64_t>> parse_counts(std::string_view text);

int cmd_ledger_balances(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_ledger_statement(const RunConfig& config, const std::string& account,
                         const std::optional<std::string>& from,
                         const std::optional<std::string>& to, std::ostream& out,
                         std::ostream& err);
int cmd_ledger_replay_counts(const RunConfig& config, const std::filesystem::path& counts,
                             std::ostream& out, std::ostream& err);

}  // namespace biopay::app
