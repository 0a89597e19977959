#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "biopay/ledger/money.hpp"
#include "biopay/util/time.hpp"

namespace biopay::ledger {

inline constexpr std::string_view kGuardianAccount = "guardian";

class LedgerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownAccount : public LedgerError {
 public:
  using LedgerError::LedgerError;
};

class InsufficientFunds : public LedgerError {
 public:
  using LedgerError::LedgerError;
};

struct Account {
  std::string id;
  Pence balance;
  Pence initial_credit;
  util::Timestamp opened_at;

  friend bool operator==(const Account&, const Account&) = default;
};

struct TransferRecord {
  std::uint64_t transfer_id = 0;
  std::string event_id;  // empty for direct transfers
  std::string from;
  std::string to;
  Pence amount;
  util::Timestamp applied_at;

  friend bool operator==(const TransferRecord&, const TransferRecord&) = default;
};

enum class Granularity { PerInstance, PerImage };
enum class ShortfallRule { Skip, Partial };

struct PayoutPolicy {
  Pence unit_amount{1};
  Granularity granularity = Granularity::PerInstance;
  ShortfallRule insufficient_funds = ShortfallRule::Skip;

  // £0.10 per detection.
  static PayoutPolicy tenth_pound();
  void validate() const;
};

// What the ledger needs from a detection event: one species name per
// surviving detection. An empty list is a blank.
struct PayableEvent {
  std::string event_id;
  std::vector<std::string> species;
};

struct SkippedPayout {
  std::string species;
  Pence owed;
  Pence available;

  friend bool operator==(const SkippedPayout&, const SkippedPayout&) = default;
};

struct ApplyOutcome {
  enum class Status { Applied, Duplicate, DeadLettered };

  Status status = Status::Applied;
  std::vector<TransferRecord> transfers;
  std::vector<SkippedPayout> skipped;
  std::string reason;  // dead-letter reason
};

struct DeadLetter {
  std::string event_id;
  std::string reason;
};

struct LedgerState {
  std::map<std::string, Account> accounts;
  std::vector<TransferRecord> journal;
  std::set<std::string> applied_event_ids;
  std::uint64_t next_transfer_id = 1;
  std::uint64_t record_count = 0;

  Pence total_balance() const;
  Pence total_initial_credit() const;

  friend bool operator==(const LedgerState&, const LedgerState&) = default;
};

struct Statement {
  std::string account_id;
  util::Timestamp from;
  util::Timestamp to;
  Pence opening;
  Pence closing;
  std::vector<TransferRecord> records;
};

struct PaymentRow {
  std::string species;
  std::uint64_t detections = 0;
  Pence payment;

  friend bool operator==(const PaymentRow&, const PaymentRow&) = default;
};

struct PaymentTable {
  std::vector<PaymentRow> rows;
  std::uint64_t total_detections = 0;
  Pence total_payment;

  friend bool operator==(const PaymentTable&, const PaymentTable&) = default;
};

// Payment per species = count · unit_amount; rows keep input order.
PaymentTable replay_counts(const std::vector<std::pair<std::string, std::uint64_t>>& counts,
                           const PayoutPolicy& policy);

struct RestoreReport {
  std::uint64_t records = 0;
  std::uint64_t valid_bytes = 0;
  bool used_snapshot = false;
  bool truncated = false;
  std::uint64_t truncated_at_line = 0;  // 1-based
  std::string reason;
};

struct LedgerOptions {
  util::Clock clock = util::system_now;
  bool fsync = true;
  // Write a snapshot after every N journal records; 0 disables.
  std::uint64_t snapshot_every = 0;
};

class Journal;
struct OpenRecord;
struct EventRecord;
struct DirectTransferRecord;

// Thread-safe system of record. Every mutation is one journal line, written
// (and optionally fsync'd) before the in-memory state changes.
class Ledger {
 public:
  explicit Ledger(LedgerOptions options = {});
  // Restores from `journal_path` (snapshot + tail) and appends to it. A
  // corrupt tail is cut off at the last valid record.
  explicit Ledger(const std::filesystem::path& journal_path, LedgerOptions options = {});
  ~Ledger();

  Ledger(const Ledger&) = delete;
  Ledger& operator=(const Ledger&) = delete;

  Account open_account(const std::string& account_id, Pence initial_credit = kStartingCredit);
  TransferRecord transfer(const std::string& from, const std::string& to, Pence amount);
  ApplyOutcome apply_detection_event(const PayableEvent& event, const PayoutPolicy& policy);

  Pence balance(const std::string& account_id) const;
  bool has_account(const std::string& account_id) const;
  // Transfers touching the account with applied_at in [from, to).
  Statement statement(const std::string& account_id, util::Timestamp from,
                      util::Timestamp to) const;

  LedgerState state() const;
  std::vector<DeadLetter> dead_letters() const;
  const RestoreReport& restore_report() const { return restore_report_; }

  void write_snapshot();

  // Read-only restore without opening the journal for append.
  static LedgerState restore(const std::filesystem::path& journal_path,
                             RestoreReport* report = nullptr);

 private:
  void commit_record(const std::variant<OpenRecord, EventRecord, DirectTransferRecord>& record);

  LedgerOptions options_;
  mutable std::shared_mutex mu_;
  LedgerState state_;
  std::vector<DeadLetter> dead_letters_;
  std::unique_ptr<Journal> journal_;
  std::filesystem::path journal_path_;
  RestoreReport restore_report_;
};

}  // namespace biopay::ledger
