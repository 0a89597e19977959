#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "biopay/ledger/ledger.hpp"

namespace biopay::ledger {

// Journal line kinds. One line per committed mutation; an event's transfers
// share a single line so they become visible together or not at all.
struct OpenRecord {
  std::uint64_t seq = 0;
  std::string account;
  Pence initial;
  util::Timestamp at;
};

struct EventRecord {
  std::uint64_t seq = 0;
  std::string event_id;
  util::Timestamp at;
  std::vector<TransferRecord> transfers;
  std::vector<SkippedPayout> skipped;
};

struct DirectTransferRecord {
  std::uint64_t seq = 0;
  TransferRecord transfer;
};

using JournalRecord = std::variant<OpenRecord, EventRecord, DirectTransferRecord>;

// Single JSON object, no trailing newline.
std::string encode_record(const JournalRecord& record);
std::optional<JournalRecord> decode_record(std::string_view line, std::string* error = nullptr);

// Validates and applies a committed record: sequence and transfer ids must
// continue the state, accounts must exist, balances may not go negative.
// Throws LedgerError without touching `state` on any inconsistency.
void apply_record(LedgerState& state, const JournalRecord& record);

std::filesystem::path snapshot_path_for(const std::filesystem::path& journal_path);

struct JournalScan {
  LedgerState state;
  RestoreReport report;
};

// Snapshot (when it matches the journal's genesis line) plus tail replay.
// Stops at the first unterminated, unparsable or inconsistent line.
JournalScan scan_journal(const std::filesystem::path& journal_path);

// Writes the snapshot next to the journal via rename. `journal_bytes` is the
// journal length the state corresponds to.
void write_snapshot_file(const std::filesystem::path& journal_path, const LedgerState& state,
                         std::uint64_t journal_bytes);

// Append-only file handle; each append is one newline-terminated line.
class Journal {
 public:
  Journal(const std::filesystem::path& path, bool fsync);
  ~Journal();
  Journal(const Journal&) = delete;
  Journal& operator=(const Journal&) = delete;

  // On failure the file is cut back to its previous length and this throws.
  void append(std::string_view line);
  std::uint64_t size() const { return size_; }

 private:
  int fd_ = -1;
  bool fsync_;
  std::uint64_t size_ = 0;
};

}  // namespace biopay::ledger
