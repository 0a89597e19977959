#include "biopay/ledger/ledger.hpp"

#include <algorithm>
#include <mutex>

#include "biopay/ledger/journal.hpp"

namespace biopay::ledger {

PayoutPolicy PayoutPolicy::tenth_pound() {
  PayoutPolicy p;
  p.unit_amount = Pence(10);
  return p;
}

void PayoutPolicy::validate() const {
  if (unit_amount < Pence(1)) throw LedgerError("payout unit must be at least one penny");
}

Pence LedgerState::total_balance() const {
  Pence sum;
  for (const auto& [id, a] : accounts) sum += a.balance;
  return sum;
}

Pence LedgerState::total_initial_credit() const {
  Pence sum;
  for (const auto& [id, a] : accounts) sum += a.initial_credit;
  return sum;
}

PaymentTable replay_counts(const std::vector<std::pair<std::string, std::uint64_t>>& counts,
                           const PayoutPolicy& policy) {
  policy.validate();
  PaymentTable table;
  for (const auto& [species, count] : counts) {
    const Pence payment = policy.unit_amount * static_cast<std::int64_t>(count);
    table.rows.push_back({species, count, payment});
    table.total_detections += count;
    table.total_payment += payment;
  }
  return table;
}

Ledger::Ledger(LedgerOptions options) : options_(std::move(options)) {}

Ledger::Ledger(const std::filesystem::path& journal_path, LedgerOptions options)
    : options_(std::move(options)), journal_path_(journal_path) {
  if (std::filesystem::exists(journal_path)) {
    auto scan = scan_journal(journal_path);
    state_ = std::move(scan.state);
    restore_report_ = scan.report;
    if (scan.report.truncated) std::filesystem::resize_file(journal_path, scan.report.valid_bytes);
  }
  journal_ = std::make_unique<Journal>(journal_path, options_.fsync);
}

Ledger::~Ledger() = default;

// Write-ahead: the line is durable before memory changes. Callers have
// already validated the record against state_.
void Ledger::commit_record(const JournalRecord& record) {
  if (journal_) journal_->append(encode_record(record));
  apply_record(state_, record);
  if (journal_ && options_.snapshot_every > 0 &&
      state_.record_count % options_.snapshot_every == 0) {
    write_snapshot_file(journal_path_, state_, journal_->size());
  }
}

Account Ledger::open_account(const std::string& account_id, Pence initial_credit) {
  std::unique_lock lock(mu_);
  if (account_id.empty()) throw LedgerError("empty account id");
  if (state_.accounts.contains(account_id)) {
    throw LedgerError("account '" + account_id + "' already open");
  }
  if (initial_credit < Pence(0)) throw LedgerError("negative initial credit");
  commit_record(OpenRecord{state_.record_count + 1, account_id, initial_credit, options_.clock()});
  return state_.accounts.at(account_id);
}

TransferRecord Ledger::transfer(const std::string& from, const std::string& to, Pence amount) {
  std::unique_lock lock(mu_);
  if (!(amount > Pence(0))) throw LedgerError("transfer amount must be positive");
  if (from == to) throw LedgerError("cannot transfer to the same account");
  const auto src = state_.accounts.find(from);
  if (src == state_.accounts.end()) throw UnknownAccount("unknown account '" + from + "'");
  if (!state_.accounts.contains(to)) throw UnknownAccount("unknown account '" + to + "'");
  if (src->second.balance < amount) {
    throw InsufficientFunds("insufficient funds in '" + from + "'");
  }
  TransferRecord t{state_.next_transfer_id, "", from, to, amount, options_.clock()};
  commit_record(DirectTransferRecord{state_.record_count + 1, t});
  return t;
}

ApplyOutcome Ledger::apply_detection_event(const PayableEvent& event, const PayoutPolicy& policy) {
  policy.validate();
  if (event.event_id.empty()) throw LedgerError("event id must not be empty");

  std::unique_lock lock(mu_);
  ApplyOutcome out;
  if (state_.applied_event_ids.contains(event.event_id)) {
    out.status = ApplyOutcome::Status::Duplicate;
    return out;
  }

  const std::string guardian(kGuardianAccount);
  auto dead_letter = [&](std::string reason) {
    out.status = ApplyOutcome::Status::DeadLettered;
    out.reason = std::move(reason);
    dead_letters_.push_back({event.event_id, out.reason});
    return out;
  };
  if (!state_.accounts.contains(guardian)) return dead_letter("guardian account is not open");

  // Units owed per species, in order of first appearance.
  std::vector<std::pair<std::string, std::int64_t>> owed;
  for (const auto& species : event.species) {
    if (!state_.accounts.contains(species) || species == guardian) {
      return dead_letter("unknown species '" + species + "'");
    }
    auto it = std::find_if(owed.begin(), owed.end(),
                           [&](const auto& entry) { return entry.first == species; });
    if (it == owed.end()) {
      owed.emplace_back(species, 1);
    } else if (policy.granularity == Granularity::PerInstance) {
      ++it->second;
    }
  }

  const auto now = options_.clock();
  EventRecord record{state_.record_count + 1, event.event_id, now, {}, {}};
  std::uint64_t next_id = state_.next_transfer_id;
  for (const auto& [species, units] : owed) {
    const Pence balance = state_.accounts.at(species).balance;
    const Pence due = policy.unit_amount * units;
    std::int64_t payable_units = units;
    if (balance < due) {
      record.skipped.push_back({species, due, balance});
      payable_units = policy.insufficient_funds == ShortfallRule::Partial
                          ? balance.value / policy.unit_amount.value
                          : 0;
    }
    for (std::int64_t k = 0; k < payable_units; ++k) {
      record.transfers.push_back(
          {next_id++, event.event_id, species, guardian, policy.unit_amount, now});
    }
  }

  commit_record(record);
  out.transfers = std::move(record.transfers);
  out.skipped = std::move(record.skipped);
  return out;
}

Pence Ledger::balance(const std::string& account_id) const {
  std::shared_lock lock(mu_);
  const auto it = state_.accounts.find(account_id);
  if (it == state_.accounts.end()) throw UnknownAccount("unknown account '" + account_id + "'");
  return it->second.balance;
}

bool Ledger::has_account(const std::string& account_id) const {
  std::shared_lock lock(mu_);
  return state_.accounts.contains(account_id);
}

Statement Ledger::statement(const std::string& account_id, util::Timestamp from,
                            util::Timestamp to) const {
  if (to < from) throw LedgerError("statement range is inverted");
  std::shared_lock lock(mu_);
  const auto it = state_.accounts.find(account_id);
  if (it == state_.accounts.end()) throw UnknownAccount("unknown account '" + account_id + "'");

  auto net = [&](const TransferRecord& t) {
    if (t.to == account_id) return t.amount;
    if (t.from == account_id) return Pence(0) - t.amount;
    return Pence(0);
  };
  Statement s{account_id, from, to, it->second.initial_credit, {}, {}};
  for (const auto& t : state_.journal) {
    if (t.applied_at < from) s.opening += net(t);
  }
  s.closing = s.opening;
  for (const auto& t : state_.journal) {
    if (t.applied_at < from || !(t.applied_at < to)) continue;
    if (t.to != account_id && t.from != account_id) continue;
    s.closing += net(t);
    s.records.push_back(t);
  }
  return s;
}

LedgerState Ledger::state() const {
  std::shared_lock lock(mu_);
  return state_;
}

std::vector<DeadLetter> Ledger::dead_letters() const {
  std::shared_lock lock(mu_);
  return dead_letters_;
}

void Ledger::write_snapshot() {
  std::unique_lock lock(mu_);
  if (!journal_) throw LedgerError("in-memory ledger has no journal to snapshot");
  write_snapshot_file(journal_path_, state_, journal_->size());
}

LedgerState Ledger::restore(const std::filesystem::path& journal_path, RestoreReport* report) {
  auto scan = scan_journal(journal_path);
  if (report) *report = scan.report;
  return std::move(scan.state);
}

}  // namespace biopay::ledger
