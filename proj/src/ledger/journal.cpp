#include "biopay/ledger/journal.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "biopay/util/digest.hpp"

namespace biopay::ledger {

using nlohmann::json;

namespace {

std::int64_t to_ms(util::Timestamp t) { return t.time_since_epoch().count(); }
util::Timestamp from_ms(std::int64_t ms) { return util::Timestamp{std::chrono::milliseconds{ms}}; }

json transfer_to_json(const TransferRecord& t) {
  return json{{"id", t.transfer_id}, {"event", t.event_id}, {"from", t.from},
              {"to", t.to},          {"amount", t.amount.value}, {"at", to_ms(t.applied_at)}};
}

TransferRecord transfer_from_json(const json& j) {
  TransferRecord t;
  t.transfer_id = j.at("id").get<std::uint64_t>();
  t.event_id = j.at("event").get<std::string>();
  t.from = j.at("from").get<std::string>();
  t.to = j.at("to").get<std::string>();
  t.amount = Pence(j.at("amount").get<std::int64_t>());
  t.applied_at = from_ms(j.at("at").get<std::int64_t>());
  return t;
}

json state_to_json(const LedgerState& s) {
  json accounts = json::array();
  for (const auto& [id, a] : s.accounts) {
    accounts.push_back({{"id", a.id},
                        {"balance", a.balance.value},
                        {"initial", a.initial_credit.value},
                        {"opened", to_ms(a.opened_at)}});
  }
  json transfers = json::array();
  for (const auto& t : s.journal) transfers.push_back(transfer_to_json(t));
  return json{{"accounts", accounts},
              {"transfers", transfers},
              {"applied", s.applied_event_ids},
              {"next_transfer_id", s.next_transfer_id},
              {"record_count", s.record_count}};
}

LedgerState state_from_json(const json& j) {
  LedgerState s;
  for (const auto& a : j.at("accounts")) {
    Account acc{a.at("id").get<std::string>(), Pence(a.at("balance").get<std::int64_t>()),
                Pence(a.at("initial").get<std::int64_t>()),
                from_ms(a.at("opened").get<std::int64_t>())};
    s.accounts.emplace(acc.id, acc);
  }
  for (const auto& t : j.at("transfers")) s.journal.push_back(transfer_from_json(t));
  for (const auto& id : j.at("applied")) s.applied_event_ids.insert(id.get<std::string>());
  s.next_transfer_id = j.at("next_transfer_id").get<std::uint64_t>();
  s.record_count = j.at("record_count").get<std::uint64_t>();
  return s;
}

}  // namespace

std::string encode_record(const JournalRecord& record) {
  json j;
  if (const auto* open = std::get_if<OpenRecord>(&record)) {
    j = {{"type", "open"}, {"seq", open->seq}, {"account", open->account},
         {"initial", open->initial.value}, {"at", to_ms(open->at)}};
  } else if (const auto* ev = std::get_if<EventRecord>(&record)) {
    json transfers = json::array();
    for (const auto& t : ev->transfers) transfers.push_back(transfer_to_json(t));
    json skipped = json::array();
    for (const auto& s : ev->skipped) {
      skipped.push_back({{"species", s.species}, {"owed", s.owed.value},
                         {"available", s.available.value}});
    }
    j = {{"type", "event"}, {"seq", ev->seq},         {"event_id", ev->event_id},
         {"at", to_ms(ev->at)}, {"transfers", transfers}, {"skipped", skipped}};
  } else {
    const auto& tr = std::get<DirectTransferRecord>(record);
    j = {{"type", "transfer"}, {"seq", tr.seq}, {"transfer", transfer_to_json(tr.transfer)}};
  }
  return j.dump();
}

std::optional<JournalRecord> decode_record(std::string_view line, std::string* error) {
  try {
    const json j = json::parse(line);
    const auto type = j.at("type").get<std::string>();
    const auto seq = j.at("seq").get<std::uint64_t>();
    if (type == "open") {
      return OpenRecord{seq, j.at("account").get<std::string>(),
                        Pence(j.at("initial").get<std::int64_t>()),
                        from_ms(j.at("at").get<std::int64_t>())};
    }
    if (type == "event") {
      EventRecord ev{seq, j.at("event_id").get<std::string>(),
                     from_ms(j.at("at").get<std::int64_t>()), {}, {}};
      for (const auto& t : j.at("transfers")) ev.transfers.push_back(transfer_from_json(t));
      for (const auto& s : j.at("skipped")) {
        ev.skipped.push_back({s.at("species").get<std::string>(),
                              Pence(s.at("owed").get<std::int64_t>()),
                              Pence(s.at("available").get<std::int64_t>())});
      }
      return ev;
    }
    if (type == "transfer") return DirectTransferRecord{seq, transfer_from_json(j.at("transfer"))};
    if (error) *error = "unknown record type '" + type + "'";
  } catch (const std::exception& e) {
    if (error) *error = e.what();
  }
  return std::nullopt;
}

namespace {

void check_transfer(const LedgerState& s, const TransferRecord& t, std::uint64_t expected_id,
                    std::map<std::string, Pence>& pending) {
  if (t.transfer_id != expected_id) throw LedgerError("transfer id out of sequence");
  if (!(t.amount > Pence(0))) throw LedgerError("non-positive transfer amount");
  if (t.from == t.to) throw LedgerError("transfer to self");
  const auto from = s.accounts.find(t.from);
  const auto to = s.accounts.find(t.to);
  if (from == s.accounts.end()) throw UnknownAccount("unknown account '" + t.from + "'");
  if (to == s.accounts.end()) throw UnknownAccount("unknown account '" + t.to + "'");
  auto [it, fresh] = pending.try_emplace(t.from, from->second.balance);
  if (it->second < t.amount) throw InsufficientFunds("insufficient funds in '" + t.from + "'");
  it->second -= t.amount;
  auto [jt, fresh_to] = pending.try_emplace(t.to, to->second.balance);
  jt->second += t.amount;
}

void commit_transfers(LedgerState& s, const std::vector<TransferRecord>& transfers) {
  for (const auto& t : transfers) {
    s.accounts.at(t.from).balance -= t.amount;
    s.accounts.at(t.to).balance += t.amount;
    s.journal.push_back(t);
    s.next_transfer_id = t.transfer_id + 1;
  }
}

}  // namespace

void apply_record(LedgerState& state, const JournalRecord& record) {
  const std::uint64_t seq = std::visit([](const auto& r) { return r.seq; }, record);
  if (seq != state.record_count + 1) throw LedgerError("journal sequence gap");

  if (const auto* open = std::get_if<OpenRecord>(&record)) {
    if (open->account.empty()) throw LedgerError("empty account id");
    if (state.accounts.contains(open->account)) {
      throw LedgerError("account '" + open->account + "' already open");
    }
    if (open->initial < Pence(0)) throw LedgerError("negative initial credit");
    state.accounts.emplace(open->account,
                           Account{open->account, open->initial, open->initial, open->at});
  } else if (const auto* ev = std::get_if<EventRecord>(&record)) {
    if (ev->event_id.empty()) throw LedgerError("empty event id");
    if (state.applied_event_ids.contains(ev->event_id)) {
      throw LedgerError("event '" + ev->event_id + "' already applied");
    }
    std::map<std::string, Pence> pending;
    std::uint64_t id = state.next_transfer_id;
    for (const auto& t : ev->transfers) {
      if (t.event_id != ev->event_id) throw LedgerError("transfer tagged with another event");
      check_transfer(state, t, id++, pending);
    }
    commit_transfers(state, ev->transfers);
    state.applied_event_ids.insert(ev->event_id);
  } else {
    const auto& tr = std::get<DirectTransferRecord>(record);
    std::map<std::string, Pence> pending;
    check_transfer(state, tr.transfer, state.next_transfer_id, pending);
    commit_transfers(state, {tr.transfer});
  }
  state.record_count = seq;
}

std::filesystem::path snapshot_path_for(const std::filesystem::path& journal_path) {
  auto p = journal_path;
  p += ".snapshot";
  return p;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string genesis_hash(std::string_view journal) {
  const auto nl = journal.find('\n');
  if (nl == std::string_view::npos) return {};
  return util::sha256_hex(journal.substr(0, nl));
}

}  // namespace

JournalScan scan_journal(const std::filesystem::path& journal_path) {
  JournalScan scan;
  const std::string data = read_file(journal_path);
  std::size_t offset = 0;

  if (const auto snap_path = snapshot_path_for(journal_path); std::filesystem::exists(snap_path)) {
    try {
      const json snap = json::parse(read_file(snap_path));
      const auto bytes = snap.at("journal_bytes").get<std::uint64_t>();
      if (snap.at("genesis_hash").get<std::string>() == genesis_hash(data) && bytes > 0 &&
          bytes <= data.size() && data[bytes - 1] == '\n') {
        scan.state = state_from_json(snap.at("state"));
        offset = bytes;
        scan.report.used_snapshot = true;
      }
    } catch (const std::exception&) {
      // Unusable snapshot: fall back to a full replay.
    }
  }

  std::uint64_t line_no = 0;
  {
    // Count lines covered by the snapshot so truncation points stay 1-based
    // over the whole file.
    for (std::size_t i = 0; i < offset; ++i) line_no += data[i] == '\n';
  }
  scan.report.records = scan.state.record_count;
  while (offset < data.size()) {
    ++line_no;
    const auto nl = data.find('\n', offset);
    if (nl == std::string::npos) {
      scan.report.truncated = true;
      scan.report.truncated_at_line = line_no;
      scan.report.reason = "unterminated final record";
      break;
    }
    std::string error;
    const auto record = decode_record(std::string_view(data).substr(offset, nl - offset), &error);
    if (!record) {
      scan.report.truncated = true;
      scan.report.truncated_at_line = line_no;
      scan.report.reason = "unparsable record: " + error;
      break;
    }
    try {
      apply_record(scan.state, *record);
    } catch (const LedgerError& e) {
      scan.report.truncated = true;
      scan.report.truncated_at_line = line_no;
      scan.report.reason = std::string("inconsistent record: ") + e.what();
      break;
    }
    offset = nl + 1;
    ++scan.report.records;
  }
  scan.report.valid_bytes = offset;
  return scan;
}

void write_snapshot_file(const std::filesystem::path& journal_path, const LedgerState& state,
                         std::uint64_t journal_bytes) {
  const std::string data = read_file(journal_path);
  const json snap{{"genesis_hash", genesis_hash(data)},
                  {"record_count", state.record_count},
                  {"journal_bytes", journal_bytes},
                  {"state", state_to_json(state)}};
  const auto final_path = snapshot_path_for(journal_path);
  auto tmp = final_path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw LedgerError("cannot write snapshot " + tmp.string());
    out << snap.dump() << '\n';
    if (!out.flush()) throw LedgerError("cannot write snapshot " + tmp.string());
  }
  std::filesystem::rename(tmp, final_path);
}

Journal::Journal(const std::filesystem::path& path, bool fsync) : fsync_(fsync) {
  fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw LedgerError("cannot open journal " + path.string() + ": " + std::strerror(errno));
  }
  const off_t end = ::lseek(fd_, 0, SEEK_END);
  size_ = end < 0 ? 0 : static_cast<std::uint64_t>(end);
}

Journal::~Journal() {
  if (fd_ >= 0) ::close(fd_);
}

void Journal::append(std::string_view line) {
  std::string buf(line);
  buf.push_back('\n');
  std::size_t done = 0;
  while (done < buf.size()) {
    const ssize_t n = ::write(fd_, buf.data() + done, buf.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      // If this fails too, restore cuts the torn line.
      [[maybe_unused]] const int rc = ::ftruncate(fd_, static_cast<off_t>(size_));
      throw LedgerError(std::string("journal write failed: ") + std::strerror(err));
    }
    done += static_cast<std::size_t>(n);
  }
  if (fsync_ && ::fdatasync(fd_) != 0) {
    const int err = errno;
    [[maybe_unused]] const int rc = ::ftruncate(fd_, static_cast<off_t>(size_));
    throw LedgerError(std::string("journal sync failed: ") + std::strerror(err));
  }
  size_ += buf.size();
}

}  // namespace biopay::ledger
