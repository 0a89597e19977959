#include "biopay/app/reports.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace biopay::app {

std::string csv_field(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out += ',';
    out += csv_field(fields[i]);
  }
  out += '\n';
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_row = [&] {
    row.push_back(std::move(field));
    field.clear();
    rows.push_back(std::move(row));
    row.clear();
    field_started = false;
  };
  while (i < text.size()) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        quoted = false;
        ++i;
        if (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
          throw ReportError("csv: text after closing quote");
        }
        continue;
      }
      field += c;
      ++i;
      continue;
    }
    if (c == '"') {
      if (!field.empty()) throw ReportError("csv: quote inside unquoted field");
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\n') {
      end_row();
    } else if (c == '\r') {
      if (i + 1 >= text.size() || text[i + 1] != '\n') throw ReportError("csv: stray carriage return");
    } else {
      field += c;
      field_started = true;
    }
    ++i;
  }
  if (quoted) throw ReportError("csv: unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::string format_ratio(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  std::string s = buf;
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string file_safe(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                    c == '.' || c == '-' || c == '_';
    out += ok ? c : '_';
  }
  return out.empty() ? "_" : out;
}

std::string payments_csv(const ledger::PaymentTable& table) {
  std::string out(kPaymentsHeader);
  out += '\n';
  for (const auto& r : table.rows) {
    out += csv_row({r.species, std::to_string(r.detections), ledger::format_amount(r.payment)});
  }
  out += csv_row({"Total", std::to_string(table.total_detections),
                  ledger::format_amount(table.total_payment)});
  return out;
}

namespace {

std::uint64_t parse_count(const std::string& s) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) throw ReportError("bad count '" + s + "'");
  return v;
}

}  // namespace

ledger::PaymentTable parse_payments_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty() || csv_row(rows.front()) != std::string(kPaymentsHeader) + "\n") {
    throw ReportError("payments csv: missing header");
  }
  if (rows.size() < 2 || rows.back().size() != 3 || rows.back()[0] != "Total") {
    throw ReportError("payments csv: missing Total row");
  }
  ledger::PaymentTable table;
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
    if (rows[i].size() != 3) throw ReportError("payments csv: row " + std::to_string(i + 1) + " needs 3 fields");
    const auto amount = ledger::parse_amount(rows[i][2]);
    if (!amount) throw ReportError("payments csv: bad amount '" + rows[i][2] + "'");
    table.rows.push_back({rows[i][0], parse_count(rows[i][1]), *amount});
  }
  table.total_detections = parse_count(rows.back()[1]);
  const auto total = ledger::parse_amount(rows.back()[2]);
  if (!total) throw ReportError("payments csv: bad total amount");
  table.total_payment = *total;
  return table;
}

std::string metrics_csv(const metrics::MetricTable& table) {
  std::string out = "class,accuracy,precision,sensitivity,specificity,f1,support\n";
  auto line = [&](const std::string& name, const metrics::ClassMetrics& m) {
    out += csv_row({name, format_ratio(m.accuracy), format_ratio(m.precision),
                    format_ratio(m.sensitivity), format_ratio(m.specificity), format_ratio(m.f1),
                    format_ratio(m.support)});
  };
  for (std::size_t i = 0; i < table.rows.size(); ++i) line(table.class_names[i], table.rows[i]);
  line("Overall", table.overall);
  return out;
}

std::string confusion_csv(const metrics::ConfusionMatrix& cm,
                          const std::vector<std::string>& class_names) {
  if (class_names.size() != cm.num_classes()) throw ReportError("confusion: class names mismatch");
  std::vector<std::string> header{"truth\\predicted"};
  header.insert(header.end(), class_names.begin(), class_names.end());
  std::string out = csv_row(header);
  for (std::size_t t = 0; t < cm.num_classes(); ++t) {
    std::vector<std::string> row{class_names[t]};
    for (std::size_t p = 0; p < cm.num_classes(); ++p) row.push_back(std::to_string(cm.at(t, p)));
    out += csv_row(row);
  }
  return out;
}

std::string roc_csv(const metrics::RocCurve& curve) {
  std::string out = "fpr,tpr\n";
  for (const auto& p : curve.points) out += format_ratio(p.fpr) + "," + format_ratio(p.tpr) + "\n";
  return out;
}

std::string balances_text(const ledger::LedgerState& state,
                          const std::vector<std::string>& preferred_order) {
  std::vector<std::string> order;
  std::set<std::string> listed;
  for (const auto& id : preferred_order) {
    if (state.accounts.contains(id) && listed.insert(id).second) order.push_back(id);
  }
  for (const auto& [id, _] : state.accounts) {
    if (listed.insert(id).second) order.push_back(id);
  }
  std::size_t width = 0;
  for (const auto& id : order) width = std::max(width, id.size());
  std::string out;
  for (const auto& id : order) {
    out += id;
    out.append(width - id.size() + 2, ' ');
    out += ledger::format_gbp(state.accounts.at(id).balance);
    out += '\n';
  }
  return out;
}

std::string statement_text(const ledger::Statement& s) {
  std::ostringstream out;
  out << "account " << s.account_id << "\n";
  out << "from " << util::format_rfc3339(s.from) << " to " << util::format_rfc3339(s.to) << "\n";
  out << "opening " << ledger::format_gbp(s.opening) << "\n";
  for (const auto& t : s.records) {
    const bool credit = t.to == s.account_id;
    out << t.transfer_id << "  " << util::format_rfc3339(t.applied_at) << "  "
        << (credit ? "+" : "-") << ledger::format_gbp(t.amount) << "  "
        << (credit ? "from " + t.from : "to " + t.to);
    if (!t.event_id.empty()) out << "  event " << t.event_id;
    out << "\n";
  }
  out << "closing " << ledger::format_gbp(s.closing) << "\n";
  return out.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ReportError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ReportError("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ReportError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::filesystem::path> write_bundle(const std::filesystem::path& dir,
                                                const ReportBundle& bundle) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    const auto path = dir / name;
    write_text_file(path, text);
    written.push_back(path);
  };
  for (std::size_t i = 0; i < bundle.folds.size(); ++i) {
    emit("metrics_fold" + std::to_string(i + 1) + ".csv", metrics_csv(bundle.folds[i]));
  }
  emit("metrics_avg.csv", metrics_csv(bundle.average));
  if (bundle.confusion) emit("confusion.csv", confusion_csv(*bundle.confusion, bundle.class_names));
  for (const auto& [name, curve] : bundle.roc) {
    if (curve) emit("roc_" + file_safe(name) + ".csv", roc_csv(*curve));
  }
  emit("payments.csv", payments_csv(bundle.payments));
  emit("run.json", bundle.run.dump(2) + "\n");
  return written;
}

}  // namespace biopay::app
