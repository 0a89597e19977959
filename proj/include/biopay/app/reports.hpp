#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "biopay/ledger/ledger.hpp"
#include "biopay/metrics/classification.hpp"
#include "biopay/metrics/roc.hpp"

namespace biopay::app {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// RFC 4180 subset: fields are quoted only when they contain a comma, quote
// or line break. Rows end in '\n'.
std::string csv_field(std::string_view field);
std::string csv_row(const std::vector<std::string>& fields);
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

// Fixed six decimals; the same value always prints the same way.
std::string format_ratio(double value);

// "Equus quagga" -> "Equus_quagga"; anything outside [A-Za-z0-9._-] becomes '_'.
std::string file_safe(std::string_view name);

inline constexpr std::string_view kPaymentsHeader = "Species,Detections,Guardian Payment (GBP)";

// Amounts without the currency sign, ending in "Total,<n>,<amount>".
std::string payments_csv(const ledger::PaymentTable& table);
ledger::PaymentTable parse_payments_csv(std::string_view text);

std::string metrics_csv(const metrics::MetricTable& table);
std::string confusion_csv(const metrics::ConfusionMatrix& cm,
                          const std::vector<std::string>& class_names);
std::string roc_csv(const metrics::RocCurve& curve);

// Accounts in the given order (unlisted accounts follow alphabetically),
// one per line: name, then balance as £X.YZ.
std::string balances_text(const ledger::LedgerState& state,
                          const std::vector<std::string>& preferred_order);

std::string statement_text(const ledger::Statement& s);

struct ReportBundle {
  std::vector<metrics::MetricTable> folds;
  metrics::MetricTable average;
  std::vector<std::string> class_names;
  std::optional<metrics::ConfusionMatrix> confusion;  // pooled over folds
  std::vector<std::pair<std::string, std::optional<metrics::RocCurve>>> roc;
  ledger::PaymentTable payments;
  nlohmann::json run;  // metadata, no wall-clock values
};

// Writes metrics_fold{i}.csv, metrics_avg.csv, confusion.csv,
// roc_{class}.csv, payments.csv and run.json. Returns the paths written.
std::vector<std::filesystem::path> write_bundle(const std::filesystem::path& dir,
                                                const ReportBundle& bundle);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace biopay::app
