#include "biopay/app/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "biopay/ingest/backend.hpp"
#include "biopay/ingest/replay.hpp"
#include "biopay/ingest/voc.hpp"
#include "biopay/ingest/xml.hpp"
#include "biopay/metrics/average_precision.hpp"
#include "biopay/metrics/folds.hpp"
#include "biopay/util/digest.hpp"

namespace biopay::app {

using nlohmann::json;

std::unique_ptr<ledger::Ledger> open_ledger(const RunConfig& config, util::Clock clock) {
  ledger::LedgerOptions options;
  options.clock = std::move(clock);
  options.fsync = config.fsync;
  std::unique_ptr<ledger::Ledger> ledger;
  if (config.journal_path.empty()) {
    ledger = std::make_unique<ledger::Ledger>(options);
  } else {
    ledger = std::make_unique<ledger::Ledger>(std::filesystem::path(config.journal_path), options);
  }
  ensure_accounts(*ledger, config);
  return ledger;
}

void ensure_accounts(ledger::Ledger& ledger, const RunConfig& config) {
  const std::string guardian(ledger::kGuardianAccount);
  if (!ledger.has_account(guardian)) ledger.open_account(guardian);
  for (const auto& s : config.species()) {
    if (!ledger.has_account(s)) ledger.open_account(s);
  }
}

ledger::PaymentTable payments_from_state(const ledger::LedgerState& state,
                                         const std::vector<std::string>& species) {
  std::map<std::string, ledger::PaymentRow> by_species;
  const std::string guardian(ledger::kGuardianAccount);
  for (const auto& t : state.journal) {
    if (t.to != guardian || t.event_id.empty()) continue;
    auto& row = by_species[t.from];
    row.species = t.from;
    ++row.detections;
    row.payment += t.amount;
  }
  ledger::PaymentTable table;
  for (const auto& s : species) {
    auto it = by_species.find(s);
    ledger::PaymentRow row{s, 0, ledger::Pence(0)};
    if (it != by_species.end()) row = it->second;
    table.rows.push_back(row);
    table.total_detections += row.detections;
    table.total_payment += row.payment;
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const auto& a, const auto& b) { return a.detections < b.detections; });
  return table;
}

std::unique_ptr<ingest::DetectorBackend> make_backend(const RunConfig& config) {
  if (config.backend.kind == "http") {
    return std::make_unique<ingest::HttpDetectorBackend>(
        config.backend.url, std::chrono::milliseconds(config.backend.timeout_ms));
  }
  return std::make_unique<ingest::FixtureBackend>();
}

ingest::PipelineOptions pipeline_options(const RunConfig& config) {
  ingest::PipelineOptions o;
  o.conf_threshold = config.conf_threshold;
  o.nms_threshold = config.nms_threshold;
  o.policy = config.policy;
  o.workers = config.workers;
  o.retry.max_attempts = config.backend.max_attempts;
  o.retry.initial_backoff = std::chrono::milliseconds(config.backend.initial_backoff_ms);
  o.retry.max_backoff = std::chrono::milliseconds(config.backend.max_backoff_ms);
  return o;
}

// ---- replay ---------------------------------------------------------------

int cmd_replay(const RunConfig& config, const ReplayOptions& options, std::ostream& out,
               std::ostream& err, ReplaySummary* summary) {
  if (!std::filesystem::exists(options.trace)) {
    err << "error: trace not found: " << options.trace.string() << "\n";
    return kExitFailure;
  }
  ingest::Trace trace;
  try {
    trace = ingest::load_trace(options.trace);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  for (const auto& w : trace.warnings) {
    err << "warning: " << options.trace.string() << ":" << w.line << ": " << w.message << "\n";
  }

  auto ledger = open_ledger(config);
  auto backend = make_backend(config);
  ingest::Pipeline pipeline(*ledger, *backend, pipeline_options(config));

  ReplaySummary s;
  s.warnings = trace.warnings.size();
  const auto expected_total = ledger->state().total_initial_credit();
  auto check = [&] {
    ++s.checkpoints;
    const auto st = ledger->state();
    if (st.total_balance() != expected_total) s.conserved = false;
    for (const auto& [id, a] : st.accounts) {
      if (a.balance < ledger::Pence(0)) s.conserved = false;
    }
  };

  std::size_t processed = 0;
  ingest::Replayer replayer(options.speed);
  replayer.run(trace, [&](ingest::ImageJob job) {
    pipeline.process(job);
    ++processed;
    if (options.checkpoint_every > 0 && processed % options.checkpoint_every == 0) check();
  });
  check();

  s.stats = pipeline.stats();
  s.final_state = ledger->state();
  s.payments = payments_from_state(s.final_state, config.species());

  const auto& st = s.stats;
  out << (st.events - st.blanks) << " detection events, " << ledger::format_gbp(st.paid)
      << " paid\n";
  out << "events " << st.events << ", detections " << st.detections << ", blanks " << st.blanks
      << ", duplicates " << st.duplicates << ", dead letters " << st.dead_letters
      << ", skipped payouts " << st.skipped_payouts << ", warnings " << s.warnings << "\n";
  if (!s.conserved) err << "error: money conservation violated\n";

  if (options.reports_dir) {
    try {
      std::filesystem::create_directories(*options.reports_dir);
      write_text_file(*options.reports_dir / "payments.csv", payments_csv(s.payments));
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitFailure;
    }
  }
  const bool ok = s.conserved;
  if (summary) *summary = std::move(s);
  return ok ? kExitOk : kExitFailure;
}

// ---- eval -----------------------------------------------------------------

namespace {

struct GtImage {
  std::string id;
  std::size_t truth = 0;
  std::vector<geom::GroundTruth> gts;
};

int class_index(const std::vector<std::string>& roster, const std::string& name) {
  auto it = std::find(roster.begin(), roster.end(), name);
  if (it == roster.end()) return -1;
  return static_cast<int>(it - roster.begin());
}

std::string digest_files(const std::vector<std::filesystem::path>& files) {
  util::Sha256 h;
  for (const auto& f : files) {
    const auto text = read_text_file(f);
    h.update(f.filename().string());
    h.update(std::string_view("\0", 1));
    h.update(std::to_string(text.size()));
    h.update(std::string_view("\0", 1));
    h.update(text);
  }
  return h.hex_digest();
}

json metrics_json(const metrics::ClassMetrics& m) {
  return json{{"accuracy", m.accuracy},       {"precision", m.precision}, {"sensitivity", m.sensitivity},
              {"specificity", m.specificity}, {"f1", m.f1},               {"support", m.support}};
}

}  // namespace

int cmd_eval(const RunConfig& config, const EvalOptions& options, std::ostream& out,
             std::ostream& err, EvalResult* result) {
  const auto& roster = config.roster;
  const auto blank = config.blank_index();
  if (!blank) {
    err << "error: eval needs '" << kBlankClass << "' in the roster\n";
    return kExitFailure;
  }

  // Ground truth.
  std::vector<std::filesystem::path> xml_files;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(options.ground_truth_dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".xml") xml_files.push_back(entry.path());
  }
  if (ec) {
    err << "error: cannot read ground truth directory " << options.ground_truth_dir.string()
        << ": " << ec.message() << "\n";
    return kExitFailure;
  }
  std::sort(xml_files.begin(), xml_files.end());

  std::vector<GtImage> images;
  std::map<std::string, std::size_t> image_index;
  for (const auto& path : xml_files) {
    ingest::AnnotationDoc doc;
    try {
      doc = ingest::parse_voc_xml(read_text_file(path));
    } catch (const ingest::XmlError& e) {
      err << "error: " << path.string() << ": " << e.what() << "\n";
      return kExitFailure;
    } catch (const std::exception& e) {
      err << "error: " << path.string() << ": " << e.what() << "\n";
      return kExitFailure;
    }
    GtImage img;
    img.id = doc.filename.empty() ? path.stem().string() : doc.filename;
    img.truth = *blank;
    for (std::size_t i = 0; i < doc.objects.size(); ++i) {
      const int cls = class_index(roster, doc.objects[i].name);
      if (cls < 0 || static_cast<std::size_t>(cls) == *blank) {
        err << "error: " << path.string() << ": object " << i << " has unknown class '"
            << doc.objects[i].name << "'\n";
        return kExitFailure;
      }
      if (i == 0) img.truth = static_cast<std::size_t>(cls);
      img.gts.push_back({doc.objects[i].box.to_box(), cls});
    }
    if (!image_index.emplace(img.id, images.size()).second) {
      err << "error: duplicate image id '" << img.id << "' in ground truth\n";
      return kExitFailure;
    }
    images.push_back(std::move(img));
  }
  if (images.empty()) {
    err << "error: no VOC annotations in " << options.ground_truth_dir.string() << "\n";
    return kExitFailure;
  }

  // Predictions: {"image": id, "detections": [...]} per line.
  std::vector<std::vector<ingest::RawDetection>> raw(images.size());
  std::size_t unmatched = 0;
  {
    std::ifstream in(options.predictions);
    if (!in) {
      err << "error: cannot read predictions " << options.predictions.string() << "\n";
      return kExitFailure;
    }
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto j = json::parse(line);
        const auto id = j.at("image").get<std::string>();
        std::vector<ingest::RawDetection> dets;
        for (const auto& d : j.at("detections")) {
          auto det = ingest::detection_from_json(d);
          if (class_index(roster, det.species) < 0) {
            throw std::invalid_argument("unknown class '" + det.species + "'");
          }
          dets.push_back(std::move(det));
        }
        auto it = image_index.find(id);
        if (it == image_index.end()) {
          ++unmatched;
          continue;
        }
        auto& slot = raw[it->second];
        slot.insert(slot.end(), dets.begin(), dets.end());
      } catch (const std::exception& e) {
        err << "error: " << options.predictions.string() << ":" << n << ": " << e.what() << "\n";
        return kExitFailure;
      }
    }
  }
  if (unmatched > 0) {
    err << "warning: " << unmatched << " prediction lines name images without annotations\n";
  }

  // Catalog over the classes that actually occur, in roster order.
  std::vector<std::size_t> present;
  metrics::Catalog catalog;
  for (std::size_t c = 0; c < roster.size(); ++c) {
    metrics::CatalogClass cc{roster[c], {}};
    for (const auto& img : images) {
      if (img.truth == c) cc.image_ids.push_back(img.id);
    }
    if (!cc.image_ids.empty()) {
      present.push_back(c);
      catalog.push_back(std::move(cc));
    }
  }

  metrics::FoldProtocol protocol = config.folds;
  if (options.folds) protocol.folds = *options.folds;
  if (options.per_class) protocol.per_class = *options.per_class;
  if (options.seed) protocol.seed = *options.seed;

  std::vector<metrics::FoldSpec> folds;
  try {
    folds = metrics::make_folds(catalog, protocol);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }

  // Image-level predictions after thresholding and suppression.
  std::vector<std::vector<ingest::RawDetection>> kept(images.size());
  std::vector<std::size_t> predicted(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    kept[i] = ingest::postprocess(raw[i], config.conf_threshold, config.nms_threshold);
    std::vector<geom::Detection> dets;
    for (const auto& d : kept[i]) dets.push_back({d.box, class_index(roster, d.species), d.score});
    predicted[i] = metrics::predicted_image_class(dets, *blank);
  }

  ReportBundle bundle;
  bundle.class_names = roster;
  bundle.confusion = metrics::ConfusionMatrix(roster.size());
  for (const auto& fold : folds) {
    metrics::ConfusionMatrix cm(roster.size());
    for (const auto& e : fold.entries) {
      const auto i = image_index.at(e.image_id);
      cm.add(images[i].truth, predicted[i]);
    }
    *bundle.confusion += cm;
    bundle.folds.push_back(metrics::select_rows(metrics::metric_table(cm, roster), present));
  }
  bundle.average = metrics::aggregate_folds(bundle.folds);

  // ROC per class over every annotated image.
  json auc = json::object();
  for (std::size_t c = 0; c < roster.size(); ++c) {
    std::vector<metrics::ScoredLabel> samples;
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < images.size(); ++i) {
      double score = 0.0;
      if (c == *blank) {
        double top = 0.0;
        for (const auto& d : raw[i]) top = std::max(top, d.score);
        score = 1.0 - top;
      } else {
        for (const auto& d : raw[i]) {
          if (d.species == roster[c]) score = std::max(score, d.score);
        }
      }
      const bool positive = images[i].truth == c;
      pos = pos || positive;
      neg = neg || !positive;
      samples.push_back({score, positive});
    }
    std::optional<metrics::RocCurve> curve;
    if (pos && neg) curve = metrics::roc_auc(samples);
    auc[roster[c]] = curve ? json(curve->auc) : json(nullptr);
    bundle.roc.emplace_back(roster[c], std::move(curve));
  }

  // Detection metrics over the species classes.
  std::vector<metrics::ImageEval> evals(images.size());
  std::vector<int> species_ids;
  for (std::size_t c = 0; c < roster.size(); ++c) {
    if (c != *blank) species_ids.push_back(static_cast<int>(c));
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    evals[i].gts = images[i].gts;
    for (const auto& d : raw[i]) evals[i].dets.push_back({d.box, class_index(roster, d.species), d.score});
  }
  const auto maps = metrics::map_suite(evals, species_ids);
  const auto ars = metrics::recall_suite(evals, species_ids);

  // Payments the kept detections would earn.
  std::vector<std::pair<std::string, std::uint64_t>> counts;
  for (std::size_t c = 0; c < roster.size(); ++c) {
    if (c == *blank) continue;
    std::uint64_t n = 0;
    for (const auto& dets : kept) {
      const auto k = std::count_if(dets.begin(), dets.end(),
                                   [&](const auto& d) { return d.species == roster[c]; });
      if (config.policy.granularity == ledger::Granularity::PerImage) n += k > 0 ? 1 : 0;
      else n += static_cast<std::uint64_t>(k);
    }
    counts.emplace_back(roster[c], n);
  }
  bundle.payments = ledger::replay_counts(counts, config.policy);

  std::vector<std::string> present_names;
  for (auto c : present) present_names.push_back(roster[c]);
  json fold_sizes = json::array();
  for (const auto& f : folds) fold_sizes.push_back(f.entries.size());
  bundle.run = json{
      {"config_digest", config_digest(config)},
      {"inputs",
       {{"predictions_sha256", digest_files({options.predictions})},
        {"ground_truth_sha256", digest_files(xml_files)},
        {"annotation_files", xml_files.size()}}},
      {"fold_protocol",
       {{"folds", protocol.folds}, {"per_class", protocol.per_class}, {"seed", protocol.seed}}},
      {"fold_sizes", fold_sizes},
      {"classes", present_names},
      {"images", images.size()},
      {"conf_threshold", config.conf_threshold},
      {"nms_threshold", config.nms_threshold},
      {"overall", metrics_json(bundle.average.overall)},
      {"map",
       {{"map", maps.map},
        {"map_50", maps.map_50},
        {"map_75", maps.map_75},
        {"map_small", maps.map_small},
        {"map_medium", maps.map_medium},
        {"map_large", maps.map_large}}},
      {"recall",
       {{"ar_1", ars.ar_1},
        {"ar_10", ars.ar_10},
        {"ar_100", ars.ar_100},
        {"ar_100_small", ars.ar_100_small},
        {"ar_100_medium", ars.ar_100_medium},
        {"ar_100_large", ars.ar_100_large}}},
      {"auc", auc},
      {"payments",
       {{"total_detections", bundle.payments.total_detections},
        {"total_payment", ledger::format_amount(bundle.payments.total_payment)}}},
      {"warnings", unmatched}};

  const auto dir = options.reports_dir ? *options.reports_dir : std::filesystem::path(config.reports_dir);
  EvalResult r;
  try {
    r.written = write_bundle(dir, bundle);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  out << images.size() << " images, " << folds.size() << " folds of "
      << (folds.empty() ? 0 : folds.front().entries.size()) << "\n";
  out << "overall accuracy " << format_ratio(bundle.average.overall.accuracy) << ", precision "
      << format_ratio(bundle.average.overall.precision) << ", sensitivity "
      << format_ratio(bundle.average.overall.sensitivity) << ", specificity "
      << format_ratio(bundle.average.overall.specificity) << ", f1 "
      << format_ratio(bundle.average.overall.f1) << "\n";
  out << "mAP " << format_ratio(maps.map) << ", mAP@0.5 " << format_ratio(maps.map_50)
      << ", mAP@0.75 " << format_ratio(maps.map_75) << "\n";
  out << "reports written to " << dir.string() << "\n";
  r.bundle = std::move(bundle);
  if (result) *result = std::move(r);
  return kExitOk;
}

// ---- ledger ---------------------------------------------------------------

std::vector<std::pair<std::string, std::uint64_t>> parse_counts(std::string_view text) {
  std::vector<std::pair<std::string, std::uint64_t>> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return out;
  auto add = [&](std::string name, long long n) {
    if (name.empty()) throw std::invalid_argument("counts: empty species name");
    if (n < 0) throw std::invalid_argument("counts: negative count for " + name);
    for (const auto& [s, _] : out) {
      if (s == name) throw std::invalid_argument("counts: duplicate species " + name);
    }
    out.emplace_back(std::move(name), static_cast<std::uint64_t>(n));
  };
  if (text[first] == '{' || text[first] == '[') {
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(text);
      if (j.is_object()) {
        for (const auto& [k, v] : j.items()) add(k, v.get<long long>());
      } else {
        for (const auto& pair : j) {
          if (!pair.is_array() || pair.size() != 2) throw std::invalid_argument("counts: expected [species, n] pairs");
          add(pair[0].get<std::string>(), pair[1].get<long long>());
        }
      }
    } catch (const nlohmann::ordered_json::exception& e) {
      throw std::invalid_argument(std::string("counts: ") + e.what());
    }
    return out;
  }
  const auto rows = parse_csv(text);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() < 2) throw std::invalid_argument("counts: line " + std::to_string(i + 1) + " needs species,count");
    long long n = 0;
    const auto& cell = row[1];
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), n);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
      if (i == 0) continue;  // header
      throw std::invalid_argument("counts: bad count '" + cell + "' on line " + std::to_string(i + 1));
    }
    if (row[0] == "Total") continue;
    add(row[0], n);
  }
  return out;
}

namespace {

std::vector<std::string> account_order(const RunConfig& config) {
  auto order = config.species();
  order.emplace_back(ledger::kGuardianAccount);
  return order;
}

}  // namespace

int cmd_ledger_balances(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    ledger::LedgerState state;
    if (!config.journal_path.empty() && std::filesystem::exists(config.journal_path)) {
      state = ledger::Ledger::restore(config.journal_path);
    }
    if (state.accounts.empty()) {
      RunConfig fresh = config;
      fresh.journal_path.clear();
      state = open_ledger(fresh)->state();
    }
    out << balances_text(state, account_order(config));
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int cmd_ledger_statement(const RunConfig& config, const std::string& account,
                         const std::optional<std::string>& from,
                         const std::optional<std::string>& to, std::ostream& out,
                         std::ostream& err) {
  util::Timestamp begin{};
  util::Timestamp end = *util::parse_rfc3339("9999-12-31T23:59:59.999Z");
  if (from) {
    auto t = util::parse_rfc3339(*from);
    if (!t) {
      err << "error: --from is not an RFC 3339 time\n";
      return kExitUsage;
    }
    begin = *t;
  }
  if (to) {
    auto t = util::parse_rfc3339(*to);
    if (!t) {
      err << "error: --to is not an RFC 3339 time\n";
      return kExitUsage;
    }
    end = *t;
  }
  try {
    auto ledger = open_ledger(config);
    if (!ledger->has_account(account)) {
      err << "error: unknown account '" << account << "'\n";
      return kExitFailure;
    }
    out << statement_text(ledger->statement(account, begin, end));
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int cmd_ledger_replay_counts(const RunConfig& config, const std::filesystem::path& counts,
                             std::ostream& out, std::ostream& err) {
  try {
    const auto table = ledger::replay_counts(parse_counts(read_text_file(counts)), config.policy);
    out << payments_csv(table);
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace biopay::app
