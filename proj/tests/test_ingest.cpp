#include <gtest/gtest.h>

#include <sys/socket.h>
#include <netinet/in.h>
#include <arpa/inet.h>
#include <unistd.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "biopay/geom/box.hpp"
#include "biopay/ingest/backend.hpp"
#include "biopay/ingest/event.hpp"
#include "biopay/ingest/mime.hpp"
#include "biopay/ingest/pipeline.hpp"
#include "biopay/ingest/replay.hpp"
#include "biopay/ingest/smtp.hpp"
#include "biopay/ingest/voc.hpp"
#include "biopay/ingest/xml.hpp"
#include "biopay/ledger/ledger.hpp"
#include "fixtures.hpp"
#include "ingest_fixtures.hpp"

namespace {

using namespace biopay::ingest;
using biopay::geom::BoundingBox;
using biopay::ledger::Ledger;
using biopay::ledger::Pence;
using biopay::util::Timestamp;
using std::chrono::milliseconds;

const std::string kGuardian(biopay::ledger::kGuardianAccount);

Timestamp fixed_time() { return Timestamp(milliseconds(1'760'868'000'000)); }

const char* kMinimalVoc = R"(<annotation>
  <folder>trial</folder>
  <filename>IMG_0001.JPG</filename>
  <size><width>1920</width><height>1072</height><depth>3</depth></size>
  <object>
    <name>Equus quagga</name>
    <pose>Unspecified</pose>
    <bndbox><xmin>10</xmin><ymin>20</ymin><xmax>110</xmax><ymax>220</ymax></bndbox>
  </object>
</annotation>
)";

std::vector<std::string> reply_codes(const std::string& replies) {
  std::vector<std::string> codes;
  std::istringstream in(replies);
  std::string line;
  while (std::getline(in, line)) {
    if (line.size() >= 3 && (line.size() == 3 || line[3] == ' ')) codes.push_back(line.substr(0, 3));
  }
  return codes;
}

RawDetection det(std::string species, double x0, double y0, double x1, double y1, double score) {
  return {std::move(species), BoundingBox{x0, y0, x1, y1}, score};
}

ImageJob fixture_job(std::string id, std::vector<RawDetection> dets) {
  ImageJob j;
  j.event_id = std::move(id);
  j.camera_id = "camera01";
  j.captured_at = fixed_time();
  j.fixture_detections = std::move(dets);
  return j;
}

}  // namespace

// ---- XML / VOC

TEST(Xml, ParsesEntitiesCdataAndComments) {
  const auto root = parse_xml(
      "<?xml version=\"1.0\"?>\n<!-- c --><a k=\"v&amp;w\"><b>x &lt; y</b><c><![CDATA[<raw>]]></c></a>");
  EXPECT_EQ(root.name, "a");
  ASSERT_EQ(root.attributes.size(), 1u);
  EXPECT_EQ(root.attributes[0].second, "v&w");
  EXPECT_EQ(root.child("b")->text, "x < y");
  EXPECT_EQ(root.child("c")->text, "<raw>");
}

TEST(Xml, MismatchedTagReportsLineAndColumn) {
  try {
    parse_xml("<annotation>\n  <filename>a.jpg</name>\n</annotation>");
    FAIL() << "no error";
  } catch (const XmlError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_GT(e.column(), 1);
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}

TEST(Xml, TruncatedDocument) {
  EXPECT_THROW(parse_xml("<annotation><size>"), XmlError);
  EXPECT_THROW(parse_xml(""), XmlError);
  EXPECT_THROW(parse_xml("<a></a><b></b>"), XmlError);
}

TEST(Voc, ParsesMinimalDocument) {
  const auto doc = parse_voc_xml(kMinimalVoc);
  EXPECT_EQ(doc.filename, "IMG_0001.JPG");
  EXPECT_EQ(doc.size, (ImageSize{1920, 1072, 3}));
  ASSERT_EQ(doc.objects.size(), 1u);
  EXPECT_EQ(doc.objects[0].name, "Equus quagga");
  EXPECT_EQ(doc.objects[0].box, (PixelBox{10, 20, 110, 220}));
}

TEST(Voc, ZeroObjects) {
  const auto doc = parse_voc_xml(
      "<annotation><filename>b.jpg</filename><size><width>4</width><height>4</height>"
      "<depth>3</depth></size></annotation>");
  EXPECT_TRUE(doc.objects.empty());
  const auto text = serialize_voc_xml(doc);
  EXPECT_EQ(text.find("<object>"), std::string::npos);
  EXPECT_EQ(parse_voc_xml(text), doc);
}

TEST(Voc, InvertedBoxNamesObjectIndex) {
  std::string bad = kMinimalVoc;
  bad.replace(bad.find("<object>"), 0,
              "<object><name>Papio sp</name><bndbox><xmin>5</xmin><ymin>5</ymin>"
              "<xmax>50</xmax><ymax>50</ymax></bndbox></object>\n");
  bad.replace(bad.find("<xmin>10</xmin>"), 15, "<xmin>300</xmin>");
  try {
    parse_voc_xml(bad);
    FAIL() << "no error";
  } catch (const VocValidationError& e) {
    EXPECT_EQ(e.object_index(), 1);
    EXPECT_NE(std::string(e.what()).find("object 1"), std::string::npos);
  }
}

TEST(Voc, BoxOutsideImage) {
  std::string bad = kMinimalVoc;
  bad.replace(bad.find("<ymax>220</ymax>"), 16, "<ymax>1073</ymax>");
  EXPECT_THROW(parse_voc_xml(bad), VocValidationError);
}

TEST(Voc, NonIntegerCoordinate) {
  std::string bad = kMinimalVoc;
  bad.replace(bad.find("<xmin>10</xmin>"), 15, "<xmin>1x</xmin>");
  EXPECT_THROW(parse_voc_xml(bad), VocValidationError);
}

TEST(Voc, RoundTripExample) {
  const auto doc = parse_voc_xml(kMinimalVoc);
  EXPECT_EQ(parse_voc_xml(serialize_voc_xml(doc)), doc);
}

TEST(Voc, RandomDocsRoundTripByteStable) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 100; ++i) {
    const auto doc = fixture::random_voc_doc(rng);
    const auto once = serialize_voc_xml(doc);
    const auto back = parse_voc_xml(once);
    ASSERT_EQ(back, doc) << once;
    EXPECT_EQ(serialize_voc_xml(back), once);
  }
}

// ---- MIME

TEST(Mime, MultipartBase64Attachment) {
  const auto client = fixture::golden_smtp_client();
  const auto begin = client.find("From:");
  const auto end = client.find("\r\n.\r\n");
  const auto env = parse_mail_message(client.substr(begin, end - begin + 2));
  EXPECT_EQ(env.subject, "trigger 0042");
  EXPECT_EQ(env.body.substr(0, 10), "IR trigger");
  const auto* img = env.first_image();
  ASSERT_NE(img, nullptr);
  EXPECT_EQ(img->filename, "IMG_0042.JPG");
  EXPECT_EQ(img->content_type, "image/jpeg");
  EXPECT_EQ(img->bytes, fixture::kJpegBytes);
}

TEST(Mime, QuotedPrintableAndFoldedHeaders) {
  const auto env = parse_mail_message(
      "Subject: a\r\n long subject\r\nContent-Type: text/plain\r\n"
      "Content-Transfer-Encoding: quoted-printable\r\n\r\nsoft=\r\nbreak =3D ok\r\n");
  EXPECT_EQ(env.subject, "a long subject");
  EXPECT_NE(env.body.find("softbreak = ok"), std::string::npos);
  EXPECT_EQ(env.first_image(), nullptr);
}

TEST(Mime, GarbageNeverThrows) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    std::string s(rng() % 300, '\0');
    for (auto& c : s) c = static_cast<char>(rng());
    if (i % 2) s = "Content-Type: multipart/mixed; boundary=x\r\n\r\n--x\r\n" + s;
    EXPECT_NO_THROW(parse_mail_message(s));
  }
}

TEST(Mime, AddressLocalPart) {
  EXPECT_EQ(address_local_part("camera07@reserve"), "camera07");
  EXPECT_EQ(address_local_part("camera07"), "camera07");
}

// ---- SMTP

TEST(Smtp, GoldenSessionYieldsEnvelope) {
  SmtpSession s;
  EXPECT_EQ(s.greeting().substr(0, 4), "220 ");
  const auto replies = s.feed(fixture::golden_smtp_client());
  EXPECT_EQ(reply_codes(replies), (std::vector<std::string>{"250", "250", "250", "354", "250", "221"}));
  EXPECT_TRUE(s.closed());
  ASSERT_TRUE(s.envelope());
  EXPECT_EQ(s.envelope()->sender, "camera07@reserve");
  EXPECT_EQ(address_local_part(s.envelope()->sender), "camera07");
  EXPECT_EQ(s.envelope()->recipient, "intake@biopay.local");
  ASSERT_NE(s.envelope()->first_image(), nullptr);
  EXPECT_EQ(s.envelope()->first_image()->bytes, fixture::kJpegBytes);
}

TEST(Smtp, GoldenSessionByteAtATime) {
  SmtpSession s;
  std::string replies;
  for (char c : fixture::golden_smtp_client()) replies += s.feed(std::string_view(&c, 1));
  EXPECT_EQ(reply_codes(replies).size(), 6u);
  ASSERT_TRUE(s.envelope());
}

TEST(Smtp, DataBeforeMail) {
  SmtpSession s;
  const auto r = s.feed("HELO cam\r\nDATA\r\n");
  EXPECT_EQ(reply_codes(r), (std::vector<std::string>{"250", "503"}));
  EXPECT_FALSE(s.closed());
}

TEST(Smtp, QuitImmediately) {
  SmtpSession s;
  EXPECT_EQ(reply_codes(s.feed("QUIT\r\n")), std::vector<std::string>{"221"});
  EXPECT_TRUE(s.closed());
  EXPECT_FALSE(s.envelope());
}

TEST(Smtp, UnknownCommandDoesNotClose) {
  SmtpSession s;
  EXPECT_EQ(reply_codes(s.feed("FROB\r\n")), std::vector<std::string>{"500"});
  EXPECT_EQ(reply_codes(s.feed("HELO x\r\n")), std::vector<std::string>{"250"});
}

TEST(Smtp, OversizedMessage) {
  SmtpLimits lim;
  lim.max_message_bytes = 1024;
  SmtpSession s(lim);
  s.feed("HELO x\r\nMAIL FROM:<camera01@r>\r\nRCPT TO:<i@b>\r\nDATA\r\n");
  std::string big;
  for (int i = 0; i < 100; ++i) big += std::string(60, 'a') + "\r\n";
  const auto r = s.feed(big + ".\r\n");
  EXPECT_EQ(reply_codes(r), std::vector<std::string>{"552"});
  EXPECT_FALSE(s.envelope());
}

TEST(Smtp, HandlerRefusalIs554) {
  SmtpSession s({}, [](const MailEnvelope&) { return std::optional<std::string>("no"); });
  const auto r = s.feed("HELO x\r\nMAIL FROM:<a@b>\r\nRCPT TO:<c@d>\r\nDATA\r\nhi\r\n.\r\n");
  EXPECT_EQ(reply_codes(r).back(), "554");
}

TEST(Smtp, DotStuffing) {
  SmtpSession s;
  s.feed("HELO x\r\nMAIL FROM:<a@b>\r\nRCPT TO:<c@d>\r\nDATA\r\n\r\n..leading dot\r\n.\r\n");
  ASSERT_TRUE(s.envelope());
  EXPECT_NE(s.envelope()->body.find(".leading dot"), std::string::npos);
  EXPECT_EQ(s.envelope()->body.find(".."), std::string::npos);
}

TEST(Smtp, PathArgument) {
  EXPECT_EQ(parse_path_argument("FROM:<a@b>", "FROM:"), "a@b");
  EXPECT_EQ(parse_path_argument("from: <a@b>", "FROM:"), "a@b");
  EXPECT_FALSE(parse_path_argument("TO:<a@b>", "FROM:"));
  EXPECT_FALSE(parse_path_argument("FROM:a@b>", "FROM:"));
}

TEST(Smtp, SessionFuzzNeverThrows) {
  std::mt19937_64 rng(99);
  const std::vector<std::string> words{"HELO x\r\n", "MAIL FROM:<a@b>\r\n", "RCPT TO:<c@d>\r\n",
                                       "DATA\r\n",   ".\r\n",              "QUIT\r\n",
                                       "\r\n",       "RSET\r\n"};
  for (int i = 0; i < 2000; ++i) {
    SmtpLimits lim;
    lim.max_message_bytes = 256;
    SmtpSession s(lim);
    for (int k = 0; k < 12; ++k) {
      std::string chunk;
      if (rng() % 2) {
        chunk = words[rng() % words.size()];
      } else {
        chunk.resize(rng() % 700);
        for (auto& c : chunk) c = static_cast<char>(rng());
      }
      EXPECT_NO_THROW(s.feed(chunk));
    }
  }
}

TEST(SmtpServer, ServesGoldenSessionOverTcp) {
  std::optional<MailEnvelope> got;
  std::mutex mu;
  SmtpServer server({}, [&](const MailEnvelope& e) {
    std::lock_guard lock(mu);
    got = e;
    return std::optional<std::string>{};
  });
  const auto port = server.start(0);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ASSERT_EQ(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  const auto client = fixture::golden_smtp_client();
  ASSERT_EQ(::send(fd, client.data(), client.size(), 0), static_cast<ssize_t>(client.size()));
  std::string replies;
  char buf[512];
  for (ssize_t n; (n = ::recv(fd, buf, sizeof buf, 0)) > 0;) replies.append(buf, static_cast<std::size_t>(n));
  ::close(fd);
  EXPECT_EQ(reply_codes(replies), (std::vector<std::string>{"220", "250", "250", "250", "354", "250", "221"}));
  server.stop();
  std::lock_guard lock(mu);
  ASSERT_TRUE(got);
  EXPECT_EQ(got->sender, "camera07@reserve");
  EXPECT_EQ(server.stats().messages, 1u);
}

// ---- intake

struct Intake {
  CameraRegistry cameras = CameraRegistry::numbered(27);
  ImageStore images;
  AuditLog audit{[] { return fixed_time(); }};
  IntakeContext ctx() { return {&cameras, &images, &audit, [] { return fixed_time(); }}; }
};

MailEnvelope golden_envelope() {
  SmtpSession s;
  s.feed(fixture::golden_smtp_client());
  return *s.envelope();
}

TEST(Intake, SameEnvelopeSameId) {
  Intake in;
  const auto env = golden_envelope();
  const auto a = extract_event(env, in.ctx());
  const auto b = extract_event(env, in.ctx());
  EXPECT_EQ(a.event_id, b.event_id);
  EXPECT_EQ(a.camera_id, "camera07");
  EXPECT_EQ(a.source, EventSource::Smtp);
  EXPECT_EQ(a.image_bytes, fixture::kJpegBytes);
  EXPECT_EQ(a.captured_at, *biopay::util::parse_rfc3339("2026-10-19T10:00:00Z"));
}

TEST(Intake, DifferentBytesSameSecondDiffer) {
  Intake in;
  const auto a = extract_event("camera03", fixed_time(), "image-a", EventSource::Http, in.ctx());
  const auto b = extract_event("camera03", fixed_time(), "image-b", EventSource::Http, in.ctx());
  EXPECT_NE(a.event_id, b.event_id);
  EXPECT_EQ(a.event_id, event_digest("camera03", fixed_time(), "image-a"));
}

TEST(Intake, MissingAttachmentRejected) {
  Intake in;
  auto env = golden_envelope();
  env.attachments.clear();
  EXPECT_THROW(extract_event(env, in.ctx()), EventRejected);
  EXPECT_EQ(in.audit.count("rejected"), 1u);
}

TEST(Intake, UnknownCameraAudited) {
  Intake in;
  auto env = golden_envelope();
  env.sender = "camera99@reserve";
  EXPECT_THROW(extract_event(env, in.ctx()), EventRejected);
  const auto entries = in.audit.entries();
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_NE(entries[0].detail.find("camera99"), std::string::npos);
}

TEST(Intake, ImageStoredOnDisk) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("biopay-img-" + std::to_string(::getpid()));
  Intake in;
  in.images = ImageStore(dir);
  const auto job = extract_event(golden_envelope(), in.ctx());
  const std::filesystem::path stored(job.image_ref);
  ASSERT_TRUE(std::filesystem::exists(stored)) << job.image_ref;
  EXPECT_EQ(std::filesystem::file_size(stored), fixture::kJpegBytes.size());
  std::filesystem::remove_all(dir);
}

// ---- detect

TEST(Detect, ThreeZebras) {
  FixtureBackend backend;
  const auto job = fixture_job("z", {det("Equus quagga", 0, 0, 100, 100, 0.9),
                                     det("Equus quagga", 300, 0, 400, 100, 0.8),
                                     det("Equus quagga", 600, 0, 700, 100, 0.7)});
  const auto e = detect(job, backend);
  EXPECT_EQ(e.detections.size(), 3u);
  EXPECT_EQ(e.payable().species.size(), 3u);
}

TEST(Detect, AllBelowThresholdIsBlank) {
  FixtureBackend backend;
  const auto e = detect(fixture_job("b", {det("Papio sp", 0, 0, 10, 10, 0.49)}), backend, 0.5);
  EXPECT_TRUE(e.is_blank());
}

TEST(Detect, OverlapSuppressedWithinClassOnly) {
  FixtureBackend backend;
  // IoU of these two is 0.9.
  const auto a = det("Panthera leo", 0, 0, 100, 100, 0.9);
  const auto b = det("Panthera leo", 0, 0, 100, 90, 0.8);
  ASSERT_NEAR(biopay::geom::iou(a.box, b.box), 0.9, 1e-12);
  auto e = detect(fixture_job("o", {a, b}), backend, 0.5, 0.6);
  ASSERT_EQ(e.detections.size(), 1u);
  EXPECT_EQ(e.detections[0], a);
  auto other = b;
  other.species = "Papio sp";
  e = detect(fixture_job("o2", {a, other}), backend, 0.5, 0.6);
  EXPECT_EQ(e.detections.size(), 2u);
}

TEST(Detect, PostprocessProperties) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  const std::vector<std::string> species{"A", "B", "C"};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<RawDetection> raw;
    for (int i = 0; i < 10; ++i) {
      const double x = u(rng) * 50, y = u(rng) * 50;
      raw.push_back(det(species[rng() % 3], x, y, x + 10 + u(rng) * 40, y + 10 + u(rng) * 40, u(rng)));
    }
    const double conf = u(rng), nms = u(rng);
    const auto out = postprocess(raw, conf, nms);
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_GE(out[i].score, conf);
      for (std::size_t j = i + 1; j < out.size(); ++j) {
        if (out[i].species == out[j].species) {
          EXPECT_LE(biopay::geom::iou(out[i].box, out[j].box), nms);
        }
      }
    }
  }
}

TEST(Detect, JsonValidation) {
  const auto d = det("Papio sp", 1, 2, 3, 4, 0.5);
  EXPECT_EQ(detection_from_json(detection_to_json(d)), d);
  EXPECT_THROW(detection_from_json(nlohmann::json::parse(R"({"class":"x","score":1.5,"box":[0,0,1,1]})")),
               BackendProtocolError);
  EXPECT_THROW(detection_from_json(nlohmann::json::parse(R"({"class":"x","score":0.5,"box":[2,0,1,1]})")),
               BackendProtocolError);
  EXPECT_THROW(detection_from_json(nlohmann::json::parse(R"({"score":0.5,"box":[0,0,1,1]})")),
               BackendProtocolError);
}

struct FlakyBackend : DetectorBackend {
  int failures;
  int calls = 0;
  explicit FlakyBackend(int f) : failures(f) {}
  std::vector<RawDetection> infer(const ImageJob& job) override {
    if (++calls <= failures) throw BackendUnavailable("timeout");
    return *job.fixture_detections;
  }
};

TEST(Retry, BackoffIsCappedExponential) {
  RetryPolicy p;
  EXPECT_EQ(p.backoff_before(2), milliseconds(100));
  EXPECT_EQ(p.backoff_before(3), milliseconds(200));
  EXPECT_EQ(p.backoff_before(4), milliseconds(400));
  EXPECT_EQ(p.backoff_before(20), milliseconds(5000));
}

TEST(Retry, RecoversThenDeadLetters) {
  std::vector<milliseconds> slept;
  RetryPolicy p;
  p.sleep = [&](milliseconds d) { slept.push_back(d); };
  const auto job = fixture_job("r", {det("Papio sp", 0, 0, 5, 5, 0.9)});

  FlakyBackend two(2);
  auto ok = detect_with_retry(job, two, 0.5, 0.6, p);
  ASSERT_TRUE(ok.event);
  EXPECT_EQ(ok.attempts, 3);
  EXPECT_EQ(slept, (std::vector<milliseconds>{milliseconds(100), milliseconds(200)}));

  slept.clear();
  FlakyBackend never(100);
  auto dead = detect_with_retry(job, never, 0.5, 0.6, p);
  EXPECT_FALSE(dead.event);
  ASSERT_TRUE(dead.dead_letter_reason);
  EXPECT_NE(dead.dead_letter_reason->find("timeout"), std::string::npos);
  EXPECT_EQ(dead.attempts, 5);
  EXPECT_EQ(slept.size(), 4u);
}

TEST(Retry, ProtocolErrorNotRetried) {
  struct Broken : DetectorBackend {
    int calls = 0;
    std::vector<RawDetection> infer(const ImageJob&) override {
      ++calls;
      throw BackendProtocolError("bad json");
    }
  } broken;
  RetryPolicy p;
  p.sleep = [](milliseconds) {};
  const auto out = detect_with_retry(fixture_job("p", {}), broken, 0.5, 0.6, p);
  EXPECT_TRUE(out.dead_letter_reason);
  EXPECT_EQ(broken.calls, 1);
}

TEST(HttpBackend, UnreachableIsUnavailable) {
  HttpDetectorBackend b("http://127.0.0.1:1", milliseconds(200));
  EXPECT_THROW(b.infer(fixture_job("h", {})), BackendUnavailable);
}

// ---- replay

std::string trace_text(int n) {
  std::string s;
  for (int i = 0; i < n; ++i) {
    TraceRecord r;
    r.event_id = "t" + std::to_string(i);
    r.camera_id = "camera01";
    r.captured_at = fixed_time() + std::chrono::seconds(i);
    r.detections = {det("Papio sp", 0, 0, 10, 10, 0.9)};
    s += trace_line(r) + "\n";
  }
  return s;
}

TEST(Replay, TenLinesInOrder) {
  std::istringstream in(trace_text(10));
  const auto trace = parse_trace(in);
  EXPECT_TRUE(trace.warnings.empty());
  const auto jobs = Replayer(0).schedule(trace);
  ASSERT_EQ(jobs.size(), 10u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(jobs[static_cast<std::size_t>(i)].event_id, "t" + std::to_string(i));
}

TEST(Replay, MalformedLineSkipped) {
  auto text = trace_text(10);
  const auto third = text.find('\n', text.find('\n', text.find('\n') + 1) + 1);
  text.insert(third + 1, "{\"camera_id\": \"camera01\", \"captured_at\": \"yesterday\"}\n");
  std::istringstream in(text);
  const auto trace = parse_trace(in);
  EXPECT_EQ(trace.records.size(), 10u);
  ASSERT_EQ(trace.warnings.size(), 1u);
  EXPECT_EQ(trace.warnings[0].line, 4u);

  auto lines = trace_text(10);
  lines.replace(0, lines.find('\n'), "not json at all");
  std::istringstream in2(lines);
  const auto t2 = parse_trace(in2);
  EXPECT_EQ(Replayer(0).schedule(t2).size(), 9u);
  EXPECT_EQ(t2.warnings.size(), 1u);
}

TEST(Replay, SpeedPreservesOrderAndScalesGaps) {
  // Out-of-order input: schedule sorts by capture time, stable on ties.
  std::string text;
  const std::vector<int> secs{5, 1, 3, 3, 0};
  for (std::size_t i = 0; i < secs.size(); ++i) {
    TraceRecord r;
    r.event_id = "s" + std::to_string(i);
    r.camera_id = "camera02";
    r.captured_at = fixed_time() + std::chrono::seconds(secs[i]);
    text += trace_line(r) + "\n";
  }
  std::istringstream in(text);
  const auto trace = parse_trace(in);
  const std::vector<std::string> want{"s4", "s1", "s2", "s3", "s0"};
  for (double speed : {0.0, 1.0, 10.0, 1000.0}) {
    std::vector<milliseconds> slept;
    std::vector<std::string> order;
    Replayer(speed, [&](milliseconds d) { slept.push_back(d); })
        .run(trace, [&](ImageJob j) { order.push_back(j.event_id); });
    EXPECT_EQ(order, want) << speed;
    if (speed == 0.0) {
      EXPECT_TRUE(slept.empty());
    } else {
      milliseconds total{0};
      for (auto d : slept) total += d;
      EXPECT_NEAR(static_cast<double>(total.count()), 5000.0 / speed, 1.0 + 0.01 * 5000.0 / speed);
    }
  }
}

TEST(Replay, JobCarriesDetectionsAndStableId) {
  TraceRecord r;
  r.camera_id = "camera05";
  r.captured_at = fixed_time();
  r.detections = {det("Panthera leo", 1, 1, 20, 20, 0.7)};
  const auto a = job_from_trace(r);
  const auto b = job_from_trace(r);
  EXPECT_EQ(a.event_id, b.event_id);
  EXPECT_FALSE(a.event_id.empty());
  ASSERT_TRUE(a.fixture_detections);
  EXPECT_EQ(*a.fixture_detections, r.detections);
  r.detections[0].score = 0.71;
  EXPECT_NE(job_from_trace(r).event_id, a.event_id);
}

TEST(Replay, SyntheticTraceRealisesHistogram) {
  const auto records = synthetic_trace(fixture::trial_counts(), {});
  ASSERT_EQ(records.size(), fixture::kTrialTotalDetections);
  std::map<std::string, std::uint64_t> hist;
  std::set<std::string> ids;
  for (const auto& r : records) {
    ASSERT_EQ(r.detections.size(), 1u);
    ++hist[r.detections[0].species];
    ids.insert(*r.event_id);
  }
  EXPECT_EQ(ids.size(), records.size());
  for (const auto& [species, n] : fixture::trial_counts()) EXPECT_EQ(hist[species], n);

  std::stringstream io;
  write_trace(io, records);
  const auto back = parse_trace(io);
  EXPECT_TRUE(back.warnings.empty());
  EXPECT_EQ(back.records.size(), records.size());
}

// ---- pipeline

TEST(Pipeline, ConcurrentAtLeastOnceDeliveryPaysOnce) {
  Ledger ledger(biopay::ledger::LedgerOptions{[] { return fixed_time(); }, false, 0});
  ledger.open_account(kGuardian);
  for (const auto& s : fixture::trial_species()) ledger.open_account(s);
  FixtureBackend backend;
  PipelineOptions opts;
  opts.workers = 4;
  Pipeline p(ledger, backend, opts);
  p.start();
  const auto species = fixture::trial_species();
  for (int round = 0; round < 3; ++round) {
    for (int i = 0; i < 500; ++i) {
      std::vector<RawDetection> d;
      if (i % 10 != 0) d.push_back(det(species[static_cast<std::size_t>(i) % species.size()], 0, 0, 9, 9, 0.9));
      p.submit(fixture_job("j" + std::to_string(i), d));
    }
  }
  p.submit(fixture_job("bad", {det("Dodo", 0, 0, 9, 9, 0.9)}));
  p.drain();
  p.stop();
  const auto st = p.stats();
  EXPECT_EQ(st.jobs, 1501u);
  EXPECT_EQ(st.events, 500u);
  EXPECT_EQ(st.blanks, 50u);
  EXPECT_EQ(st.duplicates, 1000u);
  EXPECT_EQ(st.dead_letters, 1u);
  EXPECT_EQ(st.paid, Pence(450));
  EXPECT_EQ(ledger.balance(kGuardian), Pence(10450));
  const auto s = ledger.state();
  EXPECT_EQ(s.total_balance(), s.total_initial_credit());
  ASSERT_TRUE(p.find_event("j1"));
  EXPECT_EQ(p.find_event("j1")->detections.size(), 1u);
  ASSERT_EQ(p.dead_letters().size(), 1u);
  EXPECT_EQ(p.dead_letters()[0].event_id, "bad");
}
