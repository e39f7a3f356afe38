#include <algorithm>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "certkit/audit.hpp"
#include "certkit/report.hpp"
#include "fixtures.hpp"

namespace certkit {
namespace {

using nlohmann::json;
using testing::TempDir;
using testing::read_file;
using testing::write_file;

namespace fs = std::filesystem;

const fs::path kExamples = CERTKIT_EXAMPLE_DIR;

/// Copy of the example directory, so configs can be edited in place.
class ExampleDir {
 public:
  ExampleDir() : dir_("audit") {
    for (const auto& e : fs::directory_iterator(kExamples)) fs::copy(e.path(), dir_.path() / e.path().filename());
  }
  json base(const std::string& name = "example.json") const { return json::parse(read_file(dir_ / name)); }
  AuditConfig config(const json& j) const { return parse_config(j, dir_.path()); }
  AuditConfig load(const std::string& name = "example.json") const { return load_config(dir_ / name); }
  fs::path operator/(const std::string& name) const { return dir_ / name; }

 private:
  TempDir dir_;
};

/// Fresh labelled batch in the example schema with `correct` of `n` right.
Dataset fresh_batch(const AuditConfig& c, std::size_t n, std::size_t correct, std::uint64_t seed, double offset = 0.0) {
  const Schema schema = c.load("test").schema();
  Rng rng(seed);
  std::vector<LabeledSample> rows;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledSample r;
    r.features = {offset + rng.normal(), offset + rng.normal()};
    const ClassIndex y = r.features[0] + 0.5 * r.features[1] > 2.0 * offset ? 1 : 0;
    r.label = Target{y};
    r.prediction = Target{i < correct ? y : 1 - y};
    r.group = static_cast<int>(i % 2);
    r.group_id = "S" + std::to_string(seed) + "-" + std::to_string(i / 2);
    r.timestamp = 100'000 + static_cast<std::int64_t>(i);
    rows.push_back(std::move(r));
  }
  return Dataset(schema, std::move(rows));
}

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, ExampleLoadsWithDefaultsSpelledOut) {
  const ExampleDir dir;
  const auto c = dir.load();
  EXPECT_EQ(c.seed, 20240501u);
  ASSERT_EQ(c.mprs.size(), 1u);
  EXPECT_EQ(c.recertification.weights, (std::vector<double>{0.5, 0.25, 0.25}));
  EXPECT_EQ(c.dataset("test").resolved, dir / "test.csv");
  const json echo = c.echo();
  EXPECT_EQ(echo["family"]["procedure"], "fallback");
  EXPECT_TRUE(echo.contains("leakage"));
}

TEST(Config, RejectsInvalidDocuments) {
  const ExampleDir dir;
  const auto rejects = [&](const std::function<void(json&)>& edit) {
    json j = dir.base();
    edit(j);
    SCOPED_TRACE(j.dump());
    EXPECT_CERTKIT_ERROR(dir.config(j), ErrorCode::ConfigInvalid);
  };
  rejects([](json& j) { j["surprise"] = 1; });
  rejects([](json& j) { j["mprs"][0]["thresold"] = 0.9; });
  rejects([](json& j) { j["datasets"].erase("test"); });
  rejects([](json& j) { j.erase("sadd"); });
  rejects([](json& j) { j["schema_version"] = 2; });
  rejects([](json& j) { j["fairness"]["mprs"][0]["alpha_share"] = 0.3; });
  rejects([](json& j) { j["recertification"]["weights"] = {0.5, 0.6}; });
  rejects([](json& j) { j["recertification"]["weights"] = {1.5, -0.5}; });
  rejects([](json& j) { j["family"]["alpha"] = 1.0; });
  rejects([](json& j) { j["mprs"].push_back(j["mprs"][0]); });
  rejects([](json& j) { j["fairness"]["bootstrap_resamples"] = 10; });
  rejects([](json& j) {
    j["mprs"] = json::array();
    j["fairness"]["mprs"] = json::array();
  });
}

TEST(Config, UniformSharesWhenUndeclared) {
  const ExampleDir dir;
  json j = dir.base();
  j["mprs"][0].erase("alpha_share");
  j["fairness"]["mprs"][0].erase("alpha_share");
  const auto c = dir.config(j);
  EXPECT_DOUBLE_EQ(c.mprs[0].alpha_share, 0.5);
  EXPECT_DOUBLE_EQ(c.fairness.mprs[0].alpha_share, 0.5);
  EXPECT_FALSE(c.warnings.empty());
}

TEST(Config, MissingFileIsAConfigError) {
  EXPECT_THROW(load_config("/nonexistent/certkit.json"), Error);
}

// ---------------------------------------------------------------------------
// Audit

TEST(Audit, ExamplePassesAndIsReproducible) {
  const ExampleDir dir;
  const auto c = dir.load();
  const auto a = run_audit(c);
  EXPECT_EQ(a.verdict, Verdict::pass);
  EXPECT_EQ(a.exit_code(), kExitPass);
  const auto& req = a.document["requirements"];
  EXPECT_EQ(req["hypotheses"][0]["successes"], 188);
  EXPECT_EQ(req["hypotheses"][0]["test"]["decision"], "reject_H0");
  EXPECT_EQ(a.document["gate"]["leakage"], "passed");
  EXPECT_TRUE(report_hash_valid(a.document));

  const auto b = run_audit(dir.load());
  EXPECT_EQ(canonical_dump(a.document), canonical_dump(b.document));
  EXPECT_EQ(a.document["report_hash"], b.document["report_hash"]);
}

TEST(Audit, NinetyFourPercentFailsTheNinetyPercentRequirement) {
  const ExampleDir dir;
  const auto r = run_audit(dir.load("example_94.json"));
  EXPECT_EQ(r.verdict, Verdict::fail);
  EXPECT_EQ(r.exit_code(), kExitFail);
  const auto& t = r.document["requirements"]["hypotheses"][0]["test"];
  EXPECT_NEAR(t["p_value"].get<double>(), 0.117, 1e-3);
  EXPECT_EQ(t["decision"], "fail_to_reject");
}

TEST(Audit, LeakageGateRunsBeforeAnyRequirement) {
  const ExampleDir dir;
  const auto r = run_audit(dir.load("example_leak.json"));
  EXPECT_EQ(r.verdict, Verdict::fail);
  EXPECT_EQ(r.document["gate"]["leakage"], "failed");
  EXPECT_EQ(r.document["requirements"]["status"], "not_run");
  EXPECT_EQ(r.document["requirements"]["alpha_spent"], 0.0);
  EXPECT_TRUE(r.document["fairness"].is_null());
  const auto& checks = r.document["leakage"]["checks"];
  const auto dup = std::find_if(checks.begin(), checks.end(), [](const json& c) { return c["check_id"] == "duplicate_check"; });
  ASSERT_NE(dup, checks.end());
  EXPECT_EQ((*dup)["severity"], "violation");
}

TEST(Audit, DisabledGateIsReported) {
  const ExampleDir dir;
  json j = dir.base("example_leak.json");
  j["leakage"]["enabled"] = false;
  const auto r = run_audit(dir.config(j));
  EXPECT_EQ(r.document["gate"]["leakage"], "disabled");
  EXPECT_FALSE(r.document["requirements"].contains("status"));
}

TEST(Audit, TamperedReportFailsHashCheck) {
  const ExampleDir dir;
  auto doc = run_audit(dir.load()).document;
  doc["verdict"] = "fail";
  EXPECT_FALSE(report_hash_valid(doc));
  seal_report(doc);
  EXPECT_TRUE(report_hash_valid(doc));
  doc.erase("report_hash");
  EXPECT_FALSE(report_hash_valid(doc));
}

TEST(Audit, MarkdownCarriesTheVerdictAndHash) {
  const ExampleDir dir;
  const auto doc = run_audit(dir.load()).document;
  const auto md = render_markdown(doc);
  EXPECT_NE(md.find("**pass**"), std::string::npos);
  EXPECT_NE(md.find(doc["report_hash"].get<std::string>()), std::string::npos);
  EXPECT_NE(md.find("accuracy-0.9"), std::string::npos);
}

TEST(Audit, AuxiliarySectionsArePopulated) {
  const ExampleDir dir;
  const auto doc = run_audit(dir.load()).document;
  EXPECT_FALSE(doc["drift"].is_null());
  EXPECT_FALSE(doc["uncertainty"].is_null());
  EXPECT_FALSE(doc["ood"].is_null());
  EXPECT_TRUE(doc["robustness"].is_null());
}

// ---------------------------------------------------------------------------
// Ledger

std::vector<std::string> ledger_lines(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(read_file(p));
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  write_file(p, text);
}

TEST(Recertify, AlphaFollowsTheFallbackRecurrence) {
  const ExampleDir dir;
  const auto c = dir.load();
  const auto ledger = dir / "ledger.jsonl";

  const auto r0 = recertify(c, ledger, fresh_batch(c, 400, 392, 1));
  EXPECT_EQ(r0.verdict, Verdict::pass);
  EXPECT_DOUBLE_EQ(r0.document["recertification"]["alpha"].get<double>(), 0.025);

  // Slot 0 rejected, so slot 1 inherits its level.
  const auto r1 = recertify(c, ledger, fresh_batch(c, 100, 90, 2));
  EXPECT_EQ(r1.verdict, Verdict::fail);
  EXPECT_DOUBLE_EQ(r1.document["recertification"]["alpha"].get<double>(), 0.0375);

  // Slot 1 not rejected: slot 2 gets only its own weight.
  const auto r2 = recertify(c, ledger, fresh_batch(c, 400, 392, 3));
  EXPECT_DOUBLE_EQ(r2.document["recertification"]["alpha"].get<double>(), 0.0125);
  EXPECT_EQ(r2.document["recertification"]["previous_alpha_trace"], json({0.025, 0.025 + 0.0125}));

  const auto v = verify_ledger_file(ledger);
  EXPECT_TRUE(v.consistent) << v.reason;
  EXPECT_EQ(read_ledger(ledger).size(), 3u);

  const auto r3 = recertify(c, ledger, fresh_batch(c, 400, 392, 4));
  EXPECT_EQ(r3.verdict, Verdict::inconclusive);
  EXPECT_EQ(r3.document["recertification"]["status"], "family_exhausted");
  EXPECT_EQ(read_ledger(ledger).size(), 3u);
}

TEST(Recertify, FailedSlotZeroLeavesOnlyOwnWeight) {
  const ExampleDir dir;
  const auto c = dir.load();
  const auto ledger = dir / "ledger.jsonl";
  EXPECT_EQ(recertify(c, ledger).verdict, Verdict::fail);  // p = 0.032 > 0.025
  const auto r = recertify(c, ledger, fresh_batch(c, 400, 392, 5));
  EXPECT_DOUBLE_EQ(r.document["recertification"]["alpha"].get<double>(), 0.0125);
}

TEST(Recertify, RefusesReusedData) {
  const ExampleDir dir;
  const auto c = dir.load();
  const auto ledger = dir / "ledger.jsonl";
  const auto batch = fresh_batch(c, 200, 196, 6);
  recertify(c, ledger, batch);
  EXPECT_CERTKIT_ERROR(recertify(c, ledger, batch), ErrorCode::StaleDataReuse);
  EXPECT_EQ(read_ledger(ledger).size(), 1u);
}

TEST(Recertify, FamilyIsFrozenByTheFirstEntry) {
  const ExampleDir dir;
  const auto ledger = dir / "ledger.jsonl";
  const auto c = dir.load();
  recertify(c, ledger, fresh_batch(c, 200, 196, 7));
  json j = dir.base();
  j["recertification"]["weights"] = {0.4, 0.3, 0.3};
  const auto amended = dir.config(j);
  EXPECT_CERTKIT_ERROR(recertify(amended, ledger, fresh_batch(c, 200, 196, 8)), ErrorCode::ConfigInvalid);
}

TEST(Recertify, LeakageGateSpendsNoSlot) {
  const ExampleDir dir;
  const auto ledger = dir / "ledger.jsonl";
  const auto c = dir.load("example_leak.json");
  const auto r = recertify(c, ledger);
  EXPECT_EQ(r.verdict, Verdict::fail);
  EXPECT_EQ(r.document["recertification"]["status"], "not_run");
  EXPECT_TRUE(read_ledger(ledger).empty());
}

class TamperedLedger : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto c = dir_.load();
    for (std::uint64_t s = 10; s < 13; ++s) recertify(c, ledger_, fresh_batch(c, 200, 196, s));
    lines_ = ledger_lines(ledger_);
    ASSERT_EQ(lines_.size(), 3u);
    ASSERT_TRUE(verify_ledger_file(ledger_).consistent);
  }

  LedgerVerdict verify_with(const std::vector<std::string>& lines) {
    write_lines(ledger_, lines);
    return verify_ledger_file(ledger_);
  }

  ExampleDir dir_;
  fs::path ledger_ = dir_ / "ledger.jsonl";
  std::vector<std::string> lines_;
};

TEST_F(TamperedLedger, EditedAlphaBreaksTheEntryHash) {
  auto lines = lines_;
  json e = json::parse(lines[1]);
  e["alpha"] = 0.05;
  lines[1] = e.dump();
  const auto v = verify_with(lines);
  EXPECT_FALSE(v.consistent);
  EXPECT_EQ(v.first_inconsistency, 1u);
}

TEST_F(TamperedLedger, ResealedAlphaBreaksTheRecurrence) {
  auto lines = lines_;
  json e = json::parse(lines[1]);
  e["alpha"] = 0.05;
  e["entry_hash"] = entry_hash(e);
  lines[1] = e.dump();
  const auto v = verify_with(lines);
  EXPECT_FALSE(v.consistent);
  EXPECT_EQ(v.first_inconsistency, 1u);
  EXPECT_NE(v.reason.find("recurrence"), std::string::npos);
}

TEST_F(TamperedLedger, ReorderedEntries) {
  auto lines = lines_;
  std::swap(lines[1], lines[2]);
  const auto v = verify_with(lines);
  EXPECT_FALSE(v.consistent);
  EXPECT_EQ(v.first_inconsistency, 1u);
}

TEST_F(TamperedLedger, DroppedEntry) {
  const auto v = verify_with({lines_[0], lines_[2]});
  EXPECT_FALSE(v.consistent);
  EXPECT_EQ(v.first_inconsistency, 1u);
}

TEST_F(TamperedLedger, UnparseableLine) {
  auto lines = lines_;
  lines.push_back("{not json");
  const auto v = verify_with(lines);
  EXPECT_FALSE(v.consistent);
  EXPECT_EQ(v.first_inconsistency, 3u);
  EXPECT_CERTKIT_ERROR(read_ledger(ledger_), ErrorCode::LedgerCorrupt);
  EXPECT_CERTKIT_ERROR(recertify(dir_.load(), ledger_, fresh_batch(dir_.load(), 50, 49, 99)),
                       ErrorCode::LedgerCorrupt);
}

TEST(LedgerProperty, RandomHistoriesVerify) {
  // Random decision sequences replayed through append_entry always verify,
  // and next_slot_alpha agrees with the recurrence.
  Rng rng(33);
  for (int t = 0; t < 50; ++t) {
    TempDir tmp("ledger");
    const auto path = tmp / "l.jsonl";
    Ledger ledger;
    const std::vector<double> w{0.5, 0.25, 0.25};
    const json family{{"alpha", 0.05}, {"weights", w}};
    std::optional<double> prev;
    bool prev_rej = false;
    for (std::size_t slot = 0; slot < 3; ++slot) {
      const double alpha = next_slot_alpha(ledger, 0.05, w);
      EXPECT_DOUBLE_EQ(alpha, fallback_alpha(0.05, w[slot], prev, prev_rej));
      const double p = rng.uniform01() * 0.06;
      const auto d = decide(p, alpha);
      append_entry(path, ledger,
                   {{"kind", "certification"}, {"family", family}, {"tested", true}, {"slot", slot},
                    {"alpha", alpha}, {"p_value", p}, {"decision", std::string(to_string(d))},
                    {"dataset_hashes", {std::to_string(t) + "-" + std::to_string(slot)}}});
      prev = alpha;
      prev_rej = d == Decision::reject_H0;
    }
    EXPECT_TRUE(verify_ledger_file(path).consistent);
    EXPECT_CERTKIT_ERROR(next_slot_alpha(ledger, 0.05, w), ErrorCode::FamilyAlphaExhausted);
  }
}

// ---------------------------------------------------------------------------
// Monitoring

TEST(Monitor, ReferenceWindowIsOk) {
  const ExampleDir dir;
  const auto c = dir.load();
  const auto ledger = dir / "ledger.jsonl";
  const auto window = fresh_batch(c, 200, 200, 20);
  const auto r = monitor_step(c, ledger, window, std::nullopt);
  EXPECT_EQ(r.document["monitoring"]["verdict"], "ok");
  EXPECT_EQ(r.verdict, Verdict::pass);
  const auto l = read_ledger(ledger);
  ASSERT_EQ(l.size(), 1u);
  EXPECT_FALSE(l.entries[0]["tested"].get<bool>());
}

TEST(Monitor, ShiftWithoutLabelsIsUnclassified) {
  const ExampleDir dir;
  const auto c = dir.load();
  const auto ledger = dir / "ledger.jsonl";
  const auto r = monitor_step(c, ledger, fresh_batch(c, 200, 200, 21, 1.5), std::nullopt);
  EXPECT_EQ(r.document["monitoring"]["verdict"], "shift_unclassified");
  EXPECT_EQ(r.verdict, Verdict::fail);
  EXPECT_TRUE(r.document["drift"]["shift"].get<bool>());
  EXPECT_EQ(slot_state(read_ledger(ledger)).next_slot, 0u);
}

TEST(Monitor, ShiftWithPassingPointCheckIsBenign) {
  const ExampleDir dir;
  const auto c = dir.load();
  const auto ledger = dir / "ledger.jsonl";
  const auto window = fresh_batch(c, 200, 200, 22, 1.5);
  const auto check = fresh_batch(c, 400, 396, 23, 1.5);
  const auto r = monitor_step(c, ledger, window, check);
  EXPECT_EQ(r.document["monitoring"]["verdict"], "shift_benign");
  EXPECT_DOUBLE_EQ(r.document["monitoring"]["alpha"].get<double>(), 0.025);
  EXPECT_EQ(slot_state(read_ledger(ledger)).next_slot, 1u);
  EXPECT_TRUE(verify_ledger_file(ledger).consistent);

  const auto bad = monitor_step(c, ledger, fresh_batch(c, 200, 200, 24, 1.5), fresh_batch(c, 200, 150, 25, 1.5));
  EXPECT_EQ(bad.document["monitoring"]["verdict"], "shift_malignant");
  EXPECT_EQ(bad.verdict, Verdict::fail);
}

TEST(Monitor, NeedsAReferenceBinding) {
  const ExampleDir dir;
  json j = dir.base();
  j["datasets"].erase("train");
  j.erase("ood");
  const auto c = dir.config(j);
  EXPECT_CERTKIT_ERROR(monitor_step(c, dir / "ledger.jsonl", fresh_batch(c, 50, 50, 26), std::nullopt),
                       ErrorCode::NoReferenceBatch);
}

TEST(Monitor, FeatureOnlyRolesDropTargets) {
  ColumnRoles roles;
  roles.features = {"a", "b"};
  roles.label = "y";
  roles.prediction = "yhat";
  roles.group = "g";
  const auto f = feature_only_roles(roles);
  EXPECT_EQ(f.features, roles.features);
  EXPECT_FALSE(f.label);
  EXPECT_FALSE(f.prediction);
}

TEST(ExitCodes, ErrorsMapToDocumentedCodes) {
  EXPECT_EQ(exit_code_for(Error(ErrorCode::ConfigInvalid, "x")), kExitInvalid);
  EXPECT_EQ(exit_code_for(Error(ErrorCode::LedgerCorrupt, "x")), kExitLedger);
  EXPECT_EQ(exit_code_for(Error(ErrorCode::StaleDataReuse, "x")), kExitInvalid);
  EXPECT_EQ(to_string(Verdict::inconclusive), "inconclusive");
  EXPECT_EQ(to_string(MonitorVerdict::shift_benign), "shift_benign");
}

}  // namespace
}  // namespace certkit
