// audit: command-line front end for certkit.
//
//   audit run <config> [--out report.json]
//   audit recertify <config> --ledger <path> [--out report.json]
//   audit monitor <config> --window <path> [--point-check <path>] [--ledger <path>]
//   audit verify-ledger <path>
//   audit report [<report.json>] --format json|markdown
//
// Exit codes: 0 pass, 1 requirement not demonstrated, 2 invalid input or
// config, 3 ledger integrity failure.

#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "certkit/audit.hpp"
#include "certkit/report.hpp"

namespace {

using certkit::AuditReport;
using nlohmann::json;

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw certkit::Error(certkit::ErrorCode::InvalidArgument, "cannot write '" + out_path + "'");
  out << text;
}

int finish(const AuditReport& report, const std::string& out_path) {
  emit(report.dump(), out_path);
  spdlog::info("verdict: {}", certkit::to_string(report.verdict));
  return report.exit_code();
}

int render(const std::string& path, const std::string& format) {
  std::string text;
  if (path.empty() || path == "-") {
    text.assign(std::istreambuf_iterator<char>(std::cin), {});
  } else {
    std::ifstream in(path);
    if (!in) throw certkit::Error(certkit::ErrorCode::DataLoadError, "cannot open report '" + path + "'");
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw certkit::Error(certkit::ErrorCode::ParseError, std::string("report: ") + e.what());
  }
  if (!certkit::report_hash_valid(doc)) spdlog::warn("report hash does not match its content");
  if (format == "markdown") std::cout << certkit::render_markdown(doc);
  else std::cout << certkit::canonical_dump(doc);
  return certkit::kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("audit"));
  spdlog::set_pattern("%^%l%$: %v");

  CLI::App app{"Statistical conformance audits for ML models"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  std::string config_path, out_path, ledger_path, window_path, point_check_path, report_path;
  std::string format = "json";

  auto* run = app.add_subcommand("run", "Run a full audit");
  run->add_option("config", config_path, "Audit config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_path, "Write the report here instead of stdout");

  auto* recert = app.add_subcommand("recertify", "Re-certify an updated model against the ledger");
  recert->add_option("config", config_path, "Audit config (JSON)")->required()->check(CLI::ExistingFile);
  recert->add_option("--ledger", ledger_path, "Ledger file (JSON lines)")->required();
  recert->add_option("--out", out_path, "Write the report here instead of stdout");

  auto* monitor = app.add_subcommand("monitor", "Test a production window for shift");
  monitor->add_option("config", config_path, "Audit config (JSON)")->required()->check(CLI::ExistingFile);
  monitor->add_option("--window", window_path, "Production window (CSV or JSONL)")->required()->check(CLI::ExistingFile);
  monitor->add_option("--point-check", point_check_path, "Labelled point-check set")->check(CLI::ExistingFile);
  monitor->add_option("--ledger", ledger_path, "Ledger file (default: ledger.jsonl beside the config)");
  monitor->add_option("--out", out_path, "Write the report here instead of stdout");

  auto* verify = app.add_subcommand("verify-ledger", "Check a ledger's hash chain and alpha trace");
  verify->add_option("ledger", ledger_path, "Ledger file")->required();

  auto* report = app.add_subcommand("report", "Render a report");
  report->add_option("report", report_path, "Report JSON (default: stdin)");
  report->add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "markdown"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : certkit::kExitInvalid;
  }
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    if (*run) return finish(certkit::run_audit(certkit::load_config(config_path)), out_path);
    if (*recert) return finish(certkit::recertify(certkit::load_config(config_path), ledger_path), out_path);
    if (*monitor) {
      const auto config = certkit::load_config(config_path);
      if (ledger_path.empty()) ledger_path = (config.base_dir / "ledger.jsonl").string();
      const auto window = certkit::load_dataset(window_path, certkit::feature_only_roles(config.columns));
      std::optional<certkit::Dataset> point_check;
      if (!point_check_path.empty()) point_check = certkit::load_dataset(point_check_path, config.columns);
      return finish(certkit::monitor_step(config, ledger_path, window, point_check), out_path);
    }
    if (*verify) {
      const auto v = certkit::verify_ledger_file(ledger_path);
      json out{{"consistent", v.consistent}, {"reason", v.reason}};
      out["first_inconsistency"] = v.first_inconsistency ? json(*v.first_inconsistency) : json(nullptr);
      std::cout << out.dump(2) << "\n";
      return v.consistent ? certkit::kExitPass : certkit::kExitLedger;
    }
    if (*report) return render(report_path, format);
  } catch (const certkit::Error& e) {
    spdlog::error("{}", e.what());
    return certkit::exit_code_for(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return certkit::kExitInvalid;
  }
  return certkit::kExitInvalid;
}
