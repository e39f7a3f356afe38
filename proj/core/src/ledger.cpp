#include "certkit/ledger.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "certkit/hash.hpp"
#include "certkit/multiplicity.hpp"

namespace certkit {

using nlohmann::json;

namespace {

struct ParsedLines {
  std::vector<LedgerEntry> entries;
  std::optional<std::size_t> bad_line;
  std::string error;
};

ParsedLines parse_lines(const std::filesystem::path& path) {
  ParsedLines out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      if (!j.is_object()) throw std::runtime_error("entry is not an object");
      out.entries.push_back(std::move(j));
    } catch (const std::exception& e) {
      out.bad_line = out.entries.size();
      out.error = e.what();
      return out;
    }
  }
  return out;
}

constexpr double kAlphaTolerance = 1e-12;

}  // namespace

Ledger read_ledger(const std::filesystem::path& path) {
  auto parsed = parse_lines(path);
  if (parsed.bad_line) {
    throw Error(ErrorCode::LedgerCorrupt, "ledger entry " + std::to_string(*parsed.bad_line) + ": " + parsed.error);
  }
  return Ledger{std::move(parsed.entries)};
}

std::string entry_hash(const LedgerEntry& entry) {
  json copy = entry;
  copy.erase("entry_hash");
  return sha256_hex(copy.dump());
}

LedgerEntry append_entry(const std::filesystem::path& path, Ledger& ledger, LedgerEntry entry) {
  entry["index"] = ledger.entries.size();
  entry["prev_hash"] = ledger.entries.empty() ? std::string() : ledger.entries.back().value("entry_hash", "");
  entry.erase("entry_hash");
  entry["entry_hash"] = entry_hash(entry);
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::LedgerCorrupt, "cannot append to ledger '" + path.string() + "'");
  out << entry.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::LedgerCorrupt, "write to ledger '" + path.string() + "' failed");
  ledger.entries.push_back(entry);
  return entry;
}

SlotState slot_state(const Ledger& ledger) {
  SlotState s;
  for (const auto& e : ledger.entries) {
    if (!e.value("tested", false)) continue;
    ++s.next_slot;
    s.previous_alpha = e.at("alpha").get<double>();
    s.previous_rejected = e.at("decision").get<std::string>() == "reject_H0";
  }
  return s;
}

double next_slot_alpha(const Ledger& ledger, double family_alpha, const std::vector<double>& weights) {
  const SlotState s = slot_state(ledger);
  if (s.next_slot >= weights.size()) {
    throw Error(ErrorCode::FamilyAlphaExhausted, "all " + std::to_string(weights.size()) +
                                                     " slots of the re-certification family are used");
  }
  return fallback_alpha(family_alpha, weights[s.next_slot], s.previous_alpha, s.previous_rejected);
}

LedgerVerdict verify_ledger(const Ledger& ledger) {
  LedgerVerdict v;
  const auto fail = [&](std::size_t i, std::string why) {
    v.consistent = false;
    v.first_inconsistency = i;
    v.reason = std::move(why);
    return v;
  };
  json family;
  SlotState state;
  std::set<std::string> seen_hashes;
  for (std::size_t i = 0; i < ledger.entries.size(); ++i) {
    const auto& e = ledger.entries[i];
    try {
      if (e.at("index").get<std::size_t>() != i) return fail(i, "entry index out of sequence");
      const std::string expected_prev = i == 0 ? std::string() : ledger.entries[i - 1].value("entry_hash", "");
      if (e.at("prev_hash").get<std::string>() != expected_prev) return fail(i, "broken hash chain");
      if (e.at("entry_hash").get<std::string>() != entry_hash(e)) return fail(i, "entry hash mismatch");
      if (i == 0) {
        family = e.at("family");
      } else if (e.at("family") != family) {
        return fail(i, "family differs from the one frozen at entry 0");
      }
      for (const auto& h : e.at("dataset_hashes")) {
        if (!seen_hashes.insert(h.get<std::string>()).second) return fail(i, "dataset hash reused");
      }
      if (!e.at("tested").get<bool>()) continue;

      const auto weights = family.at("weights").get<std::vector<double>>();
      const double family_alpha = family.at("alpha").get<double>();
      if (e.at("slot").get<std::size_t>() != state.next_slot) return fail(i, "slot out of sequence");
      if (state.next_slot >= weights.size()) return fail(i, "slot beyond the family");
      const double expected = fallback_alpha(family_alpha, weights[state.next_slot], state.previous_alpha,
                                             state.previous_rejected);
      const double alpha = e.at("alpha").get<double>();
      if (std::abs(alpha - expected) > kAlphaTolerance) return fail(i, "alpha disagrees with the fallback recurrence");
      const double p = e.at("p_value").get<double>();
      const auto decision = std::string(to_string(decide(p, alpha)));
      if (e.at("decision").get<std::string>() != decision) return fail(i, "decision disagrees with p-value and alpha");
      ++state.next_slot;
      state.previous_alpha = alpha;
      state.previous_rejected = decision == "reject_H0";
    } catch (const json::exception& ex) {
      return fail(i, std::string("malformed entry: ") + ex.what());
    }
  }
  return v;
}

LedgerVerdict verify_ledger_file(const std::filesystem::path& path) {
  auto parsed = parse_lines(path);
  LedgerVerdict v = verify_ledger(Ledger{parsed.entries});
  if (v.consistent && parsed.bad_line) {
    v.consistent = false;
    v.first_inconsistency = *parsed.bad_line;
    v.reason = "unparseable entry: " + parsed.error;
  }
  return v;
}

}  // namespace certkit
