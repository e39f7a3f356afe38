#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace certkit {

/// Append-only certification ledger stored as JSON lines. Every entry holds
/// `index`, `prev_hash` and `entry_hash` (SHA-256 of the entry serialized
/// without `entry_hash`, keys sorted), plus:
///
///   kind            "certification" or "monitor"
///   timestamp       UTC wall-clock time of the append
///   model_id
///   family          {"alpha", "weights"}; must match entry 0 everywhere
///   tested          whether this entry consumed a slot of the family
///   slot            0-based hypothesis position (tested entries only)
///   alpha           level the slot was tested at
///   p_value         intersection-union p-value (max over MPRs)
///   decision        "reject_H0" / "fail_to_reject"
///   dataset_hashes  content hashes of the data consumed
///   seed, verdict, details
using LedgerEntry = nlohmann::json;

struct Ledger {
  std::vector<LedgerEntry> entries;

  bool empty() const noexcept { return entries.empty(); }
  std::size_t size() const noexcept { return entries.size(); }
};

/// Missing file = empty ledger. Unparseable lines throw LedgerCorrupt.
Ledger read_ledger(const std::filesystem::path& path);

std::string entry_hash(const LedgerEntry& entry);

/// Fills index, prev_hash and entry_hash, then appends one line.
LedgerEntry append_entry(const std::filesystem::path& path, Ledger& ledger, LedgerEntry entry);

struct SlotState {
  /// Index of the next family slot.
  std::size_t next_slot = 0;
  std::optional<double> previous_alpha;
  bool previous_rejected = false;
};

/// Replays tested entries to find where the family currently stands.
SlotState slot_state(const Ledger& ledger);

/// Level for the next slot under the fallback recurrence; throws
/// FamilyAlphaExhausted when no weight is left.
double next_slot_alpha(const Ledger& ledger, double family_alpha, const std::vector<double>& weights);

struct LedgerVerdict {
  bool consistent = true;
  std::optional<std::size_t> first_inconsistency;
  std::string reason;
};

/// Replays indices, the hash chain, entry hashes, the frozen family, the
/// fallback recurrence, each decision and dataset-hash uniqueness.
LedgerVerdict verify_ledger(const Ledger& ledger);

/// Same, reading the file; unparseable lines are reported as the
/// inconsistency at that line's position.
LedgerVerdict verify_ledger_file(const std::filesystem::path& path);

}  // namespace certkit
