// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lrpolicy/train.hpp"
#include "lrpolicy/tuner.hpp"

namespace lrpolicy {

inline constexpr int kDbSchemaVersion = 1;
/// Stored metric series are thinned to at most this many points.
inline constexpr std::size_t kDbMaxSeries = 512;

struct DbKey {
  std::string dataset_id;
  std::string model_id;
  std::string optimizer_id;
  bool operator==(const DbKey &) const = default;
};

/// Key a record would be filed under.
DbKey key_of(const TrialRecord &record);

struct DbRecord {
  std::uint64_t id = 0;
  DbKey key;
  TrialRecord record;
  std::string inserted_at;  ///< UTC, ISO-8601
  int schema_version = kDbSchemaVersion;
};

/// Keeps records whose metric is reached and at least as good as threshold.
struct MetricFilter {
  RankMetric metric;
  double threshold = 0.0;
};

struct TopEntry {
  std::uint64_t id = 0;
  Policy policy;
  std::optional<double> value;  ///< nullopt: unreached
  TrialRecord record;
};

/// The form a record takes in the store: lr_trace and snapshots dropped
/// (the policy replays the trace) and the series thinned to kDbMaxSeries
/// points, always keeping the first, last and peak evaluations.
TrialRecord db_storable(const TrialRecord &record);

nlohmann::json db_record_to_json(const DbRecord &rec);
DbRecord db_record_from_json(const nlohmann::json &doc);

/// JSON-lines store: a header line carrying schema_version, then one
/// DbRecord per line. Appends are flushed per record under an advisory
/// lock; all other access goes through the snapshot loaded at open.
class PolicyDb {
public:
  /// Opens (creating when missing) the store at `path`. Throws Error on a
  /// schema mismatch or unreadable file and ParseError naming the line of a
  /// corrupt record. A truncated final line is skipped with a warning.
  static PolicyDb open(const std::filesystem::path &path);
  static PolicyDb in_memory();

  /// Validates and appends; returns the new id. `inserted_at` empty means
  /// the current time.
  std::uint64_t put(const DbKey &key, const TrialRecord &record, std::string inserted_at = {});
  std::uint64_t put(const TrialRecord &record) { return put(key_of(record), record); }

  std::optional<DbRecord> get(std::uint64_t id) const;
  /// Matching records in insertion order.
  std::vector<DbRecord> query(const DbKey &key,
                              const std::optional<MetricFilter> &filter = std::nullopt) const;
  /// rank_policies order over the matching records, truncated to n (n >= 1).
  std::vector<TopEntry> top_n(const DbKey &key, const RankMetric &metric, std::size_t n) const;

  std::vector<DbKey> keys() const;
  std::size_t size() const;
  const std::vector<std::string> &warnings() const { return warnings_; }

  /// Writes header plus records as JSON lines; returns the record count.
  std::size_t export_to(const std::filesystem::path &path) const;
  /// Reads every line before changing anything; a bad line aborts with a
  /// ParseError naming it. Imported records get fresh ids and keep their
  /// key and timestamp. An empty file imports 0.
  std::size_t import_from(const std::filesystem::path &path);

private:
  PolicyDb() = default;
  void append_lines(const std::vector<std::string> &lines);

  std::optional<std::filesystem::path> path_;
  std::uintmax_t valid_bytes_ = 0;  ///< file prefix that holds whole records
  bool needs_newline_ = false;
  std::vector<DbRecord> records_;
  std::uint64_t next_id_ = 1;
  std::vector<std::string> warnings_;
  std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
};

} // namespace lrpolicy
