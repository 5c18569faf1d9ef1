// SPDX-License-Identifier: Apache-2.0
#include "lrpolicy/policy_db.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include "lrpolicy/error.hpp"
#include "lrpolicy/json_io.hpp"

namespace lrpolicy {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char *kFormat = "lrpolicy-db";

std::string header_line() {
  return json{{"format", kFormat}, {"schema_version", kDbSchemaVersion}}.dump();
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool same_real(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

void validate_entry(const DbKey &key, const TrialRecord &r) {
  if (key.dataset_id.empty()) throw Error("db key: empty dataset_id");
  if (key.model_id.empty()) throw Error("db key: empty model_id");
  if (key.optimizer_id.empty()) throw Error("db key: empty optimizer_id");
  if (r.budget_iters < 1) throw Error("record: budget_iters must be >= 1");
  if (r.eval_every < 1) throw Error("record: eval_every must be >= 1");
  require_valid(r.policy, r.budget_iters);
  Iter prev = -1;
  for (const auto &m : r.series) {
    if (m.iteration < prev || m.iteration > r.budget_iters) {
      throw Error("record: series iterations must be ordered and within the budget");
    }
    prev = m.iteration;
  }
  TrialRecord check = r;
  refresh_summary(check);
  if (check.peak_top1 != r.peak_top1 || (r.peak_top1 && check.iter_at_peak != r.iter_at_peak)) {
    throw Error("record: peak_top1/iter_at_peak disagree with the series");
  }
  if (!same_real(check.final_loss, r.final_loss)) {
    throw Error("record: final_loss disagrees with the series");
  }
}

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Raw lines with the byte offset just past each one.
struct Line {
  std::string text;
  std::size_t end = 0;  // offset after the '\n' (or file size)
  bool terminated = true;
};

std::vector<Line> split_lines(const std::string &data) {
  std::vector<Line> out;
  std::size_t pos = 0;
  while (pos < data.size()) {
    const auto nl = data.find('\n', pos);
    if (nl == std::string::npos) {
      out.push_back({data.substr(pos), data.size(), false});
      break;
    }
    out.push_back({data.substr(pos, nl - pos), nl + 1, true});
    pos = nl + 1;
  }
  return out;
}

bool blank(const std::string &s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

bool is_header(const json &doc) { return doc.is_object() && doc.contains("format"); }

void check_header(const json &doc, const std::string &where) {
  if (!doc.is_object() || doc.value("format", std::string()) != kFormat) {
    throw Error(where + ": not a policy store (missing header)");
  }
  const auto v = doc.value("schema_version", -1);
  if (v != kDbSchemaVersion) {
    throw Error(where + ": schema_version " + std::to_string(v) + ", this build reads " +
                std::to_string(kDbSchemaVersion) + "; refusing to open");
  }
}

} // namespace

DbKey key_of(const TrialRecord &record) {
  return {record.task_id, record.model_id, std::string(optimizer_name(record.optimizer))};
}

TrialRecord db_storable(const TrialRecord &record) {
  TrialRecord r = record;
  r.lr_trace = {};
  r.snapshots.clear();
  r.wall_ms = 0.0;
  for (auto &m : r.series) m.wall_ms = 0.0;
  const std::size_t n = r.series.size();
  if (n <= kDbMaxSeries) return r;

  std::size_t peak = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto &m = r.series[i];
    if (m.top1 && (!r.series[peak].top1 || *m.top1 > *r.series[peak].top1)) peak = i;
  }
  // evenly spaced indices including both ends, plus the peak
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k + 1 < kDbMaxSeries; ++k) keep.push_back(k * (n - 1) / (kDbMaxSeries - 2));
  keep.push_back(peak);
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  std::vector<Metrics> thin;
  for (auto i : keep) thin.push_back(r.series[i]);
  r.series = std::move(thin);
  return r;
}

json db_record_to_json(const DbRecord &rec) {
  return {{"id", rec.id},
          {"key",
           {{"dataset_id", rec.key.dataset_id},
            {"model_id", rec.key.model_id},
            {"optimizer_id", rec.key.optimizer_id}}},
          {"inserted_at", rec.inserted_at},
          {"schema_version", rec.schema_version},
          {"record", record_to_json(rec.record, true)}};
}

DbRecord db_record_from_json(const json &doc) {
  try {
    if (!doc.is_object()) throw ParseError("db record must be an object");
    for (const char *f : {"id", "key", "inserted_at", "schema_version", "record"}) {
      if (!doc.contains(f)) throw ParseError(std::string("db record: missing field '") + f + "'");
    }
    DbRecord rec;
    rec.id = doc.at("id").get<std::uint64_t>();
    const auto &key = doc.at("key");
    rec.key = {key.at("dataset_id").get<std::string>(), key.at("model_id").get<std::string>(),
               key.at("optimizer_id").get<std::string>()};
    rec.inserted_at = doc.at("inserted_at").get<std::string>();
    rec.schema_version = doc.at("schema_version").get<int>();
    if (rec.schema_version != kDbSchemaVersion) {
      throw ParseError("db record: schema_version " + std::to_string(rec.schema_version) +
                       ", expected " + std::to_string(kDbSchemaVersion));
    }
    rec.record = record_from_json(doc.at("record"));
    return rec;
  } catch (const ParseError &) {
    throw;
  } catch (const std::exception &e) {
    throw ParseError(std::string("db record: ") + e.what());
  }
}

PolicyDb PolicyDb::in_memory() { return PolicyDb(); }

PolicyDb PolicyDb::open(const fs::path &path) {
  PolicyDb db;
  db.path_ = path;
  std::error_code ec;
  if (!fs::exists(path, ec) || fs::file_size(path, ec) == 0) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot create policy store '" + path.string() + "'");
    out << header_line() << '\n';
    out.flush();
    if (!out) throw Error("cannot write policy store '" + path.string() + "'");
    db.valid_bytes_ = header_line().size() + 1;
    return db;
  }

  const auto lines = split_lines(read_file(path));
  const std::string where = path.string();
  json head;
  try {
    head = json::parse(lines.at(0).text);
  } catch (const std::exception &) {
    throw Error(where + ": not a policy store (unreadable header)");
  }
  check_header(head, where);
  db.valid_bytes_ = lines[0].end;
  db.needs_newline_ = !lines[0].terminated;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto &line = lines[i];
    const bool last = i + 1 == lines.size();
    if (blank(line.text)) {
      if (line.terminated) db.valid_bytes_ = line.end;
      continue;
    }
    try {
      auto rec = db_record_from_json(json::parse(line.text));
      db.next_id_ = std::max(db.next_id_, rec.id + 1);
      db.records_.push_back(std::move(rec));
      db.valid_bytes_ = line.end;
      db.needs_newline_ = !line.terminated;
    } catch (const std::exception &e) {
      if (last && !line.terminated) {
        db.warnings_.push_back(where + ": line " + std::to_string(i + 1) +
                               " is truncated and was skipped");
        break;
      }
      throw ParseError(where + ": line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return db;
}

void PolicyDb::append_lines(const std::vector<std::string> &lines) {
  if (!path_ || lines.empty()) return;
  std::string blob = needs_newline_ ? "\n" : "";
  for (const auto &l : lines) blob += l + '\n';
  const int fd = ::open(path_->c_str(), O_WRONLY | O_CLOEXEC);
  if (fd < 0) throw Error("cannot open policy store '" + path_->string() + "': " + std::strerror(errno));
  auto fail = [&](const char *what) {
    const std::string msg = std::string(what) + " '" + path_->string() + "': " + std::strerror(errno);
    ::flock(fd, LOCK_UN);
    ::close(fd);
    throw Error(msg);
  };
  if (::flock(fd, LOCK_EX) != 0) fail("cannot lock policy store");
  // drop a torn tail left by an interrupted append before writing after it
  if (::ftruncate(fd, static_cast<off_t>(valid_bytes_)) != 0) fail("cannot trim policy store");
  if (::lseek(fd, 0, SEEK_END) < 0) fail("cannot seek policy store");
  std::size_t done = 0;
  while (done < blob.size()) {
    const auto n = ::write(fd, blob.data() + done, blob.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail("cannot append to policy store");
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fdatasync(fd) != 0) fail("cannot sync policy store");
  ::flock(fd, LOCK_UN);
  ::close(fd);
  valid_bytes_ += blob.size();
  needs_newline_ = false;
}

std::uint64_t PolicyDb::put(const DbKey &key, const TrialRecord &record, std::string inserted_at) {
  validate_entry(key, record);
  std::lock_guard lock(*mu_);
  DbRecord rec;
  rec.id = next_id_;
  rec.key = key;
  rec.record = db_storable(record);
  rec.inserted_at = inserted_at.empty() ? utc_now() : std::move(inserted_at);
  append_lines({db_record_to_json(rec).dump()});
  ++next_id_;
  records_.push_back(std::move(rec));
  return records_.back().id;
}

std::optional<DbRecord> PolicyDb::get(std::uint64_t id) const {
  std::lock_guard lock(*mu_);
  for (const auto &r : records_) {
    if (r.id == id) return r;
  }
  return std::nullopt;
}

std::vector<DbRecord> PolicyDb::query(const DbKey &key,
                                      const std::optional<MetricFilter> &filter) const {
  std::lock_guard lock(*mu_);
  std::vector<DbRecord> out;
  for (const auto &r : records_) {
    if (!(r.key == key)) continue;
    if (filter) {
      const auto v = metric_value(r.record, filter->metric);
      if (!v) continue;
      const bool ok = filter->metric.kind == RankKind::PEAK_TOP1 ? *v >= filter->threshold
                                                                 : *v <= filter->threshold;
      if (!ok) continue;
    }
    out.push_back(r);
  }
  return out;
}

std::vector<TopEntry> PolicyDb::top_n(const DbKey &key, const RankMetric &metric,
                                      std::size_t n) const {
  if (n == 0) throw Error("top_n needs n >= 1");
  const auto matches = query(key);
  std::vector<TrialRecord> recs;
  for (const auto &m : matches) recs.push_back(m.record);
  std::vector<TopEntry> out;
  for (const auto &r : rank_policies(recs, metric)) {
    if (out.size() == n) break;
    const auto &m = matches[r.index];
    out.push_back({m.id, m.record.policy, r.value, m.record});
  }
  return out;
}

std::vector<DbKey> PolicyDb::keys() const {
  std::lock_guard lock(*mu_);
  std::vector<DbKey> out;
  for (const auto &r : records_) {
    if (std::find(out.begin(), out.end(), r.key) == out.end()) out.push_back(r.key);
  }
  return out;
}

std::size_t PolicyDb::size() const {
  std::lock_guard lock(*mu_);
  return records_.size();
}

std::size_t PolicyDb::export_to(const fs::path &path) const {
  std::lock_guard lock(*mu_);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << header_line() << '\n';
    for (const auto &r : records_) out << db_record_to_json(r).dump() << '\n';
    out.flush();
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error("cannot move export into place at '" + path.string() + "': " + ec.message());
  return records_.size();
}

std::size_t PolicyDb::import_from(const fs::path &path) {
  const auto lines = split_lines(read_file(path));
  std::vector<DbRecord> incoming;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i].text)) continue;
    const std::string where = path.string() + ": line " + std::to_string(i + 1);
    try {
      const auto doc = json::parse(lines[i].text);
      if (is_header(doc)) {
        check_header(doc, where);
        continue;
      }
      auto rec = db_record_from_json(doc);
      validate_entry(rec.key, rec.record);
      incoming.push_back(std::move(rec));
    } catch (const std::exception &e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  std::lock_guard lock(*mu_);
  std::vector<std::string> out;
  std::uint64_t id = next_id_;
  for (auto &rec : incoming) {
    rec.id = id++;
    rec.record = db_storable(rec.record);
    out.push_back(db_record_to_json(rec).dump());
  }
  append_lines(out);
  next_id_ = id;
  for (auto &rec : incoming) records_.push_back(std::move(rec));
  return incoming.size();
}

} // namespace lrpolicy
