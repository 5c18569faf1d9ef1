// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lrpolicy/error.hpp"
#include "lrpolicy/json_io.hpp"
#include "lrpolicy/policy_db.hpp"
#include "oracle.hpp"

using namespace lrpolicy;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
  const auto dir = fs::temp_directory_path() / "lrpolicy_db_tests";
  fs::create_directories(dir);
  const auto p = dir / name;
  fs::remove(p);
  return p;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Hand-built record with one evaluation at the end of the budget.
TrialRecord result(const Policy &policy, double top1, Iter budget = 10000,
                   const std::string &task = "mnist", std::uint64_t seed = 0) {
  TrialRecord r;
  r.task_id = task;
  r.model_id = "lenet";
  r.policy = policy;
  r.seed = seed;
  r.budget_iters = budget;
  r.eval_every = budget;
  r.series.push_back({1.0 - top1, top1, budget, 0.0});
  refresh_summary(r);
  return r;
}

const DbKey kMnist{"mnist", "lenet", "sgd"};

std::string stored(const TrialRecord &r) { return record_to_json(db_storable(r), true).dump(); }

} // namespace

TEST_CASE("put then get round-trips and ids increase") {
  auto db = PolicyDb::in_memory();
  const auto task = load_task("blobs2(n=400)");
  TrainConfig cfg;
  cfg.budget_iters = 200;
  const auto rec = train(*task, Cyclic{CyclicKind::TRI, 0.01, 0.1, 25, {}}, cfg);
  const auto a = db.put(rec);
  const auto b = db.put(rec);
  CHECK(b > a);
  const auto got = db.get(a);
  REQUIRE(got);
  CHECK(got->key == DbKey{"blobs2", "mlp16", "sgd"});
  CHECK(record_to_json(got->record, true).dump() == stored(rec));
  CHECK(got->record.peak_top1 == rec.peak_top1);
  CHECK(got->record.series.size() == rec.series.size());
  CHECK(!db.get(999));
}

TEST_CASE("put rejects invalid entries") {
  auto db = PolicyDb::in_memory();
  const auto ok = result(Fix{0.01}, 0.9);
  CHECK_THROWS_AS(db.put({"", "lenet", "sgd"}, ok), Error);
  CHECK_THROWS_AS(db.put({"mnist", "", "sgd"}, ok), Error);
  auto bad = ok;
  bad.policy = Fix{-1.0};
  CHECK_THROWS_AS(db.put(bad), Error);
  bad = ok;
  bad.peak_top1 = 0.99;
  CHECK_THROWS_AS(db.put(bad), Error);
  bad = ok;
  bad.series.push_back({0.1, 0.5, 5, 0.0});
  CHECK_THROWS_AS(db.put(bad), Error);
  CHECK(db.size() == 0);
}

TEST_CASE("query examples") {
  auto db = PolicyDb::in_memory();
  CHECK(db.query(kMnist).empty());
  db.put(result(Fix{0.01}, 0.91));
  auto other = result(Fix{0.02}, 0.95);
  other.model_id = "mlp";
  db.put(other);
  db.put(result(Fix{0.03}, 0.92));
  db.put(result(Fix{0.04}, 0.93));
  const auto q = db.query(kMnist);
  REQUIRE(q.size() == 3);
  CHECK(q[0].record.policy == Policy{Fix{0.01}});
  CHECK(q[1].record.policy == Policy{Fix{0.03}});
  CHECK(q[2].record.policy == Policy{Fix{0.04}});
  CHECK(q[0].id < q[1].id);
  const auto filtered = db.query(kMnist, MetricFilter{{}, 0.92});
  CHECK(filtered.size() == 2);
  CHECK(db.keys().size() == 2);
}

TEST_CASE("top_n over the MNIST table puts SIN2 first") {
  auto db = PolicyDb::in_memory();
  const auto &rows = oracle::mnist_rows();
  const auto &acc = oracle::mnist_accuracy();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    db.put(result(parse_policy(oracle::document(rows[i])), acc[i] / 100.0));
  }
  const auto top = db.top_n(kMnist, {}, 3);
  REQUIRE(top.size() == 3);
  CHECK(type_name(top[0].policy) == "SIN2");
  CHECK(*top[0].value == doctest::Approx(0.9933).epsilon(1e-12));
  CHECK(type_name(top[1].policy) == "COS");
  CHECK(*top[1].value == doctest::Approx(0.9932).epsilon(1e-12));

  CHECK(db.top_n(kMnist, {}, 100).size() == rows.size());
  CHECK_THROWS_AS(db.top_n(kMnist, {}, 0), Error);
  // prefix property
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto a = db.top_n(kMnist, {}, k), b = db.top_n(kMnist, {}, k + 1);
    for (std::size_t i = 0; i < k; ++i) REQUIRE(a[i].id == b[i].id);
  }
  // 99.12 is shared by four rows: their order is the serialized-policy order
  const auto all = db.top_n(kMnist, {}, 100);
  std::vector<std::string> tied;
  for (const auto &e : all) {
    if (e.value && *e.value == 99.12 / 100.0) tied.push_back(serialize_policy(e.policy));
  }
  REQUIRE(tied.size() == 4);
  CHECK(std::is_sorted(tied.begin(), tied.end()));
}

TEST_CASE("export then import reproduces every key") {
  const auto path = scratch("export.jsonl");
  auto db = PolicyDb::in_memory();
  for (int i = 0; i < 10; ++i) {
    db.put({i % 2 ? "mnist" : "cifar", "lenet", "sgd"}, result(Fix{0.01 * (i + 1)}, 0.5 + 0.01 * i),
           "2026-01-01T00:00:00Z");
  }
  CHECK(db.export_to(path) == 10);
  auto fresh = PolicyDb::in_memory();
  CHECK(fresh.import_from(path) == 10);
  for (const auto &key : db.keys()) {
    const auto a = db.query(key), b = fresh.query(key);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(db_record_to_json(a[i]) == db_record_to_json(b[i]));
    }
  }
  // a second export is byte-identical
  const auto again = scratch("export2.jsonl");
  fresh.export_to(again);
  CHECK(slurp(again) == slurp(path));
}

TEST_CASE("import aborts atomically on a corrupt line") {
  const auto path = scratch("corrupt.jsonl");
  auto src = PolicyDb::in_memory();
  for (int i = 0; i < 8; ++i) src.put(kMnist, result(Fix{0.01 * (i + 1)}, 0.6), "2026-01-01T00:00:00Z");
  src.export_to(path);
  // header is line 1, so record 6 sits on line 7
  std::istringstream in(slurp(path));
  std::string line, text;
  for (int n = 1; std::getline(in, line); ++n) text += (n == 7 ? line.substr(0, 20) + "}" : line) + "\n";
  std::ofstream(path, std::ios::binary | std::ios::trunc) << text;

  const auto store = scratch("target.jsonl");
  auto db = PolicyDb::open(store);
  db.put(result(Fix{0.5}, 0.7));
  const auto before = slurp(store);
  try {
    db.import_from(path);
    FAIL("expected a parse error");
  } catch (const ParseError &e) {
    CHECK(std::string(e.what()).find("line 7") != std::string::npos);
  }
  CHECK(db.size() == 1);
  CHECK(slurp(store) == before);
}

TEST_CASE("empty import file gives zero") {
  const auto path = scratch("empty.jsonl");
  std::ofstream(path).close();
  auto db = PolicyDb::in_memory();
  CHECK(db.import_from(path) == 0);
  CHECK(db.size() == 0);
}

TEST_CASE("store persists across reopen and survives a torn append") {
  const auto path = scratch("store.jsonl");
  {
    auto db = PolicyDb::open(path);
    db.put(result(Fix{0.01}, 0.9));
    db.put(result(Fix{0.02}, 0.8));
  }
  {
    auto db = PolicyDb::open(path);
    CHECK(db.size() == 2);
    CHECK(db.warnings().empty());
  }
  // simulate a crash halfway through a third append
  const auto full = slurp(path);
  std::ofstream(path, std::ios::binary | std::ios::app) << R"({"id":3,"key":{"dataset_id":"mn)";
  {
    auto db = PolicyDb::open(path);
    CHECK(db.size() == 2);
    REQUIRE(db.warnings().size() == 1);
    CHECK(db.warnings()[0].find("line 4") != std::string::npos);
    const auto id = db.put(result(Fix{0.03}, 0.95));
    CHECK(id == 3);
  }
  auto db = PolicyDb::open(path);
  CHECK(db.size() == 3);
  CHECK(db.warnings().empty());
  CHECK(slurp(path).rfind(full, 0) == 0);
}

TEST_CASE("store refuses another schema version") {
  const auto path = scratch("future.jsonl");
  std::ofstream(path) << R"({"format":"lrpolicy-db","schema_version":2})" << "\n";
  try {
    PolicyDb::open(path);
    FAIL("expected refusal");
  } catch (const Error &e) {
    CHECK(std::string(e.what()).find("schema_version 2") != std::string::npos);
  }
  std::ofstream(path, std::ios::trunc) << "hello\n";
  CHECK_THROWS_AS(PolicyDb::open(path), Error);
  // a corrupt record in the middle is an error, not a warning
  std::ofstream(path, std::ios::trunc) << R"({"format":"lrpolicy-db","schema_version":1})"
                                       << "\n{bad\n{}\n";
  CHECK_THROWS_AS(PolicyDb::open(path), ParseError);
}

TEST_CASE("long series are thinned but keep ends and peak") {
  TrialRecord r = result(Fix{0.01}, 0.5, 5000);
  r.series.clear();
  r.eval_every = 1;
  for (Iter t = 1; t <= 5000; ++t) {
    const double acc = t == 2345 ? 0.99 : 0.5 + 0.4 * static_cast<double>(t) / 5000.0;
    r.series.push_back({1.0 / static_cast<double>(t), acc, t, 0.0});
  }
  refresh_summary(r);
  const auto s = db_storable(r);
  CHECK(s.series.size() <= kDbMaxSeries);
  CHECK(s.series.front().iteration == 1);
  CHECK(s.series.back().iteration == 5000);
  CHECK(s.peak_top1 == r.peak_top1);
  CHECK(s.iter_at_peak == 2345);
  CHECK(s.final_loss == r.final_loss);
  bool has_peak = false;
  for (const auto &m : s.series) has_peak = has_peak || m.iteration == 2345;
  CHECK(has_peak);
  CHECK(std::is_sorted(s.series.begin(), s.series.end(),
                       [](const Metrics &a, const Metrics &b) { return a.iteration < b.iteration; }));
  auto db = PolicyDb::in_memory();
  const auto id = db.put(r);
  CHECK(db.get(id)->record.series.size() == s.series.size());
}
