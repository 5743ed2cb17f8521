// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "dartnet/dataio.hpp"
#include "support/test_util.hpp"

using namespace dartnet;
using dartnet::testing::TempDir;

namespace {

std::vector<RawEvent> parse_str(const std::string& text, std::size_t* arity = nullptr,
                                std::vector<std::string>* warnings = nullptr) {
  std::istringstream in(text);
  return parse_events(in, "test", arity, warnings);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_SUITE("dataio") {

TEST_CASE("three handcrafted lines parse exactly") {
  const std::string text =
      "# a comment\n"
      "us\texports\tjp\t3\t1.5\t-2.25\n"
      "jp\texports\tus\t1\t-2.25\t1.5\n"
      "us\timports\tde\t1\t1.5\t0.125\n";
  const auto raw = parse_str(text);
  REQUIRE(raw.size() == 3);
  // sorted by timestamp, ties keep input order
  CHECK(raw[0].head == "jp");
  CHECK(raw[0].timestamp == 1);
  CHECK(raw[1].head == "us");
  CHECK(raw[1].relation == "imports");
  CHECK(raw[1].attr_tail == std::vector<double>{0.125});
  CHECK(raw[2].head == "us");
  CHECK(raw[2].relation == "exports");
  CHECK(raw[2].tail == "jp");
  CHECK(raw[2].timestamp == 3);
  CHECK(raw[2].attr_head == std::vector<double>{1.5});
}

TEST_CASE("empty file gives no events, no vocabulary, and a warning") {
  std::size_t arity = 7;
  std::vector<std::string> warnings;
  const auto raw = parse_str("# nothing here\n", &arity, &warnings);
  CHECK(raw.empty());
  CHECK(arity == 0);
  REQUIRE(warnings.size() == 1);
  const DatasetSplit split = make_split(raw, {}, {});
  CHECK(split.num_entities() == 0);
  CHECK(split.num_relations() == 0);
  CHECK_FALSE(split.meta.warnings.empty());
}

TEST_CASE("malformed input names the line") {
  CHECK_THROWS_WITH_AS(parse_str("a\tb\tc\n"), doctest::Contains("test:1"), DataError);
  CHECK_THROWS_WITH_AS(parse_str("a\tr\tb\t0\t1.0\t2.0\na\tr\tb\tnope\t1\t2\n"),
                       doctest::Contains("test:2"), DataError);
  CHECK_THROWS_WITH_AS(parse_str("a\tr\tb\t0\t1.0\tx\n"), doctest::Contains("test:1"), DataError);
}

TEST_CASE("inconsistent attribute arity is rejected") {
  CHECK_THROWS_WITH_AS(parse_str("a\tr\tb\t0\t1.0\t2.0\na\tr\tb\t1\t1.0,2.0\t3.0,4.0\n"),
                       doctest::Contains("arity"), DataError);
  CHECK_THROWS_AS(parse_str("a\tr\tb\t0\t1.0,2.0\t2.0\n"), DataError);
}

TEST_CASE("build_snapshots keeps gaps and groups by tick") {
  std::vector<Event> events;
  Event e;
  e.attr_head = {0.0};
  e.attr_tail = {0.0};
  e.head = 0, e.relation = 0, e.tail = 1, e.timestamp = 1;
  events.push_back(e);
  e.head = 1, e.tail = 0, e.timestamp = 1;
  events.push_back(e);
  e.head = 0, e.tail = 1, e.timestamp = 3;
  events.push_back(e);
  const auto snaps = build_snapshots(events);
  REQUIRE(snaps.size() == 2);  // tick 2 absent, not filled
  CHECK(snaps[0].timestamp == 1);
  CHECK(snaps[0].events.size() == 2);
  CHECK(snaps[1].timestamp == 3);
  CHECK(snaps[1].events.size() == 1);
}

TEST_CASE("singleton snapshot indexes its head") {
  Event e;
  e.head = 4, e.relation = 1, e.tail = 2, e.timestamp = 9;
  e.attr_head = {1.0};
  e.attr_tail = {2.0};
  const auto snaps = build_snapshots({e});
  REQUIRE(snaps.size() == 1);
  REQUIRE(snaps[0].by_head.count(4) == 1);
  CHECK(snaps[0].by_head.at(4) == std::vector<std::size_t>{0});
  CHECK(snaps[0].attributes.at(4) == std::vector<double>{1.0});
  CHECK(snaps[0].attributes.at(2) == std::vector<double>{2.0});
}

TEST_CASE("random fixture matches a brute-force group-by") {
  std::mt19937_64 rng(42);
  std::vector<Event> events;
  for (int i = 0; i < 20; ++i) {
    Event e;
    e.head = static_cast<int>(rng() % 4);
    e.relation = static_cast<int>(rng() % 2);
    e.tail = static_cast<int>(rng() % 4);
    e.timestamp = static_cast<std::int64_t>(rng() % 5);
    e.attr_head = {static_cast<double>(e.head)};  // attribute = f(entity), so no conflicts
    e.attr_tail = {static_cast<double>(e.tail)};
    events.push_back(e);
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });

  std::map<std::int64_t, std::vector<Event>> expected;
  for (const Event& e : events) expected[e.timestamp].push_back(e);

  const auto snaps = build_snapshots(events);
  REQUIRE(snaps.size() == expected.size());
  std::size_t total = 0;
  for (const Snapshot& snap : snaps) {
    CHECK(snap.events == expected.at(snap.timestamp));
    total += snap.events.size();
    for (const auto& [head, indices] : snap.by_head) {
      for (std::size_t index : indices) CHECK(snap.events[index].head == head);
    }
  }
  CHECK(total == events.size());
}

TEST_CASE("conflicting attributes at one tick are rejected with the pair") {
  Event a, b;
  a.head = 0, a.relation = 0, a.tail = 1, a.timestamp = 2;
  a.attr_head = {1.0}, a.attr_tail = {5.0};
  b.head = 1, b.relation = 0, b.tail = 0, b.timestamp = 2;
  b.attr_head = {5.5}, b.attr_tail = {1.0};  // entity 1 claims 5.0 and 5.5
  CHECK_THROWS_WITH_AS(build_snapshots({a, b}), doctest::Contains("entity 1"), DataError);
  CHECK_THROWS_WITH_AS(build_snapshots({a, b}), doctest::Contains("tick 2"), DataError);
}

TEST_CASE("normalize") {
  SUBCASE("constant series pass through unchanged") {
    const std::string text =
        "a\tr\tb\t0\t4.5\t4.5\n"
        "a\tr\tb\t1\t4.5\t4.5\n"
        "a\tr\tb\t2\t4.5\t4.5\n"
        "a\tr\tb\t3\t4.5\t4.5\n";
    const auto raw = parse_str(text);
    const auto parts = split_raw_by_time(raw, {0.5, 0.25, 0.25});
    DatasetSplit split = normalize(make_split(parts[0], parts[1], parts[2]));
    for (const Snapshot& snap : split.train) {
      for (const auto& [entity, attrs] : snap.attributes) CHECK(attrs == std::vector<double>{4.5});
    }
    CHECK(split.stats.mean == std::vector<double>{0.0});
    CHECK(split.stats.stddev == std::vector<double>{1.0});
  }
  SUBCASE("round trip is the identity within 1e-12") {
    std::mt19937_64 rng(7);
    NormStats stats;
    stats.mean = {1.7, -0.3};
    stats.stddev = {2.25, 0.845};
    for (int i = 0; i < 50; ++i) {
      const std::vector<double> original = dartnet::testing::random_values(2, rng, -10.0, 10.0);
      const auto back = denormalize_attr(stats, normalize_attr(stats, original));
      CHECK(std::abs(back[0] - original[0]) < 1e-12);
      CHECK(std::abs(back[1] - original[1]) < 1e-12);
    }
  }
}

TEST_CASE("direct formula: mean 5, std 2, value 9 normalizes to 2") {
  // attributes 3,7,3,7 over train: mean 5, population std 2
  const std::string text =
      "a\tr\tb\t0\t3\t3\n"
      "a\tr\tb\t1\t7\t7\n"
      "a\tr\tb\t2\t3\t3\n"
      "a\tr\tb\t3\t7\t7\n"
      "a\tr\tb\t4\t9\t9\n"
      "a\tr\tb\t5\t9\t9\n";
  const auto raw = parse_str(text);
  const auto parts = split_raw_by_time(raw, {4.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0});
  DatasetSplit split = normalize(make_split(parts[0], parts[1], parts[2]));
  CHECK(split.stats.mean == std::vector<double>{5.0});
  CHECK(split.stats.stddev == std::vector<double>{2.0});
  CHECK(split.valid.front().attributes.at(0) == std::vector<double>{2.0});
}

TEST_CASE("split_counts applies floor then remainder to the last part") {
  CHECK(split_counts(10, {0.8, 0.1, 0.1}) == std::array<std::size_t, 3>{8, 1, 1});
  CHECK(split_counts(10, {0.7, 0.15, 0.15}) == std::array<std::size_t, 3>{7, 1, 2});
  CHECK_THROWS_AS(split_counts(10, {0.5, 0.2, 0.2}), std::invalid_argument);
  CHECK_THROWS_AS(split_counts(10, {1.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("fewer than three distinct timestamps cannot be split") {
  const auto raw = parse_str("a\tr\tb\t0\t1\t1\na\tr\tb\t1\t1\t1\n");
  CHECK_THROWS_AS(split_raw_by_time(raw, {0.8, 0.1, 0.1}), DataError);
}

TEST_CASE("large file with table-scale counts loads with matching counts") {
  // 463,188 train lines over 58 entities and 178 relations
  TempDir dir("atg_scale");
  {
    std::ofstream out(dir.file("train.tsv"));
    std::mt19937_64 rng(1);
    const std::size_t lines = 463188;
    for (std::size_t i = 0; i < lines; ++i) {
      const std::size_t h = i % 58;
      const std::size_t t = (i + 1 + i / 58) % 58;
      const std::size_t r = i % 178;
      const std::size_t tick = i / 4000;
      out << "e" << h << "\trel" << r << "\te" << (t == h ? (t + 1) % 58 : t) << '\t' << tick << "\t0.5\t0.5\n";
    }
    std::ofstream(dir.file("valid.tsv")) << "e0\trel0\te1\t200\t0.5\t0.5\n";
    std::ofstream(dir.file("test.tsv")) << "e0\trel0\te1\t300\t0.5\t0.5\n";
  }
  const DatasetSplit split = load_dataset(dir.str());
  std::size_t train_events = 0;
  for (const Snapshot& snap : split.train) train_events += snap.events.size();
  CHECK(train_events == 463188);
  CHECK(split.num_entities() == 58);
  CHECK(split.num_relations() == 178);
}

TEST_CASE("lossless ingestion round trip") {
  std::mt19937_64 rng(77);
  std::vector<RawEvent> original;
  for (int i = 0; i < 60; ++i) {
    RawEvent e;
    e.head = "n" + std::to_string(rng() % 6);
    e.relation = "r" + std::to_string(rng() % 3);
    e.tail = "n" + std::to_string(rng() % 6);
    e.timestamp = static_cast<std::int64_t>(rng() % 7) * 10;  // sparse raw ticks
    // one consistent attribute per (entity, tick)
    e.attr_head = {std::sin(static_cast<double>(e.timestamp)) + (e.head[1] - '0')};
    e.attr_tail = {std::sin(static_cast<double>(e.timestamp)) + (e.tail[1] - '0')};
    original.push_back(e);
  }
  std::stable_sort(original.begin(), original.end(),
                   [](const RawEvent& a, const RawEvent& b) { return a.timestamp < b.timestamp; });

  TempDir dir("roundtrip");
  write_events_file(dir.file("events.tsv"), original);
  std::size_t arity = 0;
  const auto loaded = load_raw_events(dir.file("events.tsv"), &arity, nullptr);
  CHECK(loaded == original);

  // Through snapshots and back: the multiset of hextuples survives.
  const DatasetSplit split = make_split(loaded, {}, {});
  std::vector<RawEvent> reemitted;
  for (const Snapshot& snap : split.train) {
    for (const Event& e : snap.events) reemitted.push_back(decode_event(e, split.meta));
  }
  const auto key = [](const RawEvent& e) {
    std::ostringstream k;
    k << e.head << '|' << e.relation << '|' << e.tail << '|' << e.timestamp << '|' << e.attr_head[0]
      << '|' << e.attr_tail[0];
    return k.str();
  };
  std::multiset<std::string> a, b;
  for (const auto& e : original) a.insert(key(e));
  for (const auto& e : reemitted) b.insert(key(e));
  CHECK(a == b);

  // Byte-identical re-serialization.
  write_events_file(dir.file("again.tsv"), reemitted);
  std::size_t arity2 = 0;
  const auto reloaded = load_raw_events(dir.file("again.tsv"), &arity2, nullptr);
  std::multiset<std::string> c;
  for (const auto& e : reloaded) c.insert(key(e));
  CHECK(a == c);
}

TEST_CASE("interaction and attribute views reconstruct the events") {
  const std::string text =
      "x\tr1\ty\t0\t1.5\t2.5\n"
      "x\tr2\tz\t0\t1.5\t3.5\n"
      "y\tr1\tz\t0\t2.5\t3.5\n";
  const auto raw = parse_str(text);
  const DatasetSplit split = make_split(raw, {}, {});
  const Snapshot& snap = split.train.front();

  const auto interactions = interaction_view(snap);
  const auto& attributes = attribute_view(snap);
  REQUIRE(interactions.size() == snap.events.size());
  for (std::size_t i = 0; i < interactions.size(); ++i) {
    const auto& [h, r, t, tau] = interactions[i];
    Event rebuilt;
    rebuilt.head = h;
    rebuilt.relation = r;
    rebuilt.tail = t;
    rebuilt.timestamp = tau;
    rebuilt.attr_head = attributes.at(h);
    rebuilt.attr_tail = attributes.at(t);
    CHECK(rebuilt == snap.events[i]);
  }
}

TEST_CASE("vocabulary and statistics come from the train portion only") {
  std::vector<RawEvent> train = parse_str(
      "a\tr\tb\t0\t1\t2\n"
      "b\tr\ta\t1\t2\t1\n"
      "a\tr\tb\t2\t1\t2\n");
  std::vector<RawEvent> test = parse_str(
      "a\tr\tb\t3\t100\t200\n"
      "ghost\tr\tb\t3\t7\t200\n"   // unseen entity: dropped
      "a\tnew_rel\tb\t4\t100\t200\n");  // unseen relation: dropped

  DatasetSplit split = make_split(train, {}, test);
  CHECK(split.num_entities() == 2);
  CHECK(split.num_relations() == 1);
  CHECK(split.meta.dropped_events == 2);
  std::size_t kept = 0;
  for (const Snapshot& snap : split.test) kept += snap.events.size();
  CHECK(kept == 1);

  split = normalize(std::move(split));
  // mean/std of train values {1, 2} only; huge test values do not leak in
  CHECK(split.stats.mean == std::vector<double>{1.5});
  CHECK(split.stats.stddev == std::vector<double>{0.5});
}

TEST_CASE("pre-split directories and single files both load") {
  TempDir dir("presplit");
  std::ofstream(dir.file("train.tsv")) << "a\tr\tb\t0\t1\t2\nb\tr\ta\t1\t2\t1\n";
  std::ofstream(dir.file("valid.tsv")) << "a\tr\tb\t2\t1\t2\n";
  std::ofstream(dir.file("test.tsv")) << "b\tr\ta\t3\t2\t1\n";
  const DatasetSplit split = load_dataset(dir.str());
  CHECK(split.train.size() == 2);
  CHECK(split.valid.size() == 1);
  CHECK(split.test.size() == 1);
  CHECK(split.meta.time_ordered_splits);

  TempDir single("singlefile");
  std::ofstream(single.file("events.tsv"))
      << "a\tr\tb\t0\t1\t2\na\tr\tb\t1\t1\t2\na\tr\tb\t2\t1\t2\na\tr\tb\t3\t1\t2\na\tr\tb\t4\t1\t2\n";
  const DatasetSplit s2 = load_dataset(single.str(), {0.6, 0.2, 0.2});
  CHECK(s2.train.size() == 3);
  CHECK(s2.valid.size() == 1);
  CHECK(s2.test.size() == 1);
}

TEST_CASE("missing file raises a data error") {
  CHECK_THROWS_AS(load_dataset("/nonexistent/dataset.tsv"), DataError);
}

}  // TEST_SUITE
