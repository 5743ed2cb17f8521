// SPDX-License-Identifier: Apache-2.0
#include "dartnet/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <string_view>

namespace dartnet {

namespace {

namespace fs = std::filesystem;

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

[[noreturn]] void line_error(const std::string& source, std::size_t line_no, const std::string& what) {
  throw DataError(source + ":" + std::to_string(line_no) + ": " + what);
}

std::vector<double> parse_attr_list(std::string_view field, const std::string& source, std::size_t line_no) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= field.size()) {
    std::size_t pos = field.find(',', start);
    if (pos == std::string_view::npos) pos = field.size();
    const std::string token(field.substr(start, pos - start));
    if (token.empty()) line_error(source, line_no, "empty attribute value");
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') {
      line_error(source, line_no, "bad attribute value '" + token + "'");
    }
    values.push_back(v);
    if (pos == field.size()) break;
    start = pos + 1;
  }
  return values;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_attr_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  return out;
}

std::vector<Event> encode_events(const std::vector<RawEvent>& raw, const Vocabulary& entities,
                                 const Vocabulary& relations,
                                 const std::map<std::int64_t, std::int64_t>& tick_index,
                                 std::size_t* dropped) {
  std::vector<Event> events;
  events.reserve(raw.size());
  for (const RawEvent& r : raw) {
    const int h = entities.id_of(r.head);
    const int t = entities.id_of(r.tail);
    const int rel = relations.id_of(r.relation);
    if (h < 0 || t < 0 || rel < 0) {
      if (dropped) {
        ++*dropped;
        continue;
      }
      throw DataError("event references an id outside the vocabulary: " + r.head + " " + r.relation +
                      " " + r.tail);
    }
    Event e;
    e.head = h;
    e.relation = rel;
    e.tail = t;
    e.attr_head = r.attr_head;
    e.attr_tail = r.attr_tail;
    e.timestamp = tick_index.at(r.timestamp);
    events.push_back(std::move(e));
  }
  return events;
}

void apply_stats(std::vector<Snapshot>& snapshots, const NormStats& stats, bool forward) {
  const auto transform = [&](std::vector<double>& attrs) {
    attrs = forward ? normalize_attr(stats, attrs) : denormalize_attr(stats, attrs);
  };
  for (Snapshot& snap : snapshots) {
    for (Event& e : snap.events) {
      transform(e.attr_head);
      transform(e.attr_tail);
    }
    for (auto& [entity, attrs] : snap.attributes) transform(attrs);
  }
}

}  // namespace

std::vector<std::pair<int, int>> Snapshot::head_relation_pairs() const {
  std::set<std::pair<int, int>> pairs;
  for (const Event& e : events) pairs.emplace(e.head, e.relation);
  return {pairs.begin(), pairs.end()};
}

Snapshot make_snapshot(std::int64_t timestamp, std::vector<Event> events) {
  Snapshot snap;
  snap.timestamp = timestamp;
  snap.events = std::move(events);
  for (std::size_t i = 0; i < snap.events.size(); ++i) {
    const Event& e = snap.events[i];
    if (e.timestamp != timestamp) {
      throw DataError("snapshot at tick " + std::to_string(timestamp) + " given an event at tick " +
                      std::to_string(e.timestamp));
    }
    snap.by_head[e.head].push_back(i);
    for (const auto& [entity, attrs] : {std::pair{e.head, e.attr_head}, std::pair{e.tail, e.attr_tail}}) {
      auto [it, inserted] = snap.attributes.emplace(entity, attrs);
      if (!inserted && it->second != attrs) {
        throw DataError("conflicting attributes for entity " + std::to_string(entity) + " at tick " +
                        std::to_string(timestamp));
      }
    }
  }
  return snap;
}

int Vocabulary::add(const std::string& name) {
  const auto it = index_.find(name);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(names_.size());
  names_.push_back(name);
  index_.emplace(name, id);
  return id;
}

int Vocabulary::id_of(const std::string& name) const {
  const auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

const std::string& Vocabulary::name_of(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= names_.size()) {
    throw DataError("vocabulary id " + std::to_string(id) + " out of range");
  }
  return names_[static_cast<std::size_t>(id)];
}

std::vector<double> normalize_attr(const NormStats& stats, const std::vector<double>& attrs) {
  if (stats.empty()) return attrs;
  std::vector<double> out(attrs.size());
  for (std::size_t i = 0; i < attrs.size(); ++i) out[i] = (attrs[i] - stats.mean[i]) / stats.stddev[i];
  return out;
}

std::vector<double> denormalize_attr(const NormStats& stats, const std::vector<double>& attrs) {
  if (stats.empty()) return attrs;
  std::vector<double> out(attrs.size());
  for (std::size_t i = 0; i < attrs.size(); ++i) out[i] = attrs[i] * stats.stddev[i] + stats.mean[i];
  return out;
}

std::vector<RawEvent> parse_events(std::istream& in, const std::string& source,
                                   std::size_t* arity, std::vector<std::string>* warnings) {
  std::vector<RawEvent> events;
  std::size_t k = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 6) {
      line_error(source, line_no, "expected 6 tab-separated fields, got " + std::to_string(fields.size()));
    }
    RawEvent e;
    e.head = std::string(fields[0]);
    e.relation = std::string(fields[1]);
    e.tail = std::string(fields[2]);
    if (e.head.empty() || e.relation.empty() || e.tail.empty()) {
      line_error(source, line_no, "empty id field");
    }
    std::int64_t ts = 0;
    const auto [ptr, ec] = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), ts);
    if (ec != std::errc() || ptr != fields[3].data() + fields[3].size() || ts < 0) {
      line_error(source, line_no, "bad timestamp '" + std::string(fields[3]) + "'");
    }
    e.timestamp = ts;
    e.attr_head = parse_attr_list(fields[4], source, line_no);
    e.attr_tail = parse_attr_list(fields[5], source, line_no);
    if (e.attr_head.size() != e.attr_tail.size()) {
      line_error(source, line_no, "head and tail attribute arities differ");
    }
    if (k == 0) {
      k = e.attr_head.size();
    } else if (e.attr_head.size() != k) {
      line_error(source, line_no,
                 "attribute arity " + std::to_string(e.attr_head.size()) + " differs from " + std::to_string(k));
    }
    events.push_back(std::move(e));
  }
  if (events.empty() && warnings) warnings->push_back(source + ": no events");
  std::stable_sort(events.begin(), events.end(),
                   [](const RawEvent& a, const RawEvent& b) { return a.timestamp < b.timestamp; });
  if (arity) *arity = k;
  return events;
}

std::vector<RawEvent> load_raw_events(const std::string& path, std::size_t* arity,
                                      std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return parse_events(in, path, arity, warnings);
}

void write_events(std::ostream& out, const std::vector<RawEvent>& events,
                  const std::vector<std::string>& header_comments) {
  for (const std::string& comment : header_comments) out << "# " << comment << '\n';
  for (const RawEvent& e : events) {
    out << e.head << '\t' << e.relation << '\t' << e.tail << '\t' << e.timestamp << '\t'
        << format_attr_list(e.attr_head) << '\t' << format_attr_list(e.attr_tail) << '\n';
  }
}

void write_events_file(const std::string& path, const std::vector<RawEvent>& events,
                       const std::vector<std::string>& header_comments) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  write_events(out, events, header_comments);
}

RawEvent decode_event(const Event& event, const DatasetMeta& meta) {
  RawEvent r;
  r.head = meta.entities.name_of(event.head);
  r.relation = meta.relations.name_of(event.relation);
  r.tail = meta.entities.name_of(event.tail);
  r.attr_head = event.attr_head;
  r.attr_tail = event.attr_tail;
  r.timestamp = static_cast<std::size_t>(event.timestamp) < meta.tick_to_raw.size()
                    ? meta.tick_to_raw[static_cast<std::size_t>(event.timestamp)]
                    : event.timestamp;
  return r;
}

void save_vocabulary(const DatasetMeta& meta, const std::string& dir) {
  fs::create_directories(dir);
  const auto dump = [&](const Vocabulary& vocab, const std::string& name) {
    std::ofstream out(fs::path(dir) / name);
    if (!out) throw DataError("cannot write " + (fs::path(dir) / name).string());
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      out << i << '\t' << vocab.name_of(static_cast<int>(i)) << '\n';
    }
  };
  dump(meta.entities, "entities.tsv");
  dump(meta.relations, "relations.tsv");
}

std::array<std::size_t, 3> split_counts(std::size_t n, const std::array<double, 3>& fractions) {
  double total = 0.0;
  for (double f : fractions) {
    if (f <= 0.0) throw std::invalid_argument("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");
  std::array<std::size_t, 3> counts{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    counts[i] = static_cast<std::size_t>(std::floor(fractions[i] * static_cast<double>(n)));
    assigned += counts[i];
  }
  counts[2] += n - assigned;  // leftover goes to the final split
  return counts;
}

std::array<std::vector<RawEvent>, 3> split_raw_by_time(const std::vector<RawEvent>& events,
                                                       const std::array<double, 3>& fractions) {
  std::set<std::int64_t> distinct;
  for (const RawEvent& e : events) distinct.insert(e.timestamp);
  if (distinct.size() < 3) {
    throw DataError("need at least 3 distinct timestamps to split, got " + std::to_string(distinct.size()));
  }
  const auto counts = split_counts(distinct.size(), fractions);
  std::vector<std::int64_t> ticks(distinct.begin(), distinct.end());
  const std::int64_t train_end = ticks[counts[0] - 1];
  const std::int64_t valid_end = counts[1] > 0 ? ticks[counts[0] + counts[1] - 1] : train_end;
  std::array<std::vector<RawEvent>, 3> out;
  for (const RawEvent& e : events) {
    if (e.timestamp <= train_end) {
      out[0].push_back(e);
    } else if (e.timestamp <= valid_end) {
      out[1].push_back(e);
    } else {
      out[2].push_back(e);
    }
  }
  return out;
}

DatasetSplit make_split(const std::vector<RawEvent>& train, const std::vector<RawEvent>& valid,
                        const std::vector<RawEvent>& test) {
  DatasetSplit split;
  DatasetMeta& meta = split.meta;

  for (const RawEvent& e : train) {
    meta.entities.add(e.head);
    meta.entities.add(e.tail);
    meta.relations.add(e.relation);
    if (meta.attr_arity == 0) meta.attr_arity = e.attr_head.size();
  }
  if (train.empty()) meta.warnings.push_back("train split is empty");

  std::set<std::int64_t> raw_ticks;
  for (const auto* part : {&train, &valid, &test}) {
    for (const RawEvent& e : *part) raw_ticks.insert(e.timestamp);
  }
  std::map<std::int64_t, std::int64_t> tick_index;
  for (std::int64_t raw : raw_ticks) {
    tick_index.emplace(raw, static_cast<std::int64_t>(meta.tick_to_raw.size()));
    meta.tick_to_raw.push_back(raw);
  }

  const std::vector<Event> train_events = encode_events(train, meta.entities, meta.relations, tick_index, nullptr);
  std::size_t dropped = 0;
  const std::vector<Event> valid_events = encode_events(valid, meta.entities, meta.relations, tick_index, &dropped);
  const std::vector<Event> test_events = encode_events(test, meta.entities, meta.relations, tick_index, &dropped);
  meta.dropped_events = dropped;
  if (dropped > 0) {
    meta.warnings.push_back(std::to_string(dropped) +
                            " valid/test events dropped: ids missing from the train vocabulary");
  }

  split.train = build_snapshots(train_events);
  split.valid = build_snapshots(valid_events);
  split.test = build_snapshots(test_events);

  const auto max_tick = [](const std::vector<Snapshot>& s) {
    return s.empty() ? std::numeric_limits<std::int64_t>::min() : s.back().timestamp;
  };
  const auto min_tick = [](const std::vector<Snapshot>& s) {
    return s.empty() ? std::numeric_limits<std::int64_t>::max() : s.front().timestamp;
  };
  meta.time_ordered_splits =
      max_tick(split.train) < min_tick(split.valid) && max_tick(split.valid) < min_tick(split.test);
  return split;
}

std::vector<Snapshot> build_snapshots(const std::vector<Event>& events) {
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].timestamp < events[i - 1].timestamp) {
      throw DataError("events are not timestamp-sorted at position " + std::to_string(i));
    }
  }
  std::vector<Snapshot> snapshots;
  std::size_t start = 0;
  while (start < events.size()) {
    std::size_t end = start;
    while (end < events.size() && events[end].timestamp == events[start].timestamp) ++end;
    snapshots.push_back(make_snapshot(events[start].timestamp,
                                      {events.begin() + static_cast<std::ptrdiff_t>(start),
                                       events.begin() + static_cast<std::ptrdiff_t>(end)}));
    start = end;
  }
  return snapshots;
}

DatasetSplit load_dataset(const std::string& path, const std::array<double, 3>& fractions) {
  const fs::path p(path);
  std::vector<std::string> warnings;
  if (fs::is_directory(p)) {
    const fs::path train_p = p / "train.tsv";
    const fs::path valid_p = p / "valid.tsv";
    const fs::path test_p = p / "test.tsv";
    if (fs::exists(train_p) && fs::exists(valid_p) && fs::exists(test_p)) {
      std::size_t arity = 0;
      const auto train = load_raw_events(train_p.string(), &arity, &warnings);
      const auto valid = load_raw_events(valid_p.string(), &arity, &warnings);
      const auto test = load_raw_events(test_p.string(), &arity, &warnings);
      DatasetSplit split = make_split(train, valid, test);
      split.meta.warnings.insert(split.meta.warnings.end(), warnings.begin(), warnings.end());
      return split;
    }
    const fs::path events_p = p / "events.tsv";
    if (fs::exists(events_p)) return load_dataset(events_p.string(), fractions);
    throw DataError(path + ": expected train/valid/test.tsv or events.tsv");
  }
  std::size_t arity = 0;
  const auto events = load_raw_events(path, &arity, &warnings);
  const auto parts = split_raw_by_time(events, fractions);
  DatasetSplit split = make_split(parts[0], parts[1], parts[2]);
  split.meta.warnings.insert(split.meta.warnings.end(), warnings.begin(), warnings.end());
  return split;
}

DatasetSplit normalize(DatasetSplit split) {
  if (split.normalized) return split;
  const std::size_t k = split.attr_arity();
  if (k == 0 || split.train.empty()) throw DataError("normalize: train split is empty");

  std::vector<double> sum(k, 0.0), sum_sq(k, 0.0);
  std::size_t count = 0;
  for (const Snapshot& snap : split.train) {
    for (const auto& [entity, attrs] : snap.attributes) {
      for (std::size_t i = 0; i < k; ++i) {
        sum[i] += attrs[i];
        sum_sq[i] += attrs[i] * attrs[i];
      }
      ++count;
    }
  }
  NormStats stats;
  stats.mean.resize(k);
  stats.stddev.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double mean = sum[i] / static_cast<double>(count);
    const double var = std::max(0.0, sum_sq[i] / static_cast<double>(count) - mean * mean);
    const double sd = std::sqrt(var);
    if (sd == 0.0) {
      stats.mean[i] = 0.0;  // constant dimension: identity transform
      stats.stddev[i] = 1.0;
    } else {
      stats.mean[i] = mean;
      stats.stddev[i] = sd;
    }
  }
  return normalize_with(std::move(split), std::move(stats));
}

DatasetSplit normalize_with(DatasetSplit split, NormStats stats) {
  if (split.normalized) throw DataError("normalize_with: split is already normalized");
  if (stats.mean.size() != split.attr_arity()) {
    throw DataError("normalize_with: statistics arity " + std::to_string(stats.mean.size()) +
                    " does not match dataset arity " + std::to_string(split.attr_arity()));
  }
  apply_stats(split.train, stats, true);
  apply_stats(split.valid, stats, true);
  apply_stats(split.test, stats, true);
  split.stats = std::move(stats);
  split.normalized = true;
  return split;
}

std::vector<std::tuple<int, int, int, std::int64_t>> interaction_view(const Snapshot& snapshot) {
  std::vector<std::tuple<int, int, int, std::int64_t>> view;
  view.reserve(snapshot.events.size());
  for (const Event& e : snapshot.events) view.emplace_back(e.head, e.relation, e.tail, e.timestamp);
  return view;
}

const std::map<int, std::vector<double>>& attribute_view(const Snapshot& snapshot) {
  return snapshot.attributes;
}

std::uint64_t dataset_fingerprint(const DatasetMeta& meta) {
  std::uint64_t h = 1469598103934665603ull;
  const auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0x1f;
    h *= 1099511628211ull;
  };
  for (const std::string& name : meta.entities.names()) mix(name);
  mix("|");
  for (const std::string& name : meta.relations.names()) mix(name);
  mix("|" + std::to_string(meta.attr_arity));
  return h;
}

}  // namespace dartnet
