// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace dartnet {

/// Raised for malformed or inconsistent input files. The CLI maps it to
/// its data-error exit code.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One observed event: a typed edge between two entities, both carrying
/// their attribute vectors at that tick. Ids are dense and vocabulary
/// mapped; timestamps are re-indexed to 0..T-1 at load time.
struct Event {
  int head = 0;
  int relation = 0;
  int tail = 0;
  std::vector<double> attr_head;
  std::vector<double> attr_tail;
  std::int64_t timestamp = 0;

  bool operator==(const Event&) const = default;
};

/// Event with string ids and the file's raw timestamp, straight from disk.
struct RawEvent {
  std::string head;
  std::string relation;
  std::string tail;
  std::vector<double> attr_head;
  std::vector<double> attr_tail;
  std::int64_t timestamp = 0;

  bool operator==(const RawEvent&) const = default;
};

/// All events that share one timestamp, indexed by head entity.
struct Snapshot {
  std::int64_t timestamp = 0;
  std::vector<Event> events;
  // head -> indices into events (the event list of that head at this tick)
  std::map<int, std::vector<std::size_t>> by_head;
  // entity -> attribute vector, for every entity observed at this tick
  std::map<int, std::vector<double>> attributes;

  /// Distinct (head, relation) pairs, ascending.
  std::vector<std::pair<int, int>> head_relation_pairs() const;
};

/// Validates consistency and builds the indexes. Throws DataError when one
/// entity carries conflicting attribute vectors at this tick.
Snapshot make_snapshot(std::int64_t timestamp, std::vector<Event> events);

class Vocabulary {
 public:
  int add(const std::string& name);       // existing name returns its id
  int id_of(const std::string& name) const;  // -1 when unknown
  const std::string& name_of(int id) const;
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> index_;
};

struct DatasetMeta {
  Vocabulary entities;
  Vocabulary relations;
  std::size_t attr_arity = 0;
  std::vector<std::int64_t> tick_to_raw;  // dense tick -> raw file timestamp
  std::vector<std::string> warnings;
  std::size_t dropped_events = 0;  // valid/test events outside the train vocabulary
  bool time_ordered_splits = true;  // max(train ticks) < min(valid) < min(test)
};

/// Per-dimension standardization statistics computed from the train split.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  bool empty() const { return mean.empty(); }
};

std::vector<double> normalize_attr(const NormStats& stats, const std::vector<double>& attrs);
std::vector<double> denormalize_attr(const NormStats& stats, const std::vector<double>& attrs);

struct DatasetSplit {
  std::vector<Snapshot> train;
  std::vector<Snapshot> valid;
  std::vector<Snapshot> test;
  DatasetMeta meta;
  NormStats stats;
  bool normalized = false;

  std::size_t num_entities() const { return meta.entities.size(); }
  std::size_t num_relations() const { return meta.relations.size(); }
  std::size_t attr_arity() const { return meta.attr_arity; }
};

// --- parsing and serialization -------------------------------------------

/// Parses the tab-separated event format:
///   head<TAB>relation<TAB>tail<TAB>timestamp<TAB>a_h_1,..,a_h_k<TAB>a_t_1,..,a_t_k
/// Lines starting with '#' are ignored. Throws DataError with the line
/// number on malformed input or inconsistent attribute arity. Events come
/// back sorted by timestamp, ties keeping input order.
std::vector<RawEvent> parse_events(std::istream& in, const std::string& source,
                                   std::size_t* arity, std::vector<std::string>* warnings);
std::vector<RawEvent> load_raw_events(const std::string& path, std::size_t* arity,
                                      std::vector<std::string>* warnings);

/// Writes events in the same format, with doubles printed so they parse
/// back bit-exactly.
void write_events(std::ostream& out, const std::vector<RawEvent>& events,
                  const std::vector<std::string>& header_comments = {});
void write_events_file(const std::string& path, const std::vector<RawEvent>& events,
                       const std::vector<std::string>& header_comments = {});

/// Maps an encoded event back to string ids and its raw timestamp.
RawEvent decode_event(const Event& event, const DatasetMeta& meta);

void save_vocabulary(const DatasetMeta& meta, const std::string& dir);

// --- pipeline --------------------------------------------------------------

/// Floor each fraction of n, then give the remainder to the last part.
std::array<std::size_t, 3> split_counts(std::size_t n, const std::array<double, 3>& fractions);

/// Splits on distinct-timestamp boundaries into train/valid/test.
/// Requires at least 3 distinct timestamps.
std::array<std::vector<RawEvent>, 3> split_raw_by_time(const std::vector<RawEvent>& events,
                                                       const std::array<double, 3>& fractions);

/// Builds the vocabulary from the train portion only, encodes all three
/// portions (valid/test events referencing unknown ids are dropped and
/// counted), re-indexes timestamps densely, and assembles snapshots.
DatasetSplit make_split(const std::vector<RawEvent>& train, const std::vector<RawEvent>& valid,
                        const std::vector<RawEvent>& test);

/// One Snapshot per distinct timestamp; gaps between timestamps are kept,
/// never filled. Events must be timestamp-sorted.
std::vector<Snapshot> build_snapshots(const std::vector<Event>& events);

/// Loads either a directory holding train.tsv/valid.tsv/test.tsv, a
/// directory holding events.tsv, or a single event file. Single-file
/// inputs are split by the given fractions.
DatasetSplit load_dataset(const std::string& path, const std::array<double, 3>& fractions = {0.8, 0.1, 0.1});

/// Standardizes every attribute dimension with train-split statistics.
/// Zero-variance dimensions pass through unchanged (stats pinned to
/// mean 0, std 1 so the inverse stays exact).
DatasetSplit normalize(DatasetSplit split);

/// Applies previously computed statistics, e.g. the ones stored in a
/// checkpoint, instead of deriving them from this split.
DatasetSplit normalize_with(DatasetSplit split, NormStats stats);

// --- views ------------------------------------------------------------------

/// The interaction view: (head, relation, tail, timestamp) per event.
std::vector<std::tuple<int, int, int, std::int64_t>> interaction_view(const Snapshot& snapshot);

/// The attribute view: entity -> attribute vector at this tick.
const std::map<int, std::vector<double>>& attribute_view(const Snapshot& snapshot);

/// 64-bit FNV-1a over the vocabulary and arity; checkpoints store it to
/// detect evaluation against a different dataset.
std::uint64_t dataset_fingerprint(const DatasetMeta& meta);

}  // namespace dartnet
