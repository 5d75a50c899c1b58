#pragma once

#include <compare>
#include <map>
#include <set>
#include <string>
#include <vector>

// Triple-corpus parsing, vocabulary filtering, decade binning, and the
// per-decade support/query table construction.
namespace sfem::corpus {

// One (verb, relation, noun) observation. `decade` is the year floored to
// its decade start; `count` is the co-occurrence count attributed to it.
struct SyntacticTriple {
  std::string verb;
  std::string relation;
  std::string noun;
  int decade = 0;
  long long count = 0;

  auto operator<=>(const SyntacticTriple&) const = default;
};

struct Frame {
  std::string verb;
  std::string relation;

  auto operator<=>(const Frame&) const = default;
  std::string key() const { return verb + "-" + relation; }
};

struct VocabularyFilter {
  long long theta_p = 64;     // min images per noun
  long long theta_c = 10;     // min contemporary concept-graph edges per noun
  long long theta_n = 15000;  // min noun corpus count
  long long theta_v = 15000;  // min verb corpus count
  int top_relations = 20;

  void validate() const;  // all thresholds must be positive
};

// Support and query noun sets of one frame at one decade. Both lists are
// sorted, unique, and disjoint.
struct FrameEntry {
  std::vector<std::string> supports;
  std::vector<std::string> queries;

  bool operator==(const FrameEntry&) const = default;
};

struct FrameTable {
  int decade = 0;
  int delta = 10;            // decade width
  long long theta_q = 10;    // query conventionalization threshold
  long long theta_s = 100;   // support threshold
  std::map<Frame, FrameEntry> entries;

  // Identity over the serialized content (decade + entries).
  bool same_content(const FrameTable& other) const {
    return decade == other.decade && entries == other.entries;
  }
  std::size_t support_pairs() const;
  std::size_t query_pairs() const;
};

// Cumulative token counts by decade, built from per-decade increments.
class TokenFrequencyIndex {
 public:
  void add(const std::string& token, int decade, long long count);

  // Sum of increments over decades <= d / decades < d.
  long long cumulative_through(const std::string& token, int d) const;
  long long cumulative_before(const std::string& token, int d) const;

  bool empty() const { return per_token_.empty(); }

  static TokenFrequencyIndex from_file(const std::string& path);

 private:
  // Per token, (decade, increment) sorted by decade.
  std::map<std::string, std::map<int, long long>> per_token_;
};

int floor_decade(int year);

// Input format: tab-separated `decade verb relation noun count`; lines
// starting with '#' and blank lines are skipped. Tokens are case-folded.
std::vector<SyntacticTriple> parse_triples(std::istream& in);
std::vector<SyntacticTriple> parse_triples_file(const std::string& path);

struct RelationSelection {
  std::vector<std::string> relations;
  bool fewer_than_requested = false;
};

// The k relations with greatest total count, ties broken lexicographically.
RelationSelection select_relations(const std::vector<SyntacticTriple>& triples, int k);

struct VocabularySets {
  std::set<std::string> nouns;
  std::set<std::string> verbs;
};

// Absent tokens in the count maps are treated as zero.
VocabularySets filter_vocabulary(const std::vector<SyntacticTriple>& triples,
                                 const VocabularyFilter& filter,
                                 const std::map<std::string, long long>& image_counts,
                                 const std::map<std::string, long long>& edge_counts,
                                 const std::map<std::string, long long>& corpus_counts);

// Drops triples whose noun/verb/relation fell out of the kept sets.
std::vector<SyntacticTriple> apply_vocabulary(const std::vector<SyntacticTriple>& triples,
                                              const VocabularySets& vocab,
                                              const std::vector<std::string>& relations);

// Noun n is a support of frame f at t iff its cumulative count with f over
// decades < t exceeds theta_s. It is a query iff that same count is below
// theta_q while the count over decades < t+delta reaches theta_q. Frames
// with fewer than 4 supports or no queries are dropped.
FrameTable build_frame_table(const std::vector<SyntacticTriple>& triples, int t,
                             long long theta_q = 10, long long theta_s = 100,
                             int delta = 10,
                             std::vector<std::string>* warnings = nullptr);

struct DecadeStats {
  int decade = 0;
  std::size_t frames = 0;
  std::size_t support_pairs = 0;
  std::size_t query_pairs = 0;
};

struct DatasetStats {
  std::size_t total_frames = 0;
  std::size_t decades = 0;
  std::vector<DecadeStats> per_decade;
};

DatasetStats dataset_stats(const std::vector<FrameTable>& tables);

// One line per (frame, role, noun): `decade verb relation S|Q noun`.
// Threshold metadata rides in '#' header comments.
std::string serialize_frame_table(const FrameTable& table);
FrameTable parse_frame_table(std::istream& in);
void save_frame_table(const FrameTable& table, const std::string& path);
FrameTable load_frame_table(const std::string& path);

// Per-noun and per-frame co-occurrence totals over decades < t; used by the
// frequency baseline.
std::map<std::string, long long> noun_counts_before(const std::vector<SyntacticTriple>& triples, int t);
std::map<Frame, long long> frame_counts_before(const std::vector<SyntacticTriple>& triples, int t);

// Corpus totals across the whole period, used for the theta_n/theta_v filter.
std::map<std::string, long long> noun_totals(const std::vector<SyntacticTriple>& triples);
std::map<std::string, long long> verb_totals(const std::vector<SyntacticTriple>& triples);

}  // namespace sfem::corpus
