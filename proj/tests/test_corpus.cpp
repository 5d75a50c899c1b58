#include "doctest.h"

#include "sfem/corpus.hpp"
#include "sfem/rng.hpp"
#include "sfem/text.hpp"

#include <algorithm>
#include <sstream>

using namespace sfem;
using namespace sfem::corpus;

namespace {

std::vector<SyntacticTriple> parse_str(const std::string& s) {
  std::istringstream in(s);
  return parse_triples(in);
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("parse_triples floors years to decade starts") {
  const auto triples = parse_str("1987\tdrive\tdobj\tcar\t5\n");
  REQUIRE(triples.size() == 1);
  CHECK(triples[0].decade == 1980);
  CHECK(triples[0].verb == "drive");
  CHECK(triples[0].relation == "dobj");
  CHECK(triples[0].noun == "car");
  CHECK(triples[0].count == 5);
}

TEST_CASE("parse_triples accepts prepositional relations") {
  const auto triples = parse_str("1900\twork\tpobj_prep.as\tmechanic\t120\n");
  REQUIRE(triples.size() == 1);
  CHECK(triples[0].decade == 1900);
  CHECK(triples[0].relation == "pobj_prep.as");
}

TEST_CASE("parse_triples rejects malformed rows with line numbers") {
  CHECK_THROWS_WITH_AS(parse_str("1900\tdrive\tdobj\n"), doctest::Contains("line 1"),
                       std::runtime_error);
  CHECK_THROWS_AS(parse_str("not a data line\n"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_str("1900\tdrive\tdobj\tcar\t5\n1900\tx\tdobj\tcar\tfive\n"),
                       doctest::Contains("line 2"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_str("1900\tdrive\tdobj\tcar\t-3\n"), doctest::Contains("negative"),
                       std::runtime_error);
}

TEST_CASE("parse_triples skips comments, folds case, rejects inner spaces") {
  const auto triples = parse_str("# header\n\n1900\tDrive\tDOBJ\tCar\t2\n");
  REQUIRE(triples.size() == 1);
  CHECK(triples[0].verb == "drive");
  CHECK(triples[0].noun == "car");
  CHECK_THROWS_AS(parse_str("1900\tdrive fast\tdobj\tcar\t2\n"), std::runtime_error);
}

TEST_CASE("floor_decade handles negatives") {
  CHECK(floor_decade(1987) == 1980);
  CHECK(floor_decade(1990) == 1990);
  CHECK(floor_decade(-15) == -20);
}

TEST_CASE("select_relations orders by count then lexicographically") {
  std::vector<SyntacticTriple> triples;
  auto add = [&](const std::string& rel, long long count) {
    triples.push_back({"v", rel, "n", 1900, count});
  };
  add("dobj", 100);
  add("nsubj", 90);
  add("pobj", 10);
  auto sel = select_relations(triples, 2);
  CHECK(sel.relations == std::vector<std::string>{"dobj", "nsubj"});
  CHECK_FALSE(sel.fewer_than_requested);

  triples.clear();
  add("b", 5);
  add("a", 5);
  sel = select_relations(triples, 1);
  CHECK(sel.relations == std::vector<std::string>{"a"});

  sel = select_relations(triples, 20);
  CHECK(sel.relations.size() == 2);
  CHECK(sel.fewer_than_requested);
}

TEST_CASE("select_relations keeps the 20 most common on a larger mix") {
  std::vector<SyntacticTriple> triples;
  for (int r = 0; r < 30; ++r) {
    triples.push_back({"v", "rel" + std::to_string(r), "n", 1900, 1000 - 10 * static_cast<long long>(r)});
  }
  const auto sel = select_relations(triples, 20);
  REQUIRE(sel.relations.size() == 20);
  CHECK(sel.relations.front() == "rel0");
  for (const auto& r : sel.relations) {
    CHECK(text::parse_int(r.substr(3), "idx") < 20);
  }
}

TEST_CASE("filter_vocabulary applies strict thresholds") {
  std::vector<SyntacticTriple> triples = {{"run", "dobj", "car", 1900, 1},
                                          {"run", "dobj", "van", 1900, 1},
                                          {"walk", "dobj", "car", 1900, 1}};
  VocabularyFilter f;  // defaults: 64 / 10 / 15000 / 15000
  std::map<std::string, long long> images = {{"car", 64}, {"van", 63}};
  std::map<std::string, long long> edges = {{"car", 10}, {"van", 10}};
  std::map<std::string, long long> corpus_counts = {
      {"car", 15000}, {"van", 15000}, {"run", 15000}, {"walk", 14999}};
  const auto vocab = filter_vocabulary(triples, f, images, edges, corpus_counts);
  CHECK(vocab.nouns == std::set<std::string>{"car"});  // van: 63 images
  CHECK(vocab.verbs == std::set<std::string>{"run"});  // walk: 14999 counts
}

TEST_CASE("filter_vocabulary treats absent tokens as zero and validates thresholds") {
  std::vector<SyntacticTriple> triples = {{"run", "dobj", "car", 1900, 1}};
  VocabularyFilter f;
  const auto vocab = filter_vocabulary(triples, f, {}, {}, {});
  CHECK(vocab.nouns.empty());
  CHECK(vocab.verbs.empty());
  f.theta_p = 0;
  CHECK_THROWS_AS(filter_vocabulary(triples, f, {}, {}, {}), std::runtime_error);
}

TEST_CASE("build_frame_table support and query conditions") {
  std::vector<SyntacticTriple> triples;
  auto add = [&](int decade, const std::string& noun, long long count) {
    triples.push_back({"drive", "dobj", noun, decade, count});
  };
  for (int i = 0; i < 4; ++i) add(1880, "s" + std::to_string(i), 150);  // supports: 150 > 100
  add(1890, "car", 5);
  add(1900, "car", 20);  // query at 1900: 5 < 10 before, 25 >= 10 through
  add(1890, "van", 12);  // 12 >= theta_q before 1900: already conventional
  add(1900, "van", 100);
  const auto table = build_frame_table(triples, 1900, 10, 100);
  REQUIRE(table.entries.size() == 1);
  const auto& entry = table.entries.begin()->second;
  CHECK(entry.supports == std::vector<std::string>{"s0", "s1", "s2", "s3"});
  CHECK(entry.queries == std::vector<std::string>{"car"});
}

TEST_CASE("build_frame_table boundary: support needs strictly more than theta_s") {
  std::vector<SyntacticTriple> triples;
  auto add = [&](int decade, const std::string& noun, long long count) {
    triples.push_back({"drive", "dobj", noun, decade, count});
  };
  for (int i = 0; i < 3; ++i) add(1880, "s" + std::to_string(i), 150);
  add(1880, "edge", 100);  // exactly theta_s: not a support
  add(1900, "car", 20);
  auto table = build_frame_table(triples, 1900, 10, 100);
  CHECK(table.entries.empty());  // only 3 supports without `edge`
  add(1880, "s3", 101);          // strictly above
  table = build_frame_table(triples, 1900, 10, 100);
  REQUIRE(table.entries.size() == 1);
  CHECK(table.entries.begin()->second.supports.size() == 4);
}

TEST_CASE("build_frame_table warns outside the data range") {
  std::vector<SyntacticTriple> triples = {{"drive", "dobj", "car", 1900, 5}};
  std::vector<std::string> warnings;
  const auto table = build_frame_table(triples, 2020, 10, 100, 10, &warnings);
  CHECK(table.entries.empty());
  CHECK(warnings.size() == 1);
  CHECK_THROWS_AS(build_frame_table(triples, 1905, 10, 100), std::runtime_error);
}

TEST_CASE("frame table properties on random corpora") {
  rng::Engine g(2024);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<SyntacticTriple> triples;
    const int verbs = 2 + static_cast<int>(rng::below(g, 3));
    for (int v = 0; v < verbs; ++v) {
      for (int n = 0; n < 12; ++n) {
        for (int d = 1880; d <= 1910; d += 10) {
          if (rng::below(g, 3) == 0) continue;
          triples.push_back({"v" + std::to_string(v), "dobj", "n" + std::to_string(n), d,
                             static_cast<long long>(rng::below(g, 120))});
        }
      }
    }
    const auto table = build_frame_table(triples, 1900, 10, 60);
    for (const auto& [frame, entry] : table.entries) {
      CHECK(entry.supports.size() >= 4);
      CHECK(!entry.queries.empty());
      for (const auto& q : entry.queries) {
        CHECK(!std::binary_search(entry.supports.begin(), entry.supports.end(), q));
      }
    }

    // Raising theta_s never adds supports.
    const auto stricter = build_frame_table(triples, 1900, 10, 90);
    for (const auto& [frame, entry] : stricter.entries) {
      auto it = table.entries.find(frame);
      if (it == table.entries.end()) continue;
      for (const auto& s : entry.supports) {
        CHECK(std::binary_search(it->second.supports.begin(), it->second.supports.end(), s));
      }
    }

    // Decades after t + delta cannot influence the table.
    std::vector<SyntacticTriple> truncated;
    for (const auto& tr : triples) {
      if (tr.decade <= 1900) truncated.push_back(tr);
    }
    const auto replay = build_frame_table(truncated, 1900, 10, 60);
    CHECK(replay.same_content(table));
  }
}

TEST_CASE("frame table serialization round-trips") {
  std::vector<SyntacticTriple> triples;
  for (int i = 0; i < 5; ++i) {
    triples.push_back({"drive", "dobj", "s" + std::to_string(i), 1880, 200});
    triples.push_back({"fly", "nsubj", "t" + std::to_string(i), 1880, 200});
  }
  triples.push_back({"drive", "dobj", "car", 1900, 15});
  triples.push_back({"fly", "nsubj", "plane", 1900, 15});
  const auto table = build_frame_table(triples, 1900, 10, 100);
  REQUIRE(table.entries.size() == 2);

  const std::string text = serialize_frame_table(table);
  std::istringstream in(text);
  const auto parsed = parse_frame_table(in);
  CHECK(parsed.same_content(table));
  CHECK(parsed.theta_q == table.theta_q);
  CHECK(parsed.theta_s == table.theta_s);
  CHECK(serialize_frame_table(parsed) == text);
}

TEST_CASE("parse_frame_table rejects support/query overlap") {
  std::istringstream in("1900\tdrive\tdobj\tS\tcar\n1900\tdrive\tdobj\tQ\tcar\n");
  CHECK_THROWS_AS(parse_frame_table(in), std::runtime_error);
}

TEST_CASE("dataset_stats") {
  CHECK(dataset_stats({}).total_frames == 0);
  CHECK(dataset_stats({}).decades == 0);

  FrameTable a, b;
  a.decade = 1900;
  a.entries[{"drive", "dobj"}] = {{"s1", "s2", "s3", "s4"}, {"car"}};
  a.entries[{"fly", "dobj"}] = {{"s1", "s2", "s3", "s4"}, {"plane"}};
  a.entries[{"park", "dobj"}] = {{"s1", "s2", "s3", "s4"}, {"car"}};
  b.decade = 1910;
  b.entries = a.entries;
  const auto stats = dataset_stats({a, b});
  CHECK(stats.decades == 2);
  CHECK(stats.total_frames == 6);
  CHECK(stats.per_decade[0].frames == 3);
  CHECK(stats.per_decade[0].support_pairs == 12);
  CHECK(stats.per_decade[0].query_pairs == 3);
}

TEST_CASE("token frequency index accumulates per decade") {
  TokenFrequencyIndex idx;
  idx.add("car", 1890, 3);
  idx.add("car", 1900, 7);
  idx.add("car", 1900, 1);
  CHECK(idx.cumulative_through("car", 1880) == 0);
  CHECK(idx.cumulative_through("car", 1890) == 3);
  CHECK(idx.cumulative_through("car", 1900) == 11);
  CHECK(idx.cumulative_before("car", 1900) == 3);
  CHECK(idx.cumulative_before("car", 1950) == 11);
  CHECK(idx.cumulative_through("unknown", 2000) == 0);
  CHECK_THROWS_AS(idx.add("car", 1900, -1), std::runtime_error);

  for (int d = 1850; d <= 1950; d += 10) {
    CHECK(idx.cumulative_through("car", d) <= idx.cumulative_through("car", d + 10));
  }
}

TEST_CASE("counts before a decade") {
  std::vector<SyntacticTriple> triples = {{"drive", "dobj", "car", 1880, 5},
                                          {"drive", "dobj", "car", 1900, 7},
                                          {"fly", "dobj", "plane", 1890, 2}};
  const auto nouns = noun_counts_before(triples, 1900);
  CHECK(nouns.at("car") == 5);
  CHECK(nouns.at("plane") == 2);
  const auto frames = frame_counts_before(triples, 1910);
  CHECK(frames.at({"drive", "dobj"}) == 12);
}

}  // TEST_SUITE
