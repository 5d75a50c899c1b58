#include "sfem/corpus.hpp"

#include "sfem/common.hpp"
#include "sfem/text.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

namespace sfem::corpus {

void VocabularyFilter::validate() const {
  if (theta_p < 1 || theta_c < 1 || theta_n < 1 || theta_v < 1 || top_relations < 1) {
    throw std::runtime_error("VocabularyFilter: all thresholds must be positive");
  }
}

std::size_t FrameTable::support_pairs() const {
  std::size_t n = 0;
  for (const auto& [f, e] : entries) n += e.supports.size();
  return n;
}

std::size_t FrameTable::query_pairs() const {
  std::size_t n = 0;
  for (const auto& [f, e] : entries) n += e.queries.size();
  return n;
}

void TokenFrequencyIndex::add(const std::string& token, int decade, long long count) {
  if (count < 0) throw std::runtime_error("frequency count must be non-negative: " + token);
  per_token_[token][decade] += count;
}

long long TokenFrequencyIndex::cumulative_through(const std::string& token, int d) const {
  auto it = per_token_.find(token);
  if (it == per_token_.end()) return 0;
  long long sum = 0;
  for (const auto& [dec, c] : it->second) {
    if (dec <= d) sum += c;
  }
  return sum;
}

long long TokenFrequencyIndex::cumulative_before(const std::string& token, int d) const {
  auto it = per_token_.find(token);
  if (it == per_token_.end()) return 0;
  long long sum = 0;
  for (const auto& [dec, c] : it->second) {
    if (dec < d) sum += c;
  }
  return sum;
}

TokenFrequencyIndex TokenFrequencyIndex::from_file(const std::string& path) {
  TokenFrequencyIndex index;
  const auto lines = text::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = text::trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const auto fields = text::split_ws(line);
    const std::string where = path + ":" + std::to_string(i + 1);
    if (fields.size() != 3) {
      throw std::runtime_error(where + ": expected `token decade count`");
    }
    const int decade = floor_decade(static_cast<int>(text::parse_int(fields[1], where + " decade")));
    index.add(text::lower(fields[0]), decade, text::parse_int(fields[2], where + " count"));
  }
  return index;
}

int floor_decade(int year) {
  int d = year / 10;
  if (year < 0 && year % 10 != 0) --d;  // floor, not truncation
  return d * 10;
}

namespace {

std::string checked_token(const std::string& raw, const std::string& where, const char* field) {
  const std::string tok = text::lower(text::trim(raw));
  if (!text::is_token(tok)) {
    throw std::runtime_error(where + ": bad " + field + " token: '" + raw + "'");
  }
  return tok;
}

}  // namespace

std::vector<SyntacticTriple> parse_triples(std::istream& in) {
  std::vector<SyntacticTriple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string trimmed = text::trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    const auto fields = text::split(line, '\t');
    const std::string where = "line " + std::to_string(lineno);
    if (fields.size() != 5) {
      throw std::runtime_error(where + ": expected 5 tab-separated fields, got " +
                               std::to_string(fields.size()));
    }
    SyntacticTriple t;
    t.decade = floor_decade(static_cast<int>(text::parse_int(text::trim(fields[0]), where + " decade")));
    t.verb = checked_token(fields[1], where, "verb");
    t.relation = checked_token(fields[2], where, "relation");
    t.noun = checked_token(fields[3], where, "noun");
    t.count = text::parse_int(text::trim(fields[4]), where + " count");
    if (t.count < 0) throw std::runtime_error(where + ": negative count");
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<SyntacticTriple> parse_triples_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open triple file: " + path);
  try {
    return parse_triples(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

RelationSelection select_relations(const std::vector<SyntacticTriple>& triples, int k) {
  if (k < 1) throw std::runtime_error("select_relations: k must be >= 1");
  std::map<std::string, long long> totals;
  for (const auto& t : triples) totals[t.relation] += t.count;
  std::vector<std::pair<std::string, long long>> ranked(totals.begin(), totals.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  RelationSelection sel;
  sel.fewer_than_requested = static_cast<int>(ranked.size()) < k;
  const std::size_t take = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < take; ++i) sel.relations.push_back(ranked[i].first);
  return sel;
}

namespace {

long long lookup_count(const std::map<std::string, long long>& m, const std::string& k) {
  auto it = m.find(k);
  return it == m.end() ? 0 : it->second;
}

}  // namespace

VocabularySets filter_vocabulary(const std::vector<SyntacticTriple>& triples,
                                 const VocabularyFilter& filter,
                                 const std::map<std::string, long long>& image_counts,
                                 const std::map<std::string, long long>& edge_counts,
                                 const std::map<std::string, long long>& corpus_counts) {
  filter.validate();
  VocabularySets vocab;
  for (const auto& t : triples) {
    if (lookup_count(image_counts, t.noun) >= filter.theta_p &&
        lookup_count(edge_counts, t.noun) >= filter.theta_c &&
        lookup_count(corpus_counts, t.noun) >= filter.theta_n) {
      vocab.nouns.insert(t.noun);
    }
    if (lookup_count(corpus_counts, t.verb) >= filter.theta_v) {
      vocab.verbs.insert(t.verb);
    }
  }
  return vocab;
}

std::vector<SyntacticTriple> apply_vocabulary(const std::vector<SyntacticTriple>& triples,
                                              const VocabularySets& vocab,
                                              const std::vector<std::string>& relations) {
  const std::set<std::string> rels(relations.begin(), relations.end());
  std::vector<SyntacticTriple> out;
  for (const auto& t : triples) {
    if (vocab.nouns.count(t.noun) && vocab.verbs.count(t.verb) && rels.count(t.relation)) {
      out.push_back(t);
    }
  }
  return out;
}

FrameTable build_frame_table(const std::vector<SyntacticTriple>& triples, int t,
                             long long theta_q, long long theta_s, int delta,
                             std::vector<std::string>* warnings) {
  if (t != floor_decade(t)) throw std::runtime_error("build_frame_table: t must be a decade boundary");
  FrameTable table;
  table.decade = t;
  table.delta = delta;
  table.theta_q = theta_q;
  table.theta_s = theta_s;

  int min_decade = 0, max_decade = 0;
  bool any = false;
  // Cumulative per (frame, noun): over decades < t and over decades < t+delta.
  std::map<std::pair<Frame, std::string>, std::pair<long long, long long>> cum;
  for (const auto& tr : triples) {
    if (!any) {
      min_decade = max_decade = tr.decade;
      any = true;
    } else {
      min_decade = std::min(min_decade, tr.decade);
      max_decade = std::max(max_decade, tr.decade);
    }
    auto& c = cum[{Frame{tr.verb, tr.relation}, tr.noun}];
    if (tr.decade < t) c.first += tr.count;
    if (tr.decade < t + delta) c.second += tr.count;
  }

  if (!any || t <= min_decade || t > max_decade) {
    if (warnings) {
      warnings->push_back("build_frame_table: decade " + std::to_string(t) +
                          " is outside the data range; table is empty");
    }
    return table;
  }

  std::map<Frame, FrameEntry> entries;
  for (const auto& [key, counts] : cum) {
    const auto& [frame, noun] = key;
    const auto [before_t, before_t_plus_delta] = counts;
    auto& entry = entries[frame];
    if (before_t > theta_s) {
      entry.supports.push_back(noun);  // support: conventional well before t
    } else if (before_t < theta_q && before_t_plus_delta >= theta_q) {
      entry.queries.push_back(noun);   // query: emergent at t
    }
  }
  for (auto& [frame, entry] : entries) {
    if (entry.supports.size() >= 4 && !entry.queries.empty()) {
      table.entries.emplace(frame, std::move(entry));
    }
  }
  return table;
}

DatasetStats dataset_stats(const std::vector<FrameTable>& tables) {
  DatasetStats stats;
  stats.decades = tables.size();
  for (const auto& t : tables) {
    DecadeStats d;
    d.decade = t.decade;
    d.frames = t.entries.size();
    d.support_pairs = t.support_pairs();
    d.query_pairs = t.query_pairs();
    stats.total_frames += d.frames;
    stats.per_decade.push_back(d);
  }
  return stats;
}

std::string serialize_frame_table(const FrameTable& table) {
  std::ostringstream out;
  out << "# decade=" << table.decade << " delta=" << table.delta
      << " theta_q=" << table.theta_q << " theta_s=" << table.theta_s << "\n";
  for (const auto& [frame, entry] : table.entries) {
    for (const auto& n : entry.supports) {
      out << table.decade << '\t' << frame.verb << '\t' << frame.relation << "\tS\t" << n << "\n";
    }
    for (const auto& n : entry.queries) {
      out << table.decade << '\t' << frame.verb << '\t' << frame.relation << "\tQ\t" << n << "\n";
    }
  }
  return out.str();
}

FrameTable parse_frame_table(std::istream& in) {
  FrameTable table;
  bool have_decade = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string trimmed = text::trim(line);
    const std::string where = "line " + std::to_string(lineno);
    if (trimmed.empty()) continue;
    if (trimmed[0] == '#') {
      for (const auto& kv : text::split_ws(trimmed.substr(1))) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = kv.substr(0, eq);
        const std::string val = kv.substr(eq + 1);
        if (key == "delta") table.delta = static_cast<int>(text::parse_int(val, where));
        if (key == "theta_q") table.theta_q = text::parse_int(val, where);
        if (key == "theta_s") table.theta_s = text::parse_int(val, where);
      }
      continue;
    }
    const auto fields = text::split(line, '\t');
    if (fields.size() != 5) {
      throw std::runtime_error(where + ": expected `decade verb relation role noun`");
    }
    const int decade = static_cast<int>(text::parse_int(fields[0], where + " decade"));
    if (!have_decade) {
      table.decade = decade;
      have_decade = true;
    } else if (decade != table.decade) {
      throw std::runtime_error(where + ": mixed decades in one table file");
    }
    const Frame frame{fields[1], fields[2]};
    auto& entry = table.entries[frame];
    if (fields[4].empty()) throw std::runtime_error(where + ": empty noun");
    if (fields[3] == "S") {
      entry.supports.push_back(fields[4]);
    } else if (fields[3] == "Q") {
      entry.queries.push_back(fields[4]);
    } else {
      throw std::runtime_error(where + ": role must be S or Q, got '" + fields[3] + "'");
    }
  }
  for (auto& [frame, entry] : table.entries) {
    std::sort(entry.supports.begin(), entry.supports.end());
    entry.supports.erase(std::unique(entry.supports.begin(), entry.supports.end()),
                         entry.supports.end());
    std::sort(entry.queries.begin(), entry.queries.end());
    entry.queries.erase(std::unique(entry.queries.begin(), entry.queries.end()),
                        entry.queries.end());
    for (const auto& q : entry.queries) {
      if (std::binary_search(entry.supports.begin(), entry.supports.end(), q)) {
        throw std::runtime_error("frame " + frame.key() + ": noun '" + q +
                                 "' is both support and query");
      }
    }
  }
  return table;
}

void save_frame_table(const FrameTable& table, const std::string& path) {
  text::write_file(path, serialize_frame_table(table));
}

FrameTable load_frame_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open frame table: " + path);
  try {
    return parse_frame_table(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::map<std::string, long long> noun_counts_before(const std::vector<SyntacticTriple>& triples, int t) {
  std::map<std::string, long long> out;
  for (const auto& tr : triples) {
    if (tr.decade < t) out[tr.noun] += tr.count;
  }
  return out;
}

std::map<Frame, long long> frame_counts_before(const std::vector<SyntacticTriple>& triples, int t) {
  std::map<Frame, long long> out;
  for (const auto& tr : triples) {
    if (tr.decade < t) out[Frame{tr.verb, tr.relation}] += tr.count;
  }
  return out;
}

std::map<std::string, long long> noun_totals(const std::vector<SyntacticTriple>& triples) {
  std::map<std::string, long long> out;
  for (const auto& tr : triples) out[tr.noun] += tr.count;
  return out;
}

std::map<std::string, long long> verb_totals(const std::vector<SyntacticTriple>& triples) {
  std::map<std::string, long long> out;
  for (const auto& tr : triples) out[tr.verb] += tr.count;
  return out;
}

}  // namespace sfem::corpus
