#include "sfem/synth.hpp"

#include "sfem/common.hpp"
#include "sfem/knowledge.hpp"
#include "sfem/rng.hpp"
#include "sfem/text.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

namespace sfem::synth {

namespace {

constexpr int kDim = 300;
constexpr long long kSupportCountPerDecade = 200;  // cumulative > theta_s = 100
constexpr long long kQueryCount = 15;              // >= theta_q = 10 at t, zero before
constexpr long long kFreqCount = 100;              // clears kc = 10

const char* kRelations[20] = {
    "dobj",          "nsubj",          "pobj_prep.in",  "pobj_prep.on",  "pobj_prep.with",
    "pobj_prep.as",  "pobj_prep.for",  "pobj_prep.from", "pobj_prep.to",  "pobj_prep.by",
    "pobj_prep.of",  "pobj_prep.at",   "pobj_prep.into", "pobj_prep.over", "pobj_prep.under",
    "nsubjpass",     "iobj",           "xcomp",         "ccomp",         "advcl"};

std::string pad3(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03d", i);
  return buf;
}

Vec gaussian_point(rng::Engine& g, double scale) {
  Vec v(kDim);
  for (int i = 0; i < kDim; ++i) v[i] = scale * rng::normal(g);
  return v;
}

void append_vector(std::ostringstream& out, const Vec& v) {
  for (int i = 0; i < kDim; ++i) out << '\t' << text::format_double(v[i]);
}

}  // namespace

void SynthConfig::validate() const {
  if (frames < 1 || nouns_per_frame < 1 || queries_per_frame < 1 || decades < 1) {
    throw std::runtime_error("synth: all counts must be >= 1");
  }
  if (decades < 2) throw std::runtime_error("synth: need at least 2 decades");
  if (!(cluster_separation > 0.0)) throw std::runtime_error("synth: separation must be positive");
  if (bimodal_fraction < 0.0 || bimodal_fraction > 1.0) {
    throw std::runtime_error("synth: bimodal_fraction must be in [0,1]");
  }
}

std::map<std::string, long long> load_token_counts(const std::string& path) {
  std::map<std::string, long long> counts;
  const auto lines = text::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = text::trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const auto fields = text::split_ws(line);
    if (fields.size() != 2) {
      throw std::runtime_error(path + ":" + std::to_string(i + 1) + ": expected `token count`");
    }
    counts[text::lower(fields[0])] +=
        text::parse_int(fields[1], path + ":" + std::to_string(i + 1));
  }
  return counts;
}

SynthOutput generate(const SynthConfig& config, const std::string& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);

  rng::Engine g(config.seed);
  const double s = config.cluster_separation;
  const int n_frames = config.frames;
  const int n_bimodal = static_cast<int>(std::floor(config.bimodal_fraction * n_frames));

  SynthOutput out;
  out.prediction_decade = config.start_decade + 10 * (config.decades - 1);
  const int t_star = out.prediction_decade;

  // Home sites: one per frame, mutually far apart relative to the
  // within-cluster std of 1.
  std::vector<Vec> home(n_frames);
  for (int f = 0; f < n_frames; ++f) home[f] = gaussian_point(g, 0.75 * s);

  // Far support-cluster sites for bimodal frames. With >= 2 bimodal frames
  // each frame's centroid is planted on the next one's home site.
  std::vector<Vec> far(n_frames);
  for (int f = 0; f < n_bimodal; ++f) {
    if (n_bimodal >= 2) {
      const int succ = (f + 1) % n_bimodal;
      far[f] = 2.0 * home[succ] - home[f];
    } else {
      Vec dir = gaussian_point(g, 1.0);
      far[f] = home[f] + (s / dir.norm()) * dir;
    }
  }

  struct NounSite {
    std::string noun;
    int frame;
    Vec site;
    bool query;
    bool far_cluster;
    bool novel;
  };
  std::vector<NounSite> nouns;
  std::vector<corpus::Frame> frames(n_frames);
  for (int f = 0; f < n_frames; ++f) {
    frames[f] = corpus::Frame{"v" + pad3(f), kRelations[f % 20]};
    const bool bimodal = f < n_bimodal;
    for (int j = 0; j < config.nouns_per_frame; ++j) {
      const bool in_far = bimodal && j >= (config.nouns_per_frame + 1) / 2;
      nouns.push_back({"s" + pad3(f) + "_" + std::to_string(j), f,
                       in_far ? far[f] : home[f], false, in_far, false});
    }
    for (int j = 0; j < config.queries_per_frame; ++j) {
      const bool novel = (j % 2 == 0);  // alternate cohorts, first one novel
      nouns.push_back({"q" + pad3(f) + "_" + std::to_string(j), f, home[f], true, false, novel});
    }
  }

  // Triples: supports accumulate counts in every decade before t*, queries
  // appear only at t* with a count that crosses theta_q by t* + delta.
  std::ostringstream triples;
  triples << "# synthetic corpus, seed=" << config.seed << "\n";
  for (const auto& n : nouns) {
    const auto& fr = frames[static_cast<std::size_t>(n.frame)];
    if (n.query) {
      triples << t_star << '\t' << fr.verb << '\t' << fr.relation << '\t' << n.noun << '\t'
              << kQueryCount << "\n";
    } else {
      for (int d = 0; d < config.decades - 1; ++d) {
        triples << config.start_decade + 10 * d << '\t' << fr.verb << '\t' << fr.relation << '\t'
                << n.noun << '\t' << kSupportCountPerDecade << "\n";
      }
    }
  }
  out.triples_path = out_dir + "/triples.tsv";
  text::write_file(out.triples_path, triples.str());

  // Reference frequency: novel queries first appear at t*, everything else
  // has history from the first decade. Hub concepts get history too so the
  // truncated graph keeps them.
  std::ostringstream freq;
  for (const auto& n : nouns) {
    freq << n.noun << '\t' << (n.novel ? t_star : config.start_decade) << '\t' << kFreqCount
         << "\n";
  }
  for (int f = 0; f < n_frames; ++f) {
    freq << "hub" << pad3(f) << '\t' << config.start_decade << '\t' << kFreqCount << "\n";
  }
  out.frequency_path = out_dir + "/frequency.tsv";
  text::write_file(out.frequency_path, freq.str());

  // Concept graph: each noun connects to its frame's hub and the next hub.
  std::ostringstream graph;
  for (const auto& n : nouns) {
    graph << "related_to\t" << n.noun << "\thub" << pad3(n.frame) << "\t4\n";
    graph << "related_to\t" << n.noun << "\thub" << pad3((n.frame + 1) % n_frames) << "\t0.5\n";
  }
  out.graph_path = out_dir + "/graph.tsv";
  text::write_file(out.graph_path, graph.str());

  // Embedding files. With modality_split, only the owner modality of a
  // frame group carries the cluster signal; the other files hold noise.
  auto owner_of_frame = [&](int f) { return config.modality_split ? f % 3 : -1; };
  std::ostringstream emb[3];
  for (auto& e : emb) e << "dim=" << kDim << "\n";
  for (const auto& n : nouns) {
    const int owner = owner_of_frame(n.frame);
    for (int m = 0; m < 3; ++m) {
      Vec v = gaussian_point(g, 1.0);
      if (owner < 0 || owner == m) v += n.site;
      if (m == 0) {
        emb[m] << n.noun << "\tALL";
        append_vector(emb[m], v);
        emb[m] << "\n";
      } else {
        for (int d = 0; d < config.decades; ++d) {
          emb[m] << n.noun << '\t' << config.start_decade + 10 * d;
          append_vector(emb[m], v);
          emb[m] << "\n";
        }
      }
    }
  }
  out.perceptual_path = out_dir + "/perceptual.tsv";
  out.conceptual_path = out_dir + "/conceptual.tsv";
  out.linguistic_path = out_dir + "/linguistic.tsv";
  text::write_file(out.perceptual_path, emb[0].str());
  text::write_file(out.conceptual_path, emb[1].str());
  text::write_file(out.linguistic_path, emb[2].str());

  std::ostringstream img;
  for (const auto& n : nouns) img << n.noun << "\t1000\n";
  out.image_counts_path = out_dir + "/image_counts.tsv";
  text::write_file(out.image_counts_path, img.str());

  const char* modality_names[3] = {"perceptual", "conceptual", "linguistic"};
  std::ostringstream manifest;
  manifest << "# frames=" << n_frames << " nouns_per_frame=" << config.nouns_per_frame
           << " queries_per_frame=" << config.queries_per_frame << " decades=" << config.decades
           << " separation=" << config.cluster_separation
           << " bimodal_fraction=" << config.bimodal_fraction
           << " modality_split=" << (config.modality_split ? 1 : 0) << " seed=" << config.seed
           << "\n";
  manifest << "# prediction_decade=" << t_star << "\n";
  manifest << "# recommended: filter thresholds theta_p=1 theta_c=1 theta_n=1 theta_v=1\n";
  manifest << "noun\trole\tverb\trelation\tcluster\tcohort\tmodality\n";
  for (const auto& n : nouns) {
    const auto& fr = frames[static_cast<std::size_t>(n.frame)];
    const int owner = owner_of_frame(n.frame);
    manifest << n.noun << '\t' << (n.query ? "query" : "support") << '\t' << fr.verb << '\t'
             << fr.relation << '\t' << (n.far_cluster ? "far" : "home") << '\t'
             << (n.query ? (n.novel ? "novel" : "existing") : "-") << '\t'
             << (owner < 0 ? "all" : modality_names[owner]) << "\n";
    out.planted.push_back({n.noun, fr, n.query, n.far_cluster, n.novel, owner});
  }
  out.manifest_path = out_dir + "/manifest.tsv";
  text::write_file(out.manifest_path, manifest.str());
  return out;
}

}  // namespace sfem::synth
