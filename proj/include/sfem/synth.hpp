#pragma once

#include "sfem/corpus.hpp"

#include <cstdint>
#include <string>
#include <vector>

// Seeded synthetic corpus/graph/embedding generator with known planted
// structure, for tests and desk-scale experiments. Emits exactly the file
// formats the corpus and knowledge loaders consume, plus a manifest of the
// planted truth.
namespace sfem::synth {

struct SynthConfig {
  int frames = 20;
  int nouns_per_frame = 8;   // support nouns per frame
  int queries_per_frame = 3;
  int decades = 2;
  double cluster_separation = 10.0;  // in units of the cluster std (1.0)
  double bimodal_fraction = 1.0;     // fraction of frames with two support clusters
  bool modality_split = false;       // distribute class signal across modalities
  int start_decade = 1900;
  std::uint64_t seed = 1;

  void validate() const;
};

struct PlantedNoun {
  std::string noun;
  corpus::Frame frame;
  bool is_query = false;
  bool far_cluster = false;   // the aprototypical support cluster
  bool novel = false;         // zero reference frequency before the prediction decade
  int owner_modality = -1;    // 0 perceptual, 1 conceptual, 2 linguistic, -1 all
};

struct SynthOutput {
  std::string triples_path;
  std::string frequency_path;
  std::string graph_path;
  std::string perceptual_path;
  std::string conceptual_path;
  std::string linguistic_path;
  std::string image_counts_path;
  std::string manifest_path;
  int prediction_decade = 0;
  std::vector<PlantedNoun> planted;
};

// Query nouns are planted in each frame's home cluster with counts chosen
// to satisfy the default theta_q/theta_s conditions exactly. For bimodal
// frames, the far support cluster is placed so its frame's centroid lands
// on the next bimodal frame's home site: centroid proximity then favors
// the wrong frame while exemplar proximity favors the right one.
SynthOutput generate(const SynthConfig& config, const std::string& out_dir);

// Two-column `token count` TSV used for the image-count filter input.
std::map<std::string, long long> load_token_counts(const std::string& path);

}  // namespace sfem::synth
