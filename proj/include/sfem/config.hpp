#pragma once

#include "sfem/chaining.hpp"
#include "sfem/corpus.hpp"
#include "sfem/knowledge.hpp"
#include "sfem/synth.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

// Flat `key = value` run configuration with CLI overrides. Every default is
// a pipeline constant, so a config file plus the seed block fully determines
// a run.
namespace sfem::cli {

struct RunConfig {
  // Input paths.
  std::string triples;
  std::string frequency;
  std::string graph;
  std::string perceptual;   // embedding store file
  std::string images;       // per-image vectors; alternative perceptual source
  std::string conceptual;
  std::string linguistic;
  std::string image_counts;
  std::string out_dir = "out";

  corpus::VocabularyFilter filter;

  long long theta_q = 10;
  long long theta_s = 100;
  int delta = 10;

  long long kc = 10;
  int svd_rank = 300;
  int svd_oversample = 10;
  int svd_power_iters = 7;

  chaining::ModelKind kind = chaining::ModelKind::dem;
  knowledge::ModalityMask mask;
  chaining::DistanceKind distance = chaining::DistanceKind::euclidean;

  double learning_rate = 0.1;
  int epochs = 200;
  int batch_frames = 64;

  double train_fraction = 0.7;
  double validation_fraction = 0.1;
  bool warm_start = true;
  int jobs = 1;

  std::uint64_t master_seed = 1;
  bool master_seed_set = false;
  std::optional<std::uint64_t> seed_net, seed_split, seed_sgd, seed_projection, seed_svd,
      seed_synth, seed_baseline;

  synth::SynthConfig synth;
  bool synth_seed_set = false;

  std::vector<int> concept_decades;  // empty = derive from the tables directory

  std::uint64_t net_seed() const;
  std::uint64_t split_seed() const;
  std::uint64_t sgd_seed() const;
  std::uint64_t projection_seed() const;
  std::uint64_t svd_seed() const;
  std::uint64_t synth_seed() const;
  std::uint64_t baseline_seed() const;

  // Every effective setting as key = value, for run manifests.
  std::map<std::string, std::string> manifest() const;
};

// Parses a config file; unknown keys and malformed values are io_errors.
RunConfig load_config(const std::string& path);

// Applies one `key=value` override (the `--set` flag).
void apply_override(RunConfig& config, const std::string& key, const std::string& value);

// Applies SFEM_SEED when no explicit master seed was given.
void apply_seed_env(RunConfig& config);

}  // namespace sfem::cli
