#pragma once

#include "sfem/chaining.hpp"
#include "sfem/common.hpp"
#include "sfem/corpus.hpp"
#include "sfem/knowledge.hpp"
#include "sfem/network.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

// Per-decade training: noun-level query splits, frame batching, the epoch
// loop, and best-validation checkpoint selection.
namespace sfem::training {

struct SplitSpec {
  double train_fraction = 0.7;
  double validation_fraction = 0.1;  // carved out of the training share
  std::uint64_t seed = 0;

  void validate() const;
};

// Three tables sharing the same frames and support sets; query nouns are
// partitioned at the noun level so a noun lands in exactly one split
// across every frame.
struct SplitTables {
  corpus::FrameTable train;
  corpus::FrameTable validation;
  corpus::FrameTable test;
  std::vector<std::string> warnings;
};

SplitTables split_queries(const corpus::FrameTable& table, const SplitSpec& spec);

// Builds fused 300-d inputs for (noun, decade) from the unimodal stores.
// Missing modalities zero-fill; a noun with no data in any unmasked
// modality is an error naming the noun. When a trace is attached, every
// assembled noun is recorded (the training leakage audit reads this).
class InputAssembler {
 public:
  InputAssembler(const knowledge::EmbeddingStore* perceptual,
                 const knowledge::EmbeddingStore* conceptual,
                 const knowledge::EmbeddingStore* linguistic,
                 knowledge::ModalityMask mask, int decade, int dim = 300);

  Vec fused(const std::string& noun) const;
  bool has_any(const std::string& noun) const;

  int decade() const { return decade_; }
  int dim() const { return dim_; }
  const knowledge::ModalityMask& mask() const { return mask_; }

  void set_trace(std::unordered_set<std::string>* trace) const { trace_ = trace; }

 private:
  const knowledge::EmbeddingStore* perceptual_;
  const knowledge::EmbeddingStore* conceptual_;
  const knowledge::EmbeddingStore* linguistic_;
  knowledge::ModalityMask mask_;
  int decade_;
  int dim_;
  mutable std::unordered_set<std::string>* trace_ = nullptr;
};

struct TrainRun {
  int decade = 0;
  chaining::ModelKind kind = chaining::ModelKind::dem;
  knowledge::ModalityMask mask;
  std::vector<double> loss_trace;        // per-epoch training loss
  std::vector<double> validation_trace;  // per-epoch validation MRR
  int best_epoch = 0;                    // index into the traces
  long long sgd_steps = 0;
  nn::IntegrationNetwork best_net;
  std::vector<std::string> warnings;
};

// Runs the epoch loop: frames are shuffled (seeded) into batches of
// `batch_frames` whole frames, the batch loss covers each frame's training
// queries with the likelihood normalized over every frame in the table,
// and one SGD step follows each batch. After each epoch the validation
// score (mean reciprocal rank of the true frame under the posterior) picks
// the checkpoint; with no validation queries the lowest training loss
// does. `net` is left at the best parameters (they warm-start the next
// decade).
TrainRun train_decade(const corpus::FrameTable& train_table,
                      const corpus::FrameTable& validation_table, const InputAssembler& inputs,
                      nn::IntegrationNetwork& net, chaining::ModelKind kind,
                      const nn::SgdConfig& sgd,
                      chaining::DistanceKind dist = chaining::DistanceKind::euclidean);

void save_checkpoint(const TrainRun& run, const std::string& path,
                     std::map<std::string, std::string> extra_metadata = {});

struct Checkpoint {
  nn::IntegrationNetwork net;
  std::map<std::string, std::string> metadata;

  int decade() const;
  chaining::ModelKind kind() const;
  knowledge::ModalityMask mask() const;
};

Checkpoint load_checkpoint(const std::string& path);

// Key-value provenance file written next to each checkpoint.
void write_run_manifest(const std::string& path,
                        const std::map<std::string, std::string>& entries);

}  // namespace sfem::training
