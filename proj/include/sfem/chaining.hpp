#pragma once

#include "sfem/common.hpp"
#include "sfem/corpus.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

// The probabilistic core: frame prior, prototype- and exemplar-based
// likelihoods over learned embeddings, joint, posterior, and the training
// loss. Everything is computed in log space; linear probabilities appear
// only at reporting boundaries.
namespace sfem::chaining {

enum class ModelKind { dpm, dem };
enum class DistanceKind { euclidean, squared_euclidean };

std::string to_string(ModelKind k);
ModelKind parse_model_kind(const std::string& s);

// One frame's support set in embedding space. `prototype`, when cached,
// must equal the mean of the support embeddings.
struct FrameCategory {
  corpus::Frame frame;
  std::vector<Vec> support_embeddings;
  std::optional<Vec> prototype;
};

// Log-probabilities over an ordered frame list; logSumExp == 0 within 1e-9.
struct FrameDistribution {
  std::vector<corpus::Frame> frames;
  Vec log_probs;

  bool is_normalized(double tol = 1e-9) const;
};

// Unnormalized frame-indexed log scores (the joint).
struct FrameScores {
  std::vector<corpus::Frame> frames;
  Vec log_scores;
};

double distance(const Vec& a, const Vec& b, DistanceKind kind);

// p(f) proportional to the number of unique support nouns of f.
FrameDistribution prior(const corpus::FrameTable& table);

// Arithmetic mean of the support embeddings.
Vec prototype(const FrameCategory& cat);

// DPM: softmax over -distance(h_q, prototype_f) across frames.
// DEM: softmax over logSumExp of -distance(h_q, support) within each frame.
// With singleton supports the two coincide exactly.
FrameDistribution likelihood(ModelKind kind, const Vec& hq,
                             const std::vector<FrameCategory>& categories,
                             DistanceKind dist = DistanceKind::euclidean);

// log joint(f) = log likelihood(f) + log prior(f); not renormalized.
FrameScores joint(const FrameDistribution& lik, const FrameDistribution& pri);

// Renormalizes joint scores over frames.
FrameDistribution posterior_frames(const FrameScores& scores);

// Loss bookkeeping: J = -sum over (frame, query) of [loglik + logprior].
struct LossTerm {
  corpus::Frame frame;
  std::string noun;
  double log_likelihood = 0.0;
  double log_prior = 0.0;
};

struct LossResult {
  double loss = 0.0;
  std::vector<LossTerm> terms;
};

using EmbeddingFn = std::function<const Vec*(const std::string& noun)>;

// Reference evaluation of the loss over every (frame, query) pair of a
// table. `embed` resolves the multimodal representation of a noun at the
// table's decade; a miss is an error naming the noun.
LossResult nll_loss(ModelKind kind, const corpus::FrameTable& table, const EmbeddingFn& embed,
                    DistanceKind dist = DistanceKind::euclidean);

// Batched path used by training: frames reference columns of a shared
// embedding matrix H (one column per noun in play).
struct EmbeddedCategories {
  std::vector<corpus::Frame> frames;
  std::vector<std::vector<int>> support_cols;  // per frame, columns of H
  Vec log_prior;                               // aligned with frames
};

struct BatchLoss {
  double loss = 0.0;
  Mat grad_h;  // dJ/dH, same shape as H
  std::vector<LossTerm> terms;
};

// `examples` are (frame index, query column) pairs. The likelihood
// normalizer always ranges over every frame in `cats`, not just the ones
// with examples in the batch.
BatchLoss nll_loss_with_grad(ModelKind kind, const EmbeddedCategories& cats, const Mat& h,
                             const std::vector<std::pair<int, int>>& examples,
                             DistanceKind dist = DistanceKind::euclidean);

// Per-frame unnormalized log likelihood scores for one query embedding
// (the DPM -d(h,c_f) or DEM logSumExp term before frame normalization).
Vec frame_scores(ModelKind kind, const Vec& hq, const EmbeddedCategories& cats, const Mat& h,
                 DistanceKind dist = DistanceKind::euclidean);

}  // namespace sfem::chaining
