#pragma once

#include "sfem/common.hpp"
#include "sfem/corpus.hpp"

#include <Eigen/SparseCore>

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

// Unimodal embedding stores, perceptual aggregation/projection, diachronic
// concept-graph embeddings (PPMI + truncated SVD), and modality fusion.
namespace sfem::knowledge {

enum class Modality { perceptual, conceptual, linguistic, fused };

std::string to_string(Modality m);

// Decade value for time-invariant vectors.
inline constexpr int all_decades = std::numeric_limits<int>::min();

// Named dense vectors keyed by (token, decade). A lookup at a concrete
// decade falls back to the token's `all_decades` entry when present; a miss
// returns nullptr and is therefore distinguishable from a stored zero vector.
class EmbeddingStore {
 public:
  EmbeddingStore(Modality modality, int dim) : modality_(modality), dim_(dim) {
    if (dim < 1) throw std::runtime_error("EmbeddingStore: dim must be positive");
  }

  Modality modality() const { return modality_; }
  int dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

  void insert(const std::string& token, int decade, Vec v);
  const Vec* lookup(const std::string& token, int decade) const;

  // Records every token looked up (hit or miss) while attached; used by the
  // training leakage audit.
  void set_access_log(std::unordered_set<std::string>* log) const { access_log_ = log; }

  const std::map<std::pair<std::string, int>, Vec>& vectors() const { return vectors_; }

  void save(const std::string& path) const;

 private:
  Modality modality_;
  int dim_;
  std::map<std::pair<std::string, int>, Vec> vectors_;
  mutable std::unordered_set<std::string>* access_log_ = nullptr;
};

// File format: first line `dim=<d>`, then `token decade|ALL f1 .. fd`.
EmbeddingStore load_embeddings(const std::string& path, Modality modality, int expected_dim);

// Element-wise mean of per-image vectors; errors on an empty list.
Vec aggregate_perceptual(const std::vector<Vec>& image_vectors);

// Fixed linear map from image space to fusion space; never trained.
struct ProjectionMatrix {
  Mat m;
  std::uint64_t seed = 0;
};

// Entries are seeded uniform on [-1, 1] scaled by 1/sqrt(cols).
ProjectionMatrix make_projection(std::uint64_t seed, int rows = 300, int cols = 1000);

Vec project_perceptual(const Vec& x, const ProjectionMatrix& p);

// Per-image file `token imageIndex f1 .. f1000` -> aggregated, projected
// store (decade = all_decades). `counts_out`, when given, receives the
// number of images per token.
EmbeddingStore load_image_vectors(const std::string& path, const ProjectionMatrix& p,
                                  std::map<std::string, long long>* counts_out = nullptr);

struct ConceptEdge {
  std::string relation;
  std::string start;
  std::string end;
  double weight = 0.0;
};

struct ConceptGraph {
  std::vector<ConceptEdge> edges;

  // Number of edges touching each concept (self-loops count once).
  std::map<std::string, long long> degree() const;
};

// TSV `relationType start end weight`.
ConceptGraph load_concept_graph(const std::string& path);

// Keeps only edges whose endpoints both have cumulative reference-corpus
// frequency through t of at least kc.
ConceptGraph truncate_graph(const ConceptGraph& g, const corpus::TokenFrequencyIndex& freq,
                            int t, long long kc);

struct PpmiMatrix {
  Eigen::SparseMatrix<double> matrix;     // symmetric, non-negative
  std::vector<std::string> tokens;        // row/col i <-> tokens[i], sorted
};

// max(0, log p(i,j) / (p(i) p(j))) over the symmetrized edge-weight matrix,
// with unsmoothed marginals.
PpmiMatrix ppmi(const ConceptGraph& g);

struct TruncatedSvd {
  Mat u;      // m x rank
  Mat v;      // n x rank
  Vec sigma;  // rank, descending
};

// Randomized subspace iteration (seeded Gaussian sketch, fixed oversampling
// and power iterations, QR re-orthonormalization). Deterministic per seed.
TruncatedSvd randomized_svd(const Eigen::SparseMatrix<double>& m, int rank,
                            int oversample = 10, int power_iters = 7,
                            std::uint64_t seed = 0);

struct SvdOptions {
  int oversample = 10;
  int power_iters = 7;
  std::uint64_t seed = 0;
  int decade = all_decades;  // decade recorded on the output store
};

// Concept embedding i = 0.5 (U_i + V_i) * sqrt(sigma), the symmetric
// combination of the term and context factors, sign-stabilized per column.
EmbeddingStore svd_embed(const PpmiMatrix& m, int rank, const SvdOptions& opts = {});

struct ModalityMask {
  bool perceptual = true;
  bool conceptual = true;
  bool linguistic = true;

  bool operator==(const ModalityMask&) const = default;
  int count() const { return int(perceptual) + int(conceptual) + int(linguistic); }
  std::string to_string() const;            // canonical `perceptual+conceptual+linguistic`
  static ModalityMask parse(const std::string& s);
  static ModalityMask none() { return ModalityMask{false, false, false}; }
};

// x_n = (xp + xc + xl) / 3 where a missing or masked modality contributes a
// zero vector; the divisor is always 3. Errors when nothing contributes.
Vec fuse(const Vec* xp, const Vec* xc, const Vec* xl, const ModalityMask& mask);

}  // namespace sfem::knowledge
