#pragma once

#include "sfem/chaining.hpp"
#include "sfem/common.hpp"
#include "sfem/corpus.hpp"
#include "sfem/training.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

// Ranked prediction, precision@m curves and their mean, rank-based
// (Mann-Whitney) AUC, cohort splits, baselines, ablation drops, modality
// attribution, and the 2-d PCA export.
namespace sfem::eval {

// Candidates sorted by descending score; exact ties break lexicographically
// on the candidate key, so every ranking is reproducible bit for bit.
struct RankedPrediction {
  std::string query_key;
  std::vector<std::string> candidates;
  Vec scores;                       // aligned with candidates, non-increasing
  std::set<std::string> positives;  // subset of candidates
};

RankedPrediction make_ranked(std::string query_key,
                             std::vector<std::pair<std::string, double>> scored,
                             std::set<std::string> positives);

struct PrecisionCurve {
  std::vector<double> curve;  // curve[m-1] = |top-m intersect positives| / m
  double auc = 0.0;           // mean of the curve over m = 1..|candidates|
};

// Errors when there are no positives; report assembly skips and counts
// such examples instead.
PrecisionCurve precision_curve(const RankedPrediction& pred);

// Rank-based AUC (probability a positive outranks a negative; ties count
// half). 0.5 for a random ranking at any positive rate; 1.0 when no
// negative exists.
double roc_auc(const RankedPrediction& pred);

// A trained model frozen at one decade: representations for every noun in
// the table plus the chaining state needed to score queries.
struct DecadeModel {
  int decade = 0;
  chaining::ModelKind kind = chaining::ModelKind::dem;
  chaining::DistanceKind distance = chaining::DistanceKind::euclidean;
  chaining::EmbeddedCategories cats;
  Mat h;  // out_dim x nouns
  std::vector<std::string> nouns;
  std::map<std::string, int> noun_col;
  std::vector<std::set<std::string>> support_sets;  // aligned with cats.frames

  bool is_support_of(std::size_t frame_index, const std::string& noun) const;
  double log_joint(std::size_t frame_index, const std::string& noun) const;
};

// Embeds every support and query noun of `table` through the assembler and
// network. Extra nouns (evaluation candidates) may be appended.
DecadeModel build_decade_model(const corpus::FrameTable& table,
                               const training::InputAssembler& inputs,
                               const nn::IntegrationNetwork& net, chaining::ModelKind kind,
                               chaining::DistanceKind dist = chaining::DistanceKind::euclidean,
                               const std::set<std::string>& extra_nouns = {});

// Candidates: every frame not already supporting the noun, scored by the
// log posterior.
RankedPrediction rank_frames(const DecadeModel& model, const std::string& noun,
                             const std::set<std::string>& positive_frames);

// Candidates scored by the frame's component of the frame-normalized
// likelihood.
RankedPrediction rank_nouns(const DecadeModel& model, const corpus::Frame& frame,
                            const std::vector<std::string>& candidates,
                            const std::set<std::string>& positives);

// Frequency baseline: candidates ranked by historical counts (absent = 0),
// ties lexicographic.
RankedPrediction rank_by_counts(std::string query_key, const std::vector<std::string>& candidates,
                                const std::map<std::string, long long>& counts,
                                std::set<std::string> positives);

// Random baseline: a seeded uniform permutation of the candidates.
RankedPrediction rank_random(std::string query_key, const std::vector<std::string>& candidates,
                             std::set<std::string> positives, std::uint64_t seed);

// Novel at t means zero cumulative reference-corpus frequency before t.
bool is_novel(const corpus::TokenFrequencyIndex& freq, const std::string& noun, int t);

struct AblationDrop {
  corpus::Frame frame;
  std::string noun;
  double delta = 0.0;  // log joint (full) - log joint (ablated)
  bool novel = false;
};

// Largest drops in log joint probability across ground-truth pairs after
// removing one modality. Both models must share frames and test pairs.
std::vector<AblationDrop> ablation_drops(const DecadeModel& full, const DecadeModel& ablated,
                                         const std::vector<std::pair<corpus::Frame, std::string>>& pairs,
                                         const corpus::TokenFrequencyIndex& freq, int t,
                                         std::size_t k);

// Per-example ground-truth scores under the three unimodal models, ordered
// conceptual, perceptual, linguistic (also the tie-break order).
struct ModalityShares {
  double conceptual = 0.0;
  double perceptual = 0.0;
  double linguistic = 0.0;
};

ModalityShares modality_breakdown(const std::vector<std::array<double, 3>>& scores);

struct PcaResult {
  Mat coords;              // points x 2
  Vec explained_variance;  // top-2 component variances
  Mat components;          // dim x 2, sign-stabilized
};

// Centers the points (rows) and projects onto the top two principal
// components; the largest-magnitude loading of each component is positive.
PcaResult pca2(const Mat& points);

// TSV `token x y role frame`, one row per (frame, role, noun) membership.
void export_pca_tsv(const std::string& path, const corpus::FrameTable& table,
                    const DecadeModel& model);

struct ReportRow {
  int decade = 0;
  std::string task;    // verb_syntax | noun_argument
  std::string cohort;  // novel | existing | combined
  std::string model_kind;
  std::string mask;
  long long n_examples = 0;
  double auc = 0.0;
};

void write_report(const std::string& path, const std::vector<ReportRow>& rows,
                  const std::vector<std::string>& header_comments);

}  // namespace sfem::eval
