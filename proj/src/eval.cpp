#include "sfem/eval.hpp"

#include "sfem/rng.hpp"
#include "sfem/text.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace sfem::eval {

RankedPrediction make_ranked(std::string query_key,
                             std::vector<std::pair<std::string, double>> scored,
                             std::set<std::string> positives) {
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  RankedPrediction pred;
  pred.query_key = std::move(query_key);
  pred.scores.resize(static_cast<Eigen::Index>(scored.size()));
  for (std::size_t i = 0; i < scored.size(); ++i) {
    pred.candidates.push_back(std::move(scored[i].first));
    pred.scores[static_cast<Eigen::Index>(i)] = scored[i].second;
  }
  for (const auto& p : positives) {
    if (std::find(pred.candidates.begin(), pred.candidates.end(), p) == pred.candidates.end()) {
      throw std::runtime_error("make_ranked: positive '" + p + "' is not a candidate");
    }
  }
  pred.positives = std::move(positives);
  return pred;
}

PrecisionCurve precision_curve(const RankedPrediction& pred) {
  if (pred.candidates.empty()) throw std::runtime_error("precision_curve: no candidates");
  if (pred.positives.empty()) {
    throw std::runtime_error("precision_curve: no positives for query '" + pred.query_key + "'");
  }
  PrecisionCurve out;
  out.curve.reserve(pred.candidates.size());
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t m = 1; m <= pred.candidates.size(); ++m) {
    if (pred.positives.count(pred.candidates[m - 1])) ++hits;
    const double p = static_cast<double>(hits) / static_cast<double>(m);
    out.curve.push_back(p);
    sum += p;
  }
  out.auc = sum / static_cast<double>(pred.candidates.size());
  return out;
}

double roc_auc(const RankedPrediction& pred) {
  if (pred.positives.empty()) {
    throw std::runtime_error("roc_auc: no positives for query '" + pred.query_key + "'");
  }
  const std::size_t n = pred.candidates.size();
  const std::size_t pos = pred.positives.size();
  const std::size_t neg = n - pos;
  if (neg == 0) return 1.0;
  // Probability a positive outranks a negative, counting score ties half.
  double wins = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!pred.positives.count(pred.candidates[i])) continue;
    const double si = pred.scores[static_cast<Eigen::Index>(i)];
    for (std::size_t j = 0; j < n; ++j) {
      if (pred.positives.count(pred.candidates[j])) continue;
      const double sj = pred.scores[static_cast<Eigen::Index>(j)];
      if (si > sj) {
        wins += 1.0;
      } else if (si == sj) {
        wins += 0.5;
      }
    }
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

bool DecadeModel::is_support_of(std::size_t frame_index, const std::string& noun) const {
  return support_sets[frame_index].count(noun) > 0;
}

double DecadeModel::log_joint(std::size_t frame_index, const std::string& noun) const {
  auto it = noun_col.find(noun);
  if (it == noun_col.end()) {
    throw std::runtime_error("log_joint: missing embedding for noun '" + noun + "'");
  }
  const Vec scores = chaining::frame_scores(kind, h.col(it->second), cats, h, distance);
  const double lse = log_sum_exp(scores);
  return (scores[static_cast<Eigen::Index>(frame_index)] - lse) +
         cats.log_prior[static_cast<Eigen::Index>(frame_index)];
}

DecadeModel build_decade_model(const corpus::FrameTable& table,
                               const training::InputAssembler& inputs,
                               const nn::IntegrationNetwork& net, chaining::ModelKind kind,
                               chaining::DistanceKind dist,
                               const std::set<std::string>& extra_nouns) {
  DecadeModel m;
  m.decade = table.decade;
  m.kind = kind;
  m.distance = dist;

  std::set<std::string> nouns(extra_nouns);
  for (const auto& [frame, entry] : table.entries) {
    nouns.insert(entry.supports.begin(), entry.supports.end());
    nouns.insert(entry.queries.begin(), entry.queries.end());
  }
  m.nouns.assign(nouns.begin(), nouns.end());
  Mat x(inputs.dim(), static_cast<Eigen::Index>(m.nouns.size()));
  for (std::size_t i = 0; i < m.nouns.size(); ++i) {
    m.noun_col[m.nouns[i]] = static_cast<int>(i);
    x.col(static_cast<Eigen::Index>(i)) = inputs.fused(m.nouns[i]);
  }
  m.h = nn::forward_batch(net, x).h;

  const chaining::FrameDistribution pri = chaining::prior(table);
  m.cats.frames = pri.frames;
  m.cats.log_prior = pri.log_probs;
  for (const auto& frame : m.cats.frames) {
    const auto& entry = table.entries.at(frame);
    std::vector<int> cols;
    for (const auto& s : entry.supports) cols.push_back(m.noun_col.at(s));
    m.cats.support_cols.push_back(std::move(cols));
    m.support_sets.emplace_back(entry.supports.begin(), entry.supports.end());
  }
  return m;
}

RankedPrediction rank_frames(const DecadeModel& model, const std::string& noun,
                             const std::set<std::string>& positive_frames) {
  auto it = model.noun_col.find(noun);
  if (it == model.noun_col.end()) {
    throw std::runtime_error("rank_frames: missing embedding for noun '" + noun + "'");
  }
  const Vec scores = chaining::frame_scores(model.kind, model.h.col(it->second), model.cats,
                                            model.h, model.distance);
  const Vec joint = scores + model.cats.log_prior;
  const double lse = log_sum_exp(joint);

  std::vector<std::pair<std::string, double>> scored;
  for (std::size_t f = 0; f < model.cats.frames.size(); ++f) {
    if (model.is_support_of(f, noun)) continue;  // already conventional, not a candidate
    scored.emplace_back(model.cats.frames[f].key(), joint[static_cast<Eigen::Index>(f)] - lse);
  }
  return make_ranked(noun, std::move(scored), positive_frames);
}

RankedPrediction rank_nouns(const DecadeModel& model, const corpus::Frame& frame,
                            const std::vector<std::string>& candidates,
                            const std::set<std::string>& positives) {
  const auto fit = std::find(model.cats.frames.begin(), model.cats.frames.end(), frame);
  if (fit == model.cats.frames.end()) {
    throw std::runtime_error("rank_nouns: frame " + frame.key() + " is not in the decade table");
  }
  const auto f = static_cast<std::size_t>(fit - model.cats.frames.begin());
  std::vector<std::pair<std::string, double>> scored;
  for (const auto& noun : candidates) {
    auto it = model.noun_col.find(noun);
    if (it == model.noun_col.end()) {
      throw std::runtime_error("rank_nouns: missing embedding for candidate '" + noun + "'");
    }
    const Vec scores = chaining::frame_scores(model.kind, model.h.col(it->second), model.cats,
                                              model.h, model.distance);
    const double lse = log_sum_exp(scores);
    scored.emplace_back(noun, scores[static_cast<Eigen::Index>(f)] - lse);
  }
  return make_ranked(frame.key(), std::move(scored), std::move(positives));
}

RankedPrediction rank_by_counts(std::string query_key, const std::vector<std::string>& candidates,
                                const std::map<std::string, long long>& counts,
                                std::set<std::string> positives) {
  std::vector<std::pair<std::string, double>> scored;
  for (const auto& c : candidates) {
    auto it = counts.find(c);
    scored.emplace_back(c, it == counts.end() ? 0.0 : static_cast<double>(it->second));
  }
  return make_ranked(std::move(query_key), std::move(scored), std::move(positives));
}

RankedPrediction rank_random(std::string query_key, const std::vector<std::string>& candidates,
                             std::set<std::string> positives, std::uint64_t seed) {
  std::vector<std::string> order = candidates;
  std::sort(order.begin(), order.end());  // seed-independent base order
  rng::Engine g(seed);
  rng::shuffle(order, g);
  std::vector<std::pair<std::string, double>> scored;
  for (std::size_t i = 0; i < order.size(); ++i) {
    scored.emplace_back(order[i], static_cast<double>(order.size() - i));
  }
  return make_ranked(std::move(query_key), std::move(scored), std::move(positives));
}

bool is_novel(const corpus::TokenFrequencyIndex& freq, const std::string& noun, int t) {
  return freq.cumulative_before(noun, t) == 0;
}

std::vector<AblationDrop> ablation_drops(const DecadeModel& full, const DecadeModel& ablated,
                                         const std::vector<std::pair<corpus::Frame, std::string>>& pairs,
                                         const corpus::TokenFrequencyIndex& freq, int t,
                                         std::size_t k) {
  if (full.cats.frames != ablated.cats.frames) {
    throw std::runtime_error("ablation_drops: models cover different frame sets");
  }
  std::vector<AblationDrop> drops;
  for (const auto& [frame, noun] : pairs) {
    const auto fit = std::find(full.cats.frames.begin(), full.cats.frames.end(), frame);
    if (fit == full.cats.frames.end()) {
      throw std::runtime_error("ablation_drops: frame " + frame.key() + " not in model");
    }
    const auto f = static_cast<std::size_t>(fit - full.cats.frames.begin());
    AblationDrop d;
    d.frame = frame;
    d.noun = noun;
    d.delta = full.log_joint(f, noun) - ablated.log_joint(f, noun);
    d.novel = is_novel(freq, noun, t);
    drops.push_back(std::move(d));
  }
  std::sort(drops.begin(), drops.end(), [](const AblationDrop& a, const AblationDrop& b) {
    if (a.delta != b.delta) return a.delta > b.delta;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.noun < b.noun;
  });
  if (drops.size() > k) drops.resize(k);
  return drops;
}

ModalityShares modality_breakdown(const std::vector<std::array<double, 3>>& scores) {
  if (scores.empty()) throw std::runtime_error("modality_breakdown: no examples");
  long long counts[3] = {0, 0, 0};
  for (const auto& s : scores) {
    int best = 0;  // ties keep the earlier slot: conceptual, perceptual, linguistic
    for (int i = 1; i < 3; ++i) {
      if (s[static_cast<std::size_t>(i)] > s[static_cast<std::size_t>(best)]) best = i;
    }
    ++counts[best];
  }
  const double n = static_cast<double>(scores.size());
  return ModalityShares{100.0 * static_cast<double>(counts[0]) / n,
                        100.0 * static_cast<double>(counts[1]) / n,
                        100.0 * static_cast<double>(counts[2]) / n};
}

PcaResult pca2(const Mat& points) {
  if (points.rows() < 1 || points.cols() < 1) throw std::runtime_error("pca2: empty input");
  const Vec mean = points.colwise().mean();
  Mat centered = points.rowwise() - mean.transpose();
  Eigen::JacobiSVD<Mat> svd(centered, Eigen::ComputeThinV);
  const int k = static_cast<int>(std::min<Eigen::Index>(2, svd.matrixV().cols()));

  PcaResult out;
  out.components = Mat::Zero(points.cols(), 2);
  out.explained_variance = Vec::Zero(2);
  const double denom = points.rows() > 1 ? static_cast<double>(points.rows() - 1) : 1.0;
  for (int c = 0; c < k; ++c) {
    Vec comp = svd.matrixV().col(c);
    Eigen::Index imax = 0;
    comp.cwiseAbs().maxCoeff(&imax);
    if (comp[imax] < 0.0) comp = -comp;
    out.components.col(c) = comp;
    const double sigma = svd.singularValues()[c];
    out.explained_variance[c] = sigma * sigma / denom;
  }
  out.coords = centered * out.components;
  return out;
}

void export_pca_tsv(const std::string& path, const corpus::FrameTable& table,
                    const DecadeModel& model) {
  Mat points(static_cast<Eigen::Index>(model.nouns.size()), model.h.rows());
  for (std::size_t i = 0; i < model.nouns.size(); ++i) {
    points.row(static_cast<Eigen::Index>(i)) = model.h.col(static_cast<Eigen::Index>(i)).transpose();
  }
  const PcaResult pca = pca2(points);

  std::ostringstream out;
  out << "token\tx\ty\trole\tframe\n";
  for (const auto& [frame, entry] : table.entries) {
    auto emit = [&](const std::string& noun, const char* role) {
      const auto it = model.noun_col.find(noun);
      if (it == model.noun_col.end()) return;
      const Eigen::Index r = it->second;
      out << noun << '\t' << text::format_double(pca.coords(r, 0)) << '\t'
          << text::format_double(pca.coords(r, 1)) << '\t' << role << '\t' << frame.key() << "\n";
    };
    for (const auto& s : entry.supports) emit(s, "support");
    for (const auto& q : entry.queries) emit(q, "query");
  }
  text::write_file(path, out.str());
}

void write_report(const std::string& path, const std::vector<ReportRow>& rows,
                  const std::vector<std::string>& header_comments) {
  std::ostringstream out;
  for (const auto& c : header_comments) out << "# " << c << "\n";
  out << "decade\ttask\tcohort\tmodelKind\tmodalityMask\tnExamples\tauc\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f", r.auc);
    out << r.decade << '\t' << r.task << '\t' << r.cohort << '\t' << r.model_kind << '\t'
        << r.mask << '\t' << r.n_examples << '\t' << buf << "\n";
  }
  text::write_file(path, out.str());
}

}  // namespace sfem::eval
