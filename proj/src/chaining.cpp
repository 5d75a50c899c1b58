#include "sfem/chaining.hpp"

#include <algorithm>
#include <cmath>

namespace sfem::chaining {

std::string to_string(ModelKind k) {
  return k == ModelKind::dpm ? "dpm" : "dem";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "dpm") return ModelKind::dpm;
  if (s == "dem") return ModelKind::dem;
  throw std::runtime_error("unknown model kind '" + s + "' (expected dpm or dem)");
}

bool FrameDistribution::is_normalized(double tol) const {
  return frames.size() == static_cast<std::size_t>(log_probs.size()) &&
         std::abs(log_sum_exp(log_probs)) < tol;
}

double distance(const Vec& a, const Vec& b, DistanceKind kind) {
  if (a.size() != b.size()) throw std::runtime_error("distance: dimension mismatch");
  const double sq = (a - b).squaredNorm();
  return kind == DistanceKind::euclidean ? std::sqrt(sq) : sq;
}

FrameDistribution prior(const corpus::FrameTable& table) {
  if (table.entries.empty()) throw std::runtime_error("prior: table has no frames");
  FrameDistribution dist;
  long long total = 0;
  for (const auto& [frame, entry] : table.entries) {
    dist.frames.push_back(frame);
    total += static_cast<long long>(entry.supports.size());
  }
  if (total == 0) throw std::runtime_error("prior: all support sets are empty");
  dist.log_probs.resize(static_cast<Eigen::Index>(dist.frames.size()));
  Eigen::Index i = 0;
  for (const auto& [frame, entry] : table.entries) {
    if (entry.supports.empty()) {
      throw std::runtime_error("prior: frame " + frame.key() + " has no supports");
    }
    dist.log_probs[i++] = std::log(static_cast<double>(entry.supports.size()) /
                                   static_cast<double>(total));
  }
  return dist;
}

Vec prototype(const FrameCategory& cat) {
  if (cat.support_embeddings.empty()) {
    throw std::runtime_error("prototype: frame " + cat.frame.key() + " has no support embeddings");
  }
  Vec mean = Vec::Zero(cat.support_embeddings[0].size());
  for (const auto& v : cat.support_embeddings) {
    if (v.size() != mean.size()) throw std::runtime_error("prototype: mixed dimensions");
    mean += v;
  }
  return mean / static_cast<double>(cat.support_embeddings.size());
}

FrameDistribution likelihood(ModelKind kind, const Vec& hq,
                             const std::vector<FrameCategory>& categories, DistanceKind dist) {
  if (categories.empty()) throw std::runtime_error("likelihood: no categories");
  if (!hq.allFinite()) throw std::runtime_error("likelihood: non-finite query embedding");
  FrameDistribution out;
  out.frames.reserve(categories.size());
  out.log_probs.resize(static_cast<Eigen::Index>(categories.size()));
  for (std::size_t i = 0; i < categories.size(); ++i) {
    const auto& cat = categories[i];
    if (cat.support_embeddings.empty()) {
      throw std::runtime_error("likelihood: frame " + cat.frame.key() + " has an empty support set");
    }
    out.frames.push_back(cat.frame);
    double score;
    if (kind == ModelKind::dpm) {
      const Vec c = cat.prototype ? *cat.prototype : prototype(cat);
      score = -distance(hq, c, dist);
    } else {
      Vec neg(static_cast<Eigen::Index>(cat.support_embeddings.size()));
      for (std::size_t s = 0; s < cat.support_embeddings.size(); ++s) {
        neg[static_cast<Eigen::Index>(s)] = -distance(hq, cat.support_embeddings[s], dist);
      }
      score = log_sum_exp(neg);
    }
    out.log_probs[static_cast<Eigen::Index>(i)] = score;
  }
  out.log_probs.array() -= log_sum_exp(out.log_probs);
  return out;
}

FrameScores joint(const FrameDistribution& lik, const FrameDistribution& pri) {
  if (lik.frames != pri.frames) {
    throw std::runtime_error("joint: likelihood and prior cover different frame sets");
  }
  FrameScores out;
  out.frames = lik.frames;
  out.log_scores = lik.log_probs + pri.log_probs;
  return out;
}

FrameDistribution posterior_frames(const FrameScores& scores) {
  if (!scores.log_scores.allFinite()) {
    throw std::runtime_error("posterior_frames: non-finite joint scores");
  }
  FrameDistribution out;
  out.frames = scores.frames;
  out.log_probs = scores.log_scores;
  out.log_probs.array() -= log_sum_exp(out.log_probs);
  return out;
}

LossResult nll_loss(ModelKind kind, const corpus::FrameTable& table, const EmbeddingFn& embed,
                    DistanceKind dist) {
  const FrameDistribution pri = prior(table);
  std::vector<FrameCategory> categories;
  categories.reserve(table.entries.size());
  for (const auto& [frame, entry] : table.entries) {
    FrameCategory cat;
    cat.frame = frame;
    for (const auto& noun : entry.supports) {
      const Vec* h = embed(noun);
      if (!h) throw std::runtime_error("nll_loss: missing embedding for support noun '" + noun + "'");
      cat.support_embeddings.push_back(*h);
    }
    categories.push_back(std::move(cat));
  }

  LossResult result;
  std::size_t fi = 0;
  for (const auto& [frame, entry] : table.entries) {
    for (const auto& noun : entry.queries) {
      const Vec* hq = embed(noun);
      if (!hq) throw std::runtime_error("nll_loss: missing embedding for query noun '" + noun + "'");
      const FrameDistribution lik = likelihood(kind, *hq, categories, dist);
      LossTerm term;
      term.frame = frame;
      term.noun = noun;
      term.log_likelihood = lik.log_probs[static_cast<Eigen::Index>(fi)];
      term.log_prior = pri.log_probs[static_cast<Eigen::Index>(fi)];
      result.loss -= term.log_likelihood + term.log_prior;
      result.terms.push_back(std::move(term));
    }
    ++fi;
  }
  if (!std::isfinite(result.loss)) throw std::runtime_error("nll_loss: non-finite loss");
  return result;
}

namespace {

// Distance-gradient direction d d(a,b)/da; zero at coincident points.
inline Vec distance_grad(const Vec& a, const Vec& b, double d, DistanceKind kind) {
  if (kind == DistanceKind::squared_euclidean) return 2.0 * (a - b);
  if (d <= 0.0) return Vec::Zero(a.size());
  return (a - b) / d;
}

}  // namespace

Vec frame_scores(ModelKind kind, const Vec& hq, const EmbeddedCategories& cats, const Mat& h,
                 DistanceKind dist) {
  const auto n_frames = static_cast<Eigen::Index>(cats.frames.size());
  if (n_frames == 0) throw std::runtime_error("frame_scores: no categories");
  Vec scores(n_frames);
  for (Eigen::Index f = 0; f < n_frames; ++f) {
    const auto& cols = cats.support_cols[static_cast<std::size_t>(f)];
    if (cols.empty()) {
      throw std::runtime_error("frame_scores: frame " +
                               cats.frames[static_cast<std::size_t>(f)].key() +
                               " has an empty support set");
    }
    if (kind == ModelKind::dpm) {
      Vec c = Vec::Zero(h.rows());
      for (int col : cols) c += h.col(col);
      c /= static_cast<double>(cols.size());
      scores[f] = -distance(hq, c, dist);
    } else {
      Vec neg(static_cast<Eigen::Index>(cols.size()));
      for (std::size_t s = 0; s < cols.size(); ++s) {
        neg[static_cast<Eigen::Index>(s)] = -distance(hq, h.col(cols[s]), dist);
      }
      scores[f] = log_sum_exp(neg);
    }
  }
  return scores;
}

BatchLoss nll_loss_with_grad(ModelKind kind, const EmbeddedCategories& cats, const Mat& h,
                             const std::vector<std::pair<int, int>>& examples,
                             DistanceKind dist) {
  const auto n_frames = static_cast<Eigen::Index>(cats.frames.size());
  if (n_frames == 0) throw std::runtime_error("nll_loss_with_grad: no categories");
  if (cats.log_prior.size() != n_frames) {
    throw std::runtime_error("nll_loss_with_grad: prior not aligned with frames");
  }

  BatchLoss out;
  out.grad_h = Mat::Zero(h.rows(), h.cols());

  // Per-frame prototypes are shared across the batch's queries.
  Mat prototypes;
  if (kind == ModelKind::dpm) {
    prototypes.resize(h.rows(), n_frames);
    for (Eigen::Index f = 0; f < n_frames; ++f) {
      const auto& cols = cats.support_cols[static_cast<std::size_t>(f)];
      if (cols.empty()) {
        throw std::runtime_error("nll_loss_with_grad: empty support set");
      }
      Vec c = Vec::Zero(h.rows());
      for (int col : cols) c += h.col(col);
      prototypes.col(f) = c / static_cast<double>(cols.size());
    }
  }

  for (const auto& [true_frame, qcol] : examples) {
    if (true_frame < 0 || true_frame >= n_frames) {
      throw std::runtime_error("nll_loss_with_grad: bad frame index");
    }
    const Vec hq = h.col(qcol);

    if (kind == ModelKind::dpm) {
      Vec score(n_frames), dvals(n_frames);
      for (Eigen::Index f = 0; f < n_frames; ++f) {
        dvals[f] = distance(hq, prototypes.col(f), dist);
        score[f] = -dvals[f];
      }
      const double lse = log_sum_exp(score);
      const double loglik = score[true_frame] - lse;
      out.loss -= loglik + cats.log_prior[true_frame];
      out.terms.push_back({cats.frames[static_cast<std::size_t>(true_frame)], "",
                           loglik, cats.log_prior[true_frame]});
      // dLoss/dscore_f = p_f - [f == true]; score_f = -d(hq, c_f).
      for (Eigen::Index f = 0; f < n_frames; ++f) {
        const double coeff = std::exp(score[f] - lse) - (f == true_frame ? 1.0 : 0.0);
        if (coeff == 0.0) continue;
        const Vec u = distance_grad(hq, prototypes.col(f), dvals[f], dist);
        out.grad_h.col(qcol) += coeff * (-u);
        const auto& cols = cats.support_cols[static_cast<std::size_t>(f)];
        const Vec per_support = (coeff / static_cast<double>(cols.size())) * u;
        for (int col : cols) out.grad_h.col(col) += per_support;
      }
    } else {
      // DEM: score_f = logSumExp_s(-d(hq, h_s)).
      Vec score(n_frames);
      std::vector<Vec> neg_d(static_cast<std::size_t>(n_frames));
      for (Eigen::Index f = 0; f < n_frames; ++f) {
        const auto& cols = cats.support_cols[static_cast<std::size_t>(f)];
        if (cols.empty()) throw std::runtime_error("nll_loss_with_grad: empty support set");
        Vec neg(static_cast<Eigen::Index>(cols.size()));
        for (std::size_t s = 0; s < cols.size(); ++s) {
          neg[static_cast<Eigen::Index>(s)] = -distance(hq, h.col(cols[s]), dist);
        }
        neg_d[static_cast<std::size_t>(f)] = neg;
        score[f] = log_sum_exp(neg);
      }
      const double lse = log_sum_exp(score);
      const double loglik = score[true_frame] - lse;
      out.loss -= loglik + cats.log_prior[true_frame];
      out.terms.push_back({cats.frames[static_cast<std::size_t>(true_frame)], "",
                           loglik, cats.log_prior[true_frame]});
      for (Eigen::Index f = 0; f < n_frames; ++f) {
        const double coeff = std::exp(score[f] - lse) - (f == true_frame ? 1.0 : 0.0);
        if (coeff == 0.0) continue;
        const auto& cols = cats.support_cols[static_cast<std::size_t>(f)];
        const Vec& neg = neg_d[static_cast<std::size_t>(f)];
        for (std::size_t s = 0; s < cols.size(); ++s) {
          // Within-frame exemplar weight of support s.
          const double ws = std::exp(neg[static_cast<Eigen::Index>(s)] - score[f]);
          const double d = -neg[static_cast<Eigen::Index>(s)];
          const Vec u = distance_grad(hq, h.col(cols[s]), d, dist);
          out.grad_h.col(qcol) += coeff * ws * (-u);
          out.grad_h.col(cols[s]) += coeff * ws * u;
        }
      }
    }
  }
  if (!std::isfinite(out.loss) || !out.grad_h.allFinite()) {
    throw std::runtime_error("nll_loss_with_grad: non-finite loss or gradient");
  }
  return out;
}

}  // namespace sfem::chaining
