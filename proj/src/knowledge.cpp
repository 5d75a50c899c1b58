#include "sfem/knowledge.hpp"

#include "sfem/rng.hpp"
#include "sfem/text.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sfem::knowledge {

std::string to_string(Modality m) {
  switch (m) {
    case Modality::perceptual: return "perceptual";
    case Modality::conceptual: return "conceptual";
    case Modality::linguistic: return "linguistic";
    case Modality::fused: return "fused";
  }
  return "?";
}

void EmbeddingStore::insert(const std::string& token, int decade, Vec v) {
  if (v.size() != dim_) {
    throw std::runtime_error("embedding dimension mismatch for token '" + token + "': got " +
                             std::to_string(v.size()) + ", store dim " + std::to_string(dim_));
  }
  if (!v.allFinite()) {
    throw std::runtime_error("non-finite embedding for token '" + token + "'");
  }
  vectors_[{token, decade}] = std::move(v);
}

const Vec* EmbeddingStore::lookup(const std::string& token, int decade) const {
  if (access_log_) access_log_->insert(token);
  auto it = vectors_.find({token, decade});
  if (it != vectors_.end()) return &it->second;
  it = vectors_.find({token, all_decades});
  if (it != vectors_.end()) return &it->second;
  return nullptr;
}

void EmbeddingStore::save(const std::string& path) const {
  std::ostringstream out;
  out << "dim=" << dim_ << "\n";
  for (const auto& [key, v] : vectors_) {
    out << key.first << '\t';
    if (key.second == all_decades) {
      out << "ALL";
    } else {
      out << key.second;
    }
    for (Eigen::Index i = 0; i < v.size(); ++i) out << '\t' << text::format_double(v[i]);
    out << "\n";
  }
  text::write_file(path, out.str());
}

EmbeddingStore load_embeddings(const std::string& path, Modality modality, int expected_dim) {
  const auto lines = text::read_lines(path);
  if (lines.empty() || lines[0].rfind("dim=", 0) != 0) {
    throw std::runtime_error(path + ": first line must be `dim=<d>`");
  }
  const int dim = static_cast<int>(text::parse_int(text::trim(lines[0]).substr(4), path + " dim"));
  if (dim != expected_dim) {
    throw std::runtime_error(path + ": dimension " + std::to_string(dim) + " does not match expected " +
                             std::to_string(expected_dim));
  }
  EmbeddingStore store(modality, dim);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string line = text::trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const auto fields = text::split_ws(line);
    const std::string where = path + ":" + std::to_string(i + 1);
    if (fields.size() != static_cast<std::size_t>(dim) + 2) {
      throw std::runtime_error(where + ": token '" + (fields.empty() ? "?" : fields[0]) +
                               "': expected " + std::to_string(dim) + " values, got " +
                               std::to_string(fields.size() < 2 ? 0 : fields.size() - 2));
    }
    const std::string token = fields[0];
    const int decade = fields[1] == "ALL"
                           ? all_decades
                           : static_cast<int>(text::parse_int(fields[1], where + " decade"));
    Vec v(dim);
    for (int j = 0; j < dim; ++j) {
      v[j] = text::parse_double(fields[j + 2], where + " token '" + token + "'");
    }
    if (!v.allFinite()) throw std::runtime_error(where + ": non-finite value for token '" + token + "'");
    store.insert(token, decade, std::move(v));
  }
  return store;
}

Vec aggregate_perceptual(const std::vector<Vec>& image_vectors) {
  if (image_vectors.empty()) {
    throw std::runtime_error("aggregate_perceptual: no image vectors");
  }
  const Eigen::Index dim = image_vectors[0].size();
  Vec mean = Vec::Zero(dim);
  for (const auto& v : image_vectors) {
    if (v.size() != dim) throw std::runtime_error("aggregate_perceptual: mixed dimensions");
    mean += v;
  }
  return mean / static_cast<double>(image_vectors.size());
}

ProjectionMatrix make_projection(std::uint64_t seed, int rows, int cols) {
  rng::Engine g(seed);
  ProjectionMatrix p;
  p.seed = seed;
  p.m.resize(rows, cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      p.m(r, c) = rng::uniform(g, -1.0, 1.0) * scale;
    }
  }
  return p;
}

Vec project_perceptual(const Vec& x, const ProjectionMatrix& p) {
  if (x.size() != p.m.cols()) {
    throw std::runtime_error("project_perceptual: vector length " + std::to_string(x.size()) +
                             " does not match projection columns " + std::to_string(p.m.cols()));
  }
  return p.m * x;
}

EmbeddingStore load_image_vectors(const std::string& path, const ProjectionMatrix& p,
                                  std::map<std::string, long long>* counts_out) {
  const auto lines = text::read_lines(path);
  std::map<std::string, std::vector<Vec>> per_token;
  const int img_dim = static_cast<int>(p.m.cols());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = text::trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const auto fields = text::split_ws(line);
    const std::string where = path + ":" + std::to_string(i + 1);
    if (fields.size() != static_cast<std::size_t>(img_dim) + 2) {
      throw std::runtime_error(where + ": expected `token imageIndex f1..f" +
                               std::to_string(img_dim) + "`");
    }
    Vec v(img_dim);
    for (int j = 0; j < img_dim; ++j) v[j] = text::parse_double(fields[j + 2], where);
    if (!v.allFinite()) throw std::runtime_error(where + ": non-finite image vector");
    per_token[fields[0]].push_back(std::move(v));
  }
  EmbeddingStore store(Modality::perceptual, static_cast<int>(p.m.rows()));
  for (const auto& [token, vecs] : per_token) {
    store.insert(token, all_decades, project_perceptual(aggregate_perceptual(vecs), p));
    if (counts_out) (*counts_out)[token] = static_cast<long long>(vecs.size());
  }
  return store;
}

std::map<std::string, long long> ConceptGraph::degree() const {
  std::map<std::string, long long> deg;
  for (const auto& e : edges) {
    deg[e.start] += 1;
    if (e.end != e.start) deg[e.end] += 1;
  }
  return deg;
}

ConceptGraph load_concept_graph(const std::string& path) {
  ConceptGraph g;
  const auto lines = text::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = text::trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const auto fields = text::split_ws(line);
    const std::string where = path + ":" + std::to_string(i + 1);
    if (fields.size() != 4) {
      throw std::runtime_error(where + ": expected `relationType start end weight`");
    }
    ConceptEdge e{fields[0], text::lower(fields[1]), text::lower(fields[2]),
                  text::parse_double(fields[3], where + " weight")};
    if (!(e.weight > 0.0)) throw std::runtime_error(where + ": edge weight must be positive");
    g.edges.push_back(std::move(e));
  }
  return g;
}

ConceptGraph truncate_graph(const ConceptGraph& g, const corpus::TokenFrequencyIndex& freq,
                            int t, long long kc) {
  if (kc < 0) throw std::runtime_error("truncate_graph: kc must be non-negative");
  ConceptGraph out;
  for (const auto& e : g.edges) {
    if (freq.cumulative_through(e.start, t) >= kc && freq.cumulative_through(e.end, t) >= kc) {
      out.edges.push_back(e);
    }
  }
  return out;
}

PpmiMatrix ppmi(const ConceptGraph& g) {
  if (g.edges.empty()) throw std::runtime_error("ppmi: empty concept graph");

  std::map<std::string, int> index;
  for (const auto& e : g.edges) {
    index.emplace(e.start, 0);
    index.emplace(e.end, 0);
  }
  PpmiMatrix out;
  out.tokens.reserve(index.size());
  for (auto& [token, id] : index) {
    id = static_cast<int>(out.tokens.size());
    out.tokens.push_back(token);
  }
  const int n = static_cast<int>(out.tokens.size());

  // Symmetrized co-occurrence weights.
  std::map<std::pair<int, int>, double> w;
  std::vector<double> row_sum(n, 0.0);
  double total = 0.0;
  for (const auto& e : g.edges) {
    const int a = index[e.start];
    const int b = index[e.end];
    w[{a, b}] += e.weight;
    row_sum[a] += e.weight;
    total += e.weight;
    if (a != b) {
      w[{b, a}] += e.weight;
      row_sum[b] += e.weight;
      total += e.weight;
    }
  }

  std::vector<Eigen::Triplet<double>> triplets;
  for (const auto& [key, weight] : w) {
    const auto [i, j] = key;
    const double pmi = std::log(weight * total / (row_sum[i] * row_sum[j]));
    if (pmi > 0.0) triplets.emplace_back(i, j, pmi);
  }
  out.matrix.resize(n, n);
  out.matrix.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

TruncatedSvd randomized_svd(const Eigen::SparseMatrix<double>& m, int rank,
                            int oversample, int power_iters, std::uint64_t seed) {
  const Eigen::Index rows = m.rows();
  const Eigen::Index cols = m.cols();
  if (rank < 1) throw std::runtime_error("randomized_svd: rank must be positive");
  if (rank > std::min(rows, cols)) {
    throw std::runtime_error("randomized_svd: rank " + std::to_string(rank) +
                             " exceeds matrix dimension " + std::to_string(std::min(rows, cols)));
  }
  const Eigen::Index sketch = std::min<Eigen::Index>(std::min(rows, cols), rank + oversample);

  rng::Engine g(seed);
  Mat omega(cols, sketch);
  for (Eigen::Index c = 0; c < sketch; ++c) {
    for (Eigen::Index r = 0; r < cols; ++r) omega(r, c) = rng::normal(g);
  }

  auto orth = [](const Mat& y) -> Mat {
    Eigen::HouseholderQR<Mat> qr(y);
    Mat q = qr.householderQ() * Mat::Identity(y.rows(), y.cols());
    return q;
  };

  Mat q = orth(m * omega);
  for (int it = 0; it < power_iters; ++it) {
    q = orth(m.transpose() * q);
    q = orth(m * q);
  }

  const Mat b = q.transpose() * m;  // sketch x cols
  Eigen::JacobiSVD<Mat> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);

  TruncatedSvd result;
  result.u = q * svd.matrixU().leftCols(rank);
  result.v = svd.matrixV().leftCols(rank);
  result.sigma = svd.singularValues().head(rank);
  if (!result.u.allFinite() || !result.v.allFinite() || !result.sigma.allFinite()) {
    throw std::runtime_error("randomized_svd: did not converge after " +
                             std::to_string(power_iters) + " power iterations");
  }
  // Deterministic sign: the largest-magnitude entry of each left column is positive.
  for (int c = 0; c < rank; ++c) {
    Eigen::Index imax = 0;
    result.u.col(c).cwiseAbs().maxCoeff(&imax);
    if (result.u(imax, c) < 0.0) {
      result.u.col(c) = -result.u.col(c);
      result.v.col(c) = -result.v.col(c);
    }
  }
  return result;
}

EmbeddingStore svd_embed(const PpmiMatrix& m, int rank, const SvdOptions& opts) {
  const auto svd = randomized_svd(m.matrix, rank, opts.oversample, opts.power_iters, opts.seed);
  const Vec sqrt_sigma = svd.sigma.cwiseMax(0.0).cwiseSqrt();
  EmbeddingStore store(Modality::conceptual, rank);
  for (std::size_t i = 0; i < m.tokens.size(); ++i) {
    const Eigen::Index row = static_cast<Eigen::Index>(i);
    Vec e = 0.5 * (svd.u.row(row) + svd.v.row(row)).transpose().cwiseProduct(sqrt_sigma);
    store.insert(m.tokens[i], opts.decade, std::move(e));
  }
  return store;
}

std::string ModalityMask::to_string() const {
  std::string out;
  auto append = [&out](const char* name) {
    if (!out.empty()) out += '+';
    out += name;
  };
  if (perceptual) append("perceptual");
  if (conceptual) append("conceptual");
  if (linguistic) append("linguistic");
  return out.empty() ? "none" : out;
}

ModalityMask ModalityMask::parse(const std::string& s) {
  ModalityMask mask = ModalityMask::none();
  for (const auto& part : text::split(text::lower(text::trim(s)), '+')) {
    if (part == "perceptual" || part == "p") {
      mask.perceptual = true;
    } else if (part == "conceptual" || part == "c") {
      mask.conceptual = true;
    } else if (part == "linguistic" || part == "l") {
      mask.linguistic = true;
    } else {
      throw std::runtime_error("unknown modality '" + part + "' in mask '" + s + "'");
    }
  }
  return mask;
}

Vec fuse(const Vec* xp, const Vec* xc, const Vec* xl, const ModalityMask& mask) {
  const Vec* parts[3] = {mask.perceptual ? xp : nullptr, mask.conceptual ? xc : nullptr,
                         mask.linguistic ? xl : nullptr};
  Eigen::Index dim = -1;
  for (const Vec* v : parts) {
    if (!v) continue;
    if (dim < 0) {
      dim = v->size();
    } else if (v->size() != dim) {
      throw std::runtime_error("fuse: modality dimensions disagree");
    }
  }
  if (dim < 0) throw std::runtime_error("fuse: all modalities missing or masked");
  Vec sum = Vec::Zero(dim);
  for (const Vec* v : parts) {
    if (v) sum += *v;
  }
  return sum / 3.0;  // zero-filled modalities still divide by 3
}

}  // namespace sfem::knowledge
