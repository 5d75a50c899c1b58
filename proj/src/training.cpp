#include "sfem/training.hpp"

#include "sfem/rng.hpp"
#include "sfem/text.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sfem::training {

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::runtime_error("split: train_fraction must be in (0,1)");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw std::runtime_error("split: validation_fraction must be in (0,1)");
  }
}

SplitTables split_queries(const corpus::FrameTable& table, const SplitSpec& spec) {
  spec.validate();
  SplitTables out;

  std::set<std::string> noun_set;
  for (const auto& [frame, entry] : table.entries) {
    noun_set.insert(entry.queries.begin(), entry.queries.end());
  }
  std::vector<std::string> nouns(noun_set.begin(), noun_set.end());
  rng::Engine g(spec.seed);
  rng::shuffle(nouns, g);

  const std::size_t n = nouns.size();
  std::size_t n_train_full = n == 0 ? 0 : std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.train_fraction)));
  std::size_t n_val = 0;
  if (n_train_full >= 2) {
    n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(
                                         static_cast<double>(n_train_full) *
                                         spec.validation_fraction)));
  }
  // Validation comes off the tail of the training slice.
  std::set<std::string> train_nouns(nouns.begin(), nouns.begin() + (n_train_full - n_val));
  std::set<std::string> val_nouns(nouns.begin() + (n_train_full - n_val),
                                  nouns.begin() + n_train_full);
  std::set<std::string> test_nouns(nouns.begin() + n_train_full, nouns.end());
  if (n > 0 && (val_nouns.empty() || test_nouns.empty())) {
    out.warnings.push_back("split: validation or test set is empty (" +
                           std::to_string(n) + " query nouns)");
  }

  auto project = [&table](const std::set<std::string>& keep) {
    corpus::FrameTable t;
    t.decade = table.decade;
    t.delta = table.delta;
    t.theta_q = table.theta_q;
    t.theta_s = table.theta_s;
    for (const auto& [frame, entry] : table.entries) {
      corpus::FrameEntry e;
      e.supports = entry.supports;  // supports are shared by all splits
      for (const auto& q : entry.queries) {
        if (keep.count(q)) e.queries.push_back(q);
      }
      t.entries.emplace(frame, std::move(e));
    }
    return t;
  };
  out.train = project(train_nouns);
  out.validation = project(val_nouns);
  out.test = project(test_nouns);

  for (const auto& [frame, entry] : out.train.entries) {
    if (entry.queries.empty() && !table.entries.at(frame).queries.empty()) {
      out.warnings.push_back("split: frame " + frame.key() +
                             " has no training queries this decade");
    }
  }
  return out;
}

InputAssembler::InputAssembler(const knowledge::EmbeddingStore* perceptual,
                               const knowledge::EmbeddingStore* conceptual,
                               const knowledge::EmbeddingStore* linguistic,
                               knowledge::ModalityMask mask, int decade, int dim)
    : perceptual_(perceptual),
      conceptual_(conceptual),
      linguistic_(linguistic),
      mask_(mask),
      decade_(decade),
      dim_(dim) {
  if (mask.count() == 0) throw std::runtime_error("InputAssembler: empty modality mask");
}

Vec InputAssembler::fused(const std::string& noun) const {
  if (trace_) trace_->insert(noun);
  const Vec* xp = mask_.perceptual && perceptual_ ? perceptual_->lookup(noun, decade_) : nullptr;
  const Vec* xc = mask_.conceptual && conceptual_ ? conceptual_->lookup(noun, decade_) : nullptr;
  const Vec* xl = mask_.linguistic && linguistic_ ? linguistic_->lookup(noun, decade_) : nullptr;
  if (!xp && !xc && !xl) {
    throw std::runtime_error("no embedding in any unmasked modality for noun '" + noun +
                             "' at decade " + std::to_string(decade_));
  }
  const Vec zero = Vec::Zero(dim_);
  return knowledge::fuse(xp ? xp : &zero, xc ? xc : &zero, xl ? xl : &zero, mask_);
}

bool InputAssembler::has_any(const std::string& noun) const {
  const Vec* xp = mask_.perceptual && perceptual_ ? perceptual_->lookup(noun, decade_) : nullptr;
  const Vec* xc = mask_.conceptual && conceptual_ ? conceptual_->lookup(noun, decade_) : nullptr;
  const Vec* xl = mask_.linguistic && linguistic_ ? linguistic_->lookup(noun, decade_) : nullptr;
  return xp || xc || xl;
}

namespace {

struct DecadeData {
  std::vector<std::string> nouns;          // column order
  std::map<std::string, int> noun_col;
  Mat x;                                   // fused inputs, dim x nouns
  chaining::EmbeddedCategories cats;
  std::vector<std::vector<int>> train_query_cols;  // per frame
  std::vector<std::vector<int>> val_query_cols;    // per frame
};

DecadeData assemble(const corpus::FrameTable& train_table,
                    const corpus::FrameTable& validation_table, const InputAssembler& inputs) {
  DecadeData d;
  std::set<std::string> nouns;
  for (const auto& [frame, entry] : train_table.entries) {
    nouns.insert(entry.supports.begin(), entry.supports.end());
    nouns.insert(entry.queries.begin(), entry.queries.end());
  }
  for (const auto& [frame, entry] : validation_table.entries) {
    nouns.insert(entry.queries.begin(), entry.queries.end());
  }
  d.nouns.assign(nouns.begin(), nouns.end());
  d.x.resize(inputs.dim(), static_cast<Eigen::Index>(d.nouns.size()));
  for (std::size_t i = 0; i < d.nouns.size(); ++i) {
    d.noun_col[d.nouns[i]] = static_cast<int>(i);
    d.x.col(static_cast<Eigen::Index>(i)) = inputs.fused(d.nouns[i]);
  }

  const chaining::FrameDistribution pri = chaining::prior(train_table);
  d.cats.frames = pri.frames;
  d.cats.log_prior = pri.log_probs;
  for (const auto& frame : d.cats.frames) {
    const auto& train_entry = train_table.entries.at(frame);
    std::vector<int> scols;
    for (const auto& s : train_entry.supports) scols.push_back(d.noun_col.at(s));
    d.cats.support_cols.push_back(std::move(scols));
    std::vector<int> qcols;
    for (const auto& q : train_entry.queries) qcols.push_back(d.noun_col.at(q));
    d.train_query_cols.push_back(std::move(qcols));
    std::vector<int> vcols;
    auto vit = validation_table.entries.find(frame);
    if (vit != validation_table.entries.end()) {
      for (const auto& q : vit->second.queries) vcols.push_back(d.noun_col.at(q));
    }
    d.val_query_cols.push_back(std::move(vcols));
  }
  return d;
}

// Mean reciprocal rank of the true frame under the posterior; candidate
// frames exclude those already supporting the query noun.
double validation_mrr(const DecadeData& d, const Mat& h, chaining::ModelKind kind,
                      chaining::DistanceKind dist, const corpus::FrameTable& train_table) {
  double total = 0.0;
  long long n = 0;
  for (std::size_t f = 0; f < d.cats.frames.size(); ++f) {
    for (int qcol : d.val_query_cols[f]) {
      const Vec scores = chaining::frame_scores(kind, h.col(qcol), d.cats, h, dist);
      const Vec joint = scores + d.cats.log_prior;
      const std::string& noun = d.nouns[static_cast<std::size_t>(qcol)];
      const double own = joint[static_cast<Eigen::Index>(f)];
      long long rank = 1;
      for (std::size_t g = 0; g < d.cats.frames.size(); ++g) {
        if (g == f) continue;
        const auto& entry = train_table.entries.at(d.cats.frames[g]);
        if (std::binary_search(entry.supports.begin(), entry.supports.end(), noun)) continue;
        const double other = joint[static_cast<Eigen::Index>(g)];
        if (other > own || (other == own && d.cats.frames[g] < d.cats.frames[f])) ++rank;
      }
      total += 1.0 / static_cast<double>(rank);
      ++n;
    }
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

}  // namespace

TrainRun train_decade(const corpus::FrameTable& train_table,
                      const corpus::FrameTable& validation_table, const InputAssembler& inputs,
                      nn::IntegrationNetwork& net, chaining::ModelKind kind,
                      const nn::SgdConfig& sgd, chaining::DistanceKind dist) {
  sgd.validate();
  if (train_table.entries.empty()) {
    throw std::runtime_error("train_decade: no frames at decade " +
                             std::to_string(train_table.decade));
  }
  TrainRun run;
  run.decade = train_table.decade;
  run.kind = kind;
  run.mask = inputs.mask();

  const DecadeData d = assemble(train_table, validation_table, inputs);

  bool any_val = false;
  for (const auto& cols : d.val_query_cols) any_val |= !cols.empty();
  if (!any_val) {
    run.warnings.push_back("train_decade: no validation queries; selecting by training loss");
  }

  std::vector<int> frame_order(d.cats.frames.size());
  for (std::size_t i = 0; i < frame_order.size(); ++i) frame_order[i] = static_cast<int>(i);

  rng::Engine shuffler(sgd.seed);
  double best_score = -std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < sgd.epochs; ++epoch) {
    rng::shuffle(frame_order, shuffler);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < frame_order.size();
         start += static_cast<std::size_t>(sgd.batch_frames)) {
      const std::size_t stop =
          std::min(frame_order.size(), start + static_cast<std::size_t>(sgd.batch_frames));
      std::vector<std::pair<int, int>> examples;
      for (std::size_t i = start; i < stop; ++i) {
        const int f = frame_order[i];
        for (int qcol : d.train_query_cols[static_cast<std::size_t>(f)]) {
          examples.emplace_back(f, qcol);
        }
      }
      if (examples.empty()) continue;
      const nn::ForwardCache cache = nn::forward_batch(net, d.x);
      chaining::BatchLoss batch;
      try {
        batch = chaining::nll_loss_with_grad(kind, d.cats, cache.h, examples, dist);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("train_decade: epoch " + std::to_string(epoch) + ", batch at frame " +
                                 std::to_string(start) + ": " + e.what());
      }
      epoch_loss += batch.loss;
      const nn::GradientRecord grads = nn::backward(net, cache, batch.grad_h);
      nn::sgd_step(net, grads, sgd);
      ++run.sgd_steps;
    }
    if (!std::isfinite(epoch_loss)) {
      throw std::runtime_error("train_decade: non-finite training loss at epoch " +
                               std::to_string(epoch));
    }
    run.loss_trace.push_back(epoch_loss);

    double val = 0.0;
    if (any_val) {
      const Mat h = nn::forward_batch(net, d.x).h;
      val = validation_mrr(d, h, kind, dist, train_table);
    }
    run.validation_trace.push_back(val);

    // Selection: highest validation MRR; without validation, lowest loss.
    const double score = any_val ? val : -epoch_loss;
    if (score > best_score) {
      best_score = score;
      run.best_epoch = epoch;
      run.best_net = net;
    }
  }
  net = run.best_net;  // the kept configuration also seeds the next decade
  return run;
}

void save_checkpoint(const TrainRun& run, const std::string& path,
                     std::map<std::string, std::string> extra_metadata) {
  extra_metadata["decade"] = std::to_string(run.decade);
  extra_metadata["kind"] = chaining::to_string(run.kind);
  extra_metadata["mask"] = run.mask.to_string();
  extra_metadata["best_epoch"] = std::to_string(run.best_epoch);
  nn::save_network(path, run.best_net, extra_metadata);
}

int Checkpoint::decade() const {
  auto it = metadata.find("decade");
  if (it == metadata.end()) throw std::runtime_error("checkpoint missing decade");
  return static_cast<int>(text::parse_int(it->second, "checkpoint decade"));
}

chaining::ModelKind Checkpoint::kind() const {
  auto it = metadata.find("kind");
  if (it == metadata.end()) throw std::runtime_error("checkpoint missing kind");
  return chaining::parse_model_kind(it->second);
}

knowledge::ModalityMask Checkpoint::mask() const {
  auto it = metadata.find("mask");
  if (it == metadata.end()) throw std::runtime_error("checkpoint missing mask");
  return knowledge::ModalityMask::parse(it->second);
}

Checkpoint load_checkpoint(const std::string& path) {
  auto loaded = nn::load_network(path);
  Checkpoint cp;
  cp.net = std::move(loaded.net);
  cp.metadata = std::move(loaded.metadata);
  cp.decade();  // validate required metadata up front
  cp.kind();
  cp.mask();
  return cp;
}

void write_run_manifest(const std::string& path,
                        const std::map<std::string, std::string>& entries) {
  std::ostringstream out;
  for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
  text::write_file(path, out.str());
}

}  // namespace sfem::training
