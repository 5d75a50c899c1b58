#include "sfem/cli.hpp"

#include "sfem/chaining.hpp"
#include "sfem/config.hpp"
#include "sfem/corpus.hpp"
#include "sfem/eval.hpp"
#include "sfem/knowledge.hpp"
#include "sfem/network.hpp"
#include "sfem/rng.hpp"
#include "sfem/synth.hpp"
#include "sfem/text.hpp"
#include "sfem/training.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

namespace sfem::cli {

namespace fs = std::filesystem;

namespace {

void print_usage(std::ostream& out) {
  out << "usage: sfem <subcommand> --config <path> [options]\n"
      << "subcommands:\n"
      << "  gen-synthetic   write a seeded synthetic corpus into out.dir\n"
      << "  build-dataset   parse + filter triples, write per-decade frame tables\n"
      << "  build-concepts  concept-graph embeddings (PPMI + truncated SVD)\n"
      << "  train           per-decade training, checkpoints + manifests\n"
      << "  evaluate        ranking reports (report.tsv, report_roc.tsv)\n"
      << "  ablate          joint-probability drops after removing one modality\n"
      << "  export-pca      2-d projection of a decade's representations\n"
      << "options:\n"
      << "  --config <path>     run configuration file (key = value lines)\n"
      << "  --set <key=value>   override one config key (repeatable)\n"
      << "  --kind <dpm|dem>    shorthand for --set model.kind=...\n"
      << "  --mask <m1+m2>      shorthand for --set model.mask=...\n"
      << "  --jobs <n>          evaluation parallelism\n"
      << "  --decade <t>        decade for export-pca\n"
      << "  --modality <m>      modality to ablate\n"
      << "  --top <k>           ablation list size (default 10)\n"
      << "  --stats             print dataset statistics (build-dataset)\n"
      << "  --breakdown         per-modality attribution (evaluate)\n"
      << "  --dump-curves       write per-example precision curves (evaluate)\n"
      << "env: SFEM_SEED sets seed.master unless the config does\n";
}

struct CliArgs {
  std::string subcommand;
  RunConfig config;
  bool stats = false;
  bool breakdown = false;
  bool dump_curves = false;
  std::optional<int> decade;
  std::string modality;
  int top = 10;
};

CliArgs parse_args(const std::vector<std::string>& args) {
  if (args.empty()) throw io_error("missing subcommand");
  CliArgs out;
  out.subcommand = args[0];

  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    auto need_value = [&]() -> const std::string& {
      if (i + 1 >= args.size()) throw io_error("flag " + a + " needs a value");
      return args[++i];
    };
    if (a == "--config") {
      config_path = need_value();
    } else if (a == "--set") {
      const std::string& kv = need_value();
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw io_error("--set expects key=value, got '" + kv + "'");
      overrides.emplace_back(text::trim(kv.substr(0, eq)), text::trim(kv.substr(eq + 1)));
    } else if (a == "--kind") {
      overrides.emplace_back("model.kind", need_value());
    } else if (a == "--mask") {
      overrides.emplace_back("model.mask", need_value());
    } else if (a == "--jobs") {
      overrides.emplace_back("eval.jobs", need_value());
    } else if (a == "--decade") {
      out.decade = static_cast<int>(text::parse_int(need_value(), "--decade"));
    } else if (a == "--modality") {
      out.modality = need_value();
    } else if (a == "--top") {
      out.top = static_cast<int>(text::parse_int(need_value(), "--top"));
    } else if (a == "--stats") {
      out.stats = true;
    } else if (a == "--breakdown") {
      out.breakdown = true;
    } else if (a == "--dump-curves") {
      out.dump_curves = true;
    } else {
      throw io_error("unknown flag '" + a + "'");
    }
  }
  if (config_path.empty()) throw io_error("--config is required");
  out.config = load_config(config_path);
  for (const auto& [k, v] : overrides) apply_override(out.config, k, v);
  apply_seed_env(out.config);
  return out;
}

void require_file(const std::string& path, const std::string& key) {
  if (path.empty()) throw io_error("config key '" + key + "' is required for this subcommand");
  if (!fs::exists(path)) throw io_error(key + ": file not found: " + path);
}

std::string tables_dir(const RunConfig& c) { return c.out_dir + "/tables"; }
std::string checkpoints_dir(const RunConfig& c) { return c.out_dir + "/checkpoints"; }

std::string checkpoint_path(const RunConfig& c, chaining::ModelKind kind,
                            const knowledge::ModalityMask& mask, int decade) {
  return checkpoints_dir(c) + "/" + chaining::to_string(kind) + "_" + mask.to_string() + "_" +
         std::to_string(decade) + ".ckpt";
}

// Decades with a saved frame table, ascending.
std::vector<int> table_decades(const RunConfig& c) {
  std::vector<int> decades;
  const fs::path dir(tables_dir(c));
  if (!fs::exists(dir)) return decades;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 4 && name.substr(name.size() - 4) == ".tsv") {
      try {
        decades.push_back(static_cast<int>(text::parse_int(name.substr(0, name.size() - 4), name)));
      } catch (const std::runtime_error&) {
      }
    }
  }
  std::sort(decades.begin(), decades.end());
  return decades;
}

std::string table_path(const RunConfig& c, int decade) {
  return tables_dir(c) + "/" + std::to_string(decade) + ".tsv";
}

// Loads the unimodal stores a mask needs. Absent paths are allowed as long
// as the masked-in modalities have at least one source.
struct Stores {
  std::optional<knowledge::EmbeddingStore> perceptual;
  std::optional<knowledge::EmbeddingStore> conceptual;
  std::optional<knowledge::EmbeddingStore> linguistic;
};

Stores load_stores(const RunConfig& c, const knowledge::ModalityMask& mask) {
  Stores s;
  if (mask.perceptual) {
    if (!c.images.empty()) {
      require_file(c.images, "paths.images");
      const auto projection = knowledge::make_projection(c.projection_seed());
      s.perceptual = knowledge::load_image_vectors(c.images, projection);
    } else {
      require_file(c.perceptual, "paths.perceptual");
      s.perceptual = knowledge::load_embeddings(c.perceptual, knowledge::Modality::perceptual, 300);
    }
  }
  if (mask.conceptual) {
    require_file(c.conceptual, "paths.conceptual");
    s.conceptual = knowledge::load_embeddings(c.conceptual, knowledge::Modality::conceptual, 300);
  }
  if (mask.linguistic) {
    require_file(c.linguistic, "paths.linguistic");
    s.linguistic = knowledge::load_embeddings(c.linguistic, knowledge::Modality::linguistic, 300);
  }
  return s;
}

training::InputAssembler make_assembler(const Stores& s, const knowledge::ModalityMask& mask,
                                        int decade) {
  return training::InputAssembler(s.perceptual ? &*s.perceptual : nullptr,
                                  s.conceptual ? &*s.conceptual : nullptr,
                                  s.linguistic ? &*s.linguistic : nullptr, mask, decade);
}

std::uint64_t decade_seed(std::uint64_t base, int decade) {
  return rng::derive_seed(base, std::to_string(decade));
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = std::min<int>(jobs, static_cast<int>(n));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w]() {
      for (std::size_t i = static_cast<std::size_t>(w); i < n;
           i += static_cast<std::size_t>(workers)) {
        fn(i);
      }
    });
  }
  for (auto& t : threads) t.join();
}

int cmd_gen_synthetic(const CliArgs& args) {
  RunConfig c = args.config;
  c.synth.seed = c.synth_seed();
  const auto out = synth::generate(c.synth, c.out_dir);
  std::cout << "gen-synthetic: wrote " << out.manifest_path << " (" << out.planted.size()
            << " planted nouns, prediction decade " << out.prediction_decade << ")\n";
  return 0;
}

int cmd_build_dataset(const CliArgs& args) {
  const RunConfig& c = args.config;
  require_file(c.triples, "paths.triples");
  require_file(c.graph, "paths.graph");
  require_file(c.image_counts, "paths.image_counts");

  const auto triples = corpus::parse_triples_file(c.triples);
  const auto selection = corpus::select_relations(triples, c.filter.top_relations);
  if (selection.fewer_than_requested) {
    std::cerr << "warning: only " << selection.relations.size() << " distinct relations (asked for "
              << c.filter.top_relations << ")\n";
  }
  const auto image_counts = synth::load_token_counts(c.image_counts);
  const auto edge_counts = knowledge::load_concept_graph(c.graph).degree();
  // Corpus counts: per-token totals in noun position plus verb position.
  auto corpus_counts = corpus::noun_totals(triples);
  for (const auto& [verb, count] : corpus::verb_totals(triples)) corpus_counts[verb] += count;
  const auto vocab =
      corpus::filter_vocabulary(triples, c.filter, image_counts, edge_counts, corpus_counts);
  const auto filtered = corpus::apply_vocabulary(triples, vocab, selection.relations);

  std::set<int> decades;
  for (const auto& t : filtered) decades.insert(t.decade);
  fs::create_directories(tables_dir(c));
  std::vector<corpus::FrameTable> tables;
  for (int t : decades) {
    if (t == *decades.begin()) continue;  // no history before the first decade
    std::vector<std::string> warnings;
    auto table = corpus::build_frame_table(filtered, t, c.theta_q, c.theta_s, c.delta, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    if (table.entries.empty()) {
      std::cerr << "warning: decade " << t << " has no usable frames; skipped\n";
      continue;
    }
    corpus::save_frame_table(table, table_path(c, t));
    tables.push_back(std::move(table));
  }
  std::cout << "build-dataset: wrote " << tables.size() << " frame tables to " << tables_dir(c)
            << "\n";
  if (args.stats) {
    const auto stats = corpus::dataset_stats(tables);
    std::cout << "frames: " << stats.total_frames << "\ndecades: " << stats.decades << "\n";
    for (const auto& d : stats.per_decade) {
      std::cout << "  " << d.decade << ": frames=" << d.frames << " supports=" << d.support_pairs
                << " queries=" << d.query_pairs << "\n";
    }
  }
  return 0;
}

int cmd_build_concepts(const CliArgs& args) {
  const RunConfig& c = args.config;
  require_file(c.graph, "paths.graph");
  require_file(c.frequency, "paths.frequency");
  const auto graph = knowledge::load_concept_graph(c.graph);
  const auto freq = corpus::TokenFrequencyIndex::from_file(c.frequency);

  std::vector<int> decades = c.concept_decades;
  if (decades.empty()) decades = table_decades(c);
  if (decades.empty()) {
    throw io_error("build-concepts: no decades (run build-dataset first or set concepts.decades)");
  }

  knowledge::EmbeddingStore store(knowledge::Modality::conceptual, 300);
  for (int t : decades) {
    const auto truncated = knowledge::truncate_graph(graph, freq, t, c.kc);
    if (truncated.edges.empty()) {
      std::cerr << "warning: decade " << t << ": truncated concept graph is empty; skipped\n";
      continue;
    }
    const auto m = knowledge::ppmi(truncated);
    int rank = c.svd_rank;
    const int dim = static_cast<int>(m.tokens.size());
    if (rank > dim) {
      std::cerr << "warning: decade " << t << ": svd.rank " << rank << " clamped to graph size "
                << dim << "\n";
      rank = dim;
    }
    knowledge::SvdOptions opts;
    opts.oversample = c.svd_oversample;
    opts.power_iters = c.svd_power_iters;
    opts.seed = decade_seed(c.svd_seed(), t);
    opts.decade = t;
    const auto embedded = knowledge::svd_embed(m, rank, opts);
    for (const auto& [key, v] : embedded.vectors()) {
      Vec padded = Vec::Zero(300);
      padded.head(v.size()) = v;  // rank-d embeddings live in the leading coords
      store.insert(key.first, key.second, std::move(padded));
    }
    std::cout << "build-concepts: decade " << t << ": " << m.tokens.size() << " concepts, rank "
              << rank << "\n";
  }
  const std::string out_path = c.out_dir + "/concepts.tsv";
  fs::create_directories(c.out_dir);
  store.save(out_path);
  std::cout << "build-concepts: wrote " << out_path << "\n";
  return 0;
}

std::map<std::string, std::string> input_hashes(const RunConfig& c) {
  std::map<std::string, std::string> h;
  auto add = [&h](const std::string& name, const std::string& path) {
    if (!path.empty() && fs::exists(path)) {
      h["hash." + name] = "fnv1a:" + std::to_string(text::fnv1a_file(path));
    }
  };
  add("triples", c.triples);
  add("frequency", c.frequency);
  add("graph", c.graph);
  add("perceptual", c.perceptual);
  add("images", c.images);
  add("conceptual", c.conceptual);
  add("linguistic", c.linguistic);
  return h;
}

int cmd_train(const CliArgs& args) {
  const RunConfig& c = args.config;
  const auto decades = table_decades(c);
  if (decades.empty()) throw io_error("train: no frame tables under " + tables_dir(c));
  const Stores stores = load_stores(c, c.mask);
  fs::create_directories(checkpoints_dir(c));

  nn::IntegrationNetwork net = nn::init_network(c.net_seed());
  for (int t : decades) {
    if (!c.warm_start) net = nn::init_network(c.net_seed());
    const auto table = corpus::load_frame_table(table_path(c, t));

    training::SplitSpec spec;
    spec.train_fraction = c.train_fraction;
    spec.validation_fraction = c.validation_fraction;
    spec.seed = decade_seed(c.split_seed(), t);
    const auto split = training::split_queries(table, spec);
    for (const auto& w : split.warnings) std::cerr << "warning: " << w << "\n";

    const auto inputs = make_assembler(stores, c.mask, t);
    nn::SgdConfig sgd;
    sgd.learning_rate = c.learning_rate;
    sgd.epochs = c.epochs;
    sgd.batch_frames = c.batch_frames;
    sgd.seed = decade_seed(c.sgd_seed(), t);
    const auto run = training::train_decade(split.train, split.validation, inputs, net, c.kind,
                                            sgd, c.distance);
    for (const auto& w : run.warnings) std::cerr << "warning: " << w << "\n";

    std::map<std::string, std::string> meta;
    meta["distance"] =
        c.distance == chaining::DistanceKind::euclidean ? "euclidean" : "squared_euclidean";
    meta["warm_start"] = c.warm_start ? "1" : "0";
    meta["split_seed"] = std::to_string(spec.seed);
    meta["sgd_seed"] = std::to_string(sgd.seed);
    meta["train_fraction"] = text::format_double(c.train_fraction);
    meta["val_fraction"] = text::format_double(c.validation_fraction);
    const std::string ckpt = checkpoint_path(c, c.kind, c.mask, t);
    training::save_checkpoint(run, ckpt, meta);

    auto manifest = c.manifest();
    for (const auto& [k, v] : input_hashes(c)) manifest[k] = v;
    manifest["decade"] = std::to_string(t);
    manifest["split_seed.decade"] = std::to_string(spec.seed);
    manifest["sgd_seed.decade"] = std::to_string(sgd.seed);
    manifest["best_epoch"] = std::to_string(run.best_epoch);
    manifest["loss.first"] = text::format_double(run.loss_trace.front());
    manifest["loss.last"] = text::format_double(run.loss_trace.back());
    std::ostringstream trace;
    for (std::size_t i = 0; i < run.loss_trace.size(); ++i) {
      if (i) trace << ',';
      trace << text::format_double(run.loss_trace[i]);
    }
    manifest["loss.trace"] = trace.str();
    training::write_run_manifest(ckpt + ".manifest", manifest);

    std::cout << "train: decade " << t << " kind=" << chaining::to_string(c.kind) << " mask="
              << c.mask.to_string() << " best_epoch=" << run.best_epoch << " val_mrr="
              << (run.validation_trace.empty() ? 0.0 : run.validation_trace[static_cast<std::size_t>(run.best_epoch)])
              << " loss " << run.loss_trace.front() << " -> " << run.loss_trace.back() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct ExampleResult {
  bool scored = false;
  bool novel = false;
  double auc_mean_precision = 0.0;
  double auc_roc = 0.0;
  // Cohort-restricted noun-task results (positives filtered by novelty).
  bool has_novel = false, has_existing = false;
  double novel_mp = 0.0, novel_roc = 0.0;
  double existing_mp = 0.0, existing_roc = 0.0;
  std::vector<double> curve;
  std::string key;
};

struct TaskAccumulator {
  // cohort -> (sum mp, sum roc, n)
  std::map<std::string, std::array<double, 3>> acc;
  long long skipped = 0;

  void add(const std::string& cohort, double mp, double roc) {
    auto& a = acc[cohort];
    a[0] += mp;
    a[1] += roc;
    a[2] += 1.0;
  }
};

void accumulate_rows(std::vector<eval::ReportRow>& rows_mp, std::vector<eval::ReportRow>& rows_roc,
                     const TaskAccumulator& acc, int decade, const std::string& task,
                     const std::string& model_kind, const std::string& mask) {
  for (const char* cohort : {"novel", "existing", "combined"}) {
    eval::ReportRow row;
    row.decade = decade;
    row.task = task;
    row.cohort = cohort;
    row.model_kind = model_kind;
    row.mask = mask;
    auto it = acc.acc.find(cohort);
    if (it == acc.acc.end() || it->second[2] == 0.0) {
      row.n_examples = 0;
      row.auc = 0.0;
      rows_mp.push_back(row);
      rows_roc.push_back(row);
      continue;
    }
    row.n_examples = static_cast<long long>(it->second[2]);
    row.auc = it->second[0] / it->second[2];
    rows_mp.push_back(row);
    row.auc = it->second[1] / it->second[2];
    rows_roc.push_back(row);
  }
}

struct DecadeEvalContext {
  int decade = 0;
  corpus::FrameTable full_table;
  corpus::FrameTable test_table;
  corpus::FrameTable trainval_table;  // train + validation queries merged
  training::Checkpoint checkpoint;
  chaining::DistanceKind distance = chaining::DistanceKind::euclidean;
};

chaining::DistanceKind checkpoint_distance(const training::Checkpoint& cp) {
  auto it = cp.metadata.find("distance");
  if (it != cp.metadata.end() && it->second == "squared_euclidean") {
    return chaining::DistanceKind::squared_euclidean;
  }
  return chaining::DistanceKind::euclidean;
}

DecadeEvalContext load_eval_context(const RunConfig& c, chaining::ModelKind kind,
                                    const knowledge::ModalityMask& mask, int t) {
  DecadeEvalContext ctx;
  ctx.decade = t;
  ctx.full_table = corpus::load_frame_table(table_path(c, t));
  const std::string ckpt_path = checkpoint_path(c, kind, mask, t);
  if (!fs::exists(ckpt_path)) throw io_error("evaluate: missing checkpoint " + ckpt_path);
  ctx.checkpoint = training::load_checkpoint(ckpt_path);
  ctx.distance = checkpoint_distance(ctx.checkpoint);

  auto seed_it = ctx.checkpoint.metadata.find("split_seed");
  if (seed_it == ctx.checkpoint.metadata.end()) {
    throw io_error("evaluate: checkpoint lacks split_seed metadata: " + ckpt_path);
  }
  training::SplitSpec spec;
  auto meta_real = [&](const char* key, double fallback) {
    auto it = ctx.checkpoint.metadata.find(key);
    return it == ctx.checkpoint.metadata.end() ? fallback
                                               : text::parse_double(it->second, key);
  };
  spec.train_fraction = meta_real("train_fraction", c.train_fraction);
  spec.validation_fraction = meta_real("val_fraction", c.validation_fraction);
  spec.seed = text::parse_uint(seed_it->second, "split_seed");
  auto split = training::split_queries(ctx.full_table, spec);
  ctx.test_table = std::move(split.test);
  ctx.trainval_table = std::move(split.train);
  for (auto& [frame, entry] : ctx.trainval_table.entries) {
    const auto& val_entry = split.validation.entries.at(frame);
    entry.queries.insert(entry.queries.end(), val_entry.queries.begin(), val_entry.queries.end());
    std::sort(entry.queries.begin(), entry.queries.end());
  }
  return ctx;
}

// Ground-truth frames per test query noun.
std::map<std::string, std::set<std::string>> test_positives_by_noun(const corpus::FrameTable& t) {
  std::map<std::string, std::set<std::string>> out;
  for (const auto& [frame, entry] : t.entries) {
    for (const auto& q : entry.queries) out[q].insert(frame.key());
  }
  return out;
}

int cmd_evaluate(const CliArgs& args) {
  const RunConfig& c = args.config;
  require_file(c.triples, "paths.triples");
  require_file(c.frequency, "paths.frequency");
  const auto decades = table_decades(c);
  if (decades.empty()) throw io_error("evaluate: no frame tables under " + tables_dir(c));
  const auto freq = corpus::TokenFrequencyIndex::from_file(c.frequency);
  const auto triples = corpus::parse_triples_file(c.triples);
  const Stores stores = load_stores(c, c.mask);

  std::vector<eval::ReportRow> rows_mp, rows_roc;
  std::vector<std::string> comments = {
      "task verb_syntax: candidates = decade frames not already supporting the query noun",
      "task noun_argument: candidates = decade nouns minus the frame's supports and its",
      "  train/validation queries; positives = the frame's held-out test queries",
      "auc column: report.tsv = mean precision over m (mean-precision-AUC);",
      "  report_roc.tsv = rank-based (Mann-Whitney) AUC",
      "model.kind=" + chaining::to_string(c.kind) + " model.mask=" + c.mask.to_string()};
  std::vector<std::string> skip_notes;
  std::ostringstream curves;
  curves << "decade\ttask\tquery\tm\tprecision\n";

  for (int t : decades) {
    const auto ctx = load_eval_context(c, c.kind, c.mask, t);
    const auto inputs = make_assembler(stores, ctx.checkpoint.mask(), t);
    const auto model = eval::build_decade_model(ctx.full_table, inputs, ctx.checkpoint.net,
                                                ctx.checkpoint.kind(), ctx.distance);
    const auto frame_counts = corpus::frame_counts_before(triples, t);
    std::map<std::string, long long> frame_key_counts;
    for (const auto& [frame, count] : frame_counts) frame_key_counts[frame.key()] = count;
    const auto noun_counts = corpus::noun_counts_before(triples, t);

    // --- verb syntax task: one example per held-out test query noun.
    const auto by_noun = test_positives_by_noun(ctx.test_table);
    std::vector<std::string> test_nouns;
    for (const auto& [noun, pos] : by_noun) test_nouns.push_back(noun);

    struct VerbOutcome {
      std::array<double, 2> model{}, frequency{}, random{};  // mp, roc
      bool novel = false;
      std::vector<double> curve;
    };
    std::vector<VerbOutcome> verb_results(test_nouns.size());
    parallel_for(test_nouns.size(), c.jobs, [&](std::size_t i) {
      const std::string& noun = test_nouns[i];
      const auto& positives = by_noun.at(noun);
      VerbOutcome& r = verb_results[i];
      r.novel = eval::is_novel(freq, noun, t);
      const auto pred = eval::rank_frames(model, noun, positives);
      const auto pc = eval::precision_curve(pred);
      r.model = {pc.auc, eval::roc_auc(pred)};
      r.curve = pc.curve;
      const auto fpred = eval::rank_by_counts(noun, pred.candidates, frame_key_counts, positives);
      r.frequency = {eval::precision_curve(fpred).auc, eval::roc_auc(fpred)};
      const auto rpred = eval::rank_random(noun, pred.candidates, positives,
                                           rng::derive_seed(c.baseline_seed(),
                                                            std::to_string(t) + ":" + noun));
      r.random = {eval::precision_curve(rpred).auc, eval::roc_auc(rpred)};
    });

    TaskAccumulator verb_model, verb_freq, verb_random;
    for (std::size_t i = 0; i < test_nouns.size(); ++i) {
      const auto& r = verb_results[i];
      const std::string cohort = r.novel ? "novel" : "existing";
      verb_model.add(cohort, r.model[0], r.model[1]);
      verb_model.add("combined", r.model[0], r.model[1]);
      verb_freq.add(cohort, r.frequency[0], r.frequency[1]);
      verb_freq.add("combined", r.frequency[0], r.frequency[1]);
      verb_random.add(cohort, r.random[0], r.random[1]);
      verb_random.add("combined", r.random[0], r.random[1]);
      if (args.dump_curves) {
        for (std::size_t m = 0; m < r.curve.size(); ++m) {
          curves << t << "\tverb_syntax\t" << test_nouns[i] << '\t' << m + 1 << '\t'
                 << text::format_double(r.curve[m]) << "\n";
        }
      }
    }
    accumulate_rows(rows_mp, rows_roc, verb_model, t, "verb_syntax",
                    chaining::to_string(c.kind), c.mask.to_string());
    accumulate_rows(rows_mp, rows_roc, verb_freq, t, "verb_syntax", "freq", "-");
    accumulate_rows(rows_mp, rows_roc, verb_random, t, "verb_syntax", "random", "-");

    // --- noun argument task: one example per frame with held-out queries.
    std::vector<corpus::Frame> task_frames;
    for (const auto& [frame, entry] : ctx.test_table.entries) {
      if (!entry.queries.empty()) task_frames.push_back(frame);
    }
    struct NounOutcome {
      ExampleResult model, frequency, random;
    };
    std::vector<NounOutcome> noun_results(task_frames.size());
    parallel_for(task_frames.size(), c.jobs, [&](std::size_t i) {
      const auto& frame = task_frames[i];
      const auto& test_entry = ctx.test_table.entries.at(frame);
      const std::set<std::string> positives(test_entry.queries.begin(), test_entry.queries.end());

      const auto& trainval_entry = ctx.trainval_table.entries.at(frame);
      std::set<std::string> excluded(trainval_entry.queries.begin(), trainval_entry.queries.end());
      const auto& supports = ctx.full_table.entries.at(frame).supports;
      excluded.insert(supports.begin(), supports.end());
      std::vector<std::string> candidates;
      for (const auto& noun : model.nouns) {
        if (!excluded.count(noun)) candidates.push_back(noun);
      }

      auto fill = [&](ExampleResult& r, const eval::RankedPrediction& pred) {
        r.key = frame.key();
        r.scored = true;
        const auto pc = eval::precision_curve(pred);
        r.auc_mean_precision = pc.auc;
        r.auc_roc = eval::roc_auc(pred);
        r.curve = pc.curve;
        std::set<std::string> novel_pos, existing_pos;
        for (const auto& p : pred.positives) {
          (eval::is_novel(freq, p, t) ? novel_pos : existing_pos).insert(p);
        }
        eval::RankedPrediction sub = pred;
        if (!novel_pos.empty()) {
          sub.positives = novel_pos;
          r.has_novel = true;
          r.novel_mp = eval::precision_curve(sub).auc;
          r.novel_roc = eval::roc_auc(sub);
        }
        if (!existing_pos.empty()) {
          sub.positives = existing_pos;
          r.has_existing = true;
          r.existing_mp = eval::precision_curve(sub).auc;
          r.existing_roc = eval::roc_auc(sub);
        }
      };
      NounOutcome& out = noun_results[i];
      fill(out.model, eval::rank_nouns(model, frame, candidates, positives));
      fill(out.frequency, eval::rank_by_counts(frame.key(), candidates, noun_counts, positives));
      fill(out.random,
           eval::rank_random(frame.key(), candidates, positives,
                             rng::derive_seed(c.baseline_seed(),
                                              std::to_string(t) + ":" + frame.key())));
    });

    TaskAccumulator noun_model, noun_freq, noun_random;
    auto add_noun = [](TaskAccumulator& acc, const ExampleResult& r) {
      acc.add("combined", r.auc_mean_precision, r.auc_roc);
      if (r.has_novel) acc.add("novel", r.novel_mp, r.novel_roc);
      if (r.has_existing) acc.add("existing", r.existing_mp, r.existing_roc);
    };
    for (std::size_t i = 0; i < task_frames.size(); ++i) {
      add_noun(noun_model, noun_results[i].model);
      add_noun(noun_freq, noun_results[i].frequency);
      add_noun(noun_random, noun_results[i].random);
      if (args.dump_curves) {
        const auto& r = noun_results[i].model;
        for (std::size_t m = 0; m < r.curve.size(); ++m) {
          curves << t << "\tnoun_argument\t" << r.key << '\t' << m + 1 << '\t'
                 << text::format_double(r.curve[m]) << "\n";
        }
      }
    }
    accumulate_rows(rows_mp, rows_roc, noun_model, t, "noun_argument",
                    chaining::to_string(c.kind), c.mask.to_string());
    accumulate_rows(rows_mp, rows_roc, noun_freq, t, "noun_argument", "freq", "-");
    accumulate_rows(rows_mp, rows_roc, noun_random, t, "noun_argument", "random", "-");
  }

  for (const auto& n : skip_notes) comments.push_back(n);
  fs::create_directories(c.out_dir);
  eval::write_report(c.out_dir + "/report.tsv", rows_mp, comments);
  eval::write_report(c.out_dir + "/report_roc.tsv", rows_roc, comments);
  std::cout << "evaluate: wrote " << c.out_dir << "/report.tsv and report_roc.tsv ("
            << rows_mp.size() << " rows)\n";
  if (args.dump_curves) {
    text::write_file(c.out_dir + "/curves.tsv", curves.str());
    std::cout << "evaluate: wrote " << c.out_dir << "/curves.tsv\n";
  }

  if (args.breakdown) {
    // Attribute each test example to the unimodal model scoring the ground
    // truth highest; order conceptual, perceptual, linguistic.
    const knowledge::ModalityMask unimodal[3] = {{false, true, false},
                                                 {true, false, false},
                                                 {false, false, true}};
    std::ostringstream breakdown;
    breakdown << "decade\ttask\tconceptual\tperceptual\tlinguistic\n";
    for (int t : decades) {
      std::array<std::optional<eval::DecadeModel>, 3> models;
      std::optional<corpus::FrameTable> test_table;
      for (int m = 0; m < 3; ++m) {
        const std::string path = checkpoint_path(c, c.kind, unimodal[m], t);
        if (!fs::exists(path)) {
          throw io_error("evaluate --breakdown: missing unimodal checkpoint " + path);
        }
        auto ctx = load_eval_context(c, c.kind, unimodal[m], t);
        const Stores s = load_stores(c, unimodal[m]);
        const auto in = make_assembler(s, unimodal[m], t);
        models[m] = eval::build_decade_model(ctx.full_table, in, ctx.checkpoint.net,
                                             ctx.checkpoint.kind(), ctx.distance);
        if (!test_table) test_table = ctx.test_table;
      }
      // Ground-truth score = mean log joint of the true (frame, noun) pairs.
      std::vector<std::array<double, 3>> verb_scores, noun_scores;
      const auto by_noun = test_positives_by_noun(*test_table);
      for (const auto& [noun, pos_keys] : by_noun) {
        std::array<double, 3> s{};
        for (int m = 0; m < 3; ++m) {
          double total = 0.0;
          for (std::size_t f = 0; f < models[m]->cats.frames.size(); ++f) {
            if (pos_keys.count(models[m]->cats.frames[f].key())) {
              total += models[m]->log_joint(f, noun);
            }
          }
          s[m] = total / static_cast<double>(pos_keys.size());
        }
        verb_scores.push_back(s);
      }
      for (const auto& [frame, entry] : test_table->entries) {
        if (entry.queries.empty()) continue;
        std::array<double, 3> s{};
        for (int m = 0; m < 3; ++m) {
          const auto fit = std::find(models[m]->cats.frames.begin(), models[m]->cats.frames.end(),
                                     frame);
          const auto f = static_cast<std::size_t>(fit - models[m]->cats.frames.begin());
          double total = 0.0;
          for (const auto& q : entry.queries) total += models[m]->log_joint(f, q);
          s[m] = total / static_cast<double>(entry.queries.size());
        }
        noun_scores.push_back(s);
      }
      if (!verb_scores.empty()) {
        const auto shares = eval::modality_breakdown(verb_scores);
        breakdown << t << "\tverb_syntax\t" << shares.conceptual << '\t' << shares.perceptual
                  << '\t' << shares.linguistic << "\n";
      }
      if (!noun_scores.empty()) {
        const auto shares = eval::modality_breakdown(noun_scores);
        breakdown << t << "\tnoun_argument\t" << shares.conceptual << '\t' << shares.perceptual
                  << '\t' << shares.linguistic << "\n";
      }
    }
    text::write_file(c.out_dir + "/breakdown.tsv", breakdown.str());
    std::cout << "evaluate: wrote " << c.out_dir << "/breakdown.tsv\n";
  }
  return 0;
}

int cmd_ablate(const CliArgs& args) {
  const RunConfig& c = args.config;
  if (args.modality.empty()) throw io_error("ablate: --modality is required");
  require_file(c.frequency, "paths.frequency");
  const auto ablate_mask = knowledge::ModalityMask::parse(args.modality);
  if (ablate_mask.count() != 1) throw io_error("ablate: --modality must name one modality");
  knowledge::ModalityMask ablated = c.mask;
  if (ablate_mask.perceptual) {
    if (!c.mask.perceptual) throw io_error("ablate: model mask lacks perceptual");
    ablated.perceptual = false;
  }
  if (ablate_mask.conceptual) {
    if (!c.mask.conceptual) throw io_error("ablate: model mask lacks conceptual");
    ablated.conceptual = false;
  }
  if (ablate_mask.linguistic) {
    if (!c.mask.linguistic) throw io_error("ablate: model mask lacks linguistic");
    ablated.linguistic = false;
  }
  if (ablated.count() == 0) throw io_error("ablate: ablated model would have no modalities");

  const auto freq = corpus::TokenFrequencyIndex::from_file(c.frequency);
  const auto decades = table_decades(c);
  std::ostringstream out;
  out << "decade\tverb\trelation\tnoun\tnovel\tdelta\n";
  for (int t : decades) {
    auto full_ctx = load_eval_context(c, c.kind, c.mask, t);
    auto abl_ctx = load_eval_context(c, c.kind, ablated, t);
    if (full_ctx.checkpoint.metadata.at("split_seed") !=
        abl_ctx.checkpoint.metadata.at("split_seed")) {
      throw io_error("ablate: full and ablated checkpoints were trained on different splits");
    }
    const Stores full_stores = load_stores(c, c.mask);
    const Stores abl_stores = load_stores(c, ablated);
    const auto full_model =
        eval::build_decade_model(full_ctx.full_table, make_assembler(full_stores, c.mask, t),
                                 full_ctx.checkpoint.net, full_ctx.checkpoint.kind(),
                                 full_ctx.distance);
    const auto abl_model =
        eval::build_decade_model(abl_ctx.full_table, make_assembler(abl_stores, ablated, t),
                                 abl_ctx.checkpoint.net, abl_ctx.checkpoint.kind(),
                                 abl_ctx.distance);
    std::vector<std::pair<corpus::Frame, std::string>> pairs;
    for (const auto& [frame, entry] : full_ctx.test_table.entries) {
      for (const auto& q : entry.queries) pairs.emplace_back(frame, q);
    }
    const auto drops = eval::ablation_drops(full_model, abl_model, pairs, freq, t,
                                            static_cast<std::size_t>(args.top));
    for (const auto& d : drops) {
      out << t << '\t' << d.frame.verb << '\t' << d.frame.relation << '\t' << d.noun << '\t'
          << (d.novel ? 1 : 0) << '\t' << text::format_double(d.delta) << "\n";
    }
  }
  const std::string path = c.out_dir + "/ablation_" + ablate_mask.to_string() + ".tsv";
  text::write_file(path, out.str());
  std::cout << "ablate: wrote " << path << "\n";
  return 0;
}

int cmd_export_pca(const CliArgs& args) {
  const RunConfig& c = args.config;
  const auto decades = table_decades(c);
  if (decades.empty()) throw io_error("export-pca: no frame tables under " + tables_dir(c));
  const int t = args.decade.value_or(decades.back());
  const auto ctx = load_eval_context(c, c.kind, c.mask, t);
  const Stores stores = load_stores(c, c.mask);
  const auto model = eval::build_decade_model(ctx.full_table,
                                              make_assembler(stores, c.mask, t),
                                              ctx.checkpoint.net, ctx.checkpoint.kind(),
                                              ctx.distance);
  const std::string path = c.out_dir + "/pca_" + std::to_string(t) + ".tsv";
  eval::export_pca_tsv(path, ctx.full_table, model);
  std::cout << "export-pca: wrote " << path << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  try {
    if (args.empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
      print_usage(std::cout);
      return args.empty() ? 2 : 0;
    }
    const CliArgs parsed = parse_args(args);
    if (parsed.subcommand == "gen-synthetic") return cmd_gen_synthetic(parsed);
    if (parsed.subcommand == "build-dataset") return cmd_build_dataset(parsed);
    if (parsed.subcommand == "build-concepts") return cmd_build_concepts(parsed);
    if (parsed.subcommand == "train") return cmd_train(parsed);
    if (parsed.subcommand == "evaluate") return cmd_evaluate(parsed);
    if (parsed.subcommand == "ablate") return cmd_ablate(parsed);
    if (parsed.subcommand == "export-pca") return cmd_export_pca(parsed);
    throw io_error("unknown subcommand '" + parsed.subcommand + "'");
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace sfem::cli
