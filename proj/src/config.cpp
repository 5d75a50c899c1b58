#include "sfem/config.hpp"

#include "sfem/common.hpp"
#include "sfem/rng.hpp"
#include "sfem/text.hpp"

#include <cstdlib>
#include <sstream>

namespace sfem::cli {

std::uint64_t RunConfig::net_seed() const {
  return seed_net.value_or(rng::derive_seed(master_seed, "net"));
}
std::uint64_t RunConfig::split_seed() const {
  return seed_split.value_or(rng::derive_seed(master_seed, "split"));
}
std::uint64_t RunConfig::sgd_seed() const {
  return seed_sgd.value_or(rng::derive_seed(master_seed, "sgd"));
}
std::uint64_t RunConfig::projection_seed() const {
  return seed_projection.value_or(rng::derive_seed(master_seed, "projection"));
}
std::uint64_t RunConfig::svd_seed() const {
  return seed_svd.value_or(rng::derive_seed(master_seed, "svd"));
}
std::uint64_t RunConfig::synth_seed() const {
  if (synth_seed_set) return synth.seed;
  return seed_synth.value_or(rng::derive_seed(master_seed, "synth"));
}
std::uint64_t RunConfig::baseline_seed() const {
  return seed_baseline.value_or(rng::derive_seed(master_seed, "baseline"));
}

namespace {

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw io_error("config key '" + key + "': expected boolean, got '" + value + "'");
}

long long parse_ll(const std::string& value, const std::string& key) {
  try {
    return text::parse_int(value, key);
  } catch (const std::runtime_error& e) {
    throw io_error(e.what());
  }
}

std::uint64_t parse_u64(const std::string& value, const std::string& key) {
  try {
    return text::parse_uint(value, key);
  } catch (const std::runtime_error& e) {
    throw io_error(e.what());
  }
}

double parse_real(const std::string& value, const std::string& key) {
  try {
    return text::parse_double(value, key);
  } catch (const std::runtime_error& e) {
    throw io_error(e.what());
  }
}

}  // namespace

void apply_override(RunConfig& c, const std::string& key, const std::string& value) {
  auto as_int = [&](auto& field) { field = static_cast<std::decay_t<decltype(field)>>(parse_ll(value, key)); };

  if (key == "paths.triples") c.triples = value;
  else if (key == "paths.frequency") c.frequency = value;
  else if (key == "paths.graph") c.graph = value;
  else if (key == "paths.perceptual") c.perceptual = value;
  else if (key == "paths.images") c.images = value;
  else if (key == "paths.conceptual") c.conceptual = value;
  else if (key == "paths.linguistic") c.linguistic = value;
  else if (key == "paths.image_counts") c.image_counts = value;
  else if (key == "out.dir") c.out_dir = value;
  else if (key == "filter.theta_p") as_int(c.filter.theta_p);
  else if (key == "filter.theta_c") as_int(c.filter.theta_c);
  else if (key == "filter.theta_n") as_int(c.filter.theta_n);
  else if (key == "filter.theta_v") as_int(c.filter.theta_v);
  else if (key == "filter.top_relations") as_int(c.filter.top_relations);
  else if (key == "table.theta_q") as_int(c.theta_q);
  else if (key == "table.theta_s") as_int(c.theta_s);
  else if (key == "table.delta") as_int(c.delta);
  else if (key == "graph.kc") as_int(c.kc);
  else if (key == "svd.rank") as_int(c.svd_rank);
  else if (key == "svd.oversample") as_int(c.svd_oversample);
  else if (key == "svd.power_iters") as_int(c.svd_power_iters);
  else if (key == "model.kind") {
    try {
      c.kind = chaining::parse_model_kind(value);
    } catch (const std::runtime_error& e) {
      throw io_error(e.what());
    }
  } else if (key == "model.mask") {
    try {
      c.mask = knowledge::ModalityMask::parse(value);
    } catch (const std::runtime_error& e) {
      throw io_error(e.what());
    }
    if (c.mask.count() == 0) throw io_error("model.mask: at least one modality required");
  } else if (key == "model.distance") {
    if (value == "euclidean") c.distance = chaining::DistanceKind::euclidean;
    else if (value == "squared_euclidean") c.distance = chaining::DistanceKind::squared_euclidean;
    else throw io_error("model.distance: expected euclidean or squared_euclidean");
  }
  else if (key == "sgd.learning_rate") c.learning_rate = parse_real(value, key);
  else if (key == "sgd.epochs") as_int(c.epochs);
  else if (key == "sgd.batch_frames") as_int(c.batch_frames);
  else if (key == "split.train_fraction") c.train_fraction = parse_real(value, key);
  else if (key == "split.val_fraction") c.validation_fraction = parse_real(value, key);
  else if (key == "net.warm_start") c.warm_start = parse_bool(value, key);
  else if (key == "eval.jobs") as_int(c.jobs);
  else if (key == "seed.master") {
    c.master_seed = parse_u64(value, key);
    c.master_seed_set = true;
  }
  else if (key == "seed.net") c.seed_net = parse_u64(value, key);
  else if (key == "seed.split") c.seed_split = parse_u64(value, key);
  else if (key == "seed.sgd") c.seed_sgd = parse_u64(value, key);
  else if (key == "seed.projection") c.seed_projection = parse_u64(value, key);
  else if (key == "seed.svd") c.seed_svd = parse_u64(value, key);
  else if (key == "seed.synth") c.seed_synth = parse_u64(value, key);
  else if (key == "seed.baseline") c.seed_baseline = parse_u64(value, key);
  else if (key == "synth.frames") as_int(c.synth.frames);
  else if (key == "synth.nouns_per_frame") as_int(c.synth.nouns_per_frame);
  else if (key == "synth.queries_per_frame") as_int(c.synth.queries_per_frame);
  else if (key == "synth.decades") as_int(c.synth.decades);
  else if (key == "synth.cluster_separation") c.synth.cluster_separation = parse_real(value, key);
  else if (key == "synth.bimodal_fraction") c.synth.bimodal_fraction = parse_real(value, key);
  else if (key == "synth.modality_split") c.synth.modality_split = parse_bool(value, key);
  else if (key == "synth.start_decade") as_int(c.synth.start_decade);
  else if (key == "synth.seed") {
    c.synth.seed = parse_u64(value, key);
    c.synth_seed_set = true;
  }
  else if (key == "concepts.decades") {
    c.concept_decades.clear();
    if (value != "auto") {
      for (const auto& part : text::split(value, ',')) {
        c.concept_decades.push_back(static_cast<int>(parse_ll(text::trim(part), key)));
      }
    }
  }
  else throw io_error("unknown config key '" + key + "'");
}

RunConfig load_config(const std::string& path) {
  RunConfig c;
  const auto lines = text::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = text::trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw io_error(path + ":" + std::to_string(i + 1) + ": expected `key = value`");
    }
    const std::string key = text::trim(line.substr(0, eq));
    const std::string value = text::trim(line.substr(eq + 1));
    try {
      apply_override(c, key, value);
    } catch (const io_error& e) {
      throw io_error(path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return c;
}

void apply_seed_env(RunConfig& c) {
  if (c.master_seed_set) return;
  if (const char* env = std::getenv("SFEM_SEED")) {
    c.master_seed = parse_u64(env, "SFEM_SEED");
    c.master_seed_set = true;
  }
}

std::map<std::string, std::string> RunConfig::manifest() const {
  std::map<std::string, std::string> m;
  m["paths.triples"] = triples;
  m["paths.frequency"] = frequency;
  m["paths.graph"] = graph;
  m["paths.perceptual"] = perceptual;
  m["paths.images"] = images;
  m["paths.conceptual"] = conceptual;
  m["paths.linguistic"] = linguistic;
  m["paths.image_counts"] = image_counts;
  m["out.dir"] = out_dir;
  m["filter.theta_p"] = std::to_string(filter.theta_p);
  m["filter.theta_c"] = std::to_string(filter.theta_c);
  m["filter.theta_n"] = std::to_string(filter.theta_n);
  m["filter.theta_v"] = std::to_string(filter.theta_v);
  m["filter.top_relations"] = std::to_string(filter.top_relations);
  m["table.theta_q"] = std::to_string(theta_q);
  m["table.theta_s"] = std::to_string(theta_s);
  m["table.delta"] = std::to_string(delta);
  m["graph.kc"] = std::to_string(kc);
  m["svd.rank"] = std::to_string(svd_rank);
  m["svd.oversample"] = std::to_string(svd_oversample);
  m["svd.power_iters"] = std::to_string(svd_power_iters);
  m["model.kind"] = chaining::to_string(kind);
  m["model.mask"] = mask.to_string();
  m["model.distance"] =
      distance == chaining::DistanceKind::euclidean ? "euclidean" : "squared_euclidean";
  m["sgd.learning_rate"] = text::format_double(learning_rate);
  m["sgd.epochs"] = std::to_string(epochs);
  m["sgd.batch_frames"] = std::to_string(batch_frames);
  m["split.train_fraction"] = text::format_double(train_fraction);
  m["split.val_fraction"] = text::format_double(validation_fraction);
  m["net.warm_start"] = warm_start ? "true" : "false";
  m["eval.jobs"] = std::to_string(jobs);
  m["seed.master"] = std::to_string(master_seed);
  m["seed.net"] = std::to_string(net_seed());
  m["seed.split"] = std::to_string(split_seed());
  m["seed.sgd"] = std::to_string(sgd_seed());
  m["seed.projection"] = std::to_string(projection_seed());
  m["seed.svd"] = std::to_string(svd_seed());
  m["seed.synth"] = std::to_string(synth_seed());
  m["seed.baseline"] = std::to_string(baseline_seed());
  return m;
}

}  // namespace sfem::cli
