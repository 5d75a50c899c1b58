#include "doctest.h"

#include "sfem/chaining.hpp"
#include "sfem/rng.hpp"

#include <cmath>
#include <map>

using namespace sfem;
using namespace sfem::chaining;
using sfem::corpus::Frame;
using sfem::corpus::FrameTable;

namespace {

FrameCategory cat(const std::string& verb, const std::string& rel,
                  std::initializer_list<Vec> supports) {
  FrameCategory c;
  c.frame = Frame{verb, rel};
  c.support_embeddings.assign(supports);
  return c;
}

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

// Brute-force evaluation in linear space with extended precision; written
// against the formulas directly, sharing nothing with the implementation.
std::vector<long double> oracle_likelihood(ModelKind kind, const Vec& hq,
                                           const std::vector<FrameCategory>& cats) {
  auto dist = [](const Vec& a, const Vec& b) {
    long double s = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const long double d = static_cast<long double>(a[i]) - static_cast<long double>(b[i]);
      s += d * d;
    }
    return sqrtl(s);
  };
  std::vector<long double> raw;
  for (const auto& c : cats) {
    if (kind == ModelKind::dpm) {
      Vec proto = Vec::Zero(hq.size());
      for (const auto& s : c.support_embeddings) proto += s;
      proto /= static_cast<double>(c.support_embeddings.size());
      raw.push_back(expl(-dist(hq, proto)));
    } else {
      long double sum = 0;
      for (const auto& s : c.support_embeddings) sum += expl(-dist(hq, s));
      raw.push_back(sum);
    }
  }
  long double total = 0;
  for (const auto r : raw) total += r;
  for (auto& r : raw) r /= total;
  return raw;
}

std::vector<FrameCategory> random_categories(rng::Engine& g, int max_frames, int max_supports,
                                             int dim) {
  const int n_frames = 1 + static_cast<int>(rng::below(g, static_cast<std::uint64_t>(max_frames)));
  std::vector<FrameCategory> cats;
  for (int f = 0; f < n_frames; ++f) {
    FrameCategory c;
    c.frame = Frame{"v" + std::to_string(f), "dobj"};
    const int n_sup = 1 + static_cast<int>(rng::below(g, static_cast<std::uint64_t>(max_supports)));
    for (int s = 0; s < n_sup; ++s) {
      Vec v(dim);
      for (int i = 0; i < dim; ++i) v[i] = rng::uniform(g, -3.0, 3.0);
      c.support_embeddings.push_back(v);
    }
    cats.push_back(std::move(c));
  }
  return cats;
}

}  // namespace

TEST_SUITE("chaining") {

TEST_CASE("prior is proportional to unique support counts") {
  FrameTable table;
  table.decade = 1900;
  table.entries[{"f1", "dobj"}] = {{"a", "b", "c"}, {"q"}};
  table.entries[{"f2", "dobj"}] = {{"d"}, {"q"}};
  const auto p = prior(table);
  REQUIRE(p.frames.size() == 2);
  CHECK(std::exp(p.log_probs[0]) == doctest::Approx(0.75));
  CHECK(std::exp(p.log_probs[1]) == doctest::Approx(0.25));
  CHECK(p.is_normalized());

  FrameTable equal;
  equal.entries[{"a", "r"}] = {{"x", "y"}, {}};
  equal.entries[{"b", "r"}] = {{"u", "v"}, {}};
  equal.entries[{"c", "r"}] = {{"s", "t"}, {}};
  const auto pe = prior(equal);
  for (int i = 0; i < 3; ++i) CHECK(std::exp(pe.log_probs[i]) == doctest::Approx(1.0 / 3));

  FrameTable sized;
  sized.entries[{"a", "r"}].supports.assign(100, "");
  for (int i = 0; i < 100; ++i) sized.entries[{"a", "r"}].supports[static_cast<std::size_t>(i)] = "a" + std::to_string(i);
  for (int i = 0; i < 100; ++i) sized.entries[{"b", "r"}].supports.push_back("b" + std::to_string(i));
  for (int i = 0; i < 200; ++i) sized.entries[{"c", "r"}].supports.push_back("c" + std::to_string(i));
  const auto ps = prior(sized);
  CHECK(std::exp(ps.log_probs[0]) == doctest::Approx(0.25));
  CHECK(std::exp(ps.log_probs[1]) == doctest::Approx(0.25));
  CHECK(std::exp(ps.log_probs[2]) == doctest::Approx(0.5));

  FrameTable empty_supports;
  empty_supports.entries[{"a", "r"}] = {{}, {"q"}};
  CHECK_THROWS_AS(prior(empty_supports), std::runtime_error);
}

TEST_CASE("prototype is the support mean") {
  const auto c = cat("f", "dobj", {v2(0, 0), v2(2, 0), v2(1, 3)});
  const Vec p = prototype(c);
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == doctest::Approx(1.0));

  const auto single = cat("f", "dobj", {v2(4, -1)});
  CHECK((prototype(single) - v2(4, -1)).norm() == doctest::Approx(0.0));

  // translation equivariance
  auto shifted = c;
  for (auto& s : shifted.support_embeddings) s = s + v2(5, -2);
  CHECK((prototype(shifted) - (p + v2(5, -2))).norm() == doctest::Approx(0.0).epsilon(1e-12));

  FrameCategory empty;
  empty.frame = Frame{"f", "dobj"};
  CHECK_THROWS_AS(prototype(empty), std::runtime_error);
}

TEST_CASE("dpm is uniform when the query is equidistant from both prototypes") {
  const std::vector<FrameCategory> cats2 = {cat("a", "r", {v2(1, 1), v2(1, -1)}),
                                            cat("b", "r", {v2(-1, 1), v2(-1, -1)})};
  const auto lik = likelihood(ModelKind::dpm, v2(0, 0), cats2);
  CHECK(std::exp(lik.log_probs[0]) == doctest::Approx(0.5));
  CHECK(std::exp(lik.log_probs[1]) == doctest::Approx(0.5));
}

TEST_CASE("dem weighs every support exemplar") {
  // supports at distances 0 and 3: p(A) = e^0 / (e^0 + e^-3)
  const std::vector<FrameCategory> cats2 = {cat("a", "r", {v2(0, 0)}),
                                            cat("b", "r", {v2(3, 0)})};
  const auto lik = likelihood(ModelKind::dem, v2(0, 0), cats2);
  CHECK(std::exp(lik.log_probs[0]) == doctest::Approx(1.0 / (1.0 + std::exp(-3.0))).epsilon(1e-12));
}

TEST_CASE("dem equals dpm exactly for singleton supports") {
  rng::Engine g(404);
  for (int trial = 0; trial < 100; ++trial) {
    const int n_frames = 2 + static_cast<int>(rng::below(g, 6));
    std::vector<FrameCategory> cats1;
    for (int f = 0; f < n_frames; ++f) {
      Vec v(5);
      for (int i = 0; i < 5; ++i) v[i] = rng::uniform(g, -4.0, 4.0);
      cats1.push_back(cat("v" + std::to_string(f), "r", {v}));
    }
    Vec hq(5);
    for (int i = 0; i < 5; ++i) hq[i] = rng::uniform(g, -4.0, 4.0);
    const auto dem = likelihood(ModelKind::dem, hq, cats1);
    const auto dpm = likelihood(ModelKind::dpm, hq, cats1);
    for (int f = 0; f < n_frames; ++f) {
      CHECK(std::abs(dem.log_probs[f] - dpm.log_probs[f]) < 1e-12);
    }
  }
}

TEST_CASE("aprototypical neighbors flip the exemplar/prototype ranking") {
  // One frame holds a tight far cluster plus one support near the query;
  // the other frame's centroid is closer than the first frame's centroid.
  const std::vector<FrameCategory> cats2 = {
      cat("store", "pobj_prep.in", {v2(10, 0), v2(10, 1), v2(10, -1), v2(1, 0)}),
      cat("wear", "dobj", {v2(6, 2), v2(6, -2), v2(7, 0)})};
  const Vec query = v2(0, 0);
  const auto dem = likelihood(ModelKind::dem, query, cats2);
  const auto dpm = likelihood(ModelKind::dpm, query, cats2);
  CHECK(dem.log_probs[0] > dem.log_probs[1]);  // exemplar: "store" wins
  CHECK(dpm.log_probs[0] < dpm.log_probs[1]);  // prototype: "wear" wins
}

TEST_CASE("log-space evaluation stays finite at extreme distances") {
  const std::vector<FrameCategory> cats2 = {cat("a", "r", {v2(1e4, 0), v2(1e4, 5)}),
                                            cat("b", "r", {v2(-2e4, 0)})};
  const auto lik = likelihood(ModelKind::dem, v2(0, 0), cats2);
  CHECK(std::isfinite(lik.log_probs[0]));
  CHECK(std::isfinite(lik.log_probs[1]));
  CHECK(lik.is_normalized());
  const auto dpm = likelihood(ModelKind::dpm, v2(0, 0), cats2);
  CHECK(std::isfinite(dpm.log_probs.minCoeff()));
}

TEST_CASE("likelihood errors") {
  std::vector<FrameCategory> cats1 = {cat("a", "r", {v2(0, 0)})};
  cats1.push_back(FrameCategory{Frame{"b", "r"}, {}, {}});
  CHECK_THROWS_AS(likelihood(ModelKind::dem, v2(0, 0), cats1), std::runtime_error);
  CHECK_THROWS_AS(likelihood(ModelKind::dem, v2(0, 0), {}), std::runtime_error);
}

TEST_CASE("permutation invariance of frames and supports") {
  rng::Engine g(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto cats1 = random_categories(g, 5, 4, 3);
    Vec hq(3);
    for (int i = 0; i < 3; ++i) hq[i] = rng::uniform(g, -3.0, 3.0);
    for (const auto kind : {ModelKind::dpm, ModelKind::dem}) {
      const auto base = likelihood(kind, hq, cats1);
      auto shuffled = cats1;
      std::reverse(shuffled.begin(), shuffled.end());
      for (auto& c : shuffled) std::reverse(c.support_embeddings.begin(), c.support_embeddings.end());
      const auto flipped = likelihood(kind, hq, shuffled);
      const auto n = static_cast<Eigen::Index>(cats1.size());
      for (Eigen::Index f = 0; f < n; ++f) {
        CHECK(std::abs(base.log_probs[f] - flipped.log_probs[n - 1 - f]) < 1e-12);
      }
    }
  }
}

TEST_CASE("moving a support toward the query never lowers dem's probability") {
  rng::Engine g(12);
  for (int trial = 0; trial < 30; ++trial) {
    auto cats1 = random_categories(g, 4, 4, 3);
    Vec hq(3);
    for (int i = 0; i < 3; ++i) hq[i] = rng::uniform(g, -3.0, 3.0);
    const std::size_t f = rng::below(g, cats1.size());
    const std::size_t s = rng::below(g, cats1[f].support_embeddings.size());
    const double alpha = rng::uniform01(g);

    const auto before = likelihood(ModelKind::dem, hq, cats1);
    auto& sup = cats1[f].support_embeddings[s];
    sup = sup + alpha * (hq - sup);  // strictly closer along the segment
    const auto after = likelihood(ModelKind::dem, hq, cats1);
    CHECK(after.log_probs[static_cast<Eigen::Index>(f)] >=
          before.log_probs[static_cast<Eigen::Index>(f)] - 1e-13);
  }
}

TEST_CASE("likelihood matches the extended-precision oracle") {
  rng::Engine g(13);
  for (int trial = 0; trial < 40; ++trial) {
    const auto cats1 = random_categories(g, 5, 4, 4);
    Vec hq(4);
    for (int i = 0; i < 4; ++i) hq[i] = rng::uniform(g, -3.0, 3.0);
    for (const auto kind : {ModelKind::dpm, ModelKind::dem}) {
      const auto lik = likelihood(kind, hq, cats1);
      const auto oracle = oracle_likelihood(kind, hq, cats1);
      for (std::size_t f = 0; f < cats1.size(); ++f) {
        const double expected = static_cast<double>(logl(oracle[f]));
        CHECK(std::abs(lik.log_probs[static_cast<Eigen::Index>(f)] - expected) < 1e-10);
      }
    }
  }
}

TEST_CASE("joint adds log prior and posterior renormalizes") {
  FrameDistribution lik;
  lik.frames = {Frame{"a", "r"}, Frame{"b", "r"}};
  lik.log_probs = Vec(2);
  lik.log_probs << std::log(0.8), std::log(0.2);
  FrameDistribution pri;
  pri.frames = lik.frames;
  pri.log_probs = Vec::Constant(2, std::log(0.5));

  const auto j = joint(lik, pri);
  CHECK(std::exp(j.log_scores[0]) == doctest::Approx(0.4));
  CHECK(std::exp(j.log_scores[1]) == doctest::Approx(0.1));

  const auto post = posterior_frames(j);
  CHECK(std::exp(post.log_probs[0]) == doctest::Approx(0.8));
  CHECK(std::exp(post.log_probs[1]) == doctest::Approx(0.2));
  CHECK(post.is_normalized());

  // flat prior: posterior equals likelihood
  for (int i = 0; i < 2; ++i) {
    CHECK(post.log_probs[i] == doctest::Approx(lik.log_probs[i]).epsilon(1e-12));
  }

  // scaling all joints leaves the posterior unchanged
  auto scaled = j;
  scaled.log_scores.array() += 3.7;
  const auto post2 = posterior_frames(scaled);
  CHECK((post2.log_probs - post.log_probs).cwiseAbs().maxCoeff() < 1e-12);

  FrameDistribution other;
  other.frames = {Frame{"a", "r"}, Frame{"c", "r"}};
  other.log_probs = pri.log_probs;
  CHECK_THROWS_AS(joint(lik, other), std::runtime_error);
}

TEST_CASE("single frame joint is exactly zero") {
  FrameTable table;
  table.entries[{"only", "r"}] = {{"s1"}, {"q1"}};
  const auto pri = prior(table);
  const std::vector<FrameCategory> cats1 = {cat("only", "r", {v2(1, 2)})};
  const auto lik = likelihood(ModelKind::dem, v2(0, 0), cats1);
  const auto j = joint(lik, pri);
  CHECK(j.log_scores[0] == doctest::Approx(0.0));
}

TEST_CASE("nll_loss on degenerate and uniform fixtures") {
  std::map<std::string, Vec> h;
  h["s1"] = v2(1, 0);
  h["q1"] = v2(0, 0);
  const EmbeddingFn embed = [&h](const std::string& n) -> const Vec* {
    auto it = h.find(n);
    return it == h.end() ? nullptr : &it->second;
  };

  FrameTable one;
  one.entries[{"only", "r"}] = {{"s1"}, {"q1"}};
  CHECK(nll_loss(ModelKind::dem, one, embed).loss == doctest::Approx(0.0));

  // two symmetric frames, one query each: J = 4 ln 2
  FrameTable two;
  two.entries[{"a", "r"}] = {{"sa"}, {"qa"}};
  two.entries[{"b", "r"}] = {{"sb"}, {"qb"}};
  h["sa"] = v2(1, 1);
  h["sb"] = v2(-1, 1);
  h["qa"] = v2(0, 0);  // equidistant from both supports
  h["qb"] = v2(0, 2);
  const auto res = nll_loss(ModelKind::dem, two, embed);
  CHECK(res.loss == doctest::Approx(4.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(res.terms.size() == 2);

  FrameTable missing;
  missing.entries[{"a", "r"}] = {{"sa"}, {"unknown_noun"}};
  CHECK_THROWS_WITH_AS(nll_loss(ModelKind::dem, missing, embed),
                       doctest::Contains("unknown_noun"), std::runtime_error);
}

TEST_CASE("adding a query noun never decreases the loss with >= 2 frames") {
  rng::Engine g(14);
  for (int trial = 0; trial < 10; ++trial) {
    std::map<std::string, Vec> h;
    FrameTable table;
    for (int f = 0; f < 3; ++f) {
      corpus::FrameEntry entry;
      for (int s = 0; s < 2; ++s) {
        const std::string name = "s" + std::to_string(f) + "_" + std::to_string(s);
        Vec v(3);
        for (int i = 0; i < 3; ++i) v[i] = rng::uniform(g, -3.0, 3.0);
        h[name] = v;
        entry.supports.push_back(name);
      }
      const std::string q = "q" + std::to_string(f);
      Vec v(3);
      for (int i = 0; i < 3; ++i) v[i] = rng::uniform(g, -3.0, 3.0);
      h[q] = v;
      entry.queries.push_back(q);
      table.entries[{"v" + std::to_string(f), "r"}] = entry;
    }
    const EmbeddingFn embed = [&h](const std::string& n) -> const Vec* {
      auto it = h.find(n);
      return it == h.end() ? nullptr : &it->second;
    };
    const double before = nll_loss(ModelKind::dem, table, embed).loss;
    Vec extra(3);
    for (int i = 0; i < 3; ++i) extra[i] = rng::uniform(g, -3.0, 3.0);
    h["q_extra"] = extra;
    table.entries[{"v0", "r"}].queries.push_back("q_extra");
    const double after = nll_loss(ModelKind::dem, table, embed).loss;
    CHECK(after >= before - 1e-12);
  }
}

TEST_CASE("batched loss agrees with the reference path") {
  rng::Engine g(15);
  for (const auto kind : {ModelKind::dpm, ModelKind::dem}) {
    for (const auto dist : {DistanceKind::euclidean, DistanceKind::squared_euclidean}) {
      std::map<std::string, Vec> h;
      FrameTable table;
      EmbeddedCategories cats1;
      const int dim = 4;
      Mat hmat(dim, 3 * 3 + 3);
      int col = 0;
      std::vector<std::pair<int, int>> examples;
      for (int f = 0; f < 3; ++f) {
        corpus::FrameEntry entry;
        std::vector<int> scols;
        for (int s = 0; s < 3; ++s) {
          const std::string name = "s" + std::to_string(f) + "_" + std::to_string(s);
          Vec v(dim);
          for (int i = 0; i < dim; ++i) v[i] = rng::uniform(g, -2.0, 2.0);
          h[name] = v;
          hmat.col(col) = v;
          scols.push_back(col++);
          entry.supports.push_back(name);
        }
        const std::string q = "q" + std::to_string(f);
        Vec v(dim);
        for (int i = 0; i < dim; ++i) v[i] = rng::uniform(g, -2.0, 2.0);
        h[q] = v;
        hmat.col(col) = v;
        examples.emplace_back(f, col++);
        entry.queries.push_back(q);
        table.entries[{"v" + std::to_string(f), "r"}] = entry;
        cats1.frames.push_back(Frame{"v" + std::to_string(f), "r"});
        cats1.support_cols.push_back(scols);
      }
      cats1.log_prior = prior(table).log_probs;

      const EmbeddingFn embed = [&h](const std::string& n) -> const Vec* {
        auto it = h.find(n);
        return it == h.end() ? nullptr : &it->second;
      };
      const auto reference = nll_loss(kind, table, embed, dist);
      const auto batched = nll_loss_with_grad(kind, cats1, hmat, examples, dist);
      CHECK(batched.loss == doctest::Approx(reference.loss).epsilon(1e-12));
    }
  }
}

TEST_CASE("batch gradient matches finite differences through the distance math") {
  rng::Engine g(16);
  for (const auto kind : {ModelKind::dpm, ModelKind::dem}) {
    for (const auto dist : {DistanceKind::euclidean, DistanceKind::squared_euclidean}) {
      const int dim = 3;
      EmbeddedCategories cats1;
      Mat h(dim, 8);
      int col = 0;
      std::vector<std::pair<int, int>> examples;
      for (int f = 0; f < 2; ++f) {
        std::vector<int> scols;
        for (int s = 0; s < 3; ++s) scols.push_back(col++);
        cats1.frames.push_back(Frame{"v" + std::to_string(f), "r"});
        cats1.support_cols.push_back(scols);
        examples.emplace_back(f, 6 + f);
      }
      col = 8;
      for (Eigen::Index c = 0; c < 8; ++c) {
        for (int i = 0; i < dim; ++i) h(i, c) = rng::uniform(g, -2.0, 2.0);
      }
      cats1.log_prior = Vec::Constant(2, std::log(0.5));

      const auto batch = nll_loss_with_grad(kind, cats1, h, examples, dist);
      const double eps = 1e-6;
      for (Eigen::Index c = 0; c < 8; ++c) {
        for (int i = 0; i < dim; ++i) {
          Mat up = h, down = h;
          up(i, c) += eps;
          down(i, c) -= eps;
          const double fd = (nll_loss_with_grad(kind, cats1, up, examples, dist).loss -
                             nll_loss_with_grad(kind, cats1, down, examples, dist).loss) /
                            (2 * eps);
          CHECK(std::abs(fd - batch.grad_h(i, c)) <
                1e-7 + 1e-5 * std::max(std::abs(fd), std::abs(batch.grad_h(i, c))));
        }
      }
    }
  }
}

TEST_CASE("squared distance mode is available behind the flag") {
  const std::vector<FrameCategory> cats2 = {cat("a", "r", {v2(0, 0)}), cat("b", "r", {v2(2, 0)})};
  const auto lin = likelihood(ModelKind::dem, v2(1, 0), cats2, DistanceKind::euclidean);
  const auto sq = likelihood(ModelKind::dem, v2(1, 0), cats2, DistanceKind::squared_euclidean);
  CHECK(std::exp(lin.log_probs[0]) == doctest::Approx(0.5));
  CHECK(std::exp(sq.log_probs[0]) == doctest::Approx(0.5));
  const auto lin_off = likelihood(ModelKind::dem, v2(0.5, 0), cats2, DistanceKind::euclidean);
  const auto sq_off = likelihood(ModelKind::dem, v2(0.5, 0), cats2, DistanceKind::squared_euclidean);
  CHECK(std::exp(sq_off.log_probs[0]) > std::exp(lin_off.log_probs[0]));  // sharper contrast
}

}  // TEST_SUITE
