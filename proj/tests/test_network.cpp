#include "doctest.h"

#include "sfem/network.hpp"
#include "sfem/rng.hpp"
#include "sfem/text.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace sfem;
using namespace sfem::nn;

namespace {

Mat random_inputs(rng::Engine& g, int dim, int n) {
  Mat x(dim, n);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < dim; ++r) x(r, c) = rng::normal(g);
  }
  return x;
}

// Quadratic probe loss L = 0.5 * ||H - T||^2 so dL/dH = H - T.
double probe_loss(const IntegrationNetwork& net, const Mat& x, const Mat& target) {
  const Mat h = forward_batch(net, x).h;
  return 0.5 * (h - target).squaredNorm();
}

double* param_entry(IntegrationNetwork& net, long long index) {
  auto in_block = [&index](auto& block) -> double* {
    if (index < static_cast<long long>(block.size())) return block.data() + index;
    index -= static_cast<long long>(block.size());
    return nullptr;
  };
  if (double* p = in_block(net.w1)) return p;
  if (double* p = in_block(net.b1)) return p;
  if (double* p = in_block(net.w2)) return p;
  if (double* p = in_block(net.b2)) return p;
  if (double* p = in_block(net.w3)) return p;
  if (double* p = in_block(net.b3)) return p;
  return nullptr;
}

double grad_entry(const GradientRecord& g, long long index) {
  auto in_block = [&index](const auto& block) -> const double* {
    if (index < static_cast<long long>(block.size())) return block.data() + index;
    index -= static_cast<long long>(block.size());
    return nullptr;
  };
  if (const double* p = in_block(g.w1)) return *p;
  if (const double* p = in_block(g.b1)) return *p;
  if (const double* p = in_block(g.w2)) return *p;
  if (const double* p = in_block(g.b2)) return *p;
  if (const double* p = in_block(g.w3)) return *p;
  if (const double* p = in_block(g.b3)) return *p;
  throw std::runtime_error("bad gradient index");
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("init is deterministic with zero biases inside the closed-form bound") {
  const Dims dims;  // 300 -> 300 -> 200 -> 100
  const auto a = init_network(42, dims);
  const auto b = init_network(42, dims);
  CHECK(a.same_parameters(b));
  CHECK(a.parameter_count() == 300 * 300 + 300 + 300 * 200 + 200 + 200 * 100 + 100);
  CHECK(a.b1.cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.b2.cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.b3.cwiseAbs().maxCoeff() == 0.0);

  const double bound1 = std::sqrt(6.0 / (300 + 300));
  const double bound2 = std::sqrt(6.0 / (200 + 300));
  const double bound3 = std::sqrt(6.0 / (100 + 200));
  CHECK(a.w1.cwiseAbs().maxCoeff() <= bound1);
  CHECK(a.w2.cwiseAbs().maxCoeff() <= bound2);
  CHECK(a.w3.cwiseAbs().maxCoeff() <= bound3);

  const auto c = init_network(43, dims);
  CHECK_FALSE(a.same_parameters(c));
}

TEST_CASE("forward: zero parameters give zero output") {
  Dims dims{4, 5, 3, 2};
  auto net = init_network(1, dims);
  net.w1.setZero();
  net.w2.setZero();
  net.w3.setZero();
  Vec x(4);
  x << 1, -2, 3, -4;
  CHECK(forward(net, x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward: rectifier is a no-op on non-negative pre-activations") {
  Dims dims{3, 3, 3, 3};
  auto net = init_network(2, dims);
  net.w1 = Mat::Identity(3, 3);
  net.w2 = Mat::Identity(3, 3);
  net.w3 = Mat::Identity(3, 3);
  net.b1.setZero();
  net.b2.setZero();
  net.b3.setZero();
  Vec x(3);
  x << 0.5, 1.0, 2.0;  // non-negative keeps relu inactive
  CHECK((forward(net, x) - x).norm() == doctest::Approx(0.0));
  Vec neg(3);
  neg << -1.0, 2.0, -3.0;
  const Vec h = forward(net, neg);
  CHECK(h[0] == 0.0);
  CHECK(h[1] == doctest::Approx(2.0));
  CHECK(h[2] == 0.0);
}

TEST_CASE("forward matches an independent scalar re-evaluation") {
  const Dims dims;
  const auto net = init_network(3, dims);
  Vec x = Vec::Zero(300);
  x[0] = 1.0;

  // plain nested loops, no shared code with the Eigen path
  std::vector<double> a1(300), a2(200), h(100);
  for (int i = 0; i < 300; ++i) {
    double z = net.b1[i];
    for (int j = 0; j < 300; ++j) z += net.w1(i, j) * x[j];
    a1[static_cast<std::size_t>(i)] = z > 0 ? z : 0;
  }
  for (int i = 0; i < 200; ++i) {
    double z = net.b2[i];
    for (int j = 0; j < 300; ++j) z += net.w2(i, j) * a1[static_cast<std::size_t>(j)];
    a2[static_cast<std::size_t>(i)] = z > 0 ? z : 0;
  }
  for (int i = 0; i < 100; ++i) {
    double z = net.b3[i];
    for (int j = 0; j < 200; ++j) z += net.w3(i, j) * a2[static_cast<std::size_t>(j)];
    h[static_cast<std::size_t>(i)] = z;
  }
  const Vec got = forward(net, x);
  for (int i = 0; i < 100; ++i) {
    CHECK(got[i] == doctest::Approx(h[static_cast<std::size_t>(i)]).epsilon(1e-12));
  }

  CHECK_THROWS_AS(forward(net, Vec::Constant(300, std::nan(""))), std::runtime_error);
  CHECK_THROWS_AS(forward(net, Vec::Zero(10)), std::runtime_error);
}

TEST_CASE("backward matches central finite differences on every parameter") {
  const Dims dims{6, 5, 4, 3};
  rng::Engine g(2025);
  auto net = init_network(7, dims);
  const Mat x = random_inputs(g, 6, 5);
  Mat target = random_inputs(g, 3, 5);

  const auto cache = forward_batch(net, x);
  const Mat grad_h = cache.h - target;
  const auto grads = backward(net, cache, grad_h);

  const double eps = 1e-5;
  const long long n = net.parameter_count();
  for (long long i = 0; i < n; ++i) {
    double* p = param_entry(net, i);
    const double saved = *p;
    *p = saved + eps;
    const double up = probe_loss(net, x, target);
    *p = saved - eps;
    const double down = probe_loss(net, x, target);
    *p = saved;
    const double fd = (up - down) / (2 * eps);
    const double an = grad_entry(grads, i);
    CHECK(std::abs(fd - an) <= 1e-6 + 1e-5 * std::max(std::abs(fd), std::abs(an)));
  }
}

TEST_CASE("backward: zero upstream gradient gives zero parameter gradients") {
  const Dims dims{4, 4, 3, 2};
  const auto net = init_network(9, dims);
  rng::Engine g(1);
  const Mat x = random_inputs(g, 4, 3);
  const auto cache = forward_batch(net, x);
  const auto grads = backward(net, cache, Mat::Zero(2, 3));
  CHECK(grads.w1.cwiseAbs().maxCoeff() == 0.0);
  CHECK(grads.w3.cwiseAbs().maxCoeff() == 0.0);
  CHECK(grads.b2.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward is linear in the upstream gradient") {
  const Dims dims{4, 4, 3, 2};
  const auto net = init_network(10, dims);
  rng::Engine g(2);
  const Mat x = random_inputs(g, 4, 3);
  const Mat gh = random_inputs(g, 2, 3);
  const auto cache = forward_batch(net, x);
  const auto g1 = backward(net, cache, gh);
  const auto g2 = backward(net, cache, 2.0 * gh);
  CHECK((g2.w1 - 2.0 * g1.w1).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK((g2.b3 - 2.0 * g1.b3).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("backward rejects a missing or mismatched cache") {
  const Dims dims{4, 4, 3, 2};
  const auto net = init_network(11, dims);
  ForwardCache empty;
  CHECK_THROWS_AS(backward(net, empty, Mat::Zero(2, 3)), std::runtime_error);
  rng::Engine g(3);
  const auto cache = forward_batch(net, random_inputs(g, 4, 3));
  CHECK_THROWS_AS(backward(net, cache, Mat::Zero(2, 5)), std::runtime_error);
}

TEST_CASE("sgd_step applies the update rule to g's parameters only") {
  const Dims dims{3, 3, 3, 3};
  auto net = init_network(12, dims);
  const auto before = net;
  auto grads = GradientRecord::zeros(dims);
  SgdConfig config;
  config.learning_rate = 0.1;

  sgd_step(net, grads, config);
  CHECK(net.same_parameters(before));  // zero gradient: unchanged

  grads.w1(0, 0) = 2.0;
  sgd_step(net, grads, config);
  CHECK(net.w1(0, 0) == doctest::Approx(before.w1(0, 0) - 0.1 * 2.0));
  CHECK(net.w2 == before.w2);

  grads.w1(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(sgd_step(net, grads, config), std::runtime_error);

  config.learning_rate = 0.0;
  grads.w1(0, 0) = 1.0;
  CHECK_THROWS_AS(sgd_step(net, grads, config), std::runtime_error);
}

TEST_CASE("checkpoints round-trip bit-exactly and validate headers") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / ("sfem_net_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string path = (dir / "net.ckpt").string();

  const auto net = init_network(123456789, {});
  save_network(path, net, {{"decade", "1900"}, {"kind", "dem"}});
  const auto loaded = load_network(path);
  CHECK(loaded.net.same_parameters(net));
  CHECK(loaded.net.seed == net.seed);
  CHECK(loaded.metadata.at("decade") == "1900");
  CHECK(loaded.metadata.at("kind") == "dem");

  // tampered dims header
  auto text_content = text::read_file(path);
  const auto pos = text_content.find("dims=300,200,100");
  REQUIRE(pos != std::string::npos);
  text_content.replace(pos, 16, "dims=300,200,101");
  const std::string bad = (dir / "bad.ckpt").string();
  text::write_file(bad, text_content);
  CHECK_THROWS_AS(load_network(bad), std::runtime_error);

  // truncated file errors with a position
  const std::string trunc = (dir / "trunc.ckpt").string();
  text::write_file(trunc, text::read_file(path).substr(0, 2000));
  CHECK_THROWS_WITH_AS(load_network(trunc), doctest::Contains("trunc.ckpt"), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("small nets round-trip through the in= header") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / ("sfem_net2_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string path = (dir / "small.ckpt").string();
  const auto net = init_network(5, {7, 6, 5, 4});
  save_network(path, net, {});
  const auto loaded = load_network(path);
  CHECK(loaded.net.dims == net.dims);
  CHECK(loaded.net.same_parameters(net));
  fs::remove_all(dir);
}

}  // TEST_SUITE
