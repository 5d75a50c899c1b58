#pragma once

#include "sfem/common.hpp"

#include <cstdint>
#include <map>
#include <string>

// The trainable integration map g: fused inputs -> multimodal
// representations. Three affine layers, rectifier on the hidden two,
// identity output, with exact reverse-mode gradients and plain SGD.
namespace sfem::nn {

struct Dims {
  int in = 300;
  int h1 = 300;
  int h2 = 200;
  int out = 100;

  bool operator==(const Dims&) const = default;
};

struct IntegrationNetwork {
  Mat w1, w2, w3;
  Vec b1, b2, b3;
  Dims dims;
  std::uint64_t seed = 0;

  long long parameter_count() const;
  bool all_finite() const;
  bool same_parameters(const IntegrationNetwork& other) const;
};

// Weights seeded uniform on +-sqrt(6 / (fan_in + fan_out)); biases zero.
IntegrationNetwork init_network(std::uint64_t seed, const Dims& dims = {});

// h = W3 relu(W2 relu(W1 x + b1) + b2) + b3
Vec forward(const IntegrationNetwork& net, const Vec& x);

// Batched forward with retained intermediates; columns are samples.
struct ForwardCache {
  Mat x, z1, a1, z2, a2, h;
};

ForwardCache forward_batch(const IntegrationNetwork& net, const Mat& x);

struct GradientRecord {
  Mat w1, w2, w3;
  Vec b1, b2, b3;

  static GradientRecord zeros(const Dims& dims);
  bool all_finite() const;
  void scale(double s);
};

// Exact gradients of a scalar loss given dLoss/dH for the cached batch.
GradientRecord backward(const IntegrationNetwork& net, const ForwardCache& cache,
                        const Mat& grad_h);

struct SgdConfig {
  double learning_rate = 0.1;
  int epochs = 200;
  int batch_frames = 64;
  std::uint64_t seed = 0;

  void validate() const;
};

// theta <- theta - learning_rate * grad, applied to g's parameters only.
// Two half-rate steps are not equivalent to one full step in general; the
// loss is nonlinear in theta.
void sgd_step(IntegrationNetwork& net, const GradientRecord& grads, const SgdConfig& config);

// Checkpoint: text header (`layers=3`, `dims=...`, `seed=`, `decade=`, plus
// free-form metadata), then named parameter blocks of row-major decimal
// floats at 17 significant digits; round-trips bit-exactly.
void save_network(const std::string& path, const IntegrationNetwork& net,
                  const std::map<std::string, std::string>& metadata);

struct LoadedNetwork {
  IntegrationNetwork net;
  std::map<std::string, std::string> metadata;
};

LoadedNetwork load_network(const std::string& path);

}  // namespace sfem::nn
