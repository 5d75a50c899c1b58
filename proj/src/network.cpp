#include "sfem/network.hpp"

#include "sfem/rng.hpp"
#include "sfem/text.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace sfem::nn {

long long IntegrationNetwork::parameter_count() const {
  return static_cast<long long>(w1.size()) + b1.size() + w2.size() + b2.size() +
         w3.size() + b3.size();
}

bool IntegrationNetwork::all_finite() const {
  return w1.allFinite() && w2.allFinite() && w3.allFinite() && b1.allFinite() &&
         b2.allFinite() && b3.allFinite();
}

bool IntegrationNetwork::same_parameters(const IntegrationNetwork& other) const {
  return dims == other.dims && w1 == other.w1 && w2 == other.w2 && w3 == other.w3 &&
         b1 == other.b1 && b2 == other.b2 && b3 == other.b3;
}

namespace {

Mat glorot(rng::Engine& g, int rows, int cols) {
  const double bound = std::sqrt(6.0 / (rows + cols));
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng::uniform(g, -bound, bound);
  }
  return m;
}

}  // namespace

IntegrationNetwork init_network(std::uint64_t seed, const Dims& dims) {
  if (dims.in < 1 || dims.h1 < 1 || dims.h2 < 1 || dims.out < 1) {
    throw std::runtime_error("init_network: dimensions must be positive");
  }
  rng::Engine g(seed);
  IntegrationNetwork net;
  net.dims = dims;
  net.seed = seed;
  net.w1 = glorot(g, dims.h1, dims.in);
  net.w2 = glorot(g, dims.h2, dims.h1);
  net.w3 = glorot(g, dims.out, dims.h2);
  net.b1 = Vec::Zero(dims.h1);
  net.b2 = Vec::Zero(dims.h2);
  net.b3 = Vec::Zero(dims.out);
  return net;
}

Vec forward(const IntegrationNetwork& net, const Vec& x) {
  if (x.size() != net.dims.in) {
    throw std::runtime_error("forward: input length " + std::to_string(x.size()) +
                             " does not match network input " + std::to_string(net.dims.in));
  }
  if (!x.allFinite()) throw std::runtime_error("forward: non-finite input");
  const Vec a1 = (net.w1 * x + net.b1).cwiseMax(0.0);
  const Vec a2 = (net.w2 * a1 + net.b2).cwiseMax(0.0);
  return net.w3 * a2 + net.b3;
}

ForwardCache forward_batch(const IntegrationNetwork& net, const Mat& x) {
  if (x.rows() != net.dims.in) {
    throw std::runtime_error("forward_batch: input rows do not match network input dim");
  }
  if (!x.allFinite()) throw std::runtime_error("forward_batch: non-finite input");
  ForwardCache c;
  c.x = x;
  c.z1.noalias() = net.w1 * x;
  c.z1.colwise() += net.b1;
  c.a1 = c.z1.cwiseMax(0.0);
  c.z2.noalias() = net.w2 * c.a1;
  c.z2.colwise() += net.b2;
  c.a2 = c.z2.cwiseMax(0.0);
  c.h.noalias() = net.w3 * c.a2;
  c.h.colwise() += net.b3;
  return c;
}

GradientRecord GradientRecord::zeros(const Dims& dims) {
  GradientRecord g;
  g.w1 = Mat::Zero(dims.h1, dims.in);
  g.w2 = Mat::Zero(dims.h2, dims.h1);
  g.w3 = Mat::Zero(dims.out, dims.h2);
  g.b1 = Vec::Zero(dims.h1);
  g.b2 = Vec::Zero(dims.h2);
  g.b3 = Vec::Zero(dims.out);
  return g;
}

bool GradientRecord::all_finite() const {
  return w1.allFinite() && w2.allFinite() && w3.allFinite() && b1.allFinite() &&
         b2.allFinite() && b3.allFinite();
}

void GradientRecord::scale(double s) {
  w1 *= s;
  w2 *= s;
  w3 *= s;
  b1 *= s;
  b2 *= s;
  b3 *= s;
}

GradientRecord backward(const IntegrationNetwork& net, const ForwardCache& cache,
                        const Mat& grad_h) {
  if (cache.x.size() == 0) throw std::runtime_error("backward: empty forward cache");
  if (grad_h.rows() != net.dims.out || grad_h.cols() != cache.x.cols()) {
    throw std::runtime_error("backward: gradient shape does not match forward cache");
  }
  GradientRecord g;
  g.w3.noalias() = grad_h * cache.a2.transpose();
  g.b3 = grad_h.rowwise().sum();
  Mat gz2 = net.w3.transpose() * grad_h;
  gz2 = gz2.cwiseProduct((cache.z2.array() > 0.0).cast<double>().matrix());
  g.w2.noalias() = gz2 * cache.a1.transpose();
  g.b2 = gz2.rowwise().sum();
  Mat gz1 = net.w2.transpose() * gz2;
  gz1 = gz1.cwiseProduct((cache.z1.array() > 0.0).cast<double>().matrix());
  g.w1.noalias() = gz1 * cache.x.transpose();
  g.b1 = gz1.rowwise().sum();
  return g;
}

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::runtime_error("sgd: learning rate must be positive");
  if (epochs < 1) throw std::runtime_error("sgd: epochs must be >= 1");
  if (batch_frames < 1) throw std::runtime_error("sgd: batch_frames must be >= 1");
}

void sgd_step(IntegrationNetwork& net, const GradientRecord& grads, const SgdConfig& config) {
  config.validate();
  if (!grads.all_finite()) {
    throw std::runtime_error("sgd_step: non-finite gradient; aborting training");
  }
  const double lr = config.learning_rate;
  net.w1 -= lr * grads.w1;
  net.w2 -= lr * grads.w2;
  net.w3 -= lr * grads.w3;
  net.b1 -= lr * grads.b1;
  net.b2 -= lr * grads.b2;
  net.b3 -= lr * grads.b3;
}

namespace {

void write_matrix(std::ostream& out, const char* name, const Mat& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << text::format_double(m(r, c));
    }
    out << "\n";
  }
}

void write_vector(std::ostream& out, const char* name, const Vec& v) {
  out << name << ' ' << v.size() << "\n";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out << ' ';
    out << text::format_double(v[i]);
  }
  out << "\n";
}

}  // namespace

void save_network(const std::string& path, const IntegrationNetwork& net,
                  const std::map<std::string, std::string>& metadata) {
  std::ostringstream out;
  out << "layers=3\n";
  out << "dims=" << net.dims.h1 << ',' << net.dims.h2 << ',' << net.dims.out << "\n";
  out << "in=" << net.dims.in << "\n";
  out << "seed=" << net.seed << "\n";
  for (const auto& [k, v] : metadata) {
    if (k == "layers" || k == "dims" || k == "in" || k == "seed") continue;
    out << k << '=' << v << "\n";
  }
  out << "params\n";
  write_matrix(out, "w1", net.w1);
  write_vector(out, "b1", net.b1);
  write_matrix(out, "w2", net.w2);
  write_vector(out, "b2", net.b2);
  write_matrix(out, "w3", net.w3);
  write_vector(out, "b3", net.b3);
  text::write_file(path, out.str());
}

namespace {

struct LineReader {
  const std::vector<std::string>& lines;
  std::size_t pos = 0;
  const std::string& path;

  std::string next(const char* what) {
    if (pos >= lines.size()) {
      throw std::runtime_error(path + ": truncated checkpoint, expected " + what +
                               " at line " + std::to_string(pos + 1));
    }
    return lines[pos++];
  }
  std::string where() const { return path + ":" + std::to_string(pos); }
};

Mat read_matrix(LineReader& r, const std::string& name) {
  const auto header = text::split_ws(r.next("matrix header"));
  if (header.size() != 3 || header[0] != name) {
    throw std::runtime_error(r.where() + ": expected block '" + name + "'");
  }
  const auto rows = text::parse_int(header[1], r.where());
  const auto cols = text::parse_int(header[2], r.where());
  Mat m(rows, cols);
  for (long long i = 0; i < rows; ++i) {
    const auto vals = text::split_ws(r.next("matrix row"));
    if (static_cast<long long>(vals.size()) != cols) {
      throw std::runtime_error(r.where() + ": row has " + std::to_string(vals.size()) +
                               " values, expected " + std::to_string(cols));
    }
    for (long long j = 0; j < cols; ++j) m(i, j) = text::parse_double(vals[j], r.where());
  }
  return m;
}

Vec read_vector(LineReader& r, const std::string& name) {
  const auto header = text::split_ws(r.next("vector header"));
  if (header.size() != 2 || header[0] != name) {
    throw std::runtime_error(r.where() + ": expected block '" + name + "'");
  }
  const auto n = text::parse_int(header[1], r.where());
  const auto vals = text::split_ws(r.next("vector row"));
  if (static_cast<long long>(vals.size()) != n) {
    throw std::runtime_error(r.where() + ": vector has " + std::to_string(vals.size()) +
                             " values, expected " + std::to_string(n));
  }
  Vec v(n);
  for (long long i = 0; i < n; ++i) v[i] = text::parse_double(vals[i], r.where());
  return v;
}

}  // namespace

LoadedNetwork load_network(const std::string& path) {
  const auto lines = text::read_lines(path);
  LineReader r{lines, 0, path};
  LoadedNetwork out;
  // Header: key=value until the `params` marker.
  while (true) {
    const std::string line = r.next("header or params marker");
    if (line == "params") break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(r.where() + ": expected key=value header line");
    }
    out.metadata[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* key : {"layers", "dims", "in", "seed"}) {
    if (!out.metadata.count(key)) {
      throw std::runtime_error(path + ": checkpoint header missing '" + std::string(key) + "'");
    }
  }
  if (out.metadata["layers"] != "3") {
    throw std::runtime_error(path + ": unsupported layer count " + out.metadata["layers"]);
  }
  const auto dim_fields = text::split(out.metadata["dims"], ',');
  if (dim_fields.size() != 3) throw std::runtime_error(path + ": dims header must have 3 entries");
  Dims dims;
  dims.in = static_cast<int>(text::parse_int(out.metadata["in"], path + " in"));
  dims.h1 = static_cast<int>(text::parse_int(dim_fields[0], path + " dims"));
  dims.h2 = static_cast<int>(text::parse_int(dim_fields[1], path + " dims"));
  dims.out = static_cast<int>(text::parse_int(dim_fields[2], path + " dims"));

  IntegrationNetwork& net = out.net;
  net.dims = dims;
  net.seed = text::parse_uint(out.metadata["seed"], path + " seed");
  net.w1 = read_matrix(r, "w1");
  net.b1 = read_vector(r, "b1");
  net.w2 = read_matrix(r, "w2");
  net.b2 = read_vector(r, "b2");
  net.w3 = read_matrix(r, "w3");
  net.b3 = read_vector(r, "b3");
  if (net.w1.rows() != dims.h1 || net.w1.cols() != dims.in || net.w2.rows() != dims.h2 ||
      net.w2.cols() != dims.h1 || net.w3.rows() != dims.out || net.w3.cols() != dims.h2 ||
      net.b1.size() != dims.h1 || net.b2.size() != dims.h2 || net.b3.size() != dims.out) {
    throw std::runtime_error(path + ": parameter blocks disagree with dims header");
  }
  if (!net.all_finite()) throw std::runtime_error(path + ": non-finite parameters");
  return out;
}

}  // namespace sfem::nn
