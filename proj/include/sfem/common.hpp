#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace sfem {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Configuration and file problems. The CLI maps this to exit code 2;
// every other exception (contract violations, numerical aborts) maps to 1.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Stable log(sum(exp(v))). Entries of -inf are allowed and contribute zero.
inline double log_sum_exp(const Vec& v) {
  if (v.size() == 0) throw std::runtime_error("log_sum_exp: empty input");
  const double m = v.maxCoeff();
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

}  // namespace sfem
