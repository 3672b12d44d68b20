#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "distilkit/tensor.hpp"

namespace testutil {

using distilkit::Tensor;

inline Tensor random_tensor(distilkit::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.mutable_data()) v = dist(rng);
  return t;
}

// Central finite differences on one coordinate of `param`, against a forward
// function that rebuilds the loss from scratch. The oracle never touches the
// reverse-mode path it checks.
inline double finite_difference(Tensor& param, std::size_t index,
                                const std::function<double()>& forward, double h = 1e-5) {
  double saved = param.mutable_data()[index];
  param.mutable_data()[index] = saved + h;
  double up = forward();
  param.mutable_data()[index] = saved - h;
  double down = forward();
  param.mutable_data()[index] = saved;
  return (up - down) / (2.0 * h);
}

inline double rel_error(double a, double b) {
  double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

// Checks every coordinate of `param` against finite differences.
// `build_loss` must run the full forward pass under the active tape.
inline double max_grad_rel_error(Tensor param, const std::function<Tensor()>& build_loss,
                                 double h = 1e-5) {
  param.set_requires_grad(true);
  std::vector<double> analytic;
  {
    distilkit::Tape tape;
    Tensor loss = build_loss();
    distilkit::backward(loss);
    analytic.assign(param.grad().begin(), param.grad().end());
  }
  auto forward_value = [&]() { return build_loss().item(); };
  double worst = 0.0;
  for (std::size_t i = 0; i < param.numel(); ++i) {
    double fd = finite_difference(param, i, forward_value, h);
    worst = std::max(worst, rel_error(analytic[i], fd));
  }
  return worst;
}

// Triple-loop reference product, independent of the library path.
inline std::vector<double> naive_matmul(const std::vector<double>& a,
                                        const std::vector<double>& b, std::size_t m,
                                        std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  return c;
}

// Self-cleaning temporary directory for file-format tests.
class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 10000; ++i) {
      auto candidate = base / ("distilkit_test_" + std::to_string(::getpid()) + "_" +
                               std::to_string(counter_++));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("could not create temp dir");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::filesystem::path path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream os(path, std::ios::binary);
  os << contents;
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace testutil
