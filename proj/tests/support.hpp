// Shared helpers and independent reference implementations for the tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "dualcnn/formation.hpp"
#include "dualcnn/tensor.hpp"

namespace testing {

using dualcnn::ConvKernel;
using dualcnn::Shape;
using dualcnn::Tensor;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline ConvKernel random_kernel(std::size_t out, std::size_t in, std::size_t kh, std::size_t kw,
                                std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> w(out * in * kh * kw), b(out);
  for (double& v : w) v = u(rng);
  for (double& v : b) v = u(rng);
  return ConvKernel(out, in, kh, kw, std::move(w), std::move(b));
}

// Direct quadruple loop over the definition; out-of-range reads are zero.
inline Tensor naive_conv(const Tensor& in, const ConvKernel& k) {
  const std::ptrdiff_t H = in.height(), W = in.width();
  const std::ptrdiff_t kh = k.kernel_h(), kw = k.kernel_w();
  const std::ptrdiff_t ph = kh / 2, pw = kw / 2;
  Tensor out(k.out_channels(), in.height(), in.width());
  for (std::size_t o = 0; o < k.out_channels(); ++o)
    for (std::ptrdiff_t y = 0; y < H; ++y)
      for (std::ptrdiff_t x = 0; x < W; ++x) {
        double acc = k.bias()[o];
        for (std::size_t c = 0; c < k.in_channels(); ++c)
          for (std::ptrdiff_t dy = 0; dy < kh; ++dy)
            for (std::ptrdiff_t dx = 0; dx < kw; ++dx) {
              const std::ptrdiff_t iy = y + dy - ph, ix = x + dx - pw;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              acc += in.at(c, iy, ix) * k.weight(o, c, dy, dx);
            }
        out.at(o, y, x) = acc;
      }
  return out;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Scalar re-evaluation of the total loss, element by element.
inline double loss_oracle(dualcnn::FormationKind kind, const dualcnn::LossWeights& w,
                          const Tensor& S, const Tensor& D, const dualcnn::SampleTargets& t) {
  double lx = 0, ls = 0, ld = 0;
  const std::size_t n = S.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double composed = kind == dualcnn::FormationKind::Identity
                                ? S[i] + D[i]
                                : t.clear[i] * D[i] + S[i] * (1.0 - D[i]);
    const double e = composed - t.label[i];
    lx += e * e;
    ls += (S[i] - t.structure[i]) * (S[i] - t.structure[i]);
    ld += (D[i] - t.detail[i]) * (D[i] - t.detail[i]);
  }
  return (w.alpha * lx + w.lambda * ls + w.gamma * ld) / static_cast<double>(n);
}

// Unnormalized 2-D Gaussian direct sum with reflected borders.
inline Tensor gaussian_oracle(const Tensor& img, double sigma) {
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  const std::ptrdiff_t H = img.height(), W = img.width();
  auto reflect = [](std::ptrdiff_t i, std::ptrdiff_t n) {
    if (n == 1) return std::ptrdiff_t{0};
    const std::ptrdiff_t period = 2 * n - 2;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
  };
  Tensor out(img.shape());
  for (std::size_t c = 0; c < img.channels(); ++c)
    for (std::ptrdiff_t y = 0; y < H; ++y)
      for (std::ptrdiff_t x = 0; x < W; ++x) {
        double acc = 0, norm = 0;
        for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
          for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
            const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            acc += g * img.at(c, reflect(y + dy, H), reflect(x + dx, W));
            norm += g;
          }
        out.at(c, y, x) = acc / norm;
      }
  return out;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("dualcnn-test-" + std::to_string(::getpid()) + "-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

}  // namespace testing
