#include "dualcnn/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "dualcnn/errors.hpp"

namespace dualcnn {

double psnr(const Tensor& a, const Tensor& b, double peak) {
  require_same_shape(a, b, "psnr");
  if (!(peak > 0.0)) throw ValidationError("psnr peak must be positive");
  // Compensated sum, so equal errors average to exactly their square.
  double sse = 0.0, carry = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    const double term = d * d, t = sse + term;
    carry += std::abs(sse) >= term ? (sse - t) + term : (term - t) + sse;
    sse = t;
  }
  sse += carry;
  const double mse = sse / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCap;
  return 20.0 * std::log10(peak) - 10.0 * std::log10(mse);
}

namespace {

// Valid-mode 2-D filtering of one channel with a separable kernel.
std::vector<double> filter_valid(std::span<const double> plane, std::size_t H, std::size_t W,
                                 const std::vector<double>& k) {
  const std::size_t n = k.size();
  const std::size_t oh = H - n + 1;
  const std::size_t ow = W - n + 1;
  std::vector<double> rows(H * ow);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) acc += k[t] * plane[y * W + x + t];
      rows[y * ow + x] = acc;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) acc += k[t] * rows[(y + t) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

std::vector<double> ssim_window() {
  // 11 taps at sigma 1.5, normalized.
  std::vector<double> k(kSsimWindow);
  double total = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double d = static_cast<double>(i) - 5.0;
    k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    total += k[i];
  }
  for (double& v : k) v /= total;
  return k;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "ssim");
  if (a.height() < kSsimWindow || a.width() < kSsimWindow) {
    throw ValidationError("ssim needs images of at least 11x11, got " + a.shape().to_string());
  }
  constexpr double C1 = 0.01 * 0.01;
  constexpr double C2 = 0.03 * 0.03;
  static const std::vector<double> k = ssim_window();
  const std::size_t H = a.height(), W = a.width();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    auto pa = a.channel(c);
    auto pb = b.channel(c);
    std::vector<double> aa(pa.size()), bb(pa.size()), ab(pa.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    const auto mu_a = filter_valid(pa, H, W, k);
    const auto mu_b = filter_valid(pb, H, W, k);
    const auto e_aa = filter_valid(aa, H, W, k);
    const auto e_bb = filter_valid(bb, H, W, k);
    const auto e_ab = filter_valid(ab, H, W, k);
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double ma = mu_a[i], mb = mu_b[i];
      const double va = e_aa[i] - ma * ma;
      const double vb = e_bb[i] - mb * mb;
      const double cov = e_ab[i] - ma * mb;
      total += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) /
               ((ma * ma + mb * mb + C1) * (va + vb + C2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

Tensor crop_border(const Tensor& image, std::size_t border) {
  if (border == 0) return image;
  if (2 * border >= image.height() || 2 * border >= image.width()) {
    throw ValidationError("border crop of " + std::to_string(border) + " leaves nothing of " +
                          image.shape().to_string());
  }
  return image.crop(border, border, image.height() - 2 * border, image.width() - 2 * border);
}

void EvalReport::add(EvalRow row) { rows.push_back(std::move(row)); }

void EvalReport::finalize() {
  mean_psnr = 0.0;
  mean_ssim = 0.0;
  if (rows.empty()) return;
  for (const auto& r : rows) {
    mean_psnr += r.psnr;
    mean_ssim += r.ssim;
  }
  mean_psnr /= static_cast<double>(rows.size());
  mean_ssim /= static_cast<double>(rows.size());
}

std::string EvalReport::to_tsv() const {
  std::string out = "name\tpsnr\tssim\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "\t%.17g\t%.17g\n", r.psnr, r.ssim);
    out += r.name;
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "average\t%.17g\t%.17g\n", mean_psnr, mean_ssim);
  out += buf;
  return out;
}

}  // namespace dualcnn
