#pragma once

#include <string>
#include <vector>

#include "dualcnn/tensor.hpp"

namespace dualcnn {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(peak^2 / MSE); identical images score kPsnrCap.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

/// Mean SSIM map over the valid region of an 11x11 Gaussian window
/// (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1.
double ssim(const Tensor& a, const Tensor& b);

inline constexpr std::size_t kSsimWindow = 11;

/// Drops `border` pixels from every side.
Tensor crop_border(const Tensor& image, std::size_t border);

struct EvalRow {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;

  void add(EvalRow row);
  void finalize();
  /// Tab-separated rows (name, psnr, ssim) followed by an "average" row.
  std::string to_tsv() const;
};

}  // namespace dualcnn
