#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dualcnn {

struct Shape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return channels * height * width; }
  bool operator==(const Shape&) const = default;
  std::string to_string() const;
};

/// Dense (channel, row, column) array of doubles. Every signal in the
/// pipeline (inputs, structure/detail maps, gradients) is one of these.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0)
      : Tensor(Shape{channels, height, width}, fill) {}
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> channel(std::size_t c) {
    return std::span<double>(data_).subspan(c * plane(), plane());
  }
  std::span<const double> channel(std::size_t c) const {
    return std::span<const double>(data_).subspan(c * plane(), plane());
  }

  /// Copy of the rectangle [y0, y0+h) x [x0, x0+w) across all channels.
  Tensor crop(std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) const;

  double sum() const;
  double mean() const;
  double min() const;
  double max() const;
  bool all_finite() const;

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t plane() const { return shape_.height * shape_.width; }

  Shape shape_;
  std::vector<double> data_;
};

/// Throws ValidationError naming `what` if the shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor clamp(const Tensor& a, double lo, double hi);

/// In-place y += s * x.
void axpy(double s, const Tensor& x, Tensor& y);

double dot(const Tensor& a, const Tensor& b);

/// Convolution filter bank: weights laid out (out, in, ky, kx), one bias per output channel.
class ConvKernel {
 public:
  ConvKernel() = default;
  /// Zero-filled kernel. Kernel sizes must be odd.
  ConvKernel(std::size_t out_channels, std::size_t in_channels, std::size_t kernel_h,
             std::size_t kernel_w);
  ConvKernel(std::size_t out_channels, std::size_t in_channels, std::size_t kernel_h,
             std::size_t kernel_w, std::vector<double> weights, std::vector<double> bias);

  std::size_t out_channels() const { return out_; }
  std::size_t in_channels() const { return in_; }
  std::size_t kernel_h() const { return kh_; }
  std::size_t kernel_w() const { return kw_; }

  double& weight(std::size_t o, std::size_t c, std::size_t y, std::size_t x) {
    return weights_[((o * in_ + c) * kh_ + y) * kw_ + x];
  }
  double weight(std::size_t o, std::size_t c, std::size_t y, std::size_t x) const {
    return weights_[((o * in_ + c) * kh_ + y) * kw_ + x];
  }

  std::span<double> weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }
  std::span<double> bias() { return bias_; }
  std::span<const double> bias() const { return bias_; }

  std::size_t parameter_count() const { return weights_.size() + bias_.size(); }
  bool same_geometry(const ConvKernel& other) const;

  bool operator==(const ConvKernel&) const = default;

 private:
  std::size_t out_ = 0;
  std::size_t in_ = 0;
  std::size_t kh_ = 0;
  std::size_t kw_ = 0;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

struct ConvGradients {
  Tensor input;
  ConvKernel kernel;  // weight and bias gradients share the kernel layout
};

/// "Same" convolution with zero padding of (k-1)/2 on each side.
Tensor conv2d_forward(const Tensor& input, const ConvKernel& kernel);

/// Exact partials of sum(grad_out * conv2d_forward(input, kernel)).
/// The input gradient is skipped (left empty) when `want_input_grad` is false.
ConvGradients conv2d_backward(const Tensor& input, const ConvKernel& kernel,
                              const Tensor& grad_out, bool want_input_grad = true);

Tensor relu_forward(const Tensor& input);
/// Passes grad_out where input > 0; the subgradient at exactly 0 is 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

}  // namespace dualcnn
