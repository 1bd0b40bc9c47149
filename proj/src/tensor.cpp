#include "dualcnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dualcnn/errors.hpp"

namespace dualcnn {

namespace {

void require_positive(const Shape& s) {
  if (s.channels == 0 || s.height == 0 || s.width == 0) {
    throw ValidationError("tensor dimensions must be positive, got " + s.to_string());
  }
}

template <class Op>
Tensor zip(const Tensor& a, const Tensor& b, const char* what, Op op) {
  require_same_shape(a, b, what);
  Tensor out(a.shape());
  auto pa = a.data();
  auto pb = b.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = op(pa[i], pb[i]);
  return out;
}

template <class Op>
Tensor map(const Tensor& a, Op op) {
  Tensor out(a.shape());
  auto pa = a.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = op(pa[i]);
  return out;
}

}  // namespace

std::string Shape::to_string() const {
  std::ostringstream os;
  os << channels << "x" << height << "x" << width;
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape) {
  require_positive(shape_);
  data_.assign(shape_.size(), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  require_positive(shape_);
  if (data_.size() != shape_.size()) {
    throw ValidationError("tensor data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_.to_string());
  }
}

Tensor Tensor::crop(std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) const {
  if (h == 0 || w == 0 || y0 + h > height() || x0 + w > width()) {
    throw ValidationError("crop window out of bounds for tensor " + shape_.to_string());
  }
  Tensor out(channels(), h, w);
  for (std::size_t c = 0; c < channels(); ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = at(c, y0 + y, x0 + x);
  return out;
}

double Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Tensor::mean() const { return data_.empty() ? 0.0 : sum() / static_cast<double>(size()); }

double Tensor::min() const { return *std::min_element(data_.begin(), data_.end()); }

double Tensor::max() const { return *std::max_element(data_.begin(), data_.end()); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ValidationError(std::string(what) + ": shape mismatch " + a.shape().to_string() +
                          " vs " + b.shape().to_string());
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}

Tensor scale(const Tensor& a, double s) {
  return map(a, [s](double x) { return x * s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return map(a, [s](double x) { return x + s; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return map(a, [lo, hi](double x) { return std::clamp(x, lo, hi); });
}

void axpy(double s, const Tensor& x, Tensor& y) {
  require_same_shape(x, y, "axpy");
  auto px = x.data();
  auto py = y.data();
  for (std::size_t i = 0; i < py.size(); ++i) py[i] += s * px[i];
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  auto pa = a.data();
  auto pb = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) acc += pa[i] * pb[i];
  return acc;
}

// ---------------------------------------------------------------------------

ConvKernel::ConvKernel(std::size_t out_channels, std::size_t in_channels, std::size_t kernel_h,
                       std::size_t kernel_w)
    : ConvKernel(out_channels, in_channels, kernel_h, kernel_w,
                 std::vector<double>(out_channels * in_channels * kernel_h * kernel_w, 0.0),
                 std::vector<double>(out_channels, 0.0)) {}

ConvKernel::ConvKernel(std::size_t out_channels, std::size_t in_channels, std::size_t kernel_h,
                       std::size_t kernel_w, std::vector<double> weights,
                       std::vector<double> bias)
    : out_(out_channels),
      in_(in_channels),
      kh_(kernel_h),
      kw_(kernel_w),
      weights_(std::move(weights)),
      bias_(std::move(bias)) {
  if (out_ == 0 || in_ == 0 || kh_ == 0 || kw_ == 0) {
    throw ValidationError("conv kernel dimensions must be positive");
  }
  if (kh_ % 2 == 0 || kw_ % 2 == 0) {
    throw ValidationError("conv kernel size must be odd, got " + std::to_string(kh_) + "x" +
                          std::to_string(kw_));
  }
  if (weights_.size() != out_ * in_ * kh_ * kw_) {
    throw ValidationError("conv kernel weight count does not match its geometry");
  }
  if (bias_.size() != out_) {
    throw ValidationError("conv kernel bias count must equal out_channels");
  }
}

bool ConvKernel::same_geometry(const ConvKernel& other) const {
  return out_ == other.out_ && in_ == other.in_ && kh_ == other.kh_ && kw_ == other.kw_;
}

// The loops below walk (o, c, ky, kx) outermost and the image rows innermost,
// clipping each row span to the valid region so the hot loop is a plain
// contiguous multiply-add without bounds checks.

Tensor conv2d_forward(const Tensor& input, const ConvKernel& kernel) {
  if (input.channels() != kernel.in_channels()) {
    throw ValidationError("conv2d_forward: input has " + std::to_string(input.channels()) +
                          " channels, kernel expects " + std::to_string(kernel.in_channels()));
  }
  const auto H = static_cast<std::ptrdiff_t>(input.height());
  const auto W = static_cast<std::ptrdiff_t>(input.width());
  const auto kh = static_cast<std::ptrdiff_t>(kernel.kernel_h());
  const auto kw = static_cast<std::ptrdiff_t>(kernel.kernel_w());
  const std::ptrdiff_t ph = kh / 2;
  const std::ptrdiff_t pw = kw / 2;

  Tensor out(kernel.out_channels(), input.height(), input.width());
  for (std::size_t o = 0; o < kernel.out_channels(); ++o) {
    auto out_plane = out.channel(o);
    std::fill(out_plane.begin(), out_plane.end(), kernel.bias()[o]);
    for (std::size_t c = 0; c < kernel.in_channels(); ++c) {
      auto in_plane = input.channel(c);
      for (std::ptrdiff_t ky = 0; ky < kh; ++ky) {
        const std::ptrdiff_t dy = ky - ph;
        const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
        const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(H, H - dy);
        for (std::ptrdiff_t kx = 0; kx < kw; ++kx) {
          const double w = kernel.weight(o, c, ky, kx);
          if (w == 0.0) continue;
          const std::ptrdiff_t dx = kx - pw;
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
          const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
          for (std::ptrdiff_t y = y0; y < y1; ++y) {
            double* dst = out_plane.data() + y * W;
            const double* src = in_plane.data() + (y + dy) * W + dx;
            for (std::ptrdiff_t x = x0; x < x1; ++x) dst[x] += w * src[x];
          }
        }
      }
    }
  }
  return out;
}

ConvGradients conv2d_backward(const Tensor& input, const ConvKernel& kernel,
                              const Tensor& grad_out, bool want_input_grad) {
  if (input.channels() != kernel.in_channels()) {
    throw ValidationError("conv2d_backward: input channel count does not match kernel");
  }
  const Shape expected{kernel.out_channels(), input.height(), input.width()};
  if (grad_out.shape() != expected) {
    throw ValidationError("conv2d_backward: grad_out shape " + grad_out.shape().to_string() +
                          " does not match forward output shape " + expected.to_string());
  }
  const auto H = static_cast<std::ptrdiff_t>(input.height());
  const auto W = static_cast<std::ptrdiff_t>(input.width());
  const auto kh = static_cast<std::ptrdiff_t>(kernel.kernel_h());
  const auto kw = static_cast<std::ptrdiff_t>(kernel.kernel_w());
  const std::ptrdiff_t ph = kh / 2;
  const std::ptrdiff_t pw = kw / 2;

  ConvGradients grads;
  grads.kernel = ConvKernel(kernel.out_channels(), kernel.in_channels(), kernel.kernel_h(),
                            kernel.kernel_w());
  if (want_input_grad) grads.input = Tensor(input.shape());

  for (std::size_t o = 0; o < kernel.out_channels(); ++o) {
    auto g_plane = grad_out.channel(o);
    double bias_grad = 0.0;
    for (double g : g_plane) bias_grad += g;
    grads.kernel.bias()[o] = bias_grad;

    for (std::size_t c = 0; c < kernel.in_channels(); ++c) {
      auto in_plane = input.channel(c);
      double* gin_plane = want_input_grad ? grads.input.channel(c).data() : nullptr;
      for (std::ptrdiff_t ky = 0; ky < kh; ++ky) {
        const std::ptrdiff_t dy = ky - ph;
        const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
        const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(H, H - dy);
        for (std::ptrdiff_t kx = 0; kx < kw; ++kx) {
          const std::ptrdiff_t dx = kx - pw;
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
          const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - dx);
          const double w = kernel.weight(o, c, ky, kx);
          double wg = 0.0;
          for (std::ptrdiff_t y = y0; y < y1; ++y) {
            const double* g = g_plane.data() + y * W;
            const double* src = in_plane.data() + (y + dy) * W + dx;
            for (std::ptrdiff_t x = x0; x < x1; ++x) wg += g[x] * src[x];
            if (gin_plane != nullptr && w != 0.0) {
              double* dst = gin_plane + (y + dy) * W + dx;
              for (std::ptrdiff_t x = x0; x < x1; ++x) dst[x] += w * g[x];
            }
          }
          grads.kernel.weight(o, c, ky, kx) = wg;
        }
      }
    }
  }
  return grads;
}

Tensor relu_forward(const Tensor& input) {
  return map(input, [](double x) { return x > 0.0 ? x : 0.0; });
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  return zip(input, grad_out, "relu_backward",
             [](double x, double g) { return x > 0.0 ? g : 0.0; });
}

}  // namespace dualcnn
