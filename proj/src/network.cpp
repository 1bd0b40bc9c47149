#include "dualcnn/network.hpp"

#include <cmath>
#include <random>

#include "dualcnn/errors.hpp"

namespace dualcnn {

std::string to_string(NetKind kind) {
  switch (kind) {
    case NetKind::NetS: return "net_s";
    case NetKind::NetD: return "net_d";
    case NetKind::Custom: return "custom";
  }
  return "custom";
}

NetKind net_kind_from_string(const std::string& name) {
  if (name == "net_s") return NetKind::NetS;
  if (name == "net_d") return NetKind::NetD;
  if (name == "custom") return NetKind::Custom;
  throw ValidationError("unknown network kind '" + name + "'");
}

std::size_t NetworkSpec::max_kernel_size() const {
  std::size_t k = 1;
  for (const auto& l : layers) k = std::max(k, l.kernel_size);
  return k;
}

std::size_t NetworkSpec::parameter_count() const {
  std::size_t count = 0;
  std::size_t in = input_channels;
  for (const auto& l : layers) {
    count += l.out_channels * in * l.kernel_size * l.kernel_size + l.out_channels;
    in = l.out_channels;
  }
  return count;
}

void NetworkSpec::validate() const {
  if (input_channels == 0) throw ValidationError("network input_channels must be positive");
  if (layers.empty()) throw ValidationError("network spec has no layers");
  for (const auto& l : layers) {
    if (l.out_channels == 0) throw ValidationError("layer out_channels must be positive");
    if (l.kernel_size % 2 == 0) {
      throw ValidationError("layer kernel size must be odd, got " +
                            std::to_string(l.kernel_size));
    }
  }
}

NetworkSpec build_net_s() { return build_scaled(NetKind::NetS, 64, 3); }

NetworkSpec build_net_d() { return build_scaled(NetKind::NetD, 64, 20); }

NetworkSpec build_scaled(NetKind kind, std::size_t channels, std::size_t depth) {
  if (channels < 1) throw ValidationError("channel scale must be >= 1");
  if (depth < 1) throw ValidationError("network depth must be >= 1");

  NetworkSpec spec;
  spec.kind = kind;
  spec.input_channels = 1;
  switch (kind) {
    case NetKind::NetS: {
      // 9x9 feature extraction, 1x1 mappings (extra ones when deeper), 5x5 reconstruction.
      if (depth == 1) {
        spec.layers.push_back({1, 9, Activation::None});
        break;
      }
      const std::size_t mapped = std::max<std::size_t>(1, channels / 2);
      spec.layers.push_back({channels, 9, Activation::ReLU});
      for (std::size_t i = 2; i < depth; ++i) spec.layers.push_back({mapped, 1, Activation::ReLU});
      spec.layers.push_back({1, 5, Activation::None});
      break;
    }
    case NetKind::NetD:
      for (std::size_t i = 1; i < depth; ++i) spec.layers.push_back({channels, 3, Activation::ReLU});
      spec.layers.push_back({1, 3, Activation::None});
      break;
    case NetKind::Custom:
      throw ValidationError("build_scaled needs a named network family");
  }
  return spec;
}

std::size_t Parameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& k : layers) n += k.parameter_count();
  return n;
}

bool Parameters::same_geometry(const Parameters& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].same_geometry(other.layers[i])) return false;
  }
  return true;
}

void axpy(double s, const Parameters& x, Parameters& y) {
  if (!x.same_geometry(y)) throw ValidationError("parameter geometries differ");
  for (std::size_t l = 0; l < x.layers.size(); ++l) {
    auto xw = x.layers[l].weights();
    auto yw = y.layers[l].weights();
    for (std::size_t i = 0; i < xw.size(); ++i) yw[i] += s * xw[i];
    auto xb = x.layers[l].bias();
    auto yb = y.layers[l].bias();
    for (std::size_t i = 0; i < xb.size(); ++i) yb[i] += s * xb[i];
  }
}

double squared_norm(const Parameters& p) {
  double acc = 0.0;
  p.for_each([&](double v) { acc += v * v; });
  return acc;
}

Parameters zero_parameters(const NetworkSpec& spec) {
  spec.validate();
  Parameters p;
  std::size_t in = spec.input_channels;
  for (const auto& l : spec.layers) {
    p.layers.emplace_back(l.out_channels, in, l.kernel_size, l.kernel_size);
    in = l.out_channels;
  }
  return p;
}

Parameters init_parameters(const NetworkSpec& spec, std::uint64_t seed) {
  Parameters p = zero_parameters(spec);
  std::mt19937_64 rng(seed);
  for (auto& k : p.layers) {
    const double fan_in = static_cast<double>(k.in_channels() * k.kernel_h() * k.kernel_w());
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (double& w : k.weights()) w = dist(rng);
  }
  return p;
}

void check_parameters(const NetworkSpec& spec, const Parameters& params) {
  spec.validate();
  if (params.layers.size() != spec.layers.size()) {
    throw ValidationError("parameters have " + std::to_string(params.layers.size()) +
                          " layers, spec has " + std::to_string(spec.layers.size()));
  }
  std::size_t in = spec.input_channels;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& k = params.layers[i];
    const auto& l = spec.layers[i];
    if (k.in_channels() != in || k.out_channels() != l.out_channels ||
        k.kernel_h() != l.kernel_size || k.kernel_w() != l.kernel_size) {
      throw ValidationError("parameters of layer " + std::to_string(i) +
                            " do not match the network spec");
    }
    in = l.out_channels;
  }
}

ForwardResult forward(const NetworkSpec& spec, const Parameters& params, const Tensor& input) {
  check_parameters(spec, params);
  if (input.channels() != spec.input_channels) {
    throw ValidationError("network expects " + std::to_string(spec.input_channels) +
                          " input channels, got " + std::to_string(input.channels()));
  }
  ForwardResult r;
  r.cache.input = input;
  r.cache.pre_activation.reserve(spec.layers.size());
  r.cache.post_activation.reserve(spec.layers.size());
  const Tensor* x = &input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    Tensor z = conv2d_forward(*x, params.layers[i]);
    Tensor a = spec.layers[i].activation == Activation::ReLU ? relu_forward(z) : z;
    r.cache.pre_activation.push_back(std::move(z));
    r.cache.post_activation.push_back(std::move(a));
    x = &r.cache.post_activation.back();
  }
  r.output = r.cache.post_activation.back();
  return r;
}

Tensor predict(const NetworkSpec& spec, const Parameters& params, const Tensor& input) {
  check_parameters(spec, params);
  if (input.channels() != spec.input_channels) {
    throw ValidationError("network expects " + std::to_string(spec.input_channels) +
                          " input channels, got " + std::to_string(input.channels()));
  }
  Tensor x = input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    x = conv2d_forward(x, params.layers[i]);
    if (spec.layers[i].activation == Activation::ReLU) x = relu_forward(x);
  }
  return x;
}

BackwardResult backward(const NetworkSpec& spec, const Parameters& params,
                        const ForwardCache& cache, const Tensor& grad_output,
                        bool want_input_grad) {
  check_parameters(spec, params);
  if (cache.pre_activation.size() != spec.layers.size() ||
      cache.post_activation.size() != spec.layers.size()) {
    throw ValidationError("forward cache does not belong to this network");
  }
  require_same_shape(grad_output, cache.post_activation.back(), "network backward");

  BackwardResult r;
  r.grads.layers.resize(spec.layers.size());
  Tensor grad = grad_output;
  for (std::size_t i = spec.layers.size(); i-- > 0;) {
    if (spec.layers[i].activation == Activation::ReLU) {
      grad = relu_backward(cache.pre_activation[i], grad);
    }
    const Tensor& layer_input = i == 0 ? cache.input : cache.post_activation[i - 1];
    const bool need_input = i > 0 || want_input_grad;
    ConvGradients g = conv2d_backward(layer_input, params.layers[i], grad, need_input);
    r.grads.layers[i] = std::move(g.kernel);
    grad = std::move(g.input);
  }
  if (want_input_grad) r.input_grad = std::move(grad);
  return r;
}

}  // namespace dualcnn
