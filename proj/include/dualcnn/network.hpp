#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dualcnn/tensor.hpp"

namespace dualcnn {

enum class Activation { ReLU, None };

struct LayerSpec {
  std::size_t out_channels = 1;
  std::size_t kernel_size = 3;
  Activation activation = Activation::ReLU;

  bool operator==(const LayerSpec&) const = default;
};

/// Which topology family a branch belongs to. Custom specs are allowed but
/// only the two named families have builders.
enum class NetKind { NetS, NetD, Custom };

std::string to_string(NetKind kind);
NetKind net_kind_from_string(const std::string& name);

struct NetworkSpec {
  NetKind kind = NetKind::Custom;
  std::size_t input_channels = 1;
  std::vector<LayerSpec> layers;

  std::size_t output_channels() const { return layers.back().out_channels; }
  std::size_t max_kernel_size() const;
  std::size_t parameter_count() const;
  /// Throws ValidationError unless the layer list is non-empty with odd kernels.
  void validate() const;

  bool operator==(const NetworkSpec&) const = default;
};

/// Structure branch: 9x9/64, 1x1/32, 5x5/1 with ReLU on the hidden layers.
NetworkSpec build_net_s();

/// Detail branch: twenty 3x3 layers, 64 wide, the last one a linear 1-channel head.
NetworkSpec build_net_d();

/// Reduced member of a topology family. `channels` is the first hidden
/// width (64 for the full-size nets); Net-S keeps its width/2 second layer.
/// Depth 1 collapses to a single linear conv.
NetworkSpec build_scaled(NetKind kind, std::size_t channels, std::size_t depth);

/// One conv kernel per layer, matching a NetworkSpec.
struct Parameters {
  std::vector<ConvKernel> layers;

  std::size_t parameter_count() const;
  bool same_geometry(const Parameters& other) const;

  /// Visit every weight and bias in a fixed order (layer, weights, bias).
  template <class F>
  void for_each(F&& f) {
    for (auto& k : layers) {
      for (double& w : k.weights()) f(w);
      for (double& b : k.bias()) f(b);
    }
  }
  template <class F>
  void for_each(F&& f) const {
    for (const auto& k : layers) {
      for (double w : k.weights()) f(w);
      for (double b : k.bias()) f(b);
    }
  }

  bool operator==(const Parameters&) const = default;
};

/// y += s * x over every weight and bias; geometries must match.
void axpy(double s, const Parameters& x, Parameters& y);

/// Sum of squares of every weight and bias.
double squared_norm(const Parameters& p);

/// All-zero parameters shaped for `spec`.
Parameters zero_parameters(const NetworkSpec& spec);

/// He-style Gaussian init, std sqrt(2 / (in_channels * k^2)); zero biases.
Parameters init_parameters(const NetworkSpec& spec, std::uint64_t seed);

/// Throws ValidationError if `params` cannot drive `spec`.
void check_parameters(const NetworkSpec& spec, const Parameters& params);

struct ForwardCache {
  Tensor input;
  std::vector<Tensor> pre_activation;   // conv outputs
  std::vector<Tensor> post_activation;  // layer outputs; last one is the network output
};

struct ForwardResult {
  Tensor output;
  ForwardCache cache;
};

struct BackwardResult {
  Parameters grads;
  Tensor input_grad;  // empty unless requested
};

ForwardResult forward(const NetworkSpec& spec, const Parameters& params, const Tensor& input);

/// Output only, without keeping activations around.
Tensor predict(const NetworkSpec& spec, const Parameters& params, const Tensor& input);

/// Gradient of sum(grad_output * output) with respect to every parameter,
/// and optionally with respect to the network input.
BackwardResult backward(const NetworkSpec& spec, const Parameters& params,
                        const ForwardCache& cache, const Tensor& grad_output,
                        bool want_input_grad = false);

}  // namespace dualcnn
