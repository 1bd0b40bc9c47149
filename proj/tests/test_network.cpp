#include <doctest.h>

#include <cmath>

#include "dualcnn/errors.hpp"
#include "dualcnn/network.hpp"
#include "dualcnn/trainer.hpp"
#include "support.hpp"

using namespace dualcnn;
using testing::random_tensor;

namespace {

std::vector<std::size_t> kernel_sizes(const NetworkSpec& s) {
  std::vector<std::size_t> out;
  for (const auto& l : s.layers) out.push_back(l.kernel_size);
  return out;
}

std::vector<std::size_t> depths(const NetworkSpec& s) {
  std::vector<std::size_t> out;
  for (const auto& l : s.layers) out.push_back(l.out_channels);
  return out;
}

double min_relu_margin(const NetworkSpec& spec, const ForwardCache& cache) {
  double m = INFINITY;
  for (std::size_t i = 0; i < spec.layers.size(); ++i)
    if (spec.layers[i].activation == Activation::ReLU)
      for (double v : cache.pre_activation[i].data()) m = std::min(m, std::abs(v));
  return m;
}

// Independent forward pass in extended precision, returning sum(g * net(x)).
// Layer l, entry i of the flattened weights-then-bias vector is shifted by delta.
using Wide = std::vector<std::vector<long double>>;

long double wide_objective(const NetworkSpec& spec, const Wide& params,
                           std::vector<long double> cur, const Tensor& g) {
  const std::size_t h = g.height(), w = g.width();
  std::size_t in_c = spec.input_channels;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& ls = spec.layers[l];
    const std::size_t k = ls.kernel_size, r = k / 2, out_c = ls.out_channels;
    const auto& p = params[l];
    const long double* bias = p.data() + out_c * in_c * k * k;
    std::vector<long double> next(out_c * h * w);
    for (std::size_t o = 0; o < out_c; ++o)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx) {
          long double acc = bias[o];
          for (std::size_t c = 0; c < in_c; ++c)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long sy = long(y + ky) - long(r), sx = long(xx + kx) - long(r);
                if (sy < 0 || sx < 0 || sy >= long(h) || sx >= long(w)) continue;
                acc += p[((o * in_c + c) * k + ky) * k + kx] * cur[(c * h + sy) * w + sx];
              }
          if (ls.activation == Activation::ReLU && acc < 0) acc = 0;
          next[(o * h + y) * w + xx] = acc;
        }
    cur = std::move(next);
    in_c = out_c;
  }
  long double sum = 0;
  for (std::size_t i = 0; i < cur.size(); ++i) sum += cur[i] * g[i];
  return sum;
}

std::vector<long double> widen(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Wide widen(const Parameters& p) {
  Wide out;
  for (const auto& k : p.layers) {
    std::vector<long double> v(k.weights().begin(), k.weights().end());
    v.insert(v.end(), k.bias().begin(), k.bias().end());
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

TEST_CASE("Net-S layer table") {
  const auto s = build_net_s();
  CHECK(s.input_channels == 1);
  CHECK(kernel_sizes(s) == std::vector<std::size_t>{9, 1, 5});
  CHECK(depths(s) == std::vector<std::size_t>{64, 32, 1});
  CHECK(s.layers[0].activation == Activation::ReLU);
  CHECK(s.layers[1].activation == Activation::ReLU);
  CHECK(s.layers[2].activation == Activation::None);
  CHECK(s.parameter_count() == 9 * 9 * 1 * 64 + 64 + 1 * 1 * 64 * 32 + 32 + 5 * 5 * 32 * 1 + 1);
  CHECK(init_parameters(s, 1).parameter_count() == s.parameter_count());
}

TEST_CASE("Net-D layer table") {
  const auto d = build_net_d();
  REQUIRE(d.layers.size() == 20);
  for (std::size_t i = 0; i < 19; ++i) {
    CHECK(d.layers[i].kernel_size == 3);
    CHECK(d.layers[i].out_channels == 64);
    CHECK(d.layers[i].activation == Activation::ReLU);
  }
  CHECK(d.layers[19].kernel_size == 3);
  CHECK(d.layers[19].out_channels == 1);
  CHECK(d.layers[19].activation == Activation::None);
  CHECK(d.parameter_count() ==
        3 * 3 * 1 * 64 + 64 + 18 * (3 * 3 * 64 * 64 + 64) + 3 * 3 * 64 * 1 + 1);
}

TEST_CASE("scaled families") {
  const auto d = build_scaled(NetKind::NetD, 8, 5);
  CHECK(depths(d) == std::vector<std::size_t>{8, 8, 8, 8, 1});
  CHECK(kernel_sizes(d) == std::vector<std::size_t>{3, 3, 3, 3, 3});
  CHECK(d.layers.back().activation == Activation::None);
  const auto s = build_scaled(NetKind::NetS, 8, 3);
  CHECK(depths(s) == std::vector<std::size_t>{8, 4, 1});
  CHECK(build_scaled(NetKind::NetS, 8, 1).layers.size() == 1);
  CHECK(build_scaled(NetKind::NetD, 8, 1).layers.size() == 1);
  CHECK(build_scaled(NetKind::NetS, 64, 3) == build_net_s());
  CHECK(build_scaled(NetKind::NetD, 64, 20) == build_net_d());
  CHECK_THROWS_AS(build_scaled(NetKind::NetD, 0, 3), ValidationError);
  CHECK_THROWS_AS(build_scaled(NetKind::NetD, 4, 0), ValidationError);
}

TEST_CASE("malformed layer tables are rejected") {
  NetworkSpec bad{NetKind::Custom, 1, {}};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.layers = {{1, 4, Activation::None}};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("initialization statistics and determinism") {
  const auto d = build_net_d();
  const auto a = init_parameters(d, 42);
  CHECK(a == init_parameters(d, 42));
  CHECK_FALSE(a == init_parameters(d, 43));
  for (std::size_t i = 0; i < d.layers.size(); ++i) {
    const auto& k = a.layers[i];
    for (double b : k.bias()) CHECK(b == 0.0);
    const auto w = k.weights();
    if (w.size() < 1000) continue;
    double sum = 0, sq = 0;
    for (double v : w) sum += v;
    const double mean = sum / w.size();
    for (double v : w) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / (w.size() - 1));
    const double expected = std::sqrt(2.0 / (k.in_channels() * k.kernel_h() * k.kernel_w()));
    CHECK(std::abs(sd / expected - 1.0) < 0.2);
  }
}

TEST_CASE("forward basics") {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({1, 9, 11}, rng);
  const auto s = build_net_s();
  CHECK(predict(s, zero_parameters(s), x).max() == 0.0);
  CHECK(predict(s, zero_parameters(s), x).min() == 0.0);

  NetworkSpec ident{NetKind::Custom, 1, {{1, 3, Activation::None}}};
  auto p = zero_parameters(ident);
  p.layers[0].weight(0, 0, 1, 1) = 1.0;
  CHECK(predict(ident, p, x) == x);

  const auto d = build_scaled(NetKind::NetD, 4, 4);
  const auto out = forward(d, init_parameters(d, 3), x);
  CHECK(out.output.height() == 9);
  CHECK(out.output.width() == 11);
  CHECK(out.cache.pre_activation.size() == 4);
  CHECK_THROWS_AS(forward(d, init_parameters(d, 3), Tensor(2, 4, 4)), ValidationError);
}

TEST_CASE("detail branch output can be negative") {
  const auto d = build_scaled(NetKind::NetD, 8, 3);
  std::mt19937_64 rng(2);
  const Tensor out = predict(d, init_parameters(d, 9), random_tensor({1, 8, 8}, rng, 0.0, 1.0));
  CHECK(out.min() < 0.0);
}

TEST_CASE("forward is deterministic and preserves size") {
  std::mt19937_64 rng(4);
  for (std::size_t depth = 1; depth <= 5; ++depth) {
    for (auto kind : {NetKind::NetS, NetKind::NetD}) {
      const auto spec = build_scaled(kind, 3, depth);
      const auto p = init_parameters(spec, depth);
      const Tensor x = random_tensor({1, 6, 7}, rng);
      const Tensor y = predict(spec, p, x);
      CHECK(y.height() == 6);
      CHECK(y.width() == 7);
      CHECK(y == predict(spec, p, x));
    }
  }
}

TEST_CASE("backward edge cases") {
  const auto spec = build_scaled(NetKind::NetD, 3, 3);
  const auto p = init_parameters(spec, 1);
  std::mt19937_64 rng(6);
  const auto fw = forward(spec, p, random_tensor({1, 5, 5}, rng));
  const auto zero = backward(spec, p, fw.cache, Tensor(1, 5, 5));
  CHECK(squared_norm(zero.grads) == 0.0);
  CHECK_THROWS_AS(backward(spec, p, fw.cache, Tensor(1, 5, 4)), ValidationError);

  NetworkSpec lin{NetKind::Custom, 1, {{2, 3, Activation::None}}};
  const auto lp = init_parameters(lin, 2);
  const auto lf = forward(lin, lp, random_tensor({1, 5, 5}, rng));
  const Tensor g = random_tensor({2, 5, 5}, rng);
  const auto lb = backward(lin, lp, lf.cache, g);
  for (std::size_t o = 0; o < 2; ++o) {
    double sum = 0.0;
    for (double v : g.channel(o)) sum += v;
    CHECK(lb.grads.layers[0].bias()[o] == doctest::Approx(sum).epsilon(1e-14));
  }
}

TEST_CASE("network gradients match finite differences away from kinks") {
  const double h = 1e-6;
  int checked = 0;
  for (std::size_t depth = 1; depth <= 5; ++depth) {
    for (auto kind : {NetKind::NetS, NetKind::NetD}) {
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto spec = build_scaled(kind, 3, depth);
        auto p = init_parameters(spec, seed);
        std::mt19937_64 rng(seed + 100);
        std::uniform_real_distribution<double> ub(-0.1, 0.1);
        for (auto& k : p.layers)
          for (double& b : k.bias()) b = ub(rng);
        const std::size_t side = 5 + seed % 3;
        const Tensor x = random_tensor({1, side, side}, rng);
        const Tensor g = random_tensor({1, side, side}, rng);
        const auto fw = forward(spec, p, x);
        if (min_relu_margin(spec, fw.cache) <= 1e-4) continue;
        const auto bw = backward(spec, p, fw.cache, g, true);

        double worst = 0.0;
        Wide wide = widen(p);
        const auto wide_x = widen(x);
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
          std::vector<double> analytic(bw.grads.layers[l].weights().begin(),
                                       bw.grads.layers[l].weights().end());
          analytic.insert(analytic.end(), bw.grads.layers[l].bias().begin(),
                          bw.grads.layers[l].bias().end());
          for (std::size_t i = 0; i < wide[l].size(); ++i) {
            const long double s = wide[l][i];
            wide[l][i] = s + h;
            const long double up = wide_objective(spec, wide, wide_x, g);
            wide[l][i] = s - h;
            const long double dn = wide_objective(spec, wide, wide_x, g);
            wide[l][i] = s;
            worst = std::max(worst, relative_error(analytic[i], double((up - dn) / (2 * h))));
          }
        }
        // Directional derivative with respect to the input.
        const Tensor dir = random_tensor(x.shape(), rng);
        auto xp = wide_x, xm = wide_x;
        for (std::size_t i = 0; i < xp.size(); ++i) {
          xp[i] += h * (long double)dir[i];
          xm[i] -= h * (long double)dir[i];
        }
        const long double num =
            (wide_objective(spec, wide, xp, g) - wide_objective(spec, wide, xm, g)) / (2 * h);
        worst = std::max(worst, relative_error(dot(bw.input_grad, dir), double(num)));
        // The wide pass agrees with the production forward.
        CHECK(std::abs(double(wide_objective(spec, wide, wide_x, g)) - dot(fw.output, g)) < 1e-12);
        CHECK(worst < 1e-6);
        ++checked;
      }
    }
  }
  CHECK(checked >= 100);
}

TEST_CASE("parameter helpers") {
  const auto spec = build_scaled(NetKind::NetS, 2, 3);
  auto a = init_parameters(spec, 1);
  const auto b = init_parameters(spec, 2);
  auto c = a;
  axpy(-1.0, a, c);
  CHECK(squared_norm(c) == 0.0);
  CHECK(a.same_geometry(b));
  CHECK_NOTHROW(check_parameters(spec, a));
  CHECK_THROWS_AS(check_parameters(build_scaled(NetKind::NetS, 3, 3), a), ValidationError);
}
