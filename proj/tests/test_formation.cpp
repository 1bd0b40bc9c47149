#include <doctest.h>

#include <cmath>

#include "dualcnn/errors.hpp"
#include "dualcnn/formation.hpp"
#include "support.hpp"

using namespace dualcnn;
using testing::loss_oracle;
using testing::random_tensor;

namespace {

Tensor scalar(double v) { return Tensor(1, 1, 1, v); }

SampleTargets random_targets(FormationKind kind, Shape shape, std::mt19937_64& rng) {
  SampleTargets t;
  t.input = random_tensor(shape, rng, 0.0, 1.0);
  t.structure = random_tensor(shape, rng, 0.0, 1.0);
  if (kind == FormationKind::AirLight) {
    t.detail = random_tensor(shape, rng, 0.05, 1.0);
    t.clear = random_tensor(shape, rng, 0.0, 1.0);
  } else {
    t.detail = random_tensor(shape, rng, -0.5, 0.5);
  }
  t.label = random_tensor(shape, rng, 0.0, 1.0);
  return t;
}

FormationModel model_of(FormationKind kind) {
  return kind == FormationKind::AirLight ? FormationModel::airlight() : FormationModel::identity();
}

}  // namespace

TEST_CASE("compose examples") {
  SampleTargets t;
  CHECK(compose(FormationModel::identity(), scalar(0.5), scalar(0.1), t)[0] ==
        doctest::Approx(0.6).epsilon(1e-15));
  t.clear = scalar(0.8);
  const auto air = FormationModel::airlight();
  CHECK(compose(air, scalar(1.0), scalar(0.5), t)[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(compose(air, scalar(0.3), scalar(1.0), t)[0] == 0.8);
  CHECK(compose(air, scalar(0.3), scalar(0.0), t)[0] == 0.3);

  SampleTargets no_j;
  CHECK_THROWS_AS(compose(air, scalar(1.0), scalar(0.5), no_j), ValidationError);
  CHECK_THROWS_AS(compose(FormationModel::identity(), Tensor(1, 1, 2), scalar(0.1), t),
                  ValidationError);
}

TEST_CASE("reconstruct examples") {
  const auto air = FormationModel::airlight(0.1);
  CHECK(reconstruct(air, scalar(1.0), scalar(0.5), scalar(0.9))[0] ==
        doctest::Approx(0.8).epsilon(1e-15));
  // Clamped divisor: (0.5 - 1.0) / 0.1 + 1.0 = -4.0, not (0.5 - 1.0) / 0.01 + 1.0.
  CHECK(reconstruct(air, scalar(1.0), scalar(0.01), scalar(0.5))[0] ==
        doctest::Approx(-4.0).epsilon(1e-14));
  CHECK(reconstruct(FormationModel::identity(), scalar(0.3), scalar(-0.1), Tensor())[0] ==
        doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("formation model validation") {
  CHECK_THROWS_AS(FormationModel::airlight(0.0).validate(), ValidationError);
  CHECK_THROWS_AS(FormationModel::airlight(1.5).validate(), ValidationError);
  CHECK_NOTHROW(FormationModel::airlight(1.0).validate());
  CHECK(formation_for(Task::Dehazing).kind == FormationKind::AirLight);
  CHECK(formation_for(Task::Deraining).kind == FormationKind::Identity);
}

TEST_CASE("task weights") {
  CHECK(task_weights(Task::SuperResolution) == LossWeights{1.0, 0.001, 0.01});
  CHECK(task_weights(Task::Filtering) == LossWeights{1.0, 1e-4, 0.0});
  CHECK(task_weights(Task::Deraining) == LossWeights{1.0, 0.01, 0.0});
  CHECK(task_weights(Task::Dehazing) == LossWeights{0.1, 0.9, 0.9});
  CHECK_THROWS_AS((LossWeights{0, 0, 0}.validate()), ValidationError);
  CHECK_THROWS_AS((LossWeights{-1, 0, 1}.validate()), ValidationError);
  CHECK(task_from_string("dehazing") == Task::Dehazing);
  CHECK_THROWS_AS(task_from_string("denoise"), ValidationError);
}

TEST_CASE("perfect prediction has zero loss and zero gradient") {
  std::mt19937_64 rng(1);
  SampleTargets t;
  t.structure = random_tensor({1, 4, 4}, rng);
  t.detail = random_tensor({1, 4, 4}, rng);
  t.label = add(t.structure, t.detail);
  const auto id = FormationModel::identity();
  const LossWeights w{1, 0.5, 0.5};
  const auto l = loss(id, w, t.structure, t.detail, t);
  CHECK(l.total == 0.0);
  CHECK(l.composition == 0.0);
  CHECK(l.structure == 0.0);
  CHECK(l.detail == 0.0);
  const auto g = loss_gradients(id, w, t.structure, t.detail, t);
  CHECK(g.d_structure.max() == 0.0);
  CHECK(g.d_structure.min() == 0.0);
  CHECK(g.d_detail.max() == 0.0);
  CHECK(g.d_detail.min() == 0.0);
}

TEST_CASE("loss matches the scalar re-evaluation and decomposes exactly") {
  for (auto kind : {FormationKind::Identity, FormationKind::AirLight}) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      std::mt19937_64 rng(seed);
      const Shape shape{1, 5, 6};
      const auto t = random_targets(kind, shape, rng);
      const Tensor S = random_tensor(shape, rng, 0.0, 1.0);
      const Tensor D = random_tensor(shape, rng, 0.0, 1.0);
      std::uniform_real_distribution<double> uw(0.0, 2.0);
      const LossWeights w{uw(rng), uw(rng), uw(rng)};
      const auto l = loss(model_of(kind), w, S, D, t);
      CHECK(std::abs(l.total - loss_oracle(kind, w, S, D, t)) < 1e-12);
      CHECK(std::abs(l.total - (w.alpha * l.composition + w.lambda * l.structure +
                                w.gamma * l.detail)) < 1e-12);
      CHECK(l.composition >= 0.0);
      CHECK(l.structure >= 0.0);
      CHECK(l.detail >= 0.0);
      CHECK(l.residual.shape() == shape);
    }
  }
  SampleTargets t;
  t.label = t.structure = t.detail = Tensor(1, 2, 2, 1.0);
  const auto l = loss(FormationModel::identity(), {1, 0, 0}, Tensor(1, 2, 2), Tensor(1, 2, 2), t);
  CHECK(l.total == l.composition);
}

TEST_CASE("loss gradients match finite differences") {
  // The loss is quadratic in any single entry, so a wide step has no truncation error.
  const double h = 1e-2;
  double worst = 0.0;
  for (auto kind : {FormationKind::Identity, FormationKind::AirLight}) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      std::mt19937_64 rng(seed * 31 + 7);
      const Shape shape{1, 4, 5};
      const auto t = random_targets(kind, shape, rng);
      Tensor S = random_tensor(shape, rng, 0.0, 1.0);
      Tensor D = random_tensor(shape, rng, 0.0, 1.0);
      std::uniform_real_distribution<double> uw(0.05, 1.0);
      const LossWeights w{uw(rng), uw(rng), uw(rng)};
      const auto m = model_of(kind);
      const auto g = loss_gradients(m, w, S, D, t);
      for (int which = 0; which < 2; ++which) {
        Tensor& x = which == 0 ? S : D;
        const Tensor& analytic = which == 0 ? g.d_structure : g.d_detail;
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double s = x[i];
          x[i] = s + h;
          const double up = loss(m, w, S, D, t).total;
          x[i] = s - h;
          const double dn = loss(m, w, S, D, t).total;
          x[i] = s;
          const double num = (up - dn) / (2 * h);
          const double rel = std::abs(analytic[i] - num) /
                             std::max({std::abs(analytic[i]), std::abs(num), 1e-6});
          worst = std::max(worst, rel);
        }
      }
    }
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("pure regularizer pull when alpha is zero") {
  std::mt19937_64 rng(4);
  const Shape shape{1, 3, 3};
  const auto t = random_targets(FormationKind::Identity, shape, rng);
  const Tensor S = random_tensor(shape, rng), D = random_tensor(shape, rng);
  const auto g = loss_gradients(FormationModel::identity(), {0.0, 0.7, 0.0}, S, D, t);
  for (std::size_t i = 0; i < S.size(); ++i) {
    CHECK(g.d_structure[i] == doctest::Approx(2 * 0.7 * (S[i] - t.structure[i]) / 9.0));
    CHECK(g.d_detail[i] == 0.0);
  }
}

TEST_CASE("identity loss is symmetric in the two branches when lambda equals gamma") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Shape shape{1, 4, 4};
    auto t = random_targets(FormationKind::Identity, shape, rng);
    const Tensor S = random_tensor(shape, rng), D = random_tensor(shape, rng);
    const LossWeights w{1.0, 0.3, 0.3};
    const double a = loss(FormationModel::identity(), w, S, D, t).total;
    std::swap(t.structure, t.detail);
    const double b = loss(FormationModel::identity(), w, D, S, t).total;
    CHECK(std::abs(a - b) < 1e-12);
  }
}

TEST_CASE("air-light round trip") {
  std::mt19937_64 rng(99);
  const auto air = FormationModel::airlight(0.1);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Shape shape{1, 3, 4};
    SampleTargets t;
    t.clear = random_tensor(shape, rng, 0.0, 1.0);
    const Tensor S = random_tensor(shape, rng, 0.0, 1.0);
    const Tensor D = random_tensor(shape, rng, 0.1, 1.0);
    const Tensor I = compose(air, S, D, t);
    worst = std::max(worst, testing::max_abs_diff(reconstruct(air, S, D, I), t.clear));
  }
  CHECK(worst <= 1e-12);
}
