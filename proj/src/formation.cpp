#include "dualcnn/formation.hpp"

#include <algorithm>
#include <cmath>

#include "dualcnn/errors.hpp"

namespace dualcnn {

std::string to_string(Task task) {
  switch (task) {
    case Task::SuperResolution: return "super_resolution";
    case Task::Filtering: return "filtering";
    case Task::Deraining: return "deraining";
    case Task::Dehazing: return "dehazing";
  }
  return "filtering";
}

Task task_from_string(const std::string& name) {
  if (name == "super_resolution" || name == "sr") return Task::SuperResolution;
  if (name == "filtering") return Task::Filtering;
  if (name == "deraining") return Task::Deraining;
  if (name == "dehazing") return Task::Dehazing;
  throw ValidationError("unknown task '" + name +
                        "' (expected super_resolution, filtering, deraining or dehazing)");
}

FormationModel FormationModel::airlight(double d0) {
  FormationModel m{FormationKind::AirLight, d0};
  m.validate();
  return m;
}

void FormationModel::validate() const {
  if (!(d0 > 0.0 && d0 <= 1.0)) {
    throw ValidationError("d0 must lie in (0, 1], got " + std::to_string(d0));
  }
}

FormationModel formation_for(Task task, double d0) {
  return task == Task::Dehazing ? FormationModel::airlight(d0)
                                : FormationModel{FormationKind::Identity, d0};
}

void LossWeights::validate() const {
  if (alpha < 0.0 || lambda < 0.0 || gamma < 0.0 || !std::isfinite(alpha) ||
      !std::isfinite(lambda) || !std::isfinite(gamma)) {
    throw ValidationError("loss weights must be finite and non-negative");
  }
  if (alpha == 0.0 && lambda == 0.0 && gamma == 0.0) {
    throw ValidationError("at least one loss weight must be positive");
  }
}

LossWeights task_weights(Task task) {
  switch (task) {
    case Task::SuperResolution: return {1.0, 0.001, 0.01};
    case Task::Filtering: return {1.0, 1e-4, 0.0};
    case Task::Deraining: return {1.0, 0.01, 0.0};
    case Task::Dehazing: return {0.1, 0.9, 0.9};
  }
  return {};
}

namespace {

void check_inputs(const FormationModel& model, const Tensor& s, const Tensor& d,
                  const SampleTargets& t, bool need_label) {
  require_same_shape(s, d, "structure/detail");
  if (model.kind == FormationKind::AirLight) {
    if (t.clear.empty()) throw ValidationError("air-light model needs the clear image J");
    require_same_shape(s, t.clear, "structure/clear image");
  }
  if (need_label) {
    require_same_shape(s, t.label, "structure/label");
    require_same_shape(s, t.structure, "structure/structure target");
    require_same_shape(d, t.detail, "detail/detail target");
  }
}

double mean_square(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc / static_cast<double>(v.size());
}

}  // namespace

Tensor compose(const FormationModel& model, const Tensor& structure, const Tensor& detail,
               const SampleTargets& targets) {
  check_inputs(model, structure, detail, targets, false);
  if (model.kind == FormationKind::Identity) return add(structure, detail);

  Tensor out(structure.shape());
  auto s = structure.data();
  auto d = detail.data();
  auto j = targets.clear.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = j[i] * d[i] + s[i] * (1.0 - d[i]);
  return out;
}

LossBreakdown loss(const FormationModel& model, const LossWeights& weights,
                   const Tensor& structure, const Tensor& detail, const SampleTargets& targets) {
  check_inputs(model, structure, detail, targets, true);
  LossBreakdown b;
  b.residual = sub(compose(model, structure, detail, targets), targets.label);
  b.composition = mean_square(b.residual.data());
  b.structure = mean_square(sub(structure, targets.structure).data());
  b.detail = mean_square(sub(detail, targets.detail).data());
  b.total = weights.alpha * b.composition + weights.lambda * b.structure +
            weights.gamma * b.detail;
  return b;
}

LossGradients loss_gradients(const FormationModel& model, const LossWeights& weights,
                             const Tensor& structure, const Tensor& detail,
                             const SampleTargets& targets) {
  check_inputs(model, structure, detail, targets, true);
  const Tensor residual = sub(compose(model, structure, detail, targets), targets.label);
  const double n = static_cast<double>(structure.size());
  const double ca = 2.0 * weights.alpha / n;
  const double cl = 2.0 * weights.lambda / n;
  const double cg = 2.0 * weights.gamma / n;

  LossGradients g{Tensor(structure.shape()), Tensor(detail.shape())};
  auto e = residual.data();
  auto s = structure.data();
  auto d = detail.data();
  auto sg = targets.structure.data();
  auto dg = targets.detail.data();
  auto gs = g.d_structure.data();
  auto gd = g.d_detail.data();

  if (model.kind == FormationKind::Identity) {
    for (std::size_t i = 0; i < e.size(); ++i) {
      gs[i] = ca * e[i] + cl * (s[i] - sg[i]);
      gd[i] = ca * e[i] + cg * (d[i] - dg[i]);
    }
  } else {
    // Partials of J*D + S*(1-D): d/dS = 1 - D, d/dD = J - S.
    auto j = targets.clear.data();
    for (std::size_t i = 0; i < e.size(); ++i) {
      gs[i] = ca * (1.0 - d[i]) * e[i] + cl * (s[i] - sg[i]);
      gd[i] = ca * (j[i] - s[i]) * e[i] + cg * (d[i] - dg[i]);
    }
  }
  return g;
}

Tensor reconstruct(const FormationModel& model, const Tensor& structure, const Tensor& detail,
                   const Tensor& observation) {
  require_same_shape(structure, detail, "structure/detail");
  if (model.kind == FormationKind::Identity) return add(structure, detail);

  model.validate();
  require_same_shape(structure, observation, "structure/observation");
  Tensor out(structure.shape());
  auto s = structure.data();
  auto d = detail.data();
  auto obs = observation.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = (obs[i] - s[i]) / std::max(d[i], model.d0) + s[i];
  }
  return out;
}

}  // namespace dualcnn
