#pragma once

#include <string>

#include "dualcnn/tensor.hpp"

namespace dualcnn {

enum class Task { SuperResolution, Filtering, Deraining, Dehazing };

std::string to_string(Task task);
Task task_from_string(const std::string& name);

enum class FormationKind { Identity, AirLight };

/// How structure S and detail D compose into the target signal.
///  Identity:  X = S + D
///  AirLight:  I = J*D + S*(1 - D), inverted at test time with a floor d0 on D.
struct FormationModel {
  FormationKind kind = FormationKind::Identity;
  double d0 = 0.1;

  static FormationModel identity() { return {}; }
  static FormationModel airlight(double d0 = 0.1);
  void validate() const;

  bool operator==(const FormationModel&) const = default;
};

/// Dehazing uses the air-light model; every other task composes additively.
FormationModel formation_for(Task task, double d0 = 0.1);

struct LossWeights {
  double alpha = 1.0;
  double lambda = 0.0;
  double gamma = 0.0;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

/// Per-task (alpha, lambda, gamma) used for the reference experiments.
LossWeights task_weights(Task task);

/// Targets for one training sample. `label` is X in the composition loss; for
/// dehazing it is the hazy observation itself. `clear` (J) is only used by the
/// air-light model.
struct SampleTargets {
  Tensor input;      // I, the network input
  Tensor label;      // X
  Tensor structure;  // S_gt (air-light map when dehazing)
  Tensor detail;     // D_gt (transmission when dehazing)
  Tensor clear;      // J; empty for Identity tasks

  /// The image a restoration result should be scored against.
  const Tensor& ground_truth(FormationKind kind) const {
    return kind == FormationKind::AirLight ? clear : label;
  }
};

struct LossBreakdown {
  double total = 0.0;
  double composition = 0.0;  // mean E^2
  double structure = 0.0;    // mean (S - S_gt)^2
  double detail = 0.0;       // mean (D - D_gt)^2
  Tensor residual;           // E = phi(S) + varphi(D) - X
};

struct LossGradients {
  Tensor d_structure;
  Tensor d_detail;
};

/// Identity: S + D. AirLight: J*D + S*(1 - D).
Tensor compose(const FormationModel& model, const Tensor& structure, const Tensor& detail,
               const SampleTargets& targets);

LossBreakdown loss(const FormationModel& model, const LossWeights& weights,
                   const Tensor& structure, const Tensor& detail, const SampleTargets& targets);

/// dL/dS and dL/dD of loss(...).total. All terms are element means, so every
/// factor carries 1/N.
LossGradients loss_gradients(const FormationModel& model, const LossWeights& weights,
                             const Tensor& structure, const Tensor& detail,
                             const SampleTargets& targets);

/// Test-time output. Identity: S + D. AirLight: (I - S) / max(D, d0) + S.
/// `observation` is only read by the air-light model.
Tensor reconstruct(const FormationModel& model, const Tensor& structure, const Tensor& detail,
                   const Tensor& observation);

}  // namespace dualcnn
