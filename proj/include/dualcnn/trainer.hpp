#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dualcnn/datagen.hpp"
#include "dualcnn/formation.hpp"
#include "dualcnn/metrics.hpp"
#include "dualcnn/model.hpp"

namespace dualcnn {

struct BranchConfig {
  std::size_t channels = 64;
  std::size_t depth = 3;

  bool operator==(const BranchConfig&) const = default;
};

struct TrainConfig {
  Task task = Task::Filtering;
  LossWeights weights = task_weights(Task::Filtering);
  double learning_rate = 1e-4;
  std::size_t batch_size = 64;
  std::size_t iterations = 1;
  std::uint64_t seed = 0;
  BranchConfig net_s{64, 3};
  BranchConfig net_d{64, 20};
  std::size_t checkpoint_interval = 0;  // 0: final checkpoint only
  std::optional<double> gradient_clip;
  Architecture architecture = Architecture::Dual;
  double d0 = 0.1;
  std::size_t threads = 1;   // 0: one per hardware thread
  bool log_elapsed = false;  // wall-clock column; false keeps logs reproducible

  void validate() const;
  FormationModel formation() const { return formation_for(task, d0); }
  bool operator==(const TrainConfig&) const = default;
};

/// Branch specs for a config: Net-S / Net-D families at the configured size.
NetworkSpec net_s_spec(const TrainConfig& config);
NetworkSpec net_d_spec(const TrainConfig& config);

DualModel initial_model(const TrainConfig& config);

struct BranchOutputs {
  Tensor structure;
  Tensor detail;
  ForwardCache cache_s;
  ForwardCache cache_d;
};

BranchOutputs run_branches(const DualModel& model, const Tensor& input);

struct ModelGradients {
  Parameters s;
  Parameters d;
};

ModelGradients zero_gradients(const DualModel& model);
double global_norm(const ModelGradients& g);

struct SampleEvaluation {
  LossBreakdown loss;
  ModelGradients grads;
};

/// Forward, loss and full backprop for one sample.
SampleEvaluation evaluate_sample(const DualModel& model, const LossWeights& weights,
                                 const SampleTargets& sample);

/// Batch-mean loss of `model` (no gradients).
double batch_loss(const DualModel& model, const LossWeights& weights,
                  std::span<const SampleTargets> batch);

struct BatchEvaluation {
  LossBreakdown loss;  // batch means; residual left empty
  ModelGradients grads;
};

/// Mean loss and mean gradients over a batch. Samples are reduced in a fixed
/// order independent of `threads`, so results are bitwise reproducible.
BatchEvaluation evaluate_batch(const DualModel& model, const LossWeights& weights,
                               std::span<const SampleTargets> batch, std::size_t threads = 1);

/// Scales every gradient so their joint L2 norm is at most `max_norm`.
/// Returns the factor applied (1 when already within bounds).
double clip_global_norm(std::span<Parameters* const> grads, double max_norm);

/// w <- w - lr * g, after optional global-norm clipping of `grads`.
Parameters sgd_step(const Parameters& params, const Parameters& grads, double learning_rate,
                    std::optional<double> clip = std::nullopt);

struct StepResult {
  DualModel model;
  LossBreakdown loss;
};

struct StepOptions {
  double learning_rate = 1e-4;
  std::optional<double> gradient_clip;
  std::size_t threads = 1;
};

/// One SGD step on both branches; the joint gradient norm is clipped when requested.
StepResult train_step(const DualModel& model, std::span<const SampleTargets> batch,
                      const LossWeights& weights, const StepOptions& options);

struct TrainLogEntry {
  std::uint64_t iteration = 0;
  double total = 0.0;
  double composition = 0.0;
  double structure = 0.0;
  double detail = 0.0;
  double elapsed = 0.0;
};

/// Tab-separated: iteration, L, L_x, L_s, L_d, elapsed seconds.
std::string format_log_line(const TrainLogEntry& entry);

struct TrainOutputs {
  std::filesystem::path checkpoint;  // empty: keep in memory only
  std::filesystem::path log;
};

struct TrainResult {
  DualModel model;
  std::vector<TrainLogEntry> log;
  std::vector<std::filesystem::path> checkpoints;
};

using TrainCallback = std::function<void(const TrainLogEntry&)>;

/// Minibatch SGD over a fixed dataset. Batches are drawn from seeded shuffles
/// of the dataset; a batch at least as large as the dataset is the whole set.
TrainResult train(const TrainConfig& config, std::span<const SampleTargets> dataset,
                  const TrainOutputs& outputs = {}, const TrainCallback& on_entry = {});

TrainResult train(const TrainConfig& config, const DatasetManifest& manifest,
                  const TrainOutputs& outputs = {}, const TrainCallback& on_entry = {});

/// Continue from an existing model instead of a fresh initialization.
TrainResult train_from(const TrainConfig& config, DualModel model,
                       std::span<const SampleTargets> dataset, const TrainOutputs& outputs = {},
                       const TrainCallback& on_entry = {});

struct Inference {
  Tensor structure;
  Tensor detail;
  Tensor output;
};

/// Runs both branches and reconstructs with `formation` (the model's own by default).
Inference infer(const DualModel& model, const Tensor& input);
Inference infer(const DualModel& model, const Tensor& input, const FormationModel& formation);

std::vector<SampleTargets> targets_of(std::span<const PatchPair> pairs);

/// Scores restored outputs against ground truth after cropping `border` pixels.
EvalReport evaluate(const DualModel& model, std::span<const SampleTargets> samples,
                    std::span<const std::string> names, std::size_t border);

// ---------------------------------------------------------------------------
// Finite-difference verification of the end-to-end gradients.

struct GradCheckOptions {
  std::size_t channels = 4;
  std::size_t depth = 3;
  std::size_t patch = 7;
  std::size_t batch = 2;
  std::uint64_t seed = 0;
  double step = 1e-4;
  double tolerance = 1e-5;
  bool include_cascade = true;
  /// Negative control: perturb one analytic gradient entry before comparing.
  bool corrupt = false;
};

struct GradCheckBlock {
  std::string section;  // "identity", "airlight", "cascade-identity"
  std::string name;     // e.g. "net_s.layer0.weights"
  std::size_t entries = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckBlock> blocks;
  double max_rel_error = 0.0;
  bool passed = false;
  std::string to_text(double tolerance) const;
};

/// Relative error |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-6);

GradCheckReport gradient_check(const GradCheckOptions& options);

}  // namespace dualcnn
