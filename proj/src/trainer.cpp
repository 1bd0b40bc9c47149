#include "dualcnn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "dualcnn/errors.hpp"

namespace dualcnn {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  weights.validate();
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate must be positive");
  }
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (iterations < 1) throw ValidationError("iterations must be >= 1");
  if (net_s.channels < 1 || net_s.depth < 1 || net_d.channels < 1 || net_d.depth < 1) {
    throw ValidationError("branch channels and depth must be >= 1");
  }
  if (gradient_clip && !(*gradient_clip > 0.0)) {
    throw ValidationError("gradient_clip must be positive when set");
  }
  formation_for(task, d0).validate();
}

NetworkSpec net_s_spec(const TrainConfig& config) {
  return build_scaled(NetKind::NetS, config.net_s.channels, config.net_s.depth);
}

NetworkSpec net_d_spec(const TrainConfig& config) {
  return build_scaled(NetKind::NetD, config.net_d.channels, config.net_d.depth);
}

DualModel initial_model(const TrainConfig& config) {
  config.validate();
  return make_model(config.architecture, config.task, config.formation(), net_s_spec(config),
                    net_d_spec(config), config.seed);
}

BranchOutputs run_branches(const DualModel& model, const Tensor& input) {
  BranchOutputs out;
  auto s = forward(model.net_s, model.params_s, input);
  auto d = forward(model.net_d, model.params_d,
                   model.architecture == Architecture::Cascade ? s.output : input);
  out.structure = std::move(s.output);
  out.detail = std::move(d.output);
  out.cache_s = std::move(s.cache);
  out.cache_d = std::move(d.cache);
  return out;
}

ModelGradients zero_gradients(const DualModel& model) {
  return {zero_parameters(model.net_s), zero_parameters(model.net_d)};
}

double global_norm(const ModelGradients& g) {
  return std::sqrt(squared_norm(g.s) + squared_norm(g.d));
}

SampleEvaluation evaluate_sample(const DualModel& model, const LossWeights& weights,
                                 const SampleTargets& sample) {
  auto branches = run_branches(model, sample.input);
  SampleEvaluation ev;
  ev.loss = loss(model.formation, weights, branches.structure, branches.detail, sample);
  auto lg = loss_gradients(model.formation, weights, branches.structure, branches.detail, sample);

  const bool cascade = model.architecture == Architecture::Cascade;
  auto bd = backward(model.net_d, model.params_d, branches.cache_d, lg.d_detail, cascade);
  if (cascade) axpy(1.0, bd.input_grad, lg.d_structure);  // Net-D also reads S
  auto bs = backward(model.net_s, model.params_s, branches.cache_s, lg.d_structure);
  ev.grads.s = std::move(bs.grads);
  ev.grads.d = std::move(bd.grads);
  return ev;
}

double batch_loss(const DualModel& model, const LossWeights& weights,
                  std::span<const SampleTargets> batch) {
  if (batch.empty()) throw ValidationError("batch is empty");
  double total = 0.0;
  for (const auto& sample : batch) {
    auto b = run_branches(model, sample.input);
    total += loss(model.formation, weights, b.structure, b.detail, sample).total;
  }
  return total / static_cast<double>(batch.size());
}

namespace {

constexpr std::size_t kChunk = 4;

struct Partial {
  double total = 0.0, composition = 0.0, structure = 0.0, detail = 0.0;
  ModelGradients grads;
};

Partial evaluate_chunk(const DualModel& model, const LossWeights& weights,
                       std::span<const SampleTargets> chunk) {
  Partial p;
  p.grads = zero_gradients(model);
  for (const auto& sample : chunk) {
    auto ev = evaluate_sample(model, weights, sample);
    p.total += ev.loss.total;
    p.composition += ev.loss.composition;
    p.structure += ev.loss.structure;
    p.detail += ev.loss.detail;
    axpy(1.0, ev.grads.s, p.grads.s);
    axpy(1.0, ev.grads.d, p.grads.d);
  }
  return p;
}

std::size_t resolve_threads(std::size_t threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  return threads;
}

}  // namespace

BatchEvaluation evaluate_batch(const DualModel& model, const LossWeights& weights,
                               std::span<const SampleTargets> batch, std::size_t threads) {
  if (batch.empty()) throw ValidationError("batch is empty");
  const std::size_t chunks = (batch.size() + kChunk - 1) / kChunk;
  std::vector<Partial> partials(chunks);
  auto run = [&](std::size_t c) {
    const std::size_t lo = c * kChunk;
    partials[c] = evaluate_chunk(model, weights,
                                 batch.subspan(lo, std::min(kChunk, batch.size() - lo)));
  };

  const std::size_t workers = std::min(resolve_threads(threads), chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run(c);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t c = w; c < chunks; c += workers) run(c);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  // Fixed-order reduction over chunks.
  BatchEvaluation out;
  out.grads = zero_gradients(model);
  for (const auto& p : partials) {
    out.loss.total += p.total;
    out.loss.composition += p.composition;
    out.loss.structure += p.structure;
    out.loss.detail += p.detail;
    axpy(1.0, p.grads.s, out.grads.s);
    axpy(1.0, p.grads.d, out.grads.d);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss.total *= inv;
  out.loss.composition *= inv;
  out.loss.structure *= inv;
  out.loss.detail *= inv;
  Parameters zero_s = zero_parameters(model.net_s);
  Parameters zero_d = zero_parameters(model.net_d);
  axpy(inv, out.grads.s, zero_s);
  axpy(inv, out.grads.d, zero_d);
  out.grads.s = std::move(zero_s);
  out.grads.d = std::move(zero_d);
  return out;
}

double clip_global_norm(std::span<Parameters* const> grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ValidationError("clip norm must be positive");
  double sq = 0.0;
  for (const auto* g : grads) sq += squared_norm(*g);
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return 1.0;
  const double factor = max_norm / norm;
  for (auto* g : grads) g->for_each([factor](double& v) { v *= factor; });
  return factor;
}

Parameters sgd_step(const Parameters& params, const Parameters& grads, double learning_rate,
                    std::optional<double> clip) {
  if (!params.same_geometry(grads)) {
    throw ValidationError("sgd_step: gradient shapes do not match parameters");
  }
  Parameters g = grads;
  if (clip) {
    Parameters* one[] = {&g};
    clip_global_norm(one, *clip);
  }
  Parameters next = params;
  axpy(-learning_rate, g, next);
  return next;
}

StepResult train_step(const DualModel& model, std::span<const SampleTargets> batch,
                      const LossWeights& weights, const StepOptions& options) {
  auto ev = evaluate_batch(model, weights, batch, options.threads);
  if (options.gradient_clip) {
    Parameters* both[] = {&ev.grads.s, &ev.grads.d};
    clip_global_norm(both, *options.gradient_clip);
  }
  StepResult r;
  r.model = model;
  r.model.params_s = sgd_step(model.params_s, ev.grads.s, options.learning_rate);
  r.model.params_d = sgd_step(model.params_d, ev.grads.d, options.learning_rate);
  r.model.iteration = model.iteration + 1;
  r.loss = std::move(ev.loss);
  return r;
}

std::string format_log_line(const TrainLogEntry& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%llu\t%.17g\t%.17g\t%.17g\t%.17g\t%.3f\n",
                static_cast<unsigned long long>(e.iteration), e.total, e.composition,
                e.structure, e.detail, e.elapsed);
  return buf;
}

namespace {

// Seeded epoch shuffles; the whole dataset when the batch covers it.
class BatchPlanner {
 public:
  BatchPlanner(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed)
      : n_(dataset_size), batch_(batch_size), rng_(seed ^ 0xa0761d6478bd642full) {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (batch_ < n_) std::shuffle(order_.begin(), order_.end(), rng_);
  }

  std::vector<std::size_t> next() {
    if (batch_ >= n_) return order_;
    std::vector<std::size_t> idx;
    idx.reserve(batch_);
    while (idx.size() < batch_) {
      if (cursor_ == n_) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
      }
      idx.push_back(order_[cursor_++]);
    }
    return idx;
  }

 private:
  std::size_t n_;
  std::size_t batch_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

fs::path interval_path(const fs::path& base, std::uint64_t iteration) {
  fs::path p = base;
  p += ".iter" + std::to_string(iteration);
  return p;
}

}  // namespace

TrainResult train_from(const TrainConfig& config, DualModel model,
                       std::span<const SampleTargets> dataset, const TrainOutputs& outputs,
                       const TrainCallback& on_entry) {
  config.validate();
  model.validate();
  if (dataset.empty()) throw ValidationError("training dataset is empty");

  std::ofstream log_file;
  if (!outputs.log.empty()) {
    log_file.open(outputs.log, std::ios::binary | std::ios::trunc);
    if (!log_file) throw IoError("cannot open log '" + outputs.log.string() + "' for writing");
  }

  TrainResult result;
  BatchPlanner planner(dataset.size(), config.batch_size, config.seed);
  const StepOptions options{config.learning_rate, config.gradient_clip, config.threads};
  const auto start = std::chrono::steady_clock::now();
  std::vector<SampleTargets> batch;

  for (std::size_t it = 1; it <= config.iterations; ++it) {
    std::span<const SampleTargets> view = dataset;
    if (config.batch_size < dataset.size()) {
      batch.clear();
      for (std::size_t i : planner.next()) batch.push_back(dataset[i]);
      view = batch;
    }
    auto step = train_step(model, view, config.weights, options);
    model = std::move(step.model);

    TrainLogEntry entry{model.iteration, step.loss.total, step.loss.composition,
                        step.loss.structure, step.loss.detail, 0.0};
    if (config.log_elapsed) {
      entry.elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    if (!std::isfinite(entry.total)) {
      throw InvariantError("training diverged: non-finite loss at iteration " +
                           std::to_string(entry.iteration));
    }
    result.log.push_back(entry);
    if (log_file.is_open()) {
      log_file << format_log_line(entry);
      log_file.flush();
      if (!log_file) throw IoError("error writing log '" + outputs.log.string() + "'");
    }
    if (on_entry) on_entry(entry);

    if (!outputs.checkpoint.empty() && config.checkpoint_interval > 0 &&
        it % config.checkpoint_interval == 0 && it != config.iterations) {
      const auto path = interval_path(outputs.checkpoint, model.iteration);
      save_checkpoint(path, model);
      result.checkpoints.push_back(path);
    }
  }
  if (!outputs.checkpoint.empty()) {
    save_checkpoint(outputs.checkpoint, model);
    result.checkpoints.push_back(outputs.checkpoint);
  }
  result.model = std::move(model);
  return result;
}

TrainResult train(const TrainConfig& config, std::span<const SampleTargets> dataset,
                  const TrainOutputs& outputs, const TrainCallback& on_entry) {
  return train_from(config, initial_model(config), dataset, outputs, on_entry);
}

TrainResult train(const TrainConfig& config, const DatasetManifest& manifest,
                  const TrainOutputs& outputs, const TrainCallback& on_entry) {
  if (manifest.task != config.task) {
    throw ValidationError("dataset task does not match training task");
  }
  const auto pairs = sample_patches(manifest);
  const auto samples = targets_of(pairs);
  return train(config, samples, outputs, on_entry);
}

Inference infer(const DualModel& model, const Tensor& input) {
  return infer(model, input, model.formation);
}

Inference infer(const DualModel& model, const Tensor& input, const FormationModel& formation) {
  model.validate();
  auto s = predict(model.net_s, model.params_s, input);
  auto d = predict(model.net_d, model.params_d,
                   model.architecture == Architecture::Cascade ? s : input);
  Inference r;
  r.output = reconstruct(formation, s, d, input);
  r.structure = std::move(s);
  r.detail = std::move(d);
  return r;
}

std::vector<SampleTargets> targets_of(std::span<const PatchPair> pairs) {
  std::vector<SampleTargets> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.sample);
  return out;
}

EvalReport evaluate(const DualModel& model, std::span<const SampleTargets> samples,
                    std::span<const std::string> names, std::size_t border) {
  if (samples.size() != names.size()) throw ValidationError("one name per sample required");
  EvalReport report;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto result = infer(model, samples[i].input);
    const Tensor& truth = samples[i].ground_truth(model.formation.kind);
    const Tensor out = crop_border(result.output, border);
    const Tensor ref = crop_border(truth, border);
    report.add({names[i], psnr(out, ref, 1.0), ssim(out, ref)});
  }
  report.finalize();
  return report;
}

// ---------------------------------------------------------------------------

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

constexpr double kKinkMargin = 1e-3;

double min_relu_margin(const NetworkSpec& spec, const ForwardCache& cache) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].activation != Activation::ReLU) continue;
    for (double v : cache.pre_activation[i].data()) m = std::min(m, std::abs(v));
  }
  return m;
}

void randomize_biases(Parameters& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (auto& k : p.layers)
    for (double& b : k.bias()) b = dist(rng);
}

struct Instance {
  DualModel model;
  LossWeights weights;
  std::vector<SampleTargets> batch;
};

Instance make_instance(Architecture arch, FormationKind kind, const GradCheckOptions& o,
                       std::uint64_t seed) {
  const Task task = kind == FormationKind::AirLight ? Task::Dehazing : Task::Filtering;
  Instance inst;
  inst.weights = kind == FormationKind::AirLight ? LossWeights{0.1, 0.9, 0.9}
                                                 : LossWeights{1.0, 0.5, 0.25};
  for (std::uint64_t attempt = 0;; ++attempt) {
    if (attempt == 1000) throw InvariantError("could not draw a kink-free gradient-check instance");
    const std::uint64_t s = seed * 7919 + attempt;
    std::mt19937_64 rng(s);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    inst.model = make_model(arch, task, formation_for(task),
                            build_scaled(NetKind::NetS, o.channels, o.depth),
                            build_scaled(NetKind::NetD, o.channels, o.depth), s);
    randomize_biases(inst.model.params_s, rng);
    randomize_biases(inst.model.params_d, rng);

    inst.batch.clear();
    for (std::size_t b = 0; b < o.batch; ++b) {
      SampleTargets t;
      const Shape shape{1, o.patch, o.patch};
      auto fill = [&](double lo, double hi) {
        Tensor x(shape);
        for (double& v : x.data()) v = lo + (hi - lo) * unit(rng);
        return x;
      };
      if (kind == FormationKind::AirLight) {
        t.clear = fill(0.0, 1.0);
        t.detail = fill(0.05, 1.0);
        t.structure = Tensor(shape, 0.7 + 0.3 * unit(rng));
        t.input = compose(FormationModel::airlight(), t.structure, t.detail, t);
        t.label = t.input;
      } else {
        t.input = fill(0.0, 1.0);
        t.label = fill(0.0, 1.0);
        t.structure = fill(0.0, 1.0);
        t.detail = fill(-0.5, 0.5);
      }
      inst.batch.push_back(std::move(t));
    }

    bool ok = true;
    for (const auto& t : inst.batch) {
      auto br = run_branches(inst.model, t.input);
      if (min_relu_margin(inst.model.net_s, br.cache_s) < kKinkMargin ||
          min_relu_margin(inst.model.net_d, br.cache_d) < kKinkMargin) {
        ok = false;
        break;
      }
    }
    if (ok) return inst;
  }
}

void check_instance(const std::string& section, Instance& inst, const GradCheckOptions& o,
                    GradCheckReport& report) {
  auto analytic = evaluate_batch(inst.model, inst.weights, inst.batch).grads;
  if (o.corrupt) {
    // Large enough to be unmistakable on any entry.
    auto& b = analytic.d.layers.back().bias()[0];
    b = b * 1.5 + 1e-3;
  }

  struct Branch {
    const char* name;
    Parameters* params;
    const Parameters* grads;
  };
  const Branch branches[] = {{"net_s", &inst.model.params_s, &analytic.s},
                             {"net_d", &inst.model.params_d, &analytic.d}};
  for (const auto& br : branches) {
    for (std::size_t l = 0; l < br.params->layers.size(); ++l) {
      for (int part = 0; part < 2; ++part) {
        auto values = part == 0 ? br.params->layers[l].weights() : br.params->layers[l].bias();
        auto grads = part == 0 ? br.grads->layers[l].weights() : br.grads->layers[l].bias();
        GradCheckBlock block;
        block.section = section;
        block.name = std::string(br.name) + ".layer" + std::to_string(l) +
                     (part == 0 ? ".weights" : ".bias");
        block.entries = values.size();
        for (std::size_t i = 0; i < values.size(); ++i) {
          const double saved = values[i];
          values[i] = saved + o.step;
          const double up = batch_loss(inst.model, inst.weights, inst.batch);
          values[i] = saved - o.step;
          const double down = batch_loss(inst.model, inst.weights, inst.batch);
          values[i] = saved;
          const double numeric = (up - down) / (2.0 * o.step);
          block.max_rel_error = std::max(block.max_rel_error, relative_error(grads[i], numeric));
        }
        report.max_rel_error = std::max(report.max_rel_error, block.max_rel_error);
        report.blocks.push_back(block);
      }
    }
  }
}

}  // namespace

GradCheckReport gradient_check(const GradCheckOptions& o) {
  if (o.channels < 1 || o.depth < 1 || o.patch < 1 || o.batch < 1 || !(o.step > 0.0)) {
    throw ValidationError("invalid gradient-check options");
  }
  GradCheckReport report;
  {
    auto inst = make_instance(Architecture::Dual, FormationKind::Identity, o, o.seed);
    check_instance("identity", inst, o, report);
  }
  {
    auto inst = make_instance(Architecture::Dual, FormationKind::AirLight, o, o.seed + 1);
    check_instance("airlight", inst, o, report);
  }
  if (o.include_cascade) {
    auto inst = make_instance(Architecture::Cascade, FormationKind::Identity, o, o.seed + 2);
    check_instance("cascade-identity", inst, o, report);
  }
  report.passed = report.max_rel_error < o.tolerance;
  return report;
}

std::string GradCheckReport::to_text(double tolerance) const {
  std::ostringstream os;
  std::string current;
  char buf[160];
  for (const auto& b : blocks) {
    if (b.section != current) {
      current = b.section;
      os << "[" << current << "]\n";
    }
    std::snprintf(buf, sizeof buf, "  %-22s entries=%-6zu max_rel_error=%.3e\n", b.name.c_str(),
                  b.entries, b.max_rel_error);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "overall max_rel_error=%.3e tolerance=%.1e %s\n", max_rel_error,
                tolerance, passed ? "PASS" : "FAIL");
  os << buf;
  return os.str();
}

}  // namespace dualcnn
