// extern "C" surface over the C++ core. Exceptions never cross this boundary.

#include "dualcnn/dualcnn.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <string>

#include "dualcnn/config.hpp"
#include "dualcnn/errors.hpp"
#include "dualcnn/image_io.hpp"
#include "dualcnn/metrics.hpp"
#include "dualcnn/model.hpp"
#include "dualcnn/pairs.hpp"
#include "dualcnn/trainer.hpp"

struct dcnn_config {
  dualcnn::RunConfig value;
};

struct dcnn_model {
  dualcnn::DualModel value;
};

struct dcnn_tensor {
  dualcnn::Tensor value;
};

namespace {

namespace fs = std::filesystem;

thread_local std::string g_last_error;

// Runs `body`, translating the exception hierarchy into status codes.
template <class F>
dcnn_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return DCNN_OK;
  } catch (const dualcnn::ValidationError& e) {
    g_last_error = e.what();
    return DCNN_ERR_VALIDATION;
  } catch (const dualcnn::IoError& e) {
    g_last_error = e.what();
    return DCNN_ERR_IO;
  } catch (const dualcnn::InvariantError& e) {
    g_last_error = e.what();
    return DCNN_ERR_INTERNAL;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return DCNN_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DCNN_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DCNN_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return DCNN_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw dualcnn::ValidationError(std::string(what) + " must not be NULL");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

dualcnn::Task to_task(dcnn_task t) {
  switch (t) {
    case DCNN_TASK_SUPER_RESOLUTION: return dualcnn::Task::SuperResolution;
    case DCNN_TASK_FILTERING: return dualcnn::Task::Filtering;
    case DCNN_TASK_DERAINING: return dualcnn::Task::Deraining;
    case DCNN_TASK_DEHAZING: return dualcnn::Task::Dehazing;
    case DCNN_TASK_AUTO: break;
  }
  throw dualcnn::ValidationError("invalid task value");
}

dcnn_task from_task(dualcnn::Task t) {
  switch (t) {
    case dualcnn::Task::SuperResolution: return DCNN_TASK_SUPER_RESOLUTION;
    case dualcnn::Task::Filtering: return DCNN_TASK_FILTERING;
    case dualcnn::Task::Deraining: return DCNN_TASK_DERAINING;
    case dualcnn::Task::Dehazing: return DCNN_TASK_DEHAZING;
  }
  return DCNN_TASK_FILTERING;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

dcnn_tensor* wrap(dualcnn::Tensor t) { return new dcnn_tensor{std::move(t)}; }

}  // namespace

extern "C" {

DUALCNN_API const char* dcnn_version(void) { return "0.1.0"; }

DUALCNN_API const char* dcnn_last_error(void) { return g_last_error.c_str(); }

DUALCNN_API void dcnn_string_free(char* s) { std::free(s); }

DUALCNN_API dcnn_status dcnn_config_load(const char* path, dcnn_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new dcnn_config{dualcnn::load_run_config(path)};
  });
}

DUALCNN_API dcnn_status dcnn_config_parse(const char* json_text, dcnn_config** out) {
  return guarded([&] {
    require(json_text, "json_text");
    require(out, "out");
    *out = new dcnn_config{dualcnn::parse_run_config(json_text)};
  });
}

DUALCNN_API dcnn_status dcnn_config_set_seed(dcnn_config* config, uint64_t seed) {
  return guarded([&] {
    require(config, "config");
    config->value.set_seed(seed);
  });
}

DUALCNN_API dcnn_status dcnn_config_to_json(const dcnn_config* config, char** json_text) {
  return guarded([&] {
    require(config, "config");
    require(json_text, "json_text");
    *json_text = copy_string(dualcnn::to_json(config->value));
  });
}

DUALCNN_API void dcnn_config_free(dcnn_config* config) { delete config; }

DUALCNN_API dcnn_status dcnn_synth_data(const dcnn_config* config, const char* out_dir,
                                        size_t* pair_count) {
  return guarded([&] {
    require(config, "config");
    const auto& cfg = config->value;
    const fs::path dir = out_dir != nullptr ? fs::path(out_dir) : cfg.output.dataset;
    const auto pairs = dualcnn::sample_patches(cfg.data);
    dualcnn::write_pairs(dir, pairs);
    if (pair_count != nullptr) *pair_count = pairs.size();
  });
}

DUALCNN_API dcnn_status dcnn_train(const dcnn_config* config, const char* checkpoint_path,
                                   const char* log_path, dcnn_log_fn on_entry, void* user) {
  return guarded([&] {
    require(config, "config");
    const auto& cfg = config->value;
    dualcnn::TrainOutputs outputs;
    outputs.checkpoint = checkpoint_path != nullptr ? fs::path(checkpoint_path)
                                                    : cfg.output.checkpoint;
    outputs.log = log_path != nullptr ? fs::path(log_path) : cfg.output.log;
    ensure_parent(outputs.checkpoint);
    ensure_parent(outputs.log);

    std::vector<dualcnn::SampleTargets> samples;
    if (!cfg.pairs_dir.empty()) {
      for (auto& np : dualcnn::read_pairs(cfg.pairs_dir)) {
        if (np.pair.task != cfg.train.task) {
          throw dualcnn::ValidationError("pair '" + np.name + "' is a " +
                                         dualcnn::to_string(np.pair.task) +
                                         " pair but the config trains " +
                                         dualcnn::to_string(cfg.train.task));
        }
        samples.push_back(std::move(np.pair.sample));
      }
    } else {
      const auto pairs = dualcnn::sample_patches(cfg.data);
      samples = dualcnn::targets_of(pairs);
    }

    dualcnn::TrainCallback cb;
    if (on_entry != nullptr) {
      cb = [on_entry, user](const dualcnn::TrainLogEntry& e) {
        on_entry(e.iteration, e.total, e.composition, e.structure, e.detail, user);
      };
    }
    dualcnn::train(cfg.train, samples, outputs, cb);
  });
}

DUALCNN_API dcnn_status dcnn_model_load(const char* path, dcnn_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new dcnn_model{dualcnn::load_checkpoint(path)};
  });
}

DUALCNN_API dcnn_status dcnn_model_save(const dcnn_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    ensure_parent(path);
    dualcnn::save_checkpoint(path, model->value);
  });
}

DUALCNN_API dcnn_status dcnn_model_init(const dcnn_config* config, dcnn_model** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    *out = new dcnn_model{dualcnn::initial_model(config->value.train)};
  });
}

DUALCNN_API dcnn_status dcnn_model_task(const dcnn_model* model, dcnn_task* task) {
  return guarded([&] {
    require(model, "model");
    require(task, "task");
    *task = from_task(model->value.task);
  });
}

DUALCNN_API dcnn_status dcnn_model_border(const dcnn_model* model, size_t* border) {
  return guarded([&] {
    require(model, "model");
    require(border, "border");
    *border = model->value.border();
  });
}

DUALCNN_API dcnn_status dcnn_model_parameter_count(const dcnn_model* model, size_t* net_s,
                                                   size_t* net_d) {
  return guarded([&] {
    require(model, "model");
    if (net_s != nullptr) *net_s = model->value.params_s.parameter_count();
    if (net_d != nullptr) *net_d = model->value.params_d.parameter_count();
  });
}

DUALCNN_API void dcnn_model_free(dcnn_model* model) { delete model; }

DUALCNN_API dcnn_status dcnn_tensor_create(size_t channels, size_t height, size_t width,
                                           const double* data, dcnn_tensor** out) {
  return guarded([&] {
    require(out, "out");
    dualcnn::Tensor t(channels, height, width);
    if (data != nullptr) std::memcpy(t.data().data(), data, t.size() * sizeof(double));
    *out = wrap(std::move(t));
  });
}

DUALCNN_API dcnn_status dcnn_tensor_load(const char* path, dcnn_tensor** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = wrap(dualcnn::read_image(path));
  });
}

DUALCNN_API dcnn_status dcnn_tensor_save(const dcnn_tensor* tensor, const char* stem,
                                         double display_offset) {
  return guarded([&] {
    require(tensor, "tensor");
    require(stem, "stem");
    ensure_parent(stem);
    dualcnn::write_image_pair(stem, tensor->value, display_offset);
  });
}

DUALCNN_API dcnn_status dcnn_tensor_shape(const dcnn_tensor* tensor, size_t* channels,
                                          size_t* height, size_t* width) {
  return guarded([&] {
    require(tensor, "tensor");
    if (channels != nullptr) *channels = tensor->value.channels();
    if (height != nullptr) *height = tensor->value.height();
    if (width != nullptr) *width = tensor->value.width();
  });
}

DUALCNN_API const double* dcnn_tensor_data(const dcnn_tensor* tensor) {
  return tensor == nullptr ? nullptr : tensor->value.data().data();
}

DUALCNN_API void dcnn_tensor_free(dcnn_tensor* tensor) { delete tensor; }

DUALCNN_API dcnn_status dcnn_infer(const dcnn_model* model, const dcnn_tensor* input,
                                   dcnn_task task, double d0, dcnn_tensor** structure,
                                   dcnn_tensor** detail, dcnn_tensor** output) {
  return guarded([&] {
    require(model, "model");
    require(input, "input");
    const auto& m = model->value;
    const dualcnn::Task t = task == DCNN_TASK_AUTO ? m.task : to_task(task);
    auto r = dualcnn::infer(m, input->value, dualcnn::formation_for(t, d0));
    if (structure != nullptr) *structure = wrap(std::move(r.structure));
    if (detail != nullptr) *detail = wrap(std::move(r.detail));
    if (output != nullptr) *output = wrap(std::move(r.output));
  });
}

DUALCNN_API dcnn_status dcnn_eval(const dcnn_model* model, const char* pairs_dir,
                                  dcnn_eval_source source, int64_t border,
                                  const char* report_path, double* mean_psnr,
                                  double* mean_ssim, size_t* rows) {
  return guarded([&] {
    require(pairs_dir, "pairs_dir");
    dualcnn::EvalSource src;
    switch (source) {
      case DCNN_EVAL_MODEL: src = dualcnn::EvalSource::Model; break;
      case DCNN_EVAL_INPUT: src = dualcnn::EvalSource::Input; break;
      case DCNN_EVAL_TARGET: src = dualcnn::EvalSource::Target; break;
      default: throw dualcnn::ValidationError("invalid evaluation source");
    }
    const dualcnn::DualModel* m = model != nullptr ? &model->value : nullptr;
    const std::size_t crop =
        border >= 0 ? static_cast<std::size_t>(border) : (m != nullptr ? m->border() : 0);
    const auto pairs = dualcnn::read_pairs(pairs_dir);
    const auto report = dualcnn::evaluate_pairs(pairs, m, src, crop);
    if (report_path != nullptr) {
      ensure_parent(report_path);
      std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
      if (!out) throw dualcnn::IoError(std::string("cannot write '") + report_path + "'");
      out << report.to_tsv();
      if (!out) throw dualcnn::IoError(std::string("error writing '") + report_path + "'");
    }
    if (mean_psnr != nullptr) *mean_psnr = report.mean_psnr;
    if (mean_ssim != nullptr) *mean_ssim = report.mean_ssim;
    if (rows != nullptr) *rows = report.rows.size();
  });
}

DUALCNN_API dcnn_status dcnn_psnr(const dcnn_tensor* a, const dcnn_tensor* b, double peak,
                                  double* out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    *out = dualcnn::psnr(a->value, b->value, peak);
  });
}

DUALCNN_API dcnn_status dcnn_ssim(const dcnn_tensor* a, const dcnn_tensor* b, double* out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    *out = dualcnn::ssim(a->value, b->value);
  });
}

DUALCNN_API void dcnn_gradcheck_defaults(dcnn_gradcheck_options* options) {
  if (options == nullptr) return;
  const dualcnn::GradCheckOptions d;
  options->channels = d.channels;
  options->depth = d.depth;
  options->patch = d.patch;
  options->seed = d.seed;
  options->tolerance = d.tolerance;
  options->corrupt = 0;
}

DUALCNN_API dcnn_status dcnn_gradcheck(const dcnn_gradcheck_options* options, char** report,
                                       double* max_rel_error) {
  return guarded([&] {
    require(options, "options");
    dualcnn::GradCheckOptions o;
    o.channels = options->channels;
    o.depth = options->depth;
    o.patch = options->patch;
    o.seed = options->seed;
    o.tolerance = options->tolerance;
    o.corrupt = options->corrupt != 0;
    if (!(o.tolerance > 0.0)) throw dualcnn::ValidationError("tolerance must be positive");
    const auto r = dualcnn::gradient_check(o);
    if (report != nullptr) *report = copy_string(r.to_text(o.tolerance));
    if (max_rel_error != nullptr) *max_rel_error = r.max_rel_error;
    if (!r.passed) {
      throw dualcnn::InvariantError("gradient check failed: max relative error " +
                                    std::to_string(r.max_rel_error) + " exceeds tolerance");
    }
  });
}

}  // extern "C"
