// dualcnn command-line tool. Talks to the library only through dualcnn.h.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dualcnn/dualcnn.h"

namespace {

// Status carrier so handlers can bail out with a library status.
struct Failure {
  dcnn_status status;
  std::string message;
};

void check(dcnn_status s, const std::string& context) {
  if (s != DCNN_OK) throw Failure{s, context + ": " + dcnn_last_error()};
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};

using Config = Handle<dcnn_config, dcnn_config_free>;
using Model = Handle<dcnn_model, dcnn_model_free>;
using TensorH = Handle<dcnn_tensor, dcnn_tensor_free>;

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { dcnn_string_free(p); }
};

void load_config(Config& cfg, const std::string& path, std::optional<std::uint64_t> seed) {
  check(dcnn_config_load(path.c_str(), &cfg.p), "config");
  if (seed) check(dcnn_config_set_seed(cfg.p, *seed), "config");
}

dcnn_task parse_task(const std::string& name) {
  if (name.empty() || name == "auto") return DCNN_TASK_AUTO;
  if (name == "super_resolution" || name == "sr") return DCNN_TASK_SUPER_RESOLUTION;
  if (name == "filtering") return DCNN_TASK_FILTERING;
  if (name == "deraining") return DCNN_TASK_DERAINING;
  if (name == "dehazing") return DCNN_TASK_DEHAZING;
  throw Failure{DCNN_ERR_VALIDATION, "unknown task '" + name + "'"};
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool config_required, const std::string& out_help) {
  auto* opt = cmd->add_option("--config", c.config, "run configuration (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--seed", c.seed, "override the config seed");
  cmd->add_option("--out", c.out, out_help);
}

int run_synth(const Common& c) {
  Config cfg;
  load_config(cfg, c.config, c.seed);
  std::size_t n = 0;
  check(dcnn_synth_data(cfg.p, c.out.empty() ? nullptr : c.out.c_str(), &n), "synth-data");
  std::printf("wrote %zu pairs\n", n);
  return 0;
}

struct TrainArgs {
  std::string log;
  bool quiet = false;
};

void print_entry(std::uint64_t it, double total, double lx, double ls, double ld, void* user) {
  if (*static_cast<bool*>(user)) return;
  std::printf("%llu\t%.6g\t%.6g\t%.6g\t%.6g\n", static_cast<unsigned long long>(it), total, lx,
              ls, ld);
  std::fflush(stdout);
}

int run_train(const Common& c, TrainArgs& t) {
  Config cfg;
  load_config(cfg, c.config, c.seed);
  check(dcnn_train(cfg.p, c.out.empty() ? nullptr : c.out.c_str(),
                   t.log.empty() ? nullptr : t.log.c_str(), print_entry, &t.quiet),
        "train");
  return 0;
}

struct InferArgs {
  std::string checkpoint;
  std::string input;
  std::string task;
  double d0 = 0.1;
};

int run_infer(const Common& c, const InferArgs& a) {
  Model model;
  check(dcnn_model_load(a.checkpoint.c_str(), &model.p), "checkpoint");
  TensorH input;
  check(dcnn_tensor_load(a.input.c_str(), &input.p), "input");
  dcnn_task task = parse_task(a.task);
  if (task == DCNN_TASK_AUTO) check(dcnn_model_task(model.p, &task), "checkpoint");
  TensorH s, d, out;
  check(dcnn_infer(model.p, input.p, task, a.d0, &s.p, &d.p, &out.p), "infer");
  const std::string prefix = c.out.empty() ? "out" : c.out;
  // Identity details are signed; shift them for display.
  const double offset = task == DCNN_TASK_DEHAZING ? 0.0 : 0.5;
  check(dcnn_tensor_save(s.p, (prefix + "_S").c_str(), 0.0), "write");
  check(dcnn_tensor_save(d.p, (prefix + "_D").c_str(), offset), "write");
  check(dcnn_tensor_save(out.p, (prefix + "_out").c_str(), 0.0), "write");
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string pairs;
  std::string baseline;
  std::int64_t border = -1;
};

int run_eval(const Common& c, const EvalArgs& a) {
  dcnn_eval_source source = DCNN_EVAL_MODEL;
  if (a.baseline == "input") {
    source = DCNN_EVAL_INPUT;
  } else if (a.baseline == "target") {
    source = DCNN_EVAL_TARGET;
  } else if (!a.baseline.empty()) {
    throw Failure{DCNN_ERR_VALIDATION, "--baseline must be 'input' or 'target'"};
  }
  Model model;
  if (!a.checkpoint.empty()) {
    check(dcnn_model_load(a.checkpoint.c_str(), &model.p), "checkpoint");
  } else if (source == DCNN_EVAL_MODEL) {
    throw Failure{DCNN_ERR_VALIDATION, "eval needs --checkpoint or --baseline"};
  }
  double mp = 0, ms = 0;
  std::size_t rows = 0;
  check(dcnn_eval(model.p, a.pairs.c_str(), source, a.border,
                  c.out.empty() ? nullptr : c.out.c_str(), &mp, &ms, &rows),
        "eval");
  std::printf("%zu images\tpsnr %.4f\tssim %.4f\n", rows, mp, ms);
  return 0;
}

int run_gradcheck(const Common& c, dcnn_gradcheck_options o) {
  if (c.seed) o.seed = *c.seed;
  OwnedString report;
  double worst = 0;
  const dcnn_status s = dcnn_gradcheck(&o, &report.p, &worst);
  if (report.p != nullptr) std::fputs(report.p, stdout);
  std::fflush(stdout);
  check(s, "gradcheck");
  return 0;
}

int run_show_config(const Common& c) {
  Config cfg;
  load_config(cfg, c.config, c.seed);
  OwnedString text;
  check(dcnn_config_to_json(cfg.p, &text.p), "config");
  std::fputs(text.p, stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual structure/detail CNN training and inference"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dcnn_version()));

  Common synth_c, train_c, infer_c, eval_c, grad_c, show_c;
  TrainArgs train_a;
  InferArgs infer_a;
  EvalArgs eval_a;
  dcnn_gradcheck_options grad_o;
  dcnn_gradcheck_defaults(&grad_o);
  bool corrupt = false;

  auto* synth = app.add_subcommand("synth-data", "write the configured training pairs to disk");
  add_common(synth, synth_c, true, "pairs directory (default: output.dataset)");

  auto* train = app.add_subcommand("train", "train a model; writes checkpoint and log");
  add_common(train, train_c, true, "checkpoint path (default: output.checkpoint)");
  train->add_option("--log", train_a.log, "log path (default: output.log)");
  train->add_flag("--quiet", train_a.quiet, "do not echo log lines");

  auto* infer = app.add_subcommand("infer", "restore one image; writes PREFIX_{S,D,out}");
  add_common(infer, infer_c, false, "output prefix");
  infer->add_option("--checkpoint", infer_a.checkpoint)->required();
  infer->add_option("--input", infer_a.input, "PGM or .f64 image")->required();
  infer->add_option("--task", infer_a.task, "formation task (default: the checkpoint's)");
  infer->add_option("--d0", infer_a.d0, "transmission floor for dehazing");

  auto* eval = app.add_subcommand("eval", "PSNR/SSIM over a pairs directory");
  add_common(eval, eval_c, false, "report path (tab-separated)");
  eval->add_option("--checkpoint", eval_a.checkpoint);
  eval->add_option("--pairs", eval_a.pairs, "pairs directory")->required();
  eval->add_option("--baseline", eval_a.baseline, "score 'input' or 'target' instead of a model");
  eval->add_option("--border", eval_a.border, "crop width (default: model border)");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of the gradients");
  add_common(grad, grad_c, false, "unused");
  grad->add_option("--channels", grad_o.channels);
  grad->add_option("--depth", grad_o.depth);
  grad->add_option("--patch", grad_o.patch);
  grad->add_option("--tolerance", grad_o.tolerance);
  grad->add_flag("--corrupt-gradient", corrupt, "negative control");

  auto* show = app.add_subcommand("show-config", "print the config with defaults filled in");
  add_common(show, show_c, true, "unused");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "dualcnn: %s\n", e.what());
    return DCNN_ERR_VALIDATION;
  }

  try {
    if (synth->parsed()) return run_synth(synth_c);
    if (train->parsed()) return run_train(train_c, train_a);
    if (infer->parsed()) return run_infer(infer_c, infer_a);
    if (eval->parsed()) return run_eval(eval_c, eval_a);
    if (grad->parsed()) {
      grad_o.corrupt = corrupt ? 1 : 0;
      return run_gradcheck(grad_c, grad_o);
    }
    if (show->parsed()) return run_show_config(show_c);
  } catch (const Failure& f) {
    std::string line = f.message;
    for (auto& ch : line) {
      if (ch == '\n') ch = ' ';
    }
    std::fprintf(stderr, "dualcnn: %s\n", line.c_str());
    return f.status;
  }
  return DCNN_ERR_VALIDATION;
}
