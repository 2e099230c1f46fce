// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes: 0 success, 2 config error, 3 data
// error, 4 numeric failure, 1 anything else.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "livlr/checkpoint.hpp"
#include "livlr/checks.hpp"
#include "livlr/config.hpp"
#include "livlr/data.hpp"
#include "livlr/errors.hpp"
#include "livlr/model.hpp"
#include "livlr/trainer.hpp"

namespace {

using namespace livlr;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

nlohmann::json read_json(const std::string& path, bool config) {
  std::ifstream in(path);
  if (!in) {
    if (config) throw ConfigError("cannot open '" + path + "'");
    throw DataError("cannot open '" + path + "'");
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    if (config) throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    throw DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

std::vector<std::size_t> parse_values(const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError("--values expects positive integers separated by commas, got '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("--values is empty");
  return out;
}

void print_epoch(const EpochMetrics& m, std::size_t total) {
  const std::size_t every = std::max<std::size_t>(1, total / 20);
  if (m.epoch % every == 0 || m.epoch == total || m.epoch == 1) {
    std::printf("epoch %4zu  loss %.6f  acc %.4f  %.1f ms\n", m.epoch, m.train_loss, m.train_acc, m.wall_ms);
    std::fflush(stdout);
  }
}

// A task spec file may embed the model config under "config".
ModelConfig task_config(const nlohmann::json& spec, const std::string& config_path) {
  if (!config_path.empty()) return load_config(config_path);
  if (spec.contains("config")) return config_from_json(spec.at("config"));
  return preset("desk");
}

data::Dataset overfit_task(const ModelConfig& cfg) {
  data::SyntheticTaskSpec spec;
  spec.n_samples = 64;
  spec.signal_source = data::SignalSource::kFinegrainedVisual;
  spec.noise_scale = 0.1;
  spec.n_classes = 4;
  spec.seed = cfg.seed;
  return data::gen_synthetic(spec, cfg);
}

int run_gen_data(const std::string& spec_path, const std::string& config_path, const std::string& out,
                 std::optional<std::uint64_t> seed) {
  const auto j = read_json(spec_path, true);
  auto spec = data::task_spec_from_json(j);
  if (seed) spec.seed = *seed;
  const auto cfg = task_config(j, config_path);
  const auto ds = data::gen_synthetic(spec, cfg);
  data::write_dataset(ds, out);
  std::printf("wrote %zu samples (%s) to %s\n", ds.samples.size(), data::to_string(spec.signal_source).c_str(),
              out.c_str());
  return 0;
}

int run_train(const std::string& config_path, const std::string& data_path, const std::string& out_dir,
              std::optional<std::size_t> epochs) {
  const auto cfg = load_config(config_path);
  const auto ds = data::read_dataset(data_path);
  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);
  save_config(cfg, (dir / "config.json").string());

  LivlrModel model(cfg);
  TrainOptions opts;
  opts.epochs = epochs;
  opts.metrics_csv = (dir / "metrics.csv").string();
  const std::size_t total = epochs.value_or(cfg.epochs);
  opts.on_epoch = [total](const EpochMetrics& m) { print_epoch(m, total); };
  const auto trace = train(model, ds, opts);
  save_checkpoint((dir / "checkpoint.lvlr").string(), cfg, model.params());
  if (!trace.empty()) {
    std::printf("final train accuracy %.4f, loss %.6f\n", trace.back().train_acc, trace.back().train_loss);
  }
  std::printf("wrote %s\n", dir.string().c_str());
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data_path) {
  const auto model = load_model(ckpt_path);
  const auto r = evaluate(*model, data::read_dataset(data_path));
  std::printf("%s\n", nlohmann::json({{"samples", r.samples}, {"loss", r.loss}, {"accuracy", r.accuracy}}).dump().c_str());
  return 0;
}

int run_grad_check(const std::string& config_path, std::optional<std::uint64_t> seed, double tolerance) {
  const auto cfg = load_config(config_path);
  if (cfg.precision != Precision::kDouble) std::printf("note: gradient checks run in double precision\n");
  const auto report = grad_check(cfg, seed.value_or(cfg.seed), 1e-5, tolerance);
  std::printf("%-44s %8s %12s %12s\n", "parameter", "numel", "max_abs", "max_rel");
  for (const auto& t : report.tensors) {
    std::printf("%-44s %8zu %12.3e %12.3e %s\n", t.name.c_str(), t.numel, t.max_abs_error, t.max_rel_error,
                t.passed ? "ok" : "FAIL");
  }
  const auto* worst = report.worst();
  std::printf("%zu tensors, worst %s (%.3e), tolerance %.1e, %.1f s: %s\n", report.tensors.size(),
              worst ? worst->name.c_str() : "-", worst ? worst->max_rel_error : 0.0, report.tolerance,
              report.wall_ms / 1000.0, report.passed() ? "PASS" : "FAIL");
  return report.passed() ? 0 : kExitNumeric;
}

int run_param_count(const std::string& config_path) {
  const auto cfg = load_config(config_path);
  const auto count = param_count(cfg);
  for (const auto& [module, n] : count.by_module) std::printf("%-12s %12zu\n", module.c_str(), n);
  std::printf("%-12s %12zu\n", "total", count.total);
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& values, const std::string& data_path,
              const std::string& out_dir) {
  const auto cfg = load_config(config_path);
  const auto heads = parse_values(values);
  for (auto h : heads) {
    if (cfg.d % h != 0) {
      throw ConfigError("N_h=" + std::to_string(h) + " does not divide d=" + std::to_string(cfg.d));
    }
  }
  const auto ds = data_path.empty() ? overfit_task(cfg) : data::read_dataset(data_path);
  std::ofstream csv;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    csv.open((std::filesystem::path(out_dir) / "sweep_nh.csv").string());
    csv << "N_h,final_train_loss,final_train_acc,best_train_acc\n";
  }
  std::printf("%5s %12s %10s %10s\n", "N_h", "final_loss", "final_acc", "best_acc");
  sweep_heads(cfg, ds, heads, {}, [&](const SweepRun& r) {
    std::printf("%5zu %12.6f %10.4f %10.4f\n", r.heads, r.last.train_loss, r.last.train_acc, r.best_acc);
    std::fflush(stdout);
    if (csv.is_open()) {
      csv << r.heads << ',' << r.last.train_loss << ',' << r.last.train_acc << ',' << r.best_acc << '\n';
    }
  });
  return 0;
}

int run_init_config(const std::string& name, const std::string& out) {
  save_config(preset(name), out);
  std::printf("wrote %s preset to %s\n", name.c_str(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video question answering over visual and linguistic graphs"};
  app.require_subcommand(1);

  std::string config, data_path, out, out_dir, spec_path, ckpt, values = "1,4,8,16,32", preset_name = "desk";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  double tolerance = 1e-4;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--spec", spec_path, "Task spec JSON")->required();
  gen->add_option("--out", out, "Output JSON lines file")->required();
  gen->add_option("--config", config, "Model config JSON (extents)");
  gen->add_option("--seed", seed, "Override the spec seed");

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", config, "Model config JSON")->required();
  tr->add_option("--data", data_path, "Dataset file")->required();
  tr->add_option("--out-dir", out_dir, "Directory for metrics.csv, checkpoint.lvlr, config.json")->required();
  tr->add_option("--epochs", epochs, "Override the configured epoch count");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
  ev->add_option("--data", data_path, "Dataset file")->required();

  auto* gc = app.add_subcommand("grad-check", "Compare analytic and finite-difference gradients");
  gc->add_option("--config", config, "Model config JSON")->required();
  gc->add_option("--seed", seed, "Seed for parameters and the probe batch");
  gc->add_option("--tolerance", tolerance, "Maximum relative error per tensor");

  auto* pc = app.add_subcommand("param-count", "Count trainable scalars per module");
  pc->add_option("--config", config, "Model config JSON")->required();

  auto* sw = app.add_subcommand("sweep-nh", "Train once per head count");
  sw->add_option("--config", config, "Model config JSON")->required();
  sw->add_option("--values", values, "Comma-separated head counts");
  sw->add_option("--data", data_path, "Dataset file (default: the 64-sample fine-grained visual task)");
  sw->add_option("--out-dir", out_dir, "Directory for sweep_nh.csv");

  auto* ic = app.add_subcommand("init-config", "Write a preset config");
  ic->add_option("--preset", preset_name, "tiny, desk or paper");
  ic->add_option("--out", out, "Output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return run_gen_data(spec_path, config, out, seed);
    if (*tr) return run_train(config, data_path, out_dir, epochs);
    if (*ev) return run_eval(ckpt, data_path);
    if (*gc) return run_grad_check(config, seed, tolerance);
    if (*pc) return run_param_count(config);
    if (*sw) return run_sweep(config, values, data_path, out_dir);
    if (*ic) return run_init_config(preset_name, out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return kExitData;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
