// crowdforge: command-line driver for the dataset pipeline.
//
// Exit codes: 0 success, 2 validation/config error, 3 missing dependency
// stage, 1 anything else.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "crowdforge/errors.hpp"
#include "crowdforge/loss.hpp"
#include "crowdforge/pipeline.hpp"
#include "crowdforge/review.hpp"

namespace fs = std::filesystem;
using namespace crowdforge;

namespace {

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string manifest;
  std::string config;
  std::string background_root;
  std::string foreground_root;
  std::string output_root;
};

PipelineConfig make_config(const GlobalOptions& g) {
  PipelineConfig cfg = g.config.empty() ? PipelineConfig{} : load_config(g.config);
  if (!g.background_root.empty()) cfg.paths.background_root = g.background_root;
  if (!g.foreground_root.empty()) cfg.paths.foreground_root = g.foreground_root;
  if (!g.output_root.empty()) cfg.paths.output_root = g.output_root;
  if (!g.manifest.empty()) cfg.paths.manifest = g.manifest;
  if (g.seed) cfg.master_seed = *g.seed;
  cfg.selection.seed = cfg.master_seed;
  if (g.workers) cfg.workers = *g.workers;
  return cfg;
}

fs::path manifest_path(const GlobalOptions& g) {
  if (!g.manifest.empty()) return g.manifest;
  if (!g.config.empty() || !g.output_root.empty()) return make_config(g).paths.manifest_path();
  throw ConfigError("no manifest: pass --manifest, --config or --output-root");
}

std::pair<std::string, std::string> split_named(const std::string& spec, const std::string& fallback_name) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) return {fallback_name, spec};
  return {spec.substr(0, eq), spec.substr(eq + 1)};
}

ReviewService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

int run(int argc, char** argv) {
  CLI::App app{"crowdforge: semi-synthetic human and shadow removal dataset pipeline"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--workers", g.workers, "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  app.add_option("--manifest", g.manifest, "Manifest path (default <output_root>/manifest.json)");
  app.add_option("--config", g.config, "Pipeline config (JSON)");
  app.add_option("--background-root", g.background_root, "Background corpus root");
  app.add_option("--foreground-root", g.foreground_root, "Foreground corpus root");
  app.add_option("--output-root", g.output_root, "Dataset output root");

  bool json_out = false;
  StageOptions stage_opts;
  std::vector<CLI::App*> stage_cmds;
  for (const char* stage : {kStageIngest, kStageFilterBg, kStageSelectFg, kStageCompose}) {
    auto* cmd = app.add_subcommand(stage);
    cmd->add_flag("--json", json_out, "Print the stage report as JSON");
    if (std::string(stage) == kStageCompose) {
      cmd->add_flag("--force", stage_opts.force, "Overwrite composite directories whose plan changed");
    }
    stage_cmds.push_back(cmd);
  }

  auto* eval = app.add_subcommand(kStageEvaluate, "Score predictions against composite ground truth");
  std::vector<std::string> preds, scorers;
  std::string gt_root, report_prefix, split;
  eval->add_option("--pred", preds, "[method=]dir holding <clip_id>/frame_*.png")->required();
  eval->add_option("--gt-root", gt_root, "Root holding <clip_id>/{gt,mask} (default: manifest directory)");
  eval->add_option("--scorer", scorers, "[metric=]command, an external perceptual scorer");
  eval->add_option("--split", split, "Only evaluate clips of this split");
  eval->add_option("--report", report_prefix, "Write <prefix>.txt and <prefix>.json");
  eval->add_flag("--json", json_out, "Print the report as JSON");

  auto* loss_cmd = app.add_subcommand("loss-check", "Finite-difference check of the motion-aware loss gradient");
  loss_cmd->set_help_flag("--help", "Print this help message and exit");
  int trials = 100;
  double h = 1e-4, ratio = 0.25, tolerance = 1e-4;
  loss_cmd->add_option("--trials", trials)->check(CLI::PositiveNumber);
  loss_cmd->add_option("--h", h, "Central-difference step");
  loss_cmd->add_option("--ratio", ratio, "Weight of the temporal sub-loss");
  loss_cmd->add_option("--tolerance", tolerance, "Maximum relative error");

  auto* review_cmd = app.add_subcommand(kStageReview, "Serve the manual-curation HTTP API");
  std::string host = "127.0.0.1", dataset_root, ui_dir;
  int port = 8765;
  review_cmd->add_option("--host", host);
  review_cmd->add_option("--port", port)->check(CLI::Range(0, 65535));
  review_cmd->add_option("--dataset-root", dataset_root, "Root of composite clip directories");
  review_cmd->add_option("--ui-dir", ui_dir, "Static UI bundle to serve at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (auto* cmd : stage_cmds) {
    if (!cmd->parsed()) continue;
    const StageReport report = run_stage(cmd->get_name(), make_config(g), stage_opts);
    if (json_out) {
      std::cout << report.to_json().dump(2) << "\n";
    } else {
      std::cout << report.render_text();
    }
    return 0;
  }

  if (eval->parsed()) {
    const fs::path mpath = manifest_path(g);
    const DatasetManifest manifest = read_manifest(mpath);
    EvaluateOptions opts;
    for (const auto& p : preds) opts.predictions.push_back(split_named(p, "pred"));
    for (std::size_t i = 0; i < scorers.size(); ++i) {
      opts.scorers.push_back(split_named(scorers[i], "perceptual" + (i ? std::to_string(i) : std::string())));
    }
    opts.gt_root = gt_root;
    if (!split.empty()) opts.split = split;
    const EvaluateResult r = run_evaluate(manifest, mpath, opts, g.workers.value_or(0));
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    if (!report_prefix.empty()) {
      std::ofstream(report_prefix + ".txt") << r.table.render_text();
      std::ofstream(report_prefix + ".json") << r.table.to_json().dump(2) << "\n";
    }
    std::cout << (json_out ? r.table.to_json().dump(2) + "\n" : r.table.render_text());
    return 0;
  }

  if (loss_cmd->parsed()) {
    loss::LossConfig cfg;
    cfg.motion_ratio = ratio;
    const auto s = loss::run_grad_check_trials(trials, h, g.seed.value_or(0), cfg, tolerance);
    std::printf("gradient check: %d trials, %d failures, worst relative error %.3e (tolerance %.1e)\n", s.trials,
                s.failures, s.worst_rel_error, s.tolerance);
    return s.failures == 0 ? 0 : 1;
  }

  if (review_cmd->parsed()) {
    const fs::path mpath = manifest_path(g);
    check_dependencies(read_manifest(mpath), kStageReview);
    ReviewService service({mpath, dataset_root, {}, ui_dir});
    const int bound = service.bind(host, port);
    std::cerr << "review service on http://" << host << ":" << bound << "\n";
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    service.run();
    g_service = nullptr;
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const DependencyError& e) {
    std::cerr << "dependency error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const EmptyInputError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const ScorerError& e) {
    std::cerr << "scorer error: " << e.what() << "\n" << e.diagnostics();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
