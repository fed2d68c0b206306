// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: train, eval, ablate, visualize-prompts, make-synthetic.
// Exit codes: 0 success, 1 validation error, 2 runtime error.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvp/errors.hpp"
#include "mvp/harness.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string flag_name(std::string key) {
  for (auto& c : key) {
    if (c == '_') c = '-';
  }
  return "--" + key;
}

// Config file first, then one flag per config key on top of it.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "key = value config file");
    for (const auto& key : mvp::config_keys()) {
      app->add_option(flag_name(key), overrides[key], "override '" + key + "'");
    }
  }

  mvp::TrainConfig resolve(const CLI::App* app) const {
    mvp::TrainConfig cfg = config_path.empty() ? mvp::TrainConfig{} : mvp::load_config(config_path);
    for (const auto& [key, value] : overrides) {
      if (app->count(flag_name(key)) > 0) mvp::set_config_value(cfg, key, value);
    }
    return cfg;
  }
};

void print_epoch(const mvp::EpochMetrics& m) {
  std::fprintf(stderr, "epoch %zu  lr %.3g  loss %.4f  train_acc %.3f", m.epoch, m.lr, m.loss, m.train_acc);
  if (m.heldout_acc) std::fprintf(stderr, "  heldout_acc %.3f", *m.heldout_acc);
  std::fprintf(stderr, "  (%.1fs)\n", m.seconds);
}

void print_report(const mvp::EvalReport& report, const std::vector<std::string>& names) {
  std::printf("oAcc %.4f over %zu objects\n", report.oacc, report.indices.size());
  for (std::size_t c = 0; c < report.per_class_acc.size(); ++c) {
    if (report.per_class_count[c] == 0) continue;
    std::printf("  %-16s %.4f (%zu)\n", names[c].c_str(), report.per_class_acc[c], report.per_class_count[c]);
  }
}

std::pair<mvp::FusionMode, std::size_t> parse_cell(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw mvp::ValidationError("grid cell '" + text + "' must look like mode:views");
  const std::string views = text.substr(colon + 1);
  std::size_t pos = 0;
  std::size_t n = 0;
  try {
    n = std::stoul(views, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != views.size() || views.empty()) throw mvp::ValidationError("grid cell '" + text + "': bad view count");
  return {mvp::parse_fusion_mode(text.substr(0, colon)), n};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view vision prompt fusion for few-shot point-cloud classification"};
  app.require_subcommand(1);

  ConfigFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint + metrics");
  train_flags.attach(train_cmd);

  std::string eval_ckpt, eval_out;
  std::size_t eval_votes = 0;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on its test split with TTA voting");
  eval_cmd->add_option("checkpoint", eval_ckpt, "checkpoint.mvpw")->required();
  eval_cmd->add_option("--tta-votes", eval_votes, "votes per object (default: from the checkpoint config)");
  eval_cmd->add_option("-o,--output", eval_out, "write the report as JSON");

  ConfigFlags ablate_flags;
  std::vector<std::uint64_t> ablate_seeds;
  std::vector<std::string> ablate_cells;
  auto* ablate_cmd = app.add_subcommand("ablate", "train and score a grid of mode/view settings");
  ablate_flags.attach(ablate_cmd);
  ablate_cmd->add_option("--seeds", ablate_seeds, "seeds to average over (default: the config seed)");
  ablate_cmd->add_option("--cells", ablate_cells, "mode:views cells, e.g. baseline:1 full:4 (default: the 7-row grid)");

  std::string vis_ckpt, vis_out = "prompts";
  std::size_t vis_index = 0;
  auto* vis_cmd = app.add_subcommand("visualize-prompts", "export per-view prompt images for one test object");
  vis_cmd->add_option("checkpoint", vis_ckpt, "checkpoint.mvpw")->required();
  vis_cmd->add_option("--index", vis_index, "position within the test split");
  vis_cmd->add_option("-o,--out", vis_out, "output directory");

  std::string syn_out;
  mvp::SyntheticOptions syn;
  std::size_t syn_points = 1024;
  std::uint64_t syn_seed = 0;
  auto* syn_cmd = app.add_subcommand("make-synthetic", "write a synthetic primitive dataset in the modelnet40 layout");
  syn_cmd->add_option("-o,--out", syn_out, "output directory")->required();
  syn_cmd->add_option("--classes", syn.classes, "number of classes (<= 8)");
  syn_cmd->add_option("--per-class", syn.per_class, "objects per class");
  syn_cmd->add_option("--points", syn_points, "points per object");
  syn_cmd->add_option("--seed", syn_seed, "generator seed");
  syn_cmd->add_option("--test-fraction", syn.test_fraction, "fraction of each class tagged test");
  syn_cmd->add_option("--jitter", syn.jitter, "Gaussian jitter sigma");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*train_cmd) {
      mvp::TrainConfig cfg = train_flags.resolve(train_cmd);
      if (cfg.output_dir.empty()) cfg.output_dir = "run";
      mvp::TrainOptions options{print_epoch};
      const auto result = mvp::train(cfg, options);
      std::printf("best epoch %zu; checkpoint %s\n", result.best_epoch, result.checkpoint_path->c_str());
    } else if (*eval_cmd) {
      const auto ckpt = mvp::load_checkpoint(eval_ckpt);
      const std::size_t votes = eval_votes > 0 ? eval_votes : ckpt.config.tta_votes;
      const auto report = mvp::evaluate(ckpt, votes);
      print_report(report, ckpt.class_names);
      if (!eval_out.empty()) {
        std::ofstream out(eval_out);
        out << mvp::to_json(report, ckpt.class_names).dump(2) << '\n';
        if (!out) throw mvp::IoError("cannot write '" + eval_out + "'");
      }
    } else if (*ablate_cmd) {
      const mvp::TrainConfig base = ablate_flags.resolve(ablate_cmd);
      std::vector<mvp::TrainConfig> grid;
      if (ablate_cells.empty()) {
        grid = mvp::table3_grid(base);
      } else {
        for (const auto& cell : ablate_cells) {
          auto [mode, views] = parse_cell(cell);
          mvp::TrainConfig c = base;
          c.mode = mode;
          c.views = views;
          grid.push_back(c);
        }
      }
      mvp::TrainOptions options{print_epoch};
      const auto rows = mvp::ablate(grid, ablate_seeds, options);
      std::printf("%s", mvp::format_ablation_table(rows).c_str());
    } else if (*vis_cmd) {
      const auto ckpt = mvp::load_checkpoint(vis_ckpt);
      const mvp::Dataset ds = mvp::load_run_dataset(ckpt.config);
      const auto test = ds.indices(mvp::Split::test);
      if (vis_index >= test.size()) {
        throw mvp::ValidationError("--index " + std::to_string(vis_index) + " outside the test split of " +
                                   std::to_string(test.size()));
      }
      const std::size_t obj = test[vis_index];
      const auto cloud = mvp::rotate_cloud(ds.clouds[obj], mvp::tta_rotation(ckpt.config.rotation, ckpt.config.seed, obj, 0));
      for (const auto& p : mvp::visualize_prompts(ckpt, cloud, vis_out)) std::printf("%s\n", p.c_str());
    } else if (*syn_cmd) {
      const auto ds = mvp::make_synthetic(syn.classes, syn.per_class, syn_points, syn_seed, syn.test_fraction, syn.jitter);
      mvp::write_modelnet_archive(ds, syn_out);
      std::printf("wrote %zu objects in %zu classes to %s\n", ds.size(), ds.num_classes(), syn_out.c_str());
    }
  } catch (const mvp::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
