// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "mvp/errors.hpp"

namespace fs = std::filesystem;

namespace mvp {

namespace {

constexpr const char* kCheckpointFormat = "mvp-checkpoint-v1";

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Stream tags keep the derived seeds of different consumers apart.
enum : std::uint64_t {
  kTagTrainRotation = 1,
  kTagTtaRotation,
  kTagSplit,
  kTagHoldout,
  kTagOrder,
  kTagHeldoutEval,
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create directory '" + dir.string() + "'" + (ec ? ": " + ec.message() : ""));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

nlohmann::json matrix_json(const Eigen::Matrix3d& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) rows.push_back({r(i, 0), r(i, 1), r(i, 2)});
  return rows;
}

std::vector<std::string> trainable_names(const MvNet& model) {
  std::vector<std::string> out;
  for (const auto& p : model.parameters()) {
    if (p.role == ParamRole::trainable) out.push_back(p.name);
  }
  return out;
}

TensorRecord record_of(const std::string& name, const Shape& shape, std::span<const double> values) {
  return {name, shape, std::vector<double>(values.begin(), values.end())};
}

}  // namespace

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t z = 0x6D7670726F6D7074ull;
  for (auto p : parts) z = splitmix64(z ^ splitmix64(p));
  return z;
}

Eigen::Matrix3d train_rotation(const TrainConfig& cfg, std::size_t epoch, std::size_t index) {
  RotationSpec spec = cfg.rotation;
  spec.seed = derive_seed({cfg.seed, kTagTrainRotation, epoch, index});
  return sample_rotation(spec);
}

Eigen::Matrix3d tta_rotation(const RotationSpec& spec, std::uint64_t seed, std::size_t index,
                             std::size_t vote) {
  RotationSpec s = spec;
  s.seed = derive_seed({seed, kTagTtaRotation, index, vote});
  return sample_rotation(s);
}

nlohmann::json to_json(const EpochMetrics& m) {
  nlohmann::json j{{"epoch", m.epoch},         {"lr", m.lr},          {"loss", m.loss},
                   {"train_acc", m.train_acc}, {"seconds", m.seconds}};
  j["heldout_acc"] = m.heldout_acc ? nlohmann::json(*m.heldout_acc) : nlohmann::json(nullptr);
  return j;
}

EpochMetrics epoch_metrics_from_json(const nlohmann::json& j) {
  EpochMetrics m;
  m.epoch = j.at("epoch").get<std::size_t>();
  m.lr = j.at("lr").get<double>();
  m.loss = j.at("loss").get<double>();
  m.train_acc = j.at("train_acc").get<double>();
  m.seconds = j.value("seconds", 0.0);
  if (j.contains("heldout_acc") && !j["heldout_acc"].is_null()) m.heldout_acc = j["heldout_acc"].get<double>();
  return m;
}

// ------------------------------------------------------------ checkpoints --

WeightFile capture_state(const MvNet& model, const AdamW* optimizer) {
  WeightFile wf;
  for (const auto& p : model.parameters()) {
    if (p.role == ParamRole::frozen) continue;
    wf.tensors.push_back(record_of(p.name, p.tensor.shape(), p.tensor.values()));
  }
  if (optimizer) {
    const auto names = trainable_names(model);
    const auto& params = optimizer->params();
    if (names.size() != params.size()) throw ValidationError("capture_state: optimizer does not match model");
    for (std::size_t i = 0; i < names.size(); ++i) {
      wf.tensors.push_back(record_of("optimizer.exp_avg." + names[i], params[i].shape(), optimizer->first_moments()[i]));
      wf.tensors.push_back(record_of("optimizer.exp_avg_sq." + names[i], params[i].shape(), optimizer->second_moments()[i]));
    }
    wf.metadata["optimizer_steps"] = optimizer->steps();
  }
  return wf;
}

void restore_state(MvNet& model, AdamW* optimizer, const WeightFile& state) {
  std::vector<std::string> problems;
  auto copy_into = [&](const std::string& name, std::span<double> dst, const Shape& shape) {
    const TensorRecord* rec = state.find(name);
    if (!rec) {
      problems.push_back("missing " + name);
    } else if (rec->shape != shape) {
      problems.push_back(name + " has shape " + shape_str(rec->shape) + ", expected " + shape_str(shape));
    } else {
      std::copy(rec->values.begin(), rec->values.end(), dst.begin());
    }
  };
  for (auto& p : model.parameters()) {
    if (p.role == ParamRole::frozen) continue;
    copy_into(p.name, p.tensor.values(), p.tensor.shape());
  }
  if (optimizer && state.metadata.contains("optimizer_steps")) {
    const auto names = trainable_names(model);
    const auto& params = optimizer->params();
    if (names.size() != params.size()) throw ValidationError("restore_state: optimizer does not match model");
    for (std::size_t i = 0; i < names.size(); ++i) {
      copy_into("optimizer.exp_avg." + names[i], optimizer->first_moments()[i], params[i].shape());
      copy_into("optimizer.exp_avg_sq." + names[i], optimizer->second_moments()[i], params[i].shape());
    }
    optimizer->set_steps(state.metadata["optimizer_steps"].get<std::uint64_t>());
  }
  if (!problems.empty()) {
    std::string msg = "checkpoint state does not match the model:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw LoadError(msg);
  }
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  nlohmann::json meta;
  meta["format"] = kCheckpointFormat;
  meta["epoch"] = ckpt.epoch;
  meta["config"] = serialize_config(ckpt.config);
  meta["class_names"] = ckpt.class_names;
  meta["history"] = nlohmann::json::array();
  for (const auto& m : ckpt.history) meta["history"].push_back(to_json(m));
  meta["backbone"] = {{"arch", ckpt.config.backbone},
                      {"weights", ckpt.config.backbone_weights.string()},
                      {"init_seed", ckpt.config.seed}};
  meta["state"] = ckpt.state.metadata;

  WeightFile out;
  out.metadata = meta;
  out.tensors = ckpt.state.tensors;
  write_weight_file(path, out, Dtype::f64);
  write_text(fs::path(path.string() + ".json"), meta.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& path) {
  WeightFile file = read_weight_file(path);
  const auto& meta = file.metadata;
  if (meta.value("format", "") != kCheckpointFormat) {
    throw LoadError("'" + path.string() + "' is not a checkpoint (format tag missing)");
  }
  Checkpoint ckpt;
  try {
    ckpt.config = parse_config(meta.at("config").get<std::string>());
    ckpt.class_names = meta.at("class_names").get<std::vector<std::string>>();
    ckpt.epoch = meta.at("epoch").get<std::size_t>();
    for (const auto& m : meta.at("history")) ckpt.history.push_back(epoch_metrics_from_json(m));
    ckpt.state.metadata = meta.value("state", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("'" + path.string() + "': malformed checkpoint metadata: " + e.what());
  } catch (const ValidationError& e) {
    throw LoadError("'" + path.string() + "': " + e.what());
  }
  ckpt.state.tensors = std::move(file.tensors);
  return ckpt;
}

MvNet build_model(const Checkpoint& ckpt) {
  MvNet model(ckpt.config.model_config(ckpt.class_names.size()));
  restore_state(model, nullptr, ckpt.state);
  return model;
}

// ------------------------------------------------------------- training ----

Dataset load_run_dataset(const TrainConfig& cfg) {
  const fs::path root = cfg.resolved_data_root();
  if (cfg.dataset != DatasetKind::synthetic && root.empty()) {
    throw ValidationError("dataset " + to_string(cfg.dataset) + " needs data_root or MVP_DATA_ROOT");
  }
  return load_dataset(cfg.dataset, root, cfg.n_points, cfg.seed, cfg.synthetic);
}

RunSplit make_run_split(const Dataset& ds, const TrainConfig& cfg) {
  RunSplit out;
  out.shots = kshot_split(ds, cfg.shots, derive_seed({cfg.seed, kTagSplit}));
  const bool hold = cfg.select_best && cfg.shots >= 4;
  Rng rng(derive_seed({cfg.seed, kTagHoldout}));
  for (const auto& members : out.shots.per_class) {
    std::vector<std::size_t> pool = members;
    std::size_t n_hold = 0;
    if (hold) {
      std::shuffle(pool.begin(), pool.end(), rng);
      n_hold = pool.size() / 4;
    }
    out.heldout.insert(out.heldout.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_hold));
    out.fit.insert(out.fit.end(), pool.begin() + static_cast<std::ptrdiff_t>(n_hold), pool.end());
  }
  std::sort(out.fit.begin(), out.fit.end());
  std::sort(out.heldout.begin(), out.heldout.end());
  return out;
}

StepResult train_step(MvNet& model, AdamW& optimizer, std::span<const PointCloud> batch,
                      std::span<const int> labels) {
  optimizer.zero_grad();
  const ClassScores scores = model.forward(batch, true);
  const Tensor loss = xent_loss(scores, labels);
  StepResult result;
  result.loss = loss.item();
  if (!std::isfinite(result.loss)) {
    throw TrainingError("non-finite training loss (" + std::to_string(result.loss) + ")");
  }
  loss.backward();
  optimizer.step();
  optimizer.zero_grad();
  const auto preds = scores.predictions();
  for (std::size_t i = 0; i < preds.size(); ++i) result.correct += preds[i] == labels[i];
  return result;
}

TrainResult train(const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  const Dataset ds = load_run_dataset(cfg);
  const RunSplit split = make_run_split(ds, cfg);
  if (split.fit.empty()) throw ValidationError("no training objects after the K-shot split");

  const bool write = !cfg.output_dir.empty();
  std::ofstream metrics;
  if (write) {
    ensure_dir(cfg.output_dir);
    write_text(cfg.output_dir / "config.cfg", serialize_config(cfg));
    metrics.open(cfg.output_dir / "metrics.jsonl");
    if (!metrics) throw IoError("cannot write metrics under '" + cfg.output_dir.string() + "'");
  }

  MvNet model(cfg.model_config(ds.num_classes()));
  AdamWOptions opt_options;
  opt_options.lr = cfg.lr;
  opt_options.weight_decay = cfg.weight_decay;
  AdamW optimizer(model.trainable(), opt_options);

  TrainResult result;
  std::vector<EpochMetrics> history;
  WeightFile best_state;
  double best_acc = -1.0;
  const std::uint64_t heldout_seed = derive_seed({cfg.seed, kTagHeldoutEval});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    optimizer.set_lr(cosine_lr(cfg.lr, cfg.lr_min, epoch, cfg.epochs));
    std::vector<std::size_t> order = split.fit;
    Rng order_rng(derive_seed({cfg.seed, kTagOrder, epoch}));
    std::shuffle(order.begin(), order.end(), order_rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<PointCloud> batch;
      std::vector<int> labels;
      std::vector<Eigen::Matrix3d> rotations;
      for (std::size_t b = start; b < end; ++b) {
        rotations.push_back(train_rotation(cfg, epoch, order[b]));
        batch.push_back(rotate_cloud(ds.clouds[order[b]], rotations.back()));
        labels.push_back(ds.label(order[b]));
      }
      StepResult step;
      try {
        step = train_step(model, optimizer, batch, labels);
      } catch (const TrainingError& e) {
        nlohmann::json dump{{"error", e.what()}, {"epoch", epoch}, {"step", result.step_losses.size()},
                            {"lr", optimizer.lr()}};
        dump["objects"] = nlohmann::json::array();
        for (std::size_t b = 0; b < batch.size(); ++b) {
          nlohmann::json obj{{"index", order[start + b]}, {"label", labels[b]}, {"rotation", matrix_json(rotations[b])}};
          const auto& c = batch[b].coords;
          obj["coords"] = std::vector<double>(c.data(), c.data() + c.size());
          dump["objects"].push_back(std::move(obj));
        }
        std::string where = "(no output_dir set, dump not written)";
        if (write) {
          const fs::path dump_path = cfg.output_dir / "nonfinite_batch.json";
          write_text(dump_path, dump.dump(2) + "\n");
          where = "batch dumped to " + dump_path.string();
        }
        throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + "; " + where);
      }
      result.step_losses.push_back(step.loss);
      loss_sum += step.loss * static_cast<double>(batch.size());
      correct += step.correct;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.lr = optimizer.lr();
    m.loss = loss_sum / static_cast<double>(order.size());
    m.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    if (!split.heldout.empty()) {
      m.heldout_acc = evaluate(model, ds, split.heldout, 1, cfg.rotation, heldout_seed, cfg.batch_size).oacc;
      if (*m.heldout_acc > best_acc) {
        best_acc = *m.heldout_acc;
        best_state = capture_state(model, &optimizer);
        result.best_epoch = epoch;
      }
    }
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.push_back(m);
    if (write) metrics << to_json(m).dump() << '\n' << std::flush;
    if (options.on_epoch) options.on_epoch(m);
  }

  if (split.heldout.empty()) {
    best_state = capture_state(model, &optimizer);
    result.best_epoch = cfg.epochs - 1;
  }
  result.checkpoint = Checkpoint{cfg, ds.class_names, result.best_epoch + 1, history, std::move(best_state)};
  if (write) {
    const fs::path path = cfg.output_dir / "checkpoint.mvpw";
    save_checkpoint(result.checkpoint, path);
    result.checkpoint_path = path;
  }
  return result;
}

// ----------------------------------------------------------- evaluation ----

int plurality_vote(std::span<const int> votes, std::size_t num_classes) {
  if (votes.empty()) throw ValidationError("plurality_vote: no votes");
  std::vector<std::size_t> counts(num_classes, 0);
  for (int v : votes) {
    if (v < 0 || static_cast<std::size_t>(v) >= num_classes) throw ValidationError("plurality_vote: class out of range");
    ++counts[static_cast<std::size_t>(v)];
  }
  // max_element returns the first maximum, i.e. the lowest class on ties.
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

EvalReport evaluate(MvNet& model, const Dataset& ds, std::span<const std::size_t> indices,
                    std::size_t tta_votes, const RotationSpec& spec, std::uint64_t seed,
                    std::size_t batch_size) {
  if (tta_votes < 1) throw ValidationError("tta_votes must be at least 1");
  if (batch_size < 1) throw ValidationError("evaluate: batch_size must be positive");
  if (indices.empty()) throw ValidationError("evaluate: no objects to score");
  NoGradGuard no_grad;
  const std::size_t n = indices.size();
  const std::size_t classes = model.config().num_classes;
  EvalReport report;
  report.indices.assign(indices.begin(), indices.end());
  report.votes.assign(n, std::vector<int>(tta_votes, 0));
  for (std::size_t v = 0; v < tta_votes; ++v) {
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t end = std::min(n, start + batch_size);
      std::vector<PointCloud> batch;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(rotate_cloud(ds.clouds[indices[i]], tta_rotation(spec, seed, indices[i], v)));
      }
      const auto preds = model.forward(batch, false).predictions();
      for (std::size_t i = start; i < end; ++i) report.votes[i][v] = preds[i - start];
    }
  }
  report.per_class_count.assign(classes, 0);
  std::vector<std::size_t> hits(classes, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = ds.label(indices[i]);
    const int pred = plurality_vote(report.votes[i], classes);
    report.labels.push_back(label);
    report.predictions.push_back(pred);
    ++report.per_class_count[static_cast<std::size_t>(label)];
    hits[static_cast<std::size_t>(label)] += pred == label;
  }
  report.oacc = overall_accuracy(report.predictions, report.labels);
  for (std::size_t c = 0; c < classes; ++c) {
    report.per_class_acc.push_back(report.per_class_count[c] == 0
                                       ? std::numeric_limits<double>::quiet_NaN()
                                       : static_cast<double>(hits[c]) / static_cast<double>(report.per_class_count[c]));
  }
  return report;
}

EvalReport evaluate(const Checkpoint& ckpt, std::size_t tta_votes) {
  const Dataset ds = load_run_dataset(ckpt.config);
  if (ds.class_names != ckpt.class_names) {
    throw LoadError("dataset classes do not match the checkpoint (" + std::to_string(ds.num_classes()) +
                    " vs " + std::to_string(ckpt.class_names.size()) + ")");
  }
  MvNet model = build_model(ckpt);
  const auto test = ds.indices(Split::test);
  return evaluate(model, ds, test, tta_votes, ckpt.config.rotation, ckpt.config.seed, ckpt.config.batch_size);
}

nlohmann::json to_json(const EvalReport& report, std::span<const std::string> class_names) {
  nlohmann::json j{{"oacc", report.oacc}, {"objects", report.indices.size()}};
  j["tta_votes"] = report.votes.empty() ? 0 : report.votes.front().size();
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t c = 0; c < report.per_class_acc.size(); ++c) {
    const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
    const double acc = report.per_class_acc[c];
    per[name] = {{"acc", std::isnan(acc) ? nlohmann::json(nullptr) : nlohmann::json(acc)},
                 {"count", report.per_class_count[c]}};
  }
  j["per_class"] = per;
  return j;
}

// ------------------------------------------------------------- ablation ----

std::vector<TrainConfig> table3_grid(const TrainConfig& base) {
  const std::pair<FusionMode, std::size_t> rows[] = {
      {FusionMode::baseline, 1}, {FusionMode::baseline, 4}, {FusionMode::attention_only, 4},
      {FusionMode::full, 2},     {FusionMode::full, 4},     {FusionMode::full, 6},
      {FusionMode::full, 8}};
  std::vector<TrainConfig> out;
  for (auto [mode, views] : rows) {
    TrainConfig c = base;
    c.mode = mode;
    c.views = views;
    out.push_back(c);
  }
  return out;
}

void validate_grid(std::span<const TrainConfig> grid) {
  if (grid.empty()) throw ValidationError("ablation grid is empty");
  auto normalized = [&](TrainConfig c) {
    c.mode = grid.front().mode;
    c.views = grid.front().views;
    return serialize_config(c);
  };
  const std::string ref = normalized(grid.front());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i].validate();
    if (normalized(grid[i]) != ref) {
      const std::string a = serialize_config(grid.front()), b = serialize_config(grid[i]);
      std::istringstream sa(a), sb(b);
      std::string la, lb, diff;
      while (std::getline(sa, la) && std::getline(sb, lb)) {
        if (la != lb && la.rfind("mode", 0) != 0 && la.rfind("views", 0) != 0) diff = la + " vs " + lb;
      }
      throw ValidationError("ablation cell " + std::to_string(i) + " differs from cell 0 beyond mode/views: " + diff);
    }
  }
}

std::vector<AblationRow> ablate(std::span<const TrainConfig> grid, std::span<const std::uint64_t> seeds,
                                const TrainOptions& options) {
  validate_grid(grid);
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const TrainConfig& cell = grid[i];
    AblationRow row;
    row.mode = cell.mode;
    row.views = cell.views;
    row.attention_fusion = cell.mode != FusionMode::baseline;
    row.conv_fusion = cell.mode == FusionMode::full;
    std::vector<std::uint64_t> cell_seeds(seeds.begin(), seeds.end());
    if (cell_seeds.empty()) cell_seeds.push_back(cell.seed);
    for (auto seed : cell_seeds) {
      TrainConfig cfg = cell;
      cfg.seed = seed;
      if (!cell.output_dir.empty()) {
        cfg.output_dir = cell.output_dir / ("cell" + std::to_string(i) + "_" + to_string(cell.mode) + "_" +
                                            std::to_string(cell.views) + "v_seed" + std::to_string(seed));
      }
      TrainResult trained = train(cfg, options);
      row.per_seed.push_back(evaluate(trained.checkpoint, cfg.tta_votes).oacc);
    }
    row.oacc = std::accumulate(row.per_seed.begin(), row.per_seed.end(), 0.0) / static_cast<double>(row.per_seed.size());
    row.oacc_min = *std::min_element(row.per_seed.begin(), row.per_seed.end());
    row.oacc_max = *std::max_element(row.per_seed.begin(), row.per_seed.end());
    rows.push_back(row);
  }
  if (!grid.front().output_dir.empty()) {
    ensure_dir(grid.front().output_dir);
    std::string lines;
    for (const auto& r : rows) lines += to_json(r).dump() + "\n";
    write_text(grid.front().output_dir / "ablation.jsonl", lines);
  }
  return rows;
}

nlohmann::json to_json(const AblationRow& row) {
  return {{"attention_fusion", row.attention_fusion},
          {"conv_fusion", row.conv_fusion},
          {"views", row.views},
          {"mode", to_string(row.mode)},
          {"oAcc", row.oacc},
          {"oAcc_min", row.oacc_min},
          {"oAcc_max", row.oacc_max},
          {"per_seed", row.per_seed}};
}

std::string format_ablation_table(std::span<const AblationRow> rows) {
  std::ostringstream out;
  out << "Attention Fusion  Conv Fusion  #views  oAcc(%)   range\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(18) << (r.attention_fusion ? "yes" : "no") << std::setw(13)
        << (r.conv_fusion ? "yes" : "no") << std::setw(8) << r.views << std::fixed << std::setprecision(2)
        << std::setw(10) << 100.0 * r.oacc;
    if (r.per_seed.size() > 1) out << 100.0 * r.oacc_min << "-" << 100.0 * r.oacc_max;
    out << '\n';
  }
  return out.str();
}

// -------------------------------------------------------- visualization ----

RgbImage prompt_image(const Tensor& prompts, std::size_t view) {
  if (prompts.rank() != 4 || prompts.dim(1) != 3 || view >= prompts.dim(0)) {
    throw ValidationError("prompt_image: expected [M,3,H,W] with view < M, got " + shape_str(prompts.shape()));
  }
  const std::size_t h = prompts.dim(2), w = prompts.dim(3), plane = h * w;
  RgbImage img(w, h);
  for (std::size_t c = 0; c < 3; ++c) {
    const double* src = prompts.data() + (view * 3 + c) * plane;
    const auto [lo, hi] = std::minmax_element(src, src + plane);
    const double min = *lo, range = *hi - *lo;
    for (std::size_t p = 0; p < plane; ++p) {
      const double v = range > 0.0 ? std::round(255.0 * (src[p] - min) / range) : 128.0;
      img.pixels[p * 3 + c] = static_cast<std::uint8_t>(v);
    }
  }
  return img;
}

RgbImage render_points(const PointCloud& cloud, std::size_t size) {
  if (size < 2) throw ValidationError("render_points: size must be at least 2");
  RgbImage img(size, size, 255);
  double extent = 1e-12;
  for (Eigen::Index i = 0; i < cloud.coords.rows(); ++i) {
    extent = std::max({extent, std::abs(cloud.coords(i, 0)), std::abs(cloud.coords(i, 1))});
  }
  const double scale = 0.5 * static_cast<double>(size - 1) / extent;
  const auto last = static_cast<long>(size - 1);
  for (Eigen::Index i = 0; i < cloud.coords.rows(); ++i) {
    const long col = std::lround(0.5 * static_cast<double>(size - 1) + cloud.coords(i, 0) * scale);
    const long row = std::lround(0.5 * static_cast<double>(size - 1) - cloud.coords(i, 1) * scale);
    for (long dr = 0; dr < 2; ++dr) {
      for (long dc = 0; dc < 2; ++dc) {
        const long r = std::clamp(row + dr, 0L, last), c = std::clamp(col + dc, 0L, last);
        std::uint8_t* px = img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
        px[0] = 30;
        px[1] = 30;
        px[2] = 30;
      }
    }
  }
  return img;
}

std::vector<fs::path> visualize_prompts(const Checkpoint& ckpt, const PointCloud& cloud, const fs::path& out_dir) {
  MvNet model = build_model(ckpt);
  Tensor images;
  {
    NoGradGuard no_grad;
    images = model.prompts(cloud).images;
  }
  ensure_dir(out_dir);
  std::vector<fs::path> written;
  for (std::size_t v = 0; v < images.dim(0); ++v) {
    const fs::path p = out_dir / ("view_" + std::to_string(v) + ".png");
    write_png(p, prompt_image(images, v));
    written.push_back(p);
  }
  const fs::path points = out_dir / "points.png";
  write_png(points, render_points(cloud));
  written.push_back(points);
  return written;
}

}  // namespace mvp
