#include "nsn/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace nsn {
namespace {

FamilyDims dims_of(const TrainConfig& config) {
  return {config.n_hidden, config.width, config.width, kNumClasses};
}

// Re-throws library errors with the failing model prepended, keeping the type.
template <typename F>
auto with_model_context(std::size_t model, F&& f) -> decltype(f()) {
  const std::string where = "model " + std::to_string(model) + ": ";
  try {
    return f();
  } catch (const ShapeError& e) {
    throw ShapeError(where + e.what());
  } catch (const ConsistencyError& e) {
    throw ConsistencyError(where + e.what());
  } catch (const ValueError& e) {
    throw ValueError(where + e.what());
  }
}

void check_finite(float loss, std::size_t epoch, std::size_t step, std::size_t model) {
  if (!std::isfinite(loss)) {
    throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
                          " model " + std::to_string(model));
  }
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

Rng dropout_rng(const TrainConfig& config, std::size_t epoch, std::size_t step, std::size_t model) {
  return Rng(derive_seed(config.seeds.dropout, {static_cast<std::uint64_t>(Stream::kDropout), epoch, step, model}));
}

std::vector<float> train_step(ModelFamily& family, MomentumState& momentum, const Batch& batch,
                              const TrainConfig& config, std::size_t epoch, std::size_t step) {
  copy_up(family);
  const std::size_t n = family.n();
  std::vector<GradientSet<float>> grads(n + 1);
  std::vector<float> losses(n + 1);
  for (std::size_t m = 0; m <= n; ++m) {
    with_model_context(m, [&] {
      const ModelSpec spec = family_model_spec(family, m, config.input_keep, config.hidden_keep);
      const auto layers = family.view(m);
      Rng rng = dropout_rng(config, epoch, step, m);
      const auto cache = model_forward(spec, layers, batch.images, Mode::kTrain, &rng);
      losses[m] = nll_loss(cache.logp, batch.labels);
      check_finite(losses[m], epoch, step, m);
      grads[m] = model_backward(layers, cache, batch.labels);
      if (m == n) add_l2(grads[m], layers, static_cast<float>(config.l2_lambda));
    });
  }
  const GradientSet<float> shared = paired_average_gradients(grads);
  const auto lr = static_cast<float>(lr_at(config.schedule, epoch));
  optimizer_step(family.groups(), momentum, shared, MomentumFormat::kNsn, static_cast<float>(config.schedule.alpha),
                 lr);
  return losses;
}

LayerStack<float> reference_view(const std::vector<DenseLayer<float>>& layers) {
  LayerStack<float> stack;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) stack.push_back(&*it);
  return stack;
}

float reference_step(std::vector<DenseLayer<float>>& layers, MomentumState& momentum, const Batch& batch,
                     const TrainConfig& config, std::size_t epoch, std::size_t step) {
  const std::size_t model = layers.size() - 1;
  ModelSpec spec;
  if (model > 0) {
    spec.input_keep = config.input_keep;
    spec.hidden_keep = config.hidden_keep;
  }
  const auto stack = reference_view(layers);
  Rng rng = dropout_rng(config, epoch, step, model);
  const auto cache = model_forward(spec, stack, batch.images, Mode::kTrain, &rng);
  const float loss = nll_loss(cache.logp, batch.labels);
  check_finite(loss, epoch, step, model);
  GradientSet<float> grads = model_backward(stack, cache, batch.labels);
  add_l2(grads, stack, static_cast<float>(config.l2_lambda));
  // Gradients come out input-first; parameters are stored head-first.
  GradientSet<float> canonical(grads.rbegin(), grads.rend());
  optimizer_step(layers, momentum, canonical, MomentumFormat::kStandard, static_cast<float>(config.schedule.alpha),
                 static_cast<float>(lr_at(config.schedule, epoch)));
  return loss;
}

double evaluate(const LayerStack<float>& model, const Dataset& data, std::size_t chunk) {
  if (data.size() == 0) throw ShapeError("evaluate: empty dataset");
  ModelSpec spec;
  spec.classes = model.back()->out();
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
    const std::size_t end = std::min(begin + chunk, data.size());
    idx.resize(end - begin);
    for (std::size_t i = begin; i < end; ++i) idx[i - begin] = i;
    const Batch b = gather(data, idx);
    const auto pred = argmax_rows(model_forward(spec, model, b.images, Mode::kEval).logp);
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == b.labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<std::size_t> reported_models(const TrainConfig& config) {
  if (config.mode == TrainMode::kReference) return {config.n_hidden};
  std::vector<std::size_t> models(config.n_hidden + 1);
  for (std::size_t m = 0; m < models.size(); ++m) models[m] = m;
  return models;
}

TrainState initial_state(const TrainConfig& config) {
  config.validate();
  TrainState state;
  if (config.mode == TrainMode::kNsn) {
    state.groups = build_family(dims_of(config), config.seeds.init).groups();
  } else {
    for (std::size_t g = 0; g <= config.n_hidden; ++g) {
      state.groups.push_back(init_layer(g == 0 ? kNumClasses : config.width, config.width, config.seeds.init, g));
    }
  }
  state.momentum = MomentumState::zeros_like(state.groups);
  return state;
}

TrainState state_from_checkpoint(const Checkpoint& checkpoint) {
  return {checkpoint.groups, checkpoint.momentum, checkpoint.epoch};
}

Checkpoint make_checkpoint(const TrainConfig& config, const std::vector<DenseLayer<float>>& groups,
                           const MomentumState& momentum, std::size_t epoch) {
  Checkpoint c;
  c.n = static_cast<std::uint32_t>(groups.size() - 1);
  c.groups = groups;
  c.momentum = momentum;
  c.epoch = static_cast<std::uint32_t>(epoch);
  c.seeds = config.seeds;
  c.config_echo = config.to_key_values();
  return c;
}

std::vector<double> evaluate_models(const TrainConfig& config, const std::vector<DenseLayer<float>>& groups,
                                    const Dataset& test) {
  if (config.mode == TrainMode::kReference) return {evaluate(reference_view(groups), test)};
  std::vector<double> acc;
  // Views over the caller's storage, same layout as ModelFamily::view.
  for (std::size_t m = 0; m < groups.size(); ++m) {
    LayerStack<float> view;
    for (std::size_t g = m + 1; g-- > 0;) view.push_back(&groups[g]);
    acc.push_back(evaluate(view, test));
  }
  return acc;
}

BestReport best_of(const std::vector<MetricsRecord>& history) {
  BestReport best;
  bool have = false;
  for (const auto& r : history) {
    if (!have || r.accuracies.back() > best.accuracies.back()) {
      best = {r.epoch, r.accuracies};
      have = true;
    }
  }
  return best;
}

std::string metrics_header(const std::vector<std::size_t>& models) {
  std::string h = "epoch,lr";
  for (auto m : models) h += ",loss_m" + std::to_string(m);
  for (auto m : models) h += ",acc_m" + std::to_string(m);
  return h;
}

std::string metrics_row(const MetricsRecord& r) {
  std::string row = std::to_string(r.epoch) + "," + format_number(r.lr);
  for (double l : r.losses) row += "," + format_number(l);
  for (double a : r.accuracies) row += "," + format_number(a);
  return row;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double to_double(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": bad number '" + s + "'");
  }
}

}  // namespace

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header");
  const auto header = split_csv(line);
  if (header.size() < 4 || header[0] != "epoch" || header[1] != "lr" || header.size() % 2 != 0) {
    throw FormatError(path.string() + ": unexpected header '" + line + "'");
  }
  const std::size_t models = (header.size() - 2) / 2;
  std::vector<MetricsRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw FormatError(path.string() + ": ragged row '" + line + "'");
    MetricsRecord r;
    r.epoch = static_cast<std::size_t>(to_double(cells[0], path));
    r.lr = to_double(cells[1], path);
    for (std::size_t i = 0; i < models; ++i) r.losses.push_back(to_double(cells[2 + i], path));
    for (std::size_t i = 0; i < models; ++i) r.accuracies.push_back(to_double(cells[2 + models + i], path));
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_best_csv(const std::filesystem::path& path, const std::vector<std::size_t>& models, const BestReport& best) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "best_epoch";
  for (auto m : models) out << ",acc_m" << m;
  out << '\n' << best.epoch;
  for (double a : best.accuracies) out << ',' << format_number(a);
  out << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

BestReport read_best_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header, row;
  if (!std::getline(in, header) || !std::getline(in, row)) throw FormatError(path.string() + ": expected two lines");
  const auto h = split_csv(header);
  const auto cells = split_csv(row);
  if (h.empty() || h[0] != "best_epoch" || cells.size() != h.size()) {
    throw FormatError(path.string() + ": malformed best report");
  }
  BestReport best;
  best.epoch = static_cast<std::size_t>(to_double(cells[0], path));
  for (std::size_t i = 1; i < cells.size(); ++i) best.accuracies.push_back(to_double(cells[i], path));
  return best;
}

TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& test_set,
                  std::optional<TrainState> start, std::vector<MetricsRecord> prior_history,
                  const TrainHooks& hooks) {
  config.validate();
  if (train_set.images.cols() != config.width || test_set.images.cols() != config.width) {
    throw ConfigError("dataset width " + std::to_string(train_set.images.cols()) + " does not match model width " +
                      std::to_string(config.width));
  }
  TrainState state = start ? std::move(*start) : initial_state(config);
  const auto models = reported_models(config);

  std::optional<ModelFamily> family;
  if (config.mode == TrainMode::kNsn) family.emplace(dims_of(config), std::move(state.groups));
  auto& groups = family ? family->groups() : state.groups;

  TrainResult result;
  result.history = std::move(prior_history);
  result.best = best_of(result.history);

  const bool write = !config.out_dir.empty();
  const auto metrics_path = config.out_dir / "metrics.csv";
  if (write) {
    std::filesystem::create_directories(config.out_dir);
    std::ofstream out(metrics_path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + metrics_path.string() + " for writing");
    out << metrics_header(models) << '\n';
    for (const auto& r : result.history) out << metrics_row(r) << '\n';
  }

  const BatchPlan plan{config.batch, config.shuffle, config.seeds.shuffle};
  for (std::size_t epoch = state.epoch; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const EpochBatches batches(train_set, plan, epoch);
    std::size_t steps = batches.size();
    if (hooks.max_steps_per_epoch > 0) steps = std::min(steps, hooks.max_steps_per_epoch);

    MetricsRecord record;
    record.epoch = epoch;
    record.lr = lr_at(config.schedule, epoch);
    record.losses.assign(models.size(), 0.0);
    for (std::size_t s = 0; s < steps; ++s) {
      const Batch batch = batches[s];
      if (family) {
        const auto losses = train_step(*family, state.momentum, batch, config, epoch, s);
        for (std::size_t m = 0; m < losses.size(); ++m) record.losses[m] += losses[m];
      } else {
        record.losses[0] += reference_step(groups, state.momentum, batch, config, epoch, s);
      }
    }
    for (double& l : record.losses) l /= static_cast<double>(steps);
    record.accuracies = evaluate_models(config, groups, test_set);
    state.epoch = epoch + 1;

    const bool improved = result.history.empty() || record.accuracies.back() > result.best.accuracies.back();
    result.history.push_back(record);
    if (improved) result.best = {record.epoch, record.accuracies};

    if (write) {
      std::ofstream out(metrics_path, std::ios::app);
      out << metrics_row(record) << '\n';
      out.flush();
      if (!out) throw IoError("write failed for " + metrics_path.string());
      const auto ckpt = make_checkpoint(config, groups, state.momentum, state.epoch);
      save_checkpoint(config.out_dir / "last.ckpt", ckpt);
      if (improved) {
        save_checkpoint(config.out_dir / "best.ckpt", ckpt);
        write_best_csv(config.out_dir / "best.csv", models, result.best);
      }
    }
    if (hooks.on_epoch) {
      hooks.on_epoch(record, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
  }

  if (family) state.groups = std::move(family->groups());
  if (write) {
    save_checkpoint(config.out_dir / "final.ckpt", make_checkpoint(config, state.groups, state.momentum, state.epoch));
    if (!result.history.empty()) write_best_csv(config.out_dir / "best.csv", models, result.best);
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace nsn
