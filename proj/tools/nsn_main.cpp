// Command-line front end: train, train-ref, eval, detach-eval, gradcheck, verify.
//
// Exit codes: 0 success, 1 verification failure, 2 usage/config/data error,
// 3 numerical divergence.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "nsn/checkpoint.hpp"
#include "nsn/config.hpp"
#include "nsn/family.hpp"
#include "nsn/mnist.hpp"
#include "nsn/train.hpp"
#include "nsn/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;

constexpr const char* kDataHelp =
    "Directory holding the uncompressed IDX files train-images-idx3-ubyte, train-labels-idx1-ubyte, "
    "t10k-images-idx3-ubyte and t10k-labels-idx1-ubyte (gunzip them first; tools/fetch_mnist.sh does this)";

struct RunFlags {
  std::map<std::string, std::string> values;  // config key -> value, applied after the config file
  std::string config_path;
  std::string resume;
  std::size_t max_steps = 0;
  bool quiet = false;
};

// Default L2: baselines 9e-5 / 5e-6 / 1e-5 for 0 / 1 / 2 hidden layers,
// NSN 9e-6 for one hidden layer, 9e-5 otherwise.
double default_l2(nsn::TrainMode mode, std::size_t n_hidden) {
  if (mode == nsn::TrainMode::kReference) {
    if (n_hidden == 1) return 5e-6;
    if (n_hidden == 2) return 1e-5;
    return 9e-5;
  }
  return n_hidden == 1 ? 9e-6 : 9e-5;
}

void add_run_flags(CLI::App* cmd, RunFlags& flags, bool reference) {
  auto add = [&](const std::string& name, const std::string& key, const std::string& help, const std::string& def) {
    cmd->add_option_function<std::string>(
           name, [&flags, key](const std::string& v) { flags.values[key] = v; }, help)
        ->default_str(def);
  };
  add("--data-dir", "data_dir", kDataHelp, "data/mnist");
  add("--n-hidden", "n_hidden", reference ? "Hidden layers of the baseline model {0,1,2}" : "Hidden layers of the base model {1,2}",
      reference ? "1" : "2");
  add("--epochs", "epochs", "Training epochs", "600");
  add("--batch", "batch", "Mini-batch size", "128");
  add("--lr", "lr", "Initial learning rate", "0.3");
  add("--alpha", "alpha", "Momentum coefficient", "0.9");
  add("--decay-every", "decay_every", "Epochs between learning-rate steps", "200");
  add("--decay-factor", "decay_factor", "Learning-rate multiplier per step", "0.333333");
  add("--l2", "l2",
      reference ? "L2 penalty (default by --n-hidden: 0->9e-5, 1->5e-6, 2->1e-5)"
                : "L2 penalty on the base model (default by --n-hidden: 1->9e-6, 2->9e-5)",
      "per n-hidden");
  add("--input-keep", "input_keep", "Dropout keep probability on the input", "0.8");
  add("--hidden-keep", "hidden_keep", "Dropout keep probability on hidden units", "0.5");
  add("--seed", "seed", "Seed for init, shuffling and dropout streams", "1");
  add("--shuffle", "shuffle", "Shuffle training data each epoch (true/false)", "true");
  add("--out-dir", "out_dir", "Output directory for metrics.csv, best.csv and checkpoints", "runs/<mode>-n<N>");
  cmd->add_option("--config", flags.config_path, "Flat key=value file applied before command-line flags");
  cmd->add_option("--resume", flags.resume, "Continue from a checkpoint (its config is the base, flags override)");
  cmd->add_option("--max-steps", flags.max_steps, "Cap on mini-batches per epoch (0 = full epochs)")->default_str("0");
  cmd->add_flag("--quiet", flags.quiet, "Suppress per-epoch progress");
}

nsn::TrainConfig build_config(const RunFlags& flags, nsn::TrainMode mode, const nsn::Checkpoint* resume) {
  std::string file_text;
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) throw nsn::ConfigError("cannot read config file " + flags.config_path);
    std::stringstream text;
    text << in.rdbuf();
    file_text = text.str();
  }
  auto apply_overrides = [&](nsn::TrainConfig& c) {
    nsn::apply_key_values(c, file_text);
    for (const auto& [key, value] : flags.values) nsn::apply_setting(c, key, value);
    c.mode = mode;
  };
  nsn::TrainConfig config;
  if (resume != nullptr) {
    config = nsn::config_from_checkpoint(*resume);
  } else {
    // The L2 default depends on the final n_hidden, so resolve that first.
    config.mode = mode;
    apply_overrides(config);
    const std::size_t n_hidden = config.n_hidden;
    config = nsn::TrainConfig{};
    config.l2_lambda = default_l2(mode, n_hidden);
  }
  apply_overrides(config);
  if (config.out_dir.empty()) {
    config.out_dir = std::string("runs/") + (mode == nsn::TrainMode::kNsn ? "nsn" : "ref") + "-n" +
                     std::to_string(config.n_hidden);
  }
  if (mode == nsn::TrainMode::kReference && config.n_hidden > 2) {
    throw nsn::ConfigError("train-ref supports --n-hidden 0, 1 or 2");
  }
  config.validate();
  return config;
}

nsn::MnistData load_data(const std::filesystem::path& dir) {
  for (const char* f : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                        "t10k-labels-idx1-ubyte"}) {
    if (!std::filesystem::exists(dir / f)) {
      throw nsn::IoError("missing MNIST file " + (dir / f).string() + " (see --data-dir; files must be uncompressed)");
    }
  }
  return nsn::load_mnist(dir);
}

void print_record(const nsn::MetricsRecord& r, const std::vector<std::size_t>& models, double seconds) {
  std::printf("epoch %zu lr %.6g", r.epoch, r.lr);
  for (std::size_t i = 0; i < models.size(); ++i) std::printf(" loss_m%zu %.5f", models[i], r.losses[i]);
  for (std::size_t i = 0; i < models.size(); ++i) std::printf(" acc_m%zu %.4f", models[i], r.accuracies[i]);
  std::printf(" (%.1fs)\n", seconds);
  std::fflush(stdout);
}

int run_training(const RunFlags& flags, nsn::TrainMode mode) {
  std::optional<nsn::Checkpoint> resume;
  if (!flags.resume.empty()) resume = nsn::load_checkpoint(flags.resume);
  const nsn::TrainConfig config = build_config(flags, mode, resume ? &*resume : nullptr);
  const auto data = load_data(config.data_dir);
  const auto models = nsn::reported_models(config);

  std::optional<nsn::TrainState> start;
  std::vector<nsn::MetricsRecord> prior;
  if (resume) {
    start = nsn::state_from_checkpoint(*resume);
    const auto metrics = config.out_dir / "metrics.csv";
    if (std::filesystem::exists(metrics)) {
      for (auto& r : nsn::read_metrics_csv(metrics)) {
        if (r.epoch < start->epoch) prior.push_back(std::move(r));
      }
    }
  }

  std::printf("%s training, n_hidden=%zu, epochs=%zu, batch=%zu, lr=%g, alpha=%g, l2=%g, out=%s\n",
              nsn::to_string(mode).c_str(), config.n_hidden, config.epochs, config.batch, config.schedule.base_lr,
              config.schedule.alpha, config.l2_lambda, config.out_dir.string().c_str());
  nsn::TrainHooks hooks;
  hooks.max_steps_per_epoch = flags.max_steps;
  if (!flags.quiet) {
    hooks.on_epoch = [&](const nsn::MetricsRecord& r, double s) { print_record(r, models, s); };
  }
  const auto result = nsn::train(config, data.train, data.test, std::move(start), std::move(prior), hooks);
  std::printf("best epoch %zu:", result.best.epoch);
  for (std::size_t i = 0; i < models.size(); ++i) std::printf(" acc_m%zu %.4f", models[i], result.best.accuracies[i]);
  std::printf("\n");
  return kExitOk;
}

// Input-first layers of model m over canonically ordered groups.
nsn::LayerStack<float> canonical_view(const std::vector<nsn::DenseLayer<float>>& groups, std::size_t model) {
  nsn::LayerStack<float> view;
  for (std::size_t g = model + 1; g-- > 0;) view.push_back(&groups[g]);
  return view;
}

std::size_t count_params(const nsn::LayerStack<float>& layers) {
  std::size_t total = 0;
  for (const auto* l : layers) total += l->param_count();
  return total;
}

int run_eval(const std::string& checkpoint_path, const std::string& data_dir) {
  const auto ckpt = nsn::load_checkpoint(checkpoint_path);
  const auto config = nsn::config_from_checkpoint(ckpt);
  const auto data = load_data(data_dir.empty() ? config.data_dir : std::filesystem::path(data_dir));
  std::printf("checkpoint %s: mode=%s n=%u epoch=%u\n", checkpoint_path.c_str(), nsn::to_string(config.mode).c_str(),
              ckpt.n, ckpt.epoch);
  const std::size_t first = config.mode == nsn::TrainMode::kNsn ? 0 : ckpt.n;
  for (std::size_t m = first; m <= ckpt.n; ++m) {
    const auto view = canonical_view(ckpt.groups, m);
    std::printf("model%zu accuracy %.4f params %zu\n", m, nsn::evaluate(view, data.test), count_params(view));
  }
  return kExitOk;
}

int run_detach_eval(const std::string& checkpoint_path, std::size_t drop, const std::string& data_dir) {
  const auto ckpt = nsn::load_checkpoint(checkpoint_path);
  if (drop > ckpt.n) {
    std::fprintf(stderr, "error: --drop-layers %zu exceeds the %u hidden layers of the base model\n", drop, ckpt.n);
    return kExitUsage;
  }
  const auto config = nsn::config_from_checkpoint(ckpt);
  const auto data = load_data(data_dir.empty() ? config.data_dir : std::filesystem::path(data_dir));
  nsn::LayerStack<float> layers;
  if (ckpt.n >= 1) {
    const nsn::ModelFamily family({ckpt.n, ckpt.groups.back().in(), ckpt.groups.back().in(), ckpt.groups[0].out()},
                                  ckpt.groups);
    layers = nsn::detach(family, drop);
    std::printf("detached %zu layer(s): model%zu accuracy %.4f params %zu\n", drop, ckpt.n - drop,
                nsn::evaluate(layers, data.test), nsn::param_count(family, ckpt.n - drop));
  } else {
    layers = canonical_view(ckpt.groups, 0);
    std::printf("detached 0 layer(s): model0 accuracy %.4f params %zu\n", nsn::evaluate(layers, data.test),
                count_params(layers));
  }
  return kExitOk;
}

int print_results(const std::vector<nsn::PropertyResult>& results) {
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%-4s %-26s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    ok = ok && r.passed;
  }
  for (const auto& r : results) {
    if (!r.passed) std::fprintf(stderr, "failed property: %s\n", r.name.c_str());
  }
  return ok ? kExitOk : kExitVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Network with sub-networks: train, detach and verify depth-detachable MLPs on MNIST"};
  app.require_subcommand(1);

  RunFlags train_flags;
  auto* train = app.add_subcommand("train", "Train a base model together with its sub-models");
  add_run_flags(train, train_flags, false);

  RunFlags ref_flags;
  auto* train_ref = app.add_subcommand("train-ref", "Train a regularly trained baseline (standard momentum)");
  add_run_flags(train_ref, ref_flags, true);

  std::string ckpt_path;
  std::string data_dir;
  auto* eval = app.add_subcommand("eval", "Test accuracy of every model stored in a checkpoint");
  eval->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  eval->add_option("--data-dir", data_dir, kDataHelp)->default_str("from checkpoint");

  std::size_t drop = 0;
  auto* detach_eval = app.add_subcommand("detach-eval", "Drop the base model's first k layers and evaluate");
  detach_eval->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  detach_eval->add_option("--drop-layers", drop, "Number of input-side weight layers to remove")->required();
  detach_eval->add_option("--data-dir", data_dir, kDataHelp)->default_str("from checkpoint");

  std::uint64_t verify_seed = 7;
  auto* gradcheck = app.add_subcommand("gradcheck", "Analytic vs central-difference gradients (64-bit)");
  gradcheck->add_option("--seed", verify_seed, "Seed for synthetic data and parameters")->default_str("7");
  auto* verify = app.add_subcommand("verify", "Run every property check on synthetic data");
  verify->add_option("--seed", verify_seed, "Seed for synthetic data and parameters")->default_str("7");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train) return run_training(train_flags, nsn::TrainMode::kNsn);
    if (*train_ref) return run_training(ref_flags, nsn::TrainMode::kReference);
    if (*eval) return run_eval(ckpt_path, data_dir);
    if (*detach_eval) return run_detach_eval(ckpt_path, drop, data_dir);
    nsn::VerifyOptions options;
    options.seed = verify_seed;
    if (*gradcheck) {
      return print_results({nsn::check_gradients(options), nsn::check_masked_gradients(options),
                            nsn::check_family_gradients(options)});
    }
    if (*verify) return print_results(nsn::run_verify(options));
  } catch (const nsn::DivergenceError& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return kExitDiverged;
  } catch (const nsn::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
