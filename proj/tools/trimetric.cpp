#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "trimetric/checkpoint.hpp"
#include "trimetric/data.hpp"
#include "trimetric/error.hpp"
#include "trimetric/eval.hpp"
#include "trimetric/log.hpp"
#include "trimetric/network.hpp"
#include "trimetric/parallel.hpp"
#include "trimetric/run_config.hpp"
#include "trimetric/trainer.hpp"
#include "trimetric/triplet_loss.hpp"
#include "trimetric/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitNumericError = 3;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required) {
  auto* opt = cmd->add_option("--config", flags.config_path, "JSON run configuration");
  if (config_required) opt->required();
  cmd->add_option("--seed", flags.seed, "Override the configured seed");
  cmd->add_option("--threads", flags.threads, "Worker threads (1 = bitwise reproducible)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", flags.out, "Override the primary output path");
}

trimetric::Dataset build_dataset(const trimetric::RunConfig& cfg) {
  using namespace trimetric;
  if (cfg.data.synthetic) {
    const SyntheticSpec& s = *cfg.data.synthetic;
    Rng rng(s.seed);
    return synth_dataset(s.classes, s.images_per_class, s.noise, rng, s.height, s.width);
  }
  if (cfg.data.root.empty()) {
    throw ConfigError("config needs data.root or data.synthetic");
  }
  const int h = cfg.data.resize_height ? cfg.data.resize_height : cfg.arch.in_height;
  const int w = cfg.data.resize_width ? cfg.data.resize_width : cfg.arch.in_width;
  return load_dataset(cfg.data.root, h, w);
}

struct TrainOverrides {
  std::optional<int> max_iterations;
  std::optional<double> lr_base;
  std::optional<double> lr_decay;
  std::optional<int> classes_per_iteration;
  std::optional<int> triplets_per_person;
  std::optional<int> convergence_threshold;
  std::optional<double> margin;

  void apply(trimetric::TrainConfig& train) const {
    if (max_iterations) train.max_iterations = *max_iterations;
    if (lr_base) train.learning_rate.base = *lr_base;
    if (lr_decay) train.learning_rate.decay = *lr_decay;
    if (classes_per_iteration) train.classes_per_iteration = *classes_per_iteration;
    if (triplets_per_person) train.triplets_per_person = *triplets_per_person;
    if (convergence_threshold) train.convergence_threshold = *convergence_threshold;
    if (margin) train.loss.margin = *margin;
  }
};

void add_train_overrides(CLI::App* cmd, TrainOverrides& o) {
  cmd->add_option("--max-iterations", o.max_iterations, "Iteration budget T");
  cmd->add_option("--lr-base", o.lr_base, "Learning rate");
  cmd->add_option("--lr-decay", o.lr_decay, "Multiplicative learning-rate decay per iteration");
  cmd->add_option("--classes-per-iteration", o.classes_per_iteration, "Sampled classes per batch");
  cmd->add_option("--triplets-per-person", o.triplets_per_person, "Triplet quota per class");
  cmd->add_option("--convergence-threshold", o.convergence_threshold,
                  "Stop below this many violated triplets");
  cmd->add_option("--margin", o.margin, "Hinge margin (negative)");
}

int cmd_train(const CommonFlags& flags, const TrainOverrides& overrides,
              const std::string& resume_path, const std::string& replay_path) {
  using namespace trimetric;
  RunConfig cfg = RunConfig::from_json_file(flags.config_path);
  if (flags.seed) cfg.train.seed = *flags.seed;
  if (!flags.out.empty()) cfg.out.checkpoint = flags.out;
  overrides.apply(cfg.train);
  cfg.train.validate();

  Network net;
  if (!resume_path.empty()) {
    net = load_checkpoint(resume_path);
    if (cfg.arch_specified && !(net.arch == cfg.arch)) {
      throw ConfigError("checkpoint architecture disagrees with the configured one");
    }
    cfg.arch = net.arch;
  } else {
    net.arch = cfg.arch;
    net.params = init_params(cfg.arch, cfg.train.seed);
  }

  Dataset dataset = build_dataset(cfg);
  Dataset train_data;
  if (cfg.data.train_fraction < 1.0) {
    Rng split_rng(cfg.data.split_seed);
    auto [train_half, test_half] = split_train_test(dataset, cfg.data.train_fraction, split_rng);
    std::cout << "split: " << train_half.num_classes() << " train / " << test_half.num_classes()
              << " test classes\n";
    train_data = std::move(train_half);
  } else {
    train_data = std::move(dataset);
  }

  std::ofstream log_stream(cfg.out.log);
  if (!log_stream) throw ConfigError("cannot write training log: " + cfg.out.log);

  TrainResult result;
  if (!replay_path.empty()) {
    const std::vector<Triplet> triplets = load_triplets(replay_path);
    for (const Triplet& t : triplets) {
      if (t.query < 0 || t.query >= train_data.size() || t.matched < 0 ||
          t.matched >= train_data.size() || t.mismatched < 0 || t.mismatched >= train_data.size()) {
        throw ConfigError("replay triplets reference images outside the dataset");
      }
    }
    const ImageLookup lookup = [&train_data](int id) -> const Tensor& {
      return train_data.images[static_cast<std::size_t>(id)].pixels;
    };
    result = train_image_based(triplets, lookup, std::move(net), cfg.train, &log_stream);
  } else {
    result = train_batch_mode(train_data, std::move(net), cfg.train,
                              cfg.augment.enabled ? &cfg.augment.crop : nullptr, &log_stream);
  }

  save_checkpoint(cfg.out.checkpoint, Network{cfg.arch, std::move(result.params)});
  const IterationReport* last = result.reports.empty() ? nullptr : &result.reports.back();
  std::cout << "iterations: " << result.reports.size()
            << "  converged: " << (result.converged ? "yes" : "no");
  if (last) std::cout << "  final_violated: " << last->violated;
  std::cout << "\ncheckpoint: " << cfg.out.checkpoint << "\nlog: " << cfg.out.log << "\n";
  return kExitOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint_path, int trials_override) {
  using namespace trimetric;
  RunConfig cfg = RunConfig::from_json_file(flags.config_path);
  if (!flags.out.empty()) cfg.out.cmc_csv = flags.out;
  if (trials_override > 0) cfg.eval.trials = trials_override;

  Network net = load_checkpoint(checkpoint_path);
  if (cfg.arch_specified && !(net.arch == cfg.arch)) {
    throw ConfigError("checkpoint architecture disagrees with the configured one");
  }
  cfg.arch = net.arch;  // dataset sizing follows the loaded model

  Dataset dataset = build_dataset(cfg);
  Dataset test_data;
  if (cfg.data.train_fraction > 0.0 && cfg.data.train_fraction < 1.0) {
    Rng split_rng(cfg.data.split_seed);
    auto [train_half, test_half] = split_train_test(dataset, cfg.data.train_fraction, split_rng);
    test_data = std::move(test_half);
  } else {
    test_data = std::move(dataset);
  }

  Rng trial_rng(flags.seed ? *flags.seed : cfg.train.seed);
  const CmcCurve curve = average_trials(net, test_data, cfg.eval.trials, trial_rng, cfg.eval.max_rank);

  write_cmc_csv(cfg.out.cmc_csv, curve);
  const std::string summary = cmc_summary_json(curve);
  std::ofstream json_out(cfg.out.cmc_json);
  if (!json_out) throw ConfigError("cannot write CMC summary: " + cfg.out.cmc_json);
  json_out << summary << '\n';

  std::printf("%-8s %-8s %-8s %-8s %-8s %-8s\n", "top1", "top5", "top10", "top15", "top20",
              "top30");
  auto rate = [&curve](int r) { return curve.at_rank(std::min(r, curve.max_rank())); };
  std::printf("%-8.3f %-8.3f %-8.3f %-8.3f %-8.3f %-8.3f\n", rate(1), rate(5), rate(10), rate(15),
              rate(20), rate(30));
  std::cout << summary << "\ncsv: " << cfg.out.cmc_csv << "\n";
  return kExitOk;
}

int cmd_verify(const CommonFlags& flags, const std::string& inject_fault) {
  using namespace trimetric;
  const std::uint64_t seed = flags.seed ? *flags.seed : 0;
  const VerifyReport report = run_verification(seed, inject_fault);

  std::printf("%-28s %-12s %-12s %s\n", "check", "max_error", "tolerance", "status");
  for (const VerifyCheck& c : report.checks) {
    std::printf("%-28s %-12.3e %-12.3e %s\n", c.name.c_str(), c.max_error, c.tolerance,
                c.pass ? "PASS" : "FAIL");
  }
  if (!report.all_pass()) {
    std::cout << "verification failed: " << report.first_failure() << "\n";
    return kExitVerifyFailure;
  }
  std::cout << "all checks passed\n";
  return kExitOk;
}

int cmd_synth(const CommonFlags& flags, int classes, int per_class, double noise, int height,
              int width) {
  using namespace trimetric;
  if (flags.out.empty()) throw ConfigError("synth needs --out <directory>");
  Rng rng(flags.seed ? *flags.seed : 0);
  const Dataset data = synth_dataset(classes, per_class, noise, rng, height, width);
  write_dataset(data, flags.out);
  std::cout << "wrote " << data.size() << " images across " << data.num_classes()
            << " classes to " << flags.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trimetric: triplet-trained image embeddings with CMC evaluation"};
  app.require_subcommand(1);

  CommonFlags train_flags, eval_flags, verify_flags, synth_flags;

  auto* train = app.add_subcommand("train", "Train a model in batch mode");
  add_common(train, train_flags, true);
  TrainOverrides overrides;
  add_train_overrides(train, overrides);
  std::string resume_path, replay_path;
  train->add_option("--resume", resume_path, "Continue from a checkpoint");
  train->add_option("--replay-triplets", replay_path,
                    "Train on a fixed triplet list file instead of batch sampling");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with CMC");
  add_common(eval, eval_flags, true);
  std::string checkpoint_path;
  eval->add_option("--checkpoint", checkpoint_path, "Model checkpoint")->required();
  int trials_override = 0;
  eval->add_option("--trials", trials_override, "Override eval.trials");

  auto* verify = app.add_subcommand("verify", "Run the gradient and cost-model checks");
  add_common(verify, verify_flags, false);
  std::string inject_fault;
  verify->add_option("--inject-fault", inject_fault,
                     "Corrupt a layer backward to exercise the failure path")
      ->check(CLI::IsMember({"conv2d", "maxpool", "relu", "fc", "l2norm"}));

  auto* synth = app.add_subcommand("synth", "Materialize a synthetic dataset");
  add_common(synth, synth_flags, false);
  int classes = 10, per_class = 6, height = 20, width = 12;
  double noise = 0.1;
  synth->add_option("--classes", classes, "Identity count")->check(CLI::PositiveNumber);
  synth->add_option("--per-class", per_class, "Images per identity")->check(CLI::PositiveNumber);
  synth->add_option("--noise", noise, "Noise amplitude");
  synth->add_option("--height", height, "Image height")->check(CLI::PositiveNumber);
  synth->add_option("--width", width, "Image width")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (train->parsed()) {
      trimetric::set_max_threads(train_flags.threads);
      return cmd_train(train_flags, overrides, resume_path, replay_path);
    }
    if (eval->parsed()) {
      trimetric::set_max_threads(eval_flags.threads);
      return cmd_eval(eval_flags, checkpoint_path, trials_override);
    }
    if (verify->parsed()) {
      trimetric::set_max_threads(verify_flags.threads);
      return cmd_verify(verify_flags, inject_fault);
    }
    if (synth->parsed()) {
      return cmd_synth(synth_flags, classes, per_class, noise, height, width);
    }
  } catch (const trimetric::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const trimetric::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumericError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVerifyFailure;
  }
  return kExitConfigError;
}
