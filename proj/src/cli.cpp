#include "bprg/cli.hpp"

#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "bprg/checkpoint.hpp"
#include "bprg/config.hpp"
#include "bprg/error.hpp"
#include "bprg/report.hpp"
#include "bprg/simd/kernels.hpp"
#include "bprg/trajectory.hpp"

namespace bprg {

namespace {

struct Options {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string ckpt;
  std::string out;
  std::string out_dir;
  std::string csv;
  std::string svg;
  double sparsity = 0;
  std::string mode = "one-shot";
  std::size_t steps = 0;
  std::string scope = "global";
  std::string interpolation = "cubic";
  std::string criterion = "gradient";
  std::string init = "zero";
};

void print_record(std::ostream& out, const TrajectoryRecord& r) {
  out << std::left << std::setw(9) << to_string(r.phase) << std::right << " step " << std::setw(3) << r.step
      << std::fixed << std::setprecision(6) << "  sparsity " << r.sparsity << "  active " << r.active_params
      << "  loss " << r.train_loss << "  accuracy " << r.test_accuracy << '\n';
  out.unsetf(std::ios::floatfield);
}

ExperimentConfig load_config(const Options& opt) {
  auto cfg = parse_config(opt.config);
  if (opt.seed) cfg.seed = *opt.seed;
  return cfg;
}

// Data and streams for the checkpoint-driven subcommands.
struct Session {
  ExperimentConfig cfg;
  RunStreams streams;
  ExperimentData data;
};

std::optional<Session> open_session(const Options& opt) {
  if (opt.config.empty()) return std::nullopt;
  auto cfg = load_config(opt);
  auto streams = derive_streams(cfg.seed);
  auto data = load_experiment_data(cfg.data, streams.data);
  return Session{std::move(cfg), streams, std::move(data)};
}

template <typename Fn>
auto as_usage(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

int cmd_train(const Options& opt, std::ostream& out) {
  const auto cfg = load_config(opt);
  auto streams = derive_streams(cfg.seed);
  const auto data = load_experiment_data(cfg.data, streams.data);
  TrajectoryRecorder recorder(cfg.eval.record_elapsed);
  recorder.set_listener([&](const TrajectoryRecord& r) { print_record(out, r); });
  auto model = pretrain_model(cfg, data, streams, &recorder);
  const auto masks = MaskSet<float>::dense(model);
  recorder.append(Phase::pretrain, 0, masks, dataset_loss(model, data.train),
                  evaluate_accuracy(model, nullptr, data.test));
  save_checkpoint(opt.out, model, masks);
  return kExitOk;
}

int cmd_prune(const Options& opt, std::ostream& out) {
  auto ckpt = load_checkpoint(opt.ckpt);
  auto session = open_session(opt);

  PruneSchedule sched;
  sched.mode = opt.mode == "iterative" ? PruneMode::iterative : PruneMode::one_shot;
  sched.steps = opt.steps ? opt.steps : (sched.mode == PruneMode::iterative ? 5 : 1);
  sched.s_init = ckpt.masks.sparsity();
  sched.s_final = opt.sparsity;
  sched.scope = opt.scope == "layerwise" ? PruneScope::layerwise : PruneScope::global;
  sched.interpolation = opt.interpolation == "linear" ? Interpolation::linear : Interpolation::cubic;
  sched.finetune_epochs = session ? session->cfg.prune.finetune_epochs : 0;
  as_usage([&] {
    sched.validate();
    return 0;
  });

  if (session) {
    auto& s = *session;
    TrainingContext ctx{s.data.train, s.data.test, s.cfg.optimizer.batch_size,
                        s.cfg.optimizer.learning_rate * s.cfg.optimizer.finetune_lr_scale, s.cfg.optimizer.momentum,
                        s.streams.shuffle, s.streams.selection};
    TrajectoryRecorder recorder(s.cfg.eval.record_elapsed);
    recorder.set_listener([&](const TrajectoryRecord& r) { print_record(out, r); });
    ckpt.masks = run_prune_phase(ckpt.model, std::move(ckpt.masks), sched, ctx, recorder);
  } else {
    for (std::size_t t = 1; t <= sched.steps; ++t) {
      prune_to(ckpt.model, ckpt.masks, schedule_sparsity_at(sched, t), sched.scope);
      out << "prune     step " << t << "  sparsity " << std::fixed << std::setprecision(6) << ckpt.masks.sparsity()
          << "  active " << ckpt.masks.active_count() << '\n';
      out.unsetf(std::ios::floatfield);
    }
  }
  save_checkpoint(opt.out, ckpt.model, ckpt.masks);
  return kExitOk;
}

int cmd_regrow(const Options& opt, std::ostream& out) {
  auto ckpt = load_checkpoint(opt.ckpt);
  auto session = open_session(opt);

  RegrowSchedule sched;
  sched.steps = opt.steps ? opt.steps : 1;
  sched.mode = sched.steps > 1 ? PruneMode::iterative : PruneMode::one_shot;
  sched.s_start = ckpt.masks.sparsity();
  sched.s_end = opt.sparsity;
  sched.criterion = opt.criterion == "random"   ? RegrowCriterion::random
                    : opt.criterion == "rewind" ? RegrowCriterion::rewind_magnitude
                                                : RegrowCriterion::gradient;
  sched.init = opt.init == "rewind" ? RegrowInit::rewind : RegrowInit::zero;
  if (session) {
    sched.finetune_epochs = session->cfg.regrow.finetune_epochs;
    sched.scoring_batch_size = session->cfg.regrow.scoring_batch_size;
  } else {
    sched.finetune_epochs = 0;
  }
  as_usage([&] {
    sched.validate();
    return 0;
  });
  if (!session && sched.criterion == RegrowCriterion::gradient)
    throw UsageError("regrow: the gradient criterion needs --config to supply scoring data");

  if (session) {
    auto& s = *session;
    TrainingContext ctx{s.data.train, s.data.test, s.cfg.optimizer.batch_size,
                        s.cfg.optimizer.learning_rate * s.cfg.optimizer.finetune_lr_scale, s.cfg.optimizer.momentum,
                        s.streams.shuffle, s.streams.selection};
    TrajectoryRecorder recorder(s.cfg.eval.record_elapsed);
    recorder.set_listener([&](const TrajectoryRecord& r) { print_record(out, r); });
    ckpt.masks = run_regrow_phase(ckpt.model, std::move(ckpt.masks), sched, ctx, recorder);
  } else {
    RngState rng = derive_streams(opt.seed.value_or(0)).selection;
    const std::size_t n = ckpt.masks.total();
    for (std::size_t r = 1; r <= sched.steps; ++r) {
      const std::size_t target = keep_count(n, regrow_sparsity_at(sched, r));
      const std::size_t k = target > ckpt.masks.active_count() ? target - ckpt.masks.active_count() : 0;
      const auto chosen = regrow_candidates<float>(ckpt.masks, sched.criterion, k, nullptr, rng);
      regrow_apply(ckpt.masks, std::span<const Position>(chosen), sched.init, ckpt.model);
      out << "regrow    step " << r << "  sparsity " << std::fixed << std::setprecision(6) << ckpt.masks.sparsity()
          << "  active " << ckpt.masks.active_count() << '\n';
      out.unsetf(std::ios::floatfield);
    }
  }
  save_checkpoint(opt.out, ckpt.model, ckpt.masks);
  return kExitOk;
}

int cmd_run(const Options& opt, std::ostream& out) {
  const auto cfg = load_config(opt);
  const std::filesystem::path dir(opt.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create " + dir.string() + ": " + ec.message());

  auto result = run_bidirectional(cfg, [&](const TrajectoryRecord& r) { print_record(out, r); });
  emit_trajectory_csv(result.records, dir / "trajectory.csv");
  emit_plot_svg(result.records, dir / "trajectory.svg");
  save_checkpoint(dir / "final.bprg", result.model, result.masks);
  return kExitOk;
}

int cmd_report(const Options& opt) {
  emit_plot_svg(read_trajectory_csv(opt.csv), opt.svg);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bidirectional pruning-regrowth experiments"};
  app.name("bprg");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  Options opt;
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Override the experiment seed")->each([&](const std::string&) { opt.seed = seed; });

  const std::vector<std::string> modes{"one-shot", "iterative"};

  auto* train = app.add_subcommand("train", "Pretrain a dense model and save a checkpoint");
  train->add_option("--config", opt.config, "Experiment config (JSON)")->required();
  train->add_option("--out", opt.out, "Checkpoint to write")->required();

  auto* prune = app.add_subcommand("prune", "Magnitude-prune a checkpoint");
  prune->add_option("--ckpt", opt.ckpt, "Input checkpoint")->required();
  prune->add_option("--sparsity", opt.sparsity, "Target sparsity")->required()->check(CLI::Range(0.0, 1.0));
  prune->add_option("--mode", opt.mode, "one-shot or iterative")->check(CLI::IsMember(modes));
  prune->add_option("--steps", opt.steps, "Iterative steps (default 5)")->check(CLI::PositiveNumber);
  prune->add_option("--scope", opt.scope, "global or layerwise")->check(CLI::IsMember({"global", "layerwise"}));
  prune->add_option("--interpolation", opt.interpolation, "cubic or linear")->check(CLI::IsMember({"cubic", "linear"}));
  prune->add_option("--config", opt.config, "Config supplying data and fine-tuning settings");
  prune->add_option("--out", opt.out, "Checkpoint to write")->required();

  auto* regrow = app.add_subcommand("regrow", "Regrow pruned connections of a checkpoint");
  regrow->add_option("--ckpt", opt.ckpt, "Input checkpoint")->required();
  regrow->add_option("--to-sparsity", opt.sparsity, "Target sparsity")->required()->check(CLI::Range(0.0, 1.0));
  regrow->add_option("--criterion", opt.criterion, "gradient, random or rewind")
      ->check(CLI::IsMember({"gradient", "random", "rewind"}));
  regrow->add_option("--init", opt.init, "zero or rewind")->check(CLI::IsMember({"zero", "rewind"}));
  regrow->add_option("--steps", opt.steps, "Regrow steps (default 1)")->check(CLI::PositiveNumber);
  regrow->add_option("--config", opt.config, "Config supplying data and fine-tuning settings");
  regrow->add_option("--out", opt.out, "Checkpoint to write")->required();

  auto* run = app.add_subcommand("run", "Full pretrain -> prune -> regrow trajectory");
  run->add_option("--config", opt.config, "Experiment config (JSON)")->required();
  run->add_option("--out-dir", opt.out_dir, "Directory for trajectory.csv, trajectory.svg, final.bprg")->required();

  auto* report = app.add_subcommand("report", "Render a trajectory CSV as SVG");
  report->add_option("--csv", opt.csv, "Trajectory CSV")->required();
  report->add_option("--svg", opt.svg, "SVG to write")->required();

  std::vector<const char*> argv{"bprg"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(opt, out);
    if (*prune) return cmd_prune(opt, out);
    if (*regrow) return cmd_regrow(opt, out);
    if (*run) return cmd_run(opt, out);
    if (*report) return cmd_report(opt);
  } catch (const UsageError& e) {
    err << "bprg: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "bprg: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "bprg: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace bprg
