#include "bprg/trajectory.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>

#include "bprg/error.hpp"

namespace bprg {

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::pretrain: return "pretrain";
    case Phase::prune: return "prune";
    case Phase::regrow: return "regrow";
  }
  return "?";
}

Phase parse_phase(std::string_view name) {
  if (name == "pretrain") return Phase::pretrain;
  if (name == "prune") return Phase::prune;
  if (name == "regrow") return Phase::regrow;
  throw FormatError("unknown phase '" + std::string(name) + "'");
}

TrajectoryRecorder::TrajectoryRecorder(bool record_elapsed)
    : record_elapsed_(record_elapsed), start_(std::chrono::steady_clock::now()) {}

void TrajectoryRecorder::append(Phase phase, std::size_t step, const MaskSet<float>& masks, double train_loss,
                                double test_accuracy) {
  TrajectoryRecord r;
  r.phase = phase;
  r.step = step;
  r.sparsity = masks.sparsity();
  r.train_loss = train_loss;
  r.test_accuracy = test_accuracy;
  r.active_params = masks.active_count();
  if (record_elapsed_)
    r.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_)
                       .count();
  records_.push_back(r);
  if (listener_) listener_(r);
}

void ExperimentConfig::validate() const {
  if (model.empty()) throw ConfigError("model.layers must not be empty");
  if (!(optimizer.learning_rate > 0)) throw ConfigError("optimizer.lr must be positive");
  if (!(optimizer.momentum >= 0 && optimizer.momentum < 1)) throw ConfigError("optimizer.momentum must lie in [0, 1)");
  if (optimizer.batch_size == 0) throw ConfigError("optimizer.batch_size must be positive");
  if (!(optimizer.finetune_lr_scale > 0)) throw ConfigError("optimizer.finetune_lr_scale must be positive");
  if (data.train_size == 0 || data.test_size == 0) throw ConfigError("data.train_size and data.test_size must be positive");
  prune.validate();
  regrow.validate();
  if (regrow.s_start != prune.s_final)
    throw ConfigError("regrow.s_start (" + std::to_string(regrow.s_start) + ") must equal prune.s_final (" +
                      std::to_string(prune.s_final) + ")");
}

namespace {

std::filesystem::path resolve_data_path(const std::string& name) {
  std::filesystem::path p(name);
  if (p.is_absolute()) return p;
  if (const char* dir = std::getenv("BPRG_DATA_DIR")) return std::filesystem::path(dir) / p;
  return p;
}

constexpr std::size_t kEvalBatch = 1024;

}  // namespace

ExperimentData load_experiment_data(const DataConfig& cfg, RngState& rng) {
  ExperimentData out;
  if (cfg.source == DataConfig::Source::blobs) {
    out.train = synth_blobs(cfg.train_size, cfg.features, cfg.classes, cfg.spread, rng);
    out.test = synth_blobs(cfg.test_size, cfg.features, cfg.classes, cfg.spread, rng);
  } else {
    out.train = load_idx(resolve_data_path(cfg.train_images), resolve_data_path(cfg.train_labels), cfg.layout,
                         cfg.train_size);
    out.test = load_idx(resolve_data_path(cfg.test_images), resolve_data_path(cfg.test_labels), cfg.layout,
                        cfg.test_size);
    const std::size_t classes = std::max(out.train.class_count, out.test.class_count);
    out.train.class_count = out.test.class_count = classes;
  }
  out.train.validate();
  out.test.validate();
  return out;
}

RunStreams derive_streams(std::uint64_t seed) {
  RngState master(seed);
  RunStreams s{master.split(), master.split(), master.split(), master.split()};
  return s;
}

double dataset_loss(Model<float>& model, const Dataset& data) {
  if (data.size() == 0) throw ConfigError("dataset_loss: empty dataset");
  double total = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += kEvalBatch) {
    const std::size_t end = std::min(data.size(), start + kEvalBatch);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    auto [x, y] = gather(data, idx);
    Tape<float> tape(false);
    auto& logits = forward(model, tape, x);
    total += double(ops::softmax_cross_entropy_mean(tape, logits, y).item()) * double(end - start);
  }
  return total / double(data.size());
}

double train_epochs(Model<float>& model, const MaskSet<float>* masks, const Dataset& data, std::size_t epochs,
                    OptimizerState<float>& opt, RngState& rng, std::size_t batch_size) {
  if (data.size() == 0) throw ConfigError("train_epochs: empty dataset");
  if (masks) masks->require_aligned(model);
  auto params = model.param_tensors();
  for (std::size_t e = 0; e < epochs; ++e) {
    for (const auto& batch : minibatches(data, batch_size, rng)) {
      auto [x, y] = gather(data, batch);
      model.zero_grad();
      Tape<float> tape;
      auto& logits = forward(model, tape, x);
      auto& loss = ops::softmax_cross_entropy_mean(tape, logits, y);
      tape.backward(loss);
      if (masks) masked_step(model, *masks, opt);
      else sgd_momentum_step<float>(params, opt);
    }
  }
  model.zero_grad();
  return dataset_loss(model, data);
}

double evaluate_accuracy(Model<float>& model, const MaskSet<float>* masks, const Dataset& test) {
  if (test.size() == 0) throw ConfigError("evaluate_accuracy: empty test set");
  if (masks) {
    masks->require_aligned(model);
    for (const auto& slot : masks->slots()) {
      const auto w = model.params()[slot.param_index].value.data();
      for (std::size_t i = 0; i < w.size(); ++i)
        if (!slot.bits[i] && w[i] != 0.0f) throw UsageError("evaluate_accuracy: masked weight is non-zero");
    }
  }
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < test.size(); start += kEvalBatch) {
    const std::size_t end = std::min(test.size(), start + kEvalBatch);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    auto [x, y] = gather(test, idx);
    Tape<float> tape(false);
    const auto& logits = forward(model, tape, x);
    const std::size_t classes = logits.dim(1);
    const auto z = logits.data();
    for (std::size_t i = 0; i < y.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < classes; ++c)
        if (z[i * classes + c] > z[i * classes + best]) best = c;
      if (best == y[i]) ++correct;
    }
  }
  return double(correct) / double(test.size());
}

namespace {

double finetune(Model<float>& model, const MaskSet<float>& masks, std::size_t epochs, TrainingContext& ctx) {
  OptimizerState<float> opt(ctx.finetune_lr, ctx.momentum, model.param_shapes());
  return train_epochs(model, &masks, ctx.train, epochs, opt, ctx.shuffle_rng, ctx.batch_size);
}

}  // namespace

MaskSet<float> run_prune_phase(Model<float>& model, MaskSet<float> masks, const PruneSchedule& sched,
                               TrainingContext& ctx, TrajectoryRecorder& recorder) {
  sched.validate();
  for (std::size_t t = 1; t <= sched.steps; ++t) {
    prune_to(model, masks, schedule_sparsity_at(sched, t), sched.scope);
    const double loss = finetune(model, masks, sched.finetune_epochs, ctx);
    recorder.append(Phase::prune, t, masks, loss, evaluate_accuracy(model, &masks, ctx.test));
  }
  return masks;
}

MaskSet<float> run_prune_phase(Model<float>& model, const PruneSchedule& sched, TrainingContext& ctx,
                               TrajectoryRecorder& recorder) {
  return run_prune_phase(model, MaskSet<float>::dense(model), sched, ctx, recorder);
}

MaskSet<float> run_regrow_phase(Model<float>& model, MaskSet<float> masks, const RegrowSchedule& sched,
                                TrainingContext& ctx, TrajectoryRecorder& recorder) {
  sched.validate();
  masks.require_aligned(model);
  const std::size_t n = masks.total();
  if (masks.active_count() != keep_count(n, sched.s_start) && masks.sparsity() != sched.s_start)
    throw ConfigError("regrow.s_start (" + std::to_string(sched.s_start) + ") does not match the mask sparsity " +
                      std::to_string(masks.sparsity()));

  const auto scoring = head(ctx.train, sched.scoring_batch_size);
  auto [score_x, score_y] = gather(scoring, [&] {
    std::vector<std::size_t> idx(scoring.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
  }());

  for (std::size_t r = 1; r <= sched.steps; ++r) {
    const std::size_t target = keep_count(n, regrow_sparsity_at(sched, r));
    const std::size_t k = target > masks.active_count() ? target - masks.active_count() : 0;
    Saliency<float> saliency;
    if (sched.criterion == RegrowCriterion::gradient) saliency = dense_saliency(model, masks, score_x, score_y);
    const auto chosen = regrow_candidates(masks, sched.criterion, k,
                                          sched.criterion == RegrowCriterion::gradient ? &saliency : nullptr,
                                          ctx.selection_rng);
    regrow_apply(masks, std::span<const Position>(chosen), sched.init, model);
    const double loss = finetune(model, masks, sched.finetune_epochs, ctx);
    recorder.append(Phase::regrow, r, masks, loss, evaluate_accuracy(model, &masks, ctx.test));
  }
  return masks;
}

Model<float> pretrain_model(const ExperimentConfig& cfg, const ExperimentData& data, RunStreams& streams,
                            TrajectoryRecorder* recorder) {
  auto model = build_model<float>(cfg.model, data.train.sample_shape(), streams.init);
  const auto out = propagate_shape(cfg.model, data.train.sample_shape());
  if (out[0] < data.train.class_count)
    throw ConfigError("model emits " + std::to_string(out[0]) + " logits but the data has " +
                      std::to_string(data.train.class_count) + " classes");

  OptimizerState<float> opt(cfg.optimizer.learning_rate, cfg.optimizer.momentum, model.param_shapes());
  const auto dense = MaskSet<float>::dense(model);
  const std::size_t every = cfg.eval.pretrain_every;
  if (every == 0 || !recorder) {
    train_epochs(model, nullptr, data.train, cfg.optimizer.pretrain_epochs, opt, streams.shuffle,
                 cfg.optimizer.batch_size);
    return model;
  }
  for (std::size_t e = 1; e <= cfg.optimizer.pretrain_epochs; ++e) {
    const double loss = train_epochs(model, nullptr, data.train, 1, opt, streams.shuffle, cfg.optimizer.batch_size);
    if (e % every == 0) recorder->append(Phase::pretrain, e, dense, loss, evaluate_accuracy(model, nullptr, data.test));
  }
  return model;
}

BidirectionalResult run_bidirectional(const ExperimentConfig& cfg,
                                      std::function<void(const TrajectoryRecord&)> listener) {
  cfg.validate();
  auto streams = derive_streams(cfg.seed);
  const auto data = load_experiment_data(cfg.data, streams.data);

  TrajectoryRecorder recorder(cfg.eval.record_elapsed);
  if (listener) recorder.set_listener(std::move(listener));

  auto model = pretrain_model(cfg, data, streams, &recorder);
  const auto dense = MaskSet<float>::dense(model);
  recorder.append(Phase::pretrain, 0, dense, dataset_loss(model, data.train),
                  evaluate_accuracy(model, nullptr, data.test));

  TrainingContext ctx{data.train,
                      data.test,
                      cfg.optimizer.batch_size,
                      cfg.optimizer.learning_rate * cfg.optimizer.finetune_lr_scale,
                      cfg.optimizer.momentum,
                      streams.shuffle,
                      streams.selection};
  auto masks = run_prune_phase(model, cfg.prune, ctx, recorder);
  masks = run_regrow_phase(model, std::move(masks), cfg.regrow, ctx, recorder);
  return {recorder.take(), std::move(model), std::move(masks)};
}

}  // namespace bprg
