#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bprg/data.hpp"
#include "bprg/model.hpp"
#include "bprg/optim.hpp"
#include "bprg/sparsity.hpp"

namespace bprg {

enum class Phase { pretrain, prune, regrow };

std::string_view to_string(Phase p);
// Throws FormatError for an unknown name.
Phase parse_phase(std::string_view name);

struct TrajectoryRecord {
  Phase phase = Phase::pretrain;
  std::size_t step = 0;
  double sparsity = 0.0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  std::size_t active_params = 0;
  std::int64_t elapsed_ms = 0;

  bool operator==(const TrajectoryRecord&) const = default;
};

// Collects records in execution order. Wall-clock time is only recorded when
// `record_elapsed` is set, otherwise elapsed_ms stays 0 and repeated runs
// produce identical record lists.
class TrajectoryRecorder {
 public:
  explicit TrajectoryRecorder(bool record_elapsed = false);

  void append(Phase phase, std::size_t step, const MaskSet<float>& masks, double train_loss, double test_accuracy);
  void set_listener(std::function<void(const TrajectoryRecord&)> listener) { listener_ = std::move(listener); }

  const std::vector<TrajectoryRecord>& records() const { return records_; }
  std::vector<TrajectoryRecord> take() { return std::move(records_); }

 private:
  bool record_elapsed_;
  std::chrono::steady_clock::time_point start_;
  std::vector<TrajectoryRecord> records_;
  std::function<void(const TrajectoryRecord&)> listener_;
};

struct DataConfig {
  enum class Source { blobs, idx };
  Source source = Source::blobs;
  std::size_t train_size = 8000;
  std::size_t test_size = 2000;
  // blobs
  std::size_t features = 16;
  std::size_t classes = 10;
  double spread = 0.4;
  // idx, resolved against BPRG_DATA_DIR when relative
  std::string train_images = "train-images-idx3-ubyte";
  std::string train_labels = "train-labels-idx1-ubyte";
  std::string test_images = "t10k-images-idx3-ubyte";
  std::string test_labels = "t10k-labels-idx1-ubyte";
  IdxLayout layout = IdxLayout::flat;
};

struct OptimizerConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  std::size_t pretrain_epochs = 10;
  // Fine-tuning runs at learning_rate * finetune_lr_scale.
  double finetune_lr_scale = 0.1;
};

struct EvalConfig {
  // Emit a pretrain record every N pretraining epochs (0 = only the baseline).
  std::size_t pretrain_every = 0;
  bool record_elapsed = false;
};

struct ExperimentConfig {
  DataConfig data;
  std::vector<LayerSpec> model;
  OptimizerConfig optimizer;
  PruneSchedule prune;
  RegrowSchedule regrow;
  std::uint64_t seed = 0;
  EvalConfig eval;

  // Throws ConfigError; also checks that regrow.s_start == prune.s_final.
  void validate() const;
};

struct ExperimentData {
  Dataset train;
  Dataset test;
};

// Synthesises blobs from `rng` (train first, then test) or loads the IDX files.
ExperimentData load_experiment_data(const DataConfig& cfg, RngState& rng);

// Everything a prune/regrow phase needs besides the model and masks.
struct TrainingContext {
  const Dataset& train;
  const Dataset& test;
  std::size_t batch_size;
  double finetune_lr;
  double momentum;
  RngState& shuffle_rng;    // minibatch order
  RngState& selection_rng;  // random regrowth
};

// Mean cross-entropy over the whole dataset.
double dataset_loss(Model<float>& model, const Dataset& data);

// Minibatch SGD for `epochs` epochs (masked when `masks` is given). Returns
// the mean training loss over `data` afterwards; epochs == 0 only evaluates.
double train_epochs(Model<float>& model, const MaskSet<float>* masks, const Dataset& data, std::size_t epochs,
                    OptimizerState<float>& opt, RngState& rng, std::size_t batch_size);

// Top-1 accuracy, argmax ties to the lowest class index. Does not modify the
// model; throws UsageError if a masked weight is non-zero.
double evaluate_accuracy(Model<float>& model, const MaskSet<float>* masks, const Dataset& test);

// For t = 1..T: prune to schedule_sparsity_at(t), fine-tune, evaluate, record.
MaskSet<float> run_prune_phase(Model<float>& model, MaskSet<float> masks, const PruneSchedule& sched,
                               TrainingContext& ctx, TrajectoryRecorder& recorder);
MaskSet<float> run_prune_phase(Model<float>& model, const PruneSchedule& sched, TrainingContext& ctx,
                               TrajectoryRecorder& recorder);

// For r = 1..R: regrow to keep_count(N, regrow_sparsity_at(r)), fine-tune,
// evaluate, record. Throws ConfigError when `masks` is not at s_start.
MaskSet<float> run_regrow_phase(Model<float>& model, MaskSet<float> masks, const RegrowSchedule& sched,
                                TrainingContext& ctx, TrajectoryRecorder& recorder);

struct BidirectionalResult {
  std::vector<TrajectoryRecord> records;
  Model<float> model;
  MaskSet<float> masks;
};

// pretrain -> baseline record -> prune phase -> regrow phase.
// The seed derives four streams in order: data, init, shuffle, selection.
BidirectionalResult run_bidirectional(const ExperimentConfig& cfg,
                                      std::function<void(const TrajectoryRecord&)> listener = {});

struct RunStreams {
  RngState data;
  RngState init;
  RngState shuffle;
  RngState selection;
};
RunStreams derive_streams(std::uint64_t seed);

// Builds the model from cfg and pretrains it (no records).
Model<float> pretrain_model(const ExperimentConfig& cfg, const ExperimentData& data, RunStreams& streams,
                            TrajectoryRecorder* recorder = nullptr);

}  // namespace bprg
