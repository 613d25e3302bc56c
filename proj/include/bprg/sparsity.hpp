#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "bprg/model.hpp"
#include "bprg/ops.hpp"
#include "bprg/optim.hpp"
#include "bprg/rng.hpp"

namespace bprg {

enum class PruneMode { one_shot, iterative };
enum class Interpolation { cubic, linear };
enum class PruneScope { global, layerwise };
enum class RegrowCriterion { gradient, random, rewind_magnitude };
enum class RegrowInit { zero, rewind };

std::string_view to_string(PruneMode m);
std::string_view to_string(Interpolation i);
std::string_view to_string(PruneScope s);
std::string_view to_string(RegrowCriterion c);
std::string_view to_string(RegrowInit i);

struct PruneSchedule {
  PruneMode mode = PruneMode::one_shot;
  double s_init = 0.0;
  double s_final = 0.9;
  std::size_t steps = 1;
  Interpolation interpolation = Interpolation::cubic;
  std::size_t finetune_epochs = 3;
  PruneScope scope = PruneScope::global;

  // Throws ConfigError when s_init >= s_final, s_final outside (0, 1),
  // steps == 0, or a one-shot schedule has more than one step.
  void validate() const;
};

struct RegrowSchedule {
  PruneMode mode = PruneMode::one_shot;
  double s_start = 0.99;
  double s_end = 0.95;
  std::size_t steps = 1;
  RegrowCriterion criterion = RegrowCriterion::gradient;
  RegrowInit init = RegrowInit::zero;
  std::size_t finetune_epochs = 3;
  std::size_t scoring_batch_size = 512;

  void validate() const;
};

// N - floor(s * N)
std::size_t keep_count(std::size_t n, double s);

// Cubic: s_final + (s_init - s_final) * (1 - t/T)^3; linear: affine in t/T.
// Step T returns s_final exactly. Throws UsageError for t outside [1, T].
double schedule_sparsity_at(const PruneSchedule& sched, std::size_t t);

// Linear from s_start towards s_end; step R returns s_end exactly.
double regrow_sparsity_at(const RegrowSchedule& sched, std::size_t r);

// A prunable weight: slot ordinal in prunable_slots order plus flat index.
struct Position {
  std::size_t slot = 0;
  std::size_t index = 0;
  auto operator<=>(const Position&) const = default;
};

// Binary masks (1 = active) aligned with prunable_slots, plus the graveyard:
// the value each pruned weight held when it was pruned. Graveyard entries at
// active positions are always zero.
template <typename Real>
class MaskSet {
 public:
  struct Slot {
    ParamId id;
    std::size_t param_index = 0;
    std::vector<std::uint8_t> bits;
    std::vector<Real> graveyard;
    std::size_t pruned = 0;
    bool operator==(const Slot&) const = default;
  };

  MaskSet() = default;
  // Every position active.
  static MaskSet dense(const std::vector<PrunableSlot>& slots);
  static MaskSet dense(const Model<Real>& model) { return dense(prunable_slots(model)); }

  const std::vector<Slot>& slots() const { return slots_; }
  std::size_t slot_count() const { return slots_.size(); }
  std::size_t total() const { return total_; }
  std::size_t pruned_count() const { return pruned_; }
  std::size_t active_count() const { return total_ - pruned_; }
  // 1 - active/N; zero for an empty set.
  double sparsity() const;

  bool is_active(Position p) const { return slots_.at(p.slot).bits.at(p.index) != 0; }
  Real graveyard_value(Position p) const { return slots_.at(p.slot).graveyard.at(p.index); }

  // Marks an active position pruned, remembering `value`.
  void mark_pruned(Position p, Real value);
  // Marks a pruned position active and returns its graveyard value.
  Real mark_active(Position p);

  bool aligned_with(const Model<Real>& model) const;
  // Throws UsageError unless aligned_with(model).
  void require_aligned(const Model<Real>& model) const;

  // Rebuilds a mask from serialized parts; throws FormatError when a
  // graveyard value sits at an active position or lengths disagree.
  void restore_slot(std::size_t slot, std::vector<std::uint8_t> bits, std::vector<Real> graveyard);

  bool operator==(const MaskSet&) const = default;

 private:
  std::vector<Slot> slots_;
  std::size_t total_ = 0;
  std::size_t pruned_ = 0;
};

// Pure selection rule behind every magnitude prune. `weights` is the
// concatenation of the prunable slots (lengths in `slot_lengths`); `current`
// is the existing mask over the same positions, or empty for all-active.
// Already-pruned positions stay pruned; the remaining prunes go to the
// smallest (|w|, slot, index) among active positions. Global scope targets
// N - keep_count(N, s) pruned positions overall, layerwise scope does the same
// per slot. Returns the new mask (1 = active).
template <typename Real>
std::vector<std::uint8_t> magnitude_mask(std::span<const Real> weights, std::span<const std::size_t> slot_lengths,
                                         double s, PruneScope scope, std::span<const std::uint8_t> current = {});

// Prunes `model` in place to sparsity `s`, extending `masks`: newly pruned
// values go to the graveyard and are zeroed. Throws UsageError when `s` would
// leave fewer pruned weights than are already pruned.
template <typename Real>
void prune_to(Model<Real>& model, MaskSet<Real>& masks, double s, PruneScope scope = PruneScope::global);

// One-shot magnitude prune from a dense model.
template <typename Real>
MaskSet<Real> global_magnitude_mask(Model<Real>& model, double s, PruneScope scope = PruneScope::global);

// Zeroes every masked weight. Idempotent.
template <typename Real>
void apply_masks(Model<Real>& model, const MaskSet<Real>& masks);

// SGD step that multiplies prunable gradients by their mask and zeroes the
// velocity at masked positions, so masked weights stay exactly 0.
template <typename Real>
void masked_step(Model<Real>& model, const MaskSet<Real>& masks, OptimizerState<Real>& opt);

// |dL/dw| for every prunable position, pruned ones included: the forward pass
// uses the masked weights, the backward pass does not mask gradients.
template <typename Real>
using Saliency = std::vector<std::vector<Real>>;

template <typename Real>
Saliency<Real> dense_saliency(Model<Real>& model, const MaskSet<Real>& masks, BasicTensor<Real>& batch,
                              std::span<const ops::Label> labels);

// k pruned positions, returned in (slot, index) order.
//   gradient:          largest saliency, ties to the lowest (slot, index)
//   random:            k distinct positions via partial Fisher-Yates on rng
//   rewind_magnitude:  largest |graveyard value|, same tie-break
// Throws UsageError when k exceeds the pruned count or saliency is missing
// for the gradient criterion.
template <typename Real>
std::vector<Position> regrow_candidates(const MaskSet<Real>& masks, RegrowCriterion criterion, std::size_t k,
                                        const Saliency<Real>* saliency, RngState& rng);

// Reactivates `candidates`, setting each weight to 0 or to its graveyard value.
// Throws UsageError if any candidate is already active (nothing is modified).
template <typename Real>
void regrow_apply(MaskSet<Real>& masks, std::span<const Position> candidates, RegrowInit init, Model<Real>& model);

extern template class MaskSet<float>;
extern template class MaskSet<double>;

}  // namespace bprg
