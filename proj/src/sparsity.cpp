#include "bprg/sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bprg/error.hpp"
#include "bprg/simd/kernels.hpp"

namespace bprg {

std::string_view to_string(PruneMode m) { return m == PruneMode::one_shot ? "one-shot" : "iterative"; }
std::string_view to_string(Interpolation i) { return i == Interpolation::cubic ? "cubic" : "linear"; }
std::string_view to_string(PruneScope s) { return s == PruneScope::global ? "global" : "layerwise"; }
std::string_view to_string(RegrowCriterion c) {
  switch (c) {
    case RegrowCriterion::gradient: return "gradient";
    case RegrowCriterion::random: return "random";
    case RegrowCriterion::rewind_magnitude: return "rewind";
  }
  return "?";
}
std::string_view to_string(RegrowInit i) { return i == RegrowInit::zero ? "zero" : "rewind"; }

void PruneSchedule::validate() const {
  if (!(s_final > 0.0 && s_final < 1.0)) throw ConfigError("prune.s_final must lie in (0, 1)");
  if (!(s_init >= 0.0 && s_init < s_final)) throw ConfigError("prune.s_init must lie in [0, prune.s_final)");
  if (steps == 0) throw ConfigError("prune.steps must be positive");
  if (mode == PruneMode::one_shot && steps != 1) throw ConfigError("prune.steps must be 1 for one-shot pruning");
}

void RegrowSchedule::validate() const {
  if (!(s_start >= 0.0 && s_start <= 1.0)) throw ConfigError("regrow.s_start must lie in [0, 1]");
  if (!(s_end >= 0.0 && s_end < s_start)) throw ConfigError("regrow.s_end must lie in [0, regrow.s_start)");
  if (steps == 0) throw ConfigError("regrow.steps must be positive");
  if (mode == PruneMode::one_shot && steps != 1) throw ConfigError("regrow.steps must be 1 for one-shot regrowth");
  if (scoring_batch_size == 0) throw ConfigError("regrow.scoring_batch_size must be positive");
}

std::size_t keep_count(std::size_t n, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw UsageError("keep_count: sparsity " + std::to_string(s) + " outside [0, 1]");
  const auto pruned = static_cast<std::size_t>(std::floor(s * double(n)));
  return n - std::min(pruned, n);
}

double schedule_sparsity_at(const PruneSchedule& sched, std::size_t t) {
  if (t < 1 || t > sched.steps)
    throw UsageError("schedule step " + std::to_string(t) + " outside [1, " + std::to_string(sched.steps) + "]");
  if (t == sched.steps) return sched.s_final;
  const double frac = double(t) / double(sched.steps);
  if (sched.interpolation == Interpolation::cubic) {
    const double rem = 1.0 - frac;
    return sched.s_final + (sched.s_init - sched.s_final) * rem * rem * rem;
  }
  return sched.s_init + (sched.s_final - sched.s_init) * frac;
}

double regrow_sparsity_at(const RegrowSchedule& sched, std::size_t r) {
  if (r < 1 || r > sched.steps)
    throw UsageError("regrow step " + std::to_string(r) + " outside [1, " + std::to_string(sched.steps) + "]");
  if (r == sched.steps) return sched.s_end;
  return sched.s_start + (sched.s_end - sched.s_start) * (double(r) / double(sched.steps));
}

// ---- MaskSet ---------------------------------------------------------------

template <typename Real>
MaskSet<Real> MaskSet<Real>::dense(const std::vector<PrunableSlot>& slots) {
  MaskSet ms;
  for (const auto& s : slots) {
    ms.slots_.push_back(Slot{s.id, s.param_index, std::vector<std::uint8_t>(s.length, 1),
                             std::vector<Real>(s.length, Real(0)), 0});
    ms.total_ += s.length;
  }
  return ms;
}

template <typename Real>
double MaskSet<Real>::sparsity() const {
  if (total_ == 0) return 0.0;
  return 1.0 - double(active_count()) / double(total_);
}

template <typename Real>
void MaskSet<Real>::mark_pruned(Position p, Real value) {
  auto& s = slots_.at(p.slot);
  if (s.bits.at(p.index) == 0) throw UsageError("position already pruned");
  s.bits[p.index] = 0;
  s.graveyard[p.index] = value;
  ++s.pruned;
  ++pruned_;
}

template <typename Real>
Real MaskSet<Real>::mark_active(Position p) {
  auto& s = slots_.at(p.slot);
  if (s.bits.at(p.index) != 0) throw UsageError("position already active");
  s.bits[p.index] = 1;
  const Real v = s.graveyard[p.index];
  s.graveyard[p.index] = Real(0);
  --s.pruned;
  --pruned_;
  return v;
}

template <typename Real>
bool MaskSet<Real>::aligned_with(const Model<Real>& model) const {
  const auto slots = prunable_slots(model);
  if (slots.size() != slots_.size()) return false;
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (slots[i].id != slots_[i].id || slots[i].length != slots_[i].bits.size() ||
        slots[i].param_index != slots_[i].param_index)
      return false;
  return true;
}

template <typename Real>
void MaskSet<Real>::require_aligned(const Model<Real>& model) const {
  if (!aligned_with(model)) throw UsageError("mask set is not aligned with the model's prunable slots");
}

template <typename Real>
void MaskSet<Real>::restore_slot(std::size_t slot, std::vector<std::uint8_t> bits, std::vector<Real> graveyard) {
  auto& s = slots_.at(slot);
  if (bits.size() != s.bits.size() || graveyard.size() != s.bits.size())
    throw FormatError("mask for " + s.id.name() + " has the wrong length");
  std::size_t pruned = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] > 1) throw FormatError("mask bit out of range");
    if (bits[i] == 0) ++pruned;
    else if (graveyard[i] != Real(0)) throw FormatError("graveyard value at active position of " + s.id.name());
  }
  pruned_ = pruned_ - s.pruned + pruned;
  s.bits = std::move(bits);
  s.graveyard = std::move(graveyard);
  s.pruned = pruned;
}

// ---- pruning ---------------------------------------------------------------

namespace {

struct Ranked {
  double magnitude;
  std::size_t slot;
  std::size_t index;
  std::size_t flat;
};

bool smaller_magnitude(const Ranked& a, const Ranked& b) {
  if (a.magnitude != b.magnitude) return a.magnitude < b.magnitude;
  if (a.slot != b.slot) return a.slot < b.slot;
  return a.index < b.index;
}

// Prunes the `count` smallest entries of `cands` in `mask`.
void prune_smallest(std::vector<Ranked>& cands, std::size_t count, std::vector<std::uint8_t>& mask) {
  if (count == 0) return;
  if (count < cands.size())
    std::nth_element(cands.begin(), cands.begin() + std::ptrdiff_t(count), cands.end(), smaller_magnitude);
  for (std::size_t i = 0; i < count; ++i) mask[cands[i].flat] = 0;
}

}  // namespace

template <typename Real>
std::vector<std::uint8_t> magnitude_mask(std::span<const Real> weights, std::span<const std::size_t> slot_lengths,
                                         double s, PruneScope scope, std::span<const std::uint8_t> current) {
  const std::size_t n = std::accumulate(slot_lengths.begin(), slot_lengths.end(), std::size_t(0));
  if (n != weights.size()) throw UsageError("magnitude_mask: slot lengths do not cover the weights");
  if (!current.empty() && current.size() != n) throw UsageError("magnitude_mask: existing mask has the wrong length");
  if (!(s >= 0.0 && s <= 1.0)) throw UsageError("magnitude_mask: sparsity outside [0, 1]");

  std::vector<std::uint8_t> mask = current.empty() ? std::vector<std::uint8_t>(n, 1)
                                                   : std::vector<std::uint8_t>(current.begin(), current.end());
  auto already = [&](std::size_t begin, std::size_t len) {
    return std::size_t(std::count(mask.begin() + std::ptrdiff_t(begin), mask.begin() + std::ptrdiff_t(begin + len), 0));
  };
  auto collect = [&](std::vector<Ranked>& out, std::size_t slot, std::size_t begin, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i)
      if (mask[begin + i]) out.push_back({std::fabs(double(weights[begin + i])), slot, i, begin + i});
  };

  if (scope == PruneScope::global) {
    const std::size_t target = n - keep_count(n, s);
    const std::size_t have = already(0, n);
    if (target < have)
      throw UsageError("cannot prune to sparsity " + std::to_string(s) + ": " + std::to_string(have) +
                       " weights are already pruned");
    std::vector<Ranked> cands;
    cands.reserve(n - have);
    std::size_t begin = 0;
    for (std::size_t slot = 0; slot < slot_lengths.size(); ++slot) {
      collect(cands, slot, begin, slot_lengths[slot]);
      begin += slot_lengths[slot];
    }
    prune_smallest(cands, target - have, mask);
    return mask;
  }

  std::size_t total_target = 0, total_have = 0;
  std::size_t begin = 0;
  for (std::size_t slot = 0; slot < slot_lengths.size(); ++slot) {
    const std::size_t len = slot_lengths[slot];
    total_target += len - keep_count(len, s);
    total_have += already(begin, len);
    begin += len;
  }
  if (total_target < total_have)
    throw UsageError("cannot prune to sparsity " + std::to_string(s) + ": " + std::to_string(total_have) +
                     " weights are already pruned");
  begin = 0;
  for (std::size_t slot = 0; slot < slot_lengths.size(); ++slot) {
    const std::size_t len = slot_lengths[slot];
    const std::size_t target = len - keep_count(len, s);
    const std::size_t have = already(begin, len);
    std::vector<Ranked> cands;
    collect(cands, slot, begin, len);
    prune_smallest(cands, target > have ? target - have : 0, mask);
    begin += len;
  }
  return mask;
}

template <typename Real>
void prune_to(Model<Real>& model, MaskSet<Real>& masks, double s, PruneScope scope) {
  masks.require_aligned(model);
  std::vector<Real> weights;
  std::vector<std::uint8_t> current;
  std::vector<std::size_t> lengths;
  weights.reserve(masks.total());
  current.reserve(masks.total());
  for (const auto& slot : masks.slots()) {
    const auto w = model.params()[slot.param_index].value.data();
    weights.insert(weights.end(), w.begin(), w.end());
    current.insert(current.end(), slot.bits.begin(), slot.bits.end());
    lengths.push_back(slot.bits.size());
  }
  const auto next = magnitude_mask<Real>(weights, lengths, s, scope, current);

  std::size_t flat = 0;
  for (std::size_t k = 0; k < masks.slot_count(); ++k) {
    auto w = model.params()[masks.slots()[k].param_index].value.data();
    for (std::size_t i = 0; i < lengths[k]; ++i, ++flat) {
      if (current[flat] == 1 && next[flat] == 0) {
        masks.mark_pruned({k, i}, w[i]);
        w[i] = Real(0);
      }
    }
  }
}

template <typename Real>
MaskSet<Real> global_magnitude_mask(Model<Real>& model, double s, PruneScope scope) {
  auto masks = MaskSet<Real>::dense(model);
  prune_to(model, masks, s, scope);
  return masks;
}

template <typename Real>
void apply_masks(Model<Real>& model, const MaskSet<Real>& masks) {
  masks.require_aligned(model);
  const auto& kr = simd::kernels<Real>();
  for (const auto& slot : masks.slots()) {
    auto w = model.params()[slot.param_index].value.data();
    kr.apply_mask(w.size(), slot.bits.data(), w.data());
  }
}

template <typename Real>
void masked_step(Model<Real>& model, const MaskSet<Real>& masks, OptimizerState<Real>& opt) {
  masks.require_aligned(model);
  auto& params = model.params();
  if (params.size() != opt.size()) throw UsageError("masked_step: optimizer does not match the model");
  const auto& kr = simd::kernels<Real>();

  std::vector<const std::uint8_t*> bits(params.size(), nullptr);
  for (const auto& slot : masks.slots()) bits[slot.param_index] = slot.bits.data();

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].value;
    if (!p.has_grad()) throw UsageError("masked_step: parameter " + params[i].id.name() + " has no gradient");
    auto g = p.grad();
    auto v = opt.velocity(i);
    if (bits[i]) {
      kr.apply_mask(g.size(), bits[i], g.data());
      kr.apply_mask(v.size(), bits[i], v.data());
    }
    sgd_momentum_update(p, std::span<const Real>(g), v, opt);
    if (bits[i]) kr.apply_mask(p.numel(), bits[i], p.data().data());
  }
}

template <typename Real>
Saliency<Real> dense_saliency(Model<Real>& model, const MaskSet<Real>& masks, BasicTensor<Real>& batch,
                              std::span<const ops::Label> labels) {
  masks.require_aligned(model);
  if (labels.empty()) throw UsageError("dense_saliency: empty scoring batch");
  apply_masks(model, masks);
  model.zero_grad();
  {
    Tape<Real> tape;
    auto& logits = forward(model, tape, batch);
    auto& loss = ops::softmax_cross_entropy_mean(tape, logits, labels);
    tape.backward(loss);
  }
  Saliency<Real> out;
  out.reserve(masks.slot_count());
  for (const auto& slot : masks.slots()) {
    const auto g = std::as_const(model.params()[slot.param_index].value).grad();
    std::vector<Real> mag(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) mag[i] = std::fabs(g[i]);
    out.push_back(std::move(mag));
  }
  model.zero_grad();
  return out;
}

template <typename Real>
std::vector<Position> regrow_candidates(const MaskSet<Real>& masks, RegrowCriterion criterion, std::size_t k,
                                        const Saliency<Real>* saliency, RngState& rng) {
  if (k > masks.pruned_count())
    throw UsageError("regrow_candidates: asked for " + std::to_string(k) + " positions but only " +
                     std::to_string(masks.pruned_count()) + " are pruned");
  if (k == 0) return {};

  std::vector<Position> pruned;
  pruned.reserve(masks.pruned_count());
  for (std::size_t s = 0; s < masks.slot_count(); ++s) {
    const auto& bits = masks.slots()[s].bits;
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i] == 0) pruned.push_back({s, i});
  }

  std::vector<Position> chosen;
  if (criterion == RegrowCriterion::random) {
    for (std::size_t i = 0; i < k; ++i) std::swap(pruned[i], pruned[i + rng.below(pruned.size() - i)]);
    chosen.assign(pruned.begin(), pruned.begin() + std::ptrdiff_t(k));
  } else {
    std::vector<std::pair<double, Position>> scored;
    scored.reserve(pruned.size());
    if (criterion == RegrowCriterion::gradient) {
      if (!saliency) throw UsageError("regrow_candidates: gradient criterion needs saliency scores");
      if (saliency->size() != masks.slot_count()) throw UsageError("regrow_candidates: saliency is misaligned");
      for (const auto& p : pruned) {
        const auto& row = (*saliency)[p.slot];
        if (row.size() != masks.slots()[p.slot].bits.size())
          throw UsageError("regrow_candidates: saliency is misaligned");
        scored.push_back({double(row[p.index]), p});
      }
    } else {
      for (const auto& p : pruned) scored.push_back({std::fabs(double(masks.graveyard_value(p))), p});
    }
    auto larger = [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    };
    if (k < scored.size())
      std::nth_element(scored.begin(), scored.begin() + std::ptrdiff_t(k), scored.end(), larger);
    for (std::size_t i = 0; i < k; ++i) chosen.push_back(scored[i].second);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

template <typename Real>
void regrow_apply(MaskSet<Real>& masks, std::span<const Position> candidates, RegrowInit init, Model<Real>& model) {
  masks.require_aligned(model);
  for (const auto& p : candidates)
    if (p.slot >= masks.slot_count() || p.index >= masks.slots()[p.slot].bits.size() || masks.is_active(p))
      throw UsageError("regrow_apply: candidate (" + std::to_string(p.slot) + ", " + std::to_string(p.index) +
                       ") is not a pruned position");
  std::vector<Position> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw UsageError("regrow_apply: duplicate candidate");

  for (const auto& p : sorted) {
    const Real old = masks.mark_active(p);
    auto w = model.params()[masks.slots()[p.slot].param_index].value.data();
    w[p.index] = init == RegrowInit::rewind ? old : Real(0);
  }
}

template class MaskSet<float>;
template class MaskSet<double>;

#define BPRG_INSTANTIATE_SPARSITY(Real)                                                                     \
  template std::vector<std::uint8_t> magnitude_mask<Real>(std::span<const Real>, std::span<const std::size_t>, \
                                                          double, PruneScope, std::span<const std::uint8_t>);  \
  template void prune_to(Model<Real>&, MaskSet<Real>&, double, PruneScope);                                 \
  template MaskSet<Real> global_magnitude_mask(Model<Real>&, double, PruneScope);                           \
  template void apply_masks(Model<Real>&, const MaskSet<Real>&);                                            \
  template void masked_step(Model<Real>&, const MaskSet<Real>&, OptimizerState<Real>&);                     \
  template Saliency<Real> dense_saliency(Model<Real>&, const MaskSet<Real>&, BasicTensor<Real>&,            \
                                         std::span<const ops::Label>);                                      \
  template std::vector<Position> regrow_candidates(const MaskSet<Real>&, RegrowCriterion, std::size_t,      \
                                                   const Saliency<Real>*, RngState&);                       \
  template void regrow_apply(MaskSet<Real>&, std::span<const Position>, RegrowInit, Model<Real>&);

BPRG_INSTANTIATE_SPARSITY(float)
BPRG_INSTANTIATE_SPARSITY(double)

#undef BPRG_INSTANTIATE_SPARSITY

}  // namespace bprg
