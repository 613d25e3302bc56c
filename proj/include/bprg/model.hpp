#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bprg/rng.hpp"
#include "bprg/tape.hpp"
#include "bprg/tensor.hpp"

namespace bprg {

struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
  bool operator==(const Dense&) const = default;
};
struct Conv3x3 {
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  bool operator==(const Conv3x3&) const = default;
};
struct Flatten {
  bool operator==(const Flatten&) const = default;
};
struct Relu {
  bool operator==(const Relu&) const = default;
};

using LayerSpec = std::variant<Dense, Conv3x3, Flatten, Relu>;

std::string layer_to_string(const LayerSpec& layer);
bool has_parameters(const LayerSpec& layer);

enum class ParamRole : std::uint8_t { weight = 0, bias = 1 };

// Parameters enumerate by (layer_index asc, weight before bias).
struct ParamId {
  std::size_t layer_index = 0;
  ParamRole role = ParamRole::weight;

  auto operator<=>(const ParamId&) const = default;

  // "L<index>.weight" / "L<index>.bias"
  std::string name() const;
  // Throws FormatError for anything name() cannot produce.
  static ParamId parse(std::string_view name);
};

template <typename Real>
struct Parameter {
  ParamId id;
  BasicTensor<Real> value;
};

// Dense weights are [in x out] (x * W), conv kernels [c_out x c_in x 3 x 3].
template <typename Real>
class Model {
 public:
  Model() = default;
  // Throws ConfigError when the parameters do not match the spec exactly.
  Model(std::vector<LayerSpec> spec, std::vector<Parameter<Real>> params);

  const std::vector<LayerSpec>& spec() const { return spec_; }
  std::vector<Parameter<Real>>& params() { return params_; }
  const std::vector<Parameter<Real>>& params() const { return params_; }

  BasicTensor<Real>& param(ParamId id);
  const BasicTensor<Real>& param(ParamId id) const;
  std::size_t param_index(ParamId id) const;

  std::vector<BasicTensor<Real>*> param_tensors();
  std::vector<Shape> param_shapes() const;
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  std::vector<LayerSpec> spec_;
  std::vector<Parameter<Real>> params_;
};

// Output sample shape after running `sample_shape` through `spec`; throws
// ConfigError naming the first layer that does not compose.
Shape propagate_shape(const std::vector<LayerSpec>& spec, const Shape& sample_shape);

// He-uniform weights, U[-sqrt(6/fan_in), sqrt(6/fan_in)], drawn in parameter
// enumeration order and row-major within a tensor; biases start at zero.
template <typename Real>
Model<Real> build_model(std::vector<LayerSpec> spec, const Shape& sample_shape, RngState& rng);

// Logits [b x classes]. Records onto `tape` when it is recording.
template <typename Real>
BasicTensor<Real>& forward(Model<Real>& model, Tape<Real>& tape, BasicTensor<Real>& batch);

struct PrunableSlot {
  ParamId id;
  std::size_t length = 0;
  std::size_t param_index = 0;  // position in Model::params()
};

// Weight-role parameters in enumeration order. Biases are never prunable.
template <typename Real>
std::vector<PrunableSlot> prunable_slots(const Model<Real>& model);

std::size_t prunable_total(const std::vector<PrunableSlot>& slots);

template <typename To, typename From>
Model<To> model_cast(const Model<From>& model) {
  std::vector<Parameter<To>> params;
  params.reserve(model.params().size());
  for (const auto& p : model.params()) {
    std::vector<To> values(p.value.data().begin(), p.value.data().end());
    params.push_back({p.id, BasicTensor<To>(p.value.shape(), std::move(values), p.value.requires_grad())});
  }
  return Model<To>(model.spec(), std::move(params));
}

extern template class Model<float>;
extern template class Model<double>;

}  // namespace bprg
